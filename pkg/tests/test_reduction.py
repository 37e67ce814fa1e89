import numpy as np
import pytest

from dmech import systems
from dmech.bundle import ShapeShiftConnection, TrivialBundle
from dmech.dms import DiscreteMechanicalSystem, del_residual, simulate
from dmech.errors import ConstraintViolationError, PreconditionError, SimulationError, SingularSystemError
from dmech.forced import ForcedDMS, forced_simulate
from dmech.lie import LieGroup
from dmech.nonholonomic import nh_simulate, unconstrained
from dmech.reduction import (ReducedCurve, ReducedPoint, ReducedSystem, check_invariance,
                             forced_phi_residual, forced_psi_residual, nh_reduced_residuals,
                             phi_residual, psi_residual, reconstruct, reduce_curve,
                             reduced_equivalence, reduced_simulate, reduced_step, two_stage_check,
                             variational_identity_check)

H = 0.1
CF = systems.central_force(H)
S1 = TrivialBundle(LieGroup.circle(), 1)


@pytest.fixture(scope="module")
def cf_curve():
    curve, _ = simulate(CF, [1.0, 0.0], [1.0, 0.1], 200)
    return curve


def cf_sampler(rng):
    q0 = np.array([rng.uniform(0.5, 2.0), rng.uniform(0, 2 * np.pi)])
    return q0, q0 + np.array([0.05, 0.1]) * rng.standard_normal(2)


def test_check_invariance():
    fp = systems.free_particle(2, H)
    assert check_invariance(fp, fp.bundle, 100) <= 1e-12
    assert check_invariance(CF, CF.bundle, 100, point_sampler=cf_sampler) <= 1e-12
    broken = systems.central_force(H, asymmetry=1e-2)
    assert check_invariance(broken, broken.bundle, 100, point_sampler=cf_sampler) > 1e-3


def test_reduce_curve_circle_examples():
    rs = ReducedSystem(CF, S1)
    curve = np.array([[1.0, 0.3], [1.1, 0.5], [1.2, 0.9]])
    red = reduce_curve(rs, curve)
    assert np.allclose(red.v_reps[:, 0], [0.2, 0.4], atol=1e-15)
    assert np.array_equal(red.taus[:, 0], [1.0, 1.1, 1.2])
    flat = reduce_curve(rs, np.array([[1.0, 0.3], [1.1, 0.3], [1.2, 0.3]]))
    assert not flat.v_reps.any()
    back = reconstruct(rs, red, curve[0])
    assert np.allclose(back[:, 1], [0.3, 0.5, 0.9], atol=1e-15)
    still = reconstruct(rs, flat, [1.0, 0.3])
    assert np.allclose(still[:, 1], 0.3)
    with pytest.raises(PreconditionError):
        reconstruct(rs, red, [2.0, 0.3])


def test_four_point_equivalence(cf_curve):
    rs = ReducedSystem(CF)
    red = reduce_curve(rs, cf_curve)
    eq = reduced_equivalence(rs, red)
    assert eq.shape == (200, 2)
    assert eq.max() <= 1e-8
    k = 50
    bumped = red.taus[k] + 1e-3
    phi = phi_residual(rs, red.point(k - 1), bumped, red.v_reps[k], red.taus[k + 1])
    assert np.max(np.abs(phi)) > 1e-6


def test_representative_independence(cf_curve):
    rs = ReducedSystem(CF)
    red = reduce_curve(rs, cf_curve)
    rng = np.random.default_rng(0)
    for k in range(1, 200, 23):
        args = (red.point(k - 1), red.taus[k], red.v_reps[k], red.taus[k + 1])
        g = rng.uniform(0, 2 * np.pi, 1)
        a = rs.four_point(*args)
        b = rs.four_point(*args, gauge=g)
        assert np.max(np.abs(a[0] - b[0])) <= 1e-10 and np.max(np.abs(a[1] - b[1])) <= 1e-10


def test_free_particle_degenerate_shape():
    fp = systems.free_particle(1, H)
    rs = ReducedSystem(fp)
    curve, _ = simulate(fp, [0.0], [0.1], 5)
    red = reduce_curve(rs, curve)
    assert red.taus.shape == (7, 0)
    phi = phi_residual(rs, red.point(0), red.taus[1], red.v_reps[1], red.taus[2])
    psi = psi_residual(rs, red.point(0), red.taus[1], red.v_reps[1], red.taus[2])
    assert phi.size == 0 and abs(psi[0]) <= 1e-12
    rc, _ = reduced_simulate(rs, red.point(0), red.taus[1], 10)
    assert np.allclose(rc.v_reps, 0.1, atol=1e-12)


def test_reduced_simulate_and_reconstruct(cf_curve):
    rs = ReducedSystem(CF)
    seed = reduce_curve(rs, cf_curve[:2])
    rc, norms = reduced_simulate(rs, seed.point(0), seed.taus[1], 200)
    ref = reduce_curve(rs, cf_curve)
    assert np.max(np.abs(rc.taus - ref.taus)) <= 1e-8
    assert np.max(np.abs(rc.v_reps - ref.v_reps)) <= 1e-8
    back = reconstruct(rs, rc, cf_curve[0])
    assert max(CF.bundle.distance(a, b) for a, b in zip(back, cf_curve)) <= 1e-8
    res = [np.max(np.abs(del_residual(CF, *back[k - 1:k + 2]))) for k in range(1, 201)]
    assert max(res) <= 1e-8


def test_round_trips(cf_curve):
    rs = ReducedSystem(CF)
    red = reduce_curve(rs, cf_curve)
    back = reconstruct(rs, red, cf_curve[0])
    assert max(CF.bundle.distance(a, b) for a, b in zip(back, cf_curve)) <= 1e-10
    again = reduce_curve(rs, back)
    assert np.max(np.abs(again.taus - red.taus)) <= 1e-12
    assert np.max(np.abs(LieGroup.circle().difference(again.v_reps[0], red.v_reps[0]))) <= 1e-12


def test_connection_independence(cf_curve):
    off = lambda s0, s1: 0.2 * (s1 - s0) * (s0 + s1)
    jac = lambda s0, s1: (np.array([[-0.4 * s0[0]]]), np.array([[0.4 * s1[0]]]))
    rs0 = ReducedSystem(CF)
    rs1 = ReducedSystem(CF, conn=ShapeShiftConnection(CF.bundle, off, jac))
    seeds = [reduce_curve(r, cf_curve[:2]) for r in (rs0, rs1)]
    outs = []
    for r, sd in zip((rs0, rs1), seeds):
        rc, _ = reduced_simulate(r, sd.point(0), sd.taus[1], 60)
        outs.append(reconstruct(r, rc, cf_curve[0]))
    assert max(CF.bundle.distance(a, b) for a, b in zip(*outs)) <= 1e-9


def test_degenerate_seed_is_singular():
    # a pure shape potential: constant nonzero phi, zero Jacobian
    sys = DiscreteMechanicalSystem(lambda a, b: float(a[0]), 2,
                                   bundle=TrivialBundle(LieGroup.vector(1), 1, [0], [1]))
    with pytest.raises(SingularSystemError):
        reduced_step(ReducedSystem(sys), ReducedPoint(np.zeros(1), np.array([0.1])), np.ones(1))


def test_variational_identity(cf_curve):
    rs = ReducedSystem(CF)
    assert variational_identity_check(rs, cf_curve[:60], 100) <= 1e-5
    assert variational_identity_check(rs, cf_curve[:60], 3, zero=True) == 0.0
    fp = systems.free_particle(2, H)
    fc, _ = simulate(fp, [0.0, 0.0], [0.1, 0.05], 30)
    assert variational_identity_check(ReducedSystem(fp), fc, 100) <= 1e-6


def test_forced_collapse_and_damped_reduction(cf_curve):
    rs = ReducedSystem(CF)
    rf = ReducedSystem(ForcedDMS(CF))
    red = reduce_curve(rs, cf_curve)
    for k in range(1, 200, 17):
        args = (red.point(k - 1), red.taus[k], red.v_reps[k], red.taus[k + 1])
        assert np.max(np.abs(forced_phi_residual(rf, *args) - phi_residual(rs, *args))) <= 1e-14
        assert np.max(np.abs(forced_psi_residual(rf, *args) - psi_residual(rs, *args))) <= 1e-14
    for n in (1, 2):
        dp = systems.damped_particle(H, 1.0, n)
        q1 = np.full(n, 0.1) if n == 1 else np.array([0.1, 0.05])
        curve, _ = forced_simulate(dp, np.zeros(n), q1, 100)
        rd = ReducedSystem(dp)
        assert reduced_equivalence(rd, reduce_curve(rd, curve)).max() <= 1e-8


def test_damped_psi_is_the_momentum_balance():
    dp = systems.damped_particle(H, 1.0, 1)
    curve, _ = forced_simulate(dp, [0.0], [0.1], 20)
    rd, r0 = ReducedSystem(dp), ReducedSystem(dp.base)
    red = reduce_curve(rd, curve)
    for k in range(1, 20):
        args = (red.point(k - 1), red.taus[k], red.v_reps[k], red.taus[k + 1])
        unforced = psi_residual(r0, *args)[0]
        # momentum drifts by the force pairing with the generator
        balance = dp.fp(curve[k - 1], curve[k])[0] + dp.fm(curve[k], curve[k + 1])[0]
        assert abs(unforced) > 1e-4
        assert unforced + balance == pytest.approx(0.0, abs=1e-8)


def test_nonholonomic_reduction():
    nh = systems.nonholonomic_particle(H)
    curve, _ = nh_simulate(nh, [0.0, 0.0, 0.0], [0.1, 0.1, 0.005], 100)
    rs = ReducedSystem(nh)
    red = reduce_curve(rs, curve)
    assert reduced_equivalence(rs, red).max() <= 1e-7
    rc, _ = reduced_simulate(rs, red.point(0), red.taus[1], 100)
    back = reconstruct(rs, rc, curve[0])
    assert np.max(np.abs(back - curve)) <= 1e-8
    bad = ReducedPoint(red.taus[0], red.v_reps[0] + np.array([0.0, 0.01]))
    with pytest.raises(ConstraintViolationError):
        nh_reduced_residuals(rs, bad, red.taus[1], red.v_reps[1], red.taus[2])


def test_unconstrained_nh_reduction_collapses(cf_curve):
    rs, ru = ReducedSystem(CF), ReducedSystem(unconstrained(CF))
    red = reduce_curve(rs, cf_curve)
    args = (red.point(4), red.taus[5], red.v_reps[5], red.taus[6])
    a, b = rs.four_point(*args), nh_reduced_residuals(ru, *args)
    assert np.max(np.abs(a[0] - b[0])) <= 1e-14 and np.max(np.abs(a[1] - b[1])) <= 1e-14


def test_two_stage():
    fp = systems.free_particle_staged(H)
    out = two_stage_check(fp, fp.bundle, [0.0, 0.0], [0.1, 0.03], 50)
    assert out["staged_vs_one_shot"] <= 1e-9 and out["one_shot_vs_full"] <= 1e-9
    cp = systems.central_force_product(H)
    out = two_stage_check(cp, cp.bundle, [1.0, 0.0, 0.0], [1.0, 0.1, 0.02], 100)
    assert out["staged_vs_one_shot"] <= 1e-8 and out["staged_vs_full"] <= 1e-8
    # trivial K: split at the full product leaves nothing for stage two
    out = two_stage_check(fp, fp.bundle, [0.0, 0.0], [0.1, 0.03], 20, split=2)
    assert out["staged_vs_one_shot"] == 0.0
