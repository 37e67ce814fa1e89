import numpy as np
import pytest

from dmech import systems
from dmech.dms import regularity_check, step
from dmech.errors import ConstraintViolationError, PreconditionError
from dmech.nonholonomic import (NonholonomicDMS, dla_residual, multiplier_oracle, nh_momentum,
                                nh_momentum_evolution_residual, nh_regularity_test, nh_simulate,
                                nh_step, unconstrained)

NH = systems.nonholonomic_particle(0.1)
YB = systems.y_translation_bundle()
Q0 = np.array([0.0, 0.0, 0.0])
Q1 = np.array([0.1, 0.1, 0.005])


def constant_section(q):
    return np.array([1.0])


def linear_section(q):
    return np.array([q[0]])


def test_consistency_and_seed():
    assert NH.check_consistency([Q0, Q1, np.array([0.3, -2.0, 1.0])]) <= 1e-15
    assert abs(NH.constraints(Q0, Q1)[0]) <= 1e-15


def test_dla_residual_examples():
    proj, cons = dla_residual(NH, Q0, Q1, np.array([0.2, 0.2, 0.01]))
    assert cons[0] == pytest.approx(0.005 - 0.15 * 0.1, abs=1e-15)
    hoc = systems.harmonic_oscillator(n=2)
    free = unconstrained(hoc)
    q = np.array([[0.1, 0.2], [0.3, 0.1], [0.2, -0.1]])
    from dmech.dms import del_residual
    p, c = dla_residual(free, *q)
    assert np.array_equal(p, del_residual(hoc, *q)) and c.size == 0
    fp = systems.free_particle(3, 0.1)
    flat = NonholonomicDMS(fp, NH.basis, NH.annihilator, NH.chi)
    a, b, c3 = np.zeros(3), np.array([0.1, 0.0, 0.0]), np.array([0.2, 0.0, 0.0])
    assert np.max(np.abs(dla_residual(flat, a, b, c3)[0])) <= 1e-12


def test_nh_step_matches_oracle():
    q2 = nh_step(NH, Q0, Q1)
    proj, cons = dla_residual(NH, Q0, Q1, q2)
    assert max(np.max(np.abs(proj)), np.max(np.abs(cons))) <= 1e-10
    q2o, lam = multiplier_oracle(NH, Q0, Q1)
    assert np.max(np.abs(q2 - q2o)) <= 1e-9
    assert lam.size == 1


def test_collapse_to_unconstrained():
    cf = systems.harmonic_oscillator(n=2)
    free = unconstrained(cf)
    a, b = np.array([1.0, 0.2]), np.array([0.95, 0.3])
    assert np.max(np.abs(nh_step(free, a, b) - step(cf, a, b))) <= 1e-12
    q2, lam = multiplier_oracle(free, a, b)
    assert lam.size == 0 and np.max(np.abs(q2 - step(cf, a, b))) <= 1e-12


def test_flat_motion_needs_no_multiplier():
    a, b = np.zeros(3), np.array([0.1, 0.0, 0.0])
    _, lam = multiplier_oracle(NH, a, b)
    assert abs(lam[0]) <= 1e-9


def test_incompatible_seed():
    with pytest.raises(ConstraintViolationError):
        nh_step(NH, Q0, np.array([0.1, 0.1, 0.015]))


def test_simulate_preserves_constraint():
    curve, diag = nh_simulate(NH, Q0, Q1, 500)
    assert np.max(np.abs(diag.extra["constraints"])) <= 1e-10
    assert diag.max_residual <= 1e-10
    for k in range(1, 500, 37):
        proj, _ = dla_residual(NH, curve[k - 1], curve[k], curve[k + 1])
        assert np.max(np.abs(proj)) <= 1e-10


def test_regularity():
    assert nh_regularity_test(NH, Q0, Q1, nh_step(NH, Q0, Q1))
    zero = unconstrained(systems.zero_lagrangian(3))
    assert not nh_regularity_test(zero, Q0, Q1, Q1)
    ho = systems.harmonic_oscillator(n=2)
    a, b = np.array([1.0, 0.2]), np.array([0.95, 0.3])
    assert nh_regularity_test(unconstrained(ho), a, b, step(ho, a, b)) == regularity_check(ho, a, b)[0]


def test_nh_momentum_examples():
    assert nh_momentum(NH, YB, constant_section, Q0, Q1) == pytest.approx(1.0, abs=1e-12)
    assert nh_momentum(NH, YB, lambda q: np.zeros(1), Q0, Q1) == 0.0
    two = nh_momentum(NH, YB, lambda q: np.array([2.0]), Q0, Q1)
    assert two == pytest.approx(2.0, abs=1e-12)
    bad = systems.TrivialBundle(systems.LieGroup.vector(1), 2, shape_indices=[1, 2], fiber_indices=[0])
    with pytest.raises(PreconditionError):
        nh_momentum(NH, bad, constant_section, np.array([0.0, 0.5, 0.0]), np.array([0.1, 0.5, 0.05]))


def test_momentum_evolution():
    curve, _ = nh_simulate(NH, Q0, Q1, 200)
    worst_c = worst_l = 0.0
    rhs_seen = 0.0
    for k in range(1, 201):
        t = curve[k - 1], curve[k], curve[k + 1]
        worst_c = max(worst_c, abs(nh_momentum_evolution_residual(NH, YB, constant_section, *t)))
        worst_l = max(worst_l, abs(nh_momentum_evolution_residual(NH, YB, linear_section, *t)))
        rhs_seen = max(rhs_seen, abs(nh_momentum(NH, YB, linear_section, t[1], t[2])
                                     - nh_momentum(NH, YB, linear_section, t[0], t[1])))
    assert worst_c <= 1e-8 and worst_l <= 1e-8 and rhs_seen > 1e-6
    t = curve[0], curve[1], curve[2]
    assert nh_momentum_evolution_residual(NH, YB, lambda q: np.zeros(1), *t) == 0.0
