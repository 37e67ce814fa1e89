import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dmech.bundle import (PrincipalConnection, ShapeShiftConnection, TrivialBundle,
                          TrivialDiscreteConnection, act, discrete_conn, discrete_horizontal_lift,
                          ftilde1, group_difference, inf_generator, tangent_discrete_conn, upsilon)
from dmech.errors import DescriptorMismatchError, NotInSameFiberError
from dmech.lie import LieGroup

V1 = TrivialBundle(LieGroup.vector(1), 1)
S1 = TrivialBundle(LieGroup.circle(), 1)
PB = TrivialBundle(LieGroup.product(LieGroup.vector(1), LieGroup.circle()), 2,
                   shape_indices=[0, 3], fiber_indices=[2, 1])


def test_act_examples():
    q = V1.point([1.0], [3.0])
    assert act(V1, [2.0], q).fiber[0] == 5.0
    assert act(S1, [0.3], S1.point([1.0], [0.5])).fiber[0] == pytest.approx(0.8)
    q2 = act(S1, [0.0], S1.point([1.0], [0.5]))
    assert q2.fiber[0] == 0.5 and q2.shape[0] == 1.0
    with pytest.raises(DescriptorMismatchError):
        act(S1, [0.1, 0.2], S1.point([1.0], [0.5]))


def test_inf_generator_examples():
    assert np.allclose(inf_generator(V1, [1.0], V1.point([2.0], [0.0])), [0, 1])
    assert inf_generator(S1, [2.0], S1.point([1.0], [0.5]))[1] == 2.0
    assert not inf_generator(S1, [0.0], S1.point([1.0], [0.5])).any()


def test_group_difference_examples():
    assert group_difference(S1, S1.point([1.0], [0.3]), S1.point([1.0], [0.5]))[0] == pytest.approx(0.2)
    q = S1.point([1.0], [0.3])
    assert group_difference(S1, q, q)[0] == 0.0
    assert group_difference(V1, V1.point([0.0], [2.0]), V1.point([0.0], [7.0]))[0] == 5.0
    with pytest.raises(NotInSameFiberError):
        group_difference(S1, S1.point([1.0], [0.3]), S1.point([2.0], [0.3]))


def test_trivial_connection_examples():
    conn = TrivialDiscreteConnection(S1)
    q0, q1 = S1.point([1.0], [0.3]), S1.point([2.0], [0.5])
    assert discrete_conn(conn, q0, q1)[0] == pytest.approx(0.2)
    # level and horizontal lift
    assert discrete_conn(conn, q0, act(S1, conn.level(S1.join(q0)), q0))[0] == 0.0
    lifted = discrete_horizontal_lift(conn, q0, [2.5])
    assert lifted.shape[0] == 2.5 and lifted.fiber[0] == 0.3
    lift_self = discrete_horizontal_lift(conn, q0, q0.shape)
    assert np.allclose(S1.join(lift_self), S1.join(act(S1, conn.level(S1.join(q0)), q0)))
    # equivariance spot value
    g = [0.4]
    assert discrete_conn(conn, act(S1, g, q0), act(S1, g, q1))[0] == pytest.approx(0.2)


def test_tangent_discrete_conn():
    conn = TrivialDiscreteConnection(S1)
    q0, q1 = S1.point([1.0], [0.3]), S1.point([2.0], [0.5])
    assert tangent_discrete_conn(conn, q0, q1, [0, 0.1], [0, 0.3])[0] == pytest.approx(0.2)
    assert tangent_discrete_conn(conn, q0, q1, [0, 0], [0, 0])[0] == 0.0
    assert tangent_discrete_conn(conn, q0, q1, [0.7, 0.4], [-1.0, 0.9])[0] == pytest.approx(0.5)


def test_upsilon_and_ftilde1():
    conn = TrivialDiscreteConnection(S1)
    q0, q1 = S1.point([1.0], [0.3]), S1.point([2.0], [0.5])
    v, tau1 = upsilon(conn, q0, q1)
    assert v.v_rep[0] == pytest.approx(0.2) and tau1[0] == 2.0
    q = ftilde1(conn, q0, [0.2], [2.0])
    assert q.fiber[0] == pytest.approx(0.5) and q.shape[0] == 2.0


def _rand_pair(b, rng):
    return b.random_point(rng), b.random_point(rng)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_upsilon_ftilde1_round_trip(seed):
    rng = np.random.default_rng(seed)
    for b in (S1, PB):
        conn = TrivialDiscreteConnection(b)
        q0, q1 = _rand_pair(b, rng)
        v, tau1 = upsilon(conn, q0, q1)
        w = b.group.conjugate(q0.fiber, v.v_rep)
        back = ftilde1(conn, q0, w, tau1)
        assert b.distance(b.join(back), b.join(q1)) <= 1e-12


def test_equivariance_and_section_property_samples():
    rng = np.random.default_rng(5)
    for b in (S1, V1, PB):
        conn = TrivialDiscreteConnection(b)
        G = b.group
        for _ in range(1000):
            q0, q1 = _rand_pair(b, rng)
            g0, g1 = G.random(rng), G.random(rng)
            lhs = discrete_conn(conn, act(b, g0, q0), act(b, g1, q1))
            rhs = G.mul(G.mul(g1, discrete_conn(conn, q0, q1)), G.inv(g0))
            assert np.max(np.abs(G.difference(lhs, rhs))) <= 1e-12
            tau = rng.standard_normal(b.shape_dim)
            lq = discrete_horizontal_lift(conn, q0, tau)
            assert np.array_equal(lq.shape, tau)
            assert np.max(np.abs(G.log(discrete_conn(conn, q0, lq))), initial=0) <= 1e-12


def test_shape_shift_connection_laws():
    off = lambda s0, s1: 0.3 * (s1 - s0) * (s0 + s1)
    jac = lambda s0, s1: (np.array([[0.3 * (-2 * s0[0])]]), np.array([[0.3 * 2 * s1[0]]]))
    conn = ShapeShiftConnection(V1, off, jac)
    fd = ShapeShiftConnection(V1, off)
    rng = np.random.default_rng(6)
    for _ in range(50):
        x0, x1 = rng.standard_normal(2), rng.standard_normal(2)
        assert abs(conn.form(x0, conn.lift(x0, x1[:1]))[0]) <= 1e-12
        a, b = conn.form_jacobians(x0, x1), fd.form_jacobians(x0, x1)
        assert np.allclose(a[0], b[0], atol=1e-8) and np.allclose(a[1], b[1], atol=1e-8)
        w = rng.standard_normal(1)
        ja, jb = conn.ftilde1_jacobians(x0, w, x1[:1]), fd.ftilde1_jacobians(x0, w, x1[:1])
        for u, v in zip(ja, jb):
            assert np.allclose(u, v, atol=1e-8)
        g0, g1 = rng.standard_normal(1), rng.standard_normal(1)
        lhs = conn.form(V1.act_flat(g0, x0), V1.act_flat(g1, x1))
        assert lhs[0] == pytest.approx(g1[0] + conn.form(x0, x1)[0] - g0[0], abs=1e-12)


def test_principal_connection():
    rng = np.random.default_rng(7)
    for b in (S1, PB):
        A = PrincipalConnection(b)
        for _ in range(20):
            x = b.join(b.random_point(rng))
            xi = rng.standard_normal(b.group.dim)
            assert np.allclose(A(x, b.inf_generator(xi, b.split(x))), xi, atol=1e-12)
            dt = rng.standard_normal(b.shape_dim)
            v = A.horizontal_lift(x, dt)
            assert np.allclose(A(x, v), 0, atol=1e-12)
            assert np.array_equal(b.shape_of(v), dt)


def test_bundle_index_validation():
    with pytest.raises(ValueError):
        TrivialBundle(LieGroup.circle(), 1, shape_indices=[0], fiber_indices=[0])
    with pytest.raises(DescriptorMismatchError):
        S1.split([1.0, 2.0, 3.0])
