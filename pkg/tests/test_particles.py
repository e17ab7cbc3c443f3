import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adjhydro import particles as P
from adjhydro.errors import ParticleOverlap
from adjhydro.ode_core import integrate, taylor_test


def brute_forces(x, q, g):
    n = len(q)
    F = np.zeros((n, 2))
    for i in range(n):
        for j in range(n):
            if i != j:
                r = x[i] - x[j]
                F[i] += q[i] * q[j] * r / np.linalg.norm(r) ** 3
        F[i, 1] -= g
    return F


def test_single_particle_feels_gravity_only():
    np.testing.assert_array_equal(P.forces(np.array([[0.3, 0.4]]), np.array([1.0]), 2.5), [[0.0, -2.5]])


def test_two_particle_closed_form():
    d = 0.7
    F = P.forces(np.array([[0.0, 0.0], [d, 0.0]]), np.ones(2), 1.0)
    np.testing.assert_allclose(F, [[-1 / d ** 2, -1.0], [1 / d ** 2, -1.0]], rtol=1e-15)


def coords(n):
    return st.lists(st.floats(-2, 2), min_size=2 * n, max_size=2 * n).map(
        lambda v: np.array(v).reshape(n, 2))


@settings(max_examples=50, deadline=None)
@given(coords(5), st.lists(st.floats(-2, 2), min_size=5, max_size=5))
def test_newton_third_law_and_brute_force(x, q):
    q = np.array(q)
    d = np.linalg.norm(x[:, None] - x[None], axis=-1) + np.eye(5)
    if d.min() < 1e-2:
        return
    F = P.forces(x, q, 0.8)
    np.testing.assert_allclose(F, brute_forces(x, q, 0.8), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose((F + [0.0, 0.8]).sum(axis=0), 0.0, atol=1e-10 * np.abs(F).max())


def test_overlap_guard():
    with pytest.raises(ParticleOverlap):
        P.forces(np.array([[0.0, 0.0], [0.0, 1e-8]]), np.ones(2))
    with pytest.raises(ParticleOverlap):
        P.forces_vjp(np.array([[0.0, 0.0], [0.0, 1e-8]]), np.ones(2), np.ones((2, 2)))


def test_force_vjp_matches_finite_differences():
    rng = np.random.default_rng(0)
    x = rng.random((4, 2)) * 2
    q = rng.random(4) + 0.5
    lam = rng.standard_normal((4, 2))
    xbar, qbar = P.forces_vjp(x, q, lam)
    h = 1e-6
    for i in range(4):
        for c in range(2):
            dx = np.zeros_like(x)
            dx[i, c] = h
            fd = np.sum(lam * (P.forces(x + dx, q) - P.forces(x - dx, q))) / (2 * h)
            assert xbar[i, c] == pytest.approx(fd, rel=1e-6, abs=1e-8)
        dq = np.zeros(4)
        dq[i] = h
        fd = np.sum(lam * (P.forces(x, q + dq) - P.forces(x, q - dq))) / (2 * h)
        assert qbar[i] == pytest.approx(fd, rel=1e-6, abs=1e-8)


# -- objective ---------------------------------------------------------------------

def test_objective_zero_on_targets():
    assert P.circle_objective(P.circle_targets(8, 1.5), 1.5) == 0.0


def test_objective_single_displacement():
    x = P.circle_targets(6, 1.0)
    x[2, 0] += 0.3
    assert P.circle_objective(x, 1.0) == pytest.approx(0.5 * 0.09, rel=1e-14)


def test_objective_brute_force():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((5, 2))
    R = 1.7
    ref = 0.0
    for i in range(5):
        t = R * np.array([np.cos(2 * np.pi * i / 5), -np.sin(2 * np.pi * i / 5)])
        ref += 0.5 * np.sum((x[i] - t) ** 2)
    assert P.circle_objective(x, R) == pytest.approx(ref, rel=1e-14)


def test_objective_rejects_bad_radius():
    with pytest.raises(ValueError):
        P.circle_objective(np.zeros((2, 2)), 0.0)


def test_targets_run_clockwise():
    t = P.circle_targets(4, 2.0)
    np.testing.assert_allclose(t, [[2, 0], [0, -2], [-2, 0], [0, 2]], atol=1e-15)


# -- start configuration -----------------------------------------------------------

def test_random_start_properties():
    s = P.random_start(8, seed=3)
    assert np.all(s.v == 0) and np.all(s.q == 1.0)
    d = np.linalg.norm(s.x[:, None] - s.x[None], axis=-1) + 10 * np.eye(8)
    assert d.min() >= 1.0
    assert np.all(np.abs(s.x) <= 2.0)
    assert np.array_equal(s.x, P.random_start(8, seed=3).x)


def test_matching_labels_minimize_cost():
    rng = np.random.default_rng(5)
    x = rng.random((5, 2))
    t = P.circle_targets(5, 1.0)
    lab = P.label_by_matching(x, t)
    best = np.sum((lab - t) ** 2)
    from itertools import permutations
    brute = min(np.sum((x[list(p)] - t) ** 2) for p in permutations(range(5)))
    assert best == pytest.approx(brute, rel=1e-14)


def test_state_pack_roundtrip():
    s = P.random_start(4, seed=0)
    s.v = np.arange(8.0).reshape(4, 2)
    s2 = P.ParticleState.unpack(s.pack(), s.g)
    np.testing.assert_array_equal(s2.x, s.x)
    np.testing.assert_array_equal(s2.v, s.v)
    with pytest.raises(ValueError):
        P.ParticleState(np.zeros((2, 2)), np.zeros((3, 2)), np.ones(2))


# -- gradients ------------------------------------------------------------------------

def short_problem():
    return P.ParticleProblem(4, T=0.3, dt=1e-2, R=1.0)


def test_velocity_gradient_matches_central_differences():
    prob = short_problem()
    y = P.random_start(4, seed=1, R=1.0).pack()
    _, g = prob.value_and_grad(y)
    for k in range(8, 16):
        h = 1e-6
        d = np.zeros_like(y)
        d[k] = h
        fd = (prob.value(y + d) - prob.value(y - d)) / (2 * h)
        assert g[k] == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_charge_gradient_matches_central_differences():
    prob = short_problem()
    y = P.random_start(4, seed=2, R=1.0).pack()
    _, g = prob.value_and_grad(y)
    for k in range(16, 20):
        h = 1e-6
        d = np.zeros_like(y)
        d[k] = h
        fd = (prob.value(y + d) - prob.value(y - d)) / (2 * h)
        assert g[k] == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_taylor_slope_two():
    prob = short_problem()
    y = P.random_start(4, seed=4, R=1.0).pack()
    rng = np.random.default_rng(0)
    d = rng.standard_normal(len(y)) * P.velocity_mask(4)
    rep = taylor_test(prob.value, lambda y: prob.value_and_grad(y)[1], y, d)
    assert abs(rep.slope - 2.0) <= 0.1


def test_mask_zeroes_position_and_charge():
    m = P.velocity_mask(3)
    assert m.sum() == 6 and np.all(m[6:12]) and not m[:6].any() and not m[12:].any()


# -- optimizer ----------------------------------------------------------------------------

def test_optimizer_only_moves_velocities_and_is_monotone():
    s0 = P.random_start(4, seed=0, R=1.0)
    s, hist = P.optimize_initial_velocities(s0, R=1.0, T=0.3, dt=1e-2, iters=15)
    np.testing.assert_array_equal(s.x, s0.x)
    np.testing.assert_array_equal(s.q, s0.q)
    obj = [h.objective for h in hist]
    assert all(b <= a for a, b in zip(obj, obj[1:]))
    assert obj[-1] < 1e-3 * obj[0]


def test_optimal_start_stays_put():
    prob = P.ParticleProblem(1, T=0.5, dt=1e-2, R=1.0, g=0.0)
    s0 = P.ParticleState([[1.0, 0.0]], [[0.0, 0.0]], [1.0], g=0.0)
    s, hist = P.optimize_initial_velocities(s0, R=1.0, T=0.5, dt=1e-2, iters=5)
    assert hist[0].grad_norm < 1e-14
    np.testing.assert_array_equal(s.v, 0.0)


def test_forward_is_deterministic():
    prob = short_problem()
    y = P.random_start(4, seed=1, R=1.0).pack()
    a = integrate(prob.system, y, prob.schedule).states[-1]
    b = integrate(prob.system, y, prob.schedule).states[-1]
    assert np.array_equal(a, b)
