import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from extremal_steering.rootfind import (
    RootProblem,
    default_workers,
    multi_start,
    solve_lm,
    solve_newton,
)


def rosenbrock(x):
    return np.array([1 - x[0], 10 * (x[1] - x[0] ** 2)])


def test_lm_scalar_affine():
    res = solve_lm(RootProblem(lambda x: x - 3, [0.0], residual_tol=1e-12))
    assert res.converged
    np.testing.assert_allclose(res.x, [3.0])
    assert res.residual_norm <= 1e-12


def test_lm_rosenbrock():
    res = solve_lm(RootProblem(rosenbrock, [-1.2, 1.0], residual_tol=1e-12))
    assert res.converged
    np.testing.assert_allclose(res.x, [1, 1], atol=1e-8)


def test_lm_underdetermined_accepts_any_zero():
    res = solve_lm(RootProblem(lambda x: np.array([x[0] + x[1] - 1]), [0.0, 0.0],
                               residual_tol=1e-10))
    assert res.converged
    assert abs(res.x.sum() - 1) <= 1e-10


def test_lm_history_nonincreasing():
    res = solve_lm(RootProblem(rosenbrock, [-1.2, 1.0], residual_tol=1e-12))
    h = np.asarray(res.history)
    assert h.size >= 2
    assert np.all(np.diff(h) <= 0)


@given(st.floats(-5, 5), st.floats(-5, 5))
@settings(max_examples=40, deadline=None)
def test_lm_iterates_stay_in_bounds(a, b):
    lo, hi = np.array([-1.0, 0.5]), np.array([2.0, 3.0])
    seen = []

    def r(x):
        seen.append(np.array(x))
        return np.array([x[0] - a, x[1] - b, x[0] * x[1] - a * b])

    x0 = np.clip([0.3, 1.0], lo, hi)
    res = solve_lm(RootProblem(r, x0, lo, hi, max_iters=50))
    assert np.all(res.x >= lo) and np.all(res.x <= hi)
    # FD probes may step just outside; accepted points are projected
    if res.converged:
        assert res.residual_norm <= 1e-9


def test_converged_residual_reevaluates_below_tol():
    prob = RootProblem(rosenbrock, [-1.2, 1.0], residual_tol=1e-10)
    res = solve_lm(prob)
    assert np.linalg.norm(rosenbrock(res.x)) <= prob.residual_tol


def test_bad_bounds_rejected():
    with pytest.raises(ValueError):
        RootProblem(lambda x: x, [0.0], lower=[1.0], upper=[0.0])
    with pytest.raises(ValueError):
        RootProblem(lambda x: x, [5.0], lower=[0.0], upper=[1.0])


def test_newton_cubic():
    res = solve_newton(RootProblem(lambda x: x**3 - 8, [3.0], residual_tol=1e-13))
    assert res.converged
    np.testing.assert_allclose(res.x, [2.0], atol=1e-12)


def test_newton_linear_one_step():
    A = np.array([[3.0, 1.0], [1.0, 2.0]])
    b = np.array([9.0, 8.0])
    # central differences are exact on affine maps; a wide step keeps round-off out
    res = solve_newton(RootProblem(lambda x: A @ x - b, [0.0, 0.0], residual_tol=1e-12,
                                   fd_step=1e-2))
    np.testing.assert_allclose(res.x, np.linalg.solve(A, b), rtol=1e-12)
    assert res.iterations <= 1


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.lists(st.floats(-5, 5), min_size=2, max_size=2))
@settings(max_examples=30, deadline=None)
def test_newton_square_linear_exact(a, b):
    A = np.array(a).reshape(2, 2) + 4 * np.eye(2)
    b = np.array(b)
    res = solve_newton(RootProblem(lambda x: A @ x - b, [0.0, 0.0], residual_tol=1e-12,
                                   fd_step=1e-2))
    x = np.linalg.solve(A, b)
    np.testing.assert_allclose(res.x, x, rtol=1e-12, atol=1e-12)


def test_multi_start_finds_both_roots():
    rng_starts = np.linspace(-3, 3, 50)
    out = multi_start(RootProblem(lambda x: x**2 - 1, [0.5], residual_tol=1e-12),
                      lambda i: [rng_starts[i]], 50)
    roots = {round(float(r.x[0]), 8) for r in out if r.converged}
    assert {-1.0, 1.0} <= roots


def test_multi_start_single_equals_solve_lm():
    prob = RootProblem(rosenbrock, [-1.2, 1.0])
    a = multi_start(prob, lambda i: [-1.2, 1.0], 1)[0]
    b = solve_lm(prob)
    np.testing.assert_array_equal(a.x, b.x)
    assert a.iterations == b.iterations


def test_multi_start_independent_of_workers():
    starts = np.random.default_rng(4).uniform(-2, 2, (12, 2))
    prob = RootProblem(lambda x: np.array([x[0] ** 2 + x[1] ** 2 - 1, x[0] - x[1] ** 3]), [0.0, 0.0])
    a = multi_start(prob, lambda i: starts[i], 12, workers=1)
    b = multi_start(prob, lambda i: starts[i], 12, workers=4)
    assert len(a) == len(b)
    for ra, rb in zip(a, b):
        np.testing.assert_array_equal(ra.x, rb.x)


def test_multi_start_sorted_and_stops_early():
    prob = RootProblem(lambda x: x**2 - 1, [0.5])
    calls = []

    def sampler(i):
        calls.append(i)
        return [2.0 + i]

    out = multi_start(prob, sampler, 10, stop_at_first=True)
    assert calls == [0]
    assert out[0].converged
    full = multi_start(prob, lambda i: [0.3 * i - 1.4], 10)
    norms = [r.residual_norm for r in full]
    assert norms == sorted(norms)


def test_default_workers_env(monkeypatch):
    monkeypatch.setenv("EXTREMAL_STEERING_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.delenv("EXTREMAL_STEERING_WORKERS")
    assert default_workers() >= 1
