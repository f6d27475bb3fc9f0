"""Levenberg-Marquardt and damped Newton solvers with box constraints."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .numerics import JacobianError, fd_jacobian

__all__ = ["RootProblem", "RootResult", "solve_lm", "solve_newton", "multi_start"]


@dataclass
class RootProblem:
    residual: Callable
    x0: np.ndarray
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    max_iters: int = 200
    residual_tol: float = 1e-9
    step_tol: float = 1e-12
    fd_step: float = 1e-6
    batch_residual: Optional[Callable] = None

    def __post_init__(self):
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        n = self.x0.size
        self.lower = (
            np.full(n, -np.inf) if self.lower is None
            else np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        )
        self.upper = (
            np.full(n, np.inf) if self.upper is None
            else np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        )
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        if np.any(self.x0 < self.lower) or np.any(self.x0 > self.upper):
            raise ValueError("x0 lies outside the bounds")

    def project(self, x):
        return np.clip(x, self.lower, self.upper)


@dataclass
class RootResult:
    x: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    message: str = ""


def _eval(problem, x):
    r = np.atleast_1d(np.asarray(problem.residual(x), dtype=float))
    return r, float(np.linalg.norm(r)) if np.all(np.isfinite(r)) else np.inf


def solve_lm(problem: RootProblem, lam0: float = 1e-3) -> RootResult:
    """Levenberg-Marquardt with a central-difference Jacobian.

    Damping is adapted by the gain ratio: accepted steps divide ``lam`` by
    3, rejected ones double it. Trial points are projected onto the box.
    More unknowns than residuals is fine; the damped normal equations pick a
    minimum-norm-like step and any zero is accepted.
    """
    x = problem.project(problem.x0)
    r, norm = _eval(problem, x)
    if not np.isfinite(norm):
        raise JacobianError(-1)
    history = [norm]
    lam = lam0
    it = 0
    message = "max_iters"
    while it < problem.max_iters:
        if norm <= problem.residual_tol:
            message = "converged"
            break
        it += 1
        J = fd_jacobian(problem.residual, x, "central", problem.fd_step,
                        batch=problem.batch_residual)
        A = J.T @ J
        g = J.T @ r
        d = np.diag(A).copy()
        d = np.maximum(d, 1e-9 * max(d.max(initial=0.0), 1.0))
        accepted = False
        while lam < 1e16:
            try:
                dx = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam *= 2
                continue
            x_new = problem.project(x + dx)
            step = x_new - x
            if np.linalg.norm(step) <= problem.step_tol * (np.linalg.norm(x) + problem.step_tol):
                break
            r_new, norm_new = _eval(problem, x_new)
            pred = norm**2 - float(np.linalg.norm(r + J @ step) ** 2)
            actual = norm**2 - norm_new**2
            if np.isfinite(norm_new) and actual > 0 and pred > 0 and actual / pred > 1e-4:
                x, r, norm = x_new, r_new, norm_new
                history.append(norm)
                lam = max(lam / 3, 1e-12)
                accepted = True
                break
            lam *= 2
        if not accepted:
            message = "stalled"
            break
    else:
        if norm <= problem.residual_tol:
            message = "converged"
    converged = norm <= problem.residual_tol
    return RootResult(x, norm, it, converged, history, "converged" if converged else message)


def solve_newton(problem: RootProblem, cond_limit: float = 1e12) -> RootResult:
    """Newton's method with Armijo backtracking.

    Falls back to a Levenberg-Marquardt step when the Jacobian condition
    estimate exceeds ``cond_limit``.
    """
    x = problem.project(problem.x0)
    r, norm = _eval(problem, x)
    if not np.isfinite(norm):
        raise JacobianError(-1)
    history = [norm]
    it = 0
    message = "max_iters"
    while it < problem.max_iters:
        if norm <= problem.residual_tol:
            break
        it += 1
        J = fd_jacobian(problem.residual, x, "central", problem.fd_step,
                        batch=problem.batch_residual)
        if J.shape[0] != J.shape[1]:
            raise ValueError("solve_newton needs a square system")
        if np.linalg.cond(J) > cond_limit:
            A = J.T @ J
            dx = np.linalg.solve(A + 1e-3 * np.diag(np.maximum(np.diag(A), 1e-12)), -J.T @ r)
        else:
            dx = np.linalg.solve(J, -r)
        # Armijo on 0.5|r|^2, directional derivative -|r|^2 for the Newton step
        slope = float(r @ (J @ dx))
        t = 1.0
        while True:
            x_new = problem.project(x + t * dx)
            r_new, norm_new = _eval(problem, x_new)
            if np.isfinite(norm_new) and 0.5 * norm_new**2 <= 0.5 * norm**2 + 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-12:
                break
        if t < 1e-12:
            message = "line search failed"
            break
        step = np.linalg.norm(x_new - x)
        x, r, norm = x_new, r_new, norm_new
        history.append(norm)
        if step <= problem.step_tol * (np.linalg.norm(x) + problem.step_tol):
            message = "stalled"
            break
    converged = norm <= problem.residual_tol
    return RootResult(x, norm, it, converged, history, "converged" if converged else message)


def _run_start(template, x0):
    x0 = np.clip(np.asarray(x0, dtype=float), template.lower, template.upper)
    try:
        return solve_lm(replace(template, x0=x0))
    except (JacobianError, FloatingPointError, ValueError) as exc:
        return RootResult(x0, np.inf, 0, False, [], f"failed: {exc}")


def default_workers():
    env = os.environ.get("EXTREMAL_STEERING_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def multi_start(
    problem_template: RootProblem,
    sampler: Callable[[int], np.ndarray],
    n_starts: int,
    stop_at_first: bool = False,
    workers: int = 1,
) -> list:
    """Run ``solve_lm`` from ``sampler(0..n_starts-1)``.

    Results are sorted by residual norm, ties by distance from the start
    point. With ``stop_at_first`` the starts are run in order and the list
    ends at the first converged one. The residual must be reentrant when
    ``workers > 1``; results do not depend on the worker count.
    """
    results = []
    if stop_at_first or workers <= 1:
        for i in range(n_starts):
            x0 = np.asarray(sampler(i), dtype=float)
            res = _run_start(problem_template, x0)
            results.append((res, x0))
            if stop_at_first and res.converged:
                break
    else:
        starts = [np.asarray(sampler(i), dtype=float) for i in range(n_starts)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(lambda x0: _run_start(problem_template, x0), starts))
        results = list(zip(outs, starts))
    order = sorted(
        range(len(results)),
        key=lambda k: (results[k][0].residual_norm,
                       float(np.linalg.norm(results[k][0].x - results[k][1])), k),
    )
    return [results[k][0] for k in order]
