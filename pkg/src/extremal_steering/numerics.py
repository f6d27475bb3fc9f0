"""Initial-value integration, bang-bang aware propagation and FD Jacobians.

All integrators accept state arrays of any shape; the error norm of the
adaptive scheme is the componentwise maximum, so a batch of independent
states stacked along a leading axis shares one step sequence.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "OdeProblem",
    "IntegrationResult",
    "Status",
    "PropagationError",
    "integrate_rk4",
    "integrate_adaptive",
    "integrate_with_switching",
    "fd_jacobian",
]

_EPS = np.finfo(float).eps

# Dormand-Prince 5(4) tableau
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B5 - _B4


class Status(str, enum.Enum):
    CONVERGED = "converged"
    STEP_UNDERFLOW = "step_underflow"
    EVENT_LIMIT = "event_limit"


class PropagationError(RuntimeError):
    """Raised when the state becomes non-finite.

    ``last_time`` and ``last_state`` hold the last finite sample.
    """

    def __init__(self, message, last_time, last_state):
        super().__init__(message)
        self.last_time = last_time
        self.last_state = last_state


@dataclass
class OdeProblem:
    """``dv/ds = rhs(s, v)`` on ``[t0, t1]`` starting from ``v0``."""

    rhs: Callable
    t0: float
    t1: float
    v0: np.ndarray
    max_step: float = np.inf
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10

    def __post_init__(self):
        self.v0 = np.array(self.v0, dtype=float)
        self.t0 = float(self.t0)
        self.t1 = float(self.t1)
        if not self.t1 >= self.t0:
            raise ValueError(f"t1 ({self.t1}) must not precede t0 ({self.t0})")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be strictly positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")


@dataclass
class IntegrationResult:
    times: np.ndarray
    states: np.ndarray
    status: Status = Status.CONVERGED
    switch_times: list = field(default_factory=list)

    @property
    def samples(self):
        return list(zip(self.times, self.states))

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    def at(self, t):
        """Linear interpolation between stored samples."""
        t = float(np.clip(t, self.times[0], self.times[-1]))
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        k = min(max(k, 0), len(self.times) - 2) if len(self.times) > 1 else 0
        if len(self.times) == 1:
            return self.states[0].copy()
        t0, t1 = self.times[k], self.times[k + 1]
        w = (t - t0) / (t1 - t0)
        return (1 - w) * self.states[k] + w * self.states[k + 1]


def _check_finite(v, t, last_t, last_v):
    if not np.all(np.isfinite(v)):
        raise PropagationError(f"non-finite state at t={t:.6g}", last_t, last_v)


def integrate_rk4(problem: OdeProblem, n_steps: int) -> IntegrationResult:
    """Classical fourth-order Runge-Kutta with a uniform step."""
    n_steps = int(n_steps)
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    f = problem.rhs
    h = (problem.t1 - problem.t0) / n_steps
    times = problem.t0 + h * np.arange(n_steps + 1)
    times[-1] = problem.t1
    states = np.empty((n_steps + 1,) + problem.v0.shape)
    v = problem.v0.copy()
    states[0] = v
    h2, h6 = h / 2, h / 6
    isfinite = np.isfinite
    for k in range(n_steps):
        s = float(times[k])
        k1 = f(s, v)
        k2 = f(s + h2, v + h2 * k1)
        k3 = f(s + h2, v + h2 * k2)
        k4 = f(s + h, v + h * k3)
        v_new = v + h6 * (k1 + 2 * (k2 + k3) + k4)
        if not isfinite(v_new).all():
            _check_finite(v_new, times[k + 1], s, v)
        v = v_new
        states[k + 1] = v
    return IntegrationResult(times, states)


def _dp_step(f, s, v, h, k1):
    """One Dormand-Prince step; returns (v_new, error_estimate, k7)."""
    k2 = f(s + h / 5, v + h * (k1 / 5))
    k3 = f(s + 3 * h / 10, v + h * (3 / 40 * k1 + 9 / 40 * k2))
    k4 = f(s + 4 * h / 5, v + h * (44 / 45 * k1 - 56 / 15 * k2 + 32 / 9 * k3))
    k5 = f(s + 8 * h / 9, v + h * (19372 / 6561 * k1 - 25360 / 2187 * k2
                                   + 64448 / 6561 * k3 - 212 / 729 * k4))
    k6 = f(s + h, v + h * (9017 / 3168 * k1 - 355 / 33 * k2 + 46732 / 5247 * k3
                           + 49 / 176 * k4 - 5103 / 18656 * k5))
    v_new = v + h * (35 / 384 * k1 + 500 / 1113 * k3 + 125 / 192 * k4
                     - 2187 / 6784 * k5 + 11 / 84 * k6)
    k7 = f(s + h, v_new)
    err = h * (_E[0] * k1 + _E[2] * k3 + _E[3] * k4 + _E[4] * k5 + _E[5] * k6 + _E[6] * k7)
    return v_new, err, k7


def _initial_step(f, s, v, k1, order, atol, rtol, span):
    scale = atol + rtol * np.abs(v)
    d0 = np.max(np.abs(v) / scale)
    d1 = np.max(np.abs(k1) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    k2 = f(s + h0, v + h0 * k1)
    d2 = np.max(np.abs(k2 - k1) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (order + 1))
    return min(100 * h0, h1, span)


class _Stepper:
    """Adaptive DP5(4) driver that can be paused, probed and resumed."""

    SAFETY = 0.9
    MIN_FACTOR = 0.2
    MAX_FACTOR = 5.0

    def __init__(self, f, t0, v0, t1, max_step, atol, rtol):
        self.f = f
        self.t = t0
        self.v = v0
        self.t1 = t1
        self.max_step = max_step
        self.atol = atol
        self.rtol = rtol
        self.k1 = f(t0, v0)
        span = t1 - t0
        self.h = min(
            _initial_step(f, t0, v0, self.k1, 4, atol, rtol, span) if span > 0 else 0.0,
            max_step,
        )

    def floor(self):
        return 16 * _EPS * max(abs(self.t), abs(self.t1), 1.0)

    def step(self):
        """Advance one accepted step. Returns False on step underflow."""
        while True:
            remaining = self.t1 - self.t
            h = min(self.h, self.max_step, remaining)
            if h < self.floor() and h < remaining:
                return False
            v_new, err, k7 = _dp_step(self.f, self.t, self.v, h, self.k1)
            if not np.all(np.isfinite(v_new)):
                self.h = h * self.MIN_FACTOR
                continue
            scale = self.atol + self.rtol * np.maximum(np.abs(self.v), np.abs(v_new))
            en = float(np.max(np.abs(err) / scale)) if err.size else 0.0
            if en <= 1.0:
                factor = self.MAX_FACTOR if en == 0 else min(
                    self.MAX_FACTOR, self.SAFETY * en ** -0.2
                )
                self.t = self.t1 if h == remaining else self.t + h
                self.v = v_new
                self.k1 = k7
                self.h = h * max(factor, 1.0)
                return True
            self.h = h * max(self.MIN_FACTOR, self.SAFETY * en ** -0.2)

    def probe(self, t_start, v_start, dt):
        """State reached from (t_start, v_start) after dt using sub-steps."""
        t, v = t_start, v_start
        end = t_start + dt
        h = dt
        while end - t > 0:
            h = min(h, end - t)
            k1 = self.f(t, v)
            v_new, err, _ = _dp_step(self.f, t, v, h, k1)
            scale = self.atol + self.rtol * np.maximum(np.abs(v), np.abs(v_new))
            en = float(np.max(np.abs(err) / scale)) if err.size else 0.0
            if en <= 1.0 or h < self.floor():
                t = end if h >= end - t else t + h
                v = v_new
            else:
                h *= max(self.MIN_FACTOR, self.SAFETY * en ** -0.2)
        return v


def integrate_adaptive(problem: OdeProblem) -> IntegrationResult:
    """Dormand-Prince 5(4) with local error control.

    Each accepted step satisfies ``|err_i| <= abs_tol + rel_tol * |v_i|``
    componentwise. If the step size falls below a machine-scaled floor the
    samples so far are returned with status ``step_underflow``.
    """
    st = _Stepper(
        problem.rhs, problem.t0, problem.v0.copy(), problem.t1,
        problem.max_step, problem.abs_tol, problem.rel_tol,
    )
    times = [problem.t0]
    states = [problem.v0.copy()]
    status = Status.CONVERGED
    while st.t < problem.t1:
        if not st.step():
            status = Status.STEP_UNDERFLOW
            break
        times.append(st.t)
        states.append(st.v)
    return IntegrationResult(np.array(times), np.array(states), status)


def _branch_of(value):
    return 1 if value >= 0 else -1


def _locate_sign_change(st, t_lo, v_lo, t_hi, v_hi, switch_fn, branch, t_tol):
    """Bracket the first sign change of ``switch_fn`` to width ``t_tol``.

    Regula falsi with the Illinois weighting picks trial points; a trial
    that fails to shrink the bracket by half is replaced by the midpoint,
    so the bracket contracts at least as fast as bisection every other step.
    Returns the right end of the final bracket and its state.
    """
    t_a, t_b = t_lo, t_hi
    g_a, g_b = switch_fn(v_lo) * branch, switch_fn(v_hi) * branch
    side = 0
    while t_b - t_a > t_tol:
        width = t_b - t_a
        denom = g_a - g_b
        t_m = t_a + width * (g_a / denom) if denom > 0 else 0.5 * (t_a + t_b)
        t_m = min(max(t_m, t_a + 0.25 * t_tol), t_b - 0.25 * t_tol)
        v_m = st.probe(t_lo, v_lo, t_m - t_lo)
        g_m = switch_fn(v_m) * branch
        if g_m >= 0:
            t_a, g_a = t_m, g_m
            if side == 1:
                g_b *= 0.5
            side = 1
        else:
            t_b, v_hi, g_b = t_m, v_m, g_m
            if side == -1:
                g_a *= 0.5
            side = -1
        if t_b - t_a > 0.5 * width:
            t_m = 0.5 * (t_a + t_b)
            v_m = st.probe(t_lo, v_lo, t_m - t_lo)
            g_m = switch_fn(v_m) * branch
            if g_m >= 0:
                t_a, g_a = t_m, g_m
            else:
                t_b, v_hi, g_b = t_m, v_m, g_m
            side = 0
        # a tight bracket around the estimate closes the search quickly
        if t_b - t_a > t_tol and side != 0:
            est = t_a if side == 1 else t_b
            for cand in (est - 0.5 * t_tol, est + 0.5 * t_tol):
                if t_a < cand < t_b:
                    v_c = st.probe(t_lo, v_lo, cand - t_lo)
                    g_c = switch_fn(v_c) * branch
                    if g_c >= 0:
                        t_a, g_a = cand, g_c
                    else:
                        t_b, v_hi, g_b = cand, v_c, g_c
                        break
    return t_b, v_hi


def integrate_with_switching(
    problem: OdeProblem,
    switch_fn: Callable,
    max_switches: int = 1000,
) -> IntegrationResult:
    """Piecewise integration across sign changes of ``switch_fn``.

    ``problem.rhs`` is called as ``rhs(s, v, branch)`` where ``branch`` is
    the sign (+1/-1) of ``switch_fn`` held fixed on the current piece, so
    every piece is integrated with a smooth right-hand side. A sign change
    detected over an accepted step is localized by a bracketing search (regula falsi
    with bisection safeguard) to
    ``1e-12 * (t1 - t0)`` and integration restarts on the other branch.
    A zero of ``switch_fn`` at the start selects the +1 branch.
    """
    span = problem.t1 - problem.t0
    t_tol = max(1e-12 * span, 4 * _EPS * max(abs(problem.t1), 1.0))
    branch = _branch_of(switch_fn(problem.v0))
    times = [problem.t0]
    states = [problem.v0.copy()]
    switches = []
    status = Status.CONVERGED

    def make_stepper(t, v, b):
        return _Stepper(
            lambda s, x: problem.rhs(s, x, b), t, v, problem.t1,
            problem.max_step, problem.abs_tol, problem.rel_tol,
        )

    st = make_stepper(problem.t0, problem.v0.copy(), branch)
    while st.t < problem.t1:
        t_old, v_old = st.t, st.v
        if not st.step():
            status = Status.STEP_UNDERFLOW
            break
        if switch_fn(st.v) * branch >= 0:
            times.append(st.t)
            states.append(st.v)
            continue
        # sign change inside (t_old, st.t]: shrink the bracket with the branch held fixed
        hi, v_hi = _locate_sign_change(st, t_old, v_old, st.t, st.v, switch_fn, branch, t_tol)
        if len(switches) >= max_switches:
            status = Status.EVENT_LIMIT
            break
        switches.append(hi)
        branch = -branch
        if hi > times[-1]:
            times.append(hi)
            states.append(v_hi)
        st = make_stepper(hi, v_hi, branch) if hi < problem.t1 else st
        if hi >= problem.t1:
            break
    return IntegrationResult(np.array(times), np.array(states), status, switches)


class JacobianError(ValueError):
    """Non-finite residual at a perturbed point; ``column`` names the culprit."""

    def __init__(self, column):
        super().__init__(f"non-finite residual when perturbing column {column}")
        self.column = column


def fd_jacobian(residual, point, scheme="central", h=1e-6, f0=None, batch=None):
    """Finite-difference Jacobian (rows: residuals, columns: parameters).

    The step for column ``i`` is ``h * max(1, |x_i|)``. ``f0`` may pass the
    already evaluated residual at ``point`` for the forward scheme.
    ``batch``, if given, maps an ``(m, n)`` stack of points to an ``(m, k)``
    stack of residuals and replaces the per-column calls.
    """
    x = np.asarray(point, dtype=float)
    if scheme not in ("forward", "central"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if scheme == "forward" and f0 is None:
        f0 = np.asarray(residual(x), dtype=float)
    if batch is not None and x.size:
        steps = h * np.maximum(1.0, np.abs(x))
        pts = [x + np.diag(steps)]
        if scheme == "central":
            pts.append(x - np.diag(steps))
        F = np.asarray(batch(np.vstack(pts)), dtype=float)
        n = x.size
        J = ((F[:n] - F[n:]) / (2 * steps[:, None]) if scheme == "central"
             else (F[:n] - f0) / steps[:, None]).T
        bad = ~np.all(np.isfinite(J), axis=0)
        if np.any(bad):
            raise JacobianError(int(np.flatnonzero(bad)[0]))
        return J
    cols = []
    for i in range(x.size):
        step = h * max(1.0, abs(x[i]))
        xp = x.copy()
        xp[i] += step
        fp = np.asarray(residual(xp), dtype=float)
        if scheme == "forward":
            col = (fp - f0) / step
        else:
            xm = x.copy()
            xm[i] -= step
            fm = np.asarray(residual(xm), dtype=float)
            col = (fp - fm) / (2 * step)
        if not np.all(np.isfinite(col)):
            raise JacobianError(i)
        cols.append(col)
    return np.column_stack(cols) if cols else np.zeros((0, 0))
