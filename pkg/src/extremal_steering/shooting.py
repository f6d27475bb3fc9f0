"""Two-sided shooting on concatenated extremals.

A forward extremal leaves ``chi_i`` and a backward extremal (dynamics
``-f``) leaves ``chi_f``; both are propagated over a unit pseudo-time with
rates ``tau*T`` and ``(1-tau)*T`` and the residual is their gap at
pseudo-time 1. Unknowns are the two initial costate directions (angles on
the unit sphere), ``tau`` and any free terminal components.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .numerics import (
    JacobianError,
    OdeProblem,
    PropagationError,
    integrate_adaptive,
    integrate_with_switching,
)
from .rootfind import RootProblem, RootResult, multi_start, solve_lm
from .trajectory import ResidualReport, Trajectory

__all__ = [
    "ExtremalField",
    "P2Problem",
    "P2Solution",
    "sphere_point",
    "sphere_angles",
    "propagate_arc",
    "assemble_residual",
    "solve_p2",
    "verify_solution",
]

SEARCH_TOL = 1e-8
POLISH_TOL = 1e-10


@dataclass(frozen=True)
class ExtremalField:
    """Dynamics plus the Hamiltonian maximizer that generates extremals.

    ``costate_rate(chi, p, u)`` must return ``-(df/dchi)^T p``. Bang-bang
    fields also give ``switch_fn(chi, p)`` and ``branch_control(sign)``,
    the control applied while ``switch_fn`` has that sign.
    """

    state_dim: int
    dynamics: Callable
    costate_rate: Callable
    maximizer: Callable
    control_grid: np.ndarray
    switch_fn: Optional[Callable] = None
    branch_control: Optional[Callable] = None

    def flow(self, chi, p):
        u = self.maximizer(chi, p)
        return self.dynamics(chi, u), self.costate_rate(chi, p, u)

    def control_of(self, chi, p):
        return self.maximizer(chi, p)

    def hamiltonian(self, chi, p, u):
        return float(np.dot(p, self.dynamics(chi, u)))

    def reversed(self):
        """Field of the time-reversed dynamics ``-f``."""
        sw = self.switch_fn
        return ExtremalField(
            self.state_dim,
            lambda chi, u: -self.dynamics(chi, u),
            lambda chi, p, u: -self.costate_rate(chi, p, u),
            lambda chi, p: self.maximizer(chi, -p),
            self.control_grid,
            None if sw is None else (lambda chi, p: sw(chi, -p)),
            self.branch_control,
        )


@dataclass
class P2Problem:
    field: ExtremalField
    chi_i: np.ndarray
    chi_f_spec: list  # float per component, None where free
    T: float

    def __post_init__(self):
        self.chi_i = np.asarray(self.chi_i, dtype=float)
        self.chi_f_spec = [None if v is None else float(v) for v in self.chi_f_spec]
        n = self.field.state_dim
        if self.chi_i.shape != (n,) or len(self.chi_f_spec) != n:
            raise ValueError("boundary dimensions do not match the field")
        if all(v is None for v in self.chi_f_spec):
            raise ValueError("at least one terminal component must be fixed")
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValueError("T must be finite and positive")

    @property
    def free_index(self):
        return [k for k, v in enumerate(self.chi_f_spec) if v is None]

    def chi_f(self, freed=()):
        out = np.array([0.0 if v is None else v for v in self.chi_f_spec])
        out[self.free_index] = freed
        return out

    def n_unknowns(self):
        return 2 * (self.field.state_dim - 1) + 1 + len(self.free_index)

    def split(self, z):
        n = self.field.state_dim - 1
        z = np.asarray(z, dtype=float)
        return z[:n], z[n:2 * n], float(z[2 * n]), z[2 * n + 1:]


@dataclass(frozen=True)
class P2Solution:
    p1_0: np.ndarray
    p2_0: np.ndarray
    tau: float
    freed_values: np.ndarray
    concat_time: float
    trajectory: Trajectory
    residual_norm: float
    z: np.ndarray
    iterations: int = 0
    switch_times: tuple = ()  # physical times of control switches on [0, T]

    @property
    def chi_junction(self):
        k = int(np.searchsorted(self.trajectory.times, self.concat_time, side="right")) - 1
        return self.trajectory.states[max(k, 0)]


def sphere_point(angles):
    """Unit vector from hyperspherical angles (``(cos a, sin a)`` in 2-D)."""
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    out = np.ones(angles.size + 1)
    for k, a in enumerate(angles):
        out[k] *= np.cos(a)
        out[k + 1:] *= np.sin(a)
    return out


def sphere_angles(v):
    """Inverse of :func:`sphere_point` for a nonzero vector."""
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    n = v.size
    angles = np.zeros(n - 1)
    for k in range(n - 1):
        tail = np.linalg.norm(v[k + 1:])
        angles[k] = np.arctan2(tail, v[k])
    if n >= 2 and v[-1] < 0:
        angles[-1] = -angles[-1]
    return angles


@dataclass
class ArcResult:
    s: np.ndarray  # pseudo-times of the returned samples
    chi: np.ndarray
    p: np.ndarray
    switch_s: list
    branches: list  # branch sign on each sample interval start (bang-bang only)
    ok: bool


def propagate_arc(field_, chi0, p0, rate, backward=False, s_eval=None, tol=POLISH_TOL):
    """Propagate an extremal over pseudo-time ``[0, 1]`` at speed ``rate``.

    Forward arcs follow ``(f, -df^T p)``; backward arcs follow the field of
    ``-f``. When ``s_eval`` is given the arc is integrated piece by piece so
    that states at those pseudo-times are exact integrator outputs.
    """
    fl = field_.reversed() if backward else field_
    n = fl.state_dim
    v0 = np.concatenate([np.asarray(chi0, float), np.asarray(p0, float)])
    if s_eval is None:
        s_eval = np.array([0.0, 1.0])
    s_eval = np.asarray(s_eval, dtype=float)

    if fl.switch_fn is not None:
        def rhs(s, v, b):
            u = fl.branch_control(b)
            return rate * np.concatenate(
                [fl.dynamics(v[:n], u), fl.costate_rate(v[:n], v[n:], u)]
            )

        def sw(v):
            return fl.switch_fn(v[:n], v[n:])
    else:
        def rhs(s, v):
            u = fl.maximizer(v[:n], v[n:])
            return rate * np.concatenate(
                [fl.dynamics(v[:n], u), fl.costate_rate(v[:n], v[n:], u)]
            )

    states = [v0]
    switches = []
    branches = []
    ok = True
    v = v0
    for a, b in zip(s_eval[:-1], s_eval[1:]):
        if fl.switch_fn is not None:
            branches.append(1 if sw(v) >= 0 else -1)
        if b <= a or rate == 0:
            states.append(v)
            continue
        prob = OdeProblem(rhs, a, b, v, abs_tol=tol, rel_tol=tol)
        try:
            if fl.switch_fn is not None:
                res = integrate_with_switching(prob, sw)
                switches.extend(res.switch_times)
            else:
                res = integrate_adaptive(prob)
        except PropagationError:
            ok = False
            break
        if not res.converged:
            ok = False
            break
        v = res.final
        states.append(v)
    if not ok:
        states += [np.full_like(v0, np.nan)] * (len(s_eval) - len(states))
    states = np.array(states)
    return ArcResult(s_eval, states[:, :n], states[:, n:], switches, branches, ok)


def assemble_residual(problem: P2Problem, tol: float = SEARCH_TOL):
    """Residual ``R(z) = chi_1(1) - chi_2(1)``; NaN when propagation fails."""
    fl = problem.field

    def residual(z):
        a1, a2, tau, freed = problem.split(z)
        arc1 = propagate_arc(fl, problem.chi_i, sphere_point(a1), tau * problem.T, False, tol=tol)
        arc2 = propagate_arc(
            fl, problem.chi_f(freed), sphere_point(a2), (1 - tau) * problem.T, True, tol=tol
        )
        if not (arc1.ok and arc2.ok):
            return np.full(fl.state_dim, np.nan)
        return arc1.chi[-1] - arc2.chi[-1]

    return residual


def _bounds(problem):
    n = problem.n_unknowns()
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    k = 2 * (problem.field.state_dim - 1)
    lo[k], hi[k] = 0.0, 1.0
    return lo, hi


def _sampler(problem, seed, tau_guess, free_guess):
    d = problem.field.state_dim
    nfree = len(problem.free_index)

    def sample(i):
        rng = np.random.default_rng([seed, i])
        a1 = sphere_angles(rng.normal(size=d))
        a2 = sphere_angles(rng.normal(size=d))
        tau = rng.uniform() if tau_guess is None else tau_guess
        if free_guess is None:
            freed = problem.chi_i[problem.free_index] + rng.normal(size=nfree)
        else:
            freed = np.asarray(free_guess, dtype=float).reshape(nfree)
        return np.concatenate([a1, a2, [tau], freed])

    return sample


def _dedupe(results, tol=1e-4):
    kept = []
    for r in results:
        if all(np.linalg.norm(r.x - k.x) > tol for k in kept):
            kept.append(r)
    return kept


def _wrap_angles(problem, z):
    z = np.array(z, dtype=float)
    k = 2 * (problem.field.state_dim - 1)
    z[:k] = np.angle(np.exp(1j * z[:k]))
    return z


def _pinned_starts(problem, residual, sample, lo, hi, tau_guess, free_guess,
                   starts, stop_at_first, max_iters, search_tol):
    """Solve with guessed values held fixed, loosening the pins in stages.

    Every guessed value is pinned first. When a free component is also
    guessed, a second stage releases it and keeps only ``tau`` fixed,
    starting from where the first stage stopped; a guess just outside the
    reachable set then lands on the nearest feasible root.
    """
    k = 2 * (problem.field.state_dim - 1)
    full = np.zeros(problem.n_unknowns(), dtype=bool)
    if tau_guess is not None:
        full[k] = True
    if free_guess is not None:
        full[k + 1:] = True
    masks = [full]
    if tau_guess is not None and free_guess is not None:
        only_tau = np.zeros_like(full)
        only_tau[k] = True
        masks.append(only_tau)

    found = []
    for i in range(starts):
        z = sample(i)
        for pinned in masks:
            def sub(w, base=z.copy(), pinned=pinned):
                zz = base.copy()
                zz[~pinned] = w
                return residual(zz)
            try:
                r = solve_lm(RootProblem(sub, z[~pinned], lo[~pinned], hi[~pinned],
                                         max_iters=max_iters, residual_tol=search_tol))
            except JacobianError:
                break
            z = z.copy()
            z[~pinned] = r.x
            if r.converged:
                found.append(RootResult(z, r.residual_norm, r.iterations, True, r.history,
                                        r.message))
                break
        if stop_at_first and found:
            break
    return found


def solve_p2(
    problem: P2Problem,
    starts: int = 20,
    seed: int = 0,
    tau_guess: Optional[float] = None,
    free_guess: Optional[Sequence[float]] = None,
    pin_guesses: bool = False,
    residual_tol: float = 1e-9,
    n_samples: int = 1001,
    stop_at_first: bool = False,
    workers: int = 1,
    max_iters: int = 60,
) -> list:
    """Multi-start Levenberg-Marquardt on the shooting residual.

    Costate directions are drawn uniformly on the unit sphere; ``tau`` and
    free terminal components are drawn at random unless guesses are given.
    With ``pin_guesses`` the guessed values are first held fixed while the
    costate angles are solved for, then everything is released.
    Converged roots are polished at tight integrator tolerance, deduplicated
    and packaged with ``n_samples`` uniformly spaced trajectory samples.
    An empty list means no start converged, not that no solution exists.
    """
    lo, hi = _bounds(problem)
    sample = _sampler(problem, seed, tau_guess, free_guess)
    search_tol = max(residual_tol, 1e-8)
    residual = assemble_residual(problem, SEARCH_TOL)
    template = RootProblem(residual, sample(0), lo, hi, max_iters=max_iters,
                           residual_tol=search_tol)
    k = 2 * (problem.field.state_dim - 1)
    found = []
    if pin_guesses and (tau_guess is not None or free_guess is not None):
        found = _pinned_starts(problem, residual, sample, lo, hi, tau_guess, free_guess,
                               starts, stop_at_first, max_iters, search_tol)
    if not found:
        found = multi_start(template, sample, starts, stop_at_first=stop_at_first,
                            workers=workers)
    polish_residual = assemble_residual(problem, POLISH_TOL)
    solutions = []
    for r in _dedupe([r for r in found if r.converged]):
        pol = solve_lm(RootProblem(polish_residual, r.x, lo, hi, max_iters=20,
                                   residual_tol=residual_tol))
        norm = pol.residual_norm
        if not norm <= search_tol:
            continue
        solutions.append(package_solution(
            problem, _wrap_angles(problem, pol.x), norm, r.iterations + pol.iterations, n_samples
        ))
    solutions.sort(key=lambda s: s.residual_norm)
    return solutions


def package_solution(problem, z, residual_norm, iterations=0, n_samples=1001):
    """Re-propagate ``z`` and assemble the trajectory on ``[0, T]``."""
    fl = problem.field
    a1, a2, tau, freed = problem.split(z)
    T = problem.T
    t_grid = np.linspace(0.0, T, n_samples)
    tc = tau * T
    t1 = t_grid[t_grid <= tc]
    if t1.size == 0 or t1[-1] < tc:
        t1 = np.append(t1, tc)
    t2 = t_grid[t_grid > tc]
    s1 = t1 / tc if tc > 0 else np.zeros_like(t1)
    # backward arc pseudo-time runs from chi_f (s=0) to the junction (s=1)
    s2 = np.sort((T - t2) / (T - tc)) if T > tc else np.zeros(0)
    s2 = np.unique(np.concatenate([[0.0], s2, [1.0]]))
    p1 = sphere_point(a1)
    p2 = sphere_point(a2)
    arc1 = propagate_arc(fl, problem.chi_i, p1, tc, False, s_eval=s1 if s1.size > 1 else np.array([0.0, 1.0]))
    arc2 = propagate_arc(fl, problem.chi_f(freed), p2, T - tc, True, s_eval=s2)
    if s1.size == 1:
        arc1 = ArcResult(s1, arc1.chi[:1], arc1.p[:1], [], arc1.branches[:1], arc1.ok)

    def controls(arc, backward):
        out = []
        for chi, p in zip(arc.chi, arc.p):
            out.append(fl.maximizer(chi, -p if backward else p))
        return np.array(out, dtype=float)

    # arc2 reversed; drop its junction sample (taken from arc1)
    t_b = T - arc2.s[::-1] * (T - tc)
    keep = t_b > tc
    times = np.concatenate([arc1.s * tc, t_b[keep]])
    states = np.vstack([arc1.chi, arc2.chi[::-1][keep]])
    costates = np.vstack([arc1.p, arc2.p[::-1][keep]])
    ctrl = np.concatenate([controls(arc1, False), controls(arc2, True)[::-1][keep]])
    switch_times = tuple(sorted(
        [s * tc for s in arc1.switch_s] + [T - s * (T - tc) for s in arc2.switch_s]
    ))
    traj = Trajectory(times, states, costates, ctrl)
    return P2Solution(
        p1, p2, tau, np.asarray(freed, dtype=float), tc, traj, float(residual_norm),
        np.asarray(z, dtype=float), iterations, switch_times,
    )


def verify_solution(sol: P2Solution, problem: P2Problem, n_check: int = 100) -> ResidualReport:
    """Re-integrate the recovered control through the original dynamics.

    Reports the terminal error on fixed components, the junction gap
    between the two re-integrated arcs, and the largest amount by which a
    control from ``field.control_grid`` beats the applied control in the
    Hamiltonian at ``n_check`` equispaced times per arc.
    """
    fl = problem.field
    n = fl.state_dim
    T = problem.T
    tc = float(np.clip(sol.tau, 0.0, 1.0)) * T
    chi_f = problem.chi_f(sol.freed_values)
    fixed = [k for k in range(n) if problem.chi_f_spec[k] is not None]

    # applied controls on each arc, sampled together with (chi, p) at n_check
    # equispaced pseudo-times; bang-bang arcs use their recorded branches
    s_chk = np.linspace(0.0, 1.0, n_check + 1)
    arc1 = propagate_arc(fl, problem.chi_i, sol.p1_0, tc, False, s_eval=s_chk)
    arc2 = propagate_arc(fl, chi_f, sol.p2_0, T - tc, True, s_eval=s_chk)

    violation = 0.0
    if arc1.ok and arc2.ok:
        for arc, sign in ((arc1, 1.0), (arc2, -1.0)):
            for k in range(n_check):
                chi, p = arc.chi[k], sign * arc.p[k]
                if fl.switch_fn is not None:
                    u_app = fl.branch_control(arc.branches[k])
                else:
                    u_app = fl.maximizer(chi, p)
                h_app = fl.hamiltonian(chi, p, u_app)
                h_best = max(fl.hamiltonian(chi, p, u) for u in fl.control_grid)
                violation = max(violation, h_best - h_app)
    else:
        violation = np.inf

    # the control as a function of physical time, independent of costates
    def control_pieces(arc, t_start, t_len, backward):
        if fl.switch_fn is None:
            return None
        sw = sorted(arc.switch_s)
        edges = [0.0] + sw + [1.0]
        fl_ = fl.reversed() if backward else fl
        v = np.concatenate([arc.chi[0], arc.p[0]])
        b = 1 if fl_.switch_fn(v[:n], v[n:]) >= 0 else -1
        pieces = []
        for a, c in zip(edges[:-1], edges[1:]):
            pieces.append((a, c, fl.branch_control(b)))
            b = -b
        if backward:
            return [(t_start + t_len * (1 - c), t_start + t_len * (1 - a), u) for a, c, u in pieces][::-1]
        return [(t_start + t_len * a, t_start + t_len * c, u) for a, c, u in pieces]

    def run(chi0, pieces, backward):
        chi = np.asarray(chi0, dtype=float)
        seq = pieces[::-1] if backward else pieces
        for a, c, u in seq:
            if c <= a:
                continue
            sgn = -1.0 if backward else 1.0
            prob = OdeProblem(lambda s, x, u=u: sgn * fl.dynamics(x, u), a, c, chi,
                              abs_tol=1e-12, rel_tol=1e-12)
            chi = integrate_adaptive(prob).final
        return chi

    details = {"hamiltonian_violation": float(violation)}
    if fl.switch_fn is not None and arc1.ok and arc2.ok:
        pieces1 = control_pieces(arc1, 0.0, tc, False)
        pieces2 = control_pieces(arc2, tc, T - tc, True)
        full = run(problem.chi_i, pieces1 + pieces2, False)
        junction_fwd = run(problem.chi_i, pieces1, False)
        junction_bwd = run(chi_f, pieces2, True)
    else:
        # smooth maximizers: re-integrate the sampled control (zero-order hold)
        traj = sol.trajectory
        pieces = [
            (traj.times[k], traj.times[k + 1], traj.controls[k])
            for k in range(len(traj) - 1)
        ]
        full = run(problem.chi_i, pieces, False)
        junction_fwd = run(problem.chi_i, [p for p in pieces if p[1] <= tc], False)
        junction_bwd = run(chi_f, [p for p in pieces if p[0] >= tc], True)
    terminal = full - chi_f
    terminal_error = float(np.linalg.norm(terminal[fixed]))
    junction_error = float(np.linalg.norm(junction_fwd - junction_bwd))
    details.update(terminal_error=terminal_error, junction_error=junction_error,
                   final_state=full.tolist())
    res = np.concatenate([terminal[fixed], junction_fwd - junction_bwd])
    return ResidualReport(res, float(np.linalg.norm(res)), sol.iterations,
                          bool(np.isfinite(violation)), details)
