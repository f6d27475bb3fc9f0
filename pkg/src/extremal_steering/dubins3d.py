"""Fixed-length curvature-bounded paths in three dimensions.

The state is a position and a unit velocity (tangent). Paths are built
from two words, each a ``CSC`` or ``CCC`` word or a single helicoidal arc
``H``. C arcs are unit circles whose turning direction is given by a plane
angle ``phi`` measured from the current normal towards the binormal. H arcs
have unit curvature and a torsion obeying

    tau'' = 3 tau'^2 / (2 tau) - 2 tau^3 + 2 tau - zeta tau sqrt|tau|

which is integrated through ``w = |tau|^(-1/2)``; in that variable the
equation reads ``w'' = w^-3 - w + zeta/2``, a regular conservative
oscillator on ``w > 0``, so the torsion keeps its sign along the arc.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .numerics import OdeProblem, PropagationError, integrate_adaptive
from .rootfind import RootProblem, solve_lm
from .trajectory import Trajectory

__all__ = [
    "Frame3D",
    "HParams",
    "CArc",
    "SSeg",
    "HArc",
    "Word3D",
    "Goal3D",
    "TwoWordPath3D",
    "TorsionFloorError",
    "endpoint_c_arc",
    "endpoint_s",
    "integrate_h_arc",
    "word_residual_3d",
    "solve_dubins3d",
    "sample_path_3d",
    "torsion_fixed_points",
]

TORSION_FLOOR = 1e-6
PENALTY = 1e3
H_TOL = 1e-10
FRAME_TOL = 1e-9


class TorsionFloorError(PropagationError):
    """Torsion magnitude dropped below the floor on an H arc."""


@dataclass(frozen=True)
class Frame3D:
    position: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        for name in ("position", "tangent", "normal"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(3)
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if abs(np.linalg.norm(self.tangent) - 1) > FRAME_TOL:
            raise ValueError("tangent must be a unit vector")
        if abs(np.linalg.norm(self.normal) - 1) > FRAME_TOL:
            raise ValueError("normal must be a unit vector")
        if abs(self.tangent @ self.normal) > FRAME_TOL:
            raise ValueError("normal must be orthogonal to the tangent")

    @classmethod
    def canonical(cls):
        return cls(np.zeros(3), np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))

    @property
    def binormal(self):
        return np.cross(self.tangent, self.normal)

    def turned(self, psi):
        """Same frame with the normal rotated by ``psi`` about the tangent."""
        c, s = math.cos(psi), math.sin(psi)
        return Frame3D(self.position, self.tangent, c * self.normal + s * self.binormal)


@dataclass(frozen=True)
class HParams:
    length: float
    tau0: float
    tau_dot0: float = 0.0
    zeta: float = 0.0
    psi: float = 0.0

    def __post_init__(self):
        if not self.length >= 0:
            raise ValueError("length must be nonnegative")
        if not abs(self.tau0) >= TORSION_FLOOR:
            raise ValueError("initial torsion below the floor")


@dataclass(frozen=True)
class CArc:
    phi: float
    length: float
    letter = "C"


@dataclass(frozen=True)
class SSeg:
    length: float
    letter = "S"


@dataclass(frozen=True)
class HArc:
    params: HParams
    letter = "H"

    @property
    def length(self):
        return self.params.length


@dataclass(frozen=True)
class Word3D:
    primitives: tuple

    @property
    def pattern(self):
        return "".join(p.letter for p in self.primitives)

    @property
    def length(self):
        return sum(p.length for p in self.primitives)


@dataclass(frozen=True)
class Goal3D:
    """Terminal position and tangent; ``tangent=None`` leaves it free."""

    position: np.ndarray
    tangent: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        if self.tangent is not None:
            t = np.asarray(self.tangent, dtype=float).reshape(3)
            n = np.linalg.norm(t)
            if not n > 0:
                raise ValueError("goal tangent must be nonzero")
            object.__setattr__(self, "tangent", t / n)

    @property
    def free_tangent(self):
        return self.tangent is None


@dataclass
class TwoWordPath3D:
    word1: Word3D
    word2: Word3D
    total_length: float
    goal: Goal3D
    residual_norm: float = 0.0
    start: Frame3D = field(default_factory=Frame3D.canonical)

    @property
    def primitives(self):
        return self.word1.primitives + self.word2.primitives

    @property
    def pattern(self):
        return self.word1.pattern + self.word2.pattern

    @property
    def structure(self):
        return structure_3d(self.primitives, self.start)

    def end(self):
        return follow(self.start, self.primitives)

    @property
    def terminal_tangent(self):
        return self.end().tangent


def _rotate(v, axis, angle):
    # Rodrigues rotation of v about a unit axis
    c, s = math.cos(angle), math.sin(angle)
    return v * c + np.cross(axis, v) * s + axis * (axis @ v) * (1 - c)


def _turn_direction(frame, phi):
    return math.cos(phi) * frame.normal + math.sin(phi) * frame.binormal


def endpoint_c_arc(start: Frame3D, phi: float, length: float) -> Frame3D:
    """Unit circle of arclength ``length`` turning towards ``N cos phi + B sin phi``.

    The whole frame is rotated rigidly about ``T x d``, so the normal is
    carried along; ``phi = 0`` on the canonical frame is a left turn in the
    xy-plane.
    """
    if not length >= 0:
        raise ValueError("length must be nonnegative")
    T = start.tangent
    d = _turn_direction(start, phi)
    c, s = math.cos(length), math.sin(length)
    pos = start.position + s * T + (1 - c) * d
    tan = c * T + s * d
    axis = np.cross(T, d)
    nrm = _rotate(start.normal, axis, length)
    return _frame(pos, tan, nrm)


def endpoint_s(start: Frame3D, length: float) -> Frame3D:
    if not length >= 0:
        raise ValueError("length must be nonnegative")
    return Frame3D(start.position + length * start.tangent, start.tangent, start.normal)


def _frame(pos, tan, nrm):
    # Gram-Schmidt clean-up of accumulated round-off
    tan = tan / np.linalg.norm(tan)
    nrm = nrm - (nrm @ tan) * tan
    nrm = nrm / np.linalg.norm(nrm)
    return Frame3D(pos, tan, nrm)


def _h_rhs(zeta):
    half = 0.5 * zeta

    def rhs(s, v):
        t0, t1, t2, n0, n1, n2, w, wd = v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10]
        sgn = v[11]
        tau = sgn / (w * w)
        b0 = t1 * n2 - t2 * n1
        b1 = t2 * n0 - t0 * n2
        b2 = t0 * n1 - t1 * n0
        return np.array([
            t0, t1, t2,
            n0, n1, n2,
            -t0 + tau * b0, -t1 + tau * b1, -t2 + tau * b2,
            wd, 1.0 / (w * w * w) - w + half,
            0.0,
        ])

    return rhs


def _tau_to_w(tau0, tau_dot0):
    sgn = 1.0 if tau0 > 0 else -1.0
    w0 = abs(tau0) ** -0.5
    wd0 = -sgn * tau_dot0 * w0**3 / 2
    return w0, wd0, sgn


def _w_to_tau(w, wd, sgn):
    return sgn / (w * w), -2.0 * sgn * wd / (w * w * w)


def integrate_h_arc(start: Frame3D, params: HParams, tol: float = H_TOL, s_eval=None):
    """Integrate a helicoidal arc of unit curvature.

    Parameters
    ----------
    start : Frame3D
        Its normal is first rotated by ``params.psi`` about the tangent.
    params : HParams
    tol : float, optional
        Absolute and relative integrator tolerance.
    s_eval : array_like, optional
        Arclengths at which to also return positions and tangents.

    Returns
    -------
    frame : Frame3D
        Frame at the end of the arc (Frenet normal).
    trace : dict
        ``s``, ``tau``, ``tau_dot`` at the integrator steps, and
        ``position``, ``tangent``, ``normal`` at ``s_eval`` if given.

    Raises
    ------
    TorsionFloorError
        If ``|tau|`` falls below the floor.
    PropagationError
        If the state stops being finite.
    """
    f0 = start.turned(params.psi)
    w0, wd0, sgn = _tau_to_w(params.tau0, params.tau_dot0)
    v0 = np.concatenate([f0.position, f0.tangent, f0.normal, [w0, wd0, sgn]])
    res = integrate_adaptive(OdeProblem(_h_rhs(params.zeta), 0.0, params.length, v0,
                                        abs_tol=tol, rel_tol=tol))
    if not res.converged:
        raise PropagationError("H arc integration failed", res.times[-1], res.states[-1])
    w = res.states[:, 9]
    if np.any(w <= 0) or np.any(w > TORSION_FLOOR ** -0.5):
        raise TorsionFloorError("torsion fell below the floor", res.times[-1], res.states[-1])
    tau, tau_dot = _w_to_tau(w, res.states[:, 10], sgn)
    end = res.states[-1]
    tan, nrm = end[3:6], end[6:9]
    drift = max(abs(np.linalg.norm(tan) - 1), abs(np.linalg.norm(nrm) - 1), abs(tan @ nrm))
    if drift > 1e-8:
        raise PropagationError(f"frame drift {drift:.2e}", res.times[-1], end)
    trace = {"s": res.times, "tau": tau, "tau_dot": tau_dot}
    if s_eval is not None:
        s_eval = np.asarray(s_eval, dtype=float)
        states = _sample_on(res, s_eval, params.zeta, tol)
        trace["position"] = states[:, 0:3]
        trace["tangent"] = states[:, 3:6] / np.linalg.norm(states[:, 3:6], axis=1)[:, None]
        trace["normal"] = states[:, 6:9]
    return _frame(end[0:3], tan, nrm), trace


def _sample_on(res, s_eval, zeta, tol):
    # restart from the nearest earlier accepted step for accurate samples
    rhs = _h_rhs(zeta)
    out = np.empty((len(s_eval), res.states.shape[1]))
    for i, s in enumerate(s_eval):
        k = max(int(np.searchsorted(res.times, s, side="right")) - 1, 0)
        if res.times[k] == s:
            out[i] = res.states[k]
            continue
        seg = integrate_adaptive(OdeProblem(rhs, res.times[k], s, res.states[k],
                                            abs_tol=tol, rel_tol=tol))
        out[i] = seg.final
    return out


def torsion_fixed_points(zeta: float):
    """Nonzero constant torsions, i.e. roots of ``-2 t^3 + 2 t - zeta t sqrt|t|``.

    In ``w`` these are the positive roots of ``w^-3 - w + zeta/2``; each
    gives a torsion of either sign.
    """
    # w^4 - (zeta/2) w^3 - 1 = 0
    roots = np.roots([1.0, -zeta / 2, 0.0, 0.0, -1.0])
    w = np.sort(roots[(abs(roots.imag) < 1e-12) & (roots.real > 0)].real)
    t = 1.0 / w**2
    return np.concatenate([-t[::-1], t])


def follow(start: Frame3D, primitives, tol: float = H_TOL) -> Frame3D:
    """End frame after the given primitives."""
    f = start
    for p in primitives:
        if isinstance(p, CArc):
            f = endpoint_c_arc(f, p.phi, p.length)
        elif isinstance(p, SSeg):
            f = endpoint_s(f, p.length)
        else:
            f, _ = integrate_h_arc(f, p.params, tol)
    return f


def structure_3d(primitives, start: Optional[Frame3D] = None, tol: float = 1e-9) -> str:
    """Class string after dropping zero-length pieces and merging continuations.

    Two adjacent C arcs merge when the second turns in the same direction
    the first ended with; adjacent straight pieces always merge.
    """
    f = Frame3D.canonical() if start is None else start
    letters = []
    last_dir = None
    for p in primitives:
        if p.length < tol:
            continue
        if isinstance(p, CArc):
            d = _turn_direction(f, p.phi)
            end = endpoint_c_arc(f, p.phi, p.length)
            if letters and letters[-1] == "C" and last_dir is not None and \
                    np.linalg.norm(d - last_dir) < 1e-7:
                pass
            else:
                letters.append("C")
            # turning direction at the end of the arc
            last_dir = math.cos(p.length) * d - math.sin(p.length) * f.tangent
            f = end
            continue
        last_dir = None
        if isinstance(p, SSeg):
            if not letters or letters[-1] != "S":
                letters.append("S")
            f = endpoint_s(f, p.length)
        else:
            letters.append("H")
            f, _ = integrate_h_arc(f, p.params)
    return "".join(letters)


# unknown layout: per primitive C -> (len, phi), S -> (len,),
# H -> (len, tau0, tau_dot0, zeta, psi); the final length is eliminated

_FIELDS = {"C": 2, "S": 1, "H": 5}


def n_unknowns(sequence: str) -> int:
    return sum(_FIELDS[c] for c in sequence) - 1


def _unpack(sequence, z, T):
    prims = []
    k = 0
    lengths = []
    for j, c in enumerate(sequence):
        last = j == len(sequence) - 1
        if last:
            ell = T - math.fsum(lengths)
        else:
            ell = z[k]
            k += 1
        lengths.append(ell)
        ell = max(ell, 0.0)
        if c == "C":
            prims.append(CArc(float(z[k]), ell))
            k += 1
        elif c == "S":
            prims.append(SSeg(ell))
        else:
            tau0, tau_dot0, zeta, psi = z[k:k + 4]
            k += 4
            prims.append(HArc(HParams(ell, float(tau0), float(tau_dot0), float(zeta),
                                      float(psi))))
    return prims, max(math.fsum(lengths[:-1]) - T, 0.0)


def _tangent_basis(t):
    a = np.array([1.0, 0.0, 0.0]) if abs(t[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(t, a)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(t, e1)


def _cross(a, b):
    return np.stack([
        a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1],
        a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2],
        a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0],
    ], axis=1)


def _h_rhs_batch(L, half):
    L = L[:, None]

    def rhs(s, V):
        T, N, w, wd, sgn = V[:, 3:6], V[:, 6:9], V[:, 9], V[:, 10], V[:, 11]
        tau = (sgn / (w * w))[:, None]
        out = np.empty_like(V)
        out[:, 0:3] = T
        out[:, 3:6] = N
        out[:, 6:9] = -T + tau * _cross(T, N)
        out[:, 9] = wd
        out[:, 10] = 1.0 / (w * w * w) - w + half
        out[:, 11] = 0.0
        return out * L

    return rhs


def _h_batch(P, T, N, L, tau0, tau_dot0, zeta, psi, tol):
    """Propagate a batch of H arcs over pseudo-arclength ``[0, 1]``.

    Returns end positions, tangents, normals and a mask of rows that kept
    the torsion above the floor.
    """
    B = _cross(T, N)
    c, s = np.cos(psi)[:, None], np.sin(psi)[:, None]
    N = c * N + s * B
    sgn = np.where(tau0 > 0, 1.0, -1.0)
    w0 = np.abs(tau0) ** -0.5
    wd0 = -sgn * tau_dot0 * w0**3 / 2
    V0 = np.column_stack([P, T, N, w0, wd0, sgn])
    res = integrate_adaptive(OdeProblem(_h_rhs_batch(L, 0.5 * zeta), 0.0, 1.0, V0,
                                        abs_tol=tol, rel_tol=tol))
    w = res.states[:, :, 9]
    ok = np.all((w > 0) & (w <= TORSION_FLOOR ** -0.5), axis=0) & res.converged
    V = res.final
    T1 = V[:, 3:6] / np.linalg.norm(V[:, 3:6], axis=1)[:, None]
    N1 = V[:, 6:9] - np.sum(V[:, 6:9] * T1, axis=1)[:, None] * T1
    N1 /= np.linalg.norm(N1, axis=1)[:, None]
    return V[:, 0:3], T1, N1, ok


def _follow_batch(sequence, Z, total, start, tol, min_last=0.0):
    m = Z.shape[0]
    P = np.tile(start.position, (m, 1))
    T = np.tile(start.tangent, (m, 1))
    N = np.tile(start.normal, (m, 1))
    ok = np.ones(m, dtype=bool)
    used = np.zeros(m)
    k = 0
    for j, c in enumerate(sequence):
        if j == len(sequence) - 1:
            ell = total - used
        else:
            ell = Z[:, k]
            k += 1
            used = used + ell
        ell = np.maximum(ell, 0.0)
        if c == "S":
            P = P + ell[:, None] * T
        elif c == "C":
            phi = Z[:, k]
            k += 1
            d = np.cos(phi)[:, None] * N + np.sin(phi)[:, None] * _cross(T, N)
            cl, sl = np.cos(ell)[:, None], np.sin(ell)[:, None]
            axis = _cross(T, d)
            P = P + sl * T + (1 - cl) * d
            N = N * cl + _cross(axis, N) * sl + axis * np.sum(axis * N, axis=1)[:, None] * (1 - cl)
            T = cl * T + sl * d
        else:
            tau0, tau_dot0, zeta, psi = Z[:, k], Z[:, k + 1], Z[:, k + 2], Z[:, k + 3]
            k += 4
            bad = np.abs(tau0) < TORSION_FLOOR
            tau0 = np.where(bad, 1.0, tau0)
            P, T, N, h_ok = _h_batch(P, T, N, ell, tau0, tau_dot0, zeta, psi, tol)
            ok &= h_ok & ~bad
    deficit = np.maximum(min_last - (total - used), 0.0)
    return P, T, ok, deficit


def _make_residual(goal, T, sequence, start, tol=H_TOL, min_length=0.0):
    """Single-point and batched residuals of one primitive sequence."""
    m = 3 if goal.free_tangent else 5
    basis = None if goal.free_tangent else _tangent_basis(goal.tangent)

    def batch(Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        try:
            P, Tn, ok, deficit = _follow_batch(sequence, Z, T, start, tol, min_length)
        except PropagationError:
            if Z.shape[0] == 1:
                return np.full((1, m + 1), np.nan)
            return np.vstack([batch(z[None]) for z in Z])
        R = np.empty((Z.shape[0], m + 1))
        R[:, :3] = P - goal.position
        if basis is not None:
            R[:, 3] = Tn @ basis[0]
            R[:, 4] = Tn @ basis[1]
        R[:, m] = deficit
        R[~ok] = PENALTY
        return R

    def residual(z):
        return batch(np.asarray(z, dtype=float)[None])[0]

    residual.batch = batch
    return residual


def word_residual_3d(goal: Goal3D, T: float, pattern, unknowns, start: Optional[Frame3D] = None):
    """Boundary mismatch of a two-word pattern with total length ``T``.

    Parameters
    ----------
    goal : Goal3D
    T : float
    pattern : pair of str
        Each ``"CSC"``, ``"CCC"``, ``"H"`` or a shorter subsegment string.
    unknowns : array_like
        Per primitive in order: C ``(len, phi)``, S ``(len,)``, H
        ``(len, tau0, tau_dot0, zeta, psi)``; the last primitive's length is
        omitted and set to ``T`` minus the rest.

    Returns
    -------
    ndarray
        Position error (3) followed, for a fixed tangent, by the end tangent
        projected on two unit vectors orthogonal to the goal tangent (2).
        A length overshoot is appended when the free lengths exceed ``T``;
        a torsion floor violation gives a constant penalty vector.
    """
    sequence = "".join(pattern)
    z = np.asarray(unknowns, dtype=float)
    if z.shape != (n_unknowns(sequence),):
        raise ValueError(f"expected {n_unknowns(sequence)} unknowns for {sequence}")
    r = _make_residual(goal, T, sequence, start or Frame3D.canonical())(z)
    return r if r[-1] > 0 else r[:-1]


# 4 CS-word pairs and the shapes one deletion away from them
CS_SEQUENCES = ("CSCCSC", "CSCCCC", "CCCCSC", "CCCCCC")


def _cs_sequences():
    seqs = list(CS_SEQUENCES)
    for s in CS_SEQUENCES:
        for i in range(len(s)):
            t = s[:i] + s[i + 1:]
            if "SS" not in t and t not in seqs:
                seqs.append(t)
    return seqs


def _bounds(sequence, T, min_length=0.0):
    lo, hi = [], []
    for j, c in enumerate(sequence):
        if j < len(sequence) - 1:
            lo.append(min_length)
            hi.append(T)
        if c == "C":
            lo.append(-np.inf)
            hi.append(np.inf)
        elif c == "H":
            # tau0 sign is fixed per start through the bounds
            lo += [-10.0, -20.0, -20.0, -np.inf]
            hi += [10.0, 20.0, 20.0, np.inf]
    return np.array(lo), np.array(hi)


def _sample_start(sequence, T, rng, min_length=0.0):
    n = len(sequence)
    lens = min_length + rng.dirichlet(np.ones(n)) * max(T - n * min_length, 0.0)
    z = []
    for j, c in enumerate(sequence):
        if j < n - 1:
            z.append(lens[j])
        if c == "C":
            z.append(rng.uniform(-math.pi, math.pi))
        elif c == "H":
            sgn = rng.choice([-1.0, 1.0])
            z += [sgn * rng.uniform(0.3, 2.0), rng.normal(scale=0.5),
                  rng.uniform(-1.0, 2.0), rng.uniform(-math.pi, math.pi)]
    return np.array(z)


def _h_sign_bounds(sequence, z, lo, hi):
    # keep each H arc's torsion on the side it started on
    lo, hi = lo.copy(), hi.copy()
    k = 0
    for j, c in enumerate(sequence):
        if j < len(sequence) - 1:
            k += 1
        if c == "C":
            k += 1
        elif c == "H":
            if z[k] > 0:
                lo[k] = TORSION_FLOOR * 10
            else:
                hi[k] = -TORSION_FLOOR * 10
            k += 4
    return lo, hi


def _wrap_phis(sequence, z):
    z = z.copy()
    k = 0
    for j, c in enumerate(sequence):
        if j < len(sequence) - 1:
            k += 1
        if c == "C":
            z[k] = math.atan2(math.sin(z[k]), math.cos(z[k]))
            k += 1
        elif c == "H":
            z[k + 3] = math.atan2(math.sin(z[k + 3]), math.cos(z[k + 3]))
            k += 4
    return z


def _split_words(sequence, prims, words):
    if words is None:
        h = len(sequence) // 2 if "H" not in sequence else sequence.index("H") + 1
        if sequence == "HH":
            h = 1
        words = (sequence[:h], sequence[h:])
    n1 = len(words[0])
    return Word3D(tuple(prims[:n1])), Word3D(tuple(prims[n1:]))


def solve_sequence(goal, T, sequence, starts=4, seed=0, start=None, residual_tol=1e-9,
                   x0=None, max_iters=100, words=None, stop_at_first=True, min_length=0.0,
                   search_tol=1e-8):
    """LM solve of one primitive sequence from random (or given) starts.

    Every primitive is kept at least ``min_length`` long so the solution
    realizes the sequence itself rather than one of its subsegments.
    Sequences with H arcs are searched with the integrator at
    ``search_tol`` and polished at the default tolerance.
    """
    start = start or Frame3D.canonical()
    has_h = "H" in sequence
    polish = _make_residual(goal, T, sequence, start, H_TOL, min_length)
    residual = _make_residual(goal, T, sequence, start, search_tol, min_length) if has_h else polish
    lo, hi = _bounds(sequence, T, min_length)
    found = []
    seed_key = [seed, len(sequence)] + [ord(c) for c in sequence]
    for i in range(starts):
        if x0 is not None and i == 0:
            z0 = np.asarray(x0, dtype=float)
        else:
            z0 = _sample_start(sequence, T, np.random.default_rng(seed_key + [i]), min_length)
        blo, bhi = _h_sign_bounds(sequence, z0, lo, hi)
        z0 = np.clip(z0, blo, bhi)
        try:
            res = solve_lm(RootProblem(residual, z0, blo, bhi, max_iters=max_iters,
                                       residual_tol=max(residual_tol, 10 * search_tol)
                                       if has_h else residual_tol,
                                       batch_residual=residual.batch))
            if has_h and res.converged:
                res = solve_lm(RootProblem(polish, res.x, blo, bhi, max_iters=20,
                                           residual_tol=residual_tol,
                                           batch_residual=polish.batch))
        except (ValueError, FloatingPointError):
            continue
        if not res.converged:
            continue
        z = _wrap_phis(sequence, res.x)
        prims, _ = _unpack(sequence, z, T)
        end = follow(start, prims)
        if not goal.free_tangent and end.tangent @ goal.tangent < 0:
            # antipodal tangent also zeroes the projected residual
            continue
        w1, w2 = _split_words(sequence, prims, words)
        path = TwoWordPath3D(w1, w2, T, goal, res.residual_norm, start)
        found.append((path, z))
        if stop_at_first:
            break
    return found


def solve_dubins3d(
    goal: Goal3D,
    T: float,
    families: Sequence[str] = ("cs", "h"),
    starts: int = 6,
    seed: int = 0,
    start: Optional[Frame3D] = None,
    residual_tol: float = 1e-9,
    tangent_seed: Optional[Sequence[float]] = None,
    sequences: Optional[Sequence[str]] = None,
    stop_at_first: bool = False,
    min_length: float = 1e-2,
) -> list:
    """Search CS-word and HH paths of length ``T`` reaching ``goal``.

    CS-word families try the four ``CSC``/``CCC`` pairs and every shape
    obtained from them by deleting one primitive. The H family solves the
    two-arc ``HH`` system (nine unknowns, five residuals) by damped least
    squares, which accepts any zero.

    With a free goal tangent and ``tangent_seed`` given, each sequence is
    first solved with the tangent fixed at the normalized seed and the root
    is then released to the free-tangent system, so the reported tangent
    stays near the seed. Each primitive is kept at least ``min_length``
    long so a path realizes its sequence and not a subsegment of it.

    Returns converged paths sorted by residual norm.
    """
    if not T >= 0:
        raise ValueError("T must be nonnegative")
    start = start or Frame3D.canonical()
    if sequences is None:
        sequences = []
        if "cs" in families:
            sequences += _cs_sequences()
        if "h" in families:
            sequences.append("HH")
    out = []
    for seq in sequences:
        kw = dict(starts=starts, seed=seed, start=start, residual_tol=residual_tol,
                  min_length=min_length)
        if goal.free_tangent and tangent_seed is not None:
            fixed = Goal3D(goal.position, tangent_seed)
            seeded = solve_sequence(fixed, T, seq, **kw)
            results = []
            for _, z in seeded:
                results += solve_sequence(goal, T, seq, starts=1, seed=seed, start=start,
                                          residual_tol=residual_tol, x0=z,
                                          min_length=min_length)
        else:
            results = solve_sequence(goal, T, seq, **kw)
        out += [p for p, _ in results]
        if stop_at_first and out:
            break
    out.sort(key=lambda p: p.residual_norm)
    return out


def sample_path_3d(path: TwoWordPath3D, n: int):
    """Arclength-equispaced positions and tangents along ``path``.

    Returns
    -------
    traj : Trajectory
        ``states`` columns are position (3) then tangent (3).
    max_curvature : float
        Largest finite-difference curvature estimate from the tangents.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    s_grid = np.linspace(0.0, path.total_length, n)
    states = np.empty((n, 6))
    f = path.start
    edge = 0.0
    prims = [p for p in path.primitives if p.length > 0]
    done = np.zeros(n, dtype=bool)
    for j, p in enumerate(prims):
        last = j == len(prims) - 1
        mask = (s_grid >= edge) & ((s_grid <= edge + p.length) if last
                                    else (s_grid < edge + p.length)) & ~done
        local = s_grid[mask] - edge
        if isinstance(p, CArc):
            for i, s in zip(np.flatnonzero(mask), local):
                g = endpoint_c_arc(f, p.phi, s)
                states[i] = np.concatenate([g.position, g.tangent])
            f = endpoint_c_arc(f, p.phi, p.length)
        elif isinstance(p, SSeg):
            for i, s in zip(np.flatnonzero(mask), local):
                states[i] = np.concatenate([f.position + s * f.tangent, f.tangent])
            f = endpoint_s(f, p.length)
        else:
            f_new, tr = integrate_h_arc(f, p.params, s_eval=local)
            states[mask, :3] = tr["position"]
            states[mask, 3:] = tr["tangent"]
            f = f_new
        done |= mask
        edge += p.length
    if not np.all(done):
        states[~done] = np.concatenate([f.position, f.tangent])
    ds = s_grid[1] - s_grid[0] if n > 1 else 1.0
    kappa = np.linalg.norm(np.diff(states[:, 3:], axis=0), axis=1) / ds if ds > 0 else np.zeros(1)
    return Trajectory(s_grid, states), float(np.max(kappa, initial=0.0))
