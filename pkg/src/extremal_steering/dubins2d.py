"""Fixed-length planar Dubins paths built from two CSC/CCC words.

Primitives have unit turning radius. ``L`` and ``R`` are left and right
unit-curvature arcs, ``S`` is a straight segment. A path is the
concatenation of two words, each ``CSC`` or ``CCC``; zero lengths give
the shorter subsegment shapes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rootfind import RootProblem, solve_lm
from .trajectory import Trajectory

__all__ = [
    "Config2D",
    "Primitive",
    "Word2D",
    "TwoWordPath2D",
    "PATTERNS",
    "endpoint_2d",
    "word_residual_2d",
    "solve_dubins2d",
    "sample_path_2d",
    "prune",
    "structure",
]

PRUNE_TOL = 1e-9


@dataclass(frozen=True)
class Config2D:
    x: float = 0.0
    y: float = 0.0
    gamma: float = 0.0

    def as_array(self):
        return np.array([self.x, self.y, self.gamma])


@dataclass(frozen=True)
class Primitive:
    """``kind`` is ``"L"``, ``"R"`` or ``"S"``."""

    kind: str
    length: float

    def __post_init__(self):
        if self.kind not in ("L", "R", "S"):
            raise ValueError(f"unknown primitive {self.kind!r}")
        if not self.length >= 0:
            raise ValueError("primitive length must be nonnegative")

    @property
    def letter(self):
        return "S" if self.kind == "S" else "C"


@dataclass(frozen=True)
class Word2D:
    primitives: tuple

    def __post_init__(self):
        if len(self.primitives) > 3:
            raise ValueError("a word has at most three primitives")

    @property
    def length(self):
        return sum(p.length for p in self.primitives)


@dataclass(frozen=True)
class TwoWordPath2D:
    word1: Word2D
    word2: Word2D
    total_length: float
    residual_norm: float = 0.0
    start: Config2D = Config2D()

    @property
    def primitives(self):
        return self.word1.primitives + self.word2.primitives

    @property
    def structure(self):
        return structure(self.primitives)

    def end(self):
        return endpoint_2d(self.start, self.primitives)


def _word_patterns():
    out = []
    for a, c in itertools.product("LR", repeat=2):
        out.append((a, "S", c))
    for dirs in itertools.product("LR", repeat=3):
        out.append(dirs)
    return out


WORD_PATTERNS = _word_patterns()
# 12 direction patterns per word, 144 ordered pairs
PATTERNS = [(w1, w2) for w1 in WORD_PATTERNS for w2 in WORD_PATTERNS]


def _advance(x, y, g, kind, ell):
    if kind == "S":
        return x + ell * math.cos(g), y + ell * math.sin(g), g
    if kind == "L":
        g1 = g + ell
        return x + math.sin(g1) - math.sin(g), y - math.cos(g1) + math.cos(g), g1
    g1 = g - ell
    return x - math.sin(g1) + math.sin(g), y + math.cos(g1) - math.cos(g), g1


def _flatten(word):
    if isinstance(word, TwoWordPath2D):
        return word.primitives
    if isinstance(word, Word2D):
        return word.primitives
    out = []
    for w in word:
        if isinstance(w, Word2D):
            out.extend(w.primitives)
        else:
            out.append(w)
    return tuple(out)


def endpoint_2d(start: Config2D, word) -> Config2D:
    """Closed-form end configuration after following ``word`` from ``start``.

    ``word`` may be a :class:`Word2D`, a path, or a sequence of primitives
    and words. The heading is not wrapped.
    """
    x, y, g = start.x, start.y, start.gamma
    for p in _flatten(word):
        x, y, g = _advance(x, y, g, p.kind, p.length)
    return Config2D(x, y, g)


def _wrap(a):
    return math.atan2(math.sin(a), math.cos(a))


def _residual(start, goal, kinds, free, T):
    # the last primitive absorbs T - sum(free); overshoot is penalized
    rest = T - math.fsum(free)
    deficit = max(-rest, 0.0)
    x, y, g = start.x, start.y, start.gamma
    for kind, ell in zip(kinds, list(free) + [max(rest, 0.0)]):
        x, y, g = _advance(x, y, g, kind, ell)
    return np.array([x - goal.x, y - goal.y, _wrap(g - goal.gamma), deficit])


def word_residual_2d(goal: Config2D, T: float, pattern, lengths, start: Config2D = Config2D()):
    """Endpoint mismatch of a two-word pattern with total length ``T``.

    Parameters
    ----------
    goal : Config2D
    T : float
        Total path length.
    pattern : pair of direction triples
        E.g. ``(("L", "S", "R"), ("R", "L", "R"))``.
    lengths : array_like, shape (5,)
        Lengths of the first five primitives; the sixth is ``T - sum``.
    start : Config2D, optional

    Returns
    -------
    ndarray
        ``(dx, dy, dgamma)`` with the heading difference wrapped to
        ``(-pi, pi]``. When the free lengths exceed ``T`` the last length is
        clamped at zero and the overshoot is appended as a fourth entry.
    """
    kinds = tuple(pattern[0]) + tuple(pattern[1])
    lengths = np.asarray(lengths, dtype=float)
    if lengths.shape != (len(kinds) - 1,):
        raise ValueError(f"expected {len(kinds) - 1} free lengths")
    if np.any(lengths < 0):
        raise ValueError("lengths must be nonnegative")
    r = _residual(start, goal, kinds, lengths, T)
    return r if r[3] > 0 else r[:3]


def prune(primitives: Sequence[Primitive], tol: float = PRUNE_TOL):
    """Drop near-zero primitives and merge equal neighbours."""
    out = []
    for p in primitives:
        if p.length < tol:
            continue
        if out and out[-1].kind == p.kind:
            out[-1] = Primitive(p.kind, out[-1].length + p.length)
        else:
            out.append(p)
    return tuple(out)


def structure(primitives, tol: float = PRUNE_TOL) -> str:
    """Class string such as ``"CSCC"`` after pruning."""
    return "".join(p.letter for p in prune(primitives, tol))


def _canonical(kinds):
    out = []
    for k in kinds:
        if not out or out[-1] != k:
            out.append(k)
    return tuple(out)


def _sequences():
    """Distinct primitive sequences reachable by zeroing slots of a pattern.

    Maps each canonical sequence to (pattern, kept slot indices) so a
    solution can be written back as two three-slot words.
    """
    table = {}
    for pat in PATTERNS:
        kinds = pat[0] + pat[1]
        for k in range(6, 0, -1):
            for keep in itertools.combinations(range(6), k):
                seq = tuple(kinds[i] for i in keep)
                if _canonical(seq) != seq:
                    continue
                table.setdefault(seq, (pat, keep))
    # full patterns first, then shorter sequences
    return sorted(table.items(), key=lambda kv: (-len(kv[0]), kv[0]))


_SEQUENCES = _sequences()


def _to_path(start, pat, keep, lens, T, norm):
    slot = [0.0] * 6
    for i, ell in zip(keep, lens):
        slot[i] = float(ell)
    kinds = pat[0] + pat[1]
    prims = [Primitive(k, v) for k, v in zip(kinds, slot)]
    return TwoWordPath2D(Word2D(tuple(prims[:3])), Word2D(tuple(prims[3:])), T, norm, start)


def _solve_sequence(start, goal, T, seq, starts, seed, tol):
    n = len(seq)
    if n == 1:
        r = _residual(start, goal, seq, [], T)
        norm = float(np.linalg.norm(r))
        return [(np.array([T]), norm)] if norm <= tol else []
    out = []
    for i in range(starts):
        rng = np.random.default_rng([seed, n, i] + [ord(c) for c in seq])
        x0 = rng.dirichlet(np.ones(n))[:-1] * T
        prob = RootProblem(lambda z: _residual(start, goal, seq, z, T), x0,
                           np.zeros(n - 1), np.full(n - 1, T), max_iters=80,
                           residual_tol=tol)
        res = solve_lm(prob)
        if res.converged:
            lens = np.append(res.x, max(T - math.fsum(res.x), 0.0))
            out.append((lens, res.residual_norm))
            break
    return out


def solve_dubins2d(
    goal: Config2D,
    T: float,
    starts_per_pattern: int = 3,
    seed: int = 0,
    start: Config2D = Config2D(),
    residual_tol: float = 1e-10,
    stop_at_first: bool = False,
    max_sequence: int = 6,
) -> list:
    """Search all two-word patterns for paths of length ``T`` reaching ``goal``.

    Every distinct primitive sequence obtained from the 144 pattern pairs by
    zeroing some lengths is solved separately, so sparse shapes such as
    ``CSCC`` are found as isolated roots instead of by landing on a bound.
    Returned paths carry full three-slot words, are deduplicated after
    pruning, and are sorted by residual norm.

    Parameters
    ----------
    goal : Config2D
    T : float
        Total length, must be nonnegative.
    starts_per_pattern : int, optional
        Random starts per sequence; each sequence stops at its first root.
    stop_at_first : bool, optional
        Return as soon as one path converges.
    max_sequence : int, optional
        Longest primitive sequence tried.
    """
    if not T >= 0:
        raise ValueError("T must be nonnegative")
    if T == 0:
        r = np.array([start.x - goal.x, start.y - goal.y, _wrap(start.gamma - goal.gamma)])
        norm = float(np.linalg.norm(r))
        if norm > residual_tol:
            return []
        return [_to_path(start, PATTERNS[0], (0,), [0.0], 0.0, norm)]
    found = []
    seen = set()
    for seq, (pat, keep) in _SEQUENCES:
        if len(seq) > max_sequence:
            continue
        for lens, norm in _solve_sequence(start, goal, T, seq, starts_per_pattern, seed,
                                          residual_tol):
            path = _to_path(start, pat, keep, lens, T, norm)
            key = tuple((p.kind, round(p.length, 6)) for p in prune(path.primitives))
            if key in seen:
                continue
            seen.add(key)
            found.append(path)
            if stop_at_first:
                return found
    found.sort(key=lambda p: p.residual_norm)
    return found


def sample_path_2d(path: TwoWordPath2D, n: int) -> Trajectory:
    """``n`` arclength-equispaced configurations along ``path``.

    Controls are the signed curvature (+1 left, -1 right, 0 straight) of the
    primitive each sample lies on.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    prims = [p for p in path.primitives if p.length > 0]
    s_grid = np.linspace(0.0, path.total_length, n)
    states = np.empty((n, 3))
    controls = np.zeros(n)
    c = path.start
    x, y, g = c.x, c.y, c.gamma
    edge = 0.0
    j = 0
    sign = {"L": 1.0, "R": -1.0, "S": 0.0}
    for i, s in enumerate(s_grid):
        while j < len(prims) and s > edge + prims[j].length:
            x, y, g = _advance(x, y, g, prims[j].kind, prims[j].length)
            edge += prims[j].length
            j += 1
        if j < len(prims):
            states[i] = _advance(x, y, g, prims[j].kind, s - edge)
            controls[i] = sign[prims[j].kind]
        else:
            states[i] = (x, y, g)
    return Trajectory(s_grid, states, controls=controls)


def structure_counts(paths: Sequence[TwoWordPath2D]):
    """Number of returned paths per pruned structure class."""
    counts = {}
    for p in paths:
        counts[p.structure] = counts.get(p.structure, 0) + 1
    return counts
