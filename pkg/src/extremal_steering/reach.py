"""Sampled reachable sets, en-route clouds and Hausdorff distances.

Reachable sets are approximated by endpoints of random bang-bang controls
with a bounded number of switches. Backward clouds follow ``-f`` from the
terminal state. Every control draw uses its own seeded stream, so a cloud
depends only on the master seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial import ConvexHull, cKDTree

from .rootfind import RootProblem, solve_lm

__all__ = [
    "PointCloud",
    "ControlSample",
    "SteeringSpec",
    "SYSTEMS",
    "sample_controls",
    "sample_reachable",
    "propagate_piecewise",
    "hausdorff",
    "enroute_cloud",
    "continuity_probe",
    "boundary_coverage_check",
    "write_cloud_csv",
]


# nearest-neighbour distances below this count as repeated endpoints
DUPLICATE_TOL = 1e-9


@dataclass
class PointCloud:
    points: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)

    @property
    def period(self):
        return self.meta.get("period")


@dataclass(frozen=True)
class ControlSample:
    switch_times: tuple
    values: tuple

    def __post_init__(self):
        if len(self.values) != len(self.switch_times) + 1:
            raise ValueError("need one control value per interval")
        if any(b < a for a, b in zip(self.switch_times, self.switch_times[1:])):
            raise ValueError("switch times must be increasing")


# --- systems -----------------------------------------------------------------


def _vdp_f(X, U):
    x1, x2 = X[:, 0], X[:, 1]
    return np.column_stack([x2, (1 - x1 * x1) * x2 - x1 + U[:, 0]])


def _d2_f(X, U):
    return np.column_stack([np.cos(X[:, 2]), np.sin(X[:, 2]), U[:, 0]])


def _d3_f(X, U):
    y = X[:, 3:6]
    return np.column_stack([y, np.cross(y, U)])


def _d2_flow(x, u, s):
    # closed-form unit-speed motion; negative s runs backwards
    x0, y0, g = x
    if u == 0:
        return np.array([x0 + s * math.cos(g), y0 + s * math.sin(g), g])
    g1 = g + u * s
    return np.array([x0 + (math.sin(g1) - math.sin(g)) / u,
                     y0 - (math.cos(g1) - math.cos(g)) / u, g1])


def _d3_flow(x, u, s):
    # y' = y x u rotates y about -u at rate |u|
    p, y = x[:3], x[3:]
    r = np.linalg.norm(u)
    if r == 0:
        return np.concatenate([p + s * y, y])
    a = -u / r
    par = (a @ y) * a
    perp = y - par
    ay = np.cross(a, y)
    th = r * s
    y1 = par + math.cos(th) * perp + math.sin(th) * ay
    p1 = p + par * s + (math.sin(th) * perp + (1 - math.cos(th)) * ay) / r
    return np.concatenate([p1, y1])


def _scalar_extremes(rng, k):
    # alternate signs so every switch changes the control
    first = rng.choice([-1.0, 1.0])
    return (first * (-1.0) ** np.arange(k))[:, None]


def _sphere_extremes(rng, k):
    v = rng.normal(size=(k, 3))
    return v / np.linalg.norm(v, axis=1)[:, None]


@dataclass(frozen=True)
class System:
    name: str
    dim: int
    f: Callable
    extremes: Callable
    flow: Optional[Callable] = None
    period: Optional[tuple] = None


SYSTEMS = {
    "vdp": System("vdp", 2, _vdp_f, _scalar_extremes),
    "dubins2d": System("dubins2d", 3, _d2_f, _scalar_extremes, _d2_flow, (0.0, 0.0, 2 * math.pi)),
    "dubins3d": System("dubins3d", 6, _d3_f, _sphere_extremes, _d3_flow),
}


def _system(name):
    try:
        return SYSTEMS[name]
    except KeyError:
        raise ValueError(f"unknown system {name!r}") from None


def sample_controls(system: str, t: float, n: int, max_switches: int, seed: int = 0):
    """``n`` random bang-bang controls on ``[0, t]``.

    Switch counts are uniform on ``0..max_switches``, switch times uniform
    on ``[0, t]``. Scalar controls start at a random sign and alternate;
    vector controls are independent uniform unit vectors.
    """
    sys_ = _system(system)
    out = []
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        k = int(rng.integers(0, max_switches + 1))
        sw = tuple(np.sort(rng.uniform(0.0, t, size=k)).tolist())
        vals = sys_.extremes(rng, k + 1)
        out.append(ControlSample(sw, tuple(tuple(v) for v in vals)))
    return out


def propagate_piecewise(f, X0, controls: Sequence[ControlSample], t, h=1e-2, sign=1.0):
    """Batched RK4 under piecewise-constant controls.

    Each sample takes steps of at most ``h`` that end exactly on its own
    switch times, so the control is constant inside every step.
    """
    X = np.array(X0, dtype=float)
    m = X.shape[0]
    nu = len(controls[0].values[0])
    counts = np.array([len(c.switch_times) for c in controls])
    kmax = int(counts.max(initial=0))
    # padded edge table: switch times, then t, then inf
    E = np.full((m, kmax + 1), np.inf)
    V = np.zeros((m, kmax + 1, nu))
    for i, c in enumerate(controls):
        E[i, :counts[i]] = c.switch_times
        E[i, counts[i]] = t
        V[i, :counts[i] + 1] = c.values
    rows = np.arange(m)
    s = np.zeros(m)

    def g(Y, U):
        return sign * f(Y, U)

    while True:
        active = s < t
        if not np.any(active):
            break
        seg = np.minimum(np.sum(E <= s[:, None], axis=1), counts)
        U = V[rows, seg]
        nxt = E[rows, seg]
        dt = np.where(active, np.minimum(h, nxt - s), 0.0)
        dt = np.maximum(dt, 0.0)
        d = dt[:, None]
        k1 = g(X, U)
        k2 = g(X + 0.5 * d * k1, U)
        k3 = g(X + 0.5 * d * k2, U)
        k4 = g(X + d * k3, U)
        X = X + d / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        # land exactly on the switch to avoid creeping steps
        s = np.where(active, np.where(nxt - s <= h, nxt, s + dt), s)
    return X


def _propagate_closed(sys_, origin, c, t, sign):
    x = np.asarray(origin, dtype=float)
    edges = list(c.switch_times) + [t]
    prev = 0.0
    for e, v in zip(edges, c.values):
        u = v[0] if sys_.dim == 3 else np.asarray(v)
        x = sys_.flow(x, u, sign * (e - prev))
        prev = e
    return x


def sample_reachable(system: str, sign: str, origin, t: float, n_samples: int,
                     max_switches: int, seed: int = 0, h: float = 1e-2) -> PointCloud:
    """Endpoints of random bang-bang controls run for time ``t``.

    Parameters
    ----------
    system : {"vdp", "dubins2d", "dubins3d"}
    sign : {"forward", "backward"}
        ``backward`` integrates ``-f`` from ``origin``.
    origin : array_like
    t : float
    n_samples, max_switches : int
    seed : int, optional
        Master seed; sample ``i`` uses stream ``(seed, i)``.
    h : float, optional
        RK4 step for systems without a closed-form flow.

    Returns
    -------
    PointCloud
        Non-finite endpoints are dropped and counted in ``meta["dropped"]``.
        Dubins headings are wrapped to ``[0, 2 pi)``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if max_switches < 0:
        raise ValueError("max_switches must be nonnegative")
    if sign not in ("forward", "backward"):
        raise ValueError("sign must be 'forward' or 'backward'")
    sys_ = _system(system)
    sg = 1.0 if sign == "forward" else -1.0
    controls = sample_controls(system, t, n_samples, max_switches, seed)
    origin = np.asarray(origin, dtype=float).reshape(sys_.dim)
    if sys_.flow is not None:
        pts = np.array([_propagate_closed(sys_, origin, c, t, sg) for c in controls])
    else:
        with np.errstate(over="ignore", invalid="ignore"):
            pts = propagate_piecewise(sys_.f, np.tile(origin, (n_samples, 1)), controls, t, h, sg)
    ok = np.all(np.isfinite(pts), axis=1)
    pts = pts[ok]
    if sys_.period is not None:
        pts[:, 2] = np.mod(pts[:, 2], 2 * math.pi)
    meta = {"system": system, "sign": sign, "t": float(t), "n_samples": n_samples,
            "max_switches": max_switches, "seed": seed, "dropped": int((~ok).sum()),
            "period": list(sys_.period) if sys_.period else None}
    return PointCloud(pts, meta)


# --- distances ---------------------------------------------------------------


def _tree(points, period):
    if period is None:
        return cKDTree(points), points
    box = np.asarray(period, dtype=float)
    pts = points.copy()
    per = box > 0
    pts[:, per] = np.mod(pts[:, per], box[per])
    return cKDTree(pts, boxsize=box), pts


def _points(c):
    return np.atleast_2d(np.asarray(c.points if isinstance(c, PointCloud) else c, dtype=float))


def hausdorff(a, b, period=None) -> float:
    """Exact symmetric Hausdorff distance between two finite clouds.

    Nearest neighbours come from a KD-tree with exact queries. ``period``
    gives a per-coordinate period (0 for non-periodic); it defaults to the
    clouds' own ``meta["period"]``.
    """
    A, B = _points(a), _points(b)
    if A.size == 0 or B.size == 0:
        raise ValueError("hausdorff needs two nonempty clouds")
    if period is None and isinstance(a, PointCloud):
        period = a.period
    ta, pa = _tree(A, period)
    tb, pb = _tree(B, period)
    dab, _ = tb.query(pa)
    dba, _ = ta.query(pb)
    return float(max(dab.max(), dba.max()))


# --- en-route sets -------------------------------------------------------------


@dataclass(frozen=True)
class SteeringSpec:
    system: str
    chi_i: tuple
    chi_f: tuple
    T: float

    @classmethod
    def from_p2(cls, problem):
        """VdP steering spec from a fully fixed shooting problem."""
        if len(problem.free_index):
            raise ValueError("en-route clouds need a fully fixed terminal state")
        return cls("vdp", tuple(problem.chi_i), tuple(problem.chi_f([])), problem.T)


def _nn_percentile(points, period, q=1.0):
    if len(points) < 2:
        return 0.0
    tree, pts = _tree(points, period)
    d, _ = tree.query(pts, k=2)
    # repeated endpoints (e.g. switch-free draws) would pin this at zero
    d = d[:, 1][d[:, 1] > DUPLICATE_TOL]
    return float(np.percentile(d, q)) if d.size else 0.0


def enroute_cloud(spec: SteeringSpec, t: float, n: int, seed: int = 0, max_switches: int = 4,
                  delta: Optional[float] = None) -> PointCloud:
    """Forward-cloud points at time ``t`` that meet the backward cloud.

    The backward cloud is sampled from ``chi_f`` under ``-f`` for time
    ``T - t``. A forward point is kept when its nearest backward point is
    closer than ``delta``, by default the 1st percentile of nearest-neighbour
    distances inside the forward cloud.
    """
    if not 0 <= t <= spec.T:
        raise ValueError("t must lie in [0, T]")
    fwd = sample_reachable(spec.system, "forward", spec.chi_i, t, n, max_switches, seed)
    bwd = sample_reachable(spec.system, "backward", spec.chi_f, spec.T - t, n, max_switches,
                           seed + 1)
    period = fwd.period
    if delta is None:
        delta = _nn_percentile(fwd.points, period)
    keep = np.zeros(len(fwd), dtype=bool)
    if len(fwd) and len(bwd):
        tb, _ = _tree(bwd.points, period)
        _, pf = _tree(fwd.points, period)
        d, _ = tb.query(pf)
        keep = d <= delta
    meta = dict(fwd.meta)
    meta.update({"kind": "enroute", "T": spec.T, "delta": float(delta),
                 "n_forward": len(fwd), "n_backward": len(bwd)})
    return PointCloud(fwd.points[keep], meta)


def _speed_bound(spec, clouds, seed):
    sys_ = _system(spec.system)
    pts = np.vstack([c.points for c in clouds if len(c)]) if any(len(c) for c in clouds) \
        else np.atleast_2d(np.asarray(spec.chi_i, dtype=float))
    rng = np.random.default_rng([seed, 7])
    if sys_.dim == 6:
        U = _sphere_extremes(rng, 64)
    else:
        U = np.array([[-1.0], [1.0]])
    best = 0.0
    for u in U:
        v = np.linalg.norm(sys_.f(pts, np.tile(u, (len(pts), 1))), axis=1)
        best = max(best, float(v.max()))
    return best


def continuity_probe(spec: SteeringSpec, times: Sequence[float], n: int, seed: int = 0,
                     max_switches: int = 4, delta: Optional[float] = None) -> list:
    """Hausdorff distances between en-route clouds at consecutive times.

    Each entry reports ``d_H`` and the bound ``m dt + 2 delta`` with ``m``
    the largest ``|f|`` seen over the cloud points and control extremes.
    Pairs where either cloud is empty report ``d_h = None``.
    """
    times = [float(t) for t in times]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("times must be sorted")
    clouds = [enroute_cloud(spec, t, n, seed, max_switches, delta) for t in times]
    m = _speed_bound(spec, clouds, seed)
    out = []
    for (t0, c0), (t1, c1) in zip(zip(times, clouds), zip(times[1:], clouds[1:])):
        d = max(c0.meta["delta"], c1.meta["delta"])
        bound = m * (t1 - t0) + 2 * d
        if len(c0) and len(c1):
            dh = hausdorff(c0, c1)
            ok = dh <= bound
        else:
            dh, ok = None, None
        out.append({"t0": t0, "t1": t1, "d_h": dh, "bound": bound, "speed": m,
                    "delta": d, "holds": ok})
    return out


# --- boundary coverage -----------------------------------------------------------


def _fit_single_word(target, t):
    from .dubins2d import WORD_PATTERNS, Config2D, _residual

    goal = Config2D(*target)
    start = Config2D()
    best = np.inf
    for pat in WORD_PATTERNS:
        for x0 in ([t / 3, t / 3], [0.1 * t, 0.1 * t], [0.45 * t, 0.1 * t], [0.1 * t, 0.45 * t]):
            res = solve_lm(RootProblem(lambda z, pat=pat: _residual(start, goal, pat, z, t),
                                       np.asarray(x0), np.zeros(2), np.full(2, t),
                                       max_iters=60, residual_tol=1e-12))
            best = min(best, res.residual_norm)
            if best <= 1e-10:
                return best
    return best


def boundary_coverage_check(t: float, n_cloud: int, n_words: int, seed: int = 0,
                            max_switches: int = 2, probe=None) -> dict:
    """Fit single CSC/CCC words to approximate boundary points of a 2D cloud.

    Boundary points are convex-hull vertices of the forward Dubins cloud in
    the ``(x, y, gamma)`` chart with ``gamma`` unwrapped around zero; up to
    ``n_words`` of them are probed, evenly spread over the vertex list.
    ``probe`` adds extra points (e.g. interior ones).

    The default cloud uses at most two switches. Draws with more switches
    land strictly inside the set, so their hull vertices sit about one
    sampling spacing below the true boundary and fit only to that accuracy.

    Returns
    -------
    dict
        ``points``, the best single-word residual per point in
        ``residuals``, and ``spacing``, the median nearest-neighbour
        distance of the cloud in the same chart.
    """
    cloud = sample_reachable("dubins2d", "forward", (0.0, 0.0, 0.0), t, n_cloud,
                             max_switches, seed)
    pts = cloud.points.copy()
    pts[:, 2] = np.mod(pts[:, 2] + math.pi, 2 * math.pi) - math.pi
    try:
        verts = ConvexHull(pts).vertices
    except Exception:  # degenerate (e.g. tiny t)
        verts = np.arange(len(pts))
    verts = np.sort(verts)
    if len(verts) > n_words:
        verts = verts[np.linspace(0, len(verts) - 1, n_words).astype(int)]
    targets = [pts[i] for i in verts]
    if probe is not None:
        targets += [np.asarray(p, dtype=float) for p in np.atleast_2d(probe)]
    residuals = np.array([_fit_single_word(p, t) for p in targets])
    d = cKDTree(pts).query(pts, k=2)[0][:, 1] if len(pts) > 1 else np.zeros(1)
    d = d[d > DUPLICATE_TOL]
    spacing = float(np.median(d)) if d.size else 0.0
    return {"t": t, "n_probed": len(targets), "points": np.array(targets),
            "residuals": residuals, "spacing": spacing}


def write_cloud_csv(cloud: PointCloud, path, header: Optional[Sequence[str]] = None):
    """One state per row, with a header line."""
    pts = np.asarray(cloud.points)
    dim = pts.shape[1] if pts.ndim == 2 and pts.size else len(header or [])
    header = list(header) if header else [f"s{i}" for i in range(dim)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in pts:
            w.writerow([repr(float(v)) for v in row])
