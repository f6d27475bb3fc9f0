"""Command-line entry point: ``steer``, ``oracle`` and ``verify``.

Exit codes: 0 success, 1 bad input, 2 no converged solution, 3 failed
verification. Files are written to a temporary name and renamed into place.
``summary.json`` and oracle reports hold only seed-determined content;
wall times go to ``metadata.json`` next to them.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import dubins2d as d2
from . import dubins3d as d3
from . import reach
from .rootfind import default_workers
from .shooting import package_solution, solve_p2, sphere_angles, verify_solution
from .vdp import DEFAULT_CHI_I, vdp_problem

FREE = "free"
DIMS = {"vdp": 2, "dubins2d": 3, "dubins3d": 6}
STATE_NAMES = {
    "vdp": ["x1", "x2"],
    "dubins2d": ["x", "y", "gamma"],
    "dubins3d": ["x", "y", "z", "tx", "ty", "tz"],
}

# verification tolerances
TERMINAL_TOL = 1e-6
JUNCTION_TOL = 1e-6
HAMILTONIAN_TOL = 1e-8
LENGTH_TOL = 1e-9


class SpecError(ValueError):
    """Invalid problem spec; the message starts with the offending field."""


# --- file output ---------------------------------------------------------------


def write_atomic(path, text):
    """Write ``text`` to ``path`` via a temporary file and ``os.replace``."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def _increasing(times, *cols):
    # keep rows whose time strictly exceeds every earlier time
    keep = np.ones(len(times), dtype=bool)
    last = -np.inf
    for i, t in enumerate(times):
        keep[i] = t > last
        last = max(last, t)
    return [np.asarray(times)[keep]] + [np.asarray(c)[keep] for c in cols]


def _floats(v):
    return [float(x) for x in np.asarray(v, dtype=float).ravel()]


# --- spec parsing --------------------------------------------------------------


def _vector(value, field, n, allow_free):
    if not isinstance(value, list) or len(value) != n:
        raise SpecError(f"{field}: expected a list of {n} entries")
    out = []
    for v in value:
        if v == FREE and allow_free:
            out.append(None)
        elif isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v):
            out.append(float(v))
        else:
            raise SpecError(f"{field}: entry {v!r} is not a finite number"
                            + (' or "free"' if allow_free else ""))
    return out


def parse_spec(data):
    """Validate a problem spec dictionary and fill defaults.

    Returns a normalized copy with ``chi_i`` resolved, ``chi_f`` holding
    ``None`` for free components and a complete ``solver`` block.
    """
    if not isinstance(data, dict):
        raise SpecError("spec: top level must be a JSON object")
    system = data.get("system")
    if system not in DIMS:
        raise SpecError(f"system: expected one of {sorted(DIMS)}, got {system!r}")
    n = DIMS[system]
    if "T" not in data:
        raise SpecError("T: missing")
    T = data["T"]
    if isinstance(T, bool) or not isinstance(T, (int, float)) or not math.isfinite(T) or T <= 0:
        raise SpecError(f"T: must be a positive finite number, got {T!r}")
    chi_i = data.get("chi_i", "default")
    if chi_i == "default":
        chi_i = {"vdp": list(DEFAULT_CHI_I), "dubins2d": [0.0, 0.0, 0.0],
                 "dubins3d": [0.0, 0.0, 0.0, 1.0, 0.0, 0.0]}[system]
    chi_i = _vector(chi_i, "chi_i", n, False)
    if "chi_f" not in data:
        raise SpecError("chi_f: missing")
    chi_f = _vector(data["chi_f"], "chi_f", n, True)
    free = [v is None for v in chi_f]
    if system == "vdp" and all(free):
        raise SpecError("chi_f: at least one component must be fixed")
    if system == "dubins2d" and any(free):
        raise SpecError("chi_f: free components are not supported for dubins2d")
    if system == "dubins3d":
        if any(free[:3]):
            raise SpecError("chi_f: the terminal position must be fixed")
        if any(free[3:]) and not all(free[3:]):
            raise SpecError("chi_f: the terminal tangent is either fully fixed or fully free")
        if not any(free[3:]) and not np.linalg.norm(chi_f[3:]) > 0:
            raise SpecError("chi_f: the terminal tangent must be nonzero")
        if not np.linalg.norm(chi_i[3:]) > 0:
            raise SpecError("chi_i: the initial tangent must be nonzero")

    solver = data.get("solver", {})
    if not isinstance(solver, dict):
        raise SpecError("solver: must be an object")
    defaults = {"starts": {"vdp": 20, "dubins2d": 3, "dubins3d": 6}[system], "seed": 0,
                "residual_tol": {"vdp": 1e-9, "dubins2d": 1e-10, "dubins3d": 1e-9}[system]}
    out_solver = dict(defaults)
    for key, value in solver.items():
        if key in ("starts", "seed"):
            if isinstance(value, bool) or not isinstance(value, int) or value < (1 if key == "starts" else 0):
                raise SpecError(f"solver.{key}: must be a nonnegative integer"
                                if key == "seed" else f"solver.{key}: must be a positive integer")
        elif key == "residual_tol":
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
                raise SpecError("solver.residual_tol: must be positive")
        elif key == "families":
            if system != "dubins3d":
                raise SpecError("solver.families: only meaningful for dubins3d")
            if not isinstance(value, list) or not value or any(f not in ("cs", "h") for f in value):
                raise SpecError('solver.families: expected a nonempty list of "cs"/"h"')
        elif key == "tau_guess":
            if system != "vdp" or not isinstance(value, (int, float)) or not 0 <= value <= 1:
                raise SpecError("solver.tau_guess: a number in [0, 1] for vdp specs")
        elif key == "free_guess":
            if system != "vdp" or not isinstance(value, list) or len(value) != sum(free):
                raise SpecError("solver.free_guess: one number per free component (vdp)")
        elif key == "tangent_seed":
            if system != "dubins3d" or not isinstance(value, list) or len(value) != 3:
                raise SpecError("solver.tangent_seed: three numbers (dubins3d)")
        elif key in ("pin_guesses", "stop_at_first"):
            if not isinstance(value, bool):
                raise SpecError(f"solver.{key}: must be true or false")
        else:
            raise SpecError(f"solver.{key}: unknown option")
        out_solver[key] = value
    if system == "dubins3d":
        out_solver.setdefault("families", ["cs", "h"])
    return {"system": system, "T": float(T), "chi_i": chi_i, "chi_f": chi_f,
            "solver": out_solver}


def _frame(chi_i):
    t = np.asarray(chi_i[3:], dtype=float)
    t = t / np.linalg.norm(t)
    # normal: the coordinate axis least aligned with t, made orthogonal
    e = np.eye(3)[int(np.argmin(np.abs(t)))]
    nrm = e - (e @ t) * t
    return d3.Frame3D(np.asarray(chi_i[:3], dtype=float), t, nrm / np.linalg.norm(nrm))


# --- steer ---------------------------------------------------------------------


def _steer_vdp(spec, out_dir):
    sv = spec["solver"]
    problem = vdp_problem(spec["chi_f"], spec["T"], chi_i=spec["chi_i"])
    sols = solve_p2(problem, starts=sv["starts"], seed=sv["seed"],
                    tau_guess=sv.get("tau_guess"), free_guess=sv.get("free_guess"),
                    pin_guesses=sv.get("pin_guesses", False),
                    residual_tol=sv["residual_tol"],
                    stop_at_first=sv.get("stop_at_first", False),
                    workers=default_workers())
    records, files = [], {}
    for k, sol in enumerate(sols):
        name = f"trajectory_{k}.csv"
        tr = sol.trajectory
        t, x, p, u = _increasing(tr.times, tr.states, tr.costates, tr.controls)
        files[name] = csv_text(["t", "x1", "x2", "p1", "p2", "u"],
                               np.column_stack([t, x, p, u]))
        records.append({
            "index": k,
            "tau": float(sol.tau),
            "concat_time": float(sol.concat_time),
            "freed_values": _floats(sol.freed_values),
            "p1_0": _floats(sol.p1_0),
            "p2_0": _floats(sol.p2_0),
            "switch_times": _floats(sol.switch_times),
            "residual_norm": float(sol.residual_norm),
            "iterations": int(sol.iterations),
            "trajectory": name,
        })
    return records, files


def _prims_2d(word):
    return [{"kind": p.kind, "length": float(p.length)} for p in word.primitives]


def _svg(paths, samples):
    pts = np.vstack([s[:, :2] for s in samples])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = 0.05 * max(float(np.max(hi - lo)), 1.0)
    lo, hi = lo - pad, hi + pad
    w, h = hi - lo
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    lines = [
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{lo[0]:.6f} {-hi[1]:.6f} {w:.6f} {h:.6f}" width="640" '
        f'height="{640 * h / w:.1f}">',
    ]
    stroke = 0.004 * max(w, h)
    for k, (path, s) in enumerate(zip(paths, samples)):
        coords = " ".join(f"{x:.6f},{-y:.6f}" for x, y in s[:, :2])
        lines.append(f'  <polyline fill="none" stroke="{colors[k % len(colors)]}" '
                     f'stroke-width="{stroke:.6f}" points="{coords}">'
                     f"<title>{k}: {path.structure}</title></polyline>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _steer_dubins2d(spec, out_dir):
    sv = spec["solver"]
    T = spec["T"]
    start = d2.Config2D(*spec["chi_i"])
    goal = d2.Config2D(*spec["chi_f"])
    paths = d2.solve_dubins2d(goal, T, starts_per_pattern=sv["starts"], seed=sv["seed"],
                              start=start, residual_tol=sv["residual_tol"],
                              stop_at_first=sv.get("stop_at_first", False))
    # arcs have unit radius: 64 samples per unit length gives 64 per radian
    n = max(201, int(math.ceil(64 * T)) + 1)
    records, files, samples = [], {}, []
    for k, path in enumerate(paths):
        name = f"trajectory_{k}.csv"
        tr = d2.sample_path_2d(path, n)
        samples.append(tr.states)
        s, x, u = _increasing(tr.times, tr.states, tr.controls)
        files[name] = csv_text(["s", "x", "y", "gamma", "kappa"], np.column_stack([s, x, u]))
        records.append({
            "index": k,
            "structure": path.structure,
            "words": [_prims_2d(path.word1), _prims_2d(path.word2)],
            "total_length": float(math.fsum(p.length for p in path.primitives)),
            "residual_norm": float(path.residual_norm),
            "iterations": 0,
            "trajectory": name,
        })
    if paths:
        files["plot.svg"] = _svg(paths, samples)
    return records, files


def _prim_3d(p):
    if isinstance(p, d3.CArc):
        return {"kind": "C", "length": float(p.length), "phi": float(p.phi)}
    if isinstance(p, d3.SSeg):
        return {"kind": "S", "length": float(p.length)}
    q = p.params
    return {"kind": "H", "length": float(q.length), "tau0": float(q.tau0),
            "tau_dot0": float(q.tau_dot0), "zeta": float(q.zeta), "psi": float(q.psi)}


def _prim_from(d):
    if d["kind"] == "C":
        return d3.CArc(float(d["phi"]), float(d["length"]))
    if d["kind"] == "S":
        return d3.SSeg(float(d["length"]))
    if d["kind"] == "H":
        return d3.HArc(d3.HParams(float(d["length"]), float(d["tau0"]), float(d["tau_dot0"]),
                                  float(d["zeta"]), float(d["psi"])))
    raise ValueError(f"unknown primitive kind {d['kind']!r}")


def _steer_dubins3d(spec, out_dir):
    sv = spec["solver"]
    T = spec["T"]
    start = _frame(spec["chi_i"])
    tangent = None if spec["chi_f"][3] is None else spec["chi_f"][3:]
    goal = d3.Goal3D(spec["chi_f"][:3], tangent)
    paths = d3.solve_dubins3d(goal, T, families=tuple(sv["families"]), starts=sv["starts"],
                              seed=sv["seed"], start=start, residual_tol=sv["residual_tol"],
                              tangent_seed=sv.get("tangent_seed"),
                              stop_at_first=sv.get("stop_at_first", False))
    n = max(201, int(math.ceil(16 * T)) + 1)
    records, files = [], {}
    for k, path in enumerate(paths):
        name = f"trajectory_{k}.csv"
        tr, _ = d3.sample_path_3d(path, n)
        s, x = _increasing(tr.times, tr.states)
        files[name] = csv_text(["s"] + STATE_NAMES["dubins3d"], np.column_stack([s, x]))
        end = path.end()
        records.append({
            "index": k,
            "structure": path.structure,
            "pattern": path.pattern,
            "words": [[_prim_3d(p) for p in path.word1.primitives],
                      [_prim_3d(p) for p in path.word2.primitives]],
            "total_length": float(path.total_length),
            "terminal_tangent": _floats(end.tangent),
            "freed_values": _floats(end.tangent) if goal.free_tangent else [],
            "residual_norm": float(path.residual_norm),
            "iterations": 0,
            "trajectory": name,
        })
    return records, files


STEER = {"vdp": _steer_vdp, "dubins2d": _steer_dubins2d, "dubins3d": _steer_dubins3d}


def _spec_json(spec):
    out = dict(spec)
    out["chi_f"] = [FREE if v is None else v for v in spec["chi_f"]]
    return out


def cmd_steer(spec_path, out_dir):
    try:
        with open(spec_path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: spec: cannot read {spec_path}: {exc}", file=sys.stderr)
        return 1
    try:
        spec = parse_spec(raw)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.perf_counter()
    records, files = STEER[spec["system"]](spec, out_dir)
    wall = time.perf_counter() - t0
    for name, text in sorted(files.items()):
        write_atomic(os.path.join(out_dir, name), text)
    summary = {"spec": _spec_json(spec), "records": records}
    write_atomic(os.path.join(out_dir, "summary.json"), dump_json(summary))
    write_atomic(os.path.join(out_dir, "metadata.json"),
                 dump_json({"wall_time_s": wall, "workers": default_workers(),
                            "n_records": len(records)}))
    print(f"{len(records)} solution(s) written to {out_dir} in {wall:.2f} s")
    if not records:
        print("no solution converged", file=sys.stderr)
        return 2
    return 0


# --- verify --------------------------------------------------------------------


def _check_vdp(spec, rec):
    problem = vdp_problem(spec["chi_f"], spec["T"], chi_i=spec["chi_i"])
    z = np.concatenate([sphere_angles(rec["p1_0"]), sphere_angles(rec["p2_0"]),
                        [rec["tau"]], rec["freed_values"]])
    sol = package_solution(problem, z, rec["residual_norm"], n_samples=11)
    rep = verify_solution(sol, problem)
    terminal = rep.details["terminal_error"]
    junction = rep.details["junction_error"]
    ham = rep.details["hamiltonian_violation"]
    concat_gap = abs(rec["concat_time"] - rec["tau"] * spec["T"])
    ok = (terminal <= TERMINAL_TOL and junction <= JUNCTION_TOL and ham <= HAMILTONIAN_TOL
          and concat_gap <= LENGTH_TOL)
    return {"terminal_error": terminal, "junction_error": junction,
            "hamiltonian_violation": ham}, ok


def _check_dubins2d(spec, rec):
    T = spec["T"]
    prims = [d2.Primitive(p["kind"], p["length"]) for w in rec["words"] for p in w]
    end = d2.endpoint_2d(d2.Config2D(*spec["chi_i"]), prims)
    gx, gy, gg = spec["chi_f"]
    dg = math.atan2(math.sin(end.gamma - gg), math.cos(end.gamma - gg))
    terminal = math.hypot(math.hypot(end.x - gx, end.y - gy), dg)
    length_err = abs(math.fsum(p.length for p in prims) - T)
    # unit-speed path with |u| <= 1: junction is shared, the maximizer is exact
    ok = terminal <= TERMINAL_TOL and length_err <= LENGTH_TOL
    return {"terminal_error": terminal, "junction_error": 0.0,
            "hamiltonian_violation": 0.0, "length_error": length_err}, ok


def _check_dubins3d(spec, rec):
    T = spec["T"]
    start = _frame(spec["chi_i"])
    w1 = [_prim_from(p) for p in rec["words"][0]]
    w2 = [_prim_from(p) for p in rec["words"][1]]
    mid = d3.follow(start, w1)
    end = d3.follow(mid, w2)
    err = np.linalg.norm(end.position - np.asarray(spec["chi_f"][:3]))
    if spec["chi_f"][3] is not None:
        t = np.asarray(spec["chi_f"][3:], dtype=float)
        err = math.hypot(err, np.linalg.norm(end.tangent - t / np.linalg.norm(t)))
    elif rec.get("freed_values"):
        err = math.hypot(err, np.linalg.norm(end.tangent - np.asarray(rec["freed_values"])))
    length_err = abs(math.fsum(p.length for p in w1 + w2) - T)
    ok = err <= TERMINAL_TOL and length_err <= LENGTH_TOL
    return {"terminal_error": float(err), "junction_error": 0.0,
            "hamiltonian_violation": 0.0, "length_error": length_err}, ok


CHECK = {"vdp": _check_vdp, "dubins2d": _check_dubins2d, "dubins3d": _check_dubins3d}


def cmd_verify(summary_path):
    try:
        with open(summary_path) as fh:
            summary = json.load(fh)
        spec = parse_spec(summary["spec"])
        records = summary["records"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError, SpecError) as exc:
        print(f"error: summary: {exc}", file=sys.stderr)
        return 1
    if not records:
        print("nothing to verify")
        return 0
    failed = []
    for k, rec in enumerate(records):
        try:
            m, ok = CHECK[spec["system"]](spec, rec)
        except (KeyError, TypeError, ValueError) as exc:
            print(f"record {k}: malformed ({exc})")
            failed.append(k)
            continue
        print(f"record {k}: terminal {m['terminal_error']:.3e}  "
              f"junction {m['junction_error']:.3e}  "
              f"hamiltonian {m['hamiltonian_violation']:.3e}  {'ok' if ok else 'FAIL'}")
        if not ok:
            failed.append(k)
    if failed:
        print("verification failed for record(s): " + ", ".join(map(str, failed)),
              file=sys.stderr)
        return 3
    return 0


# --- oracle --------------------------------------------------------------------


def _oracle_origin(args, n):
    if args.origin is None:
        return [0.0] * n if args.system != "vdp" else list(DEFAULT_CHI_I)
    if len(args.origin) != n:
        raise SpecError(f"--origin: expected {n} values")
    return list(args.origin)


def _switches(args, default):
    return default if args.max_switches is None else args.max_switches


def _oracle_sample(args, out_dir):
    n = DIMS[args.system]
    origin = _oracle_origin(args, n)
    if args.system == "dubins3d" and args.origin is None:
        origin[3] = 1.0
    cloud = reach.sample_reachable(args.system, args.sign, origin, args.t, args.n,
                                   _switches(args, 4), args.seed)
    pts = np.asarray(cloud.points)
    files = {"cloud.csv": csv_text(STATE_NAMES[args.system], pts)}
    meta = {k: v for k, v in cloud.meta.items() if isinstance(v, (int, float, str))}
    report = {"command": "sample", "system": args.system, "sign": args.sign, "t": args.t,
              "n": args.n, "seed": args.seed, "origin": _floats(origin),
              "n_points": int(len(pts)), "meta": meta}
    return files, report, True


def _oracle_continuity(args, out_dir):
    n = DIMS[args.system]
    if args.chi_f is None or len(args.chi_f) != n:
        raise SpecError(f"--chi-f: expected {n} values")
    origin = _oracle_origin(args, n)
    if args.system == "dubins3d" and args.origin is None:
        origin[3] = 1.0
    spec = reach.SteeringSpec(args.system, tuple(origin), tuple(args.chi_f), args.t)
    times = np.linspace(0.0, args.t, args.steps)
    rows = reach.continuity_probe(spec, times, args.n, args.seed, _switches(args, 4),
                                  args.delta)
    table = [[r["t0"], r["t1"], np.nan if r["d_h"] is None else r["d_h"], r["bound"]]
             for r in rows]
    files = {"continuity.csv": csv_text(["t0", "t1", "d_h", "bound"], table)}
    checked = [r for r in rows if r["holds"] is not None]
    all_hold = bool(checked) and all(r["holds"] for r in checked)
    report = {"command": "continuity", "system": args.system, "T": args.t, "n": args.n,
              "seed": args.seed, "chi_i": _floats(origin), "chi_f": _floats(args.chi_f),
              "pairs": [{k: (None if v is None else (bool(v) if k == "holds" else float(v)))
                         for k, v in r.items()} for r in rows],
              "n_checked": len(checked), "all_hold": all_hold}
    return files, report, all_hold


def _oracle_coverage(args, out_dir):
    if args.system != "dubins2d":
        raise SpecError("--system: boundary coverage is implemented for dubins2d only")
    rep = reach.boundary_coverage_check(args.t, args.n, args.n_words, args.seed,
                                        _switches(args, 2))
    res = rep["residuals"]
    files = {"coverage.csv": csv_text(["x", "y", "gamma", "residual"],
                                      np.column_stack([rep["points"], res]))}
    report = {"command": "coverage", "system": "dubins2d", "t": args.t, "n": args.n,
              "seed": args.seed, "n_probed": int(rep["n_probed"]),
              "fraction_1e-6": float(np.mean(res <= 1e-6)),
              "fraction_1e-5": float(np.mean(res <= 1e-5)),
              "max_residual": float(np.max(res)), "spacing": rep["spacing"]}
    return files, report, True


ORACLE = {"sample": _oracle_sample, "continuity": _oracle_continuity,
          "coverage": _oracle_coverage}


def cmd_oracle(args):
    if args.t < 0 or not math.isfinite(args.t):
        print("error: --t: must be a nonnegative finite number", file=sys.stderr)
        return 1
    if args.n < 1:
        print("error: --n: must be at least 1", file=sys.stderr)
        return 1
    if args.subcommand == "continuity" and not args.t > 0:
        print("error: --t: the continuity horizon must be positive", file=sys.stderr)
        return 1
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    try:
        files, report, _ = ORACLE[args.subcommand](args, args.out)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    wall = time.perf_counter() - t0
    for name, text in sorted(files.items()):
        write_atomic(os.path.join(args.out, name), text)
    write_atomic(os.path.join(args.out, "report.json"), dump_json(report))
    write_atomic(os.path.join(args.out, "metadata.json"), dump_json({"wall_time_s": wall}))
    print(f"oracle {args.subcommand}: wrote {', '.join(sorted(files))} to {args.out}")
    return 0


# --- argument parsing ----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # bad flags are input errors (exit 1), not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="extremal-steering",
                description="Fixed-time steering by concatenated extremals.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("steer", help="solve a problem spec")
    s.add_argument("spec", help="JSON problem spec")
    s.add_argument("--out", required=True, help="output directory")

    o = sub.add_parser("oracle", help="reachable-set sampling tools")
    o.add_argument("subcommand", nargs="?", default="sample", choices=sorted(ORACLE))
    o.add_argument("--system", required=True, choices=sorted(DIMS))
    o.add_argument("--t", type=float, required=True,
                   help="horizon: sampling time, continuity T or word length")
    o.add_argument("--n", type=int, required=True, help="samples per cloud")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out", required=True, help="output directory")
    o.add_argument("--sign", choices=["forward", "backward"], default="forward")
    o.add_argument("--origin", type=float, nargs="+", help="initial state")
    o.add_argument("--chi-f", type=float, nargs="+", help="terminal state (continuity)")
    o.add_argument("--max-switches", type=int, default=None,
                   help="switches per control draw (default 4; coverage 2)")
    o.add_argument("--steps", type=int, default=10, help="probe times (continuity)")
    o.add_argument("--delta", type=float, default=None, help="matching radius (continuity)")
    o.add_argument("--n-words", type=int, default=40, help="probed points (coverage)")

    v = sub.add_parser("verify", help="re-propagate a steer summary")
    v.add_argument("summary", help="summary.json written by steer")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "steer":
        return cmd_steer(args.spec, args.out)
    if args.command == "oracle":
        return cmd_oracle(args)
    return cmd_verify(args.summary)


if __name__ == "__main__":
    sys.exit(main())
