"""
Fixed-length planar Dubins paths
================================

A unit-speed car with unit turning radius must reach (4, 1, pi/6) after
driving exactly 3 pi. Short CSC/CCC answers are too short, so the path is a
concatenation of two words with loops built in.
"""

import math

from extremal_steering.dubins2d import Config2D, sample_path_2d, solve_dubins2d

goal = Config2D(4.0, 1.0, math.pi / 6)
T = 3 * math.pi
paths = solve_dubins2d(goal, T)
print(f"{len(paths)} paths of length {T:.4f} reach the goal")

# each path is two words; the structure string drops zero-length pieces
for p in paths[:8]:
    lens = ", ".join(f"{q.kind}{q.length:.3f}" for q in p.primitives)
    print(f"  {p.structure:8s} residual {p.residual_norm:.1e}  [{lens}]")

cscc = next(p for p in paths if p.structure == "CSCC")
tr = sample_path_2d(cscc, 9)
print("CSCC path sampled at nine arclengths:")
for s, (x, y, g) in zip(tr.times, tr.states):
    print(f"  s={s:6.3f}  x={x:7.3f}  y={y:7.3f}  heading={g:7.3f}")
