"""
Sampling reachable and en-route sets
====================================

Random bang-bang controls give point clouds inside reachable sets. Points
that a forward cloud from the start shares with a backward cloud from the
goal lie on some steering trajectory at that time.
"""

import numpy as np

from extremal_steering.dubins2d import Config2D, solve_dubins2d
from extremal_steering.reach import (
    SteeringSpec,
    boundary_coverage_check,
    continuity_probe,
    enroute_cloud,
    hausdorff,
    sample_reachable,
)

cloud = sample_reachable("dubins2d", "forward", (0.0, 0.0, 0.0), 1.0, 5000, 4, seed=0)
r = np.hypot(cloud.points[:, 0], cloud.points[:, 1])
print(f"{len(cloud)} Dubins states at t=1, farthest {r.max():.6f} from the start")

# a reachable target, so the en-route sets are nonempty
target = tuple(sample_reachable("dubins2d", "forward", (0, 0, 0), 4.0, 1, 4, seed=3).points[0])
spec = SteeringSpec("dubins2d", (0.0, 0.0, 0.0), target, 4.0)
mid = enroute_cloud(spec, 2.0, 20000, seed=0, delta=0.02)
print(f"en-route set at t=2: {len(mid)} points")

# every en-route point splits the problem into two solvable halves
for pt in mid.points[:3]:
    first = solve_dubins2d(Config2D(*pt), 2.0, stop_at_first=True)
    print(f"  {np.round(pt, 3)} reached by {first[0].structure if first else 'nothing'}")

# the sets move continuously: Hausdorff steps stay under m dt + 2 delta
for row in continuity_probe(spec, np.linspace(0, 4, 5), 3000, delta=0.05):
    if row["d_h"] is not None:
        print(f"  d_H({row['t0']:.0f}, {row['t1']:.0f}) = {row['d_h']:.3f} <= {row['bound']:.3f}")

print("self distance", hausdorff(cloud.points, cloud.points, period=cloud.period))

# hull vertices of a short-horizon cloud are single-word endpoints
rep = boundary_coverage_check(0.5, 3000, 10)
print(f"boundary fit: max residual {rep['residuals'].max():.1e}, spacing {rep['spacing']:.1e}")
