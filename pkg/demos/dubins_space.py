"""
Curvature-bounded paths in space
================================

In three dimensions the extremals are circle arcs, straight segments and
helicoidal arcs whose torsion follows its own ODE. Two path families reach
the same goal: chains of C and S pieces, and a pair of H arcs.
"""

import math

import numpy as np

from extremal_steering.dubins3d import Goal3D, sample_path_3d, solve_dubins3d

goal = Goal3D((4.0, -1.0, 1.0), np.array([0.0, 1.0, 1.0]) / math.sqrt(2))
T = 2 * math.pi

cs = solve_dubins3d(goal, T, families=("cs",), starts=6, seed=0)
print("CS words:", sorted({p.structure for p in cs}))

# the HH system has nine unknowns for five conditions
hh = solve_dubins3d(goal, T, families=("h",), starts=1, seed=4, stop_at_first=True)[0]
for arc in hh.primitives:
    q = arc.params
    print(f"H arc: length {q.length:.3f}, tau0 {q.tau0:+.3f}, zeta {q.zeta:+.3f}")
tr, kappa = sample_path_3d(hh, 2001)
print(f"HH endpoint {tr.states[-1, :3].round(6)}, max curvature {kappa:.5f}")

# with the final heading free, seeding picks one member of the family
free = solve_dubins3d(Goal3D((4.0, 0.0, 0.0), None), 4 * math.pi, families=("cs",),
                      starts=6, seed=0, tangent_seed=(0.21, -0.93, 0.29),
                      stop_at_first=True)[0]
print(f"free heading: {free.structure} ends along {free.end().tangent.round(3)}")
