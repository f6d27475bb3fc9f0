"""
Steering the Van der Pol oscillator with two extremals
======================================================

A forward extremal leaves (2, 2), a backward extremal leaves the target,
and the shooting solver picks both initial costates and the meeting time so
the two arcs join. Run with ``python3 demos/vdp_two_arcs.py``.
"""

import numpy as np

from extremal_steering.shooting import solve_p2, verify_solution
from extremal_steering.vdp import vdp_problem

# fixed target (0.6, -0.9) at T = 4; three unknowns meet two conditions, so
# roots form a curve and the tau guess picks the one we look at
problem = vdp_problem((0.6, -0.9), 4.0)
sol = solve_p2(problem, starts=20, seed=0, tau_guess=0.4453, pin_guesses=True,
               stop_at_first=True)[0]
print(f"tau = {sol.tau:.4f}, arcs meet at t = {sol.concat_time:.4f}")
print("junction state", np.round(sol.chi_junction, 5))
print("switches inside the arcs at", np.round(sol.switch_times, 4))

# re-integrate the bang-bang control through the original dynamics
rep = verify_solution(sol, problem)
for key in ("terminal_error", "junction_error", "hamiltonian_violation"):
    print(f"  {key}: {rep.details[key]:.2e}")

# leaving x2(T) free adds one unknown and drops one residual
free = vdp_problem((0.0, None), 4.0)
sol = solve_p2(free, starts=20, seed=0, tau_guess=0.6313, free_guess=[-0.3585],
               pin_guesses=True, stop_at_first=True)[0]
print(f"free x2: tau = {sol.tau:.4f}, x2(T) = {sol.freed_values[0]:.4f}")

# the control table: time, state, applied control
tr = sol.trajectory
for k in np.linspace(0, len(tr.times) - 1, 6).astype(int):
    print(f"t={tr.times[k]:5.2f}  x={tr.states[k].round(3)}  u={tr.controls[k]:+.0f}")
