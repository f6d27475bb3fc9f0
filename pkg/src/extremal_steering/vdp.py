"""Controlled Van der Pol oscillator with a bang-bang Hamiltonian maximizer.

    x1' = x2
    x2' = (1 - x1^2) x2 - x1 + u,   |u| <= 1

The maximizer is ``u = sgn(p2)`` (``+1`` at ``p2 = 0``).
"""

import numpy as np

from .shooting import ExtremalField, P2Problem

DEFAULT_CHI_I = (2.0, 2.0)


def _dynamics(chi, u):
    x1, x2 = chi
    return np.array([x2, (1.0 - x1 * x1) * x2 - x1 + u])


def _costate_rate(chi, p, u):
    x1, x2 = chi
    p1, p2 = p
    return np.array([p2 * (2.0 * x1 * x2 + 1.0), -p1 - p2 * (1.0 - x1 * x1)])


def _maximizer(chi, p):
    return 1.0 if p[1] >= 0 else -1.0


def vdp_field():
    return ExtremalField(
        state_dim=2,
        dynamics=_dynamics,
        costate_rate=_costate_rate,
        maximizer=_maximizer,
        control_grid=np.linspace(-1.0, 1.0, 101),
        switch_fn=lambda chi, p: p[1],
        branch_control=float,
    )


def vdp_problem(chi_f_spec, T, chi_i=DEFAULT_CHI_I):
    """Steering problem from ``chi_i`` (default ``(2, 2)``); ``None`` marks free."""
    return P2Problem(vdp_field(), np.asarray(chi_i, dtype=float), list(chi_f_spec), T)
