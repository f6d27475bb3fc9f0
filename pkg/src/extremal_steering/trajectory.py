"""Shared result containers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class Trajectory:
    """Time (or arclength) stamped samples of an assembled solution."""

    times: np.ndarray
    states: np.ndarray
    costates: Optional[np.ndarray] = None
    controls: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.times)

    def columns(self):
        """Stack ``times | states | controls`` for tabular export."""
        parts = [np.asarray(self.times)[:, None], np.asarray(self.states).reshape(len(self), -1)]
        if self.controls is not None:
            parts.append(np.asarray(self.controls, dtype=float).reshape(len(self), -1))
        return np.hstack(parts)


@dataclass
class ResidualReport:
    residual: np.ndarray
    norm: float
    iterations: int = 0
    converged: bool = False
    details: dict = field(default_factory=dict)
