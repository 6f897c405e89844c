"""Per-field solution histories."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np


@dataclass(frozen=True, eq=False)
class SolidState:
    """Displacement, velocity and acceleration at t^n plus the predictor increment.

    `f_int` caches the internal force at `d`; it is filled once per time step.
    """

    d: np.ndarray
    v: np.ndarray
    a: np.ndarray
    t: float = 0.0
    dd_p: Optional[np.ndarray] = None
    f_int: Optional[np.ndarray] = None

    @classmethod
    def at_rest(cls, n_dofs: int, t: float = 0.0) -> "SolidState":
        zero = np.zeros(n_dofs)
        return cls(d=zero, v=zero.copy(), a=zero.copy(), t=t, dd_p=zero.copy())

    @property
    def predictor_increment(self) -> np.ndarray:
        return np.zeros_like(self.d) if self.dd_p is None else self.dd_p

    def with_predictor(self, dd_p: np.ndarray) -> "SolidState":
        return replace(self, dd_p=dd_p)


@dataclass(frozen=True, eq=False)
class FluidState:
    """Velocity/pressure (3 per node), grid displacement, grid velocity, acceleration.

    `acc` holds the velocity time derivative used by the generalized-α history;
    the fluid predictor is always the old state (zero increment).
    """

    up: np.ndarray
    dg: np.ndarray
    ug: np.ndarray
    acc: np.ndarray
    t: float = 0.0

    @classmethod
    def at_rest(cls, n_nodes: int, t: float = 0.0) -> "FluidState":
        return cls(
            up=np.zeros(3 * n_nodes),
            dg=np.zeros(2 * n_nodes),
            ug=np.zeros(2 * n_nodes),
            acc=np.zeros(2 * n_nodes),
            t=t,
        )

    @property
    def n_nodes(self) -> int:
        return self.up.size // 3

    @property
    def velocity(self) -> np.ndarray:
        """(n_nodes, 2)"""
        return self.up.reshape(-1, 3)[:, :2]

    @property
    def pressure(self) -> np.ndarray:
        return self.up.reshape(-1, 3)[:, 2]


@dataclass(frozen=True, eq=False)
class LambdaState:
    """Interface multiplier on the slave Γ-dofs at t^n and t^{n+1}."""

    lam_n: np.ndarray
    lam_new: np.ndarray

    @classmethod
    def zeros(cls, n_slave: int) -> "LambdaState":
        return cls(lam_n=np.zeros(n_slave), lam_new=np.zeros(n_slave))

    def advance(self, lam_new: np.ndarray) -> "LambdaState":
        """Converged multiplier becomes the history of the next step."""
        return LambdaState(lam_n=lam_new, lam_new=lam_new.copy())
