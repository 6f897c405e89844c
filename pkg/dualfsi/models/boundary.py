"""Dirichlet data applied as identity rows."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp


def _zero(t: float) -> float:
    return 0.0


@dataclass(frozen=True, eq=False)
class DirichletSet:
    """Prescribed values on a set of global dofs.

    `values(t)` returns either a scalar or one value per dof.
    """

    dofs: np.ndarray
    values: Callable[[float], object] = field(default=_zero)

    @classmethod
    def empty(cls) -> "DirichletSet":
        return cls(dofs=np.zeros(0, dtype=np.int64))

    @classmethod
    def merge(cls, parts: Sequence["DirichletSet"]) -> "DirichletSet":
        """Union of several sets; later parts win on shared dofs."""
        parts = [p for p in parts if p.dofs.size]
        if not parts:
            return cls.empty()

        def values(t: float) -> np.ndarray:
            out = {}
            for part in parts:
                for dof, value in zip(part.dofs.tolist(), part.targets(t).tolist()):
                    out[dof] = value
            return np.array([out[d] for d in sorted(out)])

        dofs = np.unique(np.concatenate([p.dofs for p in parts]))
        return cls(dofs=dofs.astype(np.int64), values=values)

    def targets(self, t: float) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.values(t), dtype=float), self.dofs.shape).copy()

    def without(self, dofs: np.ndarray) -> "DirichletSet":
        """Drop the given dofs, keeping values aligned with the remaining ones."""
        keep = ~np.isin(self.dofs, dofs)
        if keep.all():
            return self
        parent = self

        def values(t: float) -> np.ndarray:
            return parent.targets(t)[keep]

        return DirichletSet(dofs=self.dofs[keep], values=values)

    def apply(
        self,
        residual: np.ndarray,
        jacobian: sp.spmatrix,
        trial: np.ndarray,
        t: float,
        coupled: Optional[Sequence[sp.spmatrix]] = None,
    ):
        """Replace constrained rows by x - target; coupled blocks get zero rows."""
        if self.dofs.size == 0:
            return residual, jacobian.tocsr(), [c.tocsr() for c in (coupled or [])]
        n = jacobian.shape[0]
        mask = np.zeros(n)
        mask[self.dofs] = 1.0
        keep = sp.diags(1.0 - mask)
        residual = residual.copy()
        residual[self.dofs] = trial[self.dofs] - self.targets(t)
        jacobian = (keep @ jacobian + sp.diags(mask)).tocsr()
        coupled = [(keep @ c).tocsr() for c in (coupled or [])]
        return residual, jacobian, coupled
