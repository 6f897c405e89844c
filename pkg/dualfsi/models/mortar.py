"""Mortar coupling operators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True, eq=False)
class MortarOperators:
    """D (slave × slave, diagonal), M (slave × master) and P = D⁻¹M on Γ-dofs.

    `slave_field` / `master_field` are "structure" or "fluid". The constraint reads
    C^S d^S_Γ = C^F d^G_Γ with (C^S, C^F) = (D, M) for a fluid master and (M, D) for
    a structure master.
    """

    D: sp.csr_matrix
    M: sp.csr_matrix
    P: sp.csr_matrix
    slave_field: str
    master_field: str

    @property
    def d_diagonal(self) -> np.ndarray:
        return self.D.diagonal()

    @property
    def n_slave(self) -> int:
        return self.D.shape[0]

    @property
    def n_master(self) -> int:
        return self.M.shape[1]

    @property
    def c_structure(self) -> sp.csr_matrix:
        return self.D if self.slave_field == "structure" else self.M

    @property
    def c_fluid(self) -> sp.csr_matrix:
        return self.D if self.slave_field == "fluid" else self.M

    def apply_d_inverse(self, vec: np.ndarray) -> np.ndarray:
        """D⁻¹ v (D is diagonal, so D⁻ᵀ = D⁻¹)."""
        return vec / self.d_diagonal
