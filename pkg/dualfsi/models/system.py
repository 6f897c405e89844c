"""Block containers for the monolithic Newton step."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from dualfsi.core.exceptions import ConsistencyError
from dualfsi.models.mesh import DofMap
from dualfsi.models.mortar import MortarOperators
from dualfsi.schemas.schemes import ConversionRule, TractionInterpolation

FIELD_BLOCKS = ("II", "IG", "GI", "GG")


def split_blocks(
    matrix: sp.spmatrix, rows: DofMap, cols: Optional[DofMap] = None
) -> Dict[str, sp.csr_matrix]:
    """II, IG, GI, GG sub-blocks of a field matrix (G stands for Γ)."""
    cols = cols or rows
    csr = sp.csr_matrix(matrix)
    ri, rg = rows.interior_dofs, rows.interface_dofs
    ci, cg = cols.interior_dofs, cols.interface_dofs
    return {
        "II": csr[ri][:, ci].tocsr(),
        "IG": csr[ri][:, cg].tocsr(),
        "GI": csr[rg][:, ci].tocsr(),
        "GG": csr[rg][:, cg].tocsr(),
    }


def split_vector(vector: np.ndarray, dofmap: DofMap) -> Tuple[np.ndarray, np.ndarray]:
    return vector[dofmap.interior_dofs], vector[dofmap.interface_dofs]


@dataclass(frozen=True, eq=False)
class Increments:
    """Newton increments of all fields split into I and Γ parts."""

    d_I: np.ndarray
    d_G: np.ndarray
    u_I: np.ndarray
    u_G: np.ndarray
    g_I: np.ndarray
    g_G: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.d_I, self.d_G, self.u_I, self.u_G, self.g_I, self.g_G])


@dataclass(eq=False)
class BlockSystem:
    """Field blocks, residual segments and coupling data of one Newton iteration.

    Block keys: S_*, F_*, FG_* (fluid rows, grid columns) with suffixes II/IG/GI/GG,
    and A_II, A_IG. Residual keys: rS_I, rS_G, rF_I, rF_G, rG_I. Γ vectors follow
    the DofMap interface ordering of their own field.
    """

    master: str
    interp: TractionInterpolation
    rule: ConversionRule
    first_iter: bool
    mortar: MortarOperators
    blocks: Dict[str, sp.csr_matrix]
    residuals: Dict[str, np.ndarray]
    lam_n: np.ndarray
    u_n_G: np.ndarray
    dd_p_G: np.ndarray
    master_dirichlet: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    REQUIRED_BLOCKS = tuple(
        [f"S_{k}" for k in FIELD_BLOCKS]
        + [f"F_{k}" for k in FIELD_BLOCKS]
        + [f"FG_{k}" for k in FIELD_BLOCKS]
        + ["A_II", "A_IG"]
    )
    REQUIRED_RESIDUALS = ("rS_I", "rS_G", "rF_I", "rF_G", "rG_I")

    @property
    def tau(self) -> float:
        return self.rule.tau

    @property
    def dt(self) -> float:
        return self.rule.dt

    @property
    def delta(self) -> float:
        """Kronecker δ_{i0} of the first Newton iteration."""
        return 1.0 if self.first_iter else 0.0

    @property
    def sizes(self) -> Dict[str, int]:
        return {
            "d_I": self.blocks["S_II"].shape[0],
            "d_G": self.blocks["S_GG"].shape[0],
            "u_I": self.blocks["F_II"].shape[0],
            "u_G": self.blocks["F_GG"].shape[0],
            "g_I": self.blocks["A_II"].shape[0],
            "g_G": self.blocks["A_IG"].shape[1],
            "lam": self.mortar.n_slave,
        }

    def check(self) -> None:
        """Raise ConsistencyError on missing or mis-shaped blocks."""
        missing = [k for k in self.REQUIRED_BLOCKS if k not in self.blocks]
        missing += [k for k in self.REQUIRED_RESIDUALS if k not in self.residuals]
        if missing:
            raise ConsistencyError(f"missing blocks: {', '.join(missing)}")
        n = self.sizes
        expected = {
            "S_II": (n["d_I"], n["d_I"]), "S_IG": (n["d_I"], n["d_G"]),
            "S_GI": (n["d_G"], n["d_I"]), "S_GG": (n["d_G"], n["d_G"]),
            "F_II": (n["u_I"], n["u_I"]), "F_IG": (n["u_I"], n["u_G"]),
            "F_GI": (n["u_G"], n["u_I"]), "F_GG": (n["u_G"], n["u_G"]),
            "FG_II": (n["u_I"], n["g_I"]), "FG_IG": (n["u_I"], n["g_G"]),
            "FG_GI": (n["u_G"], n["g_I"]), "FG_GG": (n["u_G"], n["g_G"]),
            "A_II": (n["g_I"], n["g_I"]), "A_IG": (n["g_I"], n["g_G"]),
        }
        for key, shape in expected.items():
            if self.blocks[key].shape != shape:
                raise ConsistencyError(f"block {key} has shape {self.blocks[key].shape}, expected {shape}")
        lengths = {"rS_I": n["d_I"], "rS_G": n["d_G"], "rF_I": n["u_I"], "rF_G": n["u_G"], "rG_I": n["g_I"]}
        for key, length in lengths.items():
            if self.residuals[key].shape != (length,):
                raise ConsistencyError(f"residual {key} has length {self.residuals[key].shape}, expected {length}")
        if n["u_G"] != n["g_G"]:
            raise ConsistencyError("fluid and grid interface dofs differ")
        c_s, c_f = self.mortar.c_structure, self.mortar.c_fluid
        if c_s.shape != (n["lam"], n["d_G"]) or c_f.shape != (n["lam"], n["u_G"]):
            raise ConsistencyError("mortar operators do not match the interface blocks")
        if self.lam_n.shape != (n["lam"],):
            raise ConsistencyError("multiplier history does not match the slave interface")


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Assembled sparse system with the ordered layout of its unknowns."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    layout: List[Tuple[str, int]]

    def offsets(self) -> Dict[str, slice]:
        out, start = {}, 0
        for name, size in self.layout:
            out[name] = slice(start, start + size)
            start += size
        return out

    def group_sizes(self, groups: List[List[str]]) -> List[int]:
        """Summed sizes of each group of consecutive layout entries."""
        sizes = dict(self.layout)
        return [sum(sizes[name] for name in group) for group in groups]

    def segment(self, vector: np.ndarray, name: str) -> np.ndarray:
        return vector[self.offsets()[name]]
