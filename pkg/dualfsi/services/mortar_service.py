"""Dual mortar coupling on straight interfaces between non-matching meshes."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from dualfsi.config import settings
from dualfsi.core.exceptions import CouplingError, ShapeMismatchError, SingularMortarError
from dualfsi.elements.quadrature import GAUSS_1D_3_POINTS, GAUSS_1D_3_WEIGHTS
from dualfsi.models.mesh import DofMap, Mesh2D
from dualfsi.models.mortar import MortarOperators

logger = logging.getLogger(__name__)


class MortarService:
    """Builds D, M and P = D⁻¹M for a slave/master pair of interface curves."""

    @staticmethod
    def dual_shapes_segment(p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
        """Coefficients A with Φ_j = Σ_k A_jk N_k on the segment p0-p1.

        Solves ∫Φ_j N_k = δ_jk ∫N_k with exact segment integrals.
        """
        length = float(np.linalg.norm(np.asarray(p1, dtype=float) - np.asarray(p0, dtype=float)))
        if length <= 0.0:
            raise CouplingError("zero-length slave segment")
        mass = length / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
        measure = length / 2.0 * np.eye(2)
        return measure @ np.linalg.inv(mass)

    @staticmethod
    def interface_line(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Origin and unit direction of the straight line through the points."""
        origin = points.mean(axis=0)
        _, _, vt = np.linalg.svd(points - origin)
        direction = vt[0]
        # orient along increasing coordinates so parameters are reproducible
        if direction[np.argmax(np.abs(direction))] < 0.0:
            direction = -direction
        return origin, direction

    @staticmethod
    def assemble_mortar(
        slave_mesh: Mesh2D,
        slave_dofmap: DofMap,
        master_mesh: Mesh2D,
        master_dofmap: DofMap,
        slave_set: str = "interface",
        master_set: str = "interface",
        geo_tol: Optional[float] = None,
    ) -> MortarOperators:
        """Segment-based mortar integration with 3-point Gauss per overlap."""
        slave_edges = slave_mesh.edge_node_pairs(slave_set)
        master_edges = master_mesh.edge_node_pairs(master_set)
        if len(slave_edges) == 0 or len(master_edges) == 0:
            raise CouplingError("empty interface edge set")
        n_comp = len(slave_dofmap.coupled_components)
        if n_comp != len(master_dofmap.coupled_components):
            raise ShapeMismatchError("slave and master couple a different number of components")

        if geo_tol is None:
            geo_tol = settings.GEO_TOL_FACTOR * max(slave_mesh.diameter(), master_mesh.diameter())

        slave_nodes = slave_dofmap.interface_nodes
        master_nodes = master_dofmap.interface_nodes
        slave_xy = slave_mesh.node_coords[slave_nodes]
        master_xy = master_mesh.node_coords[master_nodes]

        origin, direction = MortarService.interface_line(slave_xy)
        normal = np.array([-direction[1], direction[0]])
        off_line = np.abs((np.concatenate([slave_xy, master_xy]) - origin) @ normal)
        if off_line.max() > geo_tol:
            raise CouplingError(
                f"interface curves are not coincident (distance {off_line.max():.3e} > {geo_tol:.3e})"
            )

        s_slave = np.zeros(slave_mesh.n_nodes)
        s_slave[slave_nodes] = (slave_xy - origin) @ direction
        s_master = np.zeros(master_mesh.n_nodes)
        s_master[master_nodes] = (master_xy - origin) @ direction

        slave_local = {int(n): k for k, n in enumerate(slave_nodes)}
        master_local = {int(n): k for k, n in enumerate(master_nodes)}
        d_scalar = np.zeros(len(slave_nodes))
        m_scalar = np.zeros((len(slave_nodes), len(master_nodes)))
        covered = 0.0
        slave_length = 0.0

        for a, b in slave_edges:
            sa, sb = s_slave[a], s_slave[b]
            length = abs(sb - sa)
            if length <= geo_tol:
                raise CouplingError(f"zero-length slave segment ({a}, {b})")
            coeff = MortarService.dual_shapes_segment(slave_mesh.node_coords[a], slave_mesh.node_coords[b])
            ia, ib = slave_local[int(a)], slave_local[int(b)]
            d_scalar[ia] += 0.5 * length
            d_scalar[ib] += 0.5 * length
            slave_length += length
            lo_s, hi_s = min(sa, sb), max(sa, sb)

            for c, d in master_edges:
                sc, sd = s_master[c], s_master[d]
                lo = max(lo_s, min(sc, sd))
                hi = min(hi_s, max(sc, sd))
                if hi - lo <= geo_tol:
                    continue
                covered += hi - lo
                s = lo + 0.5 * (hi - lo) * (GAUSS_1D_3_POINTS + 1.0)
                w = 0.5 * (hi - lo) * GAUSS_1D_3_WEIGHTS
                n_slave = np.vstack([(sb - s) / (sb - sa), (s - sa) / (sb - sa)])
                phi = coeff @ n_slave
                n_master = np.vstack([(sd - s) / (sd - sc), (s - sc) / (sd - sc)])
                block = (phi * w) @ n_master.T
                ic, id_ = master_local[int(c)], master_local[int(d)]
                m_scalar[np.ix_([ia, ib], [ic, id_])] += block

        if covered <= geo_tol:
            raise CouplingError("slave and master interface curves do not overlap")
        if covered < slave_length - 1e3 * geo_tol:
            logger.warning(f"Master side covers {covered:.6g} of {slave_length:.6g} slave interface length")
        if np.any(d_scalar <= geo_tol):
            raise SingularMortarError(f"slave node {int(slave_nodes[np.argmin(d_scalar)])} has no support")

        eye = sp.identity(n_comp, format="csr")
        d_mat = sp.kron(sp.diags(d_scalar), eye, format="csr")
        m_mat = sp.kron(sp.csr_matrix(m_scalar), eye, format="csr")
        m_mat.eliminate_zeros()
        p_mat = sp.kron(sp.diags(1.0 / d_scalar) @ sp.csr_matrix(m_scalar), eye, format="csr")
        p_mat.eliminate_zeros()
        logger.debug(
            f"Mortar {slave_dofmap.field}->{master_dofmap.field}: "
            f"{len(slave_nodes)} slave / {len(master_nodes)} master nodes"
        )
        return MortarOperators(
            D=d_mat,
            M=m_mat,
            P=p_mat,
            slave_field=slave_dofmap.field,
            master_field=master_dofmap.field,
        )

    @staticmethod
    def project_master_to_slave(projection: sp.spmatrix, master_values: np.ndarray) -> np.ndarray:
        master_values = np.asarray(master_values, dtype=float)
        if projection.shape[1] != master_values.shape[0]:
            raise ShapeMismatchError(
                f"projection has {projection.shape[1]} master dofs, vector has {master_values.shape[0]}"
            )
        return projection @ master_values

    @staticmethod
    def dump_mortar(ops: MortarOperators, directory: Union[str, Path]) -> None:
        """Write D, M and P as `row col value` text files."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        for name, matrix in (("D", ops.D), ("M", ops.M), ("P", ops.P)):
            coo = matrix.tocoo()
            order = np.lexsort((coo.col, coo.row))
            lines = [f"# {name} {matrix.shape[0]} {matrix.shape[1]}"]
            lines += [f"{coo.row[k]} {coo.col[k]} {coo.data[k]!r}" for k in order]
            (out / f"mortar_{name}.txt").write_text("\n".join(lines) + "\n")
        logger.info(f"Mortar operators written to {out}")


mortar_service = MortarService()
