"""Sparse storage, restarted GMRES, ILU(0) and the dense LU oracle."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular

from dualfsi.config import settings
from dualfsi.core.exceptions import (
    BreakdownError,
    LinearSolverError,
    ShapeMismatchError,
    SingularMatrixError,
    ZeroPivotError,
)
from dualfsi.schemas.case import LinearSolverConfig

logger = logging.getLogger(__name__)

MatrixLike = Union[sp.spmatrix, np.ndarray]


def to_csr(matrix: MatrixLike) -> sp.csr_matrix:
    """Canonical CSR: float64, duplicates summed, column indices sorted per row."""
    csr = sp.csr_matrix(matrix, dtype=float)
    csr.sum_duplicates()
    csr.sort_indices()
    return csr


@dataclass
class GmresResult:
    """Solution with the Arnoldi step count and the recomputed relative residual."""

    x: np.ndarray
    iterations: int
    residual: float
    restarts: int = 0


@dataclass
class LinearSolveResult:
    x: np.ndarray
    iterations: int
    residual: float


class ILU0Preconditioner:
    """Applies (LU)^-1 where L (unit lower) and U share the pattern of A."""

    def __init__(self, factors: sp.csr_matrix):
        self.factors = factors
        n = factors.shape[0]
        self._lower = (sp.tril(factors, k=-1) + sp.identity(n)).tocsr()
        self._upper = sp.triu(factors).tocsr()

    @property
    def shape(self):
        return self.factors.shape

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        y = spsolve_triangular(self._lower, rhs, lower=True, unit_diagonal=True)
        return spsolve_triangular(self._upper, y, lower=False)


class BlockJacobiPreconditioner:
    """ILU(0) on each diagonal field block, no coupling between blocks."""

    def __init__(self, blocks: Sequence[slice], factors: Sequence[ILU0Preconditioner]):
        self.blocks = list(blocks)
        self.factors = list(factors)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        out = np.empty_like(rhs)
        for block, ilu in zip(self.blocks, self.factors):
            out[block] = ilu.solve(rhs[block])
        return out


class LinalgService:
    """Krylov and direct solvers for the condensed monolithic systems."""

    @staticmethod
    def ilu0_factor(matrix: MatrixLike) -> ILU0Preconditioner:
        """Incomplete LU without fill-in (IKJ variant on the CSR pattern)."""
        a = to_csr(matrix)
        n = a.shape[0]
        if a.shape[0] != a.shape[1]:
            raise ShapeMismatchError(f"ILU(0) needs a square matrix, got {a.shape}")
        indptr, indices = a.indptr, a.indices
        data = a.data.copy()

        diag = np.empty(n, dtype=np.int64)
        for i in range(n):
            cols = indices[indptr[i]:indptr[i + 1]]
            pos = np.searchsorted(cols, i)
            if pos >= cols.size or cols[pos] != i:
                raise ZeroPivotError(row=i)
            diag[i] = indptr[i] + pos

        for i in range(n):
            start, end = indptr[i], indptr[i + 1]
            cols = indices[start:end]
            for p in range(start, diag[i]):
                k = indices[p]
                data[p] /= data[diag[k]]
                k_start, k_end = diag[k] + 1, indptr[k + 1]
                k_cols = indices[k_start:k_end]
                if k_cols.size == 0:
                    continue
                loc = np.searchsorted(cols, k_cols)
                hit = loc < cols.size
                hit[hit] = cols[loc[hit]] == k_cols[hit]
                data[start + loc[hit]] -= data[p] * data[k_start:k_end][hit]
            pivot = data[diag[i]]
            if not np.isfinite(pivot) or abs(pivot) < np.finfo(float).tiny:
                raise ZeroPivotError(row=i)

        factors = sp.csr_matrix((data, indices.copy(), indptr.copy()), shape=a.shape)
        return ILU0Preconditioner(factors)

    @staticmethod
    def build_preconditioner(
        matrix: MatrixLike, config: LinearSolverConfig, blocks: Optional[Sequence[slice]] = None
    ) -> Optional[BlockJacobiPreconditioner]:
        if config.preconditioner == "none":
            return None
        a = to_csr(matrix)
        blocks = list(blocks) if blocks else [slice(0, a.shape[0])]
        factors = [LinalgService.ilu0_factor(a[b, b]) for b in blocks]
        return BlockJacobiPreconditioner(blocks, factors)

    @staticmethod
    def gmres_solve(
        matrix: MatrixLike,
        rhs: np.ndarray,
        config: Optional[LinearSolverConfig] = None,
        preconditioner=None,
        x0: Optional[np.ndarray] = None,
    ) -> GmresResult:
        """Right-preconditioned restarted GMRES.

        Arnoldi uses modified Gram-Schmidt with one reorthogonalization pass. The
        reported residual is recomputed from b - Ax after the last cycle.
        """
        config = config or LinearSolverConfig()
        a = to_csr(matrix)
        b = np.asarray(rhs, dtype=float)
        n = b.size
        if a.shape != (n, n):
            raise ShapeMismatchError(f"matrix {a.shape} does not match rhs of length {n}")

        apply_m: Callable[[np.ndarray], np.ndarray]
        apply_m = preconditioner.solve if preconditioner is not None else (lambda v: v)

        b_norm = np.linalg.norm(b)
        x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
        if b_norm == 0.0:
            return GmresResult(x=np.zeros(n), iterations=0, residual=0.0)

        restart = min(config.restart, n)
        r = b - a @ x
        beta = np.linalg.norm(r)
        total, cycles = 0, 0

        while beta / b_norm > config.rel_tol:
            if total >= config.max_iterations:
                raise LinearSolverError(
                    f"GMRES reached {total} iterations with relative residual {beta / b_norm:.3e}"
                )
            basis = np.zeros((restart + 1, n))
            hess = np.zeros((restart + 1, restart))
            cs = np.zeros(restart)
            sn = np.zeros(restart)
            g = np.zeros(restart + 1)
            g[0] = beta
            basis[0] = r / beta
            k = 0
            for j in range(restart):
                w = a @ apply_m(basis[j])
                total += 1
                w_norm0 = np.linalg.norm(w)
                for _ in range(2):
                    for i in range(j + 1):
                        h = basis[i] @ w
                        hess[i, j] += h
                        w -= h * basis[i]
                h_next = np.linalg.norm(w)
                hess[j + 1, j] = h_next

                for i in range(j):
                    upper = cs[i] * hess[i, j] + sn[i] * hess[i + 1, j]
                    hess[i + 1, j] = -sn[i] * hess[i, j] + cs[i] * hess[i + 1, j]
                    hess[i, j] = upper
                denom = np.hypot(hess[j, j], hess[j + 1, j])
                if denom == 0.0:
                    raise BreakdownError("GMRES breakdown: singular Hessenberg column")
                cs[j], sn[j] = hess[j, j] / denom, hess[j + 1, j] / denom
                hess[j, j], hess[j + 1, j] = denom, 0.0
                g[j + 1] = -sn[j] * g[j]
                g[j] = cs[j] * g[j]
                k = j + 1

                happy = h_next <= 1e-14 * max(w_norm0, 1e-300)
                if happy or abs(g[j + 1]) / b_norm <= config.rel_tol or total >= config.max_iterations:
                    break
                basis[j + 1] = w / h_next

            y = scipy.linalg.solve_triangular(hess[:k, :k], g[:k])
            x = x + apply_m(basis[:k].T @ y)
            r = b - a @ x
            beta_new = np.linalg.norm(r)
            cycles += 1
            logger.debug(f"GMRES cycle {cycles}: {total} iterations, residual {beta_new / b_norm:.3e}")
            if beta_new / b_norm > config.rel_tol and beta_new >= beta * (1.0 - 1e-12):
                raise BreakdownError(
                    f"GMRES stagnated after {total} iterations at relative residual {beta_new / b_norm:.3e}"
                )
            beta = beta_new

        return GmresResult(x=x, iterations=total, residual=float(beta / b_norm), restarts=max(cycles - 1, 0))

    @staticmethod
    def dense_lu_solve(matrix: MatrixLike, rhs: np.ndarray, dof_cap: Optional[int] = None) -> np.ndarray:
        """Partial-pivoting LU for oracle checks on tiny systems."""
        dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix, dtype=float)
        b = np.asarray(rhs, dtype=float)
        n = dense.shape[0]
        if dense.shape != (n, n) or b.shape[0] != n:
            raise ShapeMismatchError(f"matrix {dense.shape} does not match rhs {b.shape}")
        cap = dof_cap or settings.DENSE_LU_DOF_CAP
        if n > cap:
            raise LinearSolverError(f"dense LU limited to {cap} dofs, system has {n}")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(dense)
        pivots = np.abs(np.diag(lu))
        scale = max(np.abs(dense).max(), np.finfo(float).tiny)
        smallest = float(pivots.min()) if n else 1.0
        if smallest <= n * np.finfo(float).eps * scale:
            raise SingularMatrixError(pivot=smallest)
        if smallest <= np.sqrt(np.finfo(float).eps) * scale:
            logger.warning(f"dense LU: small pivot {smallest:.3e} relative to matrix scale {scale:.3e}")
        return scipy.linalg.lu_solve((lu, piv), b)

    @staticmethod
    def solve(
        matrix: MatrixLike,
        rhs: np.ndarray,
        config: LinearSolverConfig,
        blocks: Optional[Sequence[slice]] = None,
    ) -> LinearSolveResult:
        """Dispatch on the configured method."""
        if config.method == "dense_lu":
            x = LinalgService.dense_lu_solve(matrix, rhs, config.dof_cap)
            b_norm = np.linalg.norm(rhs)
            res = np.linalg.norm(rhs - matrix @ x) / b_norm if b_norm > 0 else 0.0
            return LinearSolveResult(x=x, iterations=1, residual=float(res))
        if not np.any(rhs):
            return LinearSolveResult(x=np.zeros(np.shape(rhs)[0]), iterations=0, residual=0.0)
        preconditioner = LinalgService.build_preconditioner(matrix, config, blocks)
        result = LinalgService.gmres_solve(matrix, rhs, config, preconditioner)
        logger.debug(
            f"GMRES finished: {result.iterations} iterations, {result.restarts} restarts, "
            f"residual {result.residual:.3e}"
        )
        return LinearSolveResult(x=result.x, iterations=result.iterations, residual=result.residual)

    @staticmethod
    def field_blocks(sizes: List[int]) -> List[slice]:
        """Contiguous slices for consecutive block sizes, empty blocks skipped."""
        out, start = [], 0
        for size in sizes:
            if size > 0:
                out.append(slice(start, start + size))
            start += size
        return out


linalg_service = LinalgService()
