"""Factored products with ``A = A_hat + U M^{-1} V^T``.

A product runs in four steps: ``y = V^T x``, solve ``M z = y`` (skipped when M
is the identity), ``w = U z`` and finally ``A_hat x + w``. The transpose swaps
the roles of U and V and solves ``M^T z = U^T y`` by backward substitution.
Each step goes through a backend kernel, so the work per call is one pass over
the nonzeros of the four factors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import DimensionError
from .sparsify import Sparsification, check_unit_lower


class _Csr:
    __slots__ = ("indptr", "indices", "data", "shape", "nnz")

    def __init__(self, m: sp.spmatrix):
        m = sp.csr_matrix(m, dtype=float)
        m.sort_indices()
        self.indptr = m.indptr.astype(np.int64)
        self.indices = m.indices.astype(np.int64)
        self.data = m.data.astype(np.float64)
        self.shape = m.shape
        self.nnz = m.nnz


@dataclass
class GradientWorkspace:
    """Scratch vectors for one product; owned by a single caller at a time."""

    y: np.ndarray
    z: np.ndarray
    w: np.ndarray
    acc: np.ndarray

    @classmethod
    def for_product(cls, k: int, out_dim: int) -> "GradientWorkspace":
        return cls(np.zeros(k), np.zeros(k), np.zeros(out_dim), np.zeros(out_dim))


class FactoredOperator:
    """Products with a sparsification, forward (``A x``) and transposed (``A^T y``).

    ``flops`` counts multiply-adds: the nonzeros of A_hat, U and V plus the
    off-diagonal nonzeros of M (unless M is the identity) for every call.
    The kernels reduce each output entry in a fixed order, so the result does
    not depend on the thread count; ``deterministic`` is kept for callers that
    want to state the requirement explicitly.
    """

    def __init__(self, s: Sparsification, backend=None, deterministic: bool = True):
        check_unit_lower(s.M)
        self.s = s
        self.kb = backend or kernels.BACKEND
        self.deterministic = deterministic
        self.shape = s.shape
        self.k = s.k
        self.identity_m = s.m_is_identity
        self._A = _Csr(s.A_hat)
        self._At = _Csr(s.A_hat.T)
        self._U = _Csr(s.U)
        self._Ut = _Csr(s.U.T)
        self._V = _Csr(s.V)
        self._Vt = _Csr(s.V.T)
        self._M = _Csr(s.M)
        self._Mt = _Csr(s.M.T)
        m_work = 0 if self.identity_m else s.M.nnz - self.k
        self.flops_per_call = self._A.nnz + self._U.nnz + self._V.nnz + m_work
        self.flops = 0
        self.calls = 0

    def workspace(self, transpose: bool = False) -> GradientWorkspace:
        rows, cols = self.shape
        return GradientWorkspace.for_product(self.k, cols if transpose else rows)

    def _spmv(self, m: _Csr, x: np.ndarray, out: np.ndarray) -> np.ndarray:
        return self.kb.csr_matvec(m.indptr, m.indices, m.data, x, out)

    def matvec(self, x: np.ndarray, ws: GradientWorkspace | None = None) -> np.ndarray:
        rows, cols = self.shape
        x = np.ascontiguousarray(x, dtype=float)
        if x.shape != (cols,):
            raise DimensionError(f"matvec expects a vector of length {cols}, got shape {x.shape}")
        ws = ws or self.workspace()
        self._spmv(self._Vt, x, ws.y)
        if self.identity_m:
            z = ws.y
        else:
            self.kb.solve_lower_unit(self._M.indptr, self._M.indices, self._M.data, ws.y, ws.z)
            z = ws.z
        self._spmv(self._U, z, ws.w)
        self._spmv(self._A, x, ws.acc)
        self.flops += self.flops_per_call
        self.calls += 1
        return ws.acc + ws.w

    def rmatvec(self, y: np.ndarray, ws: GradientWorkspace | None = None) -> np.ndarray:
        rows, cols = self.shape
        y = np.ascontiguousarray(y, dtype=float)
        if y.shape != (rows,):
            raise DimensionError(f"rmatvec expects a vector of length {rows}, got shape {y.shape}")
        ws = ws or self.workspace(transpose=True)
        self._spmv(self._Ut, y, ws.y)
        if self.identity_m:
            z = ws.y
        else:
            self.kb.solve_upper_unit(self._Mt.indptr, self._Mt.indices, self._Mt.data, ws.y, ws.z)
            z = ws.z
        self._spmv(self._V, z, ws.w)
        self._spmv(self._At, y, ws.acc)
        self.flops += self.flops_per_call
        self.calls += 1
        return ws.acc + ws.w

    def reset_counter(self) -> None:
        self.flops = 0
        self.calls = 0


def matvec(s: Sparsification, x: np.ndarray, backend=None) -> np.ndarray:
    return FactoredOperator(s, backend).matvec(x)


def matvec_transpose(s: Sparsification, y: np.ndarray, backend=None) -> np.ndarray:
    return FactoredOperator(s, backend).rmatvec(y)


def solve_lower_unit(M: sp.spmatrix, y: np.ndarray, backend=None) -> np.ndarray:
    """Solve ``M z = y`` for unit lower triangular M by forward substitution."""
    check_unit_lower(M)
    y = np.ascontiguousarray(y, dtype=float)
    if y.shape != (M.shape[0],):
        raise DimensionError(f"right-hand side has shape {y.shape}, M is {M.shape}")
    kb = backend or kernels.BACKEND
    m = _Csr(M)
    out = np.zeros_like(y)
    return kb.solve_lower_unit(m.indptr, m.indices, m.data, y, out)
