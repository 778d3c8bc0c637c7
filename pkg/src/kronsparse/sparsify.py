"""Low-rank-plus-sparse factorizations ``A = A_hat + U M^{-1} V^T`` of a Kronecker payoff.

Two constructions are provided. Technique A peels the win-lose matrix W into a
sparse residual plus a few rank-one rectangles and lifts that through the
Kronecker structure (M is the identity). Technique B sorts hands by strength,
takes row differences ``Y = D W`` (D unit lower bidiagonal) and keeps D inside
the triangular factor M.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import ContractError, DimensionError
from .kron import KronPayoff

log = logging.getLogger(__name__)


class SizeReport(NamedTuple):
    a_hat: int
    u: int
    m: int
    v: int
    total: int


@dataclass(frozen=True)
class Sparsification:
    A_hat: sp.csr_matrix
    U: sp.csr_matrix
    M: sp.csr_matrix
    V: sp.csr_matrix
    technique: str = ""

    def __post_init__(self):
        mats = {}
        for name in ("A_hat", "U", "M", "V"):
            m = sp.csr_matrix(getattr(self, name), dtype=float)
            m.sum_duplicates()
            m.eliminate_zeros()
            m.sort_indices()
            mats[name] = m
        for name, m in mats.items():
            object.__setattr__(self, name, m)
        rows, cols = self.A_hat.shape
        k = self.M.shape[0]
        if self.U.shape != (rows, k) or self.V.shape != (cols, k) or self.M.shape != (k, k):
            raise DimensionError(
                f"inconsistent factor shapes: A_hat {self.A_hat.shape}, U {self.U.shape}, "
                f"M {self.M.shape}, V {self.V.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.A_hat.shape

    @property
    def k(self) -> int:
        return self.M.shape[0]

    @property
    def m_is_identity(self) -> bool:
        M = self.M
        return M.nnz == self.k and np.array_equal(M.indices, np.arange(self.k)) and np.all(M.data == 1.0)

    def size(self) -> SizeReport:
        return size(self)

    def dense(self) -> np.ndarray:
        """Dense ``A_hat + U M^{-1} V^T``; for checks on small instances only."""
        if self.k == 0:
            return self.A_hat.toarray()
        Z = spla.spsolve_triangular(self.M.tocsr(), self.V.toarray().T, lower=True)
        return self.A_hat.toarray() + self.U.toarray() @ Z


def size(s: Sparsification) -> SizeReport:
    a, u, m, v = s.A_hat.nnz, s.U.nnz, s.M.nnz, s.V.nnz
    return SizeReport(a, u, m, v, a + u + m + v)


def check_unit_lower(M: sp.spmatrix) -> None:
    M = sp.coo_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise ContractError("M must be square")
    keep = M.data != 0
    r, c, v = M.row[keep], M.col[keep], M.data[keep]
    if np.any(c > r):
        raise ContractError("M has entries above the diagonal")
    diag = np.zeros(M.shape[0])
    np.add.at(diag, r[r == c], v[r == c])
    if not np.all(diag == 1.0):
        raise ContractError("M must have a unit diagonal")


# ------------------------------------------------------------------- W peeling

@dataclass(frozen=True)
class WFactorization:
    W_hat: sp.csr_matrix
    U_W: sp.csr_matrix
    V_W: sp.csr_matrix

    @property
    def rank(self) -> int:
        return self.U_W.shape[1]

    def size(self) -> int:
        return self.W_hat.nnz + self.U_W.nnz + self.V_W.nnz

    def reconstruct(self) -> np.ndarray:
        return self.W_hat.toarray() + (self.U_W @ self.V_W.T).toarray()


def _grow(R: np.ndarray, val: int, rows: np.ndarray, cols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Add every row and column that equals ``val`` across the current rectangle, until stable."""
    rmask = np.zeros(R.shape[0], dtype=bool)
    cmask = np.zeros(R.shape[1], dtype=bool)
    rmask[rows] = True
    cmask[cols] = True
    while True:
        add_r = ~rmask & (R[:, cmask] == val).all(axis=1)
        rmask |= add_r
        add_c = ~cmask & (R[rmask, :] == val).all(axis=0)
        cmask |= add_c
        if not add_c.any():
            break
    return np.flatnonzero(rmask), np.flatnonzero(cmask)


def sparsify_w(W: np.ndarray, max_iters: int = 1000, backend=None, mode: str = "exact") -> WFactorization:
    """Greedy rank-one peeling of a {-1, 0, +1} matrix.

    ``mode="exact"`` peels constant-value combinatorial rectangles: each round
    takes the best block of contiguous rows and columns holding a single value,
    then keeps adding any row or column that holds that value across the whole
    block, so the block can reach past incompatible-hand holes.

    ``mode="cover"`` peels contiguous blocks that may also cover zeros, each
    covered zero becoming a residual entry of the opposite sign (and being
    charged for it). It usually finds a smaller factorization.

    Each block is recorded as a signed row indicator times a column indicator.
    Peeling stops when no block saves a nonzero or after ``max_iters`` rounds;
    whatever is left is ``W_hat``.
    """
    if mode not in ("exact", "cover"):
        raise ValueError(f"unknown peeling mode {mode!r}")
    cover = mode == "cover"
    kb = backend or kernels.BACKEND
    R = np.array(W, dtype=np.int8)
    if R.ndim != 2 or not np.isin(R, (-1, 0, 1)).all():
        raise ContractError("W must be a matrix with entries in {-1, 0, 1}")
    m, n = R.shape
    ur, uc, uv, vr, vc = [], [], [], [], []
    r = 0
    for _ in range(max_iters):
        if m == 0 or n == 0:
            break
        best_gain, best = 0, None
        for val in (1, -1):
            find = kb.best_cover_block if cover else kb.best_block
            gain, r0, r1, c0, c1 = find(R, np.int8(val))
            if gain <= 0:
                continue
            rows, cols = np.arange(r0, r1 + 1), np.arange(c0, c1 + 1)
            if not cover:
                rows, cols = _grow(R, val, rows, cols)
                gain = len(rows) * len(cols) - len(rows) - len(cols)
            if gain > best_gain:
                best_gain, best = gain, (val, rows, cols)
        if best is None:
            break
        val, rows, cols = best
        R[np.ix_(rows, cols)] -= np.int8(val)
        ur.extend(rows); uc.extend([r] * len(rows)); uv.extend([val] * len(rows))
        vr.extend(cols); vc.extend([r] * len(cols))
        r += 1
    U_W = sp.csr_matrix((np.array(uv, dtype=float), (ur, uc)), shape=(m, r))
    V_W = sp.csr_matrix((np.ones(len(vr)), (vr, vc)), shape=(n, r))
    W_hat = sp.csr_matrix(R.astype(float))
    W_hat.eliminate_zeros()
    return WFactorization(W_hat, U_W, V_W)


# ------------------------------------------------------------------ techniques

def _fold_term(payoff: KronPayoff) -> sp.csr_matrix:
    inc = sp.csr_matrix(payoff.lam1[:, None] * payoff.Hx * payoff.lam2[None, :])
    return sp.kron(inc, payoff.F, format="csr")


def _fold_factors(payoff: KronPayoff) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Rank-n1 factors of ``(l1 l2^T) (x) F``."""
    I1 = sp.identity(payoff.n1, format="csr")
    U = sp.kron(sp.csr_matrix(payoff.lam1[:, None]), I1, format="csr")
    V = sp.kron(sp.csr_matrix(payoff.lam2[:, None]), payoff.F.T.tocsr(), format="csr")
    return U, V


def technique_a(payoff: KronPayoff, wfac: WFactorization | None = None, max_iters: int = 1000,
                mode: str = "exact") -> Sparsification:
    if wfac is None:
        wfac = sparsify_w(payoff.W, max_iters=max_iters, mode=mode)
    m1, m2 = payoff.hand_counts
    if wfac.W_hat.shape != (m1, m2) or wfac.U_W.shape[0] != m1 or wfac.V_W.shape[0] != m2:
        raise DimensionError("W factorization does not match the payoff's hand counts")
    L1 = sp.diags(payoff.lam1)
    L2 = sp.diags(payoff.lam2)
    I1 = sp.identity(payoff.n1, format="csr")
    A_hat = sp.kron(L1 @ wfac.W_hat @ L2, payoff.S, format="csr") - _fold_term(payoff)
    Uf, Vf = _fold_factors(payoff)
    U = sp.hstack([sp.kron(L1 @ wfac.U_W, I1), Uf], format="csr")
    V = sp.hstack([sp.kron(L2 @ wfac.V_W, payoff.S.T), Vf], format="csr")
    M = sp.identity(U.shape[1], format="csr")
    return Sparsification(A_hat, U, M, V, "A")


def difference_matrix(n: int) -> sp.csr_matrix:
    """Unit lower bidiagonal D with -1 just below the diagonal."""
    return sp.diags([np.ones(n), -np.ones(max(n - 1, 0))], [0, -1], shape=(n, n), format="csr")


def technique_b(payoff: KronPayoff) -> Sparsification:
    m1, _ = payoff.hand_counts
    D = difference_matrix(m1)
    Y = sp.csr_matrix(D @ payoff.W.astype(float))
    L1 = sp.diags(payoff.lam1)
    L2 = sp.diags(payoff.lam2)
    I1 = sp.identity(payoff.n1, format="csr")
    A_hat = -_fold_term(payoff)
    Uf, Vf = _fold_factors(payoff)
    U = sp.hstack([sp.kron(L1, I1), Uf], format="csr")
    M = sp.block_diag([sp.kron(D, I1), I1], format="csr")
    V = sp.hstack([sp.kron(L2 @ Y.T, payoff.S.T), Vf], format="csr")
    return Sparsification(A_hat, U, M, V, "B")


def sparsify(payoff: KronPayoff, technique: str = "b", postprocessed: bool = True, max_iters: int = 1000,
             mode: str = "exact") -> Sparsification:
    t = technique.lower()
    if t == "a":
        s = technique_a(payoff, max_iters=max_iters, mode=mode)
    elif t == "b":
        s = technique_b(payoff)
    else:
        raise ValueError(f"unknown technique {technique!r}")
    return postprocess(s) if postprocessed else s


# -------------------------------------------------------------- postprocessing

def postprocess(s: Sparsification) -> Sparsification:
    """Drop every index whose column of V is identically zero.

    Row j of the triangular system then reads ``y_j = -sum_{i<j} M[j, i] y_i``,
    so y_j is substituted into the later rows of M and into U before the index
    is removed. Indices are processed in increasing order.
    """
    check_unit_lower(s.M)
    k = s.k
    zero_cols = np.diff(s.V.tocsc().indptr) == 0
    if not zero_cols.any():
        return s

    Mc = s.M.tocsr()
    rows: list[dict[int, float]] = []
    col_users: list[set[int]] = [set() for _ in range(k)]
    for j in range(k):
        lo, hi = Mc.indptr[j], Mc.indptr[j + 1]
        row = {int(c): float(v) for c, v in zip(Mc.indices[lo:hi], Mc.data[lo:hi]) if c != j and v != 0.0}
        rows.append(row)
        for c in row:
            col_users[c].add(j)

    Uc = s.U.tocsc()
    ucols: list[dict[int, float]] = []
    for j in range(k):
        lo, hi = Uc.indptr[j], Uc.indptr[j + 1]
        ucols.append({int(r): float(v) for r, v in zip(Uc.indices[lo:hi], Uc.data[lo:hi])})

    alive = np.ones(k, dtype=bool)
    for j in np.flatnonzero(zero_cols):
        coeffs = rows[j]
        # U z picks up U[:, j] * y_j = sum_i (-a_i) U[:, j] y_i
        for i, a in coeffs.items():
            target = ucols[i]
            for r, v in ucols[j].items():
                nv = target.get(r, 0.0) - a * v
                if nv == 0.0:
                    target.pop(r, None)
                else:
                    target[r] = nv
        for r in sorted(col_users[j]):
            mrj = rows[r].pop(j)
            for i, a in coeffs.items():
                nv = rows[r].get(i, 0.0) - mrj * a
                if nv == 0.0:
                    if i in rows[r]:
                        del rows[r][i]
                        col_users[i].discard(r)
                else:
                    rows[r][i] = nv
                    col_users[i].add(r)
        for i in coeffs:
            col_users[i].discard(j)
        col_users[j].clear()
        rows[j] = {}
        ucols[j] = {}
        alive[j] = False

    new_index = -np.ones(k, dtype=np.int64)
    new_index[alive] = np.arange(alive.sum())
    kk = int(alive.sum())
    mr, mc, mv = list(range(kk)), list(range(kk)), [1.0] * kk
    ur, uc, uv = [], [], []
    for j in np.flatnonzero(alive):
        nj = new_index[j]
        for i, a in rows[j].items():
            mr.append(nj); mc.append(new_index[i]); mv.append(a)
        for r, v in ucols[j].items():
            ur.append(r); uc.append(nj); uv.append(v)
    M = sp.csr_matrix((mv, (mr, mc)), shape=(kk, kk))
    U = sp.csr_matrix((uv, (ur, uc)), shape=(s.U.shape[0], kk))
    V = s.V.tocsc()[:, alive].tocsr()
    out = Sparsification(s.A_hat, U, M, V, s.technique)
    log.debug("postprocess removed %d of %d columns", k - kk, k)
    return out
