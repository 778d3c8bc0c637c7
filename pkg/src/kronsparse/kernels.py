"""Hot numeric kernels with two interchangeable backends.

The numba backend is used when numba imports and ``KRONSPARSE_DISABLE_NUMBA`` is
unset (or "0"); otherwise every kernel falls back to plain numpy (and scipy for
the triangular solves). Both backends are always importable through
``get_backend`` so the benchmark and the tests can compare them.

Every kernel reduces each output entry serially in a fixed order, so results
do not depend on the number of threads.
"""
from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

try:
    import numba
    from numba import prange
    HAVE_NUMBA = True
    if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
        # the system TBB is often too old for numba and warns on first use
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover
    numba = None
    prange = range
    HAVE_NUMBA = False


def _env_disabled() -> bool:
    return os.environ.get("KRONSPARSE_DISABLE_NUMBA", "0").lower() not in ("", "0", "false", "no")


# ---------------------------------------------------------------- numpy backend

def csr_matvec_np(indptr, indices, data, x, out):
    m = len(indptr) - 1
    rows = np.repeat(np.arange(m), np.diff(indptr))
    out[:] = np.bincount(rows, weights=data * x[indices], minlength=m)
    return out


def solve_lower_unit_np(indptr, indices, data, b, out):
    n = len(b)
    if n == 0:
        return out
    M = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    out[:] = spla.spsolve_triangular(M, b, lower=True, unit_diagonal=True)
    return out


def solve_upper_unit_np(indptr, indices, data, b, out):
    n = len(b)
    if n == 0:
        return out
    M = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    out[:] = spla.spsolve_triangular(M, b, lower=False, unit_diagonal=True)
    return out


def regret_match_np(R, start, end, out):
    pos = np.maximum(R, 0.0)
    for i in range(len(start)):
        a, b = start[i], end[i]
        block = pos[:, a:b]
        tot = block.sum(axis=1)
        raw = R[:, a:b]
        best = raw.max(axis=1)
        # no positive regret: uniform over the argmax actions
        ties = (raw == best[:, None]).astype(float)
        fallback = ties / ties.sum(axis=1)[:, None]
        has = tot > 0
        safe = np.where(has, tot, 1.0)
        out[:, a:b] = np.where(has[:, None], block / safe[:, None], fallback)
    return out


def sequence_form_np(sigma, parent, start, end, out):
    for i in range(len(start)):
        a, b = start[i], end[i]
        p = parent[i]
        if p < 0:
            out[:, a:b] = sigma[:, a:b]
        else:
            out[:, a:b] = sigma[:, a:b] * out[:, p:p + 1]
    return out


def cf_regrets_np(g, sigma, parent, start, end, regrets, root):
    """Instantaneous counterfactual regrets; returns per-hand root values in ``root``."""
    cfv = g.copy()
    root[:] = 0.0
    for i in range(len(start) - 1, -1, -1):
        a, b = start[i], end[i]
        v = (sigma[:, a:b] * cfv[:, a:b]).sum(axis=1)
        regrets[:, a:b] = cfv[:, a:b] - v[:, None]
        p = parent[i]
        if p < 0:
            root += v
        else:
            cfv[:, p] += v
    return regrets


def br_values_np(g, parent, start, end, choice, root):
    """Best-response pass: per-hand root values and the chosen local action per infoset."""
    cfv = g.copy()
    root[:] = 0.0
    for i in range(len(start) - 1, -1, -1):
        a, b = start[i], end[i]
        blk = cfv[:, a:b]
        k = blk.argmax(axis=1)
        choice[:, i] = k
        v = blk[np.arange(blk.shape[0]), k]
        p = parent[i]
        if p < 0:
            root += v
        else:
            cfv[:, p] += v
    return root


def best_block_py(R, value):
    """Best all-``value`` block of contiguous rows and columns.

    Gain is h*w - h - w (entries removed minus the two indicator vectors).
    Scans rows keeping column heights of ``value`` runs and a monotone stack,
    so every maximal block is visited once. Returns (gain, r0, r1, c0, c1)
    with inclusive bounds; gain 0 means nothing helps.
    """
    m, n = R.shape
    heights = np.zeros(n, dtype=np.int64)
    stack = np.zeros(n + 1, dtype=np.int64)
    best_gain, b0, b1, bc0, bc1 = 0, -1, -1, -1, -1
    for r in range(m):
        for j in range(n):
            heights[j] = heights[j] + 1 if R[r, j] == value else 0
        top = 0
        for j in range(n + 1):
            h = heights[j] if j < n else 0
            while top > 0 and heights[stack[top - 1]] >= h:
                k = stack[top - 1]
                top -= 1
                H = heights[k]
                left = stack[top - 1] + 1 if top > 0 else 0
                w = j - left
                gain = H * w - H - w
                if gain > best_gain:
                    best_gain, b0, b1, bc0, bc1 = gain, r - H + 1, r, left, j - 1
            stack[top] = j
            top += 1
    return (best_gain, b0, b1, bc0, bc1)


def best_cover_block_np(R, value):
    """Best block of contiguous rows and columns that may also cover zeros.

    Covering an entry equal to ``value`` zeroes it (+1), covering a zero turns
    it into ``-value`` (-1) and entries equal to ``-value`` may not be covered.
    The two indicator vectors cost one nonzero per row and per column. Same
    return convention as ``best_block_py``.
    """
    m, n = R.shape
    big = m * n + 1
    wt = np.where(R == value, 1, np.where(R == 0, -1, -big)).astype(np.int64)
    best = (0, -1, -1, -1, -1)
    for r0 in range(m):
        cs = np.cumsum(wt[r0:], axis=0) - 1
        P = np.cumsum(cs, axis=1)
        Pm = np.zeros_like(P)
        Pm[:, 1:] = P[:, :-1]
        runmin = np.minimum.accumulate(Pm, axis=1)
        h = np.arange(1, m - r0 + 1)[:, None]
        score = P - runmin - h
        flat = int(np.argmax(score))
        r, c1 = divmod(flat, n)
        if score[r, c1] > best[0]:
            seg = Pm[r, :c1 + 1]
            c0 = int(c1 - np.argmin(seg[::-1]))
            best = (int(score[r, c1]), r0, r0 + r, c0, int(c1))
    return best


# ---------------------------------------------------------------- numba backend

if HAVE_NUMBA:
    _jit = numba.njit(cache=True, nogil=True)
    _pjit = numba.njit(cache=True, nogil=True, parallel=True)

    @_pjit
    def csr_matvec_nb(indptr, indices, data, x, out):
        m = len(indptr) - 1
        for i in prange(m):
            s = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                s += data[k] * x[indices[k]]
            out[i] = s
        return out

    @_jit
    def solve_lower_unit_nb(indptr, indices, data, b, out):
        n = len(b)
        for i in range(n):
            s = b[i]
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                if j < i:
                    s -= data[k] * out[j]
            out[i] = s
        return out

    @_jit
    def solve_upper_unit_nb(indptr, indices, data, b, out):
        n = len(b)
        for i in range(n - 1, -1, -1):
            s = b[i]
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                if j > i:
                    s -= data[k] * out[j]
            out[i] = s
        return out

    @_pjit
    def regret_match_nb(R, start, end, out):
        H = R.shape[0]
        for h in prange(H):
            for i in range(len(start)):
                a, b = start[i], end[i]
                tot = 0.0
                best = R[h, a]
                for k in range(a, b):
                    if R[h, k] > 0.0:
                        tot += R[h, k]
                    if R[h, k] > best:
                        best = R[h, k]
                if tot > 0.0:
                    for k in range(a, b):
                        out[h, k] = R[h, k] / tot if R[h, k] > 0.0 else 0.0
                else:
                    cnt = 0
                    for k in range(a, b):
                        if R[h, k] == best:
                            cnt += 1
                    for k in range(a, b):
                        out[h, k] = 1.0 / cnt if R[h, k] == best else 0.0
        return out

    @_pjit
    def sequence_form_nb(sigma, parent, start, end, out):
        H = sigma.shape[0]
        for h in prange(H):
            for i in range(len(start)):
                p = parent[i]
                mass = 1.0 if p < 0 else out[h, p]
                for k in range(start[i], end[i]):
                    out[h, k] = sigma[h, k] * mass
        return out

    @_pjit
    def cf_regrets_nb(g, sigma, parent, start, end, regrets, root):
        H, n = g.shape
        for h in prange(H):
            cfv = g[h].copy()
            acc = 0.0
            for i in range(len(start) - 1, -1, -1):
                v = 0.0
                for k in range(start[i], end[i]):
                    v += sigma[h, k] * cfv[k]
                for k in range(start[i], end[i]):
                    regrets[h, k] = cfv[k] - v
                p = parent[i]
                if p < 0:
                    acc += v
                else:
                    cfv[p] += v
            root[h] = acc
        return regrets

    @_pjit
    def br_values_nb(g, parent, start, end, choice, root):
        H, n = g.shape
        for h in prange(H):
            cfv = g[h].copy()
            acc = 0.0
            for i in range(len(start) - 1, -1, -1):
                a = start[i]
                kb = a
                for k in range(a + 1, end[i]):
                    if cfv[k] > cfv[kb]:
                        kb = k
                choice[h, i] = kb - a
                p = parent[i]
                if p < 0:
                    acc += cfv[kb]
                else:
                    cfv[p] += cfv[kb]
            root[h] = acc
        return root

    best_block_nb = _jit(best_block_py)

    @_jit
    def best_cover_block_nb(R, value):
        m, n = R.shape
        big = m * n + 1
        colsum = np.empty(n, dtype=np.int64)
        best_gain, b0, b1, bc0, bc1 = 0, -1, -1, -1, -1
        for r0 in range(m):
            colsum[:] = 0
            for r1 in range(r0, m):
                h = r1 - r0 + 1
                run = 0
                start = 0
                for j in range(n):
                    x = R[r1, j]
                    if x == value:
                        colsum[j] += 1
                    elif x == 0:
                        colsum[j] -= 1
                    else:
                        colsum[j] -= big
                    c = colsum[j] - 1
                    if j > 0 and run > 0:
                        run += c
                    else:
                        run = c
                        start = j
                    if run - h > best_gain:
                        best_gain = run - h
                        b0, b1, bc0, bc1 = r0, r1, start, j
        return (best_gain, b0, b1, bc0, bc1)


_NUMPY = SimpleNamespace(
    name="numpy",
    csr_matvec=csr_matvec_np,
    solve_lower_unit=solve_lower_unit_np,
    solve_upper_unit=solve_upper_unit_np,
    regret_match=regret_match_np,
    sequence_form=sequence_form_np,
    cf_regrets=cf_regrets_np,
    br_values=br_values_np,
    best_block=best_block_py,
    best_cover_block=best_cover_block_np,
)

if HAVE_NUMBA:
    _NUMBA = SimpleNamespace(
        name="numba",
        csr_matvec=csr_matvec_nb,
        solve_lower_unit=solve_lower_unit_nb,
        solve_upper_unit=solve_upper_unit_nb,
        regret_match=regret_match_nb,
        sequence_form=sequence_form_nb,
        cf_regrets=cf_regrets_nb,
        br_values=br_values_nb,
        best_block=best_block_nb,
        best_cover_block=best_cover_block_nb,
    )
else:  # pragma: no cover
    _NUMBA = None


def available_backends() -> list[str]:
    return ["numba", "numpy"] if HAVE_NUMBA else ["numpy"]


def get_backend(name: str | None = None) -> SimpleNamespace:
    if name is None:
        name = "numpy" if (_env_disabled() or not HAVE_NUMBA) else "numba"
    if name == "numba":
        if _NUMBA is None:
            raise RuntimeError("numba backend requested but numba is not installed")
        return _NUMBA
    if name == "numpy":
        return _NUMPY
    raise ValueError(f"unknown backend {name!r}")


def set_threads(n: int | None) -> None:
    if n and HAVE_NUMBA:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


BACKEND = get_backend()
