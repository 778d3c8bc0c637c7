"""Kronecker-factored payoff of a river endgame.

Rows of the payoff matrix are Player 1 (hand, sequence) pairs and columns are
Player 2 pairs; the flat index of (hand h, sequence s) is ``h * n + s`` with
hands in ascending strength order. The matrix is

    A = C (x) F + (L1 W L2) (x) S,    C = l1 l2^T - L1 Hx L2,

where l_i = mu_i / sqrt(beta), L_i = diag(l_i), W holds showdown outcomes and Hx
flags card-sharing hand pairs. With this scaling C[h1, h2] is exactly the deal
probability of the pair.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .cards import Board, Card, Hand, evaluate7, standard_deck
from .errors import DegenerateBeliefsError, InvalidInputError, SizeGuardError
from .skeleton import BettingConfig, Skeleton, build_skeleton, payoff_components

DENSE_GUARD = 50_000_000


@dataclass(frozen=True)
class RiverInstance:
    board: Board
    hands: tuple[tuple[Hand, ...], tuple[Hand, ...]]      # each ascending by strength
    weights: tuple[np.ndarray, np.ndarray]
    config: BettingConfig
    deck: Optional[tuple[Card, ...]] = None
    order: tuple[np.ndarray, np.ndarray] = field(default=None, compare=False)  # sorted -> input position

    @classmethod
    def from_beliefs(cls, board: Board, beliefs1: Mapping[Hand, float], beliefs2: Mapping[Hand, float],
                     config: BettingConfig, deck: Optional[Sequence[Card]] = None,
                     prune_zero: bool = False) -> "RiverInstance":
        hands, weights, orders = [], [], []
        deck_set = set(deck) if deck is not None else None
        for beliefs in (beliefs1, beliefs2):
            items = list(beliefs.items())
            if prune_zero:
                items = [(h, w) for h, w in items if w > 0]
            seen = set()
            for h, w in items:
                if h in seen:
                    raise InvalidInputError(f"duplicate hand {h}")
                seen.add(h)
                if not w >= 0 or not np.isfinite(w):
                    raise InvalidInputError(f"belief weight for {h} must be a finite nonnegative number")
                if h.first in board or h.second in board:
                    raise InvalidInputError(f"hand {h} overlaps the board {board}")
                if deck_set is not None and not set(h.cards) <= deck_set:
                    raise InvalidInputError(f"hand {h} uses a card outside the deck")
            if not items:
                raise InvalidInputError("empty hand list")
            keys = [evaluate7(h, board) for h, _ in items]
            # ties keep canonical card order
            idx = sorted(range(len(items)), key=lambda i: (keys[i], items[i][0].first, items[i][0].second))
            hands.append(tuple(items[i][0] for i in idx))
            weights.append(np.array([float(items[i][1]) for i in idx]))
            orders.append(np.array(idx, dtype=np.int64))
        if deck_set is not None and not set(board.cards) <= deck_set:
            raise InvalidInputError("board uses a card outside the deck")
        if deck is not None and sorted(deck) == standard_deck():
            deck = None     # the full deck is the default, store it one way only
        return cls(board, (hands[0], hands[1]), (weights[0], weights[1]), config,
                   tuple(deck) if deck is not None else None, (orders[0], orders[1]))

    def beliefs(self, player: int) -> dict[Hand, float]:
        return dict(zip(self.hands[player], self.weights[player].tolist()))

    @property
    def pot(self) -> float:
        return 2.0 * self.config.pot_contribution


@dataclass(frozen=True)
class KronPayoff:
    skeleton: Skeleton
    F: sp.csr_matrix
    S: sp.csr_matrix
    lam1: np.ndarray
    lam2: np.ndarray
    beta: float
    W: np.ndarray          # int8, |H1| x |H2|
    Hx: np.ndarray         # int8, |H1| x |H2|
    C: np.ndarray
    hands1: tuple[Hand, ...] = ()
    hands2: tuple[Hand, ...] = ()
    pot: float = 0.0

    @property
    def n1(self) -> int:
        return self.F.shape[0]

    @property
    def n2(self) -> int:
        return self.F.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.lam1) * self.n1, len(self.lam2) * self.n2)

    @property
    def hand_counts(self) -> tuple[int, int]:
        return (len(self.lam1), len(self.lam2))

    def hand_index(self, player: int, hand: Hand | int) -> int:
        hands = self.hands1 if player == 0 else self.hands2
        if isinstance(hand, (int, np.integer)):
            if not 0 <= hand < len(hands):
                raise IndexError(f"hand index {hand} out of range")
            return int(hand)
        try:
            return hands.index(hand)
        except ValueError:
            raise IndexError(f"unknown hand {hand}") from None

    def dense_nnz(self) -> int:
        """Nonzero count of the full payoff matrix, without forming it."""
        f = (self.F.toarray() != 0)
        s = (self.S.toarray() != 0)
        pos = self.C != 0
        showdown = pos & (self.W != 0)
        return int(pos.sum() * f.sum() + showdown.sum() * s.sum())


def win_lose_matrices(board: Board, hands1: Sequence[Hand], hands2: Sequence[Hand]) -> tuple[np.ndarray, np.ndarray]:
    k1 = np.array([evaluate7(h, board) for h in hands1], dtype=np.int64)
    k2 = np.array([evaluate7(h, board) for h in hands2], dtype=np.int64)
    Hx = np.array([[h1.shares_card(h2) for h2 in hands2] for h1 in hands1],
                  dtype=np.int8).reshape(len(hands1), len(hands2))
    W = np.sign(k1[:, None] - k2[None, :]).astype(np.int8)
    W[Hx == 1] = 0
    return W, Hx


def assemble(instance: RiverInstance, skeleton: Optional[Skeleton] = None) -> KronPayoff:
    sk = skeleton if skeleton is not None else build_skeleton(instance.config)
    comp = payoff_components(sk)
    h1, h2 = instance.hands
    mu1, mu2 = instance.weights
    W, Hx = win_lose_matrices(instance.board, h1, h2)
    beta = float(mu1 @ (1 - Hx) @ mu2)
    if not beta > 0:
        raise DegenerateBeliefsError("no compatible hand pair carries positive belief mass")
    root = np.sqrt(beta)
    lam1, lam2 = mu1 / root, mu2 / root
    C = np.outer(lam1, lam2) - lam1[:, None] * Hx * lam2[None, :]
    return KronPayoff(sk, comp.F, comp.S, lam1, lam2, beta, W, Hx, C, tuple(h1), tuple(h2),
                      instance.pot)


def pi(payoff: KronPayoff, h1: Hand | int, h2: Hand | int) -> float:
    """Probability that chance deals the pair (h1, h2)."""
    i = payoff.hand_index(0, h1)
    j = payoff.hand_index(1, h2)
    if payoff.Hx[i, j]:
        return 0.0
    return float(payoff.lam1[i] * payoff.lam2[j])


def _guard(payoff: KronPayoff, guard: int) -> None:
    rows, cols = payoff.shape
    if rows * cols > guard:
        raise SizeGuardError(f"dense payoff would have {rows * cols} entries (guard {guard})")


def dense_expand(payoff: KronPayoff, guard: int = DENSE_GUARD) -> np.ndarray:
    """Dense payoff built block by block: block (h1, h2) = pi * (F + gamma * S)."""
    _guard(payoff, guard)
    F, S = payoff.F.toarray(), payoff.S.toarray()
    m1, m2 = payoff.hand_counts
    blocks = payoff.C[:, :, None, None] * (F[None, None] + payoff.W[:, :, None, None] * S[None, None])
    return blocks.transpose(0, 2, 1, 3).reshape(m1 * payoff.n1, m2 * payoff.n2)


def kronecker_product(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Block matrix whose (i, j) block is ``P[i, j] * Q``."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    m, n = P.shape
    r, s = Q.shape
    out = np.empty((m * r, n * s))
    for i in range(m):
        for j in range(n):
            out[i * r:(i + 1) * r, j * s:(j + 1) * s] = P[i, j] * Q
    return out


def kron_sum_dense(payoff: KronPayoff, guard: int = DENSE_GUARD) -> np.ndarray:
    """Dense payoff assembled from its two Kronecker terms."""
    _guard(payoff, guard)
    scaled_w = payoff.lam1[:, None] * payoff.W * payoff.lam2[None, :]
    return (kronecker_product(payoff.C, payoff.F.toarray())
            + kronecker_product(scaled_w, payoff.S.toarray()))


class KronOperator:
    """Payoff products straight from the Kronecker factors.

    ``(P (x) Q) vec(X) = vec(P X Q^T)`` for row-major ``vec``, so a product costs
    two small dense-times-sparse multiplies per term.
    """

    def __init__(self, payoff: KronPayoff):
        self.payoff = payoff
        self._F = payoff.F.tocsr()
        self._S = payoff.S.tocsr()
        self._Wl = payoff.lam1[:, None] * payoff.W * payoff.lam2[None, :]
        self.shape = payoff.shape

    def matvec(self, x: np.ndarray) -> np.ndarray:
        p = self.payoff
        X = np.asarray(x, dtype=float).reshape(len(p.lam2), p.n2)
        out = p.C @ (self._F @ X.T).T + self._Wl @ (self._S @ X.T).T
        return out.ravel()

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        p = self.payoff
        Y = np.asarray(y, dtype=float).reshape(len(p.lam1), p.n1)
        out = p.C.T @ (self._F.T @ Y.T).T + self._Wl.T @ (self._S.T @ Y.T).T
        return out.ravel()


class DenseOperator:
    """Products with an explicitly formed payoff matrix."""

    def __init__(self, A: np.ndarray):
        self.A = np.asarray(A, dtype=float)
        self.shape = self.A.shape

    @classmethod
    def from_payoff(cls, payoff: KronPayoff, guard: int = DENSE_GUARD) -> "DenseOperator":
        return cls(dense_expand(payoff, guard))

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        return self.A.T @ y


def sparse_payoff(payoff: KronPayoff) -> sp.csr_matrix:
    """Payoff as a sparse matrix, built from the Kronecker terms without a dense pass."""
    scaled_w = sp.csr_matrix(payoff.lam1[:, None] * payoff.W * payoff.lam2[None, :])
    A = sp.kron(sp.csr_matrix(payoff.C), payoff.F, format="csr") + sp.kron(scaled_w, payoff.S, format="csr")
    A.eliminate_zeros()
    return A.tocsr()
