"""Discounted CFR on the hand-indexed treeplex, best responses and determinism analysis.

Strategies are kept in sequence form as ``(hands, sequences)`` arrays whose
row-major flattening matches the payoff's flat index ``h * n + s``. The empty
sequence is implicit with mass one. Player numbers are 1 and 2; Player 1's
payoff is ``x1^T A x2`` and Player 2 receives its negation.
"""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import kernels
from .engine import FactoredOperator
from .errors import ContractError, InvalidInputError, SizeGuardError
from .kron import KronOperator, KronPayoff
from .skeleton import PlayerTree, sequence_constraints
from .sparsify import Sparsification

log = logging.getLogger(__name__)

ENUMERATION_GUARD = 1_000_000
CONSTRAINT_TOL = 1e-9


@dataclass
class StrategyProfile:
    x1: np.ndarray
    x2: np.ndarray

    def player(self, p: int) -> np.ndarray:
        return self.x1 if _check_player(p) == 1 else self.x2

    def flat(self, p: int) -> np.ndarray:
        return self.player(p).ravel()


@dataclass(frozen=True)
class DCFRParams:
    alpha: float = 1.5
    beta: float = 0.0
    gamma: float = 2.0
    max_iters: int = 10_000
    target_exploitability: Optional[float] = None
    checkpoint: int = 50
    self_check: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be at least 1")
        if self.checkpoint < 1:
            raise InvalidInputError("checkpoint interval must be at least 1")


@dataclass
class RegretTables:
    """Cumulative DCFR state; rows are hands, columns are sequences."""

    regrets: list[np.ndarray]
    strategy_sum: list[np.ndarray]
    weight: float = 0.0
    iteration: int = 0

    @classmethod
    def zeros(cls, payoff: KronPayoff) -> "RegretTables":
        (m1, m2), n = payoff.hand_counts, (payoff.n1, payoff.n2)
        return cls([np.zeros((m1, n[0])), np.zeros((m2, n[1]))],
                   [np.zeros((m1, n[0])), np.zeros((m2, n[1]))])

    def average(self) -> StrategyProfile:
        w = self.weight if self.weight > 0 else 1.0
        return StrategyProfile(self.strategy_sum[0] / w, self.strategy_sum[1] / w)


@dataclass
class ConvergenceTrace:
    rows: list[tuple[int, float, float]] = field(default_factory=list)

    def append(self, iteration: int, seconds: float, exploitability: float) -> None:
        if self.rows and iteration <= self.rows[-1][0]:
            raise ValueError("trace iterations must increase")
        self.rows.append((int(iteration), float(seconds), float(exploitability)))

    @property
    def iterations(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows], dtype=np.int64)

    @property
    def exploitabilities(self) -> np.ndarray:
        return np.array([r[2] for r in self.rows])

    def first_below(self, threshold: float) -> Optional[tuple[int, float, float]]:
        for r in self.rows:
            if r[2] < threshold:
                return r
        return None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "seconds", "exploitability"])
            for it, sec, ex in self.rows:
                w.writerow([it, f"{sec:.6f}", repr(ex)])

    @classmethod
    def from_csv(cls, path) -> "ConvergenceTrace":
        tr = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                tr.append(int(row["iteration"]), float(row["seconds"]), float(row["exploitability"]))
        return tr


class SolveResult(NamedTuple):
    profile: StrategyProfile
    trace: ConvergenceTrace


def _check_player(p: int) -> int:
    if p not in (1, 2):
        raise InvalidInputError(f"player must be 1 or 2, got {p!r}")
    return p


def make_operator(payoff: KronPayoff, s=None, backend=None):
    """Anything with ``matvec``/``rmatvec``: a sparsification is wrapped, ``None`` gives the Kronecker operator."""
    if s is None:
        return KronOperator(payoff)
    if isinstance(s, Sparsification):
        return FactoredOperator(s, backend)
    if hasattr(s, "matvec") and hasattr(s, "rmatvec"):
        return s
    raise InvalidInputError(f"cannot build a payoff operator from {type(s).__name__}")


def _self_check(payoff: KronPayoff, op, rng_seed: int = 12345, tol: float = 1e-8) -> None:
    ref = KronOperator(payoff)
    rng = np.random.default_rng(rng_seed)
    rows, cols = payoff.shape
    if tuple(op.shape) != (rows, cols):
        raise ContractError(f"operator shape {tuple(op.shape)} does not match payoff {payoff.shape}")
    for _ in range(2):
        x = rng.standard_normal(cols)
        y = rng.standard_normal(rows)
        for got, want in ((op.matvec(x), ref.matvec(x)), (op.rmatvec(y), ref.rmatvec(y))):
            scale = max(np.abs(want).max(), 1e-300)
            if np.abs(got - want).max() > tol * scale:
                raise ContractError("sparsification does not reconstruct the payoff")


def _gradients(op, payoff: KronPayoff, x1: np.ndarray, x2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    g1 = op.matvec(x2.ravel()).reshape(x1.shape)
    g2 = -op.rmatvec(x1.ravel()).reshape(x2.shape)
    return g1, g2


def _tree_arrays(tree: PlayerTree):
    return (tree.iset_parent.astype(np.int64), tree.iset_start.astype(np.int64),
            tree.iset_end.astype(np.int64))


def _br_root(kb, g: np.ndarray, tree: PlayerTree) -> tuple[np.ndarray, np.ndarray]:
    parent, start, end = _tree_arrays(tree)
    g = np.ascontiguousarray(g, dtype=float)
    root = np.zeros(g.shape[0])
    choice = np.zeros((g.shape[0], tree.n_isets), dtype=np.int64)
    kb.br_values(g, parent, start, end, choice, root)
    return root, choice


def _pure_from_choice(tree: PlayerTree, choice: np.ndarray) -> np.ndarray:
    """Sequence-form 0/1 vectors from per-infoset local action choices."""
    H = choice.shape[0]
    x = np.zeros((H, tree.n_seqs))
    for i in range(tree.n_isets):
        p = tree.iset_parent[i]
        mass = np.ones(H) if p < 0 else x[:, p]
        x[np.arange(H), tree.iset_start[i] + choice[:, i]] = mass
    return x


def dcfr_solve(payoff: KronPayoff, s=None, params: DCFRParams = DCFRParams(), backend=None,
               tables: Optional[RegretTables] = None) -> SolveResult:
    """Self-play DCFR with simultaneous updates; returns the average profile and its trace.

    ``s`` is a Sparsification, any object with ``matvec``/``rmatvec`` (for
    example a ``DenseOperator``), or ``None`` for the Kronecker operator.
    """
    kb = backend or kernels.BACKEND
    op = make_operator(payoff, s, kb)
    if params.self_check and isinstance(s, Sparsification):
        _self_check(payoff, op)
    sk = payoff.skeleton
    trees = sk.trees
    arrs = [_tree_arrays(t) for t in trees]
    tables = tables or RegretTables.zeros(payoff)
    sigma = [np.zeros_like(r) for r in tables.regrets]
    x = [np.zeros_like(r) for r in tables.regrets]
    inst = [np.zeros_like(r) for r in tables.regrets]
    roots = [np.zeros(r.shape[0]) for r in tables.regrets]
    trace = ConvergenceTrace()
    t0 = time.perf_counter()
    a, b, gm = params.alpha, params.beta, params.gamma
    last = tables.iteration + params.max_iters
    for t in range(tables.iteration + 1, last + 1):
        for p in range(2):
            parent, start, end = arrs[p]
            kb.regret_match(tables.regrets[p], start, end, sigma[p])
            kb.sequence_form(sigma[p], parent, start, end, x[p])
        g = _gradients(op, payoff, x[0], x[1])
        pos_f = t ** a / (t ** a + 1.0)
        neg_f = t ** b / (t ** b + 1.0)
        keep = ((t - 1) / t) ** gm
        for p in range(2):
            parent, start, end = arrs[p]
            kb.cf_regrets(np.ascontiguousarray(g[p]), sigma[p], parent, start, end, inst[p], roots[p])
            R = tables.regrets[p]
            R += inst[p]
            R *= np.where(R > 0, pos_f, neg_f)
            S = tables.strategy_sum[p]
            S *= keep
            S += x[p]
        tables.weight = tables.weight * keep + 1.0
        tables.iteration = t
        if t % params.checkpoint == 0 or t == last:
            ex = exploitability(payoff, op, tables.average(), backend=kb, check=False)
            trace.append(t, time.perf_counter() - t0, ex)
            if params.target_exploitability is not None and ex <= params.target_exploitability:
                break
    log.debug("dcfr stopped after %d iterations", tables.iteration)
    return SolveResult(tables.average(), trace)


# ------------------------------------------------------------- best responses

def check_strategy(payoff: KronPayoff, player: int, strategy: np.ndarray, tol: float = CONSTRAINT_TOL) -> np.ndarray:
    """Validate a sequence-form strategy and return it as a (hands, sequences) array."""
    p = _check_player(player)
    m = payoff.hand_counts[p - 1]
    n = payoff.n1 if p == 1 else payoff.n2
    X = np.asarray(strategy, dtype=float)
    if X.size != m * n:
        raise InvalidInputError(f"player {p} strategy must have {m * n} entries, got {X.size}")
    X = X.reshape(m, n)
    if not np.isfinite(X).all() or X.min(initial=0.0) < -tol:
        raise InvalidInputError(f"player {p} strategy has negative or non-finite entries")
    F, f = sequence_constraints(payoff.skeleton, p - 1, m)
    resid = np.abs(F @ np.concatenate([[1.0], X.ravel()]) - f).max()
    if resid > tol:
        raise InvalidInputError(f"player {p} strategy violates its sequence constraints by {resid:.3g}")
    return X


def best_response(payoff: KronPayoff, s, player: int, opponent_strategy: np.ndarray, backend=None,
                  check: bool = True) -> tuple[float, np.ndarray]:
    """Best-response value for ``player`` and a pure sequence-form best response."""
    p = _check_player(player)
    kb = backend or kernels.BACKEND
    op = make_operator(payoff, s, kb)
    opp = 2 if p == 1 else 1
    Y = check_strategy(payoff, opp, opponent_strategy) if check else np.asarray(opponent_strategy, float)
    if p == 1:
        g = op.matvec(Y.ravel()).reshape(payoff.hand_counts[0], payoff.n1)
    else:
        g = -op.rmatvec(Y.ravel()).reshape(payoff.hand_counts[1], payoff.n2)
    tree = payoff.skeleton.trees[p - 1]
    root, choice = _br_root(kb, g, tree)
    return float(root.sum()), _pure_from_choice(tree, choice)


def best_response_value(payoff: KronPayoff, s, player: int, opponent_strategy: np.ndarray,
                        backend=None, check: bool = True) -> float:
    return best_response(payoff, s, player, opponent_strategy, backend, check)[0]


def exploitability(payoff: KronPayoff, s, profile: StrategyProfile, backend=None, check: bool = True) -> float:
    """Average best-response gain of the two players, as a fraction of the initial pot."""
    kb = backend or kernels.BACKEND
    op = make_operator(payoff, s, kb)
    br1 = best_response_value(payoff, op, 1, profile.x2, kb, check)
    br2 = best_response_value(payoff, op, 2, profile.x1, kb, check)
    return (br1 + br2) / 2.0 / payoff.pot


def profile_value(payoff: KronPayoff, s, profile: StrategyProfile) -> float:
    """Expected payoff of Player 1 under the profile."""
    op = make_operator(payoff, s)
    return float(profile.x1.ravel() @ op.matvec(profile.x2.ravel()))


# ------------------------------------------------------------ determinism

def pure_plans(tree: PlayerTree) -> np.ndarray:
    """Distinct pure sequence-form vectors of one hand (unreached infosets do not branch)."""
    plans = []

    def walk(i: int, x: np.ndarray) -> None:
        if i == tree.n_isets:
            plans.append(x.copy())
            return
        p = tree.iset_parent[i]
        if p >= 0 and x[p] == 0:
            walk(i + 1, x)
            return
        for s in range(tree.iset_start[i], tree.iset_end[i]):
            x[s] = 1.0
            walk(i + 1, x)
            x[s] = 0.0

    walk(0, np.zeros(tree.n_seqs))
    return np.array(plans).reshape(len(plans), tree.n_seqs)


def behavioral_count(payoff: KronPayoff, player: int) -> int:
    """Number of deterministic behavioral strategies: product of action counts over (hand, infoset)."""
    p = _check_player(player)
    counts = payoff.skeleton.trees[p - 1].action_counts
    per_hand = int(np.prod(counts.astype(object))) if len(counts) else 1
    return per_hand ** payoff.hand_counts[p - 1]


def enumerate_deterministic_optimum(payoff: KronPayoff, player: int, s=None, guard: int = ENUMERATION_GUARD,
                                    backend=None, batch: int = 4096) -> tuple[float, np.ndarray]:
    """Best value ``player`` can guarantee with a deterministic strategy, and one such strategy.

    Every pure plan of every hand is combined exhaustively and scored by the
    opponent's exact best response.
    """
    p = _check_player(player)
    total = behavioral_count(payoff, p)
    if total > guard:
        raise SizeGuardError(f"{total} deterministic strategies exceed the guard of {guard}")
    kb = backend or kernels.BACKEND
    op = make_operator(payoff, s, kb)
    tree = payoff.skeleton.trees[p - 1]
    opp_tree = payoff.skeleton.trees[2 - p]
    H = payoff.hand_counts[p - 1]
    Ho = payoff.hand_counts[2 - p]
    n, no = tree.n_seqs, opp_tree.n_seqs
    plans = pure_plans(tree)
    K = len(plans)
    # opponent gradient contributed by hand h playing plan k
    contrib = np.zeros((H, K, Ho * no))
    for h in range(H):
        for k in range(K):
            vec = np.zeros(H * n)
            vec[h * n:(h + 1) * n] = plans[k]
            contrib[h, k] = -op.rmatvec(vec) if p == 1 else op.matvec(vec)
    count = K ** H
    best_val, best_idx = -np.inf, None
    for lo in range(0, count, batch):
        ids = np.arange(lo, min(lo + batch, count))
        digits = np.array(np.unravel_index(ids, (K,) * H)).T if H else np.zeros((len(ids), 0), int)
        G = np.zeros((len(ids), Ho * no))
        for h in range(H):
            G += contrib[h, digits[:, h]]
        root, _ = _br_root(kb, G.reshape(len(ids) * Ho, no), opp_tree)
        vals = -root.reshape(len(ids), Ho).sum(axis=1)
        j = int(np.argmax(vals))
        if vals[j] > best_val:
            best_val, best_idx = float(vals[j]), digits[j]
    X = plans[best_idx] if H else np.zeros((0, n))
    return best_val, np.asarray(X).reshape(H, n)


def price_of_determinism(mixed_value: float, det_value: float, pot_size: float) -> float:
    if not pot_size > 0:
        raise InvalidInputError("pot size must be positive")
    return (mixed_value - det_value) / pot_size


def game_value_lp(payoff: KronPayoff, player: int = 1, s: Optional[Sparsification] = None) -> tuple[float, np.ndarray]:
    """Exact game value for ``player`` from the sequence-form LP (small instances)."""
    from .export import build_lp_model, solve_lp_model

    model = build_lp_model(payoff, s, player)
    value, z = solve_lp_model(model)
    nx = model.block_sizes["x"]
    p = _check_player(player)
    X = z[1:nx].reshape(payoff.hand_counts[p - 1], payoff.n1 if p == 1 else payoff.n2)
    return value, X
