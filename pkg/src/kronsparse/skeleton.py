"""Betting-round tree ("skeleton") of a river endgame.

Player 1 is the small blind and acts first. Sequences of each player are
numbered 0..n-1 in the order their decision nodes are created (depth first),
with the actions of one decision node occupying a contiguous id range. The
empty sequence is not numbered; parent links use -1 for it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, InvalidInputError

CONTEXTS = ("first_action", "facing_check", "facing_bet", "after_one_raise", "after_multiple_raises")
MONEY_TOL = 1e-6


def _menu_tuple(menu: Mapping[str, Sequence[float]] | None) -> dict[str, tuple[float, ...]]:
    menu = dict(menu or {})
    unknown = set(menu) - set(CONTEXTS)
    if unknown:
        raise InvalidInputError(f"unknown betting contexts: {sorted(unknown)}")
    out = {}
    for ctx in CONTEXTS:
        fracs = tuple(float(f) for f in menu.get(ctx, ()))
        if any(f <= 0 for f in fracs):
            raise InvalidInputError(f"bet fractions must be positive in {ctx}: {fracs}")
        out[ctx] = fracs
    return out


@dataclass(frozen=True)
class BettingConfig:
    stacks: tuple[float, float]
    pot_contribution: float
    menus: tuple[dict, dict]
    all_in: bool = True
    raise_cap: Optional[int] = None

    def __post_init__(self):
        stacks = tuple(float(s) for s in self.stacks)
        if len(stacks) != 2 or min(stacks) <= 0:
            raise InvalidInputError(f"stacks must be two positive amounts, got {self.stacks}")
        if not self.pot_contribution > 0:
            raise InvalidInputError("pot contribution must be positive")
        if self.raise_cap is not None and self.raise_cap < 0:
            raise InvalidInputError("raise cap must be nonnegative")
        object.__setattr__(self, "stacks", stacks)
        object.__setattr__(self, "pot_contribution", float(self.pot_contribution))
        object.__setattr__(self, "menus", tuple(_menu_tuple(m) for m in self.menus))
        if len(self.menus) != 2:
            raise InvalidInputError("need one bet menu per player")

    @classmethod
    def uniform(cls, pot_contribution: float, stack: float, fractions: Sequence[float],
                all_in: bool = True, raise_cap: Optional[int] = None) -> "BettingConfig":
        """Same fraction list in every context for both players."""
        menu = {ctx: tuple(fractions) for ctx in CONTEXTS}
        return cls((stack, stack), pot_contribution, (menu, dict(menu)), all_in, raise_cap)

    @property
    def max_contribution(self) -> float:
        # nobody can put in more than the shorter stack allows
        return self.pot_contribution + min(self.stacks)

    def to_dict(self) -> dict:
        return {
            "stacks": list(self.stacks),
            "pot_contribution": self.pot_contribution,
            "menus": [{k: list(v) for k, v in m.items() if v} for m in self.menus],
            "all_in": self.all_in,
            "raise_cap": self.raise_cap,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "BettingConfig":
        return cls(tuple(d["stacks"]), d["pot_contribution"], tuple(d["menus"]),
                   bool(d.get("all_in", True)), d.get("raise_cap"))


def fig1_config() -> BettingConfig:
    """Single 3/4-pot bet size plus all-in, $1875 in the pot each, $18125 behind."""
    return BettingConfig.uniform(1875.0, 18125.0, [0.75], all_in=True)


def libratus_config(pot_contribution: float, stack: float) -> BettingConfig:
    ai = {
        "first_action": (0.25, 0.5, 1, 2, 4, 8),
        "facing_check": (0.25, 0.5, 1, 2, 4, 8),
        "facing_bet": (0.4, 0.7, 1.1, 2),
        "after_one_raise": (0.4, 0.7, 2),
        "after_multiple_raises": (0.7,),
    }
    opponent = {
        "first_action": (0.35, 0.65, 1),
        "facing_check": (0.5, 0.75, 1),
        "facing_bet": (0.7, 1.1),
        "after_one_raise": (0.7,),
        "after_multiple_raises": (0.7,),
    }
    return BettingConfig((stack, stack), pot_contribution, (ai, opponent), all_in=True)


@dataclass(frozen=True)
class Action:
    label: str            # fold / check / call / bet / raise / allin
    target: float         # acting player's contribution after the action


@dataclass
class DecisionNode:
    player: int           # 0 or 1
    contributions: tuple[float, float]
    context: str
    actions: list[Action]
    children: list[tuple[str, int]] = field(default_factory=list)   # ("node"|"terminal", index)
    first_seq: int = 0
    parent_seq: int = -1
    history: tuple[str, ...] = ()


@dataclass(frozen=True)
class Terminal:
    kind: str             # "fold" or "showdown"
    folder: int           # -1 for showdowns
    contributions: tuple[float, float]
    seqs: tuple[int, int]
    history: tuple[str, ...]


@dataclass(frozen=True)
class PlayerTree:
    """Per-player infoset layout used by the solver kernels."""

    n_seqs: int
    iset_parent: np.ndarray   # parent sequence per infoset, -1 for the empty sequence
    iset_start: np.ndarray
    iset_end: np.ndarray
    seq_parent: np.ndarray    # parent sequence of each sequence
    seq_iset: np.ndarray

    @property
    def n_isets(self) -> int:
        return len(self.iset_start)

    @property
    def action_counts(self) -> np.ndarray:
        return self.iset_end - self.iset_start


@dataclass
class Skeleton:
    config: BettingConfig
    nodes: list[DecisionNode]
    terminals: list[Terminal]
    n_seqs: tuple[int, int]
    trees: tuple[PlayerTree, PlayerTree]

    @property
    def n1(self) -> int:
        return self.n_seqs[0]

    @property
    def n2(self) -> int:
        return self.n_seqs[1]

    def decision_nodes(self, player: int) -> list[DecisionNode]:
        return [nd for nd in self.nodes if nd.player == player]

    def summary(self) -> dict:
        folds = sum(t.kind == "fold" for t in self.terminals)
        return {
            "decision_nodes": [len(self.decision_nodes(0)), len(self.decision_nodes(1))],
            "sequences": list(self.n_seqs),
            "terminals": len(self.terminals),
            "fold_terminals": folds,
            "showdown_terminals": len(self.terminals) - folds,
        }


def _context(aggressions: int, history: tuple[str, ...]) -> str:
    if aggressions == 0:
        return "first_action" if not history else "facing_check"
    return ("facing_bet", "after_one_raise")[aggressions - 1] if aggressions <= 2 else "after_multiple_raises"


def _legal_actions(config: BettingConfig, player: int, contrib: tuple[float, float],
                   aggressions: int, history: tuple[str, ...]) -> tuple[str, list[Action]]:
    own, opp = contrib[player], contrib[1 - player]
    cap = config.max_contribution
    ctx = _context(aggressions, history)
    menu = config.menus[player][ctx]
    facing = own < opp - MONEY_TOL
    actions: list[Action] = []
    if facing:
        actions.append(Action("fold", own))
        actions.append(Action("call", opp))
        raises_so_far = max(aggressions - 1, 0)
        may_raise = opp < cap - MONEY_TOL and (config.raise_cap is None or raises_so_far < config.raise_cap)
    else:
        actions.append(Action("check", own))
        may_raise = opp < cap - MONEY_TOL
    if may_raise:
        # the amount is a fraction of the pot after matching the opponent
        targets = [min(opp + f * 2 * opp, cap) for f in menu]
        if config.all_in:
            targets.append(cap)
        kept: list[float] = []
        for t in sorted(targets):
            if t <= opp + MONEY_TOL:
                continue
            if kept and abs(t - kept[-1]) <= MONEY_TOL:
                continue
            kept.append(t)
        for t in kept:
            if abs(t - cap) <= MONEY_TOL:
                label = "allin"
            else:
                label = "raise" if facing or aggressions > 0 else "bet"
            actions.append(Action(label, t))
    if not actions:
        raise ContractError("empty action set")
    return ctx, actions


def build_skeleton(config: BettingConfig, max_nodes: int = 1_000_000) -> Skeleton:
    nodes: list[DecisionNode] = []
    terminals: list[Terminal] = []
    counters = [0, 0]
    # last sequence of each player on the path; -1 is the empty sequence
    c0 = config.pot_contribution

    def visit(player, contrib, aggressions, history, last_seq) -> tuple[str, int]:
        if len(nodes) >= max_nodes:
            raise ContractError("skeleton exceeds node budget")
        ctx, actions = _legal_actions(config, player, contrib, aggressions, history)
        node = DecisionNode(player, contrib, ctx, actions, first_seq=counters[player],
                            parent_seq=last_seq[player], history=history)
        counters[player] += len(actions)
        idx = len(nodes)
        nodes.append(node)
        for k, act in enumerate(actions):
            seq = node.first_seq + k
            seqs = list(last_seq)
            seqs[player] = seq
            seqs = tuple(seqs)
            new_contrib = list(contrib)
            new_contrib[player] = act.target
            new_contrib = tuple(new_contrib)
            h = history + (act.label,)
            if act.label == "fold":
                child = _terminal("fold", player, contrib, seqs, h)
            elif act.label == "call" or (act.label == "check" and history and history[-1] == "check"):
                child = _terminal("showdown", -1, new_contrib, seqs, h)
            elif act.label == "check":
                child = visit(1 - player, new_contrib, aggressions, h, seqs)
            else:
                child = visit(1 - player, new_contrib, aggressions + 1, h, seqs)
            node.children.append(child)
        return ("node", idx)

    def _terminal(kind, folder, contrib, seqs, h):
        if min(seqs) < 0:
            raise ContractError(f"terminal {h} reached without both players acting")
        terminals.append(Terminal(kind, folder, tuple(contrib), seqs, h))
        return ("terminal", len(terminals) - 1)

    visit(0, (c0, c0), 0, (), (-1, -1))
    trees = tuple(_player_tree(nodes, p, counters[p]) for p in (0, 1))
    sk = Skeleton(config, nodes, terminals, (counters[0], counters[1]), trees)
    _validate(sk)
    return sk


def _player_tree(nodes: list[DecisionNode], player: int, n: int) -> PlayerTree:
    own = [nd for nd in nodes if nd.player == player]
    parent = np.array([nd.parent_seq for nd in own], dtype=np.int64)
    start = np.array([nd.first_seq for nd in own], dtype=np.int64)
    end = start + np.array([len(nd.actions) for nd in own], dtype=np.int64)
    seq_parent = np.empty(n, dtype=np.int64)
    seq_iset = np.empty(n, dtype=np.int64)
    for i, nd in enumerate(own):
        seq_parent[start[i]:end[i]] = nd.parent_seq
        seq_iset[start[i]:end[i]] = i
    return PlayerTree(n, parent, start, end, seq_parent, seq_iset)


def _validate(sk: Skeleton) -> None:
    cap = sk.config.max_contribution
    seen = set()
    for t in sk.terminals:
        if t.kind == "showdown" and abs(t.contributions[0] - t.contributions[1]) > MONEY_TOL:
            raise ContractError(f"unequal showdown contributions at {t.history}")
        if max(t.contributions) > cap + MONEY_TOL:
            raise ContractError(f"contribution above stack at {t.history}")
        if t.seqs in seen:
            raise ContractError(f"two terminals share sequence pair {t.seqs}")
        seen.add(t.seqs)
    for tree in sk.trees:
        # parents must precede children so a single forward pass is top-down
        for i in range(tree.n_isets):
            p = tree.iset_parent[i]
            if p >= 0 and tree.seq_iset[p] >= i:
                raise ContractError("infosets are not topologically ordered")


@dataclass(frozen=True)
class PayoffComponents:
    F: sp.csr_matrix
    S: sp.csr_matrix


def payoff_components(sk: Skeleton) -> PayoffComponents:
    n1, n2 = sk.n_seqs
    fr, fc, fv, sr, sc, sv = [], [], [], [], [], []
    for t in sk.terminals:
        q1, q2 = t.contributions
        if t.kind == "fold":
            fr.append(t.seqs[0]); fc.append(t.seqs[1])
            fv.append(q2 if t.folder == 1 else -q1)
        else:
            sr.append(t.seqs[0]); sc.append(t.seqs[1]); sv.append(q1)
    F = sp.csr_matrix((fv, (fr, fc)), shape=(n1, n2), dtype=float)
    S = sp.csr_matrix((sv, (sr, sc)), shape=(n1, n2), dtype=float)
    return PayoffComponents(F, S)


def sequence_constraints(sk: Skeleton, player: int, hand_count: int) -> tuple[sp.csr_matrix, np.ndarray]:
    """Flow constraints ``F x = f`` of the full treeplex for one player.

    Column 0 is the empty sequence; sequence ``s`` of hand ``h`` sits in column
    ``1 + h * n + s``. Row 0 pins the empty sequence to one; every (hand,
    infoset) row says that the infoset's action masses sum to its parent's.
    """
    if hand_count < 1:
        raise InvalidInputError("hand_count must be at least 1")
    tree = sk.trees[player]
    n, m = tree.n_seqs, tree.n_isets
    rows, cols, vals = [0], [0], [1.0]
    for h in range(hand_count):
        for i in range(m):
            r = 1 + h * m + i
            for s in range(tree.iset_start[i], tree.iset_end[i]):
                rows.append(r); cols.append(1 + h * n + s); vals.append(1.0)
            p = tree.iset_parent[i]
            rows.append(r); cols.append(0 if p < 0 else 1 + h * n + p); vals.append(-1.0)
    Fm = sp.csr_matrix((vals, (rows, cols)), shape=(1 + hand_count * m, 1 + hand_count * n))
    f = np.zeros(1 + hand_count * m)
    f[0] = 1.0
    return Fm, f


def contribution_table(sk: Skeleton) -> list[tuple[tuple[str, ...], str, float, float]]:
    return [(t.history, t.kind, t.contributions[0], t.contributions[1]) for t in sk.terminals]
