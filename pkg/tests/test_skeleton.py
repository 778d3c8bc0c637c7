import time

import numpy as np
import pytest

from kronsparse.errors import InvalidInputError
from kronsparse.skeleton import (BettingConfig, CONTEXTS, build_skeleton, contribution_table, fig1_config,
                                 libratus_config, payoff_components, sequence_constraints)

from _golden import FIG1_CONTRIBUTIONS
from _helpers import behavioral_to_sequence


@pytest.fixture(scope="module")
def fig1():
    return build_skeleton(fig1_config())




def test_golden_table(fig1):
    t0 = time.perf_counter()
    sk = build_skeleton(fig1_config())
    assert time.perf_counter() - t0 < 1.0
    table = {h: (q1, q2) for h, _, q1, q2 in contribution_table(sk)}
    assert set(table) == set(FIG1_CONTRIBUTIONS)
    for h, (q1, q2) in FIG1_CONTRIBUTIONS.items():
        assert abs(table[h][0] - q1) <= 0.05 and abs(table[h][1] - q2) <= 0.05, h
    assert sk.n1 == 16 and sk.n2 == 16
    assert len(sk.terminals) == 21


def test_node_after_bet(fig1):
    node = next(nd for nd in fig1.nodes if nd.history == ("bet",))
    assert node.contributions == (4687.5, 1875.0)
    assert node.player == 1


def test_raise_uses_post_call_pot(fig1):
    t = next(t for t in fig1.terminals if t.history == ("bet", "raise", "call"))
    assert t.contributions == (11718.75, 11718.75)


def test_showdown_contributions_equal(fig1):
    for t in fig1.terminals:
        if t.kind == "showdown":
            assert t.contributions[0] == t.contributions[1]


def test_payoff_components(fig1):
    pc = payoff_components(fig1)
    F, S = pc.F.toarray(), pc.S.toarray()
    assert not np.any((F != 0) & (S != 0))
    assert np.count_nonzero(F) + np.count_nonzero(S) == len(fig1.terminals)
    assert np.all(S[S != 0] > 0)
    bet_fold = next(t for t in fig1.terminals if t.history == ("bet", "fold"))
    assert F[bet_fold.seqs] == 1875.0
    check_bet_fold = next(t for t in fig1.terminals if t.history == ("check", "bet", "fold"))
    assert F[check_bet_fold.seqs] == -1875.0
    cc = next(t for t in fig1.terminals if t.history == ("check", "check"))
    assert S[cc.seqs] == 1875.0


def test_empty_menus_check_check():
    cfg = BettingConfig.uniform(10, 100, [], all_in=False)
    sk = build_skeleton(cfg)
    assert sk.n1 == 1 and sk.n2 == 1
    assert [t.kind for t in sk.terminals] == ["showdown"]
    assert sk.terminals[0].history == ("check", "check")


def test_clamped_bets_deduplicate():
    # 10x pot overshoots the stack, so it collapses into the all-in
    sk = build_skeleton(BettingConfig.uniform(1, 5, [10.0], all_in=True))
    root = sk.nodes[0]
    assert [a.label for a in root.actions] == ["check", "allin"]


def test_raise_cap():
    capped = build_skeleton(BettingConfig.uniform(1, 1000, [0.5], all_in=False, raise_cap=1))
    for t in capped.terminals:
        assert sum(1 for a in t.history if a == "raise") <= 1
    free = build_skeleton(BettingConfig.uniform(1, 1000, [0.5], all_in=False))
    assert len(free.terminals) > len(capped.terminals)


def test_contributions_bounded():
    cfg = libratus_config(1000, 9000)
    sk = build_skeleton(cfg)
    for nd in sk.nodes:
        assert max(nd.contributions) <= cfg.max_contribution + 1e-6
    for t in sk.terminals:
        assert max(t.contributions) <= cfg.max_contribution + 1e-6


def test_asymmetric_stacks_cap_at_shorter():
    sk = build_skeleton(BettingConfig((5.0, 20.0), 1.0, ({c: (1.0,) for c in CONTEXTS},) * 2))
    assert max(max(t.contributions) for t in sk.terminals) == 6.0


@pytest.mark.parametrize("kwargs", [
    dict(stacks=(0, 10), pot_contribution=1),
    dict(stacks=(10, 10), pot_contribution=0),
    dict(stacks=(10, 10), pot_contribution=1, fractions=[-0.5]),
])
def test_invalid_config(kwargs):
    fractions = kwargs.pop("fractions", [0.5])
    menu = {c: tuple(fractions) for c in CONTEXTS}
    with pytest.raises(InvalidInputError):
        BettingConfig(kwargs["stacks"], kwargs["pot_contribution"], (menu, menu))


def test_config_dict_round_trip():
    cfg = libratus_config(1875, 18125)
    assert BettingConfig.from_dict(cfg.to_dict()) == cfg


def test_sequence_constraints_single_sequence():
    sk = build_skeleton(BettingConfig.uniform(10, 100, [], all_in=False))
    Fm, f = sequence_constraints(sk, 0, 3)
    assert Fm.shape == (4, 4)
    assert f.tolist() == [1, 0, 0, 0]
    assert set(np.unique(Fm.toarray())) <= {-1.0, 0.0, 1.0}


def test_sequence_constraints_rows(fig1):
    for p in (0, 1):
        Fm, f = sequence_constraints(fig1, p, 5)
        assert Fm.shape[0] == 5 * len(fig1.decision_nodes(p)) + 1
        assert Fm.shape[1] == 5 * fig1.n_seqs[p] + 1
    with pytest.raises(InvalidInputError):
        sequence_constraints(fig1, 0, 0)


@pytest.mark.parametrize("seed", range(5))
def test_behavioral_strategies_satisfy_flow(fig1, seed):
    rng = np.random.default_rng(seed)
    hands = 4
    for p in (0, 1):
        tree = fig1.trees[p]
        blocks = []
        for _ in range(hands):
            probs = np.empty(tree.n_seqs)
            for i in range(tree.n_isets):
                sl = slice(tree.iset_start[i], tree.iset_end[i])
                w = rng.random(sl.stop - sl.start)
                probs[sl] = w / w.sum()
            blocks.append(behavioral_to_sequence(tree, probs))
        x = np.concatenate([[1.0], *blocks])
        Fm, f = sequence_constraints(fig1, p, hands)
        assert np.max(np.abs(Fm @ x - f)) <= 1e-12
