import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from kronsparse.cards import (Board, Card, Hand, all_hands, category, compatible, evaluate7, gamma,
                              parse_cards, rank_cards, standard_deck, STRAIGHT, STRAIGHT_FLUSH, FLUSH,
                              HIGH_CARD, PAIR)
from kronsparse.errors import InvalidInputError


def oracle5(cards):
    """Plain-rules five-card ranker, written without reference to the packed keys."""
    ranks = sorted((c.rank for c in cards), reverse=True)
    flush = len({c.suit for c in cards}) == 1
    uniq = sorted(set(ranks), reverse=True)
    straight_top = None
    if len(uniq) == 5:
        if uniq[0] - uniq[4] == 4:
            straight_top = uniq[0]
        elif uniq == [14, 5, 4, 3, 2]:
            straight_top = 5
    groups = sorted(((ranks.count(r), r) for r in uniq), reverse=True)
    shape = [g[0] for g in groups]
    order = [g[1] for g in groups]
    if straight_top and flush:
        return (8, [straight_top])
    if shape == [4, 1]:
        return (7, order)
    if shape == [3, 2]:
        return (6, order)
    if flush:
        return (5, ranks)
    if straight_top:
        return (4, [straight_top])
    if shape == [3, 1, 1]:
        return (3, order)
    if shape == [2, 2, 1]:
        return (2, order)
    if shape == [2, 1, 1, 1]:
        return (1, order)
    return (0, ranks)


def oracle7(cards):
    return max(oracle5(sub) for sub in itertools.combinations(cards, 5))


def _cmp(a, b):
    return (a > b) - (a < b)


def test_random_draws_match_subset_oracle():
    rng = random.Random(2024)
    deck = standard_deck()
    draws = []
    for _ in range(10_000):
        seven = rng.sample(deck, 7)
        hand, board = Hand(seven[0], seven[1]), Board(tuple(seven[2:]))
        key = evaluate7(hand, board)
        ref = oracle7(seven)
        assert category(key) == ref[0]
        draws.append((key, ref))
    # ordering between consecutive draws must agree
    for (k1, r1), (k2, r2) in zip(draws, draws[1:]):
        assert _cmp(k1, k2) == _cmp(r1, r2)


def test_same_board_pairs_match_oracle():
    # Same-board comparisons stress kicker logic much harder than independent draws.
    rng = random.Random(7)
    deck = standard_deck()
    for _ in range(500):
        cards = rng.sample(deck, 9)
        board = Board(tuple(cards[:5]))
        h1, h2 = Hand(cards[5], cards[6]), Hand(cards[7], cards[8])
        got = _cmp(evaluate7(h1, board), evaluate7(h2, board))
        want = _cmp(oracle7(list(h1.cards) + list(board.cards)), oracle7(list(h2.cards) + list(board.cards)))
        assert got == want


def test_aces_beat_kings():
    board = Board.parse("2c7d9hJc3s")
    assert evaluate7(Hand.parse("AsAh"), board) > evaluate7(Hand.parse("KsKh"), board)


def test_board_plays_for_both():
    board = Board.parse("AsKsQsJsTs")
    assert evaluate7(Hand.parse("2c3d"), board) == evaluate7(Hand.parse("7h7d"), board)
    assert category(evaluate7(Hand.parse("2c3d"), board)) == STRAIGHT_FLUSH


def test_wheel_is_lowest_straight():
    wheel = rank_cards(parse_cards(["Ac", "2d", "3h", "4s", "5c"]))
    six_high = rank_cards(parse_cards(["2d", "3h", "4s", "5c", "6d"]))
    assert category(wheel) == STRAIGHT
    assert wheel < six_high
    steel = rank_cards(parse_cards(["Ah", "2h", "3h", "4h", "5h"]))
    assert category(steel) == STRAIGHT_FLUSH
    # A-K-Q-J-9 with no wrap-around is only a high card
    assert category(rank_cards(parse_cards(["Ac", "Kd", "Qh", "Js", "9c"]))) == HIGH_CARD
    assert category(rank_cards(parse_cards(["Qc", "Kd", "Ah", "2s", "3c"]))) == HIGH_CARD


def test_flush_beats_pair_gamma():
    board = Board.parse("2c3c4c8d9s")
    assert gamma(Hand.parse("AcKc"), Hand.parse("AdAh"), board) == 1
    assert gamma(Hand.parse("AdAh"), Hand.parse("AcKc"), board) == -1


def test_gamma_zero_on_shared_card():
    board = Board.parse("2c3c4c8d9s")
    assert gamma(Hand.parse("AcKc"), Hand.parse("AcAh"), board) == 0
    assert not compatible(Hand.parse("AcKc"), Hand.parse("AcAh"), board)
    assert not compatible(Hand.parse("AdKd"), Hand.parse("AdKd"), board)
    assert compatible(Hand.parse("AdKd"), Hand.parse("QhJh"), board)


def test_overlap_with_board_rejected():
    board = Board.parse("2c3c4c8d9s")
    with pytest.raises(InvalidInputError):
        evaluate7(Hand.parse("2cAh"), board)
    with pytest.raises(InvalidInputError):
        compatible(Hand.parse("2cAh"), Hand.parse("KdKh"), board)


@pytest.mark.parametrize("code", ["Zx", "1c", "Ax", "A", "Asd", ""])
def test_unknown_card_code(code):
    with pytest.raises(InvalidInputError):
        Card.parse(code)


def test_parse_round_trip_and_canonical_hand():
    for c in standard_deck():
        assert Card.parse(c.code) == c
    h = Hand.parse("2cAs")
    assert h.code == "As2c"
    assert Hand.parse(h.code) == h
    assert Hand(h.second, h.first) == h
    with pytest.raises(InvalidInputError):
        Hand.parse("AsAs")
    with pytest.raises(InvalidInputError):
        Board.parse("AsAsKdQd2c")
    with pytest.raises(InvalidInputError):
        Board.parse("AsKdQd2c")


def test_all_hands_count():
    assert len(all_hands(standard_deck())) == 1326
    assert len(all_hands(standard_deck()[:20])) == 190


def test_pair_category():
    assert category(evaluate7(Hand.parse("AsAh"), Board.parse("2c7d9hJc3s"))) == PAIR
    assert category(evaluate7(Hand.parse("As8s"), Board.parse("2s7s9hJs3s"))) == FLUSH


seven_cards = st.lists(st.sampled_from(standard_deck()), min_size=7, max_size=7, unique=True)


@settings(max_examples=200, deadline=None)
@given(seven_cards, st.randoms(use_true_random=False))
def test_permutation_invariance(cards, r):
    hand, board = Hand(cards[0], cards[1]), Board(tuple(cards[2:]))
    shuffled = list(board.cards)
    r.shuffle(shuffled)
    assert evaluate7(Hand(cards[1], cards[0]), Board(tuple(shuffled))) == evaluate7(hand, board)
    assert rank_cards(cards) == rank_cards(list(reversed(cards)))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from(standard_deck()), min_size=9, max_size=9, unique=True))
def test_gamma_antisymmetric(cards):
    board = Board(tuple(cards[:5]))
    h1, h2 = Hand(cards[5], cards[6]), Hand(cards[7], cards[8])
    assert gamma(h1, h2, board) == -gamma(h2, h1, board)
    assert gamma(h1, h1, board) == 0
