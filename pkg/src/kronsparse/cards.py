"""Cards, hands, boards and seven-card hand ranking.

Hand strength is a packed integer: the category sits in the high bits and up to
five kicker ranks follow in 4-bit slots, so plain integer comparison gives the
standard poker ordering. Only the ordering is meaningful.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import InvalidInputError

RANK_CHARS = "23456789TJQKA"
SUIT_CHARS = "cdhs"

HIGH_CARD, PAIR, TWO_PAIR, TRIPS, STRAIGHT, FLUSH, FULL_HOUSE, QUADS, STRAIGHT_FLUSH = range(9)
CATEGORY_NAMES = (
    "high card", "pair", "two pair", "three of a kind", "straight",
    "flush", "full house", "four of a kind", "straight flush",
)


@dataclass(frozen=True, order=True)
class Card:
    rank: int
    suit: int

    def __post_init__(self):
        if not 2 <= self.rank <= 14 or not 0 <= self.suit <= 3:
            raise InvalidInputError(f"card out of range: rank={self.rank} suit={self.suit}")

    @classmethod
    def parse(cls, code: str) -> "Card":
        if len(code) != 2 or code[0] not in RANK_CHARS or code[1] not in SUIT_CHARS:
            raise InvalidInputError(f"unknown card code {code!r}")
        return cls(RANK_CHARS.index(code[0]) + 2, SUIT_CHARS.index(code[1]))

    @property
    def code(self) -> str:
        return RANK_CHARS[self.rank - 2] + SUIT_CHARS[self.suit]

    def __str__(self):
        return self.code

    def __repr__(self):
        return f"Card({self.code})"


@dataclass(frozen=True)
class Hand:
    """Two distinct hole cards, higher card first."""

    first: Card
    second: Card

    def __post_init__(self):
        if self.first == self.second:
            raise InvalidInputError(f"hand repeats card {self.first}")
        if self.first < self.second:
            a, b = self.second, self.first
            object.__setattr__(self, "first", a)
            object.__setattr__(self, "second", b)

    @classmethod
    def parse(cls, code: str) -> "Hand":
        code = code.strip()
        if len(code) != 4:
            raise InvalidInputError(f"bad hand code {code!r}")
        return cls(Card.parse(code[:2]), Card.parse(code[2:]))

    @property
    def cards(self) -> tuple[Card, Card]:
        return (self.first, self.second)

    @property
    def code(self) -> str:
        return self.first.code + self.second.code

    def shares_card(self, other: "Hand") -> bool:
        return bool(set(self.cards) & set(other.cards))

    def __str__(self):
        return self.code

    def __repr__(self):
        return f"Hand({self.code})"


@dataclass(frozen=True)
class Board:
    cards: tuple[Card, ...]

    def __post_init__(self):
        cards = tuple(self.cards)
        if len(cards) != 5:
            raise InvalidInputError(f"board needs 5 cards, got {len(cards)}")
        if len(set(cards)) != 5:
            raise InvalidInputError("board repeats a card")
        object.__setattr__(self, "cards", cards)

    @classmethod
    def parse(cls, codes: str | Sequence[str]) -> "Board":
        if isinstance(codes, str):
            s = codes.replace(" ", "")
            codes = [s[i:i + 2] for i in range(0, len(s), 2)]
        return cls(tuple(Card.parse(c) for c in codes))

    @property
    def code(self) -> str:
        return "".join(c.code for c in self.cards)

    def __contains__(self, card: Card) -> bool:
        return card in self.cards

    def __str__(self):
        return self.code


def standard_deck() -> list[Card]:
    return [Card(r, s) for r in range(2, 15) for s in range(4)]


def parse_cards(codes: Iterable[str]) -> list[Card]:
    return [Card.parse(c) for c in codes]


def _check_disjoint(hand: Hand, board: Board) -> None:
    if hand.first in board or hand.second in board:
        raise InvalidInputError(f"hand {hand} overlaps board {board}")


def _pack(category: int, kickers: Sequence[int]) -> int:
    key = category
    for i in range(5):
        key = (key << 4) | (kickers[i] if i < len(kickers) else 0)
    return key


def _straight_top(ranks: set[int]) -> int:
    """Top rank of the best straight in ``ranks``, 0 if there is none."""
    for top in range(14, 5, -1):
        if all(r in ranks for r in range(top - 4, top + 1)):
            return top
    if {14, 2, 3, 4, 5} <= ranks:
        return 5
    return 0


def rank_cards(cards: Sequence[Card]) -> int:
    """Best five-card strength key among ``cards`` (at least five of them)."""
    if len(cards) < 5:
        raise InvalidInputError("need at least five cards")
    by_suit: dict[int, list[int]] = {}
    counts: dict[int, int] = {}
    for c in cards:
        by_suit.setdefault(c.suit, []).append(c.rank)
        counts[c.rank] = counts.get(c.rank, 0) + 1

    flush_ranks = None
    for ranks in by_suit.values():
        if len(ranks) >= 5:
            flush_ranks = sorted(ranks, reverse=True)
    if flush_ranks is not None:
        top = _straight_top(set(flush_ranks))
        if top:
            return _pack(STRAIGHT_FLUSH, [top])

    # ranks ordered by (multiplicity, rank), strongest group first
    groups = sorted(counts.items(), key=lambda kv: (kv[1], kv[0]), reverse=True)
    if groups[0][1] == 4:
        quad = groups[0][0]
        kicker = max(r for r in counts if r != quad)
        return _pack(QUADS, [quad, kicker])
    if groups[0][1] == 3:
        trips = groups[0][0]
        pairs = [r for r, n in groups[1:] if n >= 2]
        if pairs:
            return _pack(FULL_HOUSE, [trips, max(pairs)])
    if flush_ranks is not None:
        return _pack(FLUSH, flush_ranks[:5])
    top = _straight_top(set(counts))
    if top:
        return _pack(STRAIGHT, [top])
    if groups[0][1] == 3:
        trips = groups[0][0]
        rest = sorted((r for r in counts if r != trips), reverse=True)
        return _pack(TRIPS, [trips] + rest[:2])
    pairs = sorted((r for r, n in counts.items() if n == 2), reverse=True)
    if len(pairs) >= 2:
        hi, lo = pairs[:2]
        kicker = max(r for r in counts if r not in (hi, lo))
        return _pack(TWO_PAIR, [hi, lo, kicker])
    if pairs:
        rest = sorted((r for r in counts if r != pairs[0]), reverse=True)
        return _pack(PAIR, [pairs[0]] + rest[:3])
    return _pack(HIGH_CARD, sorted(counts, reverse=True)[:5])


def category(key: int) -> int:
    return key >> 20


def evaluate7(hand: Hand, board: Board) -> int:
    _check_disjoint(hand, board)
    return rank_cards(hand.cards + board.cards)


def compatible(h1: Hand, h2: Hand, board: Board) -> bool:
    """True iff the two hands and the board use nine distinct cards."""
    _check_disjoint(h1, board)
    _check_disjoint(h2, board)
    return not h1.shares_card(h2)


def gamma(h1: Hand, h2: Hand, board: Board) -> int:
    """Showdown outcome for the first hand: +1 win, -1 loss, 0 tie or incompatible."""
    if not compatible(h1, h2, board):
        return 0
    k1, k2 = evaluate7(h1, board), evaluate7(h2, board)
    return (k1 > k2) - (k1 < k2)


def all_hands(cards: Iterable[Card]) -> list[Hand]:
    return [Hand(a, b) for a, b in itertools.combinations(sorted(cards), 2)]
