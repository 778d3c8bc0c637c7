"""Random river instances for tests, benchmarks and the ``check`` command."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .cards import Board, Card, all_hands, standard_deck
from .errors import DegenerateBeliefsError
from .kron import RiverInstance, assemble
from .skeleton import BettingConfig, fig1_config

RANKS_HIGH = "AKQJT98765432"


def top_rank_deck(n_ranks: int) -> list[Card]:
    """Deck made of the ``n_ranks`` highest ranks in all four suits."""
    return [c for c in standard_deck() if c.rank > 14 - n_ranks]


def random_deck(rng: np.random.Generator, n_cards: int) -> list[Card]:
    deck = standard_deck()
    idx = rng.choice(len(deck), size=n_cards, replace=False)
    return sorted(deck[i] for i in idx)


def random_instance(rng: np.random.Generator, deck: Optional[Sequence[Card]] = None,
                    n_hands: int | tuple[int, int] = 8, config: Optional[BettingConfig] = None,
                    uniform: bool = False, board: Optional[Board] = None,
                    zero_fraction: float = 0.0, max_tries: int = 50) -> RiverInstance:
    """Board, hand subsets and beliefs drawn at random from ``deck``.

    ``zero_fraction`` of the hands (at least one when positive) get zero weight.
    """
    deck = list(deck) if deck is not None else standard_deck()
    config = config or fig1_config()
    counts = (n_hands, n_hands) if isinstance(n_hands, int) else tuple(n_hands)
    for _ in range(max_tries):
        b = board
        if b is None:
            pick = rng.choice(len(deck), size=5, replace=False)
            b = Board(tuple(deck[i] for i in sorted(pick)))
        rest = [c for c in deck if c not in b]
        pool = all_hands(rest)
        beliefs = []
        for cnt in counts:
            take = min(cnt, len(pool))
            chosen = [pool[i] for i in sorted(rng.choice(len(pool), size=take, replace=False))]
            w = np.full(take, 1.0 / take) if uniform else rng.random(take)
            if zero_fraction > 0:
                nz = max(1, int(round(zero_fraction * take)))
                w[rng.choice(take, size=min(nz, take - 1), replace=False)] = 0.0
            beliefs.append(dict(zip(chosen, w.tolist())))
        inst = RiverInstance.from_beliefs(b, beliefs[0], beliefs[1], config, deck=deck)
        try:
            assemble(inst)
        except DegenerateBeliefsError:
            continue
        return inst
    raise DegenerateBeliefsError("could not draw an instance with compatible belief mass")


def full_range_instance(deck: Sequence[Card], board: Board, config: BettingConfig,
                        weights: str = "uniform", rng: Optional[np.random.Generator] = None) -> RiverInstance:
    """Every hand left in the deck for both players."""
    rest = [c for c in deck if c not in board]
    hands = all_hands(rest)
    if weights == "uniform":
        w = np.full(len(hands), 1.0 / len(hands))
        w1 = w2 = w
    else:
        rng = rng or np.random.default_rng(0)
        w1, w2 = rng.random(len(hands)), rng.random(len(hands))
    return RiverInstance.from_beliefs(board, dict(zip(hands, w1.tolist())), dict(zip(hands, w2.tolist())),
                                      config, deck=list(deck))
