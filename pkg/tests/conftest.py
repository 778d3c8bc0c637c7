import numpy as np
import pytest

from kronsparse import bundled_path, kernels, read_instance
from kronsparse.kron import assemble
from kronsparse.synthetic import random_deck, random_instance

BACKENDS = kernels.available_backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    return kernels.get_backend(request.param)


def make_corpus(count, seed, max_hands=12, deck_size=(12, 20)):
    """Random instances on small decks, the fig1 skeleton, random beliefs."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        deck = random_deck(rng, int(rng.integers(deck_size[0], deck_size[1] + 1)))
        hands = (int(rng.integers(1, max_hands + 1)), int(rng.integers(1, max_hands + 1)))
        out.append(assemble(random_instance(rng, deck=deck, n_hands=hands)))
    return out


@pytest.fixture(scope="session")
def corpus():
    return make_corpus(12, seed=11, max_hands=8)


@pytest.fixture(scope="session")
def bundled():
    return {name: assemble(read_instance(bundled_path(name))) for name in ("fig1", "bluff", "alltie")}


@pytest.fixture(scope="session")
def river20():
    return assemble(read_instance(bundled_path("river20")))


# Acceptance criteria record one verdict line each; they are printed after the run.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
