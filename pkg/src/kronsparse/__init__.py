"""Sparse factorizations of Kronecker-structured poker river payoffs, with a DCFR solver.

Typical use::

    inst = read_instance(bundled_path("river20"))
    payoff = assemble(inst)
    s = sparsify(payoff, "b")
    profile, trace = dcfr_solve(payoff, s, DCFRParams(target_exploitability=1e-3))
"""
from importlib import resources
from pathlib import Path

from .cards import Board, Card, Hand, evaluate7, standard_deck
from .engine import FactoredOperator, GradientWorkspace, matvec, matvec_transpose, solve_lower_unit
from .errors import (ContractError, CorruptFileError, DegenerateBeliefsError, DimensionError, InvalidInputError,
                     KronsparseError, ParseError, SizeGuardError)
from .export import (read_instance, read_lp, read_sparsification, write_instance, write_lp, write_milp,
                     write_sparsification)
from .kron import KronOperator, KronPayoff, RiverInstance, assemble, dense_expand, pi
from .skeleton import BettingConfig, Skeleton, build_skeleton, fig1_config, sequence_constraints
from .solver import (ConvergenceTrace, DCFRParams, StrategyProfile, best_response_value, dcfr_solve,
                     enumerate_deterministic_optimum, exploitability, price_of_determinism)
from .sparsify import Sparsification, WFactorization, postprocess, size, sparsify, sparsify_w, technique_a, technique_b

BUNDLED = ("fig1", "river20", "bluff", "alltie")


def bundled_path(name: str) -> Path:
    """Path of one of the example instances shipped with the package."""
    if name not in BUNDLED:
        raise InvalidInputError(f"unknown bundled instance {name!r}; choose from {', '.join(BUNDLED)}")
    return Path(str(resources.files(__package__) / "data" / f"{name}.json"))


__all__ = [
    "Board", "BettingConfig", "Card", "ContractError", "ConvergenceTrace", "CorruptFileError", "DCFRParams",
    "DegenerateBeliefsError", "DimensionError", "FactoredOperator", "GradientWorkspace", "Hand",
    "InvalidInputError", "KronOperator", "KronPayoff", "KronsparseError", "ParseError", "RiverInstance",
    "SizeGuardError", "Skeleton", "Sparsification", "StrategyProfile", "WFactorization", "assemble",
    "best_response_value", "build_skeleton", "bundled_path", "dcfr_solve", "dense_expand",
    "enumerate_deterministic_optimum", "evaluate7", "exploitability", "fig1_config", "matvec",
    "matvec_transpose", "pi", "postprocess", "price_of_determinism", "read_instance", "read_lp",
    "read_sparsification", "sequence_constraints", "size", "solve_lower_unit", "sparsify", "sparsify_w",
    "standard_deck", "technique_a", "technique_b", "write_instance", "write_lp", "write_milp",
    "write_sparsification",
]
