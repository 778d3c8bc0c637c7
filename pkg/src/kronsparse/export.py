"""Files: instance JSON, sequence-form LP/MILP text, sparsification bundles.

The LP is written from the point of view of one player p, who picks a
sequence-form strategy x against an opponent best response expressed through
dual variables v on the opponent's flow constraints:

    maximize  v0
    s.t.      B^T x - F_o^T v (+ V' w)  >= 0      (one row per opponent sequence, root included)
              F_p x                      = f_p
              U'^T x - M'^T w            = 0      (only when a sparsification is given)
              x >= 0, v and w free

B is the payoff of p (rows are p's sequences): A for Player 1 and -A^T for
Player 2. With a sparsification A = A_hat + U M^{-1} V^T, Player 1 uses
(U', M', V') = (U, M, V) and Player 2 uses (-V, M^T, U).
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.io
import scipy.sparse as sp

from .cards import Board, Card, Hand, standard_deck
from .errors import (CorruptFileError, DegenerateBeliefsError, DimensionError, InvalidInputError, KronsparseError,
                     ParseError, SizeGuardError)
from .kron import DENSE_GUARD, KronPayoff, RiverInstance, sparse_payoff
from .skeleton import BettingConfig, sequence_constraints
from .sparsify import Sparsification

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
BUNDLE_VERSION = 1
COEF_EPS = 1e-12
_FACTORS = ("A_hat", "U", "M", "V")


# -------------------------------------------------------------------- instances

def instance_to_dict(inst: RiverInstance) -> dict:
    std = standard_deck()
    deck = "standard52" if inst.deck is None or list(inst.deck) == std else [c.code for c in inst.deck]
    beliefs = []
    for p in range(2):
        # original input order is kept so a round trip is exact
        order = inst.order[p] if inst.order is not None else np.arange(len(inst.hands[p]))
        pos = np.argsort(order)
        beliefs.append({inst.hands[p][i].code: float(inst.weights[p][i]) for i in pos})
    cfg = inst.config.to_dict()
    return {
        "schema_version": SCHEMA_VERSION,
        "deck": deck,
        "board": [c.code for c in inst.board.cards],
        "beliefs": beliefs,
        "stacks": cfg["stacks"],
        "pot_contribution": cfg["pot_contribution"],
        "betting": {"menus": cfg["menus"], "all_in": cfg["all_in"], "raise_cap": cfg["raise_cap"]},
    }


def _field(d: dict, key: str, where: str = ""):
    if key not in d:
        raise ParseError(f"missing field {where + key!r}")
    return d[key]


def instance_from_dict(d: dict) -> RiverInstance:
    if not isinstance(d, dict):
        raise ParseError("instance must be a JSON object")
    version = _field(d, "schema_version")
    if version != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {version!r}")
    try:
        deck_spec = _field(d, "deck")
        if deck_spec == "standard52":
            deck = None
        elif isinstance(deck_spec, list):
            deck = [Card.parse(c) for c in deck_spec]
            if len(set(deck)) != len(deck):
                raise InvalidInputError("deck lists a card twice")
        else:
            raise ParseError("field 'deck' must be 'standard52' or a list of card codes")
        board = Board.parse(_field(d, "board"))
        beliefs = _field(d, "beliefs")
        if not isinstance(beliefs, list) or len(beliefs) != 2:
            raise ParseError("field 'beliefs' must hold one object per player")
        maps = []
        for p, b in enumerate(beliefs):
            if not isinstance(b, dict):
                raise ParseError(f"field 'beliefs[{p}]' must map hand codes to weights")
            m = {}
            for code, w in b.items():
                h = Hand.parse(code)
                if h in m:
                    raise InvalidInputError(f"hand {h} listed twice for player {p + 1}")
                if isinstance(w, bool) or not isinstance(w, (int, float)):
                    raise ParseError(f"field 'beliefs[{p}][{code}]' must be a number")
                m[h] = float(w)
            maps.append(m)
        bet = _field(d, "betting")
        config = BettingConfig(tuple(_field(d, "stacks")), _field(d, "pot_contribution"),
                               tuple(_field(bet, "menus", "betting.")), bool(bet.get("all_in", True)),
                               bet.get("raise_cap"))
    except (TypeError, KeyError, AttributeError) as e:
        raise ParseError(f"malformed instance: {e}") from None
    inst = RiverInstance.from_beliefs(board, maps[0], maps[1], config, deck=deck)
    if not _compatible_mass(inst) > 0:
        raise DegenerateBeliefsError("no compatible hand pair carries positive belief mass")
    return inst


def _compatible_mass(inst: RiverInstance) -> float:
    def masks(hands):
        return np.array([(1 << (c.rank * 4 + c.suit)) for h in hands for c in h.cards],
                        dtype=object).reshape(len(hands), 2).sum(axis=1)

    m1, m2 = masks(inst.hands[0]), masks(inst.hands[1])
    ok = (np.bitwise_and.outer(m1, m2) == 0).astype(float)
    return float(inst.weights[0] @ ok @ inst.weights[1])


def write_instance(inst: RiverInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=2) + "\n")


def read_instance(path) -> RiverInstance:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e.strerror}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None
    return instance_from_dict(d)


# ------------------------------------------------------------------------ LP

@dataclass
class LpModel:
    names: list[str]
    objective: np.ndarray                 # coefficients, maximized
    A: sp.csr_matrix
    senses: list[str]                     # ">=", "=", "<="
    rhs: np.ndarray
    row_names: list[str]
    lower: np.ndarray
    upper: np.ndarray
    binary: np.ndarray
    block_sizes: dict = field(default_factory=dict)
    header: list[str] = field(default_factory=list)
    sense: str = "max"


def _player_roles(payoff: KronPayoff, s: Optional[Sparsification], player: int, guard: int):
    """Return (B^T as opponent-rows x player-cols, U', M', V') for the chosen player."""
    if s is None:
        rows, cols = payoff.shape
        if rows * cols > guard:
            raise SizeGuardError(f"unsparsified export of a {rows}x{cols} payoff exceeds the guard of {guard}")
        A = sparse_payoff(payoff)
        Bt = A.T.tocsr() if player == 1 else (-A).tocsr()
        return Bt, None, None, None
    if s.shape != payoff.shape:
        raise DimensionError(f"sparsification shape {s.shape} does not match payoff {payoff.shape}")
    if player == 1:
        return s.A_hat.T.tocsr(), s.U, s.M, s.V
    return (-s.A_hat).tocsr(), -s.V, s.M.T.tocsr(), s.U


def _pad(m: sp.spmatrix, top: int, left: int) -> sp.csr_matrix:
    m = sp.coo_matrix(m)
    return sp.csr_matrix((m.data, (m.row + top, m.col + left)), shape=(m.shape[0] + top, m.shape[1] + left))


def build_lp_model(payoff: KronPayoff, s: Optional[Sparsification] = None, player: int = 1,
                   guard: int = DENSE_GUARD) -> LpModel:
    if player not in (1, 2):
        raise InvalidInputError(f"player must be 1 or 2, got {player!r}")
    p, o = player - 1, 2 - player
    Hp, Ho = payoff.hand_counts[p], payoff.hand_counts[o]
    Fp, fp = sequence_constraints(payoff.skeleton, p, Hp)
    Fo, fo = sequence_constraints(payoff.skeleton, o, Ho)
    Bt, Up, Mp, Vp = _player_roles(payoff, s, player, guard)
    nx, nv = Fp.shape[1], Fo.shape[0]
    k = 0 if Up is None else Up.shape[1]
    n_obs = Fo.shape[1]

    # block 1: B^T x - F_o^T v + V' w >= 0, root row/col padded with zeros
    blocks1 = [_pad(Bt, 1, 1), -Fo.T]
    if k:
        blocks1.append(_pad(Vp, 1, 0))
    rows1 = sp.hstack(blocks1, format="csr")
    rows2 = sp.hstack([Fp, sp.csr_matrix((Fp.shape[0], nv + k))], format="csr")
    parts = [rows1, rows2]
    if k:
        rows3 = sp.hstack([_pad(Up.T, 0, 1), sp.csr_matrix((k, nv)), -Mp.T], format="csr")
        parts.append(rows3)
    A = sp.vstack(parts, format="csr")
    senses = [">="] * n_obs + ["="] * Fp.shape[0] + ["="] * k
    rhs = np.concatenate([np.zeros(n_obs), fp, np.zeros(k)])
    row_names = ([f"br{i}" for i in range(n_obs)] + [f"flow{i}" for i in range(Fp.shape[0])]
                 + [f"link{i}" for i in range(k)])
    names = [f"x{i}" for i in range(nx)] + [f"v{i}" for i in range(nv)] + [f"w{i}" for i in range(k)]
    nvar = nx + nv + k
    obj = np.zeros(nvar)
    obj[nx:nx + nv] = fo
    lower = np.concatenate([np.zeros(nx), np.full(nv + k, -np.inf)])
    upper = np.full(nvar, np.inf)
    kind = "sparsified" if k or s is not None else "unsparsified"
    header = [
        f"sequence-form LP of a river endgame, player {player} maximizes, {kind}",
        "payoff rows are player 1 (hand, sequence) pairs, flat index hand * n + sequence",
        "x0 is the empty sequence, x(1 + h * n + s) is sequence s of hand h",
        f"blocks: x {nx}, v {nv}, w {k}",
    ]
    return LpModel(names, obj, A, senses, rhs, row_names, lower, upper, np.zeros(nvar, dtype=bool),
                   {"x": nx, "v": nv, "w": k}, header)


def _num(v: float) -> str:
    r = repr(float(v))
    return r[:-2] if r.endswith(".0") else r


def _expr(names: Sequence[str], idx: np.ndarray, vals: np.ndarray, per_line: int = 8) -> str:
    if len(idx) == 0:
        return f"0 {names[0]}"
    terms = []
    for j, v in zip(idx, vals):
        sign = "-" if v < 0 else "+"
        terms.append(f"{sign} {_num(abs(v))} {names[j]}")
    lines = [" ".join(terms[i:i + per_line]) for i in range(0, len(terms), per_line)]
    return "\n   ".join(lines)


def format_lp(model: LpModel, binaries: bool = False) -> str:
    A = model.A.tocsr()
    dropped = 0
    out = [f"\\ {line}" for line in model.header]
    out.append("Maximize" if model.sense == "max" else "Minimize")
    nz = np.flatnonzero(model.objective)
    out.append(f" obj: {_expr(model.names, nz, model.objective[nz])}")
    out.append("Subject To")
    for i in range(A.shape[0]):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        idx, vals = A.indices[lo:hi], A.data[lo:hi]
        keep = np.abs(vals) >= COEF_EPS
        dropped += int((~keep).sum())
        order = np.argsort(idx[keep], kind="stable")
        expr = _expr(model.names, idx[keep][order], vals[keep][order])
        out.append(f" {model.row_names[i]}: {expr} {model.senses[i]} {_num(model.rhs[i])}")
    out.append("Bounds")
    for j, name in enumerate(model.names):
        lo, up = model.lower[j], model.upper[j]
        if lo == -np.inf and up == np.inf:
            out.append(f" {name} free")
        elif lo == 0 and up == np.inf:
            continue
        elif up == np.inf:
            out.append(f" {name} >= {_num(lo)}")
        elif lo == -np.inf:
            out.append(f" -inf <= {name} <= {_num(up)}")
        else:
            out.append(f" {_num(lo)} <= {name} <= {_num(up)}")
    if binaries:
        out.append("Binaries")
        bins = [model.names[j] for j in np.flatnonzero(model.binary)]
        for i in range(0, len(bins), 10):
            out.append(" " + " ".join(bins[i:i + 10]))
    out.append("End")
    if dropped:
        log.info("dropped %d coefficients below %g", dropped, COEF_EPS)
    return "\n".join(out) + "\n"


def write_lp(payoff: KronPayoff, s: Optional[Sparsification], player: int, path,
             guard: int = DENSE_GUARD) -> LpModel:
    model = build_lp_model(payoff, s, player, guard)
    Path(path).write_text(format_lp(model))
    return model


def write_milp(payoff: KronPayoff, s: Optional[Sparsification], player: int, path,
               guard: int = DENSE_GUARD) -> LpModel:
    """As ``write_lp`` with every x variable declared binary."""
    model = build_lp_model(payoff, s, player, guard)
    model.binary[:model.block_sizes["x"]] = True
    Path(path).write_text(format_lp(model, binaries=True))
    return model


_TOKEN = re.compile(r"\s*(>=|<=|=<|=>|=|[+-]|[A-Za-z_][\w.\[\]]*:?|(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|inf)")


def _tokens(text: str, lineno: int) -> list[str]:
    pos, toks = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"line {lineno}: cannot parse {text[pos:].strip()!r}")
        toks.append(m.group(1))
        pos = m.end()
    return toks


def _linear(toks: list[str], lineno: int) -> list[tuple[str, float]]:
    terms, sign, coef, i = [], 1.0, None, 0
    while i < len(toks):
        t = toks[i]
        if t in "+-":
            sign = -1.0 if t == "-" else 1.0
        elif re.fullmatch(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?", t):
            coef = float(t)
        else:
            terms.append((t, sign * (1.0 if coef is None else coef)))
            sign, coef = 1.0, None
        i += 1
    if coef is not None:
        raise ParseError(f"line {lineno}: dangling number in expression")
    return terms


def read_lp(path) -> LpModel:
    """Parse the LP subset written by ``format_lp``."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e.strerror}") from None
    header, section = [], None
    stmts: dict[str, list[tuple[int, str]]] = {"obj": [], "st": [], "bounds": [], "bin": []}
    sense = None
    ended = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        if raw.startswith("\\"):
            header.append(raw[1:].strip())
            continue
        line = raw.split("\\", 1)[0]
        key = line.strip().lower()
        if not key:
            continue
        if key in ("maximize", "maximum", "max", "minimize", "minimum", "min"):
            sense = "max" if key.startswith("max") else "min"
            section = "obj"
        elif key in ("subject to", "st", "s.t."):
            section = "st"
        elif key == "bounds":
            section = "bounds"
        elif key in ("binaries", "binary"):
            section = "bin"
        elif key == "end":
            ended = True
            break
        elif section is None:
            raise ParseError(f"line {lineno}: content before the objective section")
        elif line[:1].isspace() and line.lstrip().startswith(("+", "-")) and section in ("obj", "st") \
                and stmts[section]:
            ln, prev = stmts[section][-1]
            stmts[section][-1] = (ln, prev + " " + line.strip())
        else:
            stmts[section].append((lineno, line.strip()))
    if sense is None or not ended:
        raise ParseError("missing objective section or End marker")

    names: list[str] = []
    index: dict[str, int] = {}

    def var(nm: str) -> int:
        if nm not in index:
            index[nm] = len(names)
            names.append(nm)
        return index[nm]

    obj_terms = []
    for ln, st in stmts["obj"]:
        toks = _tokens(st, ln)
        if toks and toks[0].endswith(":"):
            toks = toks[1:]
        obj_terms += [(var(n), c) for n, c in _linear(toks, ln)]
    rows, cols, vals, senses, rhs, row_names = [], [], [], [], [], []
    for ln, st in stmts["st"]:
        toks = _tokens(st, ln)
        name = f"r{len(row_names)}"
        if toks and toks[0].endswith(":"):
            name, toks = toks[0][:-1], toks[1:]
        ops = [i for i, t in enumerate(toks) if t in (">=", "<=", "=", "=<", "=>")]
        if len(ops) != 1:
            raise ParseError(f"line {ln}: constraint needs exactly one comparison")
        j = ops[0]
        rest = toks[j + 1:]
        try:
            val = float("".join(rest))
        except ValueError:
            raise ParseError(f"line {ln}: right-hand side must be a number") from None
        r = len(row_names)
        for nm, c in _linear(toks[:j], ln):
            rows.append(r); cols.append(var(nm)); vals.append(c)
        senses.append({"=<": "<=", "=>": ">="}.get(toks[j], toks[j]))
        rhs.append(val)
        row_names.append(name)
    bounds = []
    for ln, st in stmts["bounds"]:
        toks = _tokens(st, ln)
        bounds.append((ln, toks))
        for t in toks:
            if re.fullmatch(r"[A-Za-z_][\w.\[\]]*", t) and t not in ("free", "inf"):
                var(t)
    bins = []
    for ln, st in stmts["bin"]:
        bins += [var(t) for t in st.split()]

    nvar = len(names)
    lower, upper = np.zeros(nvar), np.full(nvar, np.inf)
    for ln, toks in bounds:
        num = lambda t: -np.inf if t == "-inf" else (np.inf if t in ("inf", "+inf") else float(t))
        joined = []
        i = 0
        while i < len(toks):
            if toks[i] in "+-" and i + 1 < len(toks) and toks[i + 1] not in ("<=", ">="):
                joined.append(toks[i] + toks[i + 1]); i += 2
            else:
                joined.append(toks[i]); i += 1
        try:
            if len(joined) == 2 and joined[1] == "free":
                j = index[joined[0]]
                lower[j], upper[j] = -np.inf, np.inf
            elif len(joined) == 3 and joined[1] in (">=", "<=", "="):
                j = index[joined[0]]
                v = num(joined[2])
                if joined[1] == ">=":
                    lower[j] = v
                elif joined[1] == "<=":
                    upper[j] = v
                else:
                    lower[j] = upper[j] = v
            elif len(joined) == 5 and joined[1] == "<=" and joined[3] == "<=":
                j = index[joined[2]]
                lower[j], upper[j] = num(joined[0]), num(joined[4])
            else:
                raise ParseError(f"line {ln}: unsupported bound {' '.join(toks)!r}")
        except (KeyError, ValueError):
            raise ParseError(f"line {ln}: bad bound {' '.join(toks)!r}") from None
    objective = np.zeros(nvar)
    for j, c in obj_terms:
        objective[j] += c
    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(row_names), nvar))
    binary = np.zeros(nvar, dtype=bool)
    binary[bins] = True
    blocks = {b: sum(1 for n in names if re.fullmatch(b + r"\d+", n)) for b in ("x", "v", "w")}
    if sum(blocks.values()) == nvar:
        # our own naming scheme: restore the x | v | w column layout
        perm = np.array(sorted(range(nvar), key=lambda j: ("xvw".index(names[j][0]), int(names[j][1:]))),
                        dtype=np.int64)
        names = [names[j] for j in perm]
        objective, lower, upper, binary = objective[perm], lower[perm], upper[perm], binary[perm]
        A = A[:, perm].tocsr()
    return LpModel(names, objective, A, senses, np.array(rhs, dtype=float), row_names, lower, upper, binary,
                   blocks, header, sense)


def model_violation(model: LpModel, z: np.ndarray) -> float:
    """Largest constraint or bound violation of the point ``z``."""
    z = np.asarray(z, dtype=float)
    act = model.A @ z
    viol = 0.0
    for sense in (">=", "<=", "="):
        mask = np.array([s == sense for s in model.senses], dtype=bool)
        if not mask.any():
            continue
        d = act[mask] - model.rhs[mask]
        if sense == ">=":
            viol = max(viol, float(np.max(-d, initial=0.0)))
        elif sense == "<=":
            viol = max(viol, float(np.max(d, initial=0.0)))
        else:
            viol = max(viol, float(np.abs(d).max()))
    viol = max(viol, float(np.max(model.lower - z, initial=0.0)), float(np.max(z - model.upper, initial=0.0)))
    return viol


def solve_lp_model(model: LpModel, integral: Optional[bool] = None) -> tuple[float, np.ndarray]:
    """Solve the model with scipy's HiGHS; returns (objective, point)."""
    from scipy.optimize import Bounds, LinearConstraint, milp

    integral = bool(model.binary.any()) if integral is None else integral
    c = -model.objective if model.sense == "max" else model.objective
    lo = np.array([-np.inf if s == "<=" else b for s, b in zip(model.senses, model.rhs)])
    hi = np.array([np.inf if s == ">=" else b for s, b in zip(model.senses, model.rhs)])
    lower, upper = model.lower.copy(), model.upper.copy()
    integrality = np.zeros(len(c))
    if integral:
        integrality[model.binary] = 1
        lower[model.binary] = np.maximum(lower[model.binary], 0.0)
        upper[model.binary] = np.minimum(upper[model.binary], 1.0)
    res = milp(c, constraints=[LinearConstraint(model.A, lo, hi)], bounds=Bounds(lower, upper),
               integrality=integrality, options={"presolve": True})
    if res.x is None:
        raise KronsparseError(f"LP solve failed: {res.message}")
    val = float(model.objective @ res.x)
    return val, res.x


# ---------------------------------------------------------------- bundles

def write_sparsification(s: Sparsification, path, extra: Optional[dict] = None) -> None:
    """Directory with one Matrix Market file per factor plus ``header.json``."""
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    header = {"bundle_version": BUNDLE_VERSION, "technique": s.technique, "shape": list(s.shape), "k": s.k,
              "nnz": {}, "files": {}}
    for name in _FACTORS:
        m = sp.coo_matrix(getattr(s, name))
        fn = f"{name}.mtx"
        scipy.io.mmwrite(d / fn, m, precision=17)
        header["nnz"][name] = int(m.nnz)
        header["files"][name] = fn
    if extra:
        header["extra"] = extra
    (d / "header.json").write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")


def read_sparsification(path) -> Sparsification:
    d = Path(path)
    try:
        header = json.loads((d / "header.json").read_text())
        if header.get("bundle_version") != BUNDLE_VERSION:
            raise CorruptFileError(f"unsupported bundle version {header.get('bundle_version')!r}")
        files, nnz = header["files"], header["nnz"]
        shape, k = tuple(header["shape"]), int(header["k"])
        technique = header.get("technique", "")
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise CorruptFileError(f"bad bundle header in {d}: {e}") from None
    mats = {}
    for name in _FACTORS:
        try:
            m = scipy.io.mmread(d / files[name])
        except Exception as e:  # noqa: BLE001 - any reader failure means a damaged file
            raise CorruptFileError(f"cannot read factor {name}: {e}") from None
        m = sp.csr_matrix(m)
        m.eliminate_zeros()
        if m.nnz != nnz[name]:
            raise CorruptFileError(f"factor {name} has {m.nnz} nonzeros, header says {nnz[name]}")
        mats[name] = m
    expect = {"A_hat": shape, "U": (shape[0], k), "M": (k, k), "V": (shape[1], k)}
    for name, m in mats.items():
        if m.shape != expect[name]:
            raise DimensionError(f"factor {name} is {m.shape}, expected {expect[name]}")
    return Sparsification(mats["A_hat"], mats["U"], mats["M"], mats["V"], technique)


def dump_matrix(m, path) -> None:
    """Matrix Market dump for debugging."""
    scipy.io.mmwrite(path, sp.coo_matrix(m), precision=17)
