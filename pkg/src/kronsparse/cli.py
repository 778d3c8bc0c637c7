"""Command-line front end: ``kronsparse <command> [flags]``.

Every failure prints one line ``error: <code>: <message>`` on stderr and exits
with status 2 (status 1 is reserved for a failed ``check``).
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import BUNDLED, bundled_path, kernels
from .errors import KronsparseError
from .export import (build_lp_model, format_lp, read_instance, read_sparsification, write_sparsification)
from .kron import DENSE_GUARD, KronOperator, RiverInstance, assemble, dense_expand, kron_sum_dense, sparse_payoff
from .skeleton import build_skeleton, contribution_table, fig1_config
from .solver import (DCFRParams, ENUMERATION_GUARD, dcfr_solve, enumerate_deterministic_optimum, game_value_lp,
                     price_of_determinism, profile_value)
from .sparsify import sparsify
from .synthetic import random_instance, top_rank_deck

log = logging.getLogger("kronsparse")

COMMANDS = ("build", "sparsify", "solve", "det", "export-lp", "export-milp", "check", "bench")


class UsageError(KronsparseError):
    code = "usage"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # one machine-readable line instead of argparse's usage dump
        raise UsageError(message)


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--instance", help=f"instance JSON path or a bundled name ({', '.join(BUNDLED)})")
    p.add_argument("--technique", default="b", help="sparsification technique: a or b (export also accepts none)")
    p.add_argument("--peel", default="exact", choices=("exact", "cover"), help="W peeling mode for technique a")
    p.add_argument("--iters", type=int, default=10_000, help="DCFR iteration cap")
    p.add_argument("--target-expl", type=float, default=None, help="stop DCFR at this normalized exploitability")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="numba worker threads")
    p.add_argument("--deterministic", action="store_true", help="pin the kernels to one thread")
    p.add_argument("--out", default=None, help="output file or directory")
    p.add_argument("--guard", type=int, default=None, help="size guard (dense entries, or strategy count for det)")
    p.add_argument("--player", type=int, default=1, choices=(1, 2))
    p.add_argument("--backend", choices=("numba", "numpy"), default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kronsparse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    common = _common()
    helps = {
        "build": "print skeleton statistics and the pot-contribution table",
        "sparsify": "factor the payoff and write a bundle plus a size report",
        "solve": "run DCFR, write trace.csv and profile.csv",
        "det": "enumerate deterministic strategies and report the price of determinism",
        "export-lp": "write the sequence-form LP",
        "export-milp": "write the LP with binary sequence variables",
        "check": "verify factorizations and products against dense oracles",
        "bench": "size ratios and product throughput on synthetic instances",
    }
    for name in COMMANDS:
        sp_ = sub.add_parser(name, parents=[common], help=helps[name], description=helps[name])
        if name == "solve":
            sp_.add_argument("--bundle", help="solve with a sparsification bundle written by `sparsify`")
            sp_.add_argument("--checkpoint", type=int, default=50)
        if name == "bench":
            sp_.add_argument("--hands", default="50,100,200", help="comma-separated hands per side")
            sp_.add_argument("--draws", type=int, default=3)
            sp_.add_argument("--products", type=int, default=200, help="timed products per instance")
    return parser


def _validate(a: argparse.Namespace) -> None:
    if a.iters < 1:
        raise UsageError("--iters must be positive")
    if a.target_expl is not None and not a.target_expl > 0:
        raise UsageError("--target-expl must be positive")
    if a.threads is not None and a.threads < 1:
        raise UsageError("--threads must be positive")
    if a.guard is not None and a.guard < 1:
        raise UsageError("--guard must be positive")
    allowed = ("a", "b", "none") if a.command.startswith("export") else ("a", "b")
    a.technique = a.technique.lower()
    if a.technique not in allowed:
        raise UsageError(f"--technique must be one of {', '.join(allowed)}")
    if a.command in ("sparsify", "solve", "det", "export-lp", "export-milp") and not a.instance:
        raise UsageError(f"{a.command} needs --instance")
    if a.command == "bench":
        try:
            a.hands = [int(h) for h in a.hands.split(",") if h.strip()]
        except ValueError:
            raise UsageError("--hands must be a comma-separated list of integers") from None
        if not a.hands or min(a.hands) < 1 or a.draws < 1 or a.products < 1:
            raise UsageError("--hands, --draws and --products must be positive")
    if a.command == "solve" and a.checkpoint < 1:
        raise UsageError("--checkpoint must be positive")


def _load(spec: str) -> RiverInstance:
    path = bundled_path(spec) if spec in BUNDLED and not Path(spec).exists() else Path(spec)
    return read_instance(path)


def _out(a, default: str) -> Path:
    return Path(a.out or default)


def _size_header() -> str:
    return (f"{'instance':<12}{'hands':>11}{'unsparsified':>14}{'A size':>11}{'A time':>9}"
            f"{'B size':>11}{'B time':>9}{'A ratio':>9}{'B ratio':>9}")


def _size_row(label, hands, dense, sa, ta, sb, tb) -> str:
    return (f"{label:<12}{hands:>11}{dense:>14d}{sa:>11d}{ta:>9.3f}{sb:>11d}{tb:>9.3f}"
            f"{dense / sa:>9.2f}{dense / sb:>9.2f}")


# ------------------------------------------------------------------ commands

def cmd_build(a) -> int:
    config = _load(a.instance).config if a.instance else fig1_config()
    sk = build_skeleton(config)
    info = sk.summary()
    print(f"sequences p1={info['sequences'][0]} p2={info['sequences'][1]}")
    print(f"decision_nodes p1={info['decision_nodes'][0]} p2={info['decision_nodes'][1]}")
    print(f"terminals={info['terminals']} fold={info['fold_terminals']} showdown={info['showdown_terminals']}")
    print(f"{'history':<40}{'kind':<10}{'p1':>14}{'p2':>14}")
    for hist, kind, q1, q2 in contribution_table(sk):
        print(f"{'/'.join(hist):<40}{kind:<10}{q1:>14.2f}{q2:>14.2f}")
    return 0


def cmd_sparsify(a) -> int:
    inst = _load(a.instance)
    payoff = assemble(inst)
    t0 = time.perf_counter()
    s = sparsify(payoff, a.technique, mode=a.peel)
    elapsed = time.perf_counter() - t0
    out = _out(a, "bundle")
    write_sparsification(s, out, extra={"instance": str(a.instance), "hand_counts": list(payoff.hand_counts),
                                        "n1": payoff.n1, "n2": payoff.n2})
    rep = s.size()
    dense = payoff.dense_nnz()
    print(f"dense_nnz={dense} a_hat={rep.a_hat} u={rep.u} m={rep.m} v={rep.v} total={rep.total} "
          f"ratio={dense / max(rep.total, 1):.3f} seconds={elapsed:.3f}")
    print(f"bundle={out}")
    return 0


def _write_profile(path: Path, payoff, profile) -> None:
    lines = ["player,hand,sequence,value"]
    for p, (hands, X) in enumerate(((payoff.hands1, profile.x1), (payoff.hands2, profile.x2)), 1):
        for h, row in zip(hands, X):
            for sq, v in enumerate(row):
                lines.append(f"{p},{h.code},{sq},{float(v)!r}")
    path.write_text("\n".join(lines) + "\n")


def cmd_solve(a) -> int:
    inst = _load(a.instance)
    payoff = assemble(inst)
    s = read_sparsification(a.bundle) if a.bundle else sparsify(payoff, a.technique, mode=a.peel)
    params = DCFRParams(max_iters=a.iters, target_exploitability=a.target_expl, checkpoint=a.checkpoint)
    profile, trace = dcfr_solve(payoff, s, params)
    out = _out(a, "solve_out")
    out.mkdir(parents=True, exist_ok=True)
    trace.to_csv(out / "trace.csv")
    _write_profile(out / "profile.csv", payoff, profile)
    it, sec, ex = trace.rows[-1]
    value = float(profile_value(payoff, s, profile))
    print(f"iterations={it} exploitability={float(ex)!r} value={value!r} seconds={sec:.3f}")
    print(f"trace={out / 'trace.csv'} profile={out / 'profile.csv'}")
    return 0


def cmd_det(a) -> int:
    payoff = assemble(_load(a.instance))
    guard = a.guard or ENUMERATION_GUARD
    det, X = enumerate_deterministic_optimum(payoff, a.player, guard=guard)
    mixed, _ = game_value_lp(payoff, a.player)
    pod = price_of_determinism(mixed, det, payoff.pot)
    mixed, det, pod = float(mixed) + 0.0, float(det) + 0.0, float(pod)  # plain floats, no -0.0
    print(f"player={a.player} mixed_value={mixed!r} det_value={det!r} pot={payoff.pot!r} "
          f"price_of_determinism={pod!r}")
    return 0


def _export(a, binaries: bool) -> int:
    payoff = assemble(_load(a.instance))
    s = None if a.technique == "none" else sparsify(payoff, a.technique, mode=a.peel)
    model = build_lp_model(payoff, s, a.player, a.guard or DENSE_GUARD)
    if binaries:
        model.binary[:model.block_sizes["x"]] = True
    out = _out(a, "model.milp.lp" if binaries else "model.lp")
    out.write_text(format_lp(model, binaries=binaries))
    b = model.block_sizes
    print(f"file={out} x={b['x']} v={b['v']} w={b['w']} constraints={model.A.shape[0]} "
          f"nonzeros={model.A.nnz} binaries={int(model.binary.sum())}")
    return 0


def _rel(a, b) -> float:
    return float(np.abs(a - b).max() / max(np.abs(b).max(), 1e-300))


def cmd_check(a) -> int:
    if a.instance:
        inst = _load(a.instance)
    else:
        inst = random_instance(np.random.default_rng(a.seed), deck=top_rank_deck(4), n_hands=4)
    payoff = assemble(inst)
    guard = a.guard or DENSE_GUARD
    A = dense_expand(payoff, guard)
    results = [("kron_terms", _rel(kron_sum_dense(payoff, guard), A)),
               ("sparse_payoff", _rel(sparse_payoff(payoff).toarray(), A))]
    rng = np.random.default_rng(a.seed)
    xs = [rng.standard_normal(A.shape[1]) for _ in range(10)]
    ys = [rng.standard_normal(A.shape[0]) for _ in range(10)]
    kop = KronOperator(payoff)
    results.append(("kron_matvec", max(max(_rel(kop.matvec(x), A @ x) for x in xs),
                                       max(_rel(kop.rmatvec(y), A.T @ y) for y in ys))))
    from .engine import FactoredOperator
    for tech in ("a", "b"):
        for post in (False, True):
            s = sparsify(payoff, tech, postprocessed=post, mode=a.peel)
            tag = f"technique_{tech}{'_post' if post else ''}"
            results.append((tag, float(np.abs(s.dense() - A).max() / max(np.abs(A).max(), 1e-300))))
            op = FactoredOperator(s)
            results.append((tag + "_matvec", max(max(_rel(op.matvec(x), A @ x) for x in xs),
                                                 max(_rel(op.rmatvec(y), A.T @ y) for y in ys))))
    worst = max(r for _, r in results)
    for name, r in results:
        print(f"{'PASS' if r <= 1e-9 else 'FAIL'} {name} residual={r:.3e}")
    ok = worst <= 1e-9
    print(f"{'PASS' if ok else 'FAIL'} max_residual={worst:.3e}")
    return 0 if ok else 1


def cmd_bench(a) -> int:
    rng = np.random.default_rng(a.seed)
    print(_size_header())
    thr = []
    for hands in a.hands:
        for d in range(a.draws):
            payoff = assemble(random_instance(rng, n_hands=hands))
            dense = payoff.dense_nnz()
            t0 = time.perf_counter()
            sa = sparsify(payoff, "a", mode=a.peel)
            ta = time.perf_counter() - t0
            t0 = time.perf_counter()
            sb = sparsify(payoff, "b")
            tb = time.perf_counter() - t0
            print(_size_row(f"h{hands}-{d}", f"{hands}x{hands}", dense, sa.size().total, ta, sb.size().total, tb))
            thr.append((hands, d, _throughput(payoff, sb, a.products)))
    print()
    print(f"{'instance':<12}{'factored B (us)':>18}{'sparse dense (us)':>20}")
    for hands, d, (tf, td) in thr:
        print(f"{f'h{hands}-{d}':<12}{tf * 1e6:>18.1f}{td * 1e6:>20.1f}")
    return 0


def _throughput(payoff, s, reps: int) -> tuple[float, float]:
    from .engine import FactoredOperator
    op = FactoredOperator(s)
    A = sparse_payoff(payoff)
    x = np.random.default_rng(0).random(A.shape[1])
    ws = op.workspace()
    op.matvec(x, ws)
    t0 = time.perf_counter()
    for _ in range(reps):
        op.matvec(x, ws)
    tf = (time.perf_counter() - t0) / reps
    t0 = time.perf_counter()
    for _ in range(reps):
        A @ x
    td = (time.perf_counter() - t0) / reps
    return tf, td


HANDLERS = {
    "build": cmd_build, "sparsify": cmd_sparsify, "solve": cmd_solve, "det": cmd_det,
    "export-lp": lambda a: _export(a, False), "export-milp": lambda a: _export(a, True),
    "check": cmd_check, "bench": cmd_bench,
}


def main(argv=None) -> int:
    previous = kernels.BACKEND
    try:
        a = build_parser().parse_args(argv)
        if not a.command:
            raise UsageError(f"a command is required: {', '.join(COMMANDS)}")
        _validate(a)
        logging.basicConfig(level=logging.DEBUG if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        if a.backend:
            kernels.BACKEND = kernels.get_backend(a.backend)
        if a.deterministic:
            kernels.set_threads(1)
        elif a.threads:
            kernels.set_threads(a.threads)
        return HANDLERS[a.command](a)
    except KronsparseError as e:
        print(f"error: {e.code}: {_one_line(e)}", file=sys.stderr)
    except OSError as e:
        print(f"error: io: {_one_line(e)}", file=sys.stderr)
    except RuntimeError as e:
        print(f"error: runtime: {_one_line(e)}", file=sys.stderr)
    finally:
        kernels.BACKEND = previous
    return 2


def _one_line(e: BaseException) -> str:
    return " ".join(str(e).split())


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
