"""Numba vs numpy kernels on a synthetic river instance.

Run:  python3 benchmarks/bench_kernels.py --hands 200 --repeat 20

Prints one row per kernel with the best time of each backend and the speedup,
then an end-to-end DCFR throughput line for each backend.
"""
import argparse
import time

import numpy as np

from kronsparse import kernels
from kronsparse.engine import FactoredOperator, _Csr
from kronsparse.kron import assemble
from kronsparse.solver import DCFRParams, dcfr_solve
from kronsparse.sparsify import sparsify
from kronsparse.synthetic import random_instance


def best_of(fn, repeat):
    fn()  # warm up (and compile)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(payoff, s, kb):
    tree = payoff.skeleton.trees[0]
    parent = tree.iset_parent.astype(np.int64)
    start = tree.iset_start.astype(np.int64)
    end = tree.iset_end.astype(np.int64)
    H = payoff.hand_counts[0]
    rng = np.random.default_rng(0)
    R = rng.standard_normal((H, tree.n_seqs))
    sigma = np.empty_like(R)
    xs = np.empty_like(R)
    inst = np.empty_like(R)
    choice = np.zeros((H, tree.n_isets), dtype=np.int64)
    root = np.zeros(H)
    A = _Csr(s.A_hat)
    M = _Csr(s.M)
    x = rng.standard_normal(s.shape[1])
    b = rng.standard_normal(s.k)
    out_a = np.zeros(s.shape[0])
    out_m = np.zeros(s.k)
    W = payoff.W.copy()
    op = FactoredOperator(s, kb)
    ws = op.workspace()
    kb.regret_match(R, start, end, sigma)
    return {
        "csr_matvec": lambda: kb.csr_matvec(A.indptr, A.indices, A.data, x, out_a),
        "solve_lower_unit": lambda: kb.solve_lower_unit(M.indptr, M.indices, M.data, b, out_m),
        "regret_match": lambda: kb.regret_match(R, start, end, sigma),
        "sequence_form": lambda: kb.sequence_form(sigma, parent, start, end, xs),
        "cf_regrets": lambda: kb.cf_regrets(R, sigma, parent, start, end, inst, root),
        "br_values": lambda: kb.br_values(R, parent, start, end, choice, root),
        "best_block": lambda: kb.best_block(W, np.int8(1)),
        "factored_matvec": lambda: op.matvec(x, ws),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--hands", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--iters", type=int, default=300, help="DCFR iterations for the end-to-end line")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    payoff = assemble(random_instance(np.random.default_rng(args.seed), n_hands=args.hands))
    s = sparsify(payoff, "b")
    backends = kernels.available_backends()
    results = {name: {} for name in backends}
    for name in backends:
        for label, fn in kernel_cases(payoff, s, kernels.get_backend(name)).items():
            results[name][label] = best_of(fn, args.repeat)

    print(f"hands/side={args.hands} size(B)={s.size().total} threads="
          f"{kernels.numba.get_num_threads() if kernels.HAVE_NUMBA else 1}")
    print(f"{'kernel':<18}" + "".join(f"{b + ' (us)':>14}" for b in backends) + f"{'speedup':>10}")
    for label in results[backends[0]]:
        row = f"{label:<18}" + "".join(f"{results[b][label] * 1e6:>14.1f}" for b in backends)
        if len(backends) == 2:
            row += f"{results['numpy'][label] / results['numba'][label]:>10.1f}"
        print(row)

    params = DCFRParams(max_iters=args.iters, checkpoint=args.iters, self_check=False)
    for name in backends:
        kb = kernels.get_backend(name)
        dcfr_solve(payoff, s, DCFRParams(max_iters=2, checkpoint=2, self_check=False), backend=kb)
        t0 = time.perf_counter()
        dcfr_solve(payoff, s, params, backend=kb)
        dt = time.perf_counter() - t0
        print(f"dcfr[{name}]: {args.iters / dt:.0f} iterations/s")


if __name__ == "__main__":
    main()
