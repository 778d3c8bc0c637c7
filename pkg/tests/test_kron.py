import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from kronsparse.cards import Board, Hand, gamma
from kronsparse.errors import DegenerateBeliefsError, InvalidInputError, SizeGuardError
from kronsparse.kron import (DenseOperator, KronOperator, RiverInstance, assemble, dense_expand,
                             kron_sum_dense, kronecker_product, pi, sparse_payoff)
from kronsparse.skeleton import fig1_config
from kronsparse.sparsify import difference_matrix
from kronsparse.synthetic import random_instance, top_rank_deck

BOARD = Board.parse("2c7d9hJc3s")


def tree_walk_dense(inst):
    """Money P1 wins per terminal, weighted by the deal probability, from first principles."""
    from kronsparse.skeleton import build_skeleton
    sk = build_skeleton(inst.config)
    n1, n2 = sk.n_seqs
    h1s, h2s = inst.hands
    mu1, mu2 = inst.weights
    beta = sum(mu1[i] * mu2[j] for i, a in enumerate(h1s) for j, b in enumerate(h2s) if not a.shares_card(b))
    A = np.zeros((len(h1s) * n1, len(h2s) * n2))
    for i, a in enumerate(h1s):
        for j, b in enumerate(h2s):
            if a.shares_card(b):
                continue
            prob = mu1[i] * mu2[j] / beta
            for t in sk.terminals:
                q1, q2 = t.contributions
                if t.kind == "fold":
                    money = q2 if t.folder == 1 else -q1
                else:
                    money = gamma(a, b, inst.board) * q1
                A[i * n1 + t.seqs[0], j * n2 + t.seqs[1]] += prob * money
    return A


@pytest.mark.parametrize("seed", range(6))
def test_dense_matches_tree_walk(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, deck=top_rank_deck(5), n_hands=4)
    A = dense_expand(assemble(inst))
    ref = tree_walk_dense(inst)
    assert np.max(np.abs(A - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))


def test_kron_sum_matches_blocks(corpus):
    for payoff in corpus:
        A = dense_expand(payoff)
        B = kron_sum_dense(payoff)
        assert np.max(np.abs(A - B)) <= 1e-12 * np.max(np.abs(A))
        S = sparse_payoff(payoff).toarray()
        assert np.max(np.abs(A - S)) <= 1e-12 * np.max(np.abs(A))
        assert payoff.dense_nnz() == np.count_nonzero(A)


def test_c_equals_pi_and_sums_to_one(corpus):
    for payoff in corpus:
        m1, m2 = payoff.hand_counts
        P = np.array([[pi(payoff, i, j) for j in range(m2)] for i in range(m1)])
        assert np.allclose(payoff.C, P, atol=1e-15, rtol=0)
        assert abs(payoff.C.sum() - 1.0) <= 1e-12
        assert np.all(payoff.W[payoff.Hx == 1] == 0)


def test_single_tying_pair_is_fold_matrix():
    board = Board.parse("AsKsQsJsTs")
    inst = RiverInstance.from_beliefs(board, {Hand.parse("2c3d"): 1.0}, {Hand.parse("7h7d"): 1.0}, fig1_config())
    p = assemble(inst)
    assert p.W.tolist() == [[0]]
    assert p.C.tolist() == [[1.0]]
    assert np.array_equal(dense_expand(p), p.F.toarray())


def test_disjoint_pools_beta_one():
    h1 = {Hand.parse("AsAh"): 0.5, Hand.parse("KsKh"): 0.5}
    h2 = {Hand.parse("QdQc"): 0.25, Hand.parse("8d8c"): 0.75}
    p = assemble(RiverInstance.from_beliefs(BOARD, h1, h2, fig1_config()))
    assert p.beta == pytest.approx(1.0, abs=1e-15)
    assert pi(p, Hand.parse("AsAh"), Hand.parse("8d8c")) == pytest.approx(0.375)


def test_uniform_pi():
    h1 = {Hand.parse(c): 1 / 3 for c in ("AsAh", "KsKh", "QsQh")}
    h2 = {Hand.parse(c): 1 / 3 for c in ("AdAc", "KdKc", "QdQc")}
    p = assemble(RiverInstance.from_beliefs(BOARD, h1, h2, fig1_config()))
    assert np.allclose(p.C, 1 / 9, atol=1e-15)


def test_incompatible_pair_pi_zero():
    h1 = {Hand.parse("AsAh"): 0.5, Hand.parse("KsKh"): 0.5}
    h2 = {Hand.parse("AsKd"): 0.5, Hand.parse("QdQc"): 0.5}
    p = assemble(RiverInstance.from_beliefs(BOARD, h1, h2, fig1_config()))
    assert pi(p, Hand.parse("AsAh"), Hand.parse("AsKd")) == 0.0
    with pytest.raises(IndexError):
        pi(p, Hand.parse("5s5h"), Hand.parse("AsKd"))
    with pytest.raises(IndexError):
        pi(p, 7, 0)


def test_degenerate_beliefs():
    h1 = {Hand.parse("AsAh"): 1.0}
    h2 = {Hand.parse("AsKd"): 1.0, Hand.parse("QdQc"): 0.0}
    with pytest.raises(DegenerateBeliefsError):
        assemble(RiverInstance.from_beliefs(BOARD, h1, h2, fig1_config()))


def test_hand_board_overlap_rejected():
    with pytest.raises(InvalidInputError):
        RiverInstance.from_beliefs(BOARD, {Hand.parse("2cAh"): 1.0}, {Hand.parse("KdKh"): 1.0}, fig1_config())


def test_hands_sorted_by_strength():
    h = {Hand.parse(c): 0.25 for c in ("AsAh", "4s5s", "KsKh", "8c8d")}
    inst = RiverInstance.from_beliefs(BOARD, h, h, fig1_config())
    assert [x.code for x in inst.hands[0]] == ["5s4s", "8d8c", "KsKh", "AsAh"]
    p = assemble(inst)
    # antisymmetric when both sides hold the same ordered list
    assert np.array_equal(p.W, -p.W.T)


def test_dense_guard():
    p = assemble(random_instance(np.random.default_rng(0), n_hands=6))
    with pytest.raises(SizeGuardError):
        dense_expand(p, guard=10)
    with pytest.raises(SizeGuardError):
        DenseOperator.from_payoff(p, guard=10)


def test_kron_operator_matches_dense(corpus):
    rng = np.random.default_rng(3)
    for payoff in corpus:
        A = dense_expand(payoff)
        op = KronOperator(payoff)
        x = rng.standard_normal(A.shape[1])
        y = rng.standard_normal(A.shape[0])
        assert np.allclose(op.matvec(x), A @ x, rtol=0, atol=1e-12 * np.abs(A).max() * np.abs(x).sum())
        assert np.allclose(op.rmatvec(y), A.T @ y, rtol=0, atol=1e-12 * np.abs(A).max() * np.abs(y).sum())


# Kronecker identities on random dense factors

def rand(rng, *shape):
    return rng.standard_normal(shape)


def test_kron_with_scalar_identity():
    P = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(kronecker_product(P, np.eye(1)), P)
    assert np.array_equal(kronecker_product(P, np.eye(2)), np.kron(P, np.eye(2)))


@pytest.mark.parametrize("seed", range(10))
def test_mixed_product(seed):
    rng = np.random.default_rng(seed)
    P, Q, C, D = rand(rng, 3, 3), rand(rng, 2, 4), rand(rng, 3, 3), rand(rng, 4, 2)
    lhs = kronecker_product(P @ C, Q @ D)
    rhs = kronecker_product(P, Q) @ kronecker_product(C, D)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.abs(lhs).max())


@pytest.mark.parametrize("seed", range(10))
def test_transpose_distribution(seed):
    rng = np.random.default_rng(seed)
    P, Q = rand(rng, 3, 2), rand(rng, 4, 5)
    assert np.array_equal(kronecker_product(P, Q).T, kronecker_product(P.T, Q.T))


@pytest.mark.parametrize("seed", range(10))
def test_inverse_distribution(seed):
    rng = np.random.default_rng(seed)
    P = rand(rng, 3, 3) + 3 * np.eye(3)
    Q = rand(rng, 2, 2) + 3 * np.eye(2)
    lhs = np.linalg.inv(kronecker_product(P, Q))
    rhs = kronecker_product(np.linalg.inv(P), np.linalg.inv(Q))
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.abs(lhs).max())


@pytest.mark.parametrize("seed", range(5))
def test_bilinearity(seed):
    rng = np.random.default_rng(seed)
    P, P2, Q = rand(rng, 3, 2), rand(rng, 3, 2), rand(rng, 2, 3)
    lhs = kronecker_product(P + P2, Q)
    rhs = kronecker_product(P, Q) + kronecker_product(P2, Q)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.abs(lhs).max())


@pytest.mark.parametrize("n", [1, 2, 5, 9])
def test_difference_matrix_inverse(n):
    D = difference_matrix(n).toarray()
    assert np.array_equal(D @ np.tril(np.ones((n, n))), np.eye(n))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_kron_matches_numpy(m, n, r, s, seed):
    rng = np.random.default_rng(seed)
    P, Q = rand(rng, m, n), rand(rng, r, s)
    assert np.array_equal(kronecker_product(P, Q), np.kron(P, Q))
    assert np.allclose(sp.kron(P, Q).toarray(), np.kron(P, Q), atol=0)
