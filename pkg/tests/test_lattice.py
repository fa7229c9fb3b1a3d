import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from chained_typical.exceptions import DomainError, ResourceError, SelectionError
from chained_typical.lattice import (
    block_density,
    block_entropy,
    choose_block_length,
    classical_markov,
    entropy_density_curve,
    expect_vectors,
    iid_product,
    induced_process,
    mean_entropy,
    rotated_classical,
    spectral_set,
)
from chained_typical.process import entropy_rate, marginal_prob, markov
from chained_typical.quantum_ops import (
    basis_entropy,
    expectation,
    kron,
    kron_power,
    partial_trace,
    shannon_entropy,
    spectral_projectors,
    von_neumann_entropy,
)

CHAIN = [[0.9, 0.1], [0.5, 0.5]]
H_CHAIN = entropy_rate(markov(CHAIN)).h
ROT = np.array([[math.cos(0.7), -math.sin(0.7) * 1j], [-math.sin(0.7) * 1j, math.cos(0.7)]])
RHO = ROT @ np.diag([0.9, 0.1]) @ ROT.conj().T


def all_states():
    return [
        iid_product(RHO),
        iid_product(np.eye(3) / 3),
        classical_markov(CHAIN),
        rotated_classical(CHAIN, ROT),
        classical_markov([[0.1, 0.6, 0.3], [0.5, 0.0, 0.5], [0.3, 0.3, 0.4]]),
    ]


class TestBlockDensity:
    def test_pure(self):
        D = block_density(iid_product(np.diag([1.0, 0.0])), 3)
        target = np.zeros((8, 8))
        target[0, 0] = 1
        np.testing.assert_array_equal(D, target)

    def test_markov_pairs(self):
        D = block_density(classical_markov(CHAIN), 2)
        np.testing.assert_allclose(np.diag(D).real, [0.75, 1 / 12, 1 / 12, 1 / 12], atol=1e-15)
        assert np.count_nonzero(D - np.diag(np.diag(D))) == 0

    def test_identity_rotation(self):
        for n in (1, 3, 5):
            np.testing.assert_allclose(block_density(rotated_classical(CHAIN, np.eye(2)), n), block_density(classical_markov(CHAIN), n), atol=1e-15)

    def test_rotated(self):
        D = block_density(rotated_classical(CHAIN, ROT), 3)
        W = kron_power(ROT, 3)
        np.testing.assert_allclose(D, W @ block_density(classical_markov(CHAIN), 3) @ W.conj().T, atol=1e-14)

    def test_cap(self):
        with pytest.raises(ResourceError):
            block_density(iid_product(np.eye(2) / 2), 13)
        with pytest.raises(ResourceError):
            block_density(iid_product(np.eye(3) / 3), 8)

    @pytest.mark.parametrize("state", all_states(), ids=lambda s: s.kind)
    def test_marginal_compatibility_and_shift(self, state):
        d = state.site_dim
        for n in range(1, 5 if d == 2 else 4):
            big = block_density(state, n + 1)
            small = block_density(state, n)
            dims = (d,) * (n + 1)
            assert np.max(np.abs(partial_trace(big, (1, n), dims) - small)) < 1e-9
            assert np.max(np.abs(partial_trace(big, (2, n + 1), dims) - small)) < 1e-9

    def test_non_stationary_chain_rejected(self):
        with pytest.raises(DomainError):
            classical_markov(markov(CHAIN, initial=[0.5, 0.5]))

    def test_non_unitary_rejected(self):
        with pytest.raises(DomainError):
            rotated_classical(CHAIN, np.array([[1, 1], [0, 1]]))


class TestMeanEntropy:
    def test_values(self):
        assert mean_entropy(iid_product(np.eye(2) / 2)).s == pytest.approx(math.log(2), abs=1e-15)
        assert mean_entropy(iid_product(np.diag([0.9, 0.1]))).s == pytest.approx(0.325083, abs=1e-6)
        assert mean_entropy(classical_markov(CHAIN)).s == pytest.approx(H_CHAIN, abs=1e-15)
        assert mean_entropy(rotated_classical(CHAIN, ROT)).s == pytest.approx(H_CHAIN, abs=1e-15)
        assert mean_entropy(iid_product(RHO)).source == "closed_form"

    @pytest.mark.parametrize("state", all_states(), ids=lambda s: s.kind)
    def test_block_entropy_closed_form(self, state):
        for n in range(1, 5):
            assert block_entropy(state, n) == pytest.approx(von_neumann_entropy(block_density(state, n)), abs=1e-10)


class TestChooseBlockLength:
    def test_iid(self):
        assert choose_block_length(iid_product(RHO), 0.01, 5) == 1

    def test_markov_oracle(self):
        state = classical_markov(CHAIN)
        # H(5/6, 1/6) ~ 0.45056 is below s + 0.09
        assert shannon_entropy([5 / 6, 1 / 6]) == pytest.approx(0.45056, abs=1e-5)
        assert choose_block_length(state, 0.3, 10) == 1
        for eps in (0.2, 0.1, 0.05):
            oracle = next(l for l in range(1, 100) if (shannon_entropy([5 / 6, 1 / 6]) + (l - 1) * H_CHAIN) / l < H_CHAIN + eps**2)
            assert choose_block_length(state, eps, 100) == oracle
        assert choose_block_length(state, 0.2, 10) == 2

    def test_selection_error(self):
        with pytest.raises(SelectionError) as info:
            choose_block_length(classical_markov(CHAIN), 0.05, 5)
        assert [l for l, _ in info.value.tried] == [1, 2, 3, 4, 5]
        assert info.value.tried[0][1] == pytest.approx(shannon_entropy([5 / 6, 1 / 6]))

    def test_bad_eps(self):
        with pytest.raises(DomainError):
            choose_block_length(iid_product(RHO), 0.0, 3)


class TestEntropyDensityCurve:
    def test_iid_constant(self):
        curve = entropy_density_curve(iid_product(RHO), 4)
        assert [l for l, _ in curve] == [1, 2, 3, 4]
        for _, v in curve:
            assert v == pytest.approx(von_neumann_entropy(RHO), abs=1e-10)

    def test_markov_decreasing(self):
        curve = entropy_density_curve(classical_markov(CHAIN), 5)
        vals = [v for _, v in curve]
        for l, v in curve:
            assert v == pytest.approx((shannon_entropy([5 / 6, 1 / 6]) + (l - 1) * H_CHAIN) / l, abs=1e-10)
        assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))
        assert vals[-1] > H_CHAIN

    def test_pure_zero(self):
        assert all(abs(v) < 1e-12 for _, v in entropy_density_curve(iid_product(np.diag([1.0, 0.0])), 4))

    def test_cap(self):
        with pytest.raises(ResourceError):
            entropy_density_curve(iid_product(RHO), 13)


class TestInducedProcess:
    def test_iid_single_site(self):
        state = iid_product(np.diag([0.9, 0.1]))
        P = induced_process(state, 1, spectral_set(state, 1))
        np.testing.assert_allclose(P.probs, [0.9, 0.1])

    def test_iid_pairs(self):
        state = iid_product(np.diag([0.9, 0.1]))
        P = induced_process(state, 2, spectral_set(state, 2))
        np.testing.assert_allclose(np.sort(P.probs)[::-1], [0.81, 0.09, 0.09, 0.01], atol=1e-14)
        np.testing.assert_allclose(P.probs, np.sort(np.linalg.eigvalsh(np.kron(np.diag([0.9, 0.1]), np.diag([0.9, 0.1]))))[::-1], atol=1e-14)

    def test_markov_l1_is_the_chain(self):
        state = classical_markov(CHAIN)
        P = induced_process(state, 1, spectral_set(state, 1))
        for w in itertools.product((0, 1), repeat=5):
            assert marginal_prob(P, w) == pytest.approx(marginal_prob(markov(CHAIN), w), abs=1e-15)

    @pytest.mark.parametrize("state", all_states(), ids=lambda s: s.kind)
    @pytest.mark.parametrize("l", [1, 2])
    def test_marginals_match_tensor_expectations(self, state, l):
        d = state.site_dim
        V = spectral_set(state, l)
        P = induced_process(state, l, V)
        for n in range(1, 4):
            if d ** (n * l) > 256:
                break
            D = block_density(state, n * l)
            for w in itertools.product(range(len(V)), repeat=n):
                vec = V.vectors[:, w[0]]
                for a in w[1:]:
                    vec = np.kron(vec, V.vectors[:, a])
                assert marginal_prob(P, w) == pytest.approx(expectation(D, np.outer(vec, vec.conj())), abs=1e-9)

    def test_rejects_inconsistent_set(self):
        state = iid_product(RHO)
        wrong = spectral_projectors(np.diag([0.9, 0.1]))
        with pytest.raises(DomainError):
            induced_process(state, 1, wrong)

    def test_rejects_unaligned_basis_for_chain(self):
        # a degenerate eigenspace split along a basis other than the word basis
        state = classical_markov([[0.5, 0.5], [0.5, 0.5]])
        H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
        V = spectral_projectors(block_density(state, 1), reference=H)
        with pytest.raises(DomainError):
            induced_process(state, 1, V)

    @pytest.mark.parametrize("state", all_states()[:4], ids=lambda s: s.kind)
    def test_eigenbasis_minimizes_one_block_entropy(self, state):
        rng = np.random.default_rng(17)
        for l in (1, 2):
            D = block_density(state, l)
            V = spectral_set(state, l)
            P = induced_process(state, l, V)
            S = von_neumann_entropy(D)
            one_block = np.array([marginal_prob(P, (i,)) for i in range(P.size)])
            assert shannon_entropy(one_block) == pytest.approx(S, abs=1e-10)
            for _ in range(20):
                B = kron_power(unitary_group.rvs(state.site_dim, random_state=rng), l)
                assert basis_entropy(D, B) >= S - 1e-9


class TestExpectVectors:
    @pytest.mark.parametrize("state", all_states(), ids=lambda s: s.kind)
    def test_matches_dense(self, state):
        n = 3
        rng = np.random.default_rng(5)
        d = state.site_dim**n
        X = np.linalg.qr(rng.normal(size=(d, 4)) + 1j * rng.normal(size=(d, 4)))[0]
        D = block_density(state, n)
        dense = np.real(np.einsum("ik,ij,jk->k", X.conj(), D, X))
        np.testing.assert_allclose(expect_vectors(state, n, X), dense, atol=1e-13)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_rotation_preserves_spectrum(seed):
    U = unitary_group.rvs(2, random_state=np.random.default_rng(seed))
    state = rotated_classical(CHAIN, U)
    for n in (1, 3):
        w1 = np.linalg.eigvalsh(block_density(state, n))
        w2 = np.linalg.eigvalsh(block_density(classical_markov(CHAIN), n))
        np.testing.assert_allclose(w1, w2, atol=1e-12)


def test_product_density_is_kron():
    state = iid_product(RHO)
    np.testing.assert_allclose(block_density(state, 2), kron(RHO, RHO), atol=1e-15)
