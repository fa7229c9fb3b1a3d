"""Translation-invariant lattice states with exactly computable block densities.

Three families are supported:

``iid_product``
    the same single-site density ``rho`` on every site;
``classical_markov``
    a stationary Markov chain written as a diagonal state in the
    computational basis;
``rotated_classical``
    the same chain with every site conjugated by a fixed unitary ``U``.

Block densities on ``n`` sites are dense matrices and respect the dimension
cap. Quantities that only need the spectrum (block entropies, mean entropy)
have closed forms and are available at any block length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, SelectionError
from .process import ProcessModel, block_process, entropy_rate, iid, markov, stationary_distribution
from .quantum_ops import (
    DensityOperator,
    SpectralSet,
    apply_sitewise,
    conjugate_sitewise,
    kron_power,
    shannon_entropy,
    spectral_projectors,
    von_neumann_entropy,
)
from .validation import PROB_ATOL, check_dense_cap, check_unitary

RECONSTRUCTION_TOL = 1e-8
WORD_MATCH_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class LatticeState:
    kind: str
    site_dim: int
    rho: np.ndarray | None = None
    chain: ProcessModel | None = None
    unitary: np.ndarray | None = None

    def __repr__(self) -> str:
        return f"LatticeState(kind={self.kind!r}, site_dim={self.site_dim})"


@dataclass(frozen=True)
class MeanEntropy:
    s: float
    source: str = "closed_form"

    def __float__(self) -> float:
        return self.s


def iid_product(rho) -> LatticeState:
    D = DensityOperator(np.asarray(rho, dtype=complex), (np.asarray(rho).shape[0],))
    return LatticeState("iid_product", D.dim, rho=D.matrix)


def _check_chain(chain) -> ProcessModel:
    if not isinstance(chain, ProcessModel):
        chain = markov(chain)
    if chain.kind != "markov":
        raise DomainError("lattice chains must be Markov models")
    pi = stationary_distribution(chain.transition)
    if np.max(np.abs(pi - chain.initial)) > PROB_ATOL:
        raise DomainError("lattice chains must start from their stationary law")
    return chain


def classical_markov(chain) -> LatticeState:
    """Diagonal state of a stationary chain; ``chain`` may be a transition matrix."""
    chain = _check_chain(chain)
    return LatticeState("classical_markov", chain.size, chain=chain)


def rotated_classical(chain, unitary) -> LatticeState:
    chain = _check_chain(chain)
    U = check_unitary(unitary)
    if U.shape[0] != chain.size:
        raise DomainError("unitary dimension differs from the chain's alphabet size")
    return LatticeState("rotated_classical", chain.size, chain=chain, unitary=U)


def word_probabilities(chain: ProcessModel, n: int) -> np.ndarray:
    """Marginals of all length-``n`` words in lexicographic (row-major) order."""
    check_dense_cap(chain.size**n, "word probability vector")
    P = chain.initial.copy()
    for _ in range(1, n):
        P = (P.reshape(-1, chain.size)[:, :, None] * chain.transition[None, :, :]).reshape(-1)
    return P


def block_density(state: LatticeState, n: int) -> np.ndarray:
    """Dense density matrix of ``n`` consecutive sites."""
    if n < 1:
        raise DomainError("block density needs n >= 1")
    check_dense_cap(state.site_dim**n, "block density")
    if state.kind == "iid_product":
        return kron_power(state.rho, n)
    D = np.diag(word_probabilities(state.chain, n)).astype(complex)
    if state.kind == "classical_markov":
        return D
    return conjugate_sitewise(state.unitary, D, n)


def block_entropy(state: LatticeState, n: int) -> float:
    """Closed-form von Neumann entropy of the ``n``-site block (no dense matrices)."""
    if state.kind == "iid_product":
        return n * von_neumann_entropy(state.rho)
    # stationary chain: H(X_1) + (n - 1) H(X_2 | X_1); per-site rotation keeps the spectrum
    return shannon_entropy(state.chain.initial) + (n - 1) * entropy_rate(state.chain).h


def mean_entropy(state: LatticeState) -> MeanEntropy:
    if state.kind == "iid_product":
        return MeanEntropy(von_neumann_entropy(state.rho))
    return MeanEntropy(entropy_rate(state.chain).h)


def choose_block_length(state: LatticeState, eps: float, l_max: int) -> int:
    """Smallest ``l <= l_max`` whose entropy density is below ``s + eps**2``.

    Raises:
        SelectionError: no block length qualifies; ``tried`` lists
            ``(l, S_l / l)`` for every length evaluated.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    s = mean_entropy(state).s
    tried = []
    for l in range(1, l_max + 1):
        density = block_entropy(state, l) / l
        tried.append((l, density))
        if density < s + eps**2:
            if density < s - 1e-12:
                raise AssertionError(f"entropy density {density} below mean entropy {s} at l={l}")
            return l
    raise SelectionError(f"no block length <= {l_max} has entropy density below s + eps^2 = {s + eps**2:.6g}", tried)


def reference_basis(state: LatticeState, l: int) -> np.ndarray:
    """Basis used to split degenerate eigenspaces of the ``l``-site block.

    Product eigenbasis of ``rho`` for iid states, the (rotated) computational
    basis for the chain-based states.
    """
    d = state.site_dim
    check_dense_cap(d**l, "reference basis")
    if state.kind == "iid_product":
        W = spectral_projectors(state.rho).vectors
        return apply_sitewise(W, np.eye(d**l, dtype=complex), l)
    if state.kind == "classical_markov":
        return np.eye(d**l, dtype=complex)
    return apply_sitewise(state.unitary, np.eye(d**l, dtype=complex), l)


def spectral_set(state: LatticeState, l: int) -> SpectralSet:
    """Rank-one spectral projectors of the ``l``-site block density."""
    return spectral_projectors(block_density(state, l), reference=reference_basis(state, l), site_dims=(state.site_dim,) * l)


def induced_process(state: LatticeState, l: int, V: SpectralSet) -> ProcessModel:
    """The classical source the state induces on the alphabet ``V``.

    For iid states this is the iid source over the eigenvalues. For the
    chain-based states every member of ``V`` must be a (rotated) basis word
    projector; the result is the chain read in blocks of ``l`` with symbol
    ``i`` standing for the word matched by ``V``'s i-th member.

    Raises:
        DomainError: ``V`` does not reconstruct the block density, or a
            member does not match a basis word.
    """
    D = block_density(state, l)
    if np.max(np.abs(V.reconstruct() - D)) > RECONSTRUCTION_TOL:
        raise DomainError("spectral set does not reconstruct the block density")
    if state.kind == "iid_product":
        p = np.clip(V.eigenvalues, 0.0, None)
        return iid(p / p.sum(), symbols=[f"v{i}" for i in range(len(V))])
    R = reference_basis(state, l)
    overlap = np.abs(R.conj().T @ V.vectors)
    labels = np.argmax(overlap, axis=0)
    if np.any(overlap[labels, np.arange(len(V))] < 1 - WORD_MATCH_TOL) or len(set(labels.tolist())) != len(V):
        raise DomainError("spectral set is not aligned with the basis words of the chain")
    return block_process(state.chain, l, labels=labels.tolist())


def expect_vectors(state: LatticeState, n: int, vectors: np.ndarray) -> np.ndarray:
    """``<psi_i| D^(n) |psi_i>`` for every column ``psi_i`` of ``vectors``."""
    check_dense_cap(state.site_dim**n, "block vectors")
    X = np.asarray(vectors, dtype=complex)
    if state.kind == "iid_product":
        Y = apply_sitewise(state.rho, X, n)
        return np.real(np.einsum("ik,ik->k", X.conj(), Y))
    if state.kind == "rotated_classical":
        X = apply_sitewise(state.unitary.conj().T, X, n)
    p = word_probabilities(state.chain, n)
    return (np.abs(X) ** 2).T @ p


def entropy_density_curve(state: LatticeState, l_max: int) -> list[tuple[int, float]]:
    """``(l, S(D^(l)) / l)`` for ``l = 1..l_max`` from dense block densities."""
    check_dense_cap(state.site_dim**l_max, "block density")
    return [(l, von_neumann_entropy(block_density(state, l)) / l) for l in range(1, l_max + 1)]
