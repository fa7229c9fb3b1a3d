"""Chained typical projectors for lattice states.

Construction, for a state with mean entropy ``s`` and tolerance ``eps``:

1. pick a block length ``l`` (entropy density of ``l``-site blocks below
   ``s + eps**2``);
2. take the rank-one spectral projectors ``V`` of the ``l``-site block and
   the classical source the state induces on ``V``;
3. build a chained set family over ``V`` (band around ``l * s`` per block)
   and tighten it;
4. at ``n = m l`` sites the projector is the sum, over core words of length
   ``m``, of the tensor products of the word's spectral projectors;
5. at ``n = m l + r`` (``0 < r < l``) it is the range projector of the
   partial trace of the ``(m + 1) l`` projector over its last ``l - r``
   sites. Because the core words are mutually orthogonal this splits per
   word prefix ``c``: ``q_c (x) R(sum_j tr q_j)``, with ``j`` running over
   the children of ``c`` in the core.

Every projector is kept as a list of rank-one terms ``(prefix, tail)``; dense
vectors and matrices are only materialized within the dimension cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chained_sets import SLACK, ChainedFamily, build_chained_family, tighten_family, tune_band_start
from .exceptions import DomainError
from .lattice import (
    LatticeState,
    choose_block_length,
    expect_vectors,
    induced_process,
    mean_entropy,
    spectral_set,
)
from .process import ProcessModel, prefix_log_marginals
from .quantum_ops import (
    RANGE_TOL,
    Projector,
    SpectralSet,
    partial_trace,
    partial_trace_factor,
    range_basis,
    range_basis_of_factor,
    range_projector,
)
from .validation import DENSE_CAP, check_dense_cap

Q1_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class DepthTerms:
    """Rank-one decomposition of the projector on ``n`` sites.

    Row ``i`` of ``prefixes`` is a core word of length ``m``; ``tails[i]``
    (absent when ``r == 0``) is a unit vector on the remaining ``r`` sites.
    """

    n: int
    m: int
    r: int
    prefixes: np.ndarray
    tails: np.ndarray | None

    @property
    def rank(self) -> int:
        return int(self.prefixes.shape[0])


@dataclass(eq=False)
class ChainedProjectorFamily:
    state: LatticeState
    eps: float
    band_eps: float
    l: int
    n_max: int
    s: float
    spectral: SpectralSet
    induced: ProcessModel
    core: ChainedFamily
    terms: dict[int, DepthTerms]
    N_eps: int

    @property
    def site_dim(self) -> int:
        return self.state.site_dim

    def rank(self, n: int) -> int:
        return self._terms(n).rank

    def _terms(self, n: int) -> DepthTerms:
        if n not in self.terms:
            raise DomainError(f"depth {n} outside 1..{self.n_max}")
        return self.terms[n]

    def is_dense(self, n: int) -> bool:
        return self.site_dim**n <= DENSE_CAP

    def vectors(self, n: int) -> np.ndarray:
        """Orthonormal columns spanning the projector on ``n`` sites."""
        check_dense_cap(self.site_dim**n, "projector")
        t = self._terms(n)
        X = _product_vectors(self.spectral.vectors, t.prefixes)
        if t.tails is not None:
            X = (X[:, None, :] * t.tails.T[None, :, :]).reshape(-1, t.rank)
        return X

    def projector(self, n: int) -> Projector:
        return Projector.from_vectors(self.vectors(n), (self.site_dim,) * n)

    def core_log_probs(self, n: int) -> np.ndarray:
        """Exact log-expectations of the terms at a multiple of ``l``."""
        t = self._terms(n)
        if t.r != 0:
            raise DomainError("core probabilities exist only at multiples of the block length")
        if t.m == 0:
            return np.zeros(1)
        return prefix_log_marginals(self.induced, t.prefixes)[:, -1]


def _product_vectors(Phi: np.ndarray, prefixes: np.ndarray) -> np.ndarray:
    R, m = prefixes.shape
    X = np.ones((1, R), dtype=complex)
    for k in range(m):
        F = Phi[:, prefixes[:, k]]
        X = (X[:, None, :] * F[None, :, :]).reshape(-1, R)
    return X


def _interpolated_terms(core: ChainedFamily, Phi: np.ndarray, d: int, l: int, m: int, r: int) -> DepthTerms:
    children = core.slice(m + 1)
    d_r, d_out = d**r, d ** (l - r)
    prefixes, tails = [], []
    start = 0
    while start < children.shape[0]:
        stop = start + 1
        while stop < children.shape[0] and np.array_equal(children[stop, :m], children[start, :m]):
            stop += 1
        # tr over the last l - r sites of sum_j |phi_j><phi_j|
        F = Phi[:, children[start:stop, m]].reshape(d_r, d_out, stop - start).reshape(d_r, -1)
        B = range_basis(F @ F.conj().T)
        for t in B.T:
            prefixes.append(children[start, :m])
            tails.append(t)
        start = stop
    return DepthTerms(m * l + r, m, r, np.array(prefixes, dtype=np.int64).reshape(len(tails), m), np.array(tails))


def build_chained_projectors(
    state: LatticeState,
    eps: float,
    n_max: int,
    *,
    l_max: int = 12,
    block_length: int | None = None,
    band_eps: float | None = None,
    band_start: int | None = None,
) -> ChainedProjectorFamily:
    """Chained projectors ``p^(1..n_max)`` for ``state``.

    Args:
        eps: target tolerance; mass above ``1 - eps`` is required at every depth.
        block_length: fixes ``l`` instead of selecting it from the entropy density.
        band_eps: per-site half-width of the core band around ``s``; defaults
            to ``2 * eps``, the width the verifier's growth and equipartition
            checks allow.
        band_start: first core depth where the band applies; by default the
            smallest one whose deepest slice keeps mass above ``1 - eps``.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    s = mean_entropy(state).s
    l = block_length if block_length is not None else choose_block_length(state, eps, l_max)
    b = 2 * eps if band_eps is None else band_eps
    V = spectral_set(state, l)
    P_l = induced_process(state, l, V)
    depth = math.ceil(n_max / l)
    fam_eps = 2 * l * b  # build_chained_family applies half its eps
    M = band_start
    if M is None:
        M = tune_band_start(P_l, l * s, fam_eps, depth, mass_target=1 - eps)
    core = tighten_family(build_chained_family(P_l, l * s, fam_eps, M, depth), P_l, fam_eps)

    d = state.site_dim
    terms: dict[int, DepthTerms] = {}
    for n in range(1, n_max + 1):
        m, r = divmod(n, l)
        if r == 0:
            terms[n] = DepthTerms(n, m, 0, core.slice(m), None)
        else:
            terms[n] = _interpolated_terms(core, V.vectors, d, l, m, r)
    return ChainedProjectorFamily(state, eps, b, l, n_max, s, V, P_l, core, terms, l * core.N_eps)


def interpolate_projector(p_next: Projector, l: int, r: int) -> Projector:
    """Range projector of ``p_next`` with its last ``l - r`` sites traced out."""
    if not 0 < r < l:
        raise DomainError("need 0 < r < l")
    n_next = len(p_next.site_dims)
    keep = n_next - (l - r)
    reduced = partial_trace(p_next, (1, keep))
    return range_projector(reduced, site_dims=p_next.site_dims[:keep])


def minimal_decomposition(family: ChainedProjectorFamily, n: int) -> list[Projector]:
    X = family.vectors(n)
    dims = (family.site_dim,) * n
    return [Projector.from_vectors(X[:, [i]], dims) for i in range(X.shape[1])]


@dataclass
class QuantumRecord:
    n: int
    trace: int
    log_lower: float  # n (s - 2 eps)
    log_upper: float  # n (s + 2 eps)
    tight_log_lower: float  # n (s - eps)
    tight_log_upper: float
    max_member_prob: float | None
    mass: float | None
    q1_residual: float | None
    q1_rank_ok: bool | None
    dense: bool

    @property
    def lower(self) -> float:
        return math.exp(self.log_lower)

    @property
    def upper(self) -> float:
        return math.exp(self.log_upper)

    def q1_ok(self) -> bool | None:
        if self.q1_rank_ok is None:
            return None
        return self.q1_rank_ok and self.q1_residual < Q1_TOL

    def q2_ok(self, tight: bool = False) -> bool:
        lo, hi = (self.tight_log_lower, self.tight_log_upper) if tight else (self.log_lower, self.log_upper)
        return lo + SLACK < math.log(self.trace) < hi - SLACK

    def q3_ok(self, tight: bool = False) -> bool | None:
        if self.max_member_prob is None:
            return None
        if self.max_member_prob <= 0:
            return True
        bound = -(self.tight_log_lower if tight else self.log_lower)
        return math.log(self.max_member_prob) < bound - SLACK

    def q4_ok(self, eps: float) -> bool | None:
        if self.mass is None:
            return None
        return self.mass > 1 - eps


@dataclass
class QuantumReport:
    """Per-depth checks of the chain, trace, equipartition and mass conditions.

    Flags are computed from ``records``; depths where a quantity could not be
    evaluated (beyond the dense cap) are listed in ``unchecked``.
    """

    s: float
    eps: float
    N_eps: int
    records: list[QuantumRecord]

    def _checked(self) -> list[QuantumRecord]:
        return [r for r in self.records if r.n >= self.N_eps]

    @property
    def q1(self) -> bool:
        return all(r.q1_ok() is not False for r in self.records)

    @property
    def q2(self) -> bool:
        return all(r.q2_ok() for r in self._checked())

    @property
    def q3(self) -> bool:
        return all(r.q3_ok() is not False for r in self._checked())

    @property
    def q4(self) -> bool:
        return all(r.q4_ok(self.eps) is not False for r in self.records)

    @property
    def q2_tight(self) -> bool:
        return all(r.q2_ok(tight=True) for r in self._checked())

    @property
    def q3_tight(self) -> bool:
        return all(r.q3_ok(tight=True) is not False for r in self._checked())

    @property
    def conditions(self) -> dict[str, bool]:
        return {"q1": self.q1, "q2": self.q2, "q3": self.q3, "q4": self.q4}

    @property
    def passed(self) -> bool:
        return self.N_eps <= len(self.records) and all(self.conditions.values())

    @property
    def observed_N(self) -> int:
        """Smallest ``N`` such that the trace and equipartition checks hold on ``[N, n_max]``."""
        N = len(self.records) + 1
        for r in reversed(self.records):
            if r.q2_ok() and r.q3_ok() is not False:
                N = r.n
            else:
                break
        return N

    @property
    def unchecked(self) -> dict[str, list[int]]:
        return {
            "q1": [r.n for r in self.records[:-1] if r.q1_rank_ok is None],
            "q3": [r.n for r in self.records if r.max_member_prob is None],
            "q4": [r.n for r in self.records if r.mass is None],
        }


def verify_quantum(family: ChainedProjectorFamily, eps: float | None = None, N_eps: int | None = None) -> QuantumReport:
    """Check the four conditions on every depth of ``family``.

    The trace and equipartition bounds use ``2 eps`` (the tolerance the
    construction guarantees); the report also exposes the ``eps`` versions.
    """
    eps = family.eps if eps is None else eps
    N_eps = family.N_eps if N_eps is None else N_eps
    s = family.s
    d = family.site_dim
    records = []
    vec_cache: dict[int, np.ndarray] = {}

    def vecs(n):
        # depth n is needed twice: for its own row and for row n - 1's chain check
        if n not in vec_cache:
            vec_cache.pop(n - 2, None)
            vec_cache[n] = family.vectors(n)
        return vec_cache[n]

    for n in range(1, family.n_max + 1):
        t = family._terms(n)
        dense = family.is_dense(n)
        max_p = mass = None
        if dense:
            e = expect_vectors(family.state, n, vecs(n))
            max_p, mass = float(e.max()), math.fsum(e)
        elif t.r == 0:
            e = np.exp(family.core_log_probs(n))
            max_p, mass = float(e.max()), math.fsum(e)
        residual = rank_ok = None
        if n < family.n_max and family.is_dense(n + 1):
            F = partial_trace_factor(vecs(n + 1), (1, n), (d,) * (n + 1))
            B = range_basis_of_factor(F, RANGE_TOL)
            rank_ok = B.shape[1] == t.rank
            if rank_ok:
                X = vecs(n)
                residual = float(np.max(np.abs(B @ B.conj().T - X @ X.conj().T)))
            else:
                residual = math.inf
        records.append(
            QuantumRecord(
                n=n,
                trace=t.rank,
                log_lower=n * (s - 2 * eps),
                log_upper=n * (s + 2 * eps),
                tight_log_lower=n * (s - eps),
                tight_log_upper=n * (s + eps),
                max_member_prob=max_p,
                mass=mass,
                q1_residual=residual,
                q1_rank_ok=rank_ok,
                dense=dense,
            )
        )
    return QuantumReport(s, eps, N_eps, records)
