"""Chained typical set families at a finite horizon.

A family stores, for every depth ``n = 1..n_max``, a lexicographically
sorted slice ``C[n]`` of words of length ``n``. Families built here are
prefix sets of their deepest slice, so every slice is exactly the set of
one-symbol truncations of the next one.

Band comparisons are made on log-probabilities with a strict inequality and
a fixed slack (:data:`SLACK`): a word within ``SLACK`` of a band edge counts
as outside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .exceptions import ConstructionError, DomainError, ResourceError, TighteningError
from .process import Alphabet, EntropyRate, ProcessModel, prefix_log_marginals

SLACK = 1e-12
MAX_FRONTIER = 20_000_000


def k_epsilon(eps: float, h: float = 0.0, k_max: int = 10_000_000) -> int:
    """Smallest ``k`` with ``(1 - eps) e^{k(h - eps/2)} > e^{k(h - eps)}``.

    For ``eps >= 1`` the left side is never positive; the mass condition it
    protects is then vacuous and 1 is returned.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    if eps >= 1:
        return 1
    log_lhs0 = math.log1p(-eps)
    for k in range(1, k_max + 1):
        if log_lhs0 + k * (h - eps / 2) > k * (h - eps):
            return k
    raise DomainError(f"k(eps) exceeds {k_max}")


@dataclass(frozen=True, eq=False)
class ChainedFamily:
    """Per-depth word sets ``C[1..n_max]``.

    ``slices[n - 1]`` is an (count, n) int array whose rows are the members
    of ``C[n]`` in lexicographic order.
    """

    alphabet: Alphabet
    slices: tuple[np.ndarray, ...]
    h: float
    epsilon: float
    M: int
    N_eps: int

    @classmethod
    def from_leaves(cls, alphabet: Alphabet, leaves, h: float, epsilon: float, M: int, N_eps: int) -> "ChainedFamily":
        """Family whose slices are the prefix sets of ``leaves``."""
        W = np.asarray(leaves, dtype=np.int64)
        if W.ndim != 2 or W.shape[0] == 0 or W.shape[1] == 0:
            raise ConstructionError("a family needs at least one leaf of positive length", depth=1)
        first = _first_difference(W)
        if not np.all(first < W.shape[1]) or not _is_increasing(W, first):
            W = np.unique(W, axis=0)
            first = _first_difference(W)
        # the depth-n prefix of row i is new exactly when rows i-1 and i differ before column n
        slices = []
        for n in range(1, W.shape[1] + 1):
            keep = np.concatenate([[True], first < n])
            slices.append(W[keep, :n].copy())
        for s in slices:
            s.setflags(write=False)
        return cls(alphabet, tuple(slices), float(h), float(epsilon), int(M), int(N_eps))

    @property
    def n_max(self) -> int:
        return len(self.slices)

    @property
    def leaves(self) -> np.ndarray:
        return self.slices[-1]

    def slice(self, n: int) -> np.ndarray:
        if not 1 <= n <= self.n_max:
            raise DomainError(f"depth {n} outside 1..{self.n_max}")
        return self.slices[n - 1]

    def words(self, n: int) -> Iterator[tuple[int, ...]]:
        for row in self.slice(n):
            yield tuple(int(a) for a in row)

    def __contains__(self, word) -> bool:
        n = len(word)
        if not 1 <= n <= self.n_max:
            return False
        return self.rank(word) is not None

    def rank(self, word) -> int | None:
        """Lexicographic index of ``word`` in its slice, by binary search."""
        S = self.slice(len(word))
        key = np.asarray(word, dtype=np.int64)
        lo, hi = 0, S.shape[0]
        while lo < hi:
            mid = (lo + hi) // 2
            if _lex_less(S[mid], key):
                lo = mid + 1
            else:
                hi = mid
        if lo < S.shape[0] and np.array_equal(S[lo], key):
            return lo
        return None

    @cached_property
    def trie(self) -> "PrefixTrie":
        return PrefixTrie(self.leaves, self.alphabet.size)


def _lex_less(a: np.ndarray, b: np.ndarray) -> bool:
    diff = np.flatnonzero(a != b)
    return bool(diff.size) and a[diff[0]] < b[diff[0]]


def _first_difference(W: np.ndarray) -> np.ndarray:
    """Column of the first difference between consecutive rows (``W.shape[1]`` if equal)."""
    ne = W[1:] != W[:-1]
    return np.where(ne.any(axis=1), ne.argmax(axis=1), W.shape[1])


def _is_increasing(W: np.ndarray, first: np.ndarray) -> bool:
    rows = np.arange(first.shape[0])
    return bool(np.all(W[rows + 1, first] > W[rows, first]))


def _unique_rows(W: np.ndarray) -> np.ndarray:
    # rows of W are sorted, so duplicates are adjacent
    if W.shape[0] <= 1:
        return W.copy()
    keep = np.ones(W.shape[0], dtype=bool)
    keep[1:] = np.any(W[1:] != W[:-1], axis=1)
    return W[keep].copy()


class PrefixTrie:
    """Prefix tree over the leaves of a family with per-depth subtree counts.

    ``count[node][d]`` is the number of distinct depth-``d`` descendants of
    ``node`` (including the node itself when it sits at depth ``d``). One walk
    from the root therefore yields the lexicographic rank of a word at every
    depth simultaneously.
    """

    def __init__(self, leaves: np.ndarray, alphabet_size: int):
        self.alphabet_size = alphabet_size
        self.depth = leaves.shape[1]
        self.children: list[dict[int, int]] = [{}]
        node_depth = [0]
        for row in leaves:
            node = 0
            for a in row:
                a = int(a)
                nxt = self.children[node].get(a)
                if nxt is None:
                    nxt = len(self.children)
                    self.children[node][a] = nxt
                    self.children.append({})
                    node_depth.append(node_depth[node] + 1)
                node = nxt
        count = np.zeros((len(self.children), self.depth + 1), dtype=np.int64)
        for node in range(len(self.children) - 1, -1, -1):
            count[node, node_depth[node]] = 1
            for child in self.children[node].values():
                count[node] += count[child]
        self.count = count

    def prefix_ranks(self, word: Sequence[int]) -> list[int | None]:
        """Rank of ``word[:k]`` within its depth-k slice, for k = 1..len(word).

        Entries become None from the first prefix that leaves the tree.
        """
        n = len(word)
        acc = np.zeros(self.depth + 1, dtype=np.int64)
        ranks: list[int | None] = []
        node = 0
        for k, a in enumerate(word, start=1):
            kids = self.children[node]
            for b, child in kids.items():
                if b < a:
                    acc += self.count[child]
            node = kids.get(int(a))
            if node is None:
                ranks.extend([None] * (n - k + 1))
                return ranks
            ranks.append(int(acc[k]))
        return ranks

    def unrank(self, rank: int, n: int) -> tuple[int, ...]:
        if not 0 <= rank < self.count[0, n]:
            raise DomainError(f"rank {rank} outside slice of size {self.count[0, n]}")
        node = 0
        out = []
        for _ in range(n):
            for b in sorted(self.children[node]):
                child = self.children[node][b]
                c = self.count[child, n]
                if rank < c:
                    out.append(b)
                    node = child
                    break
                rank -= c
        return tuple(out)


def build_chained_family(model: ProcessModel, h, eps: float, M: int, N_max: int) -> ChainedFamily:
    """Words of length ``N_max`` whose prefixes of length ``M..N_max`` stay in band.

    The band at depth ``n`` is ``e^{-n(h + eps/2)} < P(prefix) < e^{-n(h - eps/2)}``.
    Prefixes shorter than ``M`` are never pruned for being too probable; they
    are pruned early only when they have zero probability or are already too
    improbable to re-enter the band at depth ``M`` (probabilities only shrink
    along a word, so this does not change the result).

    Raises:
        ConstructionError: the surviving set is empty at some depth.
    """
    h = float(h)
    if eps <= 0:
        raise DomainError("eps must be positive")
    if not 1 <= M <= N_max:
        raise DomainError(f"need 1 <= M <= N_max, got M={M}, N_max={N_max}")
    st = model.stepper
    k = model.size
    half = eps / 2
    floor_at_M = -M * (h + half) + SLACK

    words = np.arange(k, dtype=np.int64)[:, None]
    logp = st.first_log.copy()
    state = st.first_state.copy()
    for n in range(1, N_max + 1):
        if n > 1:
            if words.shape[0] * k > MAX_FRONTIER:
                raise ResourceError(f"band frontier at depth {n} exceeds {MAX_FRONTIER} words")
            words = np.hstack([np.repeat(words, k, axis=0), np.tile(np.arange(k), words.shape[0])[:, None]])
            logp = (logp[:, None] + st.step_log[state]).ravel()
            state = st.next_state[state].ravel()
        if n >= M:
            keep = (logp > -n * (h + half) + SLACK) & (logp < -n * (h - half) - SLACK)
        else:
            keep = logp > floor_at_M
        words, logp, state = words[keep], logp[keep], state[keep]
        if words.shape[0] == 0:
            raise ConstructionError(
                f"family is empty at depth {n} (M={M} too small or eps={eps} too tight for h={h:.6g})",
                depth=n,
            )
    return ChainedFamily.from_leaves(model.alphabet, words, h, eps, M, max(k_epsilon(eps, h), M))


def tighten_family(family: ChainedFamily, model: ProcessModel, eps: float) -> ChainedFamily:
    """Drop leaves whose prefixes fall below ``e^{-k(h + eps)}`` for some ``k >= N``.

    ``family`` is expected to have been built with ``eps / 2``. The threshold
    ``N`` is ``max(family.N_eps, k(eps))``; the chain property is restored by
    re-deriving every slice from the surviving leaves.

    Raises:
        TighteningError: no leaf survives.
    """
    h = family.h
    N_bar = max(family.N_eps, k_epsilon(eps, h))
    leaves = family.leaves
    L = prefix_log_marginals(model, leaves)
    keep = np.ones(leaves.shape[0], dtype=bool)
    for k in range(N_bar, family.n_max + 1):
        keep &= L[:, k - 1] > -k * (h + eps) + SLACK
    if not keep.any():
        raise TighteningError("tightening removed every word of the family", depth=family.n_max)
    return ChainedFamily.from_leaves(family.alphabet, leaves[keep], h, eps, family.M, N_bar)


def family_cardinality(family: ChainedFamily, n: int) -> int:
    return int(family.slice(n).shape[0])


def slice_mass(family: ChainedFamily, model: ProcessModel, n: int) -> float:
    L = prefix_log_marginals(model, family.slice(n))[:, -1]
    return math.fsum(np.exp(L))


def _deepest_mass(model: ProcessModel, h, eps: float, M: int, N_max: int) -> float:
    try:
        fam = build_chained_family(model, h, eps, M, N_max)
    except ConstructionError:
        return 0.0
    return slice_mass(fam, model, N_max)


def tune_band_start(model: ProcessModel, h, eps: float, N_max: int, mass_target: float | None = None) -> int:
    """Smallest band start ``M`` giving a non-empty family of mass > 1 - eps at ``N_max``.

    ``mass_target`` replaces ``1 - eps`` as the required mass when given.

    Raises:
        ConstructionError: no ``M`` in ``1..N_max`` qualifies; the message
            names the ``M`` with the largest deepest-slice mass.
    """
    target = 1 - eps if mass_target is None else mass_target
    tried = []
    for M in range(1, N_max + 1):
        mass = _deepest_mass(model, h, eps, M, N_max)
        if mass > target:
            return M
        tried.append((M, mass))
    best = max(tried, key=lambda t: t[1])
    raise ConstructionError(
        f"no band start reaches mass > {target:.6g} at depth {N_max}; best M={best[0]} with mass {best[1]:.6g}",
        depth=N_max,
    )


def best_band_start(model: ProcessModel, h, eps: float, N_max: int) -> tuple[int, float]:
    """``(M, mass)`` maximizing the deepest-slice mass over ``M = 1..N_max`` (smallest ``M`` on ties)."""
    masses = [(M, _deepest_mass(model, h, eps, M, N_max)) for M in range(1, N_max + 1)]
    return max(masses, key=lambda t: (t[1], -t[0]))


@dataclass
class BStarRecord:
    n: int
    cardinality: int
    log_lower: float
    log_upper: float
    max_log_prob: float
    mass: float
    chain_ok: bool | None

    @property
    def lower(self) -> float:
        return math.exp(self.log_lower)

    @property
    def upper(self) -> float:
        return math.exp(self.log_upper)

    @property
    def max_member_prob(self) -> float:
        return math.exp(self.max_log_prob)

    def growth_ok(self) -> bool:
        lc = math.log(self.cardinality) if self.cardinality else -math.inf
        return self.log_lower + SLACK < lc < self.log_upper - SLACK

    def semi_aep_ok(self) -> bool:
        return self.max_log_prob < -self.log_lower - SLACK

    def mass_ok(self, eps: float) -> bool:
        return self.mass > 1 - eps


@dataclass
class BStarReport:
    """Outcome of checking the four chained-typicality conditions.

    Pass flags are properties computed from ``records``.
    """

    h: float
    eps: float
    N_eps: int
    records: list[BStarRecord]
    violations: dict[str, str] = field(default_factory=dict)
    slack: float = SLACK

    def _checked(self) -> list[BStarRecord]:
        return [r for r in self.records if r.n >= self.N_eps]

    @property
    def chained(self) -> bool:
        return all(r.chain_ok for r in self.records if r.chain_ok is not None)

    @property
    def growth(self) -> bool:
        return all(r.growth_ok() for r in self._checked())

    @property
    def semi_aep(self) -> bool:
        return all(r.semi_aep_ok() for r in self._checked())

    @property
    def typical(self) -> bool:
        return all(r.mass_ok(self.eps) for r in self.records)

    @property
    def conditions(self) -> dict[str, bool]:
        return {"chained": self.chained, "growth": self.growth, "semi_aep": self.semi_aep, "typical": self.typical}

    @property
    def passed(self) -> bool:
        return all(self.conditions.values())


def verify_bstar(family: ChainedFamily, model: ProcessModel, h, eps: float, N_eps: int) -> BStarReport:
    """Check chain equality, growth rate, upper semi-AEP and mass for ``family``.

    Failures are recorded in the report; the lexicographically smallest
    offending word is kept per failed condition.
    """
    h = float(h)
    records = []
    violations: dict[str, str] = {}
    fmt = family.alphabet.format
    for n in range(1, family.n_max + 1):
        S = family.slice(n)
        L = prefix_log_marginals(model, S)[:, -1] if S.shape[0] else np.empty(0)
        chain_ok = None
        if n < family.n_max:
            parents = _unique_rows(family.slice(n + 1)[:, :n])
            chain_ok = parents.shape == S.shape and np.array_equal(parents, S)
            if not chain_ok and "chained" not in violations:
                bad = _first_symmetric_difference(S, parents)
                violations["chained"] = f"n={n}: {fmt(bad)}"
        rec = BStarRecord(
            n=n,
            cardinality=int(S.shape[0]),
            log_lower=n * (h - eps),
            log_upper=n * (h + eps),
            max_log_prob=float(L.max()) if L.size else -math.inf,
            mass=math.fsum(np.exp(L)),
            chain_ok=chain_ok,
        )
        if n >= N_eps and not rec.semi_aep_ok() and "semi_aep" not in violations:
            idx = int(np.flatnonzero(L >= -rec.log_lower - SLACK)[0])
            violations["semi_aep"] = f"n={n}: {fmt(S[idx])}"
        records.append(rec)
    return BStarReport(h, eps, N_eps, records, violations)


def _first_symmetric_difference(A: np.ndarray, B: np.ndarray) -> tuple[int, ...]:
    a = {tuple(r) for r in A.tolist()}
    b = {tuple(r) for r in B.tolist()}
    return min(a ^ b)
