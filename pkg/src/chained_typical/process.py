"""Finite-alphabet stochastic sources with exactly computable marginals.

Three model kinds are supported: iid sources, stationary Markov chains and
blocked versions of either (the source read ``l`` symbols at a time). All of
them are reduced to one finite-state description, the *stepper*: a table of
first-symbol probabilities and a table of next-symbol probabilities indexed
by an internal state. Marginals, band pruning and sampling all walk that
table, so every model kind shares one code path.

Words are tuples of symbol indices. Logarithms are natural throughout.
"""

from __future__ import annotations

import math
import warnings
from bisect import bisect_right
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Sequence

import numpy as np

from .exceptions import DomainError
from .validation import (
    PROB_ATOL,
    check_probability_vector,
    check_transition_matrix,
    check_word,
    is_primitive,
)

# Plain products are exact enough below this length; beyond it, log space.
PLAIN_PRODUCT_MAX_LEN = 64

Word = tuple[int, ...]


def flat(word: Sequence[int]) -> Word:
    """Drop the last symbol of a non-empty word."""
    if len(word) == 0:
        raise DomainError("flat is undefined for the empty word")
    return tuple(word[:-1])


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple[str, ...]

    def __post_init__(self):
        if len(self.symbols) == 0:
            raise DomainError("alphabet must have at least one symbol")
        if len(set(self.symbols)) != len(self.symbols):
            raise DomainError("alphabet symbols must be distinct")

    @classmethod
    def of_size(cls, k: int) -> "Alphabet":
        return cls(tuple(str(i) for i in range(k)))

    @property
    def size(self) -> int:
        return len(self.symbols)

    def format(self, word: Sequence[int]) -> str:
        sep = "" if all(len(s) == 1 for s in self.symbols) else " "
        return sep.join(self.symbols[a] for a in word)


@dataclass(frozen=True)
class EntropyRate:
    """Entropy rate in nats per symbol.

    ``initial_is_stationary`` is False when a Markov model was given a
    non-stationary initial law; the rate is then still the stationary one.
    """

    h: float
    initial_is_stationary: bool = True

    def __float__(self) -> float:
        return self.h


@dataclass(frozen=True)
class _Stepper:
    first_p: np.ndarray  # (A,)
    first_state: np.ndarray  # (A,)
    step_p: np.ndarray  # (S, A)
    next_state: np.ndarray  # (S, A)

    @cached_property
    def first_log(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.first_p)

    @cached_property
    def step_log(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.step_p)


@dataclass(frozen=True, eq=False)
class ProcessModel:
    """A stationary finite-alphabet source.

    Build instances with :func:`iid`, :func:`markov` or :func:`block_process`
    rather than calling the constructor directly.
    """

    kind: str
    alphabet: Alphabet
    probs: np.ndarray | None = None
    transition: np.ndarray | None = None
    initial: np.ndarray | None = None
    base: "ProcessModel | None" = None
    block: int = 1
    labels: tuple[int, ...] | None = field(default=None)

    @property
    def size(self) -> int:
        return self.alphabet.size

    def block_word(self, label: int) -> Word:
        """Base-model word carried by one symbol of a blocked model."""
        if self.kind != "blocked":
            raise DomainError("block_word is only defined for blocked models")
        idx = self.labels[label] if self.labels is not None else label
        return _digits(idx, self.base.size, self.block)

    def unblock(self, word: Sequence[int]) -> Word:
        out: list[int] = []
        for a in word:
            out.extend(self.block_word(a))
        return tuple(out)

    @cached_property
    def stepper(self) -> _Stepper:
        if self.kind == "iid":
            k = self.size
            return _Stepper(
                first_p=self.probs.copy(),
                first_state=np.zeros(k, dtype=np.int64),
                step_p=self.probs[None, :].copy(),
                next_state=np.zeros((1, k), dtype=np.int64),
            )
        if self.kind == "markov":
            k = self.size
            return _Stepper(
                first_p=self.initial.copy(),
                first_state=np.arange(k, dtype=np.int64),
                step_p=self.transition.copy(),
                next_state=np.tile(np.arange(k, dtype=np.int64), (k, 1)),
            )
        # blocked: run the base stepper through each block word
        bs = self.base.stepper
        n_states = bs.step_p.shape[0]
        k = self.size
        first_p = np.empty(k)
        first_state = np.empty(k, dtype=np.int64)
        step_p = np.empty((n_states, k))
        next_state = np.empty((n_states, k), dtype=np.int64)
        for b in range(k):
            w = self.block_word(b)
            first_p[b], first_state[b] = _run(bs, None, w)
            for s in range(n_states):
                step_p[s, b], next_state[s, b] = _run(bs, s, w)
        return _Stepper(first_p, first_state, step_p, next_state)


def _digits(index: int, base: int, length: int) -> Word:
    out = [0] * length
    for i in range(length - 1, -1, -1):
        index, out[i] = divmod(index, base)
    return tuple(out)


def _run(st: _Stepper, state: int | None, word: Sequence[int]) -> tuple[float, int]:
    p = 1.0
    for a in word:
        if state is None:
            p *= st.first_p[a]
            state = int(st.first_state[a])
        else:
            p *= st.step_p[state, a]
            state = int(st.next_state[state, a])
    return p, state


def stationary_distribution(T, tol: float = 1e-14, max_refine: int = 50) -> np.ndarray:
    """Left eigenvector of ``T`` for eigenvalue 1, normalized to sum 1.

    Solves the bordered system ``[T^t - I; 1^t] pi = [0; 1]`` by least squares
    and refines the solution until the residual drops below ``tol``.
    """
    T = np.asarray(T, dtype=float)
    k = T.shape[0]
    A = np.vstack([T.T - np.eye(k), np.ones((1, k))])
    b = np.zeros(k + 1)
    b[-1] = 1.0
    pi = np.linalg.lstsq(A, b, rcond=None)[0]
    for _ in range(max_refine):
        r = b - A @ pi
        if np.max(np.abs(r)) < tol:
            break
        pi = pi + np.linalg.lstsq(A, r, rcond=None)[0]
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def iid(probs, symbols: Sequence[str] | None = None) -> ProcessModel:
    p = check_probability_vector(probs)
    alphabet = Alphabet(tuple(symbols)) if symbols is not None else Alphabet.of_size(p.size)
    if alphabet.size != p.size:
        raise DomainError("symbol list and probability vector differ in length")
    return ProcessModel("iid", alphabet, probs=p)


def markov(transition, initial=None, symbols: Sequence[str] | None = None) -> ProcessModel:
    """Markov chain; ``initial`` defaults to the stationary law.

    The chain must be irreducible and aperiodic.
    """
    T = check_transition_matrix(transition)
    if not is_primitive(T):
        raise DomainError("transition matrix is not irreducible and aperiodic")
    init = stationary_distribution(T) if initial is None else check_probability_vector(initial, "initial distribution")
    if init.size != T.shape[0]:
        raise DomainError("initial distribution and transition matrix differ in size")
    alphabet = Alphabet(tuple(symbols)) if symbols is not None else Alphabet.of_size(T.shape[0])
    if alphabet.size != T.shape[0]:
        raise DomainError("symbol list and transition matrix differ in size")
    return ProcessModel("markov", alphabet, transition=T, initial=init)


def block_process(model: ProcessModel, l: int, labels: Sequence[int] | None = None) -> ProcessModel:
    """Read ``model`` in blocks of ``l`` symbols.

    Block symbols enumerate the base words of length ``l`` in lexicographic
    order, unless ``labels`` is given: then block symbol ``i`` stands for the
    base word with lexicographic index ``labels[i]``.
    """
    if l < 1:
        raise DomainError("block length must be >= 1")
    k = model.size**l
    if labels is not None:
        labels = tuple(int(i) for i in labels)
        if sorted(labels) != list(range(k)):
            raise DomainError("labels must be a permutation of the block words")
    sep = "" if all(len(s) == 1 for s in model.alphabet.symbols) else "."
    words = [_digits(labels[i] if labels else i, model.size, l) for i in range(k)]
    alphabet = Alphabet(tuple(sep.join(model.alphabet.symbols[a] for a in w) for w in words))
    return ProcessModel("blocked", alphabet, base=model, block=l, labels=labels)


def marginal_prob(model: ProcessModel, word: Sequence[int]) -> float:
    """Exact probability of the cylinder set fixed by ``word``."""
    w = check_word(word, model.size)
    if len(w) > PLAIN_PRODUCT_MAX_LEN:
        return math.exp(log_marginal_prob(model, w))
    return _run(model.stepper, None, w)[0]


def log_marginal_prob(model: ProcessModel, word: Sequence[int]) -> float:
    w = check_word(word, model.size)
    st = model.stepper
    total = 0.0
    state = None
    for a in w:
        if state is None:
            total += st.first_log[a]
            state = st.first_state[a]
        else:
            total += st.step_log[state, a]
            state = st.next_state[state, a]
    return float(total)


def _shannon(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def entropy_rate(model: ProcessModel) -> EntropyRate:
    if model.kind == "iid":
        return EntropyRate(_shannon(model.probs))
    if model.kind == "markov":
        T = model.transition
        pi = stationary_distribution(T)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(T > 0, T * np.log(T), 0.0)
        h = float(-pi @ terms.sum(axis=1))
        stationary = bool(np.max(np.abs(pi - model.initial)) <= PROB_ATOL)
        if not stationary:
            warnings.warn("initial law is not stationary; rate uses the stationary law", RuntimeWarning)
        return EntropyRate(h, stationary)
    base = entropy_rate(model.base)
    return EntropyRate(model.block * base.h, base.initial_is_stationary)


def empirical_entropy(model: ProcessModel, word: Sequence[int]) -> float:
    """``-(1/n) log P(word)`` in nats."""
    if len(word) == 0:
        raise DomainError("empirical entropy needs a non-empty word")
    lp = log_marginal_prob(model, word)
    if lp == -math.inf:
        raise DomainError("word has zero probability")
    return -lp / len(word)


def sample_words(model: ProcessModel, n: int, size: int, seed: int) -> np.ndarray:
    """Draw ``size`` independent words of length ``n`` as a (size, n) array.

    Symbols are drawn by inverse CDF from one block of uniforms, so the
    result is a pure function of ``(model, n, size, seed)``.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    st = model.stepper
    u = np.random.default_rng(seed).random((size, n))
    first_cdf = np.cumsum(st.first_p)
    step_cdf = np.cumsum(st.step_p, axis=1)
    last = model.size - 1
    out = np.empty((size, n), dtype=np.int64)
    if size == 1:
        # scalar loop; same inverse-CDF rule as the batched branch
        fc = first_cdf.tolist()
        sc = step_cdf.tolist()
        ns = st.next_state.tolist()
        fs = st.first_state.tolist()
        row = u[0].tolist()
        a = min(bisect_right(fc, row[0]), last)
        state = fs[a]
        out[0, 0] = a
        for t in range(1, n):
            a = min(bisect_right(sc[state], row[t]), last)
            out[0, t] = a
            state = ns[state][a]
        return out
    a = np.minimum((u[:, 0, None] >= first_cdf[None, :]).sum(axis=1), last)
    state = st.first_state[a]
    out[:, 0] = a
    for t in range(1, n):
        a = np.minimum((u[:, t, None] >= step_cdf[state]).sum(axis=1), last)
        out[:, t] = a
        state = st.next_state[state, a]
    return out


def sample_trajectory(model: ProcessModel, n: int, seed: int) -> Word:
    return tuple(int(a) for a in sample_words(model, n, 1, seed)[0])


def all_words(k: int, n: int):
    """All words of length ``n`` over ``k`` symbols, lexicographic."""
    return product(range(k), repeat=n)


def prefix_log_marginals(model: ProcessModel, words: np.ndarray) -> np.ndarray:
    """Log-probabilities of every prefix of every row of ``words``.

    Returns an array ``L`` of the same shape with ``L[i, k-1] = log P(words[i, :k])``.
    """
    W = np.asarray(words, dtype=np.int64)
    if W.ndim != 2:
        raise DomainError("words must be a 2-d array")
    # column-major so each step reads and writes contiguous columns
    W = np.asfortranarray(W)
    out = np.empty(W.shape, order="F")
    if W.shape[1] == 0 or W.shape[0] == 0:
        return out
    if W.min() < 0 or W.max() >= model.size:
        raise DomainError("symbol out of range")
    st = model.stepper
    out[:, 0] = st.first_log[W[:, 0]]
    state = st.first_state[W[:, 0]]
    for t in range(1, W.shape[1]):
        out[:, t] = out[:, t - 1] + st.step_log[state, W[:, t]]
        state = st.next_state[state, W[:, t]]
    return out
