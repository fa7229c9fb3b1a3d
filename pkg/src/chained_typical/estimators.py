"""Estimator-style wrappers around the construction and coding pipelines.

``fit`` takes a known source (a :class:`ProcessModel` or a
:class:`LatticeState`), not data: nothing here estimates a model from
samples. The word-level methods accept 2D integer arrays, one word per row.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .chained_sets import build_chained_family, tighten_family, tune_band_start, verify_bstar
from .coder import Codebook, rate_report
from .exceptions import DomainError
from .lattice import LatticeState
from .process import ProcessModel, entropy_rate
from .projectors import build_chained_projectors, verify_quantum


def _check_model(model) -> ProcessModel:
    if not isinstance(model, ProcessModel):
        raise DomainError(f"fit expects a ProcessModel, got {type(model).__name__}")
    return model


def _check_words(X, alphabet_size: int) -> np.ndarray:
    X = check_array(X, dtype=np.int64, ensure_min_features=1)
    if X.size and (X.min() < 0 or X.max() >= alphabet_size):
        raise DomainError(f"symbols must lie in 0..{alphabet_size - 1}")
    return X


class ChainedTypicalSets(BaseEstimator):
    """Chained typical sets of a known source, with their verification report.

    Args:
        eps: tolerance of the four conditions.
        N_max: horizon (deepest slice).
        M: first depth where the band applies; ``None`` tunes it.
        build_eps: band width used for construction, defaults to ``eps``.
        tighten: apply the two-sided tightening pass after construction.
    """

    def __init__(self, eps: float = 0.1, N_max: int = 12, M: int | None = None, build_eps: float | None = None, tighten: bool = False):
        self.eps = eps
        self.N_max = N_max
        self.M = M
        self.build_eps = build_eps
        self.tighten = tighten

    def fit(self, model, y=None):
        model = _check_model(model)
        h = entropy_rate(model).h
        beps = self.eps if self.build_eps is None else self.build_eps
        M = self.M if self.M is not None else tune_band_start(model, h, beps, self.N_max)
        fam = build_chained_family(model, h, beps, M, self.N_max)
        if self.tighten:
            fam = tighten_family(fam, model, beps)
        self.model_ = model
        self.h_ = h
        self.M_ = M
        self.family_ = fam
        self.report_ = verify_bstar(fam, model, h, self.eps, fam.N_eps)
        return self

    def predict(self, X) -> np.ndarray:
        """Membership of each row of ``X`` in the slice of its length."""
        check_is_fitted(self, "family_")
        X = _check_words(X, self.family_.alphabet.size)
        return np.array([tuple(row) in self.family_ for row in X.tolist()], dtype=bool)

    def score(self, X=None, y=None) -> float:
        """1.0 when every condition holds, else 0.0."""
        check_is_fitted(self, "report_")
        return float(self.report_.passed)


class TypicalSetCoder(TransformerMixin, BaseEstimator):
    """Enumerative coder over a chained family of a known source.

    ``transform`` maps words to bit tuples; ``inverse_transform`` decodes
    them. ``M=None`` picks the band start by :func:`tune_band_start`.
    """

    def __init__(self, eps: float = 0.2, N_max: int = 16, M: int | None = None):
        self.eps = eps
        self.N_max = N_max
        self.M = M

    def fit(self, model, y=None):
        model = _check_model(model)
        h = entropy_rate(model).h
        M = self.M if self.M is not None else tune_band_start(model, h, self.eps, self.N_max)
        self.model_ = model
        self.codebook_ = Codebook(build_chained_family(model, h, self.eps, M, self.N_max))
        return self

    def transform(self, X) -> list[tuple[int, ...]]:
        check_is_fitted(self, "codebook_")
        X = _check_words(X, self.codebook_.alphabet_size)
        return [self.codebook_.encode(row) for row in X.tolist()]

    def inverse_transform(self, bits, n: int) -> np.ndarray:
        check_is_fitted(self, "codebook_")
        return np.array([self.codebook_.decode(b, n) for b in bits], dtype=np.int64).reshape(len(bits), n)

    def rate_report(self, n: int, trials: int, seed: int):
        check_is_fitted(self, "codebook_")
        return rate_report(self.codebook_, self.model_, n, trials, seed)


class ChainedTypicalProjectors(BaseEstimator):
    """Chained typical projectors of a lattice state and their verification report."""

    def __init__(
        self,
        eps: float = 0.15,
        N_max: int = 10,
        l_max: int = 12,
        block_length: int | None = None,
        band_eps: float | None = None,
        band_start: int | None = None,
    ):
        self.eps = eps
        self.N_max = N_max
        self.l_max = l_max
        self.block_length = block_length
        self.band_eps = band_eps
        self.band_start = band_start

    def fit(self, state, y=None):
        if not isinstance(state, LatticeState):
            raise DomainError(f"fit expects a LatticeState, got {type(state).__name__}")
        fam = build_chained_projectors(
            state,
            self.eps,
            self.N_max,
            l_max=self.l_max,
            block_length=self.block_length,
            band_eps=self.band_eps,
            band_start=self.band_start,
        )
        self.family_ = fam
        self.report_ = verify_quantum(fam)
        return self

    def projector(self, n: int):
        check_is_fitted(self, "family_")
        return self.family_.projector(n)

    def score(self, X=None, y=None) -> float:
        check_is_fitted(self, "report_")
        return float(self.report_.passed)
