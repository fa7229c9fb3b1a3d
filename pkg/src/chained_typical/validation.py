"""Input validation helpers.

Each ``check_*`` function returns a cleaned copy of its input (as a numpy
array of the right dtype) or raises :class:`DomainError`.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .exceptions import DomainError, ResourceError

PROB_ATOL = 1e-12
HERMITIAN_ATOL = 1e-10
UNITARY_ATOL = 1e-10
DENSE_CAP = 4096


def check_probability_vector(p, name: str = "probability vector") -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise DomainError(f"{name} must be a non-empty 1-d array")
    if np.any(~np.isfinite(p)) or np.any(p < 0):
        raise DomainError(f"{name} has negative or non-finite entries")
    if abs(p.sum() - 1.0) > PROB_ATOL:
        raise DomainError(f"{name} sums to {p.sum():.16g}, not 1")
    return p


def check_transition_matrix(T, name: str = "transition matrix") -> np.ndarray:
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] == 0:
        raise DomainError(f"{name} must be a non-empty square matrix")
    if np.any(~np.isfinite(T)) or np.any(T < 0):
        raise DomainError(f"{name} has negative or non-finite entries")
    rows = T.sum(axis=1)
    bad = np.flatnonzero(np.abs(rows - 1.0) > PROB_ATOL)
    if bad.size:
        raise DomainError(f"{name} row {bad[0]} sums to {rows[bad[0]]:.16g}, not 1")
    return T


def is_primitive(T: np.ndarray) -> bool:
    """Irreducible and aperiodic, via positivity of a boolean matrix power.

    Wielandt: a primitive k x k matrix has a strictly positive power with
    exponent at most (k - 1)**2 + 1.
    """
    k = T.shape[0]
    A = (T > 0).astype(np.int64)
    R = A.copy()
    for _ in range((k - 1) ** 2):
        if R.all():
            return True
        R = np.minimum(R @ A, 1)
    return bool(R.all())


def check_square(A, name: str = "operator") -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f"{name} must be a square matrix, got shape {A.shape}")
    return A


def check_hermitian(A, atol: float = HERMITIAN_ATOL, name: str = "operator") -> np.ndarray:
    A = check_square(A, name)
    err = np.max(np.abs(A - A.conj().T)) if A.size else 0.0
    if err > atol:
        raise DomainError(f"{name} is not Hermitian (max |A - A^dag| = {err:.3g})")
    return A


def check_unitary(U, atol: float = UNITARY_ATOL, name: str = "unitary") -> np.ndarray:
    U = check_square(U, name)
    err = np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))
    if err > atol:
        raise DomainError(f"{name} is not unitary (max |U^dag U - I| = {err:.3g})")
    return U


def check_dims(site_dims: Sequence[int], dim: int) -> tuple[int, ...]:
    dims = tuple(int(d) for d in site_dims)
    if any(d < 1 for d in dims) or int(np.prod(dims, dtype=np.int64)) != dim:
        raise DomainError(f"site dims {dims} do not multiply to {dim}")
    return dims


def check_dense_cap(dim: int, what: str = "operator") -> None:
    if dim > DENSE_CAP:
        raise ResourceError(f"{what} of dimension {dim} exceeds the dense cap {DENSE_CAP}")


def check_word(word, alphabet_size: int) -> tuple[int, ...]:
    w = tuple(int(a) for a in word)
    for i, a in enumerate(w):
        if not 0 <= a < alphabet_size:
            raise DomainError(f"symbol {a} at position {i} out of range for alphabet of size {alphabet_size}")
    return w
