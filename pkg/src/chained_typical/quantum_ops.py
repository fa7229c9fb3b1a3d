"""Dense linear algebra on finite tensor products of full matrix algebras.

Operators are complex numpy arrays together with a tuple of per-site
dimensions. Sites are numbered from 1. Kronecker products use the row-major
convention, so site 1 is the most significant tensor factor.

All eigendecompositions go through :func:`eigh`, which is the single fixed
routine the tie-breaking rules below rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .exceptions import DomainError, UnsupportedRangeError, ZeroOperatorError
from .validation import (
    HERMITIAN_ATOL,
    check_dense_cap,
    check_dims,
    check_hermitian,
    check_square,
)

RANGE_TOL = 1e-10
ZERO_FLOOR = 1e-14
CLUSTER_TOL = 1e-10


def eigh(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in non-increasing order and matching eigenvector columns."""
    w, V = np.linalg.eigh(A)
    return w[::-1].copy(), V[:, ::-1].copy()


def _mat(A) -> np.ndarray:
    return A.matrix if hasattr(A, "matrix") else np.asarray(A)


def _dims_of(A, site_dims) -> tuple[int, ...]:
    if site_dims is not None:
        return tuple(site_dims)
    if hasattr(A, "site_dims"):
        return tuple(A.site_dims)
    return (_mat(A).shape[0],)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    matrix: np.ndarray
    site_dims: tuple[int, ...]

    def __post_init__(self):
        M = check_hermitian(self.matrix, name="density operator")
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "site_dims", check_dims(self.site_dims, M.shape[0]))
        if abs(np.trace(M).real - 1.0) > HERMITIAN_ATOL:
            raise DomainError(f"density operator has trace {np.trace(M).real:.12g}")
        if np.linalg.eigvalsh(M).min() < -HERMITIAN_ATOL:
            raise DomainError("density operator is not positive semidefinite")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class Projector:
    matrix: np.ndarray
    site_dims: tuple[int, ...]
    rank: int

    @classmethod
    def from_vectors(cls, vectors: np.ndarray, site_dims: Sequence[int]) -> "Projector":
        """Projector onto the span of orthonormal columns."""
        V = np.asarray(vectors, dtype=complex)
        return cls(V @ V.conj().T, tuple(site_dims), V.shape[1])

    def check(self, atol: float = 1e-9) -> None:
        P = self.matrix
        if np.max(np.abs(P - P.conj().T)) > HERMITIAN_ATOL:
            raise DomainError("projector is not Hermitian")
        if np.max(np.abs(P @ P - P)) > atol:
            raise DomainError("projector is not idempotent")
        if abs(np.trace(P).real - self.rank) > atol:
            raise DomainError("projector trace does not match its rank")


@dataclass(frozen=True, eq=False)
class SpectralSet:
    """Rank-one eigenprojectors of a density operator.

    ``vectors[:, i]`` spans the i-th projector; ``eigenvalues`` is
    non-increasing.
    """

    vectors: np.ndarray
    eigenvalues: np.ndarray
    site_dims: tuple[int, ...]
    reference_index: np.ndarray

    def __len__(self) -> int:
        return self.vectors.shape[1]

    @property
    def projectors(self) -> list[Projector]:
        return [Projector.from_vectors(self.vectors[:, [i]], self.site_dims) for i in range(len(self))]

    def reconstruct(self) -> np.ndarray:
        V = self.vectors
        return (V * self.eigenvalues) @ V.conj().T


def kron(*ops) -> np.ndarray:
    return reduce(np.kron, [_mat(A) for A in ops])


def kron_dims(*ops) -> tuple[int, ...]:
    return tuple(d for A in ops for d in _dims_of(A, None))


def _keep_split(dims: tuple[int, ...], keep: tuple[int, int]) -> tuple[int, int, bool]:
    first, last = keep
    n = len(dims)
    if not (1 <= first <= last <= n):
        raise DomainError(f"keep range {keep} outside sites 1..{n}")
    if first != 1 and last != n:
        raise UnsupportedRangeError(f"keep range {keep} is neither a prefix nor a suffix of 1..{n}")
    if first == 1:
        d_keep = int(np.prod(dims[:last]))
        return d_keep, int(np.prod(dims[last:])), True
    d_keep = int(np.prod(dims[first - 1 :]))
    return d_keep, int(np.prod(dims[: first - 1])), False


def partial_trace(A, keep: tuple[int, int], site_dims: Sequence[int] | None = None) -> np.ndarray:
    """Trace out every site outside the contiguous range ``keep = (first, last)``.

    ``keep`` must be a prefix (``first == 1``) or suffix (``last == n``) of
    the sites.
    """
    M = check_square(_mat(A))
    dims = check_dims(_dims_of(A, site_dims), M.shape[0])
    d_keep, d_out, prefix = _keep_split(dims, keep)
    if prefix:
        T = M.reshape(d_keep, d_out, d_keep, d_out)
        return np.einsum("ajbj->ab", T)
    T = M.reshape(d_out, d_keep, d_out, d_keep)
    return np.einsum("jajb->ab", T)


def partial_trace_factor(V: np.ndarray, keep: tuple[int, int], site_dims: Sequence[int]) -> np.ndarray:
    """Factor ``F`` with ``F F^dag = partial_trace(V V^dag, keep)``.

    Cheaper than forming ``V V^dag`` when ``V`` has few columns.
    """
    V = np.asarray(V)
    dims = check_dims(site_dims, V.shape[0])
    d_keep, d_out, prefix = _keep_split(dims, keep)
    k = V.shape[1]
    if prefix:
        return V.reshape(d_keep, d_out * k)
    return V.reshape(d_out, d_keep, k).transpose(1, 0, 2).reshape(d_keep, d_out * k)


def range_projector(A, tol: float = RANGE_TOL, site_dims: Sequence[int] | None = None) -> Projector:
    """Projector onto eigenvectors with eigenvalue above ``tol * lambda_max``.

    Raises:
        ZeroOperatorError: the largest eigenvalue is below 1e-14.
    """
    return Projector.from_vectors(range_basis(A, tol), _dims_of(A, site_dims))


def range_basis(A, tol: float = RANGE_TOL) -> np.ndarray:
    """Orthonormal eigenvectors of ``A`` with eigenvalue above ``tol * lambda_max``."""
    M = check_hermitian(_mat(A), atol=1e-8, name="operator")
    w, V = eigh((M + M.conj().T) / 2)
    if w.size == 0 or w[0] < ZERO_FLOOR:
        raise ZeroOperatorError("range projector of a (numerically) zero operator")
    return V[:, w > tol * w[0]]


def range_basis_of_factor(F: np.ndarray, tol: float = RANGE_TOL) -> np.ndarray:
    """Orthonormal basis of the range of ``F F^dag``, same cut as :func:`range_projector`."""
    U, sv, _ = np.linalg.svd(F, full_matrices=False)
    if sv.size == 0 or sv[0] ** 2 < ZERO_FLOOR:
        raise ZeroOperatorError("range of a (numerically) zero factor")
    return U[:, sv**2 > tol * sv[0] ** 2]


def von_neumann_entropy(D) -> float:
    """``-tr D log D`` in nats, with ``0 log 0 = 0``."""
    w = np.linalg.eigvalsh(_mat(D))
    w = w[w > 0]
    return float(max(0.0, -np.sum(w * np.log(w))))


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def basis_entropy(D, basis: np.ndarray) -> float:
    """Shannon entropy of the diagonal of ``D`` in the orthonormal columns of ``basis``.

    Minimal (and equal to the von Neumann entropy) exactly for eigenbases.
    """
    B = np.asarray(basis)
    diag = np.real(np.einsum("ij,jk,ki->i", B.conj().T, _mat(D), B))
    return shannon_entropy(np.clip(diag, 0.0, None))


def _phase_normalize(v: np.ndarray) -> np.ndarray:
    idx = np.flatnonzero(np.abs(v) > 1e-10)
    if idx.size == 0:
        return v
    z = v[idx[0]]
    return v * (abs(z) / z)


def spectral_projectors(D, reference: np.ndarray | None = None, site_dims: Sequence[int] | None = None) -> SpectralSet:
    """Complete set of rank-one eigenprojectors of ``D``.

    Eigenvalues within 1e-10 of each other form one degenerate cluster.
    Inside a cluster the basis is taken from the columns of ``reference``
    (default: the computational basis): repeatedly pick the reference column
    with the largest component in the cluster's eigenspace not yet covered,
    then order the picks by column index. Every vector is phase-normalized so
    its first nonzero entry is real positive.
    """
    M = check_hermitian(_mat(D), name="density operator")
    dims = _dims_of(D, site_dims)
    d = M.shape[0]
    R = np.eye(d, dtype=complex) if reference is None else np.asarray(reference, dtype=complex)
    w, V = eigh((M + M.conj().T) / 2)
    vectors = []
    values = []
    ref_idx = []
    i = 0
    while i < d:
        j = i + 1
        while j < d and w[j - 1] - w[j] <= CLUSTER_TOL:
            j += 1
        Q = V[:, i:j]
        if j - i == 1:
            picks = [(int(np.argmax(np.abs(R.conj().T @ Q[:, 0]))), Q[:, 0])]
        else:
            picks = _split_cluster(Q, R)
        picks.sort(key=lambda t: t[0])
        rq = [float(np.real(v.conj() @ M @ v)) for _, v in picks]
        lam = rq[0] if len(rq) == 1 else float(np.mean(rq))
        for idx, v in picks:
            vectors.append(_phase_normalize(v))
            values.append(lam)
            ref_idx.append(idx)
        i = j
    return SpectralSet(np.column_stack(vectors), np.array(values), dims, np.array(ref_idx))


def _split_cluster(Q: np.ndarray, R: np.ndarray) -> list[tuple[int, np.ndarray]]:
    k = Q.shape[1]
    proj = Q @ (Q.conj().T @ R)  # reference columns projected into the eigenspace
    chosen: list[tuple[int, np.ndarray]] = []
    basis = np.zeros((Q.shape[0], 0), dtype=complex)
    used = set()
    for _ in range(k):
        resid = proj - basis @ (basis.conj().T @ proj)
        norms = np.linalg.norm(resid, axis=0)
        for u in used:
            norms[u] = -1.0
        j = int(np.argmax(norms))
        v = resid[:, j] / norms[j]
        # re-orthogonalize once for stability
        v = v - basis @ (basis.conj().T @ v)
        v /= np.linalg.norm(v)
        basis = np.column_stack([basis, v])
        chosen.append((j, v))
        used.add(j)
    return chosen


def expectation(D, A) -> float:
    """``tr(D A)``; the imaginary residue must stay below 1e-10."""
    Dm, Am = _mat(D), _mat(A)
    if Dm.shape != Am.shape:
        raise DomainError(f"dimension mismatch: {Dm.shape} vs {Am.shape}")
    val = np.einsum("ij,ji->", Dm, Am)
    if abs(val.imag) > 1e-10:
        raise DomainError(f"expectation has imaginary part {val.imag:.3g}; is A Hermitian?")
    return float(val.real)


def apply_sitewise(U: np.ndarray, X: np.ndarray, n: int) -> np.ndarray:
    """``U^{(x)n} @ X`` without forming the n-fold Kronecker power."""
    U = np.asarray(U)
    d = U.shape[0]
    X = np.asarray(X)
    vec = X.ndim == 1
    if vec:
        X = X[:, None]
    k = X.shape[1]
    T = X.reshape((d,) * n + (k,))
    for site in range(n):
        T = np.moveaxis(np.tensordot(U, T, axes=([1], [site])), 0, site)
    out = T.reshape(d**n, k)
    return out[:, 0] if vec else out


def conjugate_sitewise(U: np.ndarray, A: np.ndarray, n: int) -> np.ndarray:
    """``U^{(x)n} A (U^{(x)n})^dag``."""
    check_dense_cap(np.asarray(A).shape[0])
    left = apply_sitewise(U, A, n)
    return apply_sitewise(U, left.conj().T, n).conj().T


def kron_power(A: np.ndarray, n: int) -> np.ndarray:
    check_dense_cap(np.asarray(A).shape[0] ** n)
    return reduce(np.kron, [np.asarray(A)] * n) if n > 0 else np.eye(1)


def operator_to_json(A, site_dims: Sequence[int] | None = None) -> dict:
    M = np.asarray(_mat(A), dtype=complex)
    dims = list(_dims_of(A, site_dims))
    return {"dims": dims, "entries": [[float(z.real), float(z.imag)] for z in M.ravel()]}


def operator_from_json(obj: dict) -> tuple[np.ndarray, tuple[int, ...]]:
    dims = tuple(int(d) for d in obj["dims"])
    n = int(np.prod(dims))
    flat = np.array([complex(re, im) for re, im in obj["entries"]])
    if flat.size == n * n:
        return flat.reshape(n, n), dims
    if flat.size == n:
        return flat, dims
    raise DomainError(f"{flat.size} entries do not fit dims {dims}")


def projector_max_diff(X: np.ndarray, Y: np.ndarray, chunk: int = 512) -> float:
    """``max |X X^dag - Y Y^dag|`` computed in row blocks.

    Neither product is formed in full, so two projectors at the dense cap
    can be compared without holding both.
    """
    X, Y = np.asarray(X), np.asarray(Y)
    if X.shape[0] != Y.shape[0]:
        raise DomainError(f"row counts differ: {X.shape[0]} vs {Y.shape[0]}")
    Xh, Yh = X.conj().T, Y.conj().T
    out = 0.0
    for start in range(0, X.shape[0], chunk):
        block = X[start : start + chunk] @ Xh - Y[start : start + chunk] @ Yh
        if block.size:
            out = max(out, float(np.max(np.abs(block))))
    return out
