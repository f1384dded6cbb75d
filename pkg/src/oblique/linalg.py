"""Dense linear-algebra core: subspaces, oblique projectors, rank decisions.

Conventions used everywhere downstream:

* a matrix ``A`` with shape ``(m, n)`` maps R^n (domain) into R^m (codomain);
* a subspace is stored as a matrix with orthonormal columns, and the trivial
  subspace is a first-class value with zero columns;
* complements default to orthogonal complements but any transversal
  complement may be supplied explicitly.

All values are immutable after construction and all operations are pure
functions, so everything here is safe to call concurrently.
"""

from dataclasses import dataclass

import numpy as np

from .config import DEFAULTS, Numerics
from .errors import ComplementError

__all__ = [
    "Subspace",
    "Projector",
    "as_matrix",
    "op_norm",
    "rank_of",
    "kernel_of",
    "range_of",
    "orth_basis",
    "oblique_projector",
    "subspace_distance",
    "direct_sum_check",
    "splitting_margin",
    "intersection_margin",
]


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-d float array, raising ValueError otherwise."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def op_norm(a) -> float:
    """Spectral norm (largest singular value); 0 for empty matrices."""
    arr = np.asarray(a, dtype=float)
    if arr.size == 0:
        return 0.0
    return float(np.linalg.svd(arr, compute_uv=False)[0])


def _rank_from_singular_values(s: np.ndarray, shape, tol: float | None) -> int:
    if s.size == 0 or s[0] <= 0.0:
        return 0
    rel = max(shape) * np.finfo(float).eps if tol is None else tol
    return int(np.sum(s > rel * s[0]))


def rank_of(a, tol: float | None = None) -> int:
    """Numerical rank: count of singular values above ``tol * sigma_max``.

    ``tol`` is relative; None selects max(rows, cols) * machine epsilon.
    The zero matrix has rank 0.
    """
    arr = as_matrix(a)
    if arr.size == 0:
        return 0
    s = np.linalg.svd(arr, compute_uv=False)
    return _rank_from_singular_values(s, arr.shape, tol)


@dataclass(frozen=True)
class Subspace:
    """A linear subspace of R^n held as an orthonormal column basis.

    ``basis`` has shape (ambient_dim, dim); dim may be zero.
    """

    basis: np.ndarray

    def __post_init__(self):
        arr = as_matrix(self.basis, "basis")
        object.__setattr__(self, "basis", arr)
        n, k = arr.shape
        if k > n:
            raise ValueError(f"basis has more columns ({k}) than rows ({n})")
        gram = arr.T @ arr
        if not np.allclose(gram, np.eye(k), atol=DEFAULTS.tol_ortho):
            raise ValueError("basis columns are not orthonormal")

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @staticmethod
    def trivial(ambient_dim: int) -> "Subspace":
        return Subspace(np.zeros((ambient_dim, 0)))

    @staticmethod
    def full(ambient_dim: int) -> "Subspace":
        return Subspace(np.eye(ambient_dim))

    @staticmethod
    def span(*vectors) -> "Subspace":
        """Subspace spanned by the given ambient vectors (orthonormalized)."""
        cols = np.column_stack([np.asarray(v, dtype=float) for v in vectors])
        return Subspace._wrap(orth_basis(cols))

    @staticmethod
    def _wrap(basis: np.ndarray) -> "Subspace":
        # Fast path for bases coming straight out of an SVD/QR: orthonormal
        # by construction, so the validating __post_init__ is skipped.
        obj = object.__new__(Subspace)
        object.__setattr__(obj, "basis", basis)
        return obj

    def orthogonal_complement(self) -> "Subspace":
        if self.dim == 0:
            return Subspace.full(self.ambient_dim)
        return kernel_of(self.basis.T)

    def orthogonal_projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def contains(self, vector, tol: float | None = None) -> bool:
        v = np.asarray(vector, dtype=float)
        tol = DEFAULTS.tol_num if tol is None else tol
        resid = v - self.basis @ (self.basis.T @ v)
        return float(np.linalg.norm(resid)) <= tol * (1.0 + float(np.linalg.norm(v)))


def orth_basis(a, tol: float | None = None) -> np.ndarray:
    """Orthonormal basis of the column space of ``a`` (SVD-based)."""
    arr = as_matrix(a)
    if arr.shape[1] == 0:
        return np.zeros((arr.shape[0], 0))
    u, s, _ = np.linalg.svd(arr, full_matrices=False)
    r = _rank_from_singular_values(s, arr.shape, tol)
    return u[:, :r]


def kernel_of(a, tol: float | None = None) -> Subspace:
    """Orthonormal basis of the null space at the given rank tolerance."""
    arr = as_matrix(a)
    m, n = arr.shape
    if arr.size == 0 or m == 0:
        return Subspace.full(n)
    _, s, vh = np.linalg.svd(arr)
    r = _rank_from_singular_values(s, arr.shape, tol)
    return Subspace._wrap(vh[r:].T)


def range_of(a, tol: float | None = None) -> Subspace:
    """Orthonormal basis of the column space at the given rank tolerance."""
    arr = as_matrix(a)
    m, n = arr.shape
    if arr.size == 0 or n == 0:
        return Subspace.trivial(m)
    u, s, _ = np.linalg.svd(arr)
    r = _rank_from_singular_values(s, arr.shape, tol)
    return Subspace._wrap(u[:, :r])


@dataclass(frozen=True)
class Projector:
    """An idempotent matrix with a recorded range and nullspace."""

    matrix: np.ndarray
    range: Subspace
    nullspace: Subspace

    def __call__(self, x):
        return self.matrix @ np.asarray(x, dtype=float)

    @property
    def ambient_dim(self) -> int:
        return self.matrix.shape[0]


def _stacked_min_singular(u: Subspace, v: Subspace) -> float:
    """Smallest singular value of [u.basis | v.basis]; 1.0 when empty."""
    stacked = np.hstack([u.basis, v.basis])
    if stacked.shape[1] == 0:
        return 1.0
    s = np.linalg.svd(stacked, compute_uv=False)
    return float(s[-1]) if stacked.shape[1] <= stacked.shape[0] else 0.0


def splitting_margin(u: Subspace, v: Subspace, cfg: Numerics = DEFAULTS) -> float:
    """Signed evidence that ``u + v`` is a direct sum of the ambient space.

    Positive values certify transversality (smallest stacked singular value
    minus ``tol_split``); -1.0 flags a dimension count that cannot split.
    """
    if u.ambient_dim != v.ambient_dim:
        raise ValueError("subspaces live in different ambient spaces")
    if u.dim + v.dim != u.ambient_dim:
        return -1.0
    return _stacked_min_singular(u, v) - cfg.tol_split


def intersection_margin(u: Subspace, v: Subspace, cfg: Numerics = DEFAULTS) -> float:
    """Signed evidence that ``u`` and ``v`` intersect only in {0}."""
    if u.ambient_dim != v.ambient_dim:
        raise ValueError("subspaces live in different ambient spaces")
    if u.dim + v.dim > u.ambient_dim:
        return -1.0
    return _stacked_min_singular(u, v) - cfg.tol_split


def direct_sum_check(u: Subspace, v: Subspace, cfg: Numerics = DEFAULTS) -> bool:
    """True iff dims sum to the ambient dimension and the stacked basis is
    uniformly non-degenerate (its smallest singular value exceeds tol_split)."""
    return splitting_margin(u, v, cfg) > 0.0


def oblique_projector(range_: Subspace, nullspace: Subspace, cfg: Numerics = DEFAULTS) -> Projector:
    """Projector onto ``range_`` along ``nullspace``.

    Built as ``B (C^T B)^{-1} C^T`` where B holds the range basis and the
    columns of C span the orthogonal complement of the nullspace.

    Raises ComplementError unless range_ (+) nullspace spans the ambient
    space transversally.
    """
    n = range_.ambient_dim
    if nullspace.ambient_dim != n:
        raise ValueError("range and nullspace live in different ambient spaces")
    margin = splitting_margin(range_, nullspace, cfg)
    if margin <= 0.0:
        raise ComplementError(
            f"not a direct sum: dim {range_.dim} + {nullspace.dim} in R^{n}, margin {margin:.3e}"
        )
    if range_.dim == 0:
        matrix = np.zeros((n, n))
    elif nullspace.dim == 0:
        matrix = np.eye(n)
    else:
        b = range_.basis
        c = nullspace.orthogonal_complement().basis
        cross = c.T @ b
        # Transversality already certified, so the square factor is invertible.
        matrix = b @ np.linalg.solve(cross, c.T)
    return Projector(matrix=matrix, range=range_, nullspace=nullspace)


def subspace_distance(u: Subspace, v: Subspace) -> float:
    """Gap metric: spectral norm of the difference of orthogonal projectors.

    Equals the sine of the largest principal angle for equal dimensions and
    1.0 whenever the dimensions differ.
    """
    if u.ambient_dim != v.ambient_dim:
        raise ValueError("subspaces live in different ambient spaces")
    return op_norm(u.orthogonal_projector() - v.orthogonal_projector())
