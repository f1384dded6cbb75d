"""Families of subspaces and their coordinate operators.

If two subspaces M0 and Mx of equal dimension share a complement E*, then Mx
is the graph of a unique linear map a : M0 -> E*, i.e. Mx = {e + a e}.  The
functions here compute that map, rebuild subspaces from it, derive kernel
families from differentiable maps, and probe whether a base point of a family
keeps transversality (and a continuous coordinate operator) nearby.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import DEFAULTS, Numerics
from .errors import BallError, ComplementError, DimensionError, EvalError, TransversalityError
from .geninv import GenInverse, _solve_c, d_op, locally_fine_probe, moore_penrose, trial_rng
from .linalg import (
    Subspace,
    direct_sum_check,
    intersection_margin,
    kernel_of,
    oblique_projector,
    op_norm,
    orth_basis,
    range_of,
    subspace_distance,
)

__all__ = [
    "CoordinateOperator",
    "DifferentiableMap",
    "SubspaceFamily",
    "cofinal_member",
    "coordinate_operator",
    "graph_subspace",
    "kernel_family",
    "grp_alpha",
    "generalized_regular_probe",
]


@dataclass(frozen=True)
class CoordinateOperator:
    """Linear map from M0-coordinates to E*-coordinates, in pinned bases.

    ``alpha`` has shape (dim E*, dim M0); column j holds the E*-coordinates
    of the image of the j-th basis vector of M0.
    """

    alpha: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.alpha, dtype=float)
        if arr.ndim != 2 or not np.all(np.isfinite(arr)):
            raise ValueError("alpha must be a finite 2-d array")
        object.__setattr__(self, "alpha", arr)

    @property
    def norm(self) -> float:
        return op_norm(self.alpha)

    def __call__(self, coords):
        return self.alpha @ np.asarray(coords, dtype=float)


@dataclass(frozen=True)
class DifferentiableMap:
    """A C^1 map R^dom_dim -> R^cod_dim with optional analytic Jacobian."""

    dom_dim: int
    cod_dim: int
    func: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, x) -> np.ndarray:
        out = np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float).ravel()
        if out.size != self.cod_dim:
            raise EvalError(f"map returned {out.size} components, expected {self.cod_dim}")
        return out

    def fd_jacobian(self, x, cfg: Numerics = DEFAULTS) -> np.ndarray:
        """Central-difference Jacobian, step scaled by 1 + ||x||_inf."""
        x = np.asarray(x, dtype=float).ravel()
        h = cfg.fd_rel_step * (1.0 + float(np.max(np.abs(x), initial=0.0)))
        cols = []
        for i in range(self.dom_dim):
            step = np.zeros(self.dom_dim)
            step[i] = h
            cols.append((self(x + step) - self(x - step)) / (2.0 * h))
        return np.column_stack(cols)

    def jacobian(self, x, cfg: Numerics = DEFAULTS) -> np.ndarray:
        if self.jac is not None:
            out = np.asarray(self.jac(np.asarray(x, dtype=float)), dtype=float)
            if out.shape != (self.cod_dim, self.dom_dim):
                raise EvalError(f"jacobian has shape {out.shape}, expected {(self.cod_dim, self.dom_dim)}")
            return out
        return self.fd_jacobian(x, cfg)

    def check_jacobian(self, points, cfg: Numerics = DEFAULTS) -> None:
        """Verify the analytic Jacobian against finite differences."""
        if self.jac is None:
            return
        for p in points:
            gap = op_norm(self.jacobian(p, cfg) - self.fd_jacobian(p, cfg))
            if gap > cfg.fd_tol:
                raise EvalError(f"analytic Jacobian off by {gap:.3e} at {np.asarray(p).tolist()}")


@dataclass(frozen=True)
class SubspaceFamily:
    """A map from points to subspaces, anchored at a base point.

    The base subspace M0 = eval(base_point) and the complement E* are pinned
    at construction, so coordinate operators taken against them are
    comparable across evaluation points.  ``eval_fn`` must be a pure function
    of the point.  ``source_map`` is set when the family arose as the kernels
    of a Jacobian, enabling level-set diagnostics downstream.
    """

    eval_fn: Callable[[np.ndarray], Subspace]
    base_point: np.ndarray
    base_subspace: Subspace
    complement: Subspace
    source_map: DifferentiableMap | None = None

    def __post_init__(self):
        object.__setattr__(self, "base_point", np.asarray(self.base_point, dtype=float).ravel())
        if not direct_sum_check(self.base_subspace, self.complement):
            raise ComplementError("base subspace and complement do not split the ambient space")
        at_base = self.eval(self.base_point)
        if subspace_distance(at_base, self.base_subspace) > DEFAULTS.tol_num:
            raise ValueError("family does not evaluate to the base subspace at the base point")

    @property
    def ambient_dim(self) -> int:
        return self.base_subspace.ambient_dim

    @property
    def param_dim(self) -> int:
        return self.base_point.size

    def eval(self, x) -> Subspace:
        point = np.asarray(x, dtype=float).ravel()
        if point.size != self.param_dim:
            raise EvalError(f"point has {point.size} coordinates, family expects {self.param_dim}")
        try:
            sub = self.eval_fn(point)
        except EvalError:
            raise
        except Exception as exc:  # noqa: BLE001 - family callables are user code
            raise EvalError(f"family evaluation failed at {point.tolist()}: {exc}") from exc
        if not isinstance(sub, Subspace) or sub.ambient_dim != self.ambient_dim:
            raise EvalError("family evaluation returned an incompatible subspace")
        return sub

    def alpha_at(self, x, cfg: Numerics = DEFAULTS) -> CoordinateOperator:
        return coordinate_operator(self.base_subspace, self.complement, self.eval(x), cfg)


def cofinal_member(family: SubspaceFamily, x, cfg: Numerics = DEFAULTS) -> bool:
    """True iff the family's subspace at ``x`` still splits off the pinned
    complement.  A drift in subspace dimension counts as failure, not error."""
    return direct_sum_check(family.eval(x), family.complement, cfg)


def coordinate_operator(m0: Subspace, estar: Subspace, mx: Subspace, cfg: Numerics = DEFAULTS) -> CoordinateOperator:
    """The unique map a with ``mx = {e + a e : e in m0}``.

    Computed by projecting each m0 basis vector onto mx along estar and
    reading the estar-component off along m0.
    """
    if mx.dim != m0.dim:
        raise DimensionError(f"graph subspace has dim {mx.dim}, base has dim {m0.dim}")
    onto_mx = oblique_projector(mx, estar, cfg)
    onto_estar = oblique_projector(estar, m0, cfg)
    lifted = onto_estar.matrix @ (onto_mx.matrix @ m0.basis)
    return CoordinateOperator(estar.basis.T @ lifted)


def graph_subspace(m0: Subspace, estar: Subspace, alpha: CoordinateOperator) -> Subspace:
    """Subspace spanned by ``b_j + E* . alpha[:, j]`` over the m0 basis."""
    arr = alpha.alpha
    if arr.shape != (estar.dim, m0.dim):
        raise DimensionError(f"alpha shape {arr.shape} incompatible with ({estar.dim}, {m0.dim})")
    if m0.dim == 0:
        return Subspace.trivial(m0.ambient_dim)
    return Subspace._wrap(orth_basis(m0.basis + estar.basis @ arr))


def kernel_family(
    f: DifferentiableMap,
    x0,
    cfg: Numerics = DEFAULTS,
    estar: Subspace | None = None,
    rank_tol: float | None = None,
) -> SubspaceFamily:
    """Family of Jacobian kernels x -> N(f'(x)) anchored at ``x0``.

    The default complement is the row space of f'(x0), i.e. the range of its
    pseudoinverse (the orthogonal complement of the base kernel).
    """
    base = np.asarray(x0, dtype=float).ravel()
    if base.size != f.dom_dim:
        raise EvalError(f"base point has {base.size} coordinates, map expects {f.dom_dim}")
    f.check_jacobian([base], cfg)
    t0 = f.jacobian(base, cfg)
    tol = cfg.rank_tol if rank_tol is None else rank_tol
    base_subspace = kernel_of(t0, tol)
    if estar is None:
        estar = moore_penrose(t0).range_complement
    return SubspaceFamily(
        eval_fn=lambda x: kernel_of(f.jacobian(x, cfg), tol),
        base_point=base,
        base_subspace=base_subspace,
        complement=estar,
        source_map=f,
    )


def grp_alpha(f: DifferentiableMap, gi0: GenInverse, x, cfg: Numerics = DEFAULTS) -> CoordinateOperator:
    """Coordinate operator of the kernel family from the closed formula.

    With T0 = f'(x0) and its inverse gi0, the kernel at ``x`` is the graph of

        a(x) = P[E* along N0] . D^{-1}(T0+, T_x) . P[N0 along E*]   on N0,

    where E* = R(T0+).  Requires ``x`` inside the perturbation ball with the
    range of T_x transversal to N(T0+).
    """
    tx = f.jacobian(np.asarray(x, dtype=float), cfg)
    t0 = gi0.forward
    gap = op_norm(tx - t0)
    if gap >= gi0.ball_radius:
        raise BallError(f"Jacobian gap {gap:.6g} >= ball radius {gi0.ball_radius:.6g}")
    margin = intersection_margin(range_of(tx, cfg.rank_tol), gi0.kernel_complement, cfg)
    if margin <= 0.0:
        raise TransversalityError(f"Jacobian range meets the kernel complement (margin {margin:.3e})")
    n = gi0.dom_dim
    onto_estar = gi0.inverse @ t0          # projector onto R(T0+) along N(T0)
    onto_kernel = np.eye(n) - onto_estar
    m0 = kernel_of(t0, cfg.rank_tol)
    estar = gi0.range_complement
    d = d_op(t0, gi0, tx)
    lifted = onto_estar @ _solve_c(d, onto_kernel @ m0.basis, cfg)
    return CoordinateOperator(estar.basis.T @ lifted)


def generalized_regular_probe(
    f: DifferentiableMap,
    x0,
    radii,
    samples: int,
    seed: int = 0,
    cfg: Numerics = DEFAULTS,
):
    """Probe the Jacobian family of ``f`` around ``x0``.

    Delegates to the inverse-continuity probe on x -> f'(x) and additionally
    records, per radius, the largest coordinate-operator norm over the same
    sample points (expected to shrink with the radius when the base point is
    well-behaved).
    """
    base = np.asarray(x0, dtype=float).ravel()
    gi0 = moore_penrose(f.jacobian(base, cfg))
    report = locally_fine_probe(lambda p: f.jacobian(p, cfg), base, gi0, radii, samples, seed, cfg)

    modulus: list[float | None] = []
    for radius in radii:
        worst = None
        for j in range(samples):
            rng = trial_rng(seed, j)
            d = rng.standard_normal(base.size)
            norm = np.linalg.norm(d)
            d = d / norm if norm > 0 else np.ones(base.size) / np.sqrt(base.size)
            try:
                a = grp_alpha(f, gi0, base + radius * d, cfg)
            except (BallError, TransversalityError):
                continue
            worst = a.norm if worst is None else max(worst, a.norm)
        modulus.append(worst)
    report.alpha_modulus = modulus
    return report
