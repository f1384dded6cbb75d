"""Charts and tangent machinery for fixed-rank matrix manifolds.

The space of m x n matrices is identified with R^{mn} (row-major), so the
subspace-family machinery applies verbatim to the family

    M(X) = {T : T N(X) is contained in R(X)},

which is the tangent space of the fixed-rank manifold at X.  Around a base
operator A with inverse A+, the chart

    D(X)  = (X - A) P[R(A+)] + C^{-1}(A+, X) X
    D*(T) = T P[R(A+)] + C(A+, T) T P[N(A)]

is a diffeomorphism of the region ||(X - A) A+|| < 1 onto itself that
straightens the rank-k matrices near A into the linear slice M(A).
"""

import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULTS, Numerics
from .errors import BallError, ComplementError, MembershipError
from .families import SubspaceFamily
from .geninv import GenInverse, _solve_c, c_op, moore_penrose, perturbed_gi, trial_rng
from .linalg import (
    Subspace,
    as_matrix,
    direct_sum_check,
    kernel_of,
    op_norm,
    range_of,
    rank_of,
)

__all__ = [
    "OperatorFamilyContext",
    "operator_context",
    "vec",
    "unvec",
    "mx_basis",
    "operator_family",
    "chart_d",
    "chart_d_star",
    "alpha_operator_family",
    "fixed_rank_chart_check",
    "tangency_fixed_rank",
    "ChartCheckReport",
    "TangencyReport",
    "sample_fixed_rank_near",
]


def vec(mat: np.ndarray) -> np.ndarray:
    """Row-major vectorization of an operator."""
    return np.asarray(mat, dtype=float).reshape(-1)


def unvec(v: np.ndarray, m: int, n: int) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape(m, n)


def _sandwich(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Matrix of T -> left @ T @ right on row-major vectorized operators."""
    return np.kron(left, right.T)


# Rank cutoff for images/kernels of assembled projector maps: their genuine
# singular values are O(1), while roundoff from the products sits near 1e-15,
# right at the machine-epsilon default.  Maps whose norm falls below the
# absolute floor are numerically zero (a relative cutoff would misread their
# roundoff as structure).
_PROJECTOR_RANK_TOL = 1e-10
_PROJECTOR_ZERO_TOL = 1e-10


def _image_basis(matrix: np.ndarray) -> Subspace:
    if op_norm(matrix) <= _PROJECTOR_ZERO_TOL:
        return Subspace.trivial(matrix.shape[0])
    return range_of(matrix, _PROJECTOR_RANK_TOL)


@dataclass(frozen=True)
class OperatorFamilyContext:
    """Base operator, inverse, pinned splitting of operator space, projectors.

    ``m0`` spans the tangent slice M(A) inside R^{mn}; ``estar`` spans the
    complement {T : R(T) in N(A+), N(T) contains R(A+)}.  The four cached
    projectors are the obliques onto R(A), N(A+), R(A+), N(A) determined by
    the complements of the inverse.
    """

    a: np.ndarray
    ainv: GenInverse
    m0: Subspace
    estar: Subspace
    p_ra: np.ndarray        # onto R(A)  along N(A+)   (codomain)
    p_na_plus: np.ndarray   # onto N(A+) along R(A)    (codomain)
    p_ra_plus: np.ndarray   # onto R(A+) along N(A)    (domain)
    p_na: np.ndarray        # onto N(A)  along R(A+)   (domain)

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def n(self) -> int:
        return self.a.shape[1]

    @property
    def rank(self) -> int:
        return rank_of(self.a)

    @property
    def ball_radius(self) -> float:
        return self.ainv.ball_radius


def operator_context(a, ainv: GenInverse | None = None, cfg: Numerics = DEFAULTS) -> OperatorFamilyContext:
    """Build the pinned splitting of operator space at a nonzero base operator."""
    arr = as_matrix(a)
    if not arr.any():
        raise ValueError("base operator must be nonzero")
    if ainv is None:
        ainv = moore_penrose(arr)
    m, n = arr.shape
    p_ra = arr @ ainv.inverse
    p_ra_plus = ainv.inverse @ arr
    p_na_plus = np.eye(m) - p_ra
    p_na = np.eye(n) - p_ra_plus

    m0 = _image_basis(_sandwich(p_ra, np.eye(n)) + _sandwich(p_na_plus, p_ra_plus))
    estar = _image_basis(_sandwich(p_na_plus, p_na))

    k = rank_of(arr, cfg.rank_tol)
    expected_m0 = m * n - (m - k) * (n - k)
    if m0.dim != expected_m0 or m0.dim + estar.dim != m * n:
        raise ComplementError(
            f"splitting dimensions {m0.dim} + {estar.dim} != {m * n} (rank {k})"
        )
    if not direct_sum_check(m0, estar, cfg):
        raise ComplementError("tangent slice and complement fail to split operator space")
    # Every complement basis element must map into N(A+) and kill R(A+).
    for col in estar.basis.T:
        t = unvec(col, m, n)
        if op_norm(p_ra @ t) > cfg.tol_num or op_norm(t @ p_ra_plus) > cfg.tol_num:
            raise ComplementError("complement element violates its range/kernel characterization")
    return OperatorFamilyContext(
        a=arr, ainv=ainv, m0=m0, estar=estar,
        p_ra=p_ra, p_na_plus=p_na_plus, p_ra_plus=p_ra_plus, p_na=p_na,
    )


def mx_basis(ctx: OperatorFamilyContext, x, xinv: GenInverse, cfg: Numerics = DEFAULTS) -> Subspace:
    """Orthonormal basis of {T : T N(X) in R(X)} inside R^{mn}.

    Realized as the image of T -> X X+ T + (I - X X+) T X+ X over operator
    space; each basis element is cross-checked against the defining
    containment.
    """
    xm = as_matrix(x)
    m, n = xm.shape
    if (m, n) != (ctx.m, ctx.n):
        raise ValueError("operator shape does not match the context")
    p_range = xm @ xinv.inverse
    p_coimage = xinv.inverse @ xm
    basis = _image_basis(_sandwich(p_range, np.eye(n)) + _sandwich(np.eye(m) - p_range, p_coimage))
    ker = kernel_of(xm, cfg.rank_tol)
    if ker.dim:
        reject = np.eye(m) - range_of(xm, cfg.rank_tol).orthogonal_projector()
        for col in basis.basis.T:
            if op_norm(reject @ unvec(col, m, n) @ ker.basis) > cfg.tol_num:
                raise ComplementError("constructed element violates T N(X) in R(X)")
    return basis


def operator_family(ctx: OperatorFamilyContext, rank_tol: float | None = None, cfg: Numerics = DEFAULTS) -> SubspaceFamily:
    """The family X -> M(X) over vectorized operator space.

    Evaluation is inverse-free: M(X) is computed as the null space of
    T -> (orthogonal rejection off R(X)) T (kernel basis of X), so it is
    defined for every X, including points where the pinned splitting fails.
    ``rank_tol`` controls the rank decision for R(X) and N(X).
    """
    m, n = ctx.m, ctx.n
    tol = cfg.rank_tol if rank_tol is None else rank_tol

    def eval_fn(p: np.ndarray) -> Subspace:
        xm = unvec(p, m, n)
        ker = kernel_of(xm, tol)
        if ker.dim == 0:
            return Subspace.full(m * n)
        reject = np.eye(m) - range_of(xm, tol).orthogonal_projector()
        constraint = _sandwich(reject, ker.basis)  # vec of T -> reject @ T @ ker
        if op_norm(constraint) <= _PROJECTOR_ZERO_TOL:
            return Subspace.full(m * n)
        return kernel_of(constraint, _PROJECTOR_RANK_TOL)

    return SubspaceFamily(
        eval_fn=eval_fn,
        base_point=vec(ctx.a),
        base_subspace=ctx.m0,
        complement=ctx.estar,
    )


def _require_in_v1(ctx: OperatorFamilyContext, x: np.ndarray) -> float:
    gap = op_norm((x - ctx.a) @ ctx.ainv.inverse)
    if gap >= 1.0:
        raise BallError(f"||(X - A) A+|| = {gap:.6g} >= 1: outside the chart region")
    return gap


def chart_d(ctx: OperatorFamilyContext, x, cfg: Numerics = DEFAULTS) -> np.ndarray:
    """Forward chart D(X) = (X - A) P[R(A+)] + C^{-1}(A+, X) X; D(A) = A."""
    xm = as_matrix(x)
    _require_in_v1(ctx, xm)
    c = c_op(ctx.a, ctx.ainv, xm)
    return (xm - ctx.a) @ ctx.p_ra_plus + _solve_c(c, xm, cfg)


def chart_d_star(ctx: OperatorFamilyContext, t, cfg: Numerics = DEFAULTS) -> np.ndarray:
    """Inverse chart D*(T) = T P[R(A+)] + C(A+, T) T P[N(A)]; D*(A) = A."""
    tm = as_matrix(t)
    _require_in_v1(ctx, tm)
    c = c_op(ctx.a, ctx.ainv, tm)
    return tm @ ctx.p_ra_plus + c @ tm @ ctx.p_na


def membership_residual(ctx: OperatorFamilyContext, t) -> float:
    """Relative orthogonal-projection defect of an operator against M(A)."""
    v = vec(as_matrix(t))
    proj = ctx.m0.basis @ (ctx.m0.basis.T @ v)
    return float(np.linalg.norm(v - proj) / (1.0 + np.linalg.norm(v)))


def alpha_operator_family(ctx: OperatorFamilyContext, x, dx, cfg: Numerics = DEFAULTS) -> np.ndarray:
    """Coordinate-operator action on a tangent direction, in closed form.

    For X in the chart region whose inverse is A+ C^{-1}(A+, X) and a
    direction dX in M(A),

        a(X) dX = P[N(A+)] (C^{-1} dX A+ C^{-1} X - C^{-1} dX) P[N(A)].

    Raises TransversalityError if X has no such inverse and MembershipError
    if dX lies outside M(A).
    """
    xm, dxm = as_matrix(x), as_matrix(dx)
    gi_x = perturbed_gi(ctx.a, ctx.ainv, xm, cfg)  # BallError / TransversalityError
    del gi_x
    if membership_residual(ctx, dxm) > cfg.tol_num:
        raise MembershipError("direction is not in the tangent slice at the base operator")
    c = c_op(ctx.a, ctx.ainv, xm)
    cinv_dx = _solve_c(c, dxm, cfg)
    cinv_x = _solve_c(c, xm, cfg)
    inner = cinv_dx @ ctx.ainv.inverse @ cinv_x - cinv_dx
    return ctx.p_na_plus @ inner @ ctx.p_na


def sample_fixed_rank_near(
    ctx: OperatorFamilyContext,
    rng: np.random.Generator,
    scale: float = 0.1,
    ball_fraction: float = 0.4,
) -> np.ndarray:
    """Random operator of the base rank inside the chart region.

    Multiplies the base operator by Gaussian perturbations of the identity on
    both sides (which preserves the rank exactly) and shrinks the
    perturbation until the result sits well inside both the perturbation ball
    and the chart region.
    """
    g_left = rng.standard_normal((ctx.m, ctx.m))
    g_right = rng.standard_normal((ctx.n, ctx.n))
    eps = scale
    radius = ctx.ball_radius
    for _ in range(60):
        x = (np.eye(ctx.m) + eps * g_left) @ ctx.a @ (np.eye(ctx.n) + eps * g_right)
        gap = op_norm(x - ctx.a)
        v1_gap = op_norm((x - ctx.a) @ ctx.ainv.inverse)
        if gap < ball_fraction * radius and v1_gap < ball_fraction:
            return x
        eps *= 0.5
    return ctx.a.copy()


@dataclass
class ChartCheckReport:
    samples: int
    m0_dim: int
    round_trip_max: float
    membership_max: float
    membership_failures: int
    rank_failures: int

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "m0_dim": self.m0_dim,
            "round_trip_max": self.round_trip_max,
            "membership_max": self.membership_max,
            "membership_failures": self.membership_failures,
            "rank_failures": self.rank_failures,
        }


def fixed_rank_chart_check(ctx: OperatorFamilyContext, samples: int, seed: int = 0, cfg: Numerics = DEFAULTS) -> ChartCheckReport:
    """Randomized verification that the chart straightens the rank class.

    Forward: random operators of the base rank near A map under D into M(A)
    and round-trip through D* back to themselves.  Backward: random slice
    elements near A map under D* to operators of exactly the base rank.
    """
    k = ctx.rank
    round_trip_max = 0.0
    membership_max = 0.0
    membership_failures = 0
    rank_failures = 0

    for j in range(samples):
        rng = trial_rng(seed, j)
        x = sample_fixed_rank_near(ctx, rng)
        t = chart_d(ctx, x, cfg)
        resid = membership_residual(ctx, t)
        membership_max = max(membership_max, resid)
        if resid > cfg.tol_num:
            membership_failures += 1
        back = chart_d_star(ctx, t, cfg)
        round_trip_max = max(
            round_trip_max, op_norm(back - x) / max(1.0, op_norm(x))
        )

        coeffs = rng.standard_normal(ctx.m0.dim)
        coeffs /= np.linalg.norm(coeffs)
        dt = unvec(ctx.m0.basis @ coeffs, ctx.m, ctx.n)
        t2 = ctx.a + (0.3 * ctx.ball_radius if math.isfinite(ctx.ball_radius) else 0.3) * dt
        x2 = chart_d_star(ctx, t2, cfg)
        # Rank decided with slack for roundoff accumulated through the chart;
        # a genuine rank change would move a singular value by O(ball radius).
        if rank_of(x2, 1e-9) != k:
            rank_failures += 1

    return ChartCheckReport(
        samples=samples,
        m0_dim=ctx.m0.dim,
        round_trip_max=round_trip_max,
        membership_max=membership_max,
        membership_failures=membership_failures,
        rank_failures=rank_failures,
    )


@dataclass
class TangencyReport:
    max_residual: float
    tangent_span_dim: int
    expected_dim: int
    curves: int

    def to_dict(self) -> dict:
        return {
            "max_residual": self.max_residual,
            "tangent_span_dim": self.tangent_span_dim,
            "expected_dim": self.expected_dim,
            "curves": self.curves,
        }


def tangency_fixed_rank(
    ctx: OperatorFamilyContext,
    x,
    curves: int,
    seed: int = 0,
    cfg: Numerics = DEFAULTS,
    fd_step: float = 1e-6,
) -> TangencyReport:
    """Velocities of rank-preserving curves through X stay in M(X).

    Curves are c(t) = D*(D(X) + t dT) for random slice directions dT; their
    finite-difference velocities at t = 0 are projected onto the orthogonal
    complement of M(X) (max relative residual returned) and their span is
    rank-checked against dim M(X) = mn - (m - k)(n - k).
    """
    xm = as_matrix(x)
    gi_x = perturbed_gi(ctx.a, ctx.ainv, xm, cfg)
    tangent_space = mx_basis(ctx, xm, gi_x, cfg)
    reject = np.eye(ctx.m * ctx.n) - tangent_space.orthogonal_projector()
    t0 = chart_d(ctx, xm, cfg)
    h = fd_step * (1.0 + op_norm(t0))

    worst = 0.0
    velocities = []
    for j in range(curves):
        rng = trial_rng(seed, j)
        coeffs = rng.standard_normal(ctx.m0.dim)
        coeffs /= np.linalg.norm(coeffs)
        dt = unvec(ctx.m0.basis @ coeffs, ctx.m, ctx.n)
        plus = chart_d_star(ctx, t0 + h * dt, cfg)
        minus = chart_d_star(ctx, t0 - h * dt, cfg)
        velocity = vec((plus - minus) / (2.0 * h))
        speed = float(np.linalg.norm(velocity))
        if speed == 0.0:
            continue
        worst = max(worst, float(np.linalg.norm(reject @ velocity)) / speed)
        velocities.append(velocity)

    span_dim = rank_of(np.column_stack(velocities), 1e-6) if velocities else 0
    k = ctx.rank
    expected = ctx.m * ctx.n - (ctx.m - k) * (ctx.n - k)
    return TangencyReport(
        max_residual=worst, tangent_span_dim=span_dim, expected_dim=expected, curves=curves
    )
