"""One-step integration of the graph ODE of an integrable subspace family.

Around a base point x0 with M0 = M(x0) and pinned complement E*, the
submanifold tangent to the family is the graph of a map psi from M0 into E*
solving

    psi'(z) = a(z + psi(z)),    psi(base M0-part of x0) = base E*-part of x0,

where ``a`` is the coordinate operator of M(.) against (M0, E*).  The solver
is a classical fourth-order one-step method on an axis-aligned lattice in
M0-coordinates; for multi-dimensional bases the lattice is filled along
axis-ordered polyline paths and re-filled in the reversed order, the maximal
disagreement doubling as an integrability diagnostic.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULTS, Numerics
from .errors import (
    CofinalBreach,
    DimensionError,
    EvalError,
    GridError,
    NewtonDivergence,
    StepError,
    ValidationError,
)
from .families import DifferentiableMap, SubspaceFamily
from .geninv import GenInverse
from .linalg import Subspace, direct_sum_check, kernel_of, oblique_projector, op_norm

__all__ = [
    "IntegralPatch",
    "PatchDiagnostics",
    "integrate",
    "tangency_check",
    "explicit_psi",
    "explicit_patch",
]


@dataclass
class PatchDiagnostics:
    step: float
    spacing: tuple[float, ...]
    initial_residual: float = 0.0
    path_residual: float | None = None
    ode_residual: float | None = None
    ode_residual_scaled: float | None = None
    level_set_residual: float | None = None
    tangency_residual: float | None = None
    breached: bool = False
    unfilled: int = 0
    cofinal_failures: int = 0

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "spacing": list(self.spacing),
            "initial_residual": self.initial_residual,
            "path_residual": self.path_residual,
            "ode_residual": self.ode_residual,
            "ode_residual_scaled": self.ode_residual_scaled,
            "level_set_residual": self.level_set_residual,
            "tangency_residual": self.tangency_residual,
            "breached": self.breached,
            "unfilled": self.unfilled,
            "cofinal_failures": self.cofinal_failures,
        }


@dataclass
class IntegralPatch:
    """Discrete graph of psi over a lattice in M0-coordinates.

    ``psi`` has shape (*lattice, estar_dim); ``filled`` marks nodes actually
    reached (paths stop at a transversality breach instead of extrapolating).
    Coordinates refer to the pinned bases stored in ``m0_basis`` and
    ``estar_basis``; ``reconstruct`` lifts nodes back to ambient points.
    """

    axes: tuple[np.ndarray, ...]
    psi: np.ndarray
    filled: np.ndarray
    base_m0: np.ndarray
    base_estar: np.ndarray
    m0_basis: np.ndarray
    estar_basis: np.ndarray
    diagnostics: PatchDiagnostics

    @property
    def m0_dim(self) -> int:
        return len(self.axes)

    @property
    def estar_dim(self) -> int:
        return self.psi.shape[-1]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(ax) for ax in self.axes)

    @property
    def center_index(self) -> tuple[int, ...]:
        return tuple((len(ax) - 1) // 2 for ax in self.axes)

    def node_coords(self, index) -> np.ndarray:
        return np.array([self.axes[i][index[i]] for i in range(self.m0_dim)])

    def grid(self) -> np.ndarray:
        """All lattice nodes as rows, in row-major node order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def psi_values(self) -> np.ndarray:
        return self.psi.reshape(-1, self.estar_dim)

    def reconstruct(self) -> np.ndarray:
        """Ambient points ``lift(z) + lift(psi(z))`` for all nodes, shaped
        (*lattice, ambient_dim); NaN at unreached nodes."""
        return self.grid().reshape(*self.shape, -1) @ self.m0_basis.T + self.psi @ self.estar_basis.T

    def to_dict(self) -> dict:
        return {
            "m0_dim": self.m0_dim,
            "estar_dim": self.estar_dim,
            "axes": [ax.tolist() for ax in self.axes],
            "grid": self.grid().tolist(),
            "psi": self.psi_values().tolist(),
            "filled": self.filled.ravel().tolist(),
            "base": {"m0": self.base_m0.tolist(), "estar": self.base_estar.tolist()},
            "m0_basis": self.m0_basis.tolist(),
            "estar_basis": self.estar_basis.tolist(),
            "ambient": self.reconstruct().reshape(-1, self.m0_basis.shape[0]).tolist(),
            "diagnostics": self.diagnostics.to_dict(),
        }


class _AlphaEvaluator:
    """Fast coordinate-operator evaluation against the family's pinned bases.

    The projector onto E* along M0 is constant, so only the projector onto
    the moving subspace has to be rebuilt per point.
    """

    def __init__(self, family: SubspaceFamily, cfg: Numerics):
        self.family = family
        self.cfg = cfg
        self.b0 = family.base_subspace.basis
        self.bs = family.complement.basis
        self.d = family.base_subspace.dim
        self.e = family.complement.dim
        n = family.ambient_dim
        onto_m0 = oblique_projector(family.base_subspace, family.complement, cfg).matrix
        # rows extracting E*-coordinates of the projection along M0
        self.estar_rows = self.bs.T @ (np.eye(n) - onto_m0)
        self.cperp = family.complement.orthogonal_complement().basis

    def ambient(self, z: np.ndarray, w: np.ndarray) -> np.ndarray:
        return self.b0 @ z + self.bs @ w

    def subspace_at(self, u: np.ndarray) -> Subspace:
        return self.family.eval(u)

    def _cross(self, mx: Subspace) -> np.ndarray:
        if mx.dim != self.d:
            raise CofinalBreach(
                f"moving subspace has dim {mx.dim}, expected {self.d}: splitting lost"
            )
        cross = self.cperp.T @ mx.basis
        s = np.linalg.svd(cross, compute_uv=False) if cross.size else np.array([1.0])
        if s[-1] <= self.cfg.tol_split:
            raise CofinalBreach(f"splitting degenerate (margin {s[-1]:.3e})")
        return cross

    def alpha_from(self, mx: Subspace) -> np.ndarray:
        cross = self._cross(mx)
        lifted = mx.basis @ np.linalg.solve(cross, self.cperp.T @ self.b0)
        return self.estar_rows @ lifted

    def alpha_col(self, u: np.ndarray, axis: int) -> np.ndarray:
        mx = self.subspace_at(u)
        cross = self._cross(mx)
        lifted = mx.basis @ np.linalg.solve(cross, self.cperp.T @ self.b0[:, axis])
        return self.estar_rows @ lifted


def _march(
    ev: _AlphaEvaluator,
    z_from: np.ndarray,
    w_from: np.ndarray,
    axis: int,
    delta: float,
    step: float,
) -> np.ndarray:
    """Advance psi one lattice hop along an axis with RK4 sub-steps."""
    n_sub = max(1, math.ceil(abs(delta) / step - 1e-12))
    h = delta / n_sub
    e_axis = np.zeros(z_from.size)
    e_axis[axis] = 1.0
    w = w_from
    for j in range(n_sub):
        z = z_from + (j * h) * e_axis
        k1 = ev.alpha_col(ev.ambient(z, w), axis)
        k2 = ev.alpha_col(ev.ambient(z + 0.5 * h * e_axis, w + 0.5 * h * k1), axis)
        k3 = ev.alpha_col(ev.ambient(z + 0.5 * h * e_axis, w + 0.5 * h * k2), axis)
        k4 = ev.alpha_col(ev.ambient(z + h * e_axis, w + h * k3), axis)
        w = w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return w


def _sweep(
    ev: _AlphaEvaluator,
    axes: tuple[np.ndarray, ...],
    center: tuple[int, ...],
    base_estar: np.ndarray,
    step: float,
    order: tuple[int, ...],
) -> tuple[np.ndarray, np.ndarray, int]:
    shape = tuple(len(ax) for ax in axes)
    d = len(axes)
    psi = np.full(shape + (ev.e,), np.nan)
    filled = np.zeros(shape, dtype=bool)
    psi[center] = base_estar
    filled[center] = True
    breaches = 0

    for pos, ax in enumerate(order):
        processed = set(order[:pos])
        ranges = [range(shape[i]) if i in processed else (center[i],) for i in range(d)]
        for combo in itertools.product(*ranges):
            if not filled[combo]:
                continue
            for direction in (1, -1):
                idx = list(combo)
                z_prev = np.array([axes[i][combo[i]] for i in range(d)])
                w_prev = psi[combo]
                stop = shape[ax] if direction > 0 else -1
                for next_i in range(combo[ax] + direction, stop, direction):
                    target = axes[ax][next_i]
                    try:
                        w_new = _march(ev, z_prev, w_prev, ax, target - z_prev[ax], step)
                    except (CofinalBreach, EvalError):
                        breaches += 1
                        break
                    idx[ax] = next_i
                    psi[tuple(idx)] = w_new
                    filled[tuple(idx)] = True
                    z_prev = z_prev.copy()
                    z_prev[ax] = target
                    w_prev = w_new
    return psi, filled, breaches


def integrate(
    family: SubspaceFamily,
    extent,
    step: float,
    grid_points=None,
    cfg: Numerics = DEFAULTS,
) -> IntegralPatch:
    """Numerically build the graph of psi over a lattice around the base.

    ``extent`` gives per-axis half-widths in M0-coordinates (a scalar
    broadcasts); ``step`` is the RK4 sub-step along each lattice hop.
    ``grid_points`` fixes the odd node count per axis; by default a
    one-dimensional base is gridded at the step size and higher-dimensional
    bases get 21 nodes per axis.

    A transversality breach along a path truncates that path: the patch comes
    back partial with ``diagnostics.breached`` set, holding every node that
    was reached.  A breach already at the base raises CofinalBreach.
    """
    if step <= 0:
        raise StepError(f"step must be positive, got {step}")
    if family.param_dim != family.ambient_dim:
        raise ValidationError("family parameters must be ambient points to reconstruct the patch")
    d = family.base_subspace.dim
    if d == 0:
        raise ValidationError("base subspace is trivial; nothing to integrate over")

    extent_arr = np.broadcast_to(np.asarray(extent, dtype=float).ravel(), (d,)).copy()
    if np.any(extent_arr <= 0):
        raise ValidationError("extents must be positive")
    if grid_points is None:
        counts = [2 * max(1, round(extent_arr[i] / step)) + 1 for i in range(d)] if d == 1 else [21] * d
    else:
        counts = np.broadcast_to(np.asarray(grid_points, dtype=int).ravel(), (d,)).tolist()
        for c in counts:
            if c < 3 or c % 2 == 0:
                raise ValidationError(f"grid_points must be odd and >= 3, got {c}")

    ev = _AlphaEvaluator(family, cfg)
    x0 = family.base_point
    onto_m0 = oblique_projector(family.base_subspace, family.complement, cfg).matrix
    base_m0 = ev.b0.T @ (onto_m0 @ x0)
    base_estar = ev.bs.T @ (x0 - onto_m0 @ x0)

    axes = []
    spacing = []
    for i in range(d):
        half = (counts[i] - 1) // 2
        sp = extent_arr[i] / half
        axes.append(base_m0[i] + sp * (np.arange(counts[i]) - half))
        spacing.append(float(sp))
    axes = tuple(axes)
    center = tuple((c - 1) // 2 for c in counts)

    ev.alpha_from(ev.subspace_at(x0))  # CofinalBreach here means no patch at all

    order = tuple(range(d))
    psi, filled, breaches = _sweep(ev, axes, center, base_estar, step, order)

    path_residual: float | None = 0.0
    if d > 1:
        psi_rev, filled_rev, _ = _sweep(ev, axes, center, base_estar, step, order[::-1])
        both = filled & filled_rev
        if both.any():
            path_residual = float(np.nanmax(np.abs(psi[both] - psi_rev[both])))

    diag = PatchDiagnostics(step=float(step), spacing=tuple(spacing))
    diag.path_residual = path_residual
    diag.breached = breaches > 0
    diag.unfilled = int(filled.size - filled.sum())
    diag.initial_residual = float(np.max(np.abs(psi[center] - base_estar)))

    patch = IntegralPatch(
        axes=axes,
        psi=psi,
        filled=filled,
        base_m0=base_m0,
        base_estar=base_estar,
        m0_basis=ev.b0.copy(),
        estar_basis=ev.bs.copy(),
        diagnostics=diag,
    )
    _fill_node_diagnostics(patch, family, ev, cfg)
    return patch


def _fill_node_diagnostics(
    patch: IntegralPatch, family: SubspaceFamily, ev: _AlphaEvaluator, cfg: Numerics
) -> None:
    """Per-node checks: splitting holds, grid derivative matches the field,
    and (for kernel families) the patch stays on the level set."""
    d, shape = patch.m0_dim, patch.shape
    diag = patch.diagnostics
    f = family.source_map
    f_base = f(family.base_point) if f is not None else None

    level_worst = 0.0
    ode_worst = 0.0
    ode_scaled_worst = 0.0
    failures = 0

    for idx in itertools.product(*map(range, shape)):
        if not patch.filled[idx]:
            continue
        z = patch.node_coords(idx)
        u = ev.ambient(z, patch.psi[idx])
        try:
            mx = ev.subspace_at(u)
        except EvalError:
            failures += 1
            continue
        if not direct_sum_check(mx, family.complement, cfg):
            failures += 1
            continue
        if f is not None:
            level_worst = max(level_worst, float(np.max(np.abs(f(u) - f_base))))

        interior = all(0 < idx[i] < shape[i] - 1 for i in range(d))
        if not interior:
            continue
        neighbors_ok = all(
            patch.filled[idx[:i] + (idx[i] - 1,) + idx[i + 1 :]]
            and patch.filled[idx[:i] + (idx[i] + 1,) + idx[i + 1 :]]
            for i in range(d)
        )
        if not neighbors_ok:
            continue
        try:
            am = ev.alpha_from(mx)
        except CofinalBreach:
            failures += 1
            continue
        scale = (1.0 + op_norm(am)) ** 3
        for i in range(d):
            plus = patch.psi[idx[:i] + (idx[i] + 1,) + idx[i + 1 :]]
            minus = patch.psi[idx[:i] + (idx[i] - 1,) + idx[i + 1 :]]
            deriv = (plus - minus) / (2.0 * diag.spacing[i])
            resid = float(np.max(np.abs(deriv - am[:, i])))
            ode_worst = max(ode_worst, resid)
            ode_scaled_worst = max(ode_scaled_worst, resid / scale)

    diag.level_set_residual = level_worst if f is not None else None
    diag.ode_residual = ode_worst
    diag.ode_residual_scaled = ode_scaled_worst
    diag.cofinal_failures = failures
    diag.breached = diag.breached or failures > 0


# Five-node first-derivative stencils (coefficients over offsets, /12h):
# error O(h^4); the shifted forms cover nodes one step from the boundary.
_STENCILS_5 = (
    ((-2, -1, 1, 2), (1.0, -8.0, 8.0, -1.0)),
    ((-1, 0, 1, 2, 3), (-3.0, -10.0, 18.0, -6.0, 1.0)),
    ((-3, -2, -1, 0, 1), (-1.0, 6.0, -18.0, 10.0, 3.0)),
)


def _axis_derivative(patch: IntegralPatch, idx: tuple[int, ...], axis: int) -> np.ndarray | None:
    """Grid derivative of psi along an axis at an interior node.

    Fourth order wherever five aligned filled nodes exist (central,
    forward-shifted or backward-shifted); second-order central fallback on
    coarse grids.  Boundary nodes return None.
    """
    n = patch.shape[axis]
    i = idx[axis]
    h = patch.diagnostics.spacing[axis]
    if i == 0 or i == n - 1:
        return None

    def at(j: int) -> np.ndarray | None:
        pos = idx[:axis] + (j,) + idx[axis + 1 :]
        return patch.psi[pos] if patch.filled[pos] else None

    for offsets, coeffs in _STENCILS_5:
        if not all(0 <= i + o <= n - 1 for o in offsets):
            continue
        vals = [at(i + o) for o in offsets]
        if any(v is None for v in vals):
            continue
        return sum(c * v for c, v in zip(coeffs, vals)) / (12.0 * h)
    m1, p1 = at(i - 1), at(i + 1)
    if m1 is not None and p1 is not None:
        return (p1 - m1) / (2.0 * h)
    return None


def tangency_check(patch: IntegralPatch, family: SubspaceFamily, cfg: Numerics = DEFAULTS) -> float:
    """Largest defect of grid tangent vectors against the family's subspaces.

    At interior nodes the finite-difference tangents (axis direction plus the
    psi derivative), lifted to ambient space, are projected onto the
    orthogonal complement of the subspace at the reconstructed point; the
    maximal relative projection norm is returned and stored in the patch
    diagnostics.
    """
    if any(len(ax) < 3 for ax in patch.axes):
        raise GridError("tangency check needs at least 3 nodes per axis")
    ev = _AlphaEvaluator(family, cfg)
    worst = 0.0
    for idx in itertools.product(*map(range, patch.shape)):
        if not patch.filled[idx]:
            continue
        derivs = [_axis_derivative(patch, idx, i) for i in range(patch.m0_dim)]
        if all(dv is None for dv in derivs):
            continue
        u = ev.ambient(patch.node_coords(idx), patch.psi[idx])
        try:
            mx = ev.subspace_at(u)
        except EvalError:
            continue
        reject = np.eye(family.ambient_dim) - mx.orthogonal_projector()
        for i, dv in enumerate(derivs):
            if dv is None:
                continue
            tangent = ev.b0[:, i] + ev.bs @ dv
            resid = float(np.linalg.norm(reject @ tangent) / np.linalg.norm(tangent))
            worst = max(worst, resid)
    patch.diagnostics.tangency_residual = worst
    return worst


def explicit_psi(
    f: DifferentiableMap,
    gi0: GenInverse,
    z,
    *,
    x0,
    w0=None,
    cfg: Numerics = DEFAULTS,
) -> np.ndarray:
    """Graph value of the level set of ``f`` through ``x0`` at M0-coords ``z``.

    Solves ``T0+ (f(lift(z) + w) - f(x0)) = 0`` for ``w`` in E*-coordinates by
    the constant-linear-model iteration ``w <- w - E*^T T0+ (f(u) - f(x0))``
    (the exact local model, since the relevant derivative is the constant
    projector onto E* along N0).  Raises NewtonDivergence with the residual
    trace if the update norm does not reach ``newton_tol``.
    """
    base = np.asarray(x0, dtype=float).ravel()
    t0 = gi0.forward
    m0 = kernel_of(t0, cfg.rank_tol)
    estar = gi0.range_complement
    z = np.atleast_1d(np.asarray(z, dtype=float)).ravel()
    if z.size != m0.dim:
        raise DimensionError(f"z has {z.size} coordinates, base subspace has dim {m0.dim}")
    f_base = f(base)
    onto_estar = gi0.inverse @ t0
    w = estar.basis.T @ (onto_estar @ base) if w0 is None else np.asarray(w0, dtype=float).ravel()

    lift = m0.basis @ z
    trace: list[float] = []
    for _ in range(cfg.newton_max_iter):
        u = lift + estar.basis @ w
        residual = gi0.inverse @ (f(u) - f_base)
        dw = estar.basis.T @ residual
        update = float(np.linalg.norm(dw))
        trace.append(update)
        w = w - dw
        if update <= cfg.newton_tol:
            return w
        if not math.isfinite(update) or update > 1e9:
            raise NewtonDivergence(f"graph solve diverged at z={z.tolist()}", trace)
    raise NewtonDivergence(
        f"graph solve did not reach {cfg.newton_tol:g} in {cfg.newton_max_iter} iterations", trace
    )


def explicit_patch(
    f: DifferentiableMap,
    gi0: GenInverse,
    patch: IntegralPatch,
    *,
    x0,
    cfg: Numerics = DEFAULTS,
) -> np.ndarray:
    """Evaluate the explicit graph map on a patch's lattice.

    Nodes are visited marching outward from the center, warm-starting each
    solve from its already-computed neighbor; unreachable nodes come back as
    NaN.  Returns an array shaped like ``patch.psi``.
    """
    shape = patch.shape
    d = patch.m0_dim
    center = patch.center_index
    out = np.full_like(patch.psi, np.nan)
    out[center] = explicit_psi(f, gi0, patch.node_coords(center), x0=x0, cfg=cfg)

    for pos in range(d):
        processed = set(range(pos))
        ranges = [range(shape[i]) if i in processed else (center[i],) for i in range(d)]
        for combo in itertools.product(*ranges):
            if np.any(np.isnan(out[combo])):
                continue
            for direction in (1, -1):
                prev = out[combo]
                stop = shape[pos] if direction > 0 else -1
                for next_i in range(combo[pos] + direction, stop, direction):
                    idx = combo[:pos] + (next_i,) + combo[pos + 1 :]
                    try:
                        prev = explicit_psi(f, gi0, patch.node_coords(idx), x0=x0, w0=prev, cfg=cfg)
                    except NewtonDivergence:
                        break
                    out[idx] = prev
    return out
