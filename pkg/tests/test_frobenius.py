import numpy as np
import pytest

from oblique import (
    GridError,
    NewtonDivergence,
    StepError,
    Subspace,
    SubspaceFamily,
    explicit_psi,
    integrate,
    kernel_family,
    moore_penrose,
    tangency_check,
)
from oblique.builtins import builtin_family, builtin_map
from oblique.frobenius import explicit_patch


def circle_family():
    f, x0 = builtin_map("sphere_2d")
    return f, x0, kernel_family(f, x0)


def constant_family():
    base = Subspace.span([1.0, 0.0])
    comp = Subspace.span([0.0, 1.0])
    return SubspaceFamily(
        eval_fn=lambda x: base, base_point=np.array([0.0, 5.0]), base_subspace=base, complement=comp
    )


# ---------------------------------------------------------------------------
# trivial and error cases


def test_constant_family_gives_flat_patch():
    patch = integrate(constant_family(), 0.5, 1e-2)
    np.testing.assert_array_equal(patch.psi, np.full_like(patch.psi, 5.0))
    assert patch.diagnostics.path_residual == 0.0
    assert not patch.diagnostics.breached
    assert tangency_check(patch, constant_family()) <= 1e-12


def test_step_must_be_positive():
    with pytest.raises(StepError):
        integrate(constant_family(), 0.5, 0.0)


def test_tangency_needs_three_nodes():
    patch = integrate(constant_family(), 0.5, 1e-2)
    patch = type(patch)(
        axes=(patch.axes[0][:2],),
        psi=patch.psi[:2],
        filled=patch.filled[:2],
        base_m0=patch.base_m0,
        base_estar=patch.base_estar,
        m0_basis=patch.m0_basis,
        estar_basis=patch.estar_basis,
        diagnostics=patch.diagnostics,
    )
    with pytest.raises(GridError):
        tangency_check(patch, constant_family())


def test_breach_truncates_instead_of_extrapolating():
    # family flips to a subspace parallel to the complement beyond |x| > 0.3
    inner = Subspace.span([1.0, 0.0])
    outer = Subspace.span([0.0, 1.0])

    def eval_fn(x):
        return inner if abs(x[0]) <= 0.3 else outer

    fam = SubspaceFamily(
        eval_fn=eval_fn, base_point=np.array([0.0, 1.0]), base_subspace=inner, complement=outer
    )
    patch = integrate(fam, 0.6, 1e-2, grid_points=13)
    assert patch.diagnostics.breached
    assert patch.diagnostics.unfilled > 0
    inside = np.abs(patch.axes[0]) <= 0.3 + 1e-12
    assert patch.filled[inside].all()
    assert not patch.filled[~inside].any()
    np.testing.assert_array_equal(patch.psi[inside, 0], np.ones(inside.sum()))


# ---------------------------------------------------------------------------
# circle example


def test_circle_patch_against_closed_form():
    f, x0, fam = circle_family()
    patch = integrate(fam, 0.9, 1e-3)
    amb = patch.reconstruct()
    err = np.abs(amb[..., 1] - np.sqrt(1 - amb[..., 0] ** 2))
    assert float(err.max()) <= 1e-6
    # the reconstructed point over x = 0.6 is (0.6, 0.8)
    i = int(np.argmin(np.abs(amb[..., 0] - 0.6)))
    assert amb[i, 1] == pytest.approx(0.8, abs=1e-6)
    assert patch.diagnostics.initial_residual <= 1e-9
    assert patch.diagnostics.level_set_residual <= 1e-6
    assert patch.diagnostics.path_residual == 0.0


def test_circle_ode_residual_bound():
    _, _, fam = circle_family()
    patch = integrate(fam, 0.9, 1e-3)
    spacing = max(patch.diagnostics.spacing)
    assert patch.diagnostics.ode_residual_scaled <= 10.0 * spacing**2


def test_circle_tangency_residual():
    _, _, fam = circle_family()
    patch = integrate(fam, 0.9, 1e-3)
    assert tangency_check(patch, fam) <= 1e-6


def test_explicit_psi_circle_values():
    f, x0, fam = circle_family()
    gi0 = moore_penrose(f.jacobian(x0))
    b0 = fam.base_subspace.basis
    # pick z so the lifted point has ambient x-coordinate 0.6
    z = b0.T @ np.array([0.6, 0.0])
    w = explicit_psi(f, gi0, z, x0=x0)
    point = b0 @ z + fam.complement.basis @ w
    np.testing.assert_allclose(point, [0.6, 0.8], atol=1e-10)


def test_explicit_psi_base_value():
    f, x0, fam = circle_family()
    gi0 = moore_penrose(f.jacobian(x0))
    w = explicit_psi(f, gi0, fam.base_subspace.basis.T @ x0, x0=x0)
    point = fam.complement.basis @ w
    np.testing.assert_allclose(point, [0.0, 1.0], atol=1e-12)


def test_explicit_matches_integrated_circle():
    f, x0, fam = circle_family()
    patch = integrate(fam, 0.9, 1e-3)
    gi0 = moore_penrose(f.jacobian(x0))
    ep = explicit_patch(f, gi0, patch, x0=x0)
    assert float(np.nanmax(np.abs(ep - patch.psi))) <= 1e-6


def test_newton_divergence_outside_the_level_set_region():
    f, x0, fam = circle_family()
    gi0 = moore_penrose(f.jacobian(x0))
    z = fam.base_subspace.basis.T @ np.array([1.5, 0.0])  # no circle point above x=1.5
    with pytest.raises(NewtonDivergence) as err:
        explicit_psi(f, gi0, z, x0=x0)
    assert len(err.value.trace) >= 1


# ---------------------------------------------------------------------------
# sphere example (compact grid; the acceptance suite runs the pinned one)


def test_sphere_patch_small_grid():
    f, x0 = builtin_map("sphere_3d")
    fam = kernel_family(f, x0)
    patch = integrate(fam, 0.4, 2e-3, grid_points=15)
    amb = patch.reconstruct()
    err = np.abs(amb[..., 2] - np.sqrt(1 - amb[..., 0] ** 2 - amb[..., 1] ** 2))
    assert float(err.max()) <= 1e-6
    assert patch.diagnostics.path_residual <= 1e-6
    assert patch.diagnostics.level_set_residual <= 1e-6
    spacing = max(patch.diagnostics.spacing)
    assert patch.diagnostics.ode_residual_scaled <= 10.0 * spacing**2
    assert tangency_check(patch, fam) <= 100.0 * spacing**4
    gi0 = moore_penrose(f.jacobian(x0))
    ep = explicit_patch(f, gi0, patch, x0=x0)
    assert float(np.nanmax(np.abs(ep - patch.psi))) <= 1e-6


# ---------------------------------------------------------------------------
# rank-one slice of 2x2 matrices


def test_rank_one_slice_patch_stays_singular():
    fam = builtin_family("sec4_2x2")
    patch = integrate(fam, 0.2, 5e-3, grid_points=5)
    assert not patch.diagnostics.breached
    amb = patch.reconstruct().reshape(-1, 4)
    dets = np.abs(amb[:, 0] * amb[:, 3] - amb[:, 1] * amb[:, 2])
    assert float(dets.max()) <= 1e-8
    assert patch.diagnostics.path_residual <= 1e-8
