import numpy as np
import pytest

from oblique import (
    BallError,
    MembershipError,
    TransversalityError,
    alpha_operator_family,
    chart_d,
    chart_d_star,
    cofinal_member,
    coordinate_operator,
    fixed_rank_chart_check,
    mx_basis,
    op_norm,
    operator_context,
    operator_family,
    perturbed_gi,
    rank_of,
    tangency_fixed_rank,
)
from oblique.builtins import sec4_context
from oblique.geninv import c_op
from oblique.opmanifold import membership_residual, sample_fixed_rank_near, unvec, vec
from oblique.suites import random_rank_matrix

A2 = np.diag([1.0, 0.0])


def brute_force_mx_dim(x, tol=1e-10):
    """Count T with T N(X) in R(X) by stacking the linear constraints."""
    m, n = x.shape
    u, s, vh = np.linalg.svd(x)
    r = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    ker = vh[r:].T
    left_null = u[:, r:]
    # constraints: left_null^T T ker = 0, one row per (i, j) pair
    rows = []
    for i in range(left_null.shape[1]):
        for j in range(ker.shape[1]):
            rows.append(np.outer(left_null[:, i], ker[:, j]).reshape(-1))
    if not rows:
        return m * n
    c = np.vstack(rows)
    return m * n - np.linalg.matrix_rank(c)


# ---------------------------------------------------------------------------
# context and the tangent slice


def test_context_dimensions_2x2_example():
    ctx = sec4_context()
    assert ctx.m0.dim == 3
    assert ctx.estar.dim == 1
    # complement is exactly the (2,2) matrix-unit line
    e22 = np.zeros(4)
    e22[3] = 1.0
    assert abs(abs(ctx.estar.basis[:, 0] @ e22) - 1.0) <= 1e-12
    # slice elements have a free upper-left 2x2 corner except the (2,2) slot
    for col in ctx.m0.basis.T:
        assert abs(col[3]) <= 1e-12


def test_mx_basis_matches_constraint_counting(rng):
    for trial in range(20):
        m, n = (int(v) for v in rng.integers(2, 5, size=2))
        r = int(rng.integers(1, min(m, n) + 1))
        x = random_rank_matrix(rng, m, n, r)
        ctx = operator_context(x)
        basis = mx_basis(ctx, x, ctx.ainv)
        assert basis.dim == brute_force_mx_dim(x)
        assert basis.dim == m * n - (m - r) * (n - r)


def test_mx_basis_full_space_for_invertible():
    x = np.array([[2.0, 1.0], [0.0, 1.0]])
    ctx = operator_context(x)
    assert mx_basis(ctx, x, ctx.ainv).dim == 4


def test_complement_characterization(rng):
    # every element of the complement maps into N(A+) and kills R(A+)
    for _ in range(10):
        m, n = (int(v) for v in rng.integers(2, 5, size=2))
        r = int(rng.integers(1, min(m, n)))
        a = random_rank_matrix(rng, m, n, r)
        ctx = operator_context(a)
        for col in ctx.estar.basis.T:
            t = unvec(col, m, n)
            assert op_norm(ctx.p_ra @ t) <= 1e-10
            assert op_norm(t @ ctx.p_ra_plus) <= 1e-10


def test_three_part_decomposition(rng):
    ctx = sec4_context()
    for _ in range(20):
        t = rng.standard_normal((2, 2))
        p1 = ctx.p_ra @ t
        p2 = ctx.p_na_plus @ t @ ctx.p_ra_plus
        p3 = ctx.p_na_plus @ t @ ctx.p_na
        np.testing.assert_allclose(p1 + p2 + p3, t, atol=1e-12)
        assert membership_residual(ctx, p1) <= 1e-10
        assert membership_residual(ctx, p2) <= 1e-10
        proj = ctx.estar.basis @ (ctx.estar.basis.T @ vec(p3))
        assert np.linalg.norm(vec(p3) - proj) <= 1e-10


# ---------------------------------------------------------------------------
# the family over operator space and its transversal set


def test_operator_family_cofinal_fails_at_diagonal_perturbations():
    ctx = sec4_context()
    fam = operator_family(ctx, rank_tol=1e-4)
    assert cofinal_member(fam, vec(A2))
    for eps in (0.5, -0.5, 0.1, -0.1, 0.01, -0.01):
        assert not cofinal_member(fam, vec(np.diag([1.0, eps])))
    assert fam.eval(vec(np.diag([1.0, 0.5]))).dim == 4


def test_operator_family_tracks_slice_dimension(rng):
    ctx = sec4_context()
    fam = operator_family(ctx, rank_tol=1e-6)
    x = sample_fixed_rank_near(ctx, rng)
    assert fam.eval(vec(x)).dim == 3
    assert cofinal_member(fam, vec(x))


# ---------------------------------------------------------------------------
# charts


def test_chart_fixes_the_base():
    ctx = sec4_context()
    np.testing.assert_allclose(chart_d(ctx, A2), A2, atol=1e-14)
    np.testing.assert_allclose(chart_d_star(ctx, A2), A2, atol=1e-14)


def test_chart_on_diagonal_perturbation():
    # (X - A) P[R(A+)] vanishes and C = I, so D is the identity there
    ctx = sec4_context()
    x = np.diag([1.0, 0.25])
    c = c_op(ctx.a, ctx.ainv, x)
    np.testing.assert_allclose(c, np.eye(2), atol=1e-15)
    np.testing.assert_allclose((x - ctx.a) @ ctx.p_ra_plus, np.zeros((2, 2)), atol=1e-15)
    np.testing.assert_allclose(chart_d(ctx, x), x, atol=1e-14)


def test_chart_round_trips_random(rng):
    for trial in range(25):
        m, n = (int(v) for v in rng.integers(2, 5, size=2))
        r = int(rng.integers(1, min(m, n) + 1))
        ctx = operator_context(random_rank_matrix(rng, m, n, r))
        x = sample_fixed_rank_near(ctx, rng)
        t = chart_d(ctx, x)
        np.testing.assert_allclose(chart_d_star(ctx, t), x, atol=1e-10 * (1 + op_norm(x)))
        t2 = ctx.a + 0.2 * ctx.ball_radius * unvec(ctx.m0.basis @ _unit(rng, ctx.m0.dim), m, n)
        np.testing.assert_allclose(chart_d(ctx, chart_d_star(ctx, t2)), t2, atol=1e-10 * (1 + op_norm(t2)))


def _unit(rng, k):
    v = rng.standard_normal(k)
    return v / np.linalg.norm(v)


def test_chart_ball_guard():
    ctx = sec4_context()
    with pytest.raises(BallError):
        chart_d(ctx, np.array([[1.0, 0.0], [1.5, 0.0]]))


def test_chart_straightens_rank_and_preserves_it():
    ctx = sec4_context()
    rep = fixed_rank_chart_check(ctx, samples=50, seed=11)
    assert rep.membership_failures == 0
    assert rep.rank_failures == 0
    assert rep.round_trip_max <= 1e-10
    assert rep.m0_dim == 3


def test_chart_d_star_of_slice_element_has_base_rank(rng):
    ctx = sec4_context()
    for _ in range(20):
        dt = unvec(ctx.m0.basis @ _unit(rng, 3), 2, 2)
        x = chart_d_star(ctx, ctx.a + 0.3 * dt)
        assert rank_of(x, 1e-9) == 1


def test_two_chart_compatibility(rng):
    # the transition between charts at two nearby base operators is the
    # identity on the overlap in the straightened coordinates
    a = random_rank_matrix(rng, 3, 3, 1)
    ctx_a = operator_context(a)
    b = sample_fixed_rank_near(ctx_a, rng, scale=0.02)
    ctx_b = operator_context(b)
    for _ in range(10):
        x = sample_fixed_rank_near(ctx_a, rng, scale=0.02)
        if op_norm((x - b) @ ctx_b.ainv.inverse) >= 1.0:
            continue
        t_a = chart_d(ctx_a, x)
        t_b = chart_d(ctx_b, x)
        assert membership_residual(ctx_a, t_a) <= 1e-8
        assert membership_residual(ctx_b, t_b) <= 1e-8
        np.testing.assert_allclose(chart_d_star(ctx_b, t_b), chart_d_star(ctx_a, t_a), atol=1e-9)


# ---------------------------------------------------------------------------
# coordinate operator in closed form


def test_alpha_zero_at_base(rng):
    ctx = sec4_context()
    for _ in range(10):
        dx = unvec(ctx.m0.basis @ _unit(rng, 3), 2, 2)
        np.testing.assert_allclose(alpha_operator_family(ctx, ctx.a, dx), np.zeros((2, 2)), atol=1e-12)


def test_alpha_rejects_directions_off_the_slice():
    ctx = sec4_context()
    with pytest.raises(MembershipError):
        alpha_operator_family(ctx, ctx.a, np.diag([0.0, 1.0]))


def test_alpha_requires_transversal_x():
    ctx = sec4_context()
    dx = unvec(ctx.m0.basis[:, 0], 2, 2)
    with pytest.raises(TransversalityError):
        alpha_operator_family(ctx, np.diag([1.0, 0.3]), dx)


def test_alpha_specific_2x2_direction():
    # X = [[1, 0], [0.1, 0]] has kernel e2 and range span{(1, 0.1)}; for the
    # direction E12, membership (E12 + a)(e2) in span{(1, 0.1)} forces the
    # graph value a = 0.1 E22.
    ctx = sec4_context()
    x = ctx.a + 0.1 * np.array([[0.0, 0.0], [1.0, 0.0]])
    dx = np.array([[0.0, 1.0], [0.0, 0.0]])
    value = alpha_operator_family(ctx, x, dx)
    np.testing.assert_allclose(value, [[0.0, 0.0], [0.0, 0.1]], atol=1e-12)
    fam = operator_family(ctx, rank_tol=1e-8)
    generic = coordinate_operator(ctx.m0, ctx.estar, fam.eval(vec(x)))
    via_generic = ctx.estar.basis @ (generic.alpha @ (ctx.m0.basis.T @ vec(dx)))
    np.testing.assert_allclose(vec(value), via_generic, atol=1e-12)


def test_alpha_matches_generic_coordinate_operator(rng):
    for (m, n, k) in ((2, 2, 1), (3, 3, 2)):
        ctx = operator_context(random_rank_matrix(rng, m, n, k))
        fam = operator_family(ctx, rank_tol=1e-8)
        for _ in range(10):
            x = sample_fixed_rank_near(ctx, rng)
            dx = unvec(ctx.m0.basis @ _unit(rng, ctx.m0.dim), m, n)
            value = alpha_operator_family(ctx, x, dx)
            generic = coordinate_operator(ctx.m0, ctx.estar, fam.eval(vec(x)))
            via_generic = ctx.estar.basis @ (generic.alpha @ (ctx.m0.basis.T @ vec(dx)))
            assert float(np.max(np.abs(vec(value) - via_generic))) <= 1e-7


def test_alpha_matches_chart_derivative(rng):
    for (m, n, k) in ((2, 2, 1), (3, 3, 2)):
        ctx = operator_context(random_rank_matrix(rng, m, n, k))
        for _ in range(10):
            x = sample_fixed_rank_near(ctx, rng)
            dx = unvec(ctx.m0.basis @ _unit(rng, ctx.m0.dim), m, n)
            value = alpha_operator_family(ctx, x, dx)
            h = 1e-6 / (1.0 + op_norm(dx))
            fd = (chart_d(ctx, x + h * dx) - chart_d(ctx, x - h * dx)) / (2 * h)
            via_fd = ctx.p_na_plus @ (-fd) @ ctx.p_na
            assert float(np.max(np.abs(value - via_fd))) <= 1e-5


# ---------------------------------------------------------------------------
# tangency of the fixed-rank manifold


def test_tangency_fixed_rank_at_base_operator():
    ctx = sec4_context()
    rep = tangency_fixed_rank(ctx, A2, curves=9, seed=5)
    assert rep.max_residual <= 1e-6
    assert rep.tangent_span_dim == rep.expected_dim == 3


def test_tangency_fixed_rank_off_base(rng):
    ctx = operator_context(random_rank_matrix(rng, 3, 3, 1))
    x = sample_fixed_rank_near(ctx, rng)
    rep = tangency_fixed_rank(ctx, x, curves=ctx.m0.dim + 6, seed=5)
    assert rep.max_residual <= 1e-6
    assert rep.tangent_span_dim == rep.expected_dim == 9 - 4


def test_key_ball_identities(rng):
    # C^{-1} T P[R(A+)] = A and C^{-1} P[N(A+)] = P[N(A+)] inside the ball
    from oblique.suites import sample_inside

    for _ in range(20):
        m, n = (int(v) for v in rng.integers(2, 5, size=2))
        r = int(rng.integers(1, min(m, n) + 1))
        a = random_rank_matrix(rng, m, n, r)
        ctx = operator_context(a)
        t = sample_inside(rng, a, ctx.ainv)
        c = c_op(a, ctx.ainv, t)
        assert op_norm(np.linalg.solve(c, t @ ctx.p_ra_plus) - a) <= 1e-10
        assert op_norm(np.linalg.solve(c, ctx.p_na_plus) - ctx.p_na_plus) <= 1e-10


def test_slice_projector_idempotent(rng):
    ctx = sec4_context()
    for _ in range(10):
        x = sample_fixed_rank_near(ctx, rng)
        gi_x = perturbed_gi(ctx.a, ctx.ainv, x)
        p_range = x @ gi_x.inverse
        p_co = gi_x.inverse @ x
        big = np.kron(p_range, np.eye(2)) + np.kron(np.eye(2) - p_range, p_co.T)
        assert op_norm(big @ big - big) <= 1e-10
