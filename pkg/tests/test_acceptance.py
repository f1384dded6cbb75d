"""Acceptance gate: one test per shipped guarantee, at its stated tolerance.

Each test prints a single ``criterion NN PASS/FAIL`` line (visible with
``pytest -s``; with ``-v`` the test names carry the same information).
"""

import time

import numpy as np

from oblique import (
    alpha_operator_family,
    chart_d,
    cofinal_member,
    coordinate_operator,
    fixed_rank_chart_check,
    graph_subspace,
    integrate,
    kernel_family,
    locally_fine_probe,
    moore_penrose,
    op_norm,
    operator_context,
    operator_family,
    perturbed_gi,
    seven_conditions,
    subspace_distance,
    tangency_check,
    tangency_fixed_rank,
)
from oblique.builtins import builtin_family, builtin_map, rank_jump_family, sec4_context
from oblique.families import CoordinateOperator
from oblique.frobenius import explicit_patch
from oblique.geninv import c_op, trial_rng
from oblique.opmanifold import sample_fixed_rank_near, unvec, vec
from oblique.suites import (
    random_complement,
    random_gi,
    random_rank_matrix,
    random_subspace,
    run_suite,
    sample_inside,
    sample_outside,
)

SEED = 20240817


def _report(number: int, description: str, ok: bool):
    print(f"criterion {number:02d} {'PASS' if ok else 'FAIL'}: {description}")
    assert ok, f"criterion {number} failed: {description}"


def test_criterion_01_seven_conditions_agree_in_500_trials():
    start = time.perf_counter()
    report = run_suite("thm1_1", trials=500, seed=SEED)
    elapsed = time.perf_counter() - start
    ok = report.failures == 0 and report.summary["indecisive"] == 0 and elapsed < 30.0
    _report(1, f"500 equivalence trials, 0 disagreements, {elapsed:.1f}s", ok)


def test_criterion_02_inverse_axioms_and_residual_identity():
    worst_axiom = 0.0
    worst_identity = 0.0
    for trial in range(200):
        rng = trial_rng(SEED, trial)
        m, n = (int(v) for v in rng.integers(2, 6, size=2))
        r = int(rng.integers(0, min(m, n) + 1))
        a = random_rank_matrix(rng, m, n, r)

        inverses = [moore_penrose(a), random_gi(rng, a)]
        t = sample_inside(rng, a, inverses[0])
        inverses.append(perturbed_gi(a, inverses[0], t))
        for gi in inverses:
            fwd, inv = gi.forward, gi.inverse
            worst_axiom = max(
                worst_axiom,
                op_norm(fwd @ inv @ fwd - fwd) / (1 + op_norm(fwd)),
                op_norm(inv @ fwd @ inv - inv) / (1 + op_norm(inv)),
            )

        gi = inverses[0]
        t2 = sample_outside(rng, a, gi)
        if t2 is None or trial % 2 == 0:
            t2 = sample_inside(rng, a, gi)
        c = c_op(a, gi, t2)
        b = gi.inverse @ np.linalg.inv(c)
        lhs = t2 @ b @ t2 - t2
        rhs = -(np.eye(m) - a @ gi.inverse) @ np.linalg.solve(c, t2)
        worst_identity = max(worst_identity, op_norm(lhs - rhs) / (1 + op_norm(t2)))

    ok = worst_axiom <= 1e-8 and worst_identity <= 1e-8
    _report(2, f"axiom residual {worst_axiom:.2e}, identity residual {worst_identity:.2e}", ok)


def test_criterion_03_inverse_continuity_over_dyadic_radii():
    radii = [0.2 / 2**i for i in range(5)]
    ok = True
    detail = []
    for name in ("sphere_2d", "sphere_3d"):
        f, x0 = builtin_map(name)
        gi0 = moore_penrose(f.jacobian(x0))
        probe = locally_fine_probe(lambda p: f.jacobian(p), x0, gi0, radii, samples=8, seed=SEED)
        devs = [o.max_deviation for o in probe.outcomes]
        monotone = all(b <= 1.1 * a for a, b in zip(devs, devs[1:]))
        ok = ok and probe.all_pass and monotone
        detail.append(f"{name} devs {['%.3e' % d for d in devs]}")

    jump = rank_jump_family()
    gi0 = moore_penrose(jump(np.zeros(2)))
    probe = locally_fine_probe(jump, np.zeros(2), gi0, radii, samples=8, seed=SEED)
    ok = ok and all(len(o.failures) == 8 for o in probe.outcomes)
    _report(3, "; ".join(detail) + "; rank-jump family fails at every radius", ok)


def test_criterion_04_graph_round_trips_200_triples():
    worst_alpha = 0.0
    worst_graph = 0.0
    for trial in range(200):
        rng = trial_rng(SEED, trial)
        n = int(rng.integers(2, 7))
        k = int(rng.integers(0, n + 1))
        m0 = random_subspace(rng, n, k)
        estar = random_complement(rng, m0)
        alpha = CoordinateOperator(rng.uniform(-3.0, 3.0, size=(estar.dim, m0.dim)))
        mx = graph_subspace(m0, estar, alpha)
        recovered = coordinate_operator(m0, estar, mx)
        worst_alpha = max(worst_alpha, float(np.max(np.abs(recovered.alpha - alpha.alpha), initial=0.0)))
        worst_graph = max(worst_graph, subspace_distance(graph_subspace(m0, estar, recovered), mx))
    ok = worst_alpha <= 1e-8 and worst_graph <= 1e-8
    _report(4, f"alpha gap {worst_alpha:.2e}, graph gap {worst_graph:.2e} over 200 triples", ok)


def test_criterion_05_circle_patch():
    start = time.perf_counter()
    f, x0 = builtin_map("sphere_2d")
    fam = kernel_family(f, x0)
    patch = integrate(fam, 0.9, 1e-3)
    amb = patch.reconstruct()
    closed_form = float(np.max(np.abs(amb[..., 1] - np.sqrt(1.0 - amb[..., 0] ** 2))))
    tangency = tangency_check(patch, fam)
    gi0 = moore_penrose(f.jacobian(x0))
    explicit_gap = float(np.nanmax(np.abs(explicit_patch(f, gi0, patch, x0=x0) - patch.psi)))
    elapsed = time.perf_counter() - start
    ok = closed_form <= 1e-6 and explicit_gap <= 1e-6 and tangency <= 1e-6 and elapsed < 5.0
    _report(
        5,
        f"circle closed-form {closed_form:.2e}, explicit gap {explicit_gap:.2e}, "
        f"tangency {tangency:.2e}, {elapsed:.1f}s",
        ok,
    )


def test_criterion_06_sphere_patch_51x51():
    start = time.perf_counter()
    f, x0 = builtin_map("sphere_3d")
    fam = kernel_family(f, x0)
    patch = integrate(fam, 0.5, 1e-3, grid_points=51)
    amb = patch.reconstruct()
    closed_form = float(
        np.max(np.abs(amb[..., 2] - np.sqrt(1.0 - amb[..., 0] ** 2 - amb[..., 1] ** 2)))
    )
    path = patch.diagnostics.path_residual
    level = patch.diagnostics.level_set_residual
    tangency = tangency_check(patch, fam)  # fine-grid tangency rides along
    elapsed = time.perf_counter() - start
    ok = (
        path <= 1e-6
        and closed_form <= 1e-5
        and level <= 1e-6
        and tangency <= 1e-5
        and elapsed < 60.0
    )
    _report(
        6,
        f"51x51 sphere: path {path:.2e}, closed-form {closed_form:.2e}, "
        f"level-set {level:.2e}, tangency {tangency:.2e}, {elapsed:.1f}s",
        ok,
    )


def test_criterion_07_2x2_example():
    ctx = sec4_context()
    fam = builtin_family("sec4_2x2")
    ok = ctx.m0.dim == 3
    for eps in (0.5, -0.5, 0.1, -0.1, 0.01, -0.01):
        a_eps = np.diag([1.0, eps])
        ok = ok and not cofinal_member(fam, vec(a_eps))
        ok = ok and seven_conditions(ctx.a, ctx.ainv, a_eps).all_false
    _report(7, "slice dim 3; splitting and all seven conditions fail at diag(1, eps)", ok)


def test_criterion_08_charts_across_shapes():
    ok = True
    detail = []
    for (m, n, k) in ((2, 2, 1), (3, 3, 1), (4, 5, 2)):
        rng = trial_rng(SEED, m, n, k)
        ctx = operator_context(random_rank_matrix(rng, m, n, k))
        rep = fixed_rank_chart_check(ctx, samples=100, seed=SEED)
        x = sample_fixed_rank_near(ctx, rng)
        tan = tangency_fixed_rank(ctx, x, curves=ctx.m0.dim + 6, seed=SEED)
        expected_dim = m * n - (m - k) * (n - k)
        shape_ok = (
            rep.round_trip_max <= 1e-10
            and rep.membership_max <= 1e-8
            and rep.membership_failures == 0
            and rep.rank_failures == 0
            and tan.max_residual <= 1e-6
            and tan.tangent_span_dim == expected_dim
            and rep.m0_dim == expected_dim
        )
        ok = ok and shape_ok
        detail.append(f"{m}x{n} rank {k}: trip {rep.round_trip_max:.1e}, tan {tan.max_residual:.1e}")
    _report(8, "; ".join(detail), ok)


def test_criterion_09_alpha_formula_consistency():
    worst_generic = 0.0
    worst_fd = 0.0
    for (m, n, k) in ((2, 2, 1), (3, 3, 2)):
        rng = trial_rng(SEED, m, n, k)
        ctx = operator_context(random_rank_matrix(rng, m, n, k))
        fam = operator_family(ctx, rank_tol=1e-8)
        for trial in range(50):
            rng = trial_rng(SEED, m, n, k, trial)
            x = sample_fixed_rank_near(ctx, rng)
            coeffs = rng.standard_normal(ctx.m0.dim)
            coeffs /= np.linalg.norm(coeffs)
            dx = unvec(ctx.m0.basis @ coeffs, m, n)
            value = alpha_operator_family(ctx, x, dx)

            generic = coordinate_operator(ctx.m0, ctx.estar, fam.eval(vec(x)))
            via_generic = ctx.estar.basis @ (generic.alpha @ (ctx.m0.basis.T @ vec(dx)))
            worst_generic = max(worst_generic, float(np.max(np.abs(vec(value) - via_generic))))

            h = 1e-6 / (1.0 + op_norm(dx))
            fd = (chart_d(ctx, x + h * dx) - chart_d(ctx, x - h * dx)) / (2.0 * h)
            via_fd = ctx.p_na_plus @ (-fd) @ ctx.p_na
            worst_fd = max(worst_fd, float(np.max(np.abs(value - via_fd))))
    ok = worst_generic <= 1e-7 and worst_fd <= 1e-5
    _report(9, f"alpha vs generic {worst_generic:.2e}, vs chart derivative {worst_fd:.2e}", ok)


def _strip_timestamps(payload):
    if isinstance(payload, dict):
        return {k: _strip_timestamps(v) for k, v in payload.items() if k != "timestamp"}
    if isinstance(payload, list):
        return [_strip_timestamps(v) for v in payload]
    return payload


def test_criterion_10_verify_all_is_deterministic():
    first = _strip_timestamps(run_suite("all", trials=30, seed=SEED).to_dict())
    second = _strip_timestamps(run_suite("all", trials=30, seed=SEED).to_dict())
    ok = first == second and first["summary"]["failures"] == 0
    _report(10, "verify-all reports identical across runs and fully green", ok)
