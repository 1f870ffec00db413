"""Acceptance gate: one test per shipped guarantee, one printed verdict
line per criterion.  Tolerances here are contractual; do not relax them."""

import dataclasses
import time

import numpy as np

from volterra import expr as ex
from volterra.config import build_problem, goursat_config, linear_growth_config
from volterra.convex import Ball, Box, Polygon, hausdorff, steiner, steiner_lipschitz_constant
from volterra.domain import DomainContext, MovingRegion, OpenBox, TauMap
from volterra.grids import GridFunction
from volterra.operators import H_apply, check_hypotheses
from volterra.problem import AdditiveOuter, MultiMap
from volterra.solver import FunctionFamily, condensing_certificate, condensing_check, picard_solve
from volterra.weights import bielecki_norm, build_schedule, phi, psi

from conftest import random_convex_polygon, random_family_values


def report(capsys, idx, name, ok, detail):
    with capsys.disabled():
        print(f"criterion {idx} [{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"criterion {idx} {name}: {detail}"


def solve_linear(h):
    problem = build_problem(linear_growth_config(amplitude=1.0, n=3, h=h))
    schedule = build_schedule(problem)
    report_ = picard_solve(problem, schedule)
    grid = problem.ctx.grid(problem.n)
    exact = np.exp(grid.axis(0))
    rel = np.abs(report_.solution.values[:, 0] - exact) / exact
    return float(rel.max()), report_


def test_1_exponential_benchmark(capsys):
    start = time.perf_counter()
    err, rep = solve_linear(1.0 / 256.0)
    runtime = time.perf_counter() - start
    err_half, _ = solve_linear(1.0 / 512.0)
    ratio = err / err_half
    ok = err <= 5e-4 and 3.5 <= ratio <= 4.5 and runtime < 5.0 and rep.converged
    report(
        capsys, 1, "exponential growth benchmark", ok,
        f"max rel err {err:.3e} (tol 5e-4), halving ratio {ratio:.3f} "
        f"(window [3.5, 4.5]), runtime {runtime:.2f}s (limit 5s)",
    )


def test_2_weight_decay_closed_form(capsys):
    omega = OpenBox((0.0,), (1.0,))
    region = MovingRegion((ex.parse("0"),), (ex.parse("x1"),), omega)
    ctx = DomainContext(omega, region, TauMap(ex.parse("x1"), 1), 1.0 / 512.0, "anchored")
    one = ex.parse("1")
    value = phi(10.0, one, ctx, 1)
    target = (1.0 - np.exp(-10.0)) / 10.0
    ladder = [phi(float(L), one, ctx, 1) for L in range(1, 1025)]
    monotone = all(b <= a for a, b in zip(ladder, ladder[1:]))
    ok = abs(value - target) <= 1e-4 and monotone and ladder[-1] < 1e-3
    report(
        capsys, 2, "weight transform decay", ok,
        f"value at L=10 is {value:.7f} vs {target:.7f} (tol 1e-4), "
        f"nonincreasing over L=1..1024: {monotone}, "
        f"tail value {ladder[-1]:.4e} (tol 1e-3)",
    )


def test_3_plane_cumulative_product(capsys):
    problem = build_problem(goursat_config(h=1.0 / 128.0))
    rep = picard_solve(problem, build_schedule(problem))
    grid = problem.ctx.grid(problem.n)
    x1, x2 = grid.meshgrid()
    u = rep.solution.values[..., 0]
    err = float(np.abs(u - x1 * x2).max())
    h = grid.steps[0]
    mixed = (u[1:, 1:] - u[1:, :-1] - u[:-1, 1:] + u[:-1, :-1]) / (h * h)
    density_err = float(np.abs(mixed - 1.0).max())
    ok = err <= 1e-3 and density_err <= 5e-2
    report(
        capsys, 3, "plane cumulative problem", ok,
        f"max |u - x1*x2| = {err:.3e} (tol 1e-3), "
        f"mixed-difference density error {density_err:.3e} (tol 5e-2)",
    )


def test_4_oscillating_region_contraction(
    capsys, oscillating_problem, oscillating_schedule
):
    hyp = check_hypotheses(oscillating_problem)
    row = oscillating_schedule.row(oscillating_problem.n)
    xs = np.geomspace(row.r * 1e-12, row.r, 1000)
    psi_vals = psi(row, oscillating_problem.outer.modulus, xs)
    contraction = bool(np.all(psi_vals < xs))
    rep = picard_solve(oscillating_problem, oscillating_schedule)
    ok = (
        hyp.passed
        and contraction
        and rep.converged
        and rep.residual <= 1e-6
        and rep.contraction_ratio < 1.0
    )
    report(
        capsys, 4, "oscillating moving region", ok,
        f"hypotheses {'pass' if hyp.passed else 'fail'}, "
        f"psi(x) < x on 1000 samples: {contraction}, "
        f"residual {rep.residual:.3e} (tol 1e-6), "
        f"observed ratio {rep.contraction_ratio:.3f} (< 1)",
    )


def test_5_steiner_point_properties(capsys):
    rng = np.random.default_rng(123)
    equiv_gap = 0.0
    for i in range(1000):
        v = rng.uniform(-5.0, 5.0, size=2)
        kind = i % 3
        if kind == 0:
            s = random_convex_polygon(rng)
            shifted = Polygon(tuple((x + v[0], y + v[1]) for x, y in s.vertices))
        elif kind == 1:
            c = rng.uniform(-2.0, 2.0, size=2)
            r = rng.uniform(0.1, 2.0)
            s = Ball(tuple(c), r)
            shifted = Ball(tuple(c + v), r)
        else:
            lo = rng.uniform(-2.0, 0.0, size=2)
            hi = lo + rng.uniform(0.1, 2.0, size=2)
            s = Box(tuple(lo), tuple(hi))
            shifted = Box(tuple(lo + v), tuple(hi + v))
        gap = float(np.abs(steiner(shifted) - steiner(s) - v).max())
        equiv_gap = max(equiv_gap, gap)

    constant = steiner_lipschitz_constant(2)
    lipschitz_excess = -np.inf
    for _ in range(1000):
        a = random_convex_polygon(rng)
        b = random_convex_polygon(rng)
        gap = float(np.linalg.norm(steiner(a) - steiner(b)))
        lipschitz_excess = max(
            lipschitz_excess, gap - constant * hausdorff(a, b)
        )

    expected = (1.0, 4.0 / np.pi, 1.5)
    const_err = max(
        abs(steiner_lipschitz_constant(m) - c) for m, c in zip((1, 2, 3), expected)
    )
    ok = equiv_gap <= 1e-12 and lipschitz_excess <= 1e-9 and const_err <= 1e-12
    report(
        capsys, 5, "minimal-Lipschitz selection", ok,
        f"translation gap {equiv_gap:.2e} (tol 1e-12), "
        f"Lipschitz excess {lipschitz_excess:.2e} (tol 1e-9), "
        f"constant error {const_err:.2e} (tol 1e-12)",
    )


def test_6_weighted_norm_sandwich(
    capsys, linear_problem, linear_schedule, oscillating_problem, oscillating_schedule
):
    rng = np.random.default_rng(7)
    worst = -np.inf
    for problem, schedule in (
        (linear_problem, linear_schedule),
        (oscillating_problem, oscillating_schedule),
    ):
        n = problem.n
        row = schedule.row(n)
        ctx = problem.ctx
        grid = ctx.grid(n)
        blowup = float(np.exp(row.L * ctx.sup_tau(n)))
        for _ in range(100):
            u = GridFunction(grid, rng.uniform(-1.0, 1.0, size=grid.shape + (1,)))
            weighted = bielecki_norm(u, row.L, ctx, n)
            plain = u.sup_norm()
            worst = max(worst, weighted - plain, plain - blowup * weighted)
    ok = worst <= 1e-12
    report(
        capsys, 6, "weighted norm sandwich", ok,
        f"worst slack violation {worst:.2e} over 100 functions per domain "
        f"(tol 1e-12)",
    )


def test_7_condensing_harness(
    capsys, linear_problem, linear_schedule, oscillating_problem, oscillating_schedule
):
    def family(problem, seed):
        grid = problem.ctx.grid(problem.n)
        rng = np.random.default_rng(seed)
        profiles = random_family_values(rng, grid.axes()[0], 20)
        return FunctionFamily(
            tuple(GridFunction(grid, p[:, None]) for p in profiles)
        )

    honest_linear = condensing_check(
        linear_problem, linear_schedule, family(linear_problem, 3)
    )
    honest_oscillating = condensing_check(
        oscillating_problem, oscillating_schedule, family(oscillating_problem, 7)
    )
    adversarial = dataclasses.replace(
        linear_problem,
        rhs=MultiMap((ex.parse("0"),), (ex.parse("0"),), ex.parse("0"), ex.parse("0")),
        outer=AdditiveOuter(g=(ex.parse("2 * u"),), modulus=ex.parse("x")),
    )
    cheat = condensing_check(adversarial, linear_schedule, family(adversarial, 3))

    certs = (
        condensing_certificate((0.5, 0.2), (1.0, 1.0), (0.9, 0.9)),
        condensing_certificate((0.0, 0.0), (0.0, 0.0), (0.5, 0.5)),
        condensing_certificate((1.0,), (1.0,), (0.5,)),
    )
    cert_ok = (
        certs[0].values == (0.4, 0.7) and certs[0].certified
        and certs[1].values == (0.0, 0.0) and not certs[1].certified
        and certs[2].values == (-0.5,) and not certs[2].certified
    )
    ok = (
        honest_linear.passed
        and honest_oscillating.passed
        and not cheat.passed
        and cert_ok
    )
    report(
        capsys, 7, "condensing harness", ok,
        f"20-member families pass: {honest_linear.passed}/{honest_oscillating.passed}, "
        f"adversarial doubling rejected: {not cheat.passed}, "
        f"certificate arithmetic exact: {cert_ok}",
    )


def test_8_invariant_ball(
    capsys, linear_problem, linear_schedule, oscillating_problem, oscillating_schedule
):
    rng = np.random.default_rng(11)
    worst = -np.inf
    for problem, schedule in (
        (linear_problem, linear_schedule),
        (oscillating_problem, oscillating_schedule),
    ):
        n = problem.n
        row = schedule.row(n)
        ctx = problem.ctx
        grid = ctx.grid(n)
        for i in range(50):
            raw = GridFunction(grid, rng.uniform(-1.0, 1.0, size=grid.shape + (1,)))
            norm = bielecki_norm(raw, row.L, ctx, n)
            fraction = 1.0 if i % 2 == 0 else rng.uniform(0.0, 1.0)
            u = GridFunction(grid, raw.values * (fraction * row.a / norm))
            image = H_apply(problem, u, n)
            worst = max(worst, bielecki_norm(image, row.L, ctx, n) - row.a)
    ok = worst <= 1e-9
    report(
        capsys, 8, "invariant ball", ok,
        f"worst image-norm excess over the radius {worst:.2e} for 50 "
        f"functions per problem (tol 1e-9)",
    )
