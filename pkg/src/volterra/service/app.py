"""HTTP service exposing the solver pipeline.

Endpoints mirror the CLI subcommands one-to-one: /expr/eval, /check,
/weights, /solve, /example, plus /health.  All state lives in the request;
the service is a stateless wrapper around the library, and every CSV an
endpoint returns is produced by the same code paths a direct library call
would use, so artifacts are byte-identical either way.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from .. import expr as ex
from ..config import (
    BUILTIN_EXAMPLES,
    Config,
    ConfigError,
    build_problem,
    builtin_config,
    goursat_config,
    linear_growth_config,
    oscillating_config,
    parse_config,
)
from ..domain import (
    InvalidSet,
    NegativeWeightFunction,
    check_lambda_invariance,
    check_tau_admissible,
)
from ..convex import InvalidDirection
from ..goursat import IncompatibleTraces, goursat_outer
from ..grids import GridCoverage, GridMismatch
from ..operators import InvalidMultimap, check_hypotheses
from ..problem import ProblemSpec, coordinate_bindings
from ..solver import NonContractive, picard_solve
from ..weights import (
    LengthMismatch,
    WeightSchedule,
    WeightSelectionFailed,
    build_schedule,
    check_brzeg,
)
from .models import (
    CheckRequest,
    CheckResponse,
    CheckSection,
    ComparisonModel,
    ExampleRequest,
    ExampleResponse,
    ExprEvalRequest,
    ExprEvalResponse,
    ScheduleRowModel,
    SolveRequest,
    SolveResponse,
    WeightsRequest,
    WeightsResponse,
)

OPERATIONAL_ERRORS = (
    ConfigError,
    ex.ExprError,
    InvalidSet,
    InvalidDirection,
    NegativeWeightFunction,
    InvalidMultimap,
    WeightSelectionFailed,
    LengthMismatch,
    GridMismatch,
    GridCoverage,
    NonContractive,
    IncompatibleTraces,
    ValueError,
    KeyError,
)


def _apply_overrides(config: Config, overrides) -> Config:
    if overrides.n is not None:
        config.n = overrides.n
    if overrides.h is not None:
        config.h = overrides.h
    if overrides.tol_fix is not None:
        config.tol_fix = overrides.tol_fix
    if overrides.max_iter is not None:
        config.max_iter = overrides.max_iter
    if overrides.strategy is not None:
        config.strategy = overrides.strategy
    return config


def _default_probes(problem: ProblemSpec, n: int) -> list[tuple[tuple[float, ...], float]]:
    box = problem.ctx.exhaustion.box(n)
    spans = [hi - lo for lo, hi in zip(box.lower, box.upper)]
    delta = 0.2 * min(spans)
    probes = []
    for frac in (0.3, 0.5, 0.8):
        point = tuple(lo + frac * span for lo, span in zip(box.lower, spans))
        probes.append((point, delta))
    return probes


def _check_sections(problem: ProblemSpec, req: CheckRequest) -> list[CheckSection]:
    n = req.n if req.n is not None else problem.n
    sections: list[CheckSection] = []

    hyp = check_hypotheses(problem, n=n, samples=req.samples, seed=req.seed)
    sections.append(
        CheckSection(
            name="hypotheses",
            passed=hyp.passed,
            detail=hyp.summary(),
            items=[
                f"{item.check} at x={item.location}: {item.message} "
                f"(by {item.magnitude:.3e})"
                for item in hyp.items
            ],
        )
    )

    inv = check_lambda_invariance(problem.ctx, n)
    sections.append(
        CheckSection(
            name="region-invariance",
            passed=inv.passed,
            detail=str(inv),
            items=[]
            if inv.passed
            else [f"region escapes member {n} at x={inv.witness} by {inv.worst_violation:.3e}"],
        )
    )

    adm = check_tau_admissible(problem.ctx, _default_probes(problem, n))
    adm_items = [
        f"probe x0={p.x0}, delta={p.delta:g}: "
        + (
            f"witness {p.witness} lowers sup tau to {p.sup_tau_intersection:.6g} "
            f"< tau(x0) = {p.tau_at_x0:.6g}"
            if p.passed
            else f"no candidate beats tau(x0) = {p.tau_at_x0:.6g} "
            f"(best overlap sup {p.sup_tau_intersection:.6g})"
        )
        for p in adm.probes
    ]
    sections.append(
        CheckSection(
            name="tau-admissibility",
            passed=adm.passed,
            detail=f"{sum(p.passed for p in adm.probes)}/{len(adm.probes)} probes found "
            "a tau-lowering neighbor",
            items=adm_items,
        )
    )

    rule, payload = problem.a_rule
    n_max = req.margin_members if req.margin_members is not None else max(problem.n, 4)
    if rule == "list":
        n_max = min(n_max, len(payload))
    from ..weights import _resolve_targets  # shared with build_schedule

    targets = _resolve_targets(problem, n_max)
    g_norms = [problem.outer.zero_state_norm(problem.ctx, i) for i in range(1, n_max + 1)]
    from ..problem import OuterForm

    modulus = (
        ex.parse("0") if problem.form is OuterForm.SET_VALUED else problem.outer.modulus
    )
    brzeg = check_brzeg(g_norms, modulus, targets, n_max)
    sections.append(
        CheckSection(
            name="margins",
            passed=brzeg.passed,
            detail=brzeg.detail
            + "; d = ["
            + ", ".join(f"{d:.4g}" for d in brzeg.margins)
            + f"] over members 1..{n_max}",
            items=[],
        )
    )
    return sections


def _schedule_to_models(schedule: WeightSchedule) -> list[ScheduleRowModel]:
    return [
        ScheduleRowModel(
            n=row.n,
            L=row.L,
            Lhat=row.L_hat,
            a=row.a,
            k=row.k,
            r=row.r,
            phi_b=row.phi_growth,
            phi_eta=row.phi_fiber,
        )
        for row in schedule.rows
    ]


def _run_solve(config: Config, schedule_csv: str | None) -> SolveResponse:
    problem = build_problem(config)
    if schedule_csv is not None:
        schedule = WeightSchedule.from_csv(schedule_csv)
    else:
        schedule = build_schedule(problem)
    try:
        schedule.row(problem.n)
    except KeyError:
        raise WeightSelectionFailed(
            f"schedule covers members {schedule.rows[0].n}..{schedule.rows[-1].n}, "
            f"solve needs member {problem.n}"
        ) from None
    report = picard_solve(problem, schedule)
    return SolveResponse(
        csv=report.solution.to_csv(),
        summary=report.summary(),
        n=report.n,
        strategy=report.strategy,
        iterations=report.iterations,
        converged=report.converged,
        residual=report.residual,
        contraction_ratio=report.contraction_ratio,
        deltas=list(report.deltas),
        schedule_csv=schedule.to_csv(),
    )


def _example_config(req: ExampleRequest) -> tuple[Config, str | None, float]:
    """Builtin config with the request's knobs applied; returns
    (config, reference expression text or None, comparison tolerance)."""
    name = req.name
    if name not in BUILTIN_EXAMPLES:
        raise ConfigError(
            "example", None, f"unknown example {name!r}; available: {sorted(BUILTIN_EXAMPLES)}"
        )
    if name == "second-kind":
        amplitude = req.amplitude if req.amplitude is not None else 1.0
        config = linear_growth_config(
            amplitude=amplitude,
            n=req.n if req.n is not None else 3,
            h=req.h if req.h is not None else 1.0 / 256.0,
        )
        return config, f"{amplitude!r} * exp(x1)", 5e-4
    if name == "oscillating":
        config = oscillating_config(
            lam=req.lam if req.lam is not None else 2.0,
            n=req.n if req.n is not None else 1,
            h=req.h if req.h is not None else 1.0 / 256.0,
        )
        return config, None, 0.0

    # goursat: assemble g from traces via inclusion-exclusion
    f_text = req.f if req.f is not None else "1"
    traces: dict[tuple[int, ...], ex.Expr] = {}
    if not req.zero_boundary:
        for key, text in req.traces.items():
            axes = [t.strip() for t in key.split(",")]
            pattern = [0, 0]
            for axis in axes:
                if axis not in ("x1", "x2"):
                    raise ConfigError(
                        "example", "traces", f"unknown trace axis {axis!r} (use x1/x2)"
                    )
                pattern[int(axis[1]) - 1] = 1
            traces[tuple(pattern)] = ex.parse(text)
    outer = goursat_outer(traces, req.corner, dim=2)
    g_text = ex.render(outer.g[0])
    f_tree = ex.parse(f_text)
    eta = "1" if ex.variables(f_tree) & {"u", "u1"} else "0"
    config = goursat_config(
        f=f_text,
        g=g_text,
        n=req.n if req.n is not None else 1,
        h=req.h if req.h is not None else 1.0 / 128.0,
        eta=eta,
    )
    if f_text.strip() == "0":
        return config, g_text, 1e-9
    if req.zero_boundary and req.corner == 0.0 and f_text.strip() == "1":
        return config, "x1 * x2", 1e-3
    return config, None, 0.0


def _run_example(req: ExampleRequest) -> ExampleResponse:
    config, reference, tolerance = _example_config(req)
    config_text = config.serialize()
    if not req.solve:
        return ExampleResponse(
            name=req.name,
            config_text=config_text,
            summary="config only (solve skipped)",
        )
    solve = _run_solve(config, None)
    comparison = None
    summary = solve.summary
    if reference is not None:
        problem = build_problem(config)
        grid = problem.ctx.grid(problem.n)
        mesh = grid.meshgrid()
        ref_vals = np.broadcast_to(
            np.asarray(
                ex.evaluate(ex.parse(reference), coordinate_bindings(mesh, problem.ctx.dim)),
                float,
            ),
            grid.shape,
        )
        solved = np.loadtxt(
            solve.csv.splitlines(), delimiter=",", skiprows=1, usecols=problem.ctx.dim
        ).reshape(grid.shape)
        max_error = float(np.abs(solved - ref_vals).max())
        comparison = ComparisonModel(
            reference=reference,
            max_error=max_error,
            tolerance=tolerance,
            passed=max_error <= tolerance,
        )
        state = "within" if comparison.passed else "EXCEEDS"
        summary += (
            f"; max |u - ({reference})| = {max_error:.3e} {state} "
            f"tolerance {tolerance:g}"
        )
    return ExampleResponse(
        name=req.name,
        config_text=config_text,
        summary=summary,
        csv=solve.csv,
        comparison=comparison,
        solve=solve,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="volterra solver service", version=__version__)

    async def operational_error(request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    for err in OPERATIONAL_ERRORS:
        app.add_exception_handler(err, operational_error)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/expr/eval", response_model=ExprEvalResponse)
    def expr_eval(req: ExprEvalRequest) -> ExprEvalResponse:
        tree = ex.parse(req.expression)
        return ExprEvalResponse(value=float(ex.evaluate(tree, req.bindings)))

    @app.post("/check", response_model=CheckResponse)
    def check(req: CheckRequest) -> CheckResponse:
        problem = build_problem(parse_config(req.config_text))
        sections = _check_sections(problem, req)
        return CheckResponse(
            passed=all(s.passed for s in sections), sections=sections
        )

    @app.post("/weights", response_model=WeightsResponse)
    def weights(req: WeightsRequest) -> WeightsResponse:
        problem = build_problem(parse_config(req.config_text))
        schedule = build_schedule(problem, n_max=req.n_max)
        return WeightsResponse(
            csv=schedule.to_csv(),
            start=schedule.start,
            rows=_schedule_to_models(schedule),
        )

    @app.post("/solve", response_model=SolveResponse)
    def solve(req: SolveRequest) -> SolveResponse:
        config = _apply_overrides(parse_config(req.config_text), req.overrides)
        return _run_solve(config, req.schedule_csv)

    @app.post("/example", response_model=ExampleResponse)
    def example(req: ExampleRequest) -> ExampleResponse:
        return _run_example(req)

    return app


app = create_app()
