"""Discrete operators: kernel norms, the moving-region integral operator,
Nemytskii selections and the fixed-point map, plus a sampling-based
hypothesis checker.

All grid functions live on the exhaustion-member grids from
:class:`~volterra.domain.DomainContext`; integrals over the moving region use
the exact piecewise-linear treatment of fractional boundary cells from
:mod:`volterra.grids`.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .domain import DomainContext
from .grids import GridFunction, box_node_weights, contract_weights, cumulative_trapezoid
from .problem import (
    Kernel,
    MultiMap,
    NestedOuter,
    OuterForm,
    ProblemSpec,
    SetValuedOuter,
    coordinate_bindings,
    state_bindings,
)

__all__ = [
    "InvalidMultimap",
    "sup_kernel_norm",
    "volterra_apply",
    "volterra_apply_grid",
    "nemytskii_select",
    "h_apply_parts",
    "H_apply",
    "HypothesisItem",
    "HypothesisReport",
    "check_hypotheses",
]

ORDER_TOL = 1e-9


class InvalidMultimap(Exception):
    """Envelope ordering violated (lower > upper) at some evaluation point."""


def _thread_count() -> int:
    raw = os.environ.get("VOLTERRA_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _covering_slices(grid, lo: np.ndarray, hi: np.ndarray) -> tuple[slice, ...] | None:
    """Smallest node-index box covering [lo, hi]; None when degenerate."""
    if np.any(hi <= lo):
        return None
    slices = []
    for i in range(grid.dim):
        step = grid.steps[i]
        j0 = int(np.floor((lo[i] - grid.lower[i]) / step + 1e-12))
        j1 = int(np.ceil((hi[i] - grid.lower[i]) / step - 1e-12))
        j0 = max(0, min(j0, grid.shape[i] - 1))
        j1 = max(j0 + 1, min(j1 + 1, grid.shape[i]))
        slices.append(slice(j0, j1))
    return tuple(slices)


def _matrix_sup_norm(entries: np.ndarray) -> float:
    """Largest spectral norm over a stack of m-by-m matrices.

    Scalar kernels reduce to a plain abs max; for m > 1 a few batched power
    iteration steps on K^T K give the top singular value to far better
    accuracy than the schedule needs.
    """
    m = entries.shape[-1]
    if m == 1:
        return float(np.abs(entries).max())
    mats = entries.reshape(-1, m, m)
    gram = np.einsum("nki,nkj->nij", mats, mats)
    v = np.ones((mats.shape[0], m)) / math.sqrt(m)
    for _ in range(50):
        w = np.einsum("nij,nj->ni", gram, v)
        norms = np.linalg.norm(w, axis=1)
        norms[norms == 0.0] = 1.0
        v = w / norms[:, None]
    top = np.einsum("ni,nij,nj->n", v, gram, v)
    return float(np.sqrt(np.clip(top, 0.0, None)).max())


def sup_kernel_norm(kernel: Kernel, ctx: DomainContext, n: int) -> float:
    """sup over grid nodes x of the operator norm sup_{y in region(x)} |k(x, y)|.

    Cached per (context, member) on the kernel instance.
    """
    key = (id(ctx), n)
    cached = kernel._norm_cache.get(key)
    if cached is not None:
        return cached
    if kernel.is_constant():
        value = _matrix_sup_norm(kernel.constant_matrix()[None, ...])
        kernel._norm_cache[key] = value
        return value

    grid = ctx.grid(n)
    lo_all, hi_all = ctx.lambda_bounds(n)
    points = grid.points()
    lo_flat = lo_all.reshape(-1, ctx.dim)
    hi_flat = hi_all.reshape(-1, ctx.dim)
    worst = 0.0
    for idx in range(points.shape[0]):
        slices = _covering_slices(grid, lo_flat[idx], hi_flat[idx])
        if slices is None:
            continue
        bindings = coordinate_bindings(points[idx], ctx.dim)
        sub_axes = [grid.axis(i)[slices[i]] for i in range(ctx.dim)]
        shape = tuple(len(a) for a in sub_axes)
        for i, axis in enumerate(sub_axes):
            rs = [1] * ctx.dim
            rs[i] = len(axis)
            bindings[f"y{i + 1}"] = axis.reshape(rs)
        if ctx.dim == 1:
            bindings["s"] = bindings["y1"]
        worst = max(worst, _matrix_sup_norm(kernel.eval_entries(bindings, shape)))
    kernel._norm_cache[key] = worst
    return worst


def _point_integral(
    kernel: Kernel,
    grid,
    dim: int,
    values: np.ndarray,
    x: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
) -> np.ndarray:
    """integral over [lo, hi] of k(x, y) w(y) dy for one node x."""
    m = kernel.m
    parts = box_node_weights(grid, lo, hi)
    if parts is None:
        return np.zeros(m)
    offsets, weight_vectors = parts
    slices = tuple(
        slice(offsets[i], offsets[i] + len(weight_vectors[i])) for i in range(dim)
    )
    sub = values[slices]
    if kernel.is_constant():
        mat = kernel.constant_matrix()
        integrated = contract_weights(sub, weight_vectors)
        return mat @ integrated
    bindings = coordinate_bindings(x, dim)
    for i in range(dim):
        axis = grid.axis(i)[slices[i]]
        rs = [1] * dim
        rs[i] = len(axis)
        bindings[f"y{i + 1}"] = axis.reshape(rs)
    if dim == 1:
        bindings["s"] = bindings["y1"]
    kvals = kernel.eval_entries(bindings, sub.shape[:-1])
    integrand = np.einsum("...ij,...j->...i", kvals, sub)
    return contract_weights(integrand, weight_vectors)


def volterra_apply(
    kernel: Kernel, ctx: DomainContext, n: int, w: GridFunction, x
) -> np.ndarray:
    """Integral of k(x, y) w(y) over the moving region at a single point."""
    grid = ctx.grid(n)
    w.grid.matches(grid)
    x = np.asarray(x, dtype=float).reshape(ctx.dim)
    box = ctx.region.box_at(x)
    if box is None:
        return np.zeros(kernel.m)
    lo, hi = box
    return _point_integral(kernel, grid, ctx.dim, w.values, x, lo, hi)


def _fast_path_applies(kernel: Kernel, ctx: DomainContext, grid) -> bool:
    """Constant kernel with region = [grid origin, x] supports a cumulative
    trapezoid sweep over the whole grid at once."""
    if not kernel.is_constant():
        return False
    for i in range(ctx.dim):
        low = ctx.region.lower[i]
        if not (isinstance(low, ex.Num) and low.value <= grid.lower[i] + 1e-12):
            return False
        up = ctx.region.upper[i]
        names = {f"x{i + 1}"} | ({"t"} if ctx.dim == 1 else set())
        if not (isinstance(up, ex.Var) and up.name in names):
            return False
    return True


def volterra_apply_grid(
    kernel: Kernel, ctx: DomainContext, n: int, w: GridFunction
) -> GridFunction:
    """Integral operator evaluated at every grid node.

    Constant kernels over the cumulative region [origin, x] collapse to one
    cumulative trapezoid sweep; otherwise each node integrates its own
    clipped box (optionally across VOLTERRA_THREADS worker threads).
    """
    grid = ctx.grid(n)
    w.grid.matches(grid)
    if _fast_path_applies(kernel, ctx, grid):
        swept = cumulative_trapezoid(w.values, grid.steps, axes=tuple(range(ctx.dim)))
        mat = kernel.constant_matrix()
        return GridFunction(grid, np.einsum("ij,...j->...i", mat, swept))

    lo_all, hi_all = ctx.lambda_bounds(n)
    lo_flat = lo_all.reshape(-1, ctx.dim)
    hi_flat = hi_all.reshape(-1, ctx.dim)
    points = grid.points()
    count = points.shape[0]
    out = np.zeros((count, kernel.m))

    def run(start: int, stop: int) -> None:
        for idx in range(start, stop):
            out[idx] = _point_integral(
                kernel, grid, ctx.dim, w.values, points[idx], lo_flat[idx], hi_flat[idx]
            )

    workers = min(_thread_count(), count)
    if workers > 1:
        bounds = np.linspace(0, count, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(run, bounds[i], bounds[i + 1]) for i in range(workers)
            ]
            for fut in futures:
                fut.result()
    else:
        run(0, count)
    return GridFunction(grid, out.reshape(grid.shape + (kernel.m,)))


def nemytskii_select(
    rhs: MultiMap,
    ctx: DomainContext,
    n: int,
    u: GridFunction,
    strategy: str = "midpoint",
) -> GridFunction:
    """Pointwise selection from the envelope box of the right-hand side."""
    grid = ctx.grid(n)
    u.grid.matches(grid)
    bindings = coordinate_bindings(grid.meshgrid(), ctx.dim)
    lo, hi = rhs.envelopes(bindings, u.values)
    _require_ordered(lo, hi, grid, "right-hand side")
    if strategy == "midpoint":
        vals = 0.5 * (lo + hi)
    elif strategy == "lower":
        vals = lo
    elif strategy == "upper":
        vals = hi
    else:
        raise ValueError(f"unknown selection strategy '{strategy}'")
    return GridFunction(grid, vals)


def _require_ordered(lo: np.ndarray, hi: np.ndarray, grid, what: str) -> None:
    gap = lo - hi
    worst = float(gap.max())
    if worst > ORDER_TOL:
        flat = np.argmax(gap.reshape(-1, gap.shape[-1]).max(axis=1))
        node = grid.points()[flat]
        raise InvalidMultimap(
            f"{what} envelopes cross at x={tuple(float(c) for c in node)}: "
            f"lower exceeds upper by {worst:.3e}"
        )


def h_apply_parts(
    problem: ProblemSpec,
    u: GridFunction,
    n: int | None = None,
    strategy: str | None = None,
    outer_side: str | None = None,
) -> tuple[GridFunction, GridFunction, GridFunction]:
    """One fixed-point sweep, returning (selection w, integral Vw, output).

    ``outer_side`` picks the envelope of a set-valued outer map: "steiner"
    (interval midpoint), "lower" or "upper".  When omitted it follows the
    selection strategy, so one knob steers both the right-hand side and the
    outer map.  Single-valued outer maps ignore it.
    """
    if n is None:
        n = problem.n
    if strategy is None:
        strategy = problem.strategy
    if outer_side is None:
        outer_side = "steiner" if strategy == "midpoint" else strategy
    ctx = problem.ctx
    grid = ctx.grid(n)
    u.grid.matches(grid)
    w = nemytskii_select(problem.rhs, ctx, n, u, strategy)
    integral = volterra_apply_grid(problem.kernel, ctx, n, w)
    bindings = coordinate_bindings(grid.meshgrid(), ctx.dim)

    outer = problem.outer
    if problem.form is OuterForm.ADDITIVE:
        values = outer.eval(bindings, u.values) + integral.values
    elif problem.form is OuterForm.NESTED:
        values = outer.eval(bindings, u.values, integral.values)
    else:
        lo, hi = outer.envelopes(bindings, integral.values)
        _require_ordered(lo, hi, grid, "outer map")
        if outer_side == "steiner":
            values = 0.5 * (lo + hi)
        elif outer_side == "lower":
            values = lo
        elif outer_side == "upper":
            values = hi
        else:
            raise ValueError(f"unknown outer side '{outer_side}'")
    return w, integral, GridFunction(grid, values)


def H_apply(
    problem: ProblemSpec,
    u: GridFunction,
    n: int | None = None,
    strategy: str | None = None,
    outer_side: str | None = None,
) -> GridFunction:
    """The fixed-point map: outer part plus integral of the selection."""
    return h_apply_parts(problem, u, n, strategy, outer_side)[2]


# --------------------------------------------------------------------------
# hypothesis checking


@dataclass(frozen=True)
class HypothesisItem:
    check: str
    location: tuple
    magnitude: float
    message: str


@dataclass(frozen=True)
class HypothesisReport:
    passed: bool
    items: tuple[HypothesisItem, ...]
    samples: int
    counts: dict = field(default_factory=dict)

    def summary(self) -> str:
        if self.passed:
            return f"all hypothesis checks passed ({self.samples} samples)"
        parts = ", ".join(f"{k}: {v}" for k, v in sorted(self.counts.items()))
        return f"hypothesis violations ({parts})"


def _sample_points(ctx: DomainContext, n: int, rng, count: int) -> np.ndarray:
    box = ctx.exhaustion.box(n)
    lo = np.asarray(box.lower)
    hi = np.asarray(box.upper)
    return lo + (hi - lo) * rng.random((count, ctx.dim))


def check_hypotheses(
    problem: ProblemSpec,
    n: int | None = None,
    samples: int = 200,
    seed: int = 0,
    state_scale: float = 10.0,
) -> HypothesisReport:
    """Sampling check of the structural hypotheses on one exhaustion member.

    Verified items: envelope ordering, the growth bound
    |F(x, u)| <= b(x)(1 + |u|), nonnegativity of the b and eta weights, the
    modulus bound on the outer map's value variation, and a two-scale
    continuity probe of the kernel in x.  Violations are collected, never
    raised; a clean report has ``passed`` True.
    """
    if n is None:
        n = problem.n
    ctx = problem.ctx
    m = problem.m
    rng = np.random.default_rng(seed)
    items: list[HypothesisItem] = []

    xs = _sample_points(ctx, n, rng, samples)
    us = state_scale * (2.0 * rng.random((samples, m)) - 1.0)
    vs = state_scale * (2.0 * rng.random((samples, m)) - 1.0)
    xb = coordinate_bindings([xs[:, i] for i in range(ctx.dim)], ctx.dim)

    def record(check: str, mask: np.ndarray, magnitudes: np.ndarray, message: str) -> None:
        for idx in np.nonzero(mask)[0][:5]:
            items.append(
                HypothesisItem(
                    check=check,
                    location=tuple(float(c) for c in xs[idx]),
                    magnitude=float(magnitudes[idx]),
                    message=message,
                )
            )

    # envelope ordering and growth
    lo, hi = problem.rhs.envelopes(xb, us)
    gap = (lo - hi).max(axis=-1)
    record("envelope-order", gap > ORDER_TOL, gap, "lower envelope exceeds upper")

    b_vals = np.broadcast_to(
        np.asarray(ex.evaluate(problem.rhs.growth, xb), float), (samples,)
    )
    eta_vals = np.broadcast_to(
        np.asarray(ex.evaluate(problem.rhs.fiber, xb), float), (samples,)
    )
    record("weight-sign", b_vals < -ORDER_TOL, -b_vals, "growth weight b is negative")
    record("weight-sign", eta_vals < -ORDER_TOL, -eta_vals, "fiber weight eta is negative")

    fmag = np.sqrt(np.sum(np.maximum(np.abs(lo), np.abs(hi)) ** 2, axis=-1))
    allowance = b_vals * (1.0 + np.sqrt(np.sum(us**2, axis=-1)))
    excess = fmag - allowance
    record(
        "growth-bound",
        excess > ORDER_TOL * (1.0 + allowance),
        excess,
        "right-hand side exceeds b(x)(1 + |u|)",
    )

    # outer modulus
    outer = problem.outer
    du = np.sqrt(np.sum((us - vs) ** 2, axis=-1))
    phi_du = np.broadcast_to(
        np.asarray(ex.evaluate(outer.modulus, {"x": du}), float), (samples,)
    )
    if problem.form is OuterForm.ADDITIVE:
        g_u = outer.eval(xb, us)
        g_v = outer.eval(xb, vs)
        diff = np.sqrt(np.sum((g_u - g_v) ** 2, axis=-1))
        excess = diff - phi_du
        record(
            "outer-modulus",
            excess > ORDER_TOL * (1.0 + phi_du),
            excess,
            "outer map variation exceeds phi(|u - v|)",
        )
    elif problem.form is OuterForm.NESTED:
        ws = state_scale * (2.0 * rng.random((samples, 1)) - 1.0)
        zs = state_scale * (2.0 * rng.random((samples, 1)) - 1.0)
        g_u = outer.eval(xb, us, ws)
        g_v = outer.eval(xb, vs, zs)
        dw = np.abs(ws - zs)[:, 0]
        theta_dw = np.broadcast_to(
            np.asarray(ex.evaluate(outer.integral_modulus, {"x": dw}), float),
            (samples,),
        )
        diff = np.abs(g_u - g_v)[:, 0]
        excess = diff - (phi_du + theta_dw)
        record(
            "outer-modulus",
            excess > ORDER_TOL * (1.0 + phi_du + theta_dw),
            excess,
            "outer map variation exceeds phi(|u1 - v1|) + vartheta(|u2 - v2|)",
        )
    else:
        ws = us
        zs = vs
        glo_u, ghi_u = outer.envelopes(xb, ws)
        glo_v, ghi_v = outer.envelopes(xb, zs)
        gap_u = (glo_u - ghi_u)[:, 0]
        record("envelope-order", gap_u > ORDER_TOL, gap_u, "outer envelopes cross")
        # Hausdorff distance between intervals from endpoint distances
        dist = np.maximum(np.abs(glo_u - glo_v), np.abs(ghi_u - ghi_v))[:, 0]
        excess = dist - phi_du
        record(
            "outer-modulus",
            excess > ORDER_TOL * (1.0 + phi_du),
            excess,
            "outer interval variation exceeds phi(|w - z|)",
        )

    # kernel two-scale continuity in x: shrinking the x-perturbation by 8
    # must shrink the kernel variation markedly (continuous kernels do;
    # jumps plateau and get flagged).
    if not problem.kernel.is_constant():
        ys = _sample_points(ctx, n, rng, samples)
        box = ctx.exhaustion.box(n)
        span = min(
            (u - l)
            for l, u in zip(box.lower, box.upper)
        )
        delta = min(max(ctx.h, 1e-6), 0.125 * span)
        dirs = rng.standard_normal((samples, ctx.dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        lo_b = np.asarray(box.lower)
        hi_b = np.asarray(box.upper)

        def kernel_at(points: np.ndarray) -> np.ndarray:
            bind = coordinate_bindings([points[:, i] for i in range(ctx.dim)], ctx.dim)
            for i in range(ctx.dim):
                bind[f"y{i + 1}"] = ys[:, i]
            if ctx.dim == 1:
                bind["s"] = bind["y1"]
            return problem.kernel.eval_entries(bind, (samples,))

        # clip perturbed points into the member so expressions stay in range
        base = kernel_at(xs)
        far = kernel_at(np.clip(xs + delta * dirs, lo_b, hi_b))
        near = kernel_at(np.clip(xs + (delta / 8.0) * dirs, lo_b, hi_b))
        d_far = np.abs(far - base).reshape(samples, -1).max(axis=1)
        d_near = np.abs(near - base).reshape(samples, -1).max(axis=1)
        scale = np.abs(base).reshape(samples, -1).max(axis=1)
        excess = d_near - (0.6 * d_far + ORDER_TOL * (1.0 + scale))
        record(
            "kernel-continuity",
            excess > 0.0,
            excess,
            "kernel variation does not shrink with the x-perturbation",
        )

    counts: dict[str, int] = {}
    for item in items:
        counts[item.check] = counts.get(item.check, 0) + 1
    return HypothesisReport(
        passed=not items, items=tuple(items), samples=samples, counts=counts
    )
