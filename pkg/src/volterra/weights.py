"""Exponential weight selection and the per-member solve schedule.

The contraction argument runs in weighted sup norms |u|_L =
sup_x exp(-L tau(x)) |u(x)|.  The quantity that has to be small is

    Phi(L, zeta)_n = sup_x exp(-L tau(x)) integral over region(x) of
                     exp(L tau(y)) zeta(y) dy

evaluated on exhaustion member n.  Phi decreases to zero as L grows
whenever tau is admissible for the moving region, so a doubling ladder
followed by bisection finds a usable L.

Quadrature note: the integrand exp(L (tau(y) - tau(x))) zeta(y) has
derivative of order L, and the plain node-spacing trapezoid rule
overestimates exp-type integrals by a factor approaching
(Lh/2) coth(Lh/2).  At the tolerances the schedule is asked to certify
this bias is visible, so each Phi evaluation refines the mesh per axis
proportionally to L times the observed slope of tau, capped to keep the
cost bounded.  The moving-region boundary still lands exactly on the
refined mesh via the fractional-cell weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from io import StringIO

import numpy as np

from . import expr as ex
from .domain import DomainContext, NegativeWeightFunction
from .grids import GridFunction, fractional_weights
from .operators import sup_kernel_norm
from .problem import OuterForm, ProblemSpec, coordinate_bindings

__all__ = [
    "WeightSelectionFailed",
    "LengthMismatch",
    "phi",
    "select_L",
    "bielecki_norm",
    "BrzegReport",
    "check_brzeg",
    "ScheduleRow",
    "WeightSchedule",
    "build_schedule",
    "psi",
    "LADDER_TOP",
]

LADDER_TOP = 2.0**20
EXP_CLIP = (-745.0, 709.0)  # stay inside double range on both sides
REFINE_TARGET = 0.25  # aim for L * slope * h_refined below this
REFINE_CAP = 64
REFINE_BUDGET = 4_000_000  # total refined mesh nodes


class WeightSelectionFailed(Exception):
    """No weight exponent on the ladder certifies the requested bound."""


class LengthMismatch(Exception):
    """Sequence arguments that must align do not."""


def _refine_factors(L: float, ctx: DomainContext, n: int) -> list[int]:
    slopes = ctx.tau_slopes(n)
    grid = ctx.grid(n)
    factors = []
    for i in range(ctx.dim):
        needed = math.ceil(L * slopes[i] * grid.steps[i] / REFINE_TARGET)
        factors.append(max(1, min(REFINE_CAP, needed)))
    # respect the global node budget, trimming the largest factors first
    def total(fs: list[int]) -> int:
        nodes = 1
        for i, f in enumerate(fs):
            nodes *= (grid.shape[i] - 1) * f + 1
        return nodes

    while total(factors) > REFINE_BUDGET and max(factors) > 1:
        factors[factors.index(max(factors))] -= 1
    return factors


def phi(L: float, zeta: ex.Expr, ctx: DomainContext, n: int) -> float:
    """The weighted integral functional Phi(L, zeta) on exhaustion member n.

    ``zeta`` is an expression in x and must be nonnegative on the member;
    negative values raise NegativeWeightFunction.
    """
    if L < 0.0:
        raise ValueError("weight exponent must be nonnegative")
    grid = ctx.grid(n)
    tau_nodes = ctx.tau_values(n)
    factors = _refine_factors(L, ctx, n)

    axes = []
    steps = []
    for i in range(ctx.dim):
        count = (grid.shape[i] - 1) * factors[i] + 1
        axes.append(np.linspace(grid.lower[i], grid.upper[i], count))
        steps.append(grid.steps[i] / factors[i])
    mesh = np.meshgrid(*axes, indexing="ij")
    bindings = coordinate_bindings(mesh, ctx.dim)
    tau_ref = np.asarray(ex.evaluate(ctx.tau.expression, bindings), float)
    tau_ref = np.broadcast_to(tau_ref, mesh[0].shape)
    zeta_ref = np.asarray(ex.evaluate(zeta, bindings), float)
    zeta_ref = np.broadcast_to(zeta_ref, mesh[0].shape)
    if float(zeta_ref.min()) < -1e-12:
        raise NegativeWeightFunction(
            f"weight function is negative on member {n}: min {zeta_ref.min():.3e}"
        )
    zeta_ref = np.clip(zeta_ref, 0.0, None)

    lo_all, hi_all = ctx.lambda_bounds(n)
    lo_flat = lo_all.reshape(-1, ctx.dim)
    hi_flat = hi_all.reshape(-1, ctx.dim)
    tau_flat = tau_nodes.reshape(-1)

    worst = 0.0
    for idx in range(lo_flat.shape[0]):
        lo = lo_flat[idx]
        hi = hi_flat[idx]
        if np.any(hi - lo <= 0.0):
            continue
        offsets = []
        weight_vectors = []
        degenerate = False
        for i in range(ctx.dim):
            j0, wv = fractional_weights(
                axes[i][0], steps[i], len(axes[i]), lo[i], hi[i]
            )
            if wv.size == 0:
                degenerate = True
                break
            offsets.append(j0)
            weight_vectors.append(wv)
        if degenerate:
            continue
        slices = tuple(
            slice(offsets[i], offsets[i] + len(weight_vectors[i]))
            for i in range(ctx.dim)
        )
        shift = L * (tau_ref[slices] - tau_flat[idx])
        integrand = np.exp(np.clip(shift, *EXP_CLIP)) * zeta_ref[slices]
        value = integrand
        for wv in reversed(weight_vectors):
            value = np.tensordot(value, wv, axes=([value.ndim - 1], [0]))
        worst = max(worst, float(value))
    return worst


def select_L(
    target: float,
    zeta: ex.Expr,
    ctx: DomainContext,
    n: int,
    ladder_start: float = 1.0,
    bisection_steps: int = 20,
) -> tuple[float, float]:
    """Smallest usable weight exponent with Phi(L, zeta)_n <= target.

    Doubles from ``ladder_start`` until the bound holds, then bisects the
    bracketing interval.  Returns (L, Phi value at L).  Raises
    WeightSelectionFailed when the top of the ladder still misses the target.
    """
    if not math.isfinite(target) or target <= 0.0:
        raise WeightSelectionFailed(f"requested bound {target!r} is not positive")
    L = max(1.0, ladder_start)
    value = phi(L, zeta, ctx, n)
    if value <= target:
        return L, value
    lo = L
    while L < LADDER_TOP:
        L = min(2.0 * L, LADDER_TOP)
        value = phi(L, zeta, ctx, n)
        if value <= target:
            break
        lo = L
    else:
        raise WeightSelectionFailed(
            f"Phi stays above {target:.3e} up to L = {LADDER_TOP:.0f} on member "
            f"{n} (last value {value:.3e}); the region/weight pair does not "
            "admit the contraction"
        )
    hi, hi_value = L, value
    for _ in range(bisection_steps):
        mid = 0.5 * (lo + hi)
        mid_value = phi(mid, zeta, ctx, n)
        if mid_value <= target:
            hi, hi_value = mid, mid_value
        else:
            lo = mid
    return hi, hi_value


def bielecki_norm(u: GridFunction, L: float, ctx: DomainContext, n: int) -> float:
    """Weighted sup norm: max over nodes of exp(-L tau(x)) |u(x)|."""
    grid = ctx.grid(n)
    u.grid.matches(grid)
    damp = np.exp(np.clip(-L * ctx.tau_values(n), *EXP_CLIP))
    return float((damp * u.point_norms()).max())


# --------------------------------------------------------------------------
# margin sequence and schedule


@dataclass(frozen=True)
class BrzegReport:
    """Sign/monotonicity screen of the margin sequence d_n = a_n - phi(a_n) - g0_n."""

    passed: bool
    margins: tuple[float, ...]
    window_start: int
    monotone: bool
    trend_slope: float
    detail: str


def check_brzeg(
    g_norms: "list[float] | tuple[float, ...]",
    modulus: ex.Expr,
    a: "list[float] | tuple[float, ...]",
    n_max: int,
) -> BrzegReport:
    """Check that the margins d_n stay positive for large n.

    The tail window [ceil(n_max/2), n_max] must be positive throughout and
    either nondecreasing or trending upward strongly enough that the fitted
    line stays positive out to 4 n_max.
    """
    if len(g_norms) != n_max or len(a) != n_max:
        raise LengthMismatch(
            f"expected {n_max} norms and targets, got {len(g_norms)} and {len(a)}"
        )
    a_arr = np.asarray(a, dtype=float)
    phi_a = np.broadcast_to(
        np.asarray(ex.evaluate(modulus, {"x": a_arr}), float), a_arr.shape
    )
    margins = a_arr - phi_a - np.asarray(g_norms, dtype=float)

    window_start = math.ceil(n_max / 2)
    window = margins[window_start - 1 :]
    positive = bool(window.min() > 0.0)
    diffs = np.diff(window)
    monotone = bool(diffs.size == 0 or diffs.min() >= -1e-12)
    ns = np.arange(window_start, n_max + 1, dtype=float)
    if ns.size >= 2:
        slope, intercept = np.polyfit(ns, window, 1)
    else:
        slope, intercept = 0.0, float(window[0])
    extrapolated = slope * (4.0 * n_max) + intercept
    trend_ok = bool(extrapolated > 0.0 and window.min() > 0.0)
    passed = positive and (monotone or trend_ok)
    if not positive:
        detail = f"margin dips to {window.min():.3e} in the tail window"
    elif monotone:
        detail = "tail margins positive and nondecreasing"
    elif trend_ok:
        detail = (
            f"tail margins positive; fitted trend stays positive through "
            f"n = {4 * n_max}"
        )
    else:
        detail = f"tail margins decay (extrapolated {extrapolated:.3e} at n = {4 * n_max})"
    return BrzegReport(
        passed=passed,
        margins=tuple(float(d) for d in margins),
        window_start=window_start,
        monotone=monotone,
        trend_slope=float(slope),
        detail=detail,
    )


@dataclass(frozen=True)
class ScheduleRow:
    n: int
    L: float
    L_hat: float
    a: float
    k: float
    r: float
    sup_tau: float = float("nan")
    sup_kernel: float = float("nan")
    phi_growth: float = float("nan")
    phi_fiber: float = float("nan")
    modulus_slope: float = float("nan")


_CSV_COLUMNS = ("n", "L", "Lhat", "a", "k", "r", "phi_b", "phi_eta")


@dataclass(frozen=True)
class WeightSchedule:
    rows: tuple[ScheduleRow, ...]

    @property
    def start(self) -> int:
        return self.rows[0].n

    def row(self, n: int) -> ScheduleRow:
        for row in self.rows:
            if row.n == n:
                return row
        raise KeyError(f"schedule has no row for member {n}")

    def to_csv(self) -> str:
        out = StringIO()
        out.write(",".join(_CSV_COLUMNS) + "\n")
        for row in self.rows:
            out.write(
                "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n"
                % (
                    row.n,
                    row.L,
                    row.L_hat,
                    row.a,
                    row.k,
                    row.r,
                    row.phi_growth,
                    row.phi_fiber,
                )
            )
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "WeightSchedule":
        lines = [line for line in text.splitlines() if line.strip()]
        header = lines[0].split(",")
        if tuple(h.strip() for h in header) != _CSV_COLUMNS:
            raise ValueError(f"unexpected schedule header {lines[0]!r}")
        rows = []
        for line in lines[1:]:
            parts = line.split(",")
            rows.append(
                ScheduleRow(
                    n=int(parts[0]),
                    L=float(parts[1]),
                    L_hat=float(parts[2]),
                    a=float(parts[3]),
                    k=float(parts[4]),
                    r=float(parts[5]),
                    phi_growth=float(parts[6]),
                    phi_fiber=float(parts[7]),
                )
            )
        return cls(rows=tuple(rows))


def _resolve_targets(problem: ProblemSpec, n_max: int) -> list[float]:
    """Per-member sup-norm targets a_n from the configured rule."""
    rule, payload = problem.a_rule
    if rule == "list":
        values = [float(v) for v in payload]
        if len(values) < n_max:
            raise LengthMismatch(
                f"a-rule list has {len(values)} entries, schedule needs {n_max}"
            )
        return values[:n_max]
    if rule == "linear":
        c = float(payload)
        if c <= 0.0:
            raise WeightSelectionFailed("linear a-rule needs a positive slope")
        return [c * i for i in range(1, n_max + 1)]
    if rule == "auto":
        # pick the smallest linear ramp that dominates the outer map's
        # zero-state norms with a factor-2 margin, after discounting the
        # modulus slope
        if problem.form is OuterForm.SET_VALUED:
            lam_hat = 0.0
        else:
            lam_hat = min(problem.modulus_slope(100.0), 1.0 - 1e-9)
        g0 = [
            problem.outer.zero_state_norm(problem.ctx, i) for i in range(1, n_max + 1)
        ]
        c = 1.0
        for i, g in enumerate(g0, start=1):
            c = max(c, 2.0 * g / ((1.0 - lam_hat) * i))
        return [c * i for i in range(1, n_max + 1)]
    raise ValueError(f"unknown a-rule '{rule}'")


def build_schedule(
    problem: ProblemSpec,
    n_max: int | None = None,
    a: "list[float] | None" = None,
    k_seed: float = 0.5,
) -> WeightSchedule:
    """Weight schedule rows for members N..n_max.

    N is the first index whose margin d_n = a_n - phi(a_n) - g0_n (the
    phi term drops for the set-valued form) is positive from there on.  Per
    member the row carries

    * L: smallest ladder exponent with sup_K Phi(L, b)_n (1 + a_n) <= d_n,
      so the solve's invariance estimate closes,
    * L_hat, k: the condensing pair; L_hat pushes 4 sup_K Phi(L_hat, eta)_n
      below half the admissible cap and k sits at the midpoint between that
      value and the cap (1 - lambda_n for single-valued outer forms with
      modulus slope lambda_n on (0, r_n], plain 1 for the set-valued form),
    * r: the weighted-ball radius exp(L sup tau) a_n.

    Exponents are reused as ladder floors for the next member, which keeps
    the columns monotone in n.
    """
    if n_max is None:
        n_max = problem.n
    ctx = problem.ctx
    targets = _resolve_targets(problem, n_max) if a is None else [float(v) for v in a]
    if len(targets) < n_max:
        raise LengthMismatch(f"need {n_max} targets, got {len(targets)}")
    targets = targets[:n_max]

    set_valued = problem.form is OuterForm.SET_VALUED
    g0 = [problem.outer.zero_state_norm(ctx, i) for i in range(1, n_max + 1)]
    if set_valued:
        margins = [targets[i] - g0[i] for i in range(n_max)]
    else:
        phi_at = [float(ex.evaluate(problem.outer.modulus, {"x": t})) for t in targets]
        margins = [targets[i] - phi_at[i] - g0[i] for i in range(n_max)]

    start = None
    for i in range(n_max):
        if all(m > 0.0 for m in margins[i:]):
            start = i + 1
            break
    if start is None:
        raise WeightSelectionFailed(
            "no exhaustion member has positive margins through n_max = "
            f"{n_max}; margins {['%.3e' % m for m in margins]}"
        )

    rows: list[ScheduleRow] = []
    prev_L = 1.0
    prev_L_hat = 1.0
    for n in range(start, n_max + 1):
        a_n = targets[n - 1]
        d_n = margins[n - 1]
        sup_tau = ctx.sup_tau(n)
        sup_K = sup_kernel_norm(problem.kernel, ctx, n)

        if sup_K > 0.0:
            L_n, phi_b = select_L(
                d_n / (sup_K * (1.0 + a_n)),
                problem.rhs.growth,
                ctx,
                n,
                ladder_start=prev_L,
            )
        else:
            L_n = prev_L
            phi_b = phi(L_n, problem.rhs.growth, ctx, n)

        r_n = math.exp(min(L_n * sup_tau, EXP_CLIP[1])) * a_n
        if set_valued:
            lam_n = 0.0
            cap = 1.0
        else:
            lam_n = problem.modulus_slope(r_n)
            if lam_n >= 1.0 - 1e-9:
                raise WeightSelectionFailed(
                    f"modulus slope {lam_n:.6f} on (0, {r_n:.3e}] leaves no "
                    f"contraction cap on member {n}"
                )
            cap = 1.0 - lam_n

        if sup_K > 0.0:
            L_hat, phi_eta = select_L(
                k_seed * cap / (4.0 * sup_K),
                problem.rhs.fiber,
                ctx,
                n,
                ladder_start=prev_L_hat,
            )
            k_n = 0.5 * (4.0 * sup_K * phi_eta + cap)
        else:
            L_hat = prev_L_hat
            phi_eta = phi(L_hat, problem.rhs.fiber, ctx, n)
            k_n = 0.5 * cap

        rows.append(
            ScheduleRow(
                n=n,
                L=L_n,
                L_hat=L_hat,
                a=a_n,
                k=k_n,
                r=r_n,
                sup_tau=sup_tau,
                sup_kernel=sup_K,
                phi_growth=phi_b,
                phi_fiber=phi_eta,
                modulus_slope=lam_n,
            )
        )
        prev_L = L_n
        prev_L_hat = L_hat
    return WeightSchedule(rows=tuple(rows))


def psi(row: ScheduleRow, modulus: ex.Expr, x: "float | np.ndarray"):
    """The comparison function psi_n(x) = phi(x) + k_n x.

    The schedule is sound when psi_n(x) < x on (0, r_n]; tests probe this
    on log-spaced samples.
    """
    return ex.evaluate(modulus, {"x": x}) + row.k * np.asarray(x, dtype=float)
