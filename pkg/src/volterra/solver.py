"""Fixed-point solver and the verification side: residuals, discrete
condensing checks and the positive-cone certificate.

The solve itself is plain Picard iteration for the selected single-valued
branch of the inclusion, run in the weighted norm from the schedule so the
iteration count tracks the certified contraction factor rather than the raw
sup norm.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .grids import GridFunction
from .operators import H_apply, h_apply_parts
from .problem import OuterForm, ProblemSpec, coordinate_bindings
from .weights import LengthMismatch, ScheduleRow, WeightSchedule, bielecki_norm

__all__ = [
    "NonContractive",
    "SolveReport",
    "initial_guess",
    "picard_solve",
    "residual",
    "FunctionFamily",
    "equicontinuity_modulus",
    "CondensingReport",
    "condensing_check",
    "Certificate",
    "condensing_certificate",
    "MncReport",
    "mnc_axiom_check",
]

TREND_WINDOW = 10


class NonContractive(Exception):
    """Picard increments stopped shrinking; the iteration is diverging."""


def initial_guess(problem: ProblemSpec, n: int | None = None) -> GridFunction:
    """Start the iteration from the outer map's zero-state image."""
    if n is None:
        n = problem.n
    grid = problem.ctx.grid(n)
    zero = GridFunction.zeros(grid, problem.m)
    bindings = coordinate_bindings(grid.meshgrid(), problem.ctx.dim)
    outer = problem.outer
    if problem.form is OuterForm.ADDITIVE:
        values = outer.eval(bindings, zero.values)
    elif problem.form is OuterForm.NESTED:
        values = outer.eval(bindings, zero.values, zero.values)
    else:
        lo, hi = outer.envelopes(bindings, zero.values)
        values = 0.5 * (lo + hi)
    return GridFunction(grid, values)


@dataclass(frozen=True)
class SolveReport:
    solution: GridFunction
    n: int
    strategy: str
    iterations: int
    converged: bool
    deltas: tuple[float, ...]
    contraction_ratio: float | None
    residual: float
    schedule_row: ScheduleRow

    def summary(self) -> str:
        state = "converged" if self.converged else "stopped at max_iter"
        ratio = (
            f"{self.contraction_ratio:.4f}"
            if self.contraction_ratio is not None
            else "n/a"
        )
        return (
            f"{state} in {self.iterations} iterations on member {self.n} "
            f"(weighted increment {self.deltas[-1]:.3e}, observed ratio {ratio}, "
            f"residual {self.residual:.3e})"
        )


def picard_solve(
    problem: ProblemSpec,
    schedule: WeightSchedule,
    tol_fix: float | None = None,
    max_iter: int | None = None,
) -> SolveReport:
    """Iterate u <- H(u) until the sup-norm increment drops below tol_fix.

    The weighted increments are tracked alongside as the contraction
    diagnostic, since that is the norm the schedule certifies: stopping on
    them directly would be scale-blind once exp(-L tau) gets small.  Raises
    NonContractive when the median weighted ratio over the trailing window
    reaches 1; returns with ``converged`` False when max_iter runs out first.
    """
    if tol_fix is None:
        tol_fix = problem.tol_fix
    if max_iter is None:
        max_iter = problem.max_iter
    n = problem.n
    row = schedule.row(n)
    ctx = problem.ctx
    u = initial_guess(problem)
    deltas: list[float] = []
    converged = False
    for _ in range(max_iter):
        v = H_apply(problem, u)
        step = GridFunction(u.grid, v.values - u.values)
        delta = bielecki_norm(step, row.L, ctx, n)
        deltas.append(delta)
        u = v
        if step.sup_norm() < tol_fix:
            converged = True
            break
        if len(deltas) > TREND_WINDOW:
            tail = deltas[-(TREND_WINDOW + 1) :]
            ratios = [
                tail[i + 1] / tail[i] for i in range(TREND_WINDOW) if tail[i] > 0.0
            ]
            if ratios and statistics.median(ratios) >= 1.0:
                raise NonContractive(
                    f"weighted increments plateaued near {delta:.3e} after "
                    f"{len(deltas)} iterations (median trailing ratio >= 1)"
                )
    ratios = [
        deltas[i + 1] / deltas[i] for i in range(len(deltas) - 1) if deltas[i] > 0.0
    ]
    ratio = statistics.median(ratios) if ratios else None
    return SolveReport(
        solution=u,
        n=n,
        strategy=problem.strategy,
        iterations=len(deltas),
        converged=converged,
        deltas=tuple(deltas),
        contraction_ratio=ratio,
        residual=residual(problem, u),
        schedule_row=row,
    )


def residual(problem: ProblemSpec, u: GridFunction, n: int | None = None) -> float:
    """Sup-norm distance from u to the image set H(u).

    Single-valued problems measure |u - H(u)| directly; otherwise the lower
    and upper selections bound an interval per component and the distance is
    taken to that box.
    """
    if n is None:
        n = problem.n
    single = problem.rhs.singleton and problem.form is not OuterForm.SET_VALUED
    if single:
        image = H_apply(problem, u, n)
        return float(
            np.sqrt(np.sum((u.values - image.values) ** 2, axis=-1)).max()
        )
    low = H_apply(problem, u, n, strategy="lower", outer_side="lower")
    high = H_apply(problem, u, n, strategy="upper", outer_side="upper")
    lo = np.minimum(low.values, high.values)
    hi = np.maximum(low.values, high.values)
    gap = np.maximum(np.maximum(lo - u.values, u.values - hi), 0.0)
    return float(np.sqrt(np.sum(gap**2, axis=-1)).max())


# --------------------------------------------------------------------------
# families and the condensing side


@dataclass(frozen=True)
class FunctionFamily:
    """Finite stand-in for a bounded set of grid functions."""

    members: tuple[GridFunction, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("family needs at least one member")
        first = self.members[0].grid
        for member in self.members[1:]:
            member.grid.matches(first)

    @property
    def grid(self):
        return self.members[0].grid

    def sup_norm(self) -> float:
        return max(member.sup_norm() for member in self.members)


def _member_modulus(values: np.ndarray) -> float:
    worst = 0.0
    for axis in range(values.ndim - 1):
        if values.shape[axis] < 2:
            continue
        diff = np.diff(values, axis=axis)
        worst = max(worst, float(np.sqrt(np.sum(diff**2, axis=-1)).max()))
    return worst


def equicontinuity_modulus(family: FunctionFamily) -> float:
    """Largest jump between grid-adjacent nodes across the family.

    This is the discrete surrogate for the equicontinuity measure: it
    vanishes as the mesh refines exactly when the family is equicontinuous.
    """
    return max(_member_modulus(member.values) for member in family.members)


@dataclass(frozen=True)
class CondensingReport:
    passed: bool
    modulus_in: float
    modulus_out: float
    bound: float
    phi_of_input: float
    outer_x_variation: float
    integral_modulus: float
    slack: float
    detail: str


def _outer_x_variation(problem: ProblemSpec, family: FunctionFamily, n: int) -> float:
    """max over members and grid-adjacent (x, z) of the outer map's pure
    x-variation |g(x, f(z)) - g(z, f(z))| (integral argument frozen too)."""
    ctx = problem.ctx
    grid = ctx.grid(n)
    mesh = grid.meshgrid()
    worst = 0.0
    for member in family.members:
        if problem.form is OuterForm.ADDITIVE:
            full = problem.outer.eval(
                coordinate_bindings(mesh, ctx.dim), member.values
            )

            def at_shifted(head, tail, axis):
                x_slice = [m[head] for m in mesh]
                vals = member.values[tail]
                return problem.outer.eval(
                    coordinate_bindings(x_slice, ctx.dim), vals
                ), full[tail]
        elif problem.form is OuterForm.NESTED:
            integral = h_apply_parts(problem, member, n)[1]
            full = problem.outer.eval(
                coordinate_bindings(mesh, ctx.dim), member.values, integral.values
            )

            def at_shifted(head, tail, axis):
                x_slice = [m[head] for m in mesh]
                return problem.outer.eval(
                    coordinate_bindings(x_slice, ctx.dim),
                    member.values[tail],
                    integral.values[tail],
                ), full[tail]
        else:
            integral = h_apply_parts(problem, member, n)[1]
            blo, bhi = problem.outer.envelopes(
                coordinate_bindings(mesh, ctx.dim), integral.values
            )
            full = 0.5 * (blo + bhi)

            def at_shifted(head, tail, axis):
                x_slice = [m[head] for m in mesh]
                lo, hi = problem.outer.envelopes(
                    coordinate_bindings(x_slice, ctx.dim), integral.values[tail]
                )
                return 0.5 * (lo + hi), full[tail]

        for axis in range(ctx.dim):
            if grid.shape[axis] < 2:
                continue
            head = tuple(
                slice(None, -1) if i == axis else slice(None) for i in range(ctx.dim)
            )
            tail = tuple(
                slice(1, None) if i == axis else slice(None) for i in range(ctx.dim)
            )
            shifted, reference = at_shifted(head, tail, axis)
            diff = np.sqrt(np.sum((shifted - reference) ** 2, axis=-1))
            worst = max(worst, float(diff.max()))
    return worst


def condensing_check(
    problem: ProblemSpec,
    schedule: WeightSchedule,
    family: FunctionFamily,
    n: int | None = None,
) -> CondensingReport:
    """Discrete condensing test: the image family's equicontinuity modulus
    must stay below phi(input modulus) plus honestly-measured slack.

    The slack collects exactly the two contributions the modulus bound does
    not cover: the outer map's pure x-variation across one grid step and the
    integral term's own modulus (which shrinks with the mesh since the
    integrand is bounded and the region moves continuously).  For the nested
    and set-valued forms the integral enters through its declared modulus.
    """
    if n is None:
        n = problem.n
    ctx = problem.ctx
    family.grid.matches(ctx.grid(n))
    e_in = equicontinuity_modulus(family)

    images = []
    integrals = []
    for member in family.members:
        _, integral, image = h_apply_parts(problem, member, n)
        images.append(image)
        integrals.append(integral)
    e_out = equicontinuity_modulus(FunctionFamily(members=tuple(images)))
    e_integral = equicontinuity_modulus(FunctionFamily(members=tuple(integrals)))

    phi_in = float(ex.evaluate(problem.outer.modulus, {"x": e_in}))
    gx = _outer_x_variation(problem, family, n)
    if problem.form is OuterForm.ADDITIVE:
        carried = e_integral
    elif problem.form is OuterForm.NESTED:
        carried = float(
            ex.evaluate(problem.outer.integral_modulus, {"x": e_integral})
        )
    else:
        carried = float(ex.evaluate(problem.outer.modulus, {"x": e_integral}))

    scale = 1.0 + abs(e_out) + family.sup_norm()
    slack = gx + carried + 1e-12 * scale
    bound = phi_in + slack
    passed = bool(e_out <= bound)
    detail = (
        f"modulus {e_in:.3e} -> {e_out:.3e} against phi {phi_in:.3e} "
        f"+ x-variation {gx:.3e} + integral part {carried:.3e}"
    )
    return CondensingReport(
        passed=passed,
        modulus_in=e_in,
        modulus_out=e_out,
        bound=bound,
        phi_of_input=phi_in,
        outer_x_variation=gx,
        integral_modulus=carried,
        slack=slack,
        detail=detail,
    )


@dataclass(frozen=True)
class Certificate:
    values: tuple[float, ...]
    certified: bool

    def summary(self) -> str:
        verdict = "certified" if self.certified else "not certified"
        return f"{verdict}; componentwise k y - x = {list(self.values)}"


def condensing_certificate(
    xs: "list[float] | tuple[float, ...]",
    ys: "list[float] | tuple[float, ...]",
    ks: "list[float] | tuple[float, ...]",
) -> Certificate:
    """Positive-cone certificate for componentwise condensing estimates.

    Given measured moduli x_n <= k_n y_n with rates k_n in (0, 1), the
    linear functional values k_n y_n - x_n must be nonnegative with at least
    one strictly positive entry; then no nonzero fixed vector of the
    componentwise estimate survives, which is the discrete form of the
    condensing property.
    """
    if not (len(xs) == len(ys) == len(ks)):
        raise LengthMismatch(
            f"certificate sequences disagree in length: {len(xs)}, {len(ys)}, {len(ks)}"
        )
    if len(xs) == 0:
        raise LengthMismatch("certificate sequences are empty")
    for k in ks:
        if not (0.0 < k < 1.0):
            raise ValueError(f"certificate rate {k!r} outside (0, 1)")
    values = tuple(float(k) * float(y) - float(x) for x, y, k in zip(xs, ys, ks))
    certified = all(v >= 0.0 for v in values) and any(v > 0.0 for v in values)
    return Certificate(values=values, certified=certified)


@dataclass(frozen=True)
class MncReport:
    passed: bool
    family_modulus: float
    union_modulus: float
    singleton_bound: float
    convexity_excess: float
    detail: str


def mnc_axiom_check(
    family: FunctionFamily,
    extra: GridFunction,
    lambdas: "tuple[float, ...]" = (0.25, 0.5, 0.75),
    tol: float = 1e-12,
) -> MncReport:
    """Check the measure axioms on the discrete equicontinuity modulus.

    Adjoining one function changes the measure by at most that function's
    own adjacent-node modulus (singleton invariance), and convex
    combinations of members never exceed the family measure (convexity).
    """
    extra.grid.matches(family.grid)
    e_fam = equicontinuity_modulus(family)
    e_single = _member_modulus(extra.values)
    union = FunctionFamily(members=family.members + (extra,))
    e_union = equicontinuity_modulus(union)
    singleton_ok = (
        e_union <= max(e_fam, e_single) + tol and e_union >= e_fam - tol
    )

    worst_excess = 0.0
    members = family.members
    for i in range(len(members)):
        for j in range(i + 1, len(members)):
            for lam in lambdas:
                mix = lam * members[i].values + (1.0 - lam) * members[j].values
                worst_excess = max(worst_excess, _member_modulus(mix) - e_fam)
    convex_ok = worst_excess <= tol
    passed = bool(singleton_ok and convex_ok)
    detail = (
        f"family modulus {e_fam:.3e}, with extra {e_union:.3e} "
        f"(singleton bound {max(e_fam, e_single):.3e}), convex excess "
        f"{worst_excess:.3e}"
    )
    return MncReport(
        passed=passed,
        family_modulus=e_fam,
        union_modulus=e_union,
        singleton_bound=max(e_fam, e_single),
        convexity_excess=worst_excess,
        detail=detail,
    )
