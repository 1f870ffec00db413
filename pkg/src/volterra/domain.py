"""Open box domains, moving integration regions, exhaustions and weight maps.

The solver works on an open axis-aligned box ``Omega`` (sides may be
infinite).  The moving region attaches to every point ``x`` a coordinate box
whose per-dimension bounds are expressions in ``x``, always clipped back to
``Omega``.  An exhaustion produces bounded open boxes that grow onto
``Omega``; two rules are supported:

``anchored``
    finite sides are kept (so regions anchored at a finite boundary, such as
    ``(a, x)`` on ``(a, inf)``, stay inside every member), infinite sides are
    replaced by ``ref -/+ n`` where ``ref`` is the opposite finite side or 0.

``standard``
    finite sides are pulled in by ``1/n`` and everything is clipped to
    ``[-n, n]`` per coordinate (the sup-norm ball standing in for the
    Euclidean one so members remain boxes).

``DomainContext`` bundles the pieces with a grid step and caches per-index
grids and weight-map samples; it is the ``ctx`` argument the weight and
operator layers take.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import expr as ex
from .grids import GEOM_TOL, Grid

__all__ = [
    "InvalidSet",
    "NegativeWeightFunction",
    "OpenBox",
    "MovingRegion",
    "TauMap",
    "Exhaustion",
    "DomainContext",
    "region_measure",
    "rho",
    "check_lambda_invariance",
    "check_tau_admissible",
    "InvarianceReport",
    "AdmissibilityReport",
]

STRICT_TOL = 1e-12


class InvalidSet(Exception):
    """Geometry that does not describe a usable set (empty box, bad bounds)."""


class NegativeWeightFunction(Exception):
    """A weight function (tau, b, eta, zeta) took a forbidden sign."""


def _axis_names(dim: int) -> list[str]:
    return [f"x{i + 1}" for i in range(dim)]


def point_bindings(x: Sequence[float] | np.ndarray, dim: int) -> dict[str, ex.Value]:
    """Variable bindings for x-expressions; ``t`` aliases ``x1`` when dim==1.

    ``x`` may be a single point or per-coordinate arrays (vectorized eval).
    """
    if isinstance(x, np.ndarray) and x.ndim == 1 and x.shape[0] == dim:
        coords = [float(v) for v in x]
    elif isinstance(x, (list, tuple)):
        coords = list(x)
    else:
        coords = [x]  # pragma: no cover - scalar convenience
    bindings: dict[str, ex.Value] = {}
    for name, value in zip(_axis_names(dim), coords):
        bindings[name] = value
    if dim == 1:
        bindings["t"] = bindings["x1"]
    return bindings


@dataclass(frozen=True)
class OpenBox:
    """Axis-aligned open box; sides may be ``-inf``/``inf``."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.lower) != len(self.upper):
            raise InvalidSet("box bound lengths disagree")
        for lo, hi in zip(self.lower, self.upper):
            if not lo < hi:
                raise InvalidSet(f"empty box side ({lo}, {hi})")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def bounded(self) -> bool:
        return all(math.isfinite(v) for v in self.lower + self.upper)

    def contains(self, x: Sequence[float], tol: float = 0.0) -> bool:
        """Open membership; a positive tol admits points tol outside."""
        return all(
            lo - tol < v < hi + tol for v, lo, hi in zip(x, self.lower, self.upper)
        )

    def measure(self) -> float:
        out = 1.0
        for lo, hi in zip(self.lower, self.upper):
            out *= hi - lo
        return out

    def sup_norm(self) -> float:
        """max Euclidean norm over the closure (finite boxes only)."""
        if not self.bounded:
            raise InvalidSet("sup norm of an unbounded box")
        return math.sqrt(
            sum(max(lo * lo, hi * hi) for lo, hi in zip(self.lower, self.upper))
        )


def _clip_interval(lo: float, hi: float, olo: float, ohi: float) -> tuple[float, float]:
    return max(lo, olo), min(hi, ohi)


@dataclass(frozen=True)
class MovingRegion:
    """Per-dimension bound expressions; evaluates to a box clipped to Omega."""

    lower: tuple[ex.Expr, ...]
    upper: tuple[ex.Expr, ...]
    omega: OpenBox

    def __post_init__(self) -> None:
        if not (len(self.lower) == len(self.upper) == self.omega.dim):
            raise InvalidSet("moving region dimension disagrees with the domain")

    @property
    def dim(self) -> int:
        return self.omega.dim

    def box_at(self, x: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        """Clipped bounds at ``x`` (may be empty: upper <= lower)."""
        bindings = point_bindings(x, self.dim)
        lo = np.empty(self.dim)
        hi = np.empty(self.dim)
        for i in range(self.dim):
            a = float(ex.evaluate(self.lower[i], bindings))
            b = float(ex.evaluate(self.upper[i], bindings))
            a, b = _clip_interval(a, b, self.omega.lower[i], self.omega.upper[i])
            lo[i], hi[i] = a, b
        return lo, hi

    def bounds_on_mesh(self, mesh: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized `box_at` over coordinate mesh arrays; shapes
        ``mesh[0].shape + (dim,)``."""
        bindings: dict[str, ex.Value] = {}
        for i, name in enumerate(_axis_names(self.dim)):
            bindings[name] = mesh[i]
        if self.dim == 1:
            bindings["t"] = bindings["x1"]
        shape = np.shape(mesh[0])
        lo = np.empty(shape + (self.dim,))
        hi = np.empty(shape + (self.dim,))
        for i in range(self.dim):
            a = np.broadcast_to(np.asarray(ex.evaluate(self.lower[i], bindings), float), shape)
            b = np.broadcast_to(np.asarray(ex.evaluate(self.upper[i], bindings), float), shape)
            lo[..., i] = np.maximum(a, self.omega.lower[i])
            hi[..., i] = np.minimum(b, self.omega.upper[i])
        return lo, hi


def region_measure(region: MovingRegion, x: Sequence[float]) -> float:
    """Lebesgue measure of the clipped box at ``x``."""
    lo, hi = region.box_at(x)
    side = np.maximum(hi - lo, 0.0)
    return float(np.prod(side))


def _box_intersection_measure(
    lo1: np.ndarray, hi1: np.ndarray, lo2: np.ndarray, hi2: np.ndarray
) -> float:
    side = np.maximum(np.minimum(hi1, hi2) - np.maximum(lo1, lo2), 0.0)
    return float(np.prod(side))


def rho(region: MovingRegion, x: Sequence[float], y: Sequence[float]) -> float:
    """Measure of the symmetric difference of the boxes at ``x`` and ``y``.

    Exact for boxes: ell(A) + ell(B) - 2 ell(A cap B).
    """
    lo1, hi1 = region.box_at(x)
    lo2, hi2 = region.box_at(y)
    m1 = float(np.prod(np.maximum(hi1 - lo1, 0.0)))
    m2 = float(np.prod(np.maximum(hi2 - lo2, 0.0)))
    return m1 + m2 - 2.0 * _box_intersection_measure(lo1, hi1, lo2, hi2)


@dataclass(frozen=True)
class TauMap:
    """Positive weight-exponent map on Omega, given as an expression in x."""

    expression: ex.Expr
    dim: int

    def __call__(self, x: Sequence[float]) -> float:
        return float(ex.evaluate(self.expression, point_bindings(x, self.dim)))

    def on_mesh(self, mesh: list[np.ndarray]) -> np.ndarray:
        bindings: dict[str, ex.Value] = {
            name: mesh[i] for i, name in enumerate(_axis_names(self.dim))
        }
        if self.dim == 1:
            bindings["t"] = bindings["x1"]
        out = np.asarray(ex.evaluate(self.expression, bindings), dtype=float)
        return np.broadcast_to(out, np.shape(mesh[0])).copy() if out.shape != np.shape(mesh[0]) else out


@dataclass(frozen=True)
class Exhaustion:
    """Bounded open boxes growing onto Omega."""

    omega: OpenBox
    rule: str = "anchored"

    def __post_init__(self) -> None:
        if self.rule not in ("anchored", "standard"):
            raise InvalidSet(f"unknown exhaustion rule '{self.rule}'")

    def box(self, n: int) -> OpenBox:
        if n < 1:
            raise InvalidSet("exhaustion index starts at 1")
        lower: list[float] = []
        upper: list[float] = []
        for lo, hi in zip(self.omega.lower, self.omega.upper):
            if self.rule == "anchored":
                ref = lo if math.isfinite(lo) else (hi if math.isfinite(hi) else 0.0)
                nlo = lo if math.isfinite(lo) else ref - n
                nhi = hi if math.isfinite(hi) else ref + n
            else:
                nlo = max(lo + 1.0 / n if math.isfinite(lo) else -float(n), -float(n))
                nhi = min(hi - 1.0 / n if math.isfinite(hi) else float(n), float(n))
                if not nlo < nhi:
                    raise InvalidSet(
                        f"standard exhaustion member {n} is empty on side ({lo}, {hi})"
                    )
            lower.append(nlo)
            upper.append(nhi)
        return OpenBox(tuple(lower), tuple(upper))

    def covering_index(
        self,
        lower: Sequence[float],
        upper: Sequence[float],
        n_limit: int = 64,
    ) -> int | None:
        """First member containing the compact box, or None below n_limit."""
        probe = OpenBox(tuple(lower), tuple(upper))
        if not probe.bounded:
            raise InvalidSet("coverage probes must be bounded boxes")
        for n in range(1, n_limit + 1):
            member = self.box(n)
            if all(
                member.lower[i] <= probe.lower[i] and probe.upper[i] <= member.upper[i]
                for i in range(self.omega.dim)
            ):
                return n
        return None


class DomainContext:
    """Domain data bundle: Omega, moving region, tau, exhaustion and grids.

    Grids, tau samples and tau slopes are cached per exhaustion index.
    """

    def __init__(
        self,
        omega: OpenBox,
        region: MovingRegion,
        tau: TauMap,
        h: float,
        exhaustion_rule: str = "anchored",
    ):
        if region.omega != omega:
            region = MovingRegion(region.lower, region.upper, omega)
        if tau.dim != omega.dim:
            raise InvalidSet("tau dimension disagrees with the domain")
        self.omega = omega
        self.region = region
        self.tau = tau
        self.h = float(h)
        self.exhaustion = Exhaustion(omega, exhaustion_rule)
        self._grids: dict[int, Grid] = {}
        self._tau_values: dict[int, np.ndarray] = {}
        self._tau_slopes: dict[int, tuple[float, ...]] = {}

    @property
    def dim(self) -> int:
        return self.omega.dim

    def grid(self, n: int) -> Grid:
        if n not in self._grids:
            box = self.exhaustion.box(n)
            self._grids[n] = Grid.from_box(box.lower, box.upper, self.h)
        return self._grids[n]

    def tau_values(self, n: int) -> np.ndarray:
        """tau on the grid nodes; validates sign once per index.

        tau must be strictly positive at nodes interior to Omega; grid nodes
        on the closure boundary may touch the zero set of tau (the cumulative
        region's corner does, legitimately).  Negative values anywhere are an
        error.
        """
        if n not in self._tau_values:
            mesh = self.grid(n).meshgrid()
            values = self.tau.on_mesh(mesh)
            interior = np.ones(values.shape, dtype=bool)
            for i in range(self.dim):
                interior &= (mesh[i] > self.omega.lower[i]) & (
                    mesh[i] < self.omega.upper[i]
                )
            bad = (values < 0.0) | (interior & (values <= 0.0))
            if np.any(bad):
                where = np.unravel_index(int(np.argmax(bad)), values.shape)
                point = [self.grid(n).axis(i)[where[i]] for i in range(self.dim)]
                raise NegativeWeightFunction(
                    f"tau is not positive at {point} (value {values[where]:g})"
                )
            self._tau_values[n] = values
        return self._tau_values[n]

    def sup_tau(self, n: int) -> float:
        return float(self.tau_values(n).max())

    def tau_slopes(self, n: int) -> tuple[float, ...]:
        """Max per-axis finite-difference slope of tau on the grid (used to
        pick the phi-quadrature refinement)."""
        if n not in self._tau_slopes:
            values = self.tau_values(n)
            steps = self.grid(n).steps
            slopes = []
            for axis in range(self.dim):
                diffs = np.abs(np.diff(values, axis=axis))
                slopes.append(float(diffs.max()) / steps[axis] if diffs.size else 0.0)
            self._tau_slopes[n] = tuple(slopes)
        return self._tau_slopes[n]

    def lambda_bounds(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Clipped region bounds at every node; shapes grid.shape + (dim,)."""
        return self.region.bounds_on_mesh(self.grid(n).meshgrid())


# ---------------------------------------------------------------------------
# Checks


@dataclass
class InvarianceReport:
    passed: bool
    n: int
    checked: int
    worst_violation: float
    witness: tuple[float, ...] | None

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        state = "passed" if self.passed else "FAILED"
        tail = "" if self.witness is None else f", worst at {self.witness} by {self.worst_violation:.3e}"
        return f"region invariance on member {self.n}: {state} ({self.checked} nodes{tail})"


def check_lambda_invariance(
    ctx: DomainContext, n: int, samples: int | None = None, tol: float = GEOM_TOL
) -> InvarianceReport:
    """Verify the moving region maps exhaustion member ``n`` into itself.

    Every grid node (or an evenly strided subset of ``samples`` nodes) is
    tested: the clipped box at the node must sit inside the closure of the
    member, within ``tol``.
    """
    grid = ctx.grid(n)
    lo, hi = ctx.lambda_bounds(n)
    lo = lo.reshape(-1, ctx.dim)
    hi = hi.reshape(-1, ctx.dim)
    points = grid.points()
    if samples is not None and samples < len(points):
        idx = np.linspace(0, len(points) - 1, samples).round().astype(int)
        points, lo, hi = points[idx], lo[idx], hi[idx]
    member_lo = np.asarray(grid.lower)
    member_hi = np.asarray(grid.upper)
    nonempty = np.all(hi - lo > 0.0, axis=1)
    under = np.where(nonempty[:, None], member_lo - lo, 0.0)
    over = np.where(nonempty[:, None], hi - member_hi, 0.0)
    violation = np.maximum(under, over).max(axis=1)
    worst_idx = int(np.argmax(violation))
    worst = float(violation[worst_idx])
    passed = worst <= tol
    return InvarianceReport(
        passed=passed,
        n=n,
        checked=len(points),
        worst_violation=worst,
        witness=tuple(points[worst_idx]) if not passed else None,
    )


@dataclass
class ProbeResult:
    x0: tuple[float, ...]
    delta: float
    passed: bool
    witness: tuple[float, ...] | None
    sup_tau_intersection: float
    tau_at_x0: float


@dataclass
class AdmissibilityReport:
    passed: bool
    probes: list[ProbeResult]


def _sup_tau_over_box(ctx: DomainContext, lo: np.ndarray, hi: np.ndarray) -> float:
    """Sampled sup of tau over a box (17 points per axis, corners included)."""
    if np.any(hi - lo <= 0.0):
        return 0.0
    axes = [np.linspace(lo[i], hi[i], 17) for i in range(ctx.dim)]
    mesh = list(np.meshgrid(*axes, indexing="ij"))
    return float(ctx.tau.on_mesh(mesh).max())


def check_tau_admissible(
    ctx: DomainContext,
    probes: Sequence[tuple[Sequence[float], float]],
    candidates_per_axis: int = 9,
    tol: float = STRICT_TOL,
) -> AdmissibilityReport:
    """Search each probe ball for a point that strictly lowers tau on the
    region overlap.

    For a probe ``(x0, delta)`` the candidates are a mesh in
    ``B(x0, delta) cap Omega`` (sup-norm ball, ``candidates_per_axis`` points
    per axis).  The probe passes as soon as some candidate ``x`` satisfies
    ``sup tau(Lambda(x) cap Lambda(x0)) < tau(x0) - tol`` with the sup taken
    over a sampled mesh (empty overlap counts as sup 0, which passes since
    tau is positive).
    """
    results: list[ProbeResult] = []
    for x0_raw, delta in probes:
        x0 = np.asarray(x0_raw, dtype=float)
        tau0 = ctx.tau(x0)
        lo0, hi0 = ctx.region.box_at(x0)
        axes = []
        for i in range(ctx.dim):
            a = max(x0[i] - delta, ctx.omega.lower[i] + STRICT_TOL)
            b = min(x0[i] + delta, ctx.omega.upper[i] - STRICT_TOL)
            axes.append(np.linspace(a, b, candidates_per_axis))
        mesh = np.meshgrid(*axes, indexing="ij")
        candidates = np.stack([m.reshape(-1) for m in mesh], axis=-1)
        witness = None
        best = math.inf
        for x in candidates:
            lo, hi = ctx.region.box_at(x)
            cap_lo = np.maximum(lo, lo0)
            cap_hi = np.minimum(hi, hi0)
            sup_tau = _sup_tau_over_box(ctx, cap_lo, cap_hi)
            if sup_tau < best:
                best = sup_tau
                if sup_tau < tau0 - tol:
                    witness = tuple(float(v) for v in x)
                    break
        results.append(
            ProbeResult(
                x0=tuple(float(v) for v in x0),
                delta=float(delta),
                passed=witness is not None,
                witness=witness,
                sup_tau_intersection=best,
                tau_at_x0=tau0,
            )
        )
    return AdmissibilityReport(passed=all(r.passed for r in results), probes=results)
