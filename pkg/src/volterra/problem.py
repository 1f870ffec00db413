"""Problem data: kernel, multivalued right-hand side, outer map, solve knobs.

Three outer-map shapes are supported, named by how the integral term enters:

``additive``
    ``u(x) in g(x, u(x)) + integral``; ``g`` depends on ``x`` and the state.

``nested``
    ``u(x) in g(x, u(x), integral)``; scalar problems, the integral is fed to
    ``g`` as a second value argument (``u1`` is the state, ``u2`` the
    integral).

``setvalued``
    ``u(x) in G(x, integral)`` with interval-valued ``G`` given by lower and
    upper envelope expressions in ``w``; the solver picks the Steiner point
    (interval midpoint).

Expressions use ``x1..xN`` for coordinates (``t`` as an alias in one
dimension), ``y1..yN``/``s`` for integration variables, ``u``/``u1..uM`` for
state components and plain ``x`` inside scalar moduli.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex
from .domain import DomainContext

__all__ = [
    "OuterForm",
    "Kernel",
    "MultiMap",
    "AdditiveOuter",
    "NestedOuter",
    "SetValuedOuter",
    "OuterMap",
    "ProblemSpec",
    "axis_names",
    "coordinate_bindings",
    "state_bindings",
]


class OuterForm(str, Enum):
    ADDITIVE = "additive"
    NESTED = "nested"
    SET_VALUED = "setvalued"


def axis_names(dim: int, integration: bool = False) -> list[str]:
    prefix = "y" if integration else "x"
    return [f"{prefix}{i + 1}" for i in range(dim)]


def coordinate_bindings(
    mesh: Sequence[np.ndarray | float], dim: int, integration: bool = False
) -> dict[str, ex.Value]:
    """Bind coordinate arrays (or scalars) to x1../y1.. names with the 1-D
    ``t``/``s`` aliases."""
    names = axis_names(dim, integration)
    bindings: dict[str, ex.Value] = {name: mesh[i] for i, name in enumerate(names)}
    if dim == 1:
        bindings["s" if integration else "t"] = bindings[names[0]]
    return bindings


def state_bindings(values: np.ndarray, m: int) -> dict[str, ex.Value]:
    """Bind state components to u1..uM (and ``u`` when scalar).

    ``values`` has a trailing component axis of length ``m``.
    """
    bindings: dict[str, ex.Value] = {}
    for j in range(m):
        bindings[f"u{j + 1}"] = values[..., j]
    if m == 1:
        bindings["u"] = values[..., 0]
    return bindings


@dataclass(frozen=True)
class Kernel:
    """Matrix of kernel entry expressions in (x, y)."""

    entries: tuple[tuple[ex.Expr, ...], ...]
    _norm_cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        m = len(self.entries)
        if m == 0 or any(len(row) != m for row in self.entries):
            raise ValueError("kernel entries must form a square matrix")

    @property
    def m(self) -> int:
        return len(self.entries)

    def is_constant(self) -> bool:
        return all(not ex.variables(e) for row in self.entries for e in row)

    def constant_matrix(self) -> np.ndarray:
        return np.array(
            [[float(ex.evaluate(e)) for e in row] for row in self.entries]
        )

    def eval_entries(
        self, bindings: Mapping[str, ex.Value], shape: tuple[int, ...]
    ) -> np.ndarray:
        """Entry values broadcast to ``shape + (m, m)``."""
        m = self.m
        out = np.empty(shape + (m, m))
        for i, row in enumerate(self.entries):
            for j, entry in enumerate(row):
                val = np.asarray(ex.evaluate(entry, bindings), dtype=float)
                out[..., i, j] = np.broadcast_to(val, shape)
        return out


@dataclass(frozen=True)
class MultiMap:
    """Componentwise envelope data for the multivalued right-hand side.

    ``lower``/``upper`` are per-component expressions in (x, u); equal trees
    describe single-valued data.  ``growth`` is the sup-norm growth bound
    ``b`` and ``fiber`` the condensing bound ``eta``, both expressions in x.
    """

    lower: tuple[ex.Expr, ...]
    upper: tuple[ex.Expr, ...]
    growth: ex.Expr
    fiber: ex.Expr

    def __post_init__(self) -> None:
        if len(self.lower) != len(self.upper) or not self.lower:
            raise ValueError("envelope component counts disagree")

    @property
    def m(self) -> int:
        return len(self.lower)

    @property
    def singleton(self) -> bool:
        return self.lower == self.upper

    def envelopes(
        self, x_bindings: Mapping[str, ex.Value], values: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate the envelopes; arrays shaped like ``values``."""
        bindings = dict(x_bindings)
        bindings.update(state_bindings(values, self.m))
        shape = values.shape[:-1]
        lo = np.empty(shape + (self.m,))
        hi = np.empty(shape + (self.m,))
        for j in range(self.m):
            lo[..., j] = np.broadcast_to(
                np.asarray(ex.evaluate(self.lower[j], bindings), float), shape
            )
            if self.singleton:
                hi[..., j] = lo[..., j]
            else:
                hi[..., j] = np.broadcast_to(
                    np.asarray(ex.evaluate(self.upper[j], bindings), float), shape
                )
        return lo, hi


def _grid_norm_sup(values: np.ndarray) -> float:
    return float(np.sqrt(np.sum(values**2, axis=-1)).max())


@dataclass(frozen=True)
class AdditiveOuter:
    """g(x, u) added to the integral; ``modulus`` bounds the u-variation."""

    g: tuple[ex.Expr, ...]
    modulus: ex.Expr  # phi, expression in plain x

    @property
    def form(self) -> OuterForm:
        return OuterForm.ADDITIVE

    @property
    def m(self) -> int:
        return len(self.g)

    def eval(self, x_bindings: Mapping[str, ex.Value], values: np.ndarray) -> np.ndarray:
        bindings = dict(x_bindings)
        bindings.update(state_bindings(values, self.m))
        shape = values.shape[:-1]
        out = np.empty(shape + (self.m,))
        for j in range(self.m):
            out[..., j] = np.broadcast_to(
                np.asarray(ex.evaluate(self.g[j], bindings), float), shape
            )
        return out

    def zero_state_norm(self, ctx: DomainContext, n: int) -> float:
        """Grid sup of |g(., 0)| on exhaustion member ``n``."""
        grid = ctx.grid(n)
        mesh = grid.meshgrid()
        zero = np.zeros(grid.shape + (self.m,))
        return _grid_norm_sup(self.eval(coordinate_bindings(mesh, ctx.dim), zero))


@dataclass(frozen=True)
class NestedOuter:
    """g(x, u1, u2) with u1 the state and u2 the integral value (scalar)."""

    g: ex.Expr
    modulus: ex.Expr  # phi(x): u1-variation bound
    integral_modulus: ex.Expr  # vartheta(x): u2-variation bound

    @property
    def form(self) -> OuterForm:
        return OuterForm.NESTED

    @property
    def m(self) -> int:
        return 1

    def eval(
        self,
        x_bindings: Mapping[str, ex.Value],
        state: np.ndarray,
        integral: np.ndarray,
    ) -> np.ndarray:
        bindings = dict(x_bindings)
        bindings["u1"] = state[..., 0]
        bindings["u2"] = integral[..., 0]
        shape = state.shape[:-1]
        out = np.asarray(ex.evaluate(self.g, bindings), float)
        return np.broadcast_to(out, shape)[..., None].copy()

    def zero_state_norm(self, ctx: DomainContext, n: int) -> float:
        grid = ctx.grid(n)
        zero = np.zeros(grid.shape + (1,))
        values = self.eval(coordinate_bindings(grid.meshgrid(), ctx.dim), zero, zero)
        return _grid_norm_sup(values)


@dataclass(frozen=True)
class SetValuedOuter:
    """Interval-valued outer map G(x, w); ``w`` binds the integral value."""

    lower: ex.Expr
    upper: ex.Expr
    modulus: ex.Expr  # phi(x): w-variation bound on the Hausdorff distance
    x_modulus: ex.Expr  # theta(x): x-variation bound

    @property
    def form(self) -> OuterForm:
        return OuterForm.SET_VALUED

    @property
    def m(self) -> int:
        return 1

    def envelopes(
        self, x_bindings: Mapping[str, ex.Value], integral: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        bindings = dict(x_bindings)
        bindings["w"] = integral[..., 0]
        shape = integral.shape[:-1]
        lo = np.broadcast_to(np.asarray(ex.evaluate(self.lower, bindings), float), shape)
        hi = np.broadcast_to(np.asarray(ex.evaluate(self.upper, bindings), float), shape)
        return lo[..., None].copy(), hi[..., None].copy()

    def zero_state_norm(self, ctx: DomainContext, n: int) -> float:
        """sup over the member of theta(|x|) plus the envelope magnitude at
        the origin (x=0, w=0); the origin need not belong to Omega, the
        expressions are simply evaluated there."""
        grid = ctx.grid(n)
        mesh = grid.meshgrid()
        norms = np.sqrt(sum(m * m for m in mesh))
        theta_sup = float(np.max(ex.evaluate(self.x_modulus, {"x": norms})))
        origin = coordinate_bindings([0.0] * ctx.dim, ctx.dim)
        origin["w"] = 0.0
        g0 = max(
            abs(float(ex.evaluate(self.lower, origin))),
            abs(float(ex.evaluate(self.upper, origin))),
        )
        return theta_sup + g0


OuterMap = AdditiveOuter | NestedOuter | SetValuedOuter


@dataclass
class ProblemSpec:
    """Everything a solve needs: domain context, operator data and knobs."""

    ctx: DomainContext
    kernel: Kernel
    rhs: MultiMap
    outer: AdditiveOuter | NestedOuter | SetValuedOuter
    n: int = 1
    tol_fix: float = 1e-10
    max_iter: int = 1000
    strategy: str = "midpoint"
    a_rule: tuple[str, object] = ("auto", None)

    def __post_init__(self) -> None:
        if self.kernel.m != self.rhs.m or self.kernel.m != self.outer.m:
            raise ValueError(
                f"component counts disagree: kernel {self.kernel.m}, "
                f"rhs {self.rhs.m}, outer {self.outer.m}"
            )
        if self.strategy not in ("midpoint", "lower", "upper"):
            raise ValueError(f"unknown selection strategy '{self.strategy}'")
        if self.n < 1:
            raise ValueError("exhaustion index starts at 1")

    @property
    def m(self) -> int:
        return self.kernel.m

    @property
    def form(self) -> OuterForm:
        return self.outer.form

    def modulus_value(self, x: float | np.ndarray) -> float | np.ndarray:
        return ex.evaluate(self.outer.modulus, {"x": x})

    def modulus_slope(self, r: float, samples: int = 1000) -> float:
        """max of phi(x)/x over log-spaced samples of (0, r]."""
        if not math.isfinite(r) or r <= 0:
            r = 1.0
        top = math.log10(r)
        xs = np.logspace(top - 16.0, top, samples)
        vals = np.asarray(self.modulus_value(xs), dtype=float)
        return float(np.max(vals / xs))
