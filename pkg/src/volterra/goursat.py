"""Boundary-trace outer term for cumulative integral problems.

A function u on the positive orthant with prescribed values on every
coordinate hyperplane slice through the origin satisfies

    u(x) = g(x) + integral over [0, x] of (d^N u / dx1..dxN)

where g is the inclusion-exclusion combination of the traces: for each
nonempty pattern sigma in {0,1}^N the trace u_sigma is u restricted to the
face where the coordinates outside sigma vanish, and

    g(x) = sum over sigma of (-1)^(zeros(sigma) + 1) u_sigma(x_sigma)
           + (-1)^(N + 1) u(0).

The builder assembles g as an expression tree from per-pattern trace
expressions, after checking that the traces agree where their faces meet.
"""

from __future__ import annotations

import itertools

import numpy as np

from . import expr as ex
from .problem import AdditiveOuter

__all__ = ["IncompatibleTraces", "goursat_outer", "trace_pattern_name"]

TRACE_TOL = 1e-9
TRACE_SAMPLES = 33


class IncompatibleTraces(Exception):
    """Prescribed boundary traces disagree on a shared face."""


def trace_pattern_name(pattern: tuple[int, ...]) -> str:
    kept = [f"x{i + 1}" for i, bit in enumerate(pattern) if bit]
    return "trace on (" + ", ".join(kept) + ")"


def _validate_pattern(pattern: tuple[int, ...], dim: int) -> None:
    if len(pattern) != dim or any(bit not in (0, 1) for bit in pattern):
        raise ValueError(f"trace pattern {pattern!r} is not a 0/1 tuple of length {dim}")
    if not any(pattern):
        raise ValueError("the all-zero pattern is the corner value, not a trace")
    if all(pattern):
        raise ValueError("the all-one pattern is the unknown itself, not a trace")


def _eval_on_face(
    trace: ex.Expr, pattern: tuple[int, ...], coords: dict[int, np.ndarray | float]
) -> np.ndarray:
    """Evaluate a trace with the pattern's free coordinates taken from
    ``coords`` (absent ones fixed to zero)."""
    bindings: dict[str, ex.Value] = {}
    for i, bit in enumerate(pattern):
        if bit:
            bindings[f"x{i + 1}"] = coords.get(i, 0.0)
    return np.asarray(ex.evaluate(trace, bindings), dtype=float)


def _check_compatibility(
    traces: dict[tuple[int, ...], ex.Expr],
    corner: float,
    dim: int,
    face_extent: float,
) -> None:
    samples = np.linspace(0.0, face_extent, TRACE_SAMPLES)
    patterns = sorted(traces)

    for pattern in patterns:
        value = _eval_on_face(traces[pattern], pattern, {})
        if abs(float(value) - corner) > TRACE_TOL:
            raise IncompatibleTraces(
                f"{trace_pattern_name(pattern)} takes value {float(value):.12g} at "
                f"the origin, corner value is {corner:.12g}"
            )

    for pa, pb in itertools.combinations(patterns, 2):
        common = tuple(a & b for a, b in zip(pa, pb))
        if not any(common):
            continue
        free = [i for i, bit in enumerate(common) if bit]
        grids = np.meshgrid(*[samples] * len(free), indexing="ij")
        coords = {axis: grids[j] for j, axis in enumerate(free)}
        va = _eval_on_face(traces[pa], pa, coords)
        vb = _eval_on_face(traces[pb], pb, coords)
        gap = np.abs(va - vb)
        worst = float(gap.max())
        if worst > TRACE_TOL:
            where = np.unravel_index(int(np.argmax(gap)), gap.shape)
            point = {f"x{axis + 1}": float(grids[j][where]) for j, axis in enumerate(free)}
            raise IncompatibleTraces(
                f"{trace_pattern_name(pa)} and {trace_pattern_name(pb)} differ by "
                f"{worst:.3e} at {point}"
            )


def goursat_outer(
    traces: dict[tuple[int, ...], ex.Expr],
    corner: float,
    dim: int,
    face_extent: float = 1.0,
) -> AdditiveOuter:
    """Inclusion-exclusion outer term from coordinate-face traces.

    ``traces`` maps nonzero patterns to expressions in the pattern's
    coordinates.  Missing patterns default to the constant corner value
    (flat face).  Traces are checked for agreement on shared faces over
    [0, face_extent] per axis before the expression is assembled; since g
    does not depend on the state, the modulus is zero.
    """
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    full: dict[tuple[int, ...], ex.Expr] = {}
    for pattern, trace in traces.items():
        key = tuple(int(b) for b in pattern)
        _validate_pattern(key, dim)
        allowed = {f"x{i + 1}" for i, bit in enumerate(key) if bit}
        stray = ex.variables(trace) - allowed
        if stray:
            raise ValueError(
                f"{trace_pattern_name(key)} uses coordinates {sorted(stray)} "
                f"outside its face"
            )
        full[key] = trace
    for bits in itertools.product((0, 1), repeat=dim):
        if any(bits) and not all(bits) and bits not in full:
            full[bits] = ex.Num(float(corner))

    _check_compatibility(full, float(corner), dim, face_extent)

    terms: list[tuple[int, ex.Expr]] = []
    for pattern, trace in sorted(full.items()):
        zeros = dim - sum(pattern)
        sign = -1 if zeros % 2 == 0 else 1  # (-1)^(zeros + 1)
        terms.append((sign, trace))
    corner_sign = 1 if (dim + 1) % 2 == 0 else -1
    terms.append((corner_sign, ex.Num(float(corner))))

    g: ex.Expr | None = None
    for sign, term in terms:
        if isinstance(term, ex.Num) and term.value == 0.0:
            continue
        signed = term if sign > 0 else ex.Neg(term)
        g = signed if g is None else ex.BinOp("+", g, signed)
    if g is None:
        g = ex.Num(0.0)
    return AdditiveOuter(g=(g,), modulus=ex.Num(0.0))
