"""Uniform tensor grids, grid functions and composite trapezoid machinery.

A :class:`Grid` covers the closure of a bounded box with a uniform node
lattice per dimension.  :class:`GridFunction` carries vector values of width
``m`` at every node (shape ``grid.shape + (m,)``).  The quadrature helpers
implement composite trapezoid rules over sub-boxes whose edges need not sit
on nodes: the partial end cells integrate the piecewise linear interpolant
exactly, which is what keeps the rule second order after clipping.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Grid",
    "GridFunction",
    "GridMismatch",
    "GridCoverage",
    "fractional_weights",
    "box_node_weights",
    "cumulative_trapezoid",
    "trapezoid_mesh",
    "contract_weights",
]

GEOM_TOL = 1e-9


class GridMismatch(Exception):
    """Two grid functions (or a function and a schedule) live on different grids."""


class GridCoverage(Exception):
    """An integration box sticks out of the grid by more than the tolerance."""


@dataclass(frozen=True)
class Grid:
    """Uniform node lattice over a closed box."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    shape: tuple[int, ...]  # node counts per dimension, each >= 2

    def __post_init__(self) -> None:
        if not (len(self.lower) == len(self.upper) == len(self.shape)):
            raise ValueError("grid descriptor lengths disagree")
        for lo, hi, count in zip(self.lower, self.upper, self.shape):
            if not (hi > lo) or count < 2:
                raise ValueError(f"degenerate grid axis ({lo}, {hi}) with {count} nodes")

    @classmethod
    def from_box(cls, lower: Sequence[float], upper: Sequence[float], h: float) -> "Grid":
        """Grid with requested step ``h``; the step snaps per axis so the
        lattice fits the box exactly (cells = round(length/h), at least 1)."""
        if h <= 0:
            raise ValueError("grid step must be positive")
        shape = []
        for lo, hi in zip(lower, upper):
            cells = max(1, round((hi - lo) / h))
            shape.append(cells + 1)
        return cls(tuple(float(v) for v in lower), tuple(float(v) for v in upper), tuple(shape))

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def steps(self) -> tuple[float, ...]:
        return tuple(
            (hi - lo) / (count - 1) for lo, hi, count in zip(self.lower, self.upper, self.shape)
        )

    def axis(self, i: int) -> np.ndarray:
        return np.linspace(self.lower[i], self.upper[i], self.shape[i])

    def axes(self) -> list[np.ndarray]:
        return [self.axis(i) for i in range(self.dim)]

    def meshgrid(self) -> list[np.ndarray]:
        """Coordinate arrays of shape ``self.shape`` (ij indexing)."""
        return list(np.meshgrid(*self.axes(), indexing="ij"))

    def points(self) -> np.ndarray:
        """All nodes in lexicographic order, shape (#nodes, dim)."""
        mesh = self.meshgrid()
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def matches(self, other: "Grid", tol: float = 1e-12) -> bool:
        """Guard that two grids cover the same nodes; raises GridMismatch."""
        same = (
            self.shape == other.shape
            and all(abs(a - b) <= tol for a, b in zip(self.lower, other.lower))
            and all(abs(a - b) <= tol for a, b in zip(self.upper, other.upper))
        )
        if not same:
            raise GridMismatch(
                f"grid {self.shape} on {self.lower}..{self.upper} does not match "
                f"grid {other.shape} on {other.lower}..{other.upper}"
            )
        return True


@dataclass
class GridFunction:
    """Vector-valued samples on a grid; values shape is ``grid.shape + (m,)``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[:-1] != self.grid.shape:
            raise GridMismatch(
                f"value array shape {self.values.shape} does not sit on grid {self.grid.shape}"
            )

    @property
    def m(self) -> int:
        return self.values.shape[-1]

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable[..., np.ndarray], m: int = 1) -> "GridFunction":
        mesh = grid.meshgrid()
        out = np.asarray(fn(*mesh), dtype=float)
        if out.shape == grid.shape:
            out = out[..., None]
        if m == 1 and out.shape != grid.shape + (1,):
            out = np.broadcast_to(out, grid.shape + (1,)).copy()
        return cls(grid, out)

    @classmethod
    def zeros(cls, grid: Grid, m: int = 1) -> "GridFunction":
        return cls(grid, np.zeros(grid.shape + (m,)))

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy())

    def point_norms(self) -> np.ndarray:
        """Euclidean norm of the value vector at every node."""
        return np.sqrt(np.sum(self.values**2, axis=-1))

    def sup_norm(self) -> float:
        return float(self.point_norms().max())

    def to_csv(self) -> str:
        """Lexicographic CSV dump with 17 significant digits.

        Header is ``x,u`` (or ``x,u1..um``) in one dimension and
        ``x1,..,xN,u`` (or ``u1..um``) otherwise.
        """
        dim = self.grid.dim
        coord_names = ["x"] if dim == 1 else [f"x{i + 1}" for i in range(dim)]
        value_names = ["u"] if self.m == 1 else [f"u{j + 1}" for j in range(self.m)]
        out = io.StringIO()
        out.write(",".join(coord_names + value_names) + "\n")
        points = self.grid.points()
        flat = self.values.reshape(-1, self.m)
        for row_pt, row_val in zip(points, flat):
            cells = [f"{v:.17g}" for v in row_pt] + [f"{v:.17g}" for v in row_val]
            out.write(",".join(cells) + "\n")
        return out.getvalue()


# ---------------------------------------------------------------------------
# Composite trapezoid pieces


def fractional_weights(
    origin: float, step: float, count: int, lo: float, hi: float
) -> tuple[int, np.ndarray]:
    """Node weights for ``integral_lo^hi`` of the piecewise linear interpolant.

    The axis has ``count`` nodes at ``origin + j*step``.  Returns ``(j0, w)``
    so that ``sum_j w[j] * f[j0 + j]`` is the integral.  ``lo``/``hi`` may sit
    strictly inside cells; overhang beyond the lattice larger than GEOM_TOL
    (relative to the step) raises :class:`GridCoverage`.
    """
    span = (count - 1) * step
    a = (lo - origin) / step
    b = (hi - origin) / step
    if a < -GEOM_TOL / step or b > (count - 1) + GEOM_TOL / step:
        raise GridCoverage(
            f"interval [{lo}, {hi}] exceeds grid [{origin}, {origin + span}]"
        )
    a = min(max(a, 0.0), float(count - 1))
    b = min(max(b, 0.0), float(count - 1))
    if b <= a:
        return 0, np.zeros(1)

    c0 = min(int(math.floor(a)), count - 2)
    c1 = max(min(int(math.ceil(b)) - 1, count - 2), c0)
    cells = np.arange(c0, c1 + 1)
    s0 = np.clip(a - cells, 0.0, 1.0)
    s1 = np.clip(b - cells, 0.0, 1.0)
    sq = (s1**2 - s0**2) / 2.0
    left = (s1 - s0) - sq
    right = sq
    weights = np.zeros(len(cells) + 1)
    weights[:-1] += left * step
    weights[1:] += right * step
    return c0, weights


def box_node_weights(
    grid: Grid, lower: Sequence[float], upper: Sequence[float]
) -> tuple[tuple[int, ...], list[np.ndarray]] | None:
    """Per-axis fractional weights for a sub-box; None when it has no volume."""
    offsets: list[int] = []
    weight_vectors: list[np.ndarray] = []
    steps = grid.steps
    for i in range(grid.dim):
        if upper[i] - lower[i] <= 0.0:
            return None
        j0, w = fractional_weights(grid.lower[i], steps[i], grid.shape[i], lower[i], upper[i])
        if not w.any():
            return None
        offsets.append(j0)
        weight_vectors.append(w)
    return tuple(offsets), weight_vectors


def cumulative_trapezoid(values: np.ndarray, steps: Sequence[float], axes: Sequence[int]) -> np.ndarray:
    """Running trapezoid integral along the given axes (zero at the first node).

    After applying it over every axis of an N-dimensional array the entry at
    index ``j`` equals the tensor trapezoid integral over the box from the
    grid origin to node ``j``.
    """
    out = values
    for axis, step in zip(axes, steps):
        hi = [slice(None)] * out.ndim
        hi[axis] = slice(1, None)
        lo = [slice(None)] * out.ndim
        lo[axis] = slice(None, -1)
        avg = 0.5 * step * (out[tuple(hi)] + out[tuple(lo)])
        pads = [(0, 0)] * out.ndim
        pads[axis] = (1, 0)
        out = np.pad(np.cumsum(avg, axis=axis), pads)
    return out


def trapezoid_mesh(axes: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Trapezoid weight vectors (h/2, h, ..., h, h/2) for explicit node axes."""
    out = []
    for nodes in axes:
        if len(nodes) == 1:
            out.append(np.zeros(1))
            continue
        w = np.empty(len(nodes))
        step = (nodes[-1] - nodes[0]) / (len(nodes) - 1)
        w[:] = step
        w[0] = w[-1] = step / 2.0
        out.append(w)
    return out


def contract_weights(values: np.ndarray, weight_vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Contract the leading ``len(weight_vectors)`` axes of ``values`` with
    the per-axis weight vectors (tensor-product quadrature).  Trailing axes
    (e.g. a component axis) survive."""
    out = values
    for i in range(len(weight_vectors) - 1, -1, -1):
        out = np.tensordot(weight_vectors[i], out, axes=([0], [i]))
    return out
