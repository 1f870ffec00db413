"""Shared fixtures: canonical 1-D context, builtin problems with their
schedules (session-scoped, they are reused all over), random convex
polygons."""

from __future__ import annotations

import numpy as np
import pytest

from volterra import expr as ex
from volterra.config import builtin_config, build_problem
from volterra.convex import Polygon
from volterra.domain import DomainContext, MovingRegion, OpenBox, TauMap
from volterra.weights import build_schedule

INF = float("inf")


def make_context(h: float = 1.0 / 512.0) -> DomainContext:
    """Omega=(0,inf), region (0,x), tau(x)=x, anchored members (0,n)."""
    omega = OpenBox((0.0,), (INF,))
    region = MovingRegion((ex.parse("0"),), (ex.parse("x1"),), omega)
    return DomainContext(omega, region, TauMap(ex.parse("x1"), 1), h, "anchored")


@pytest.fixture(scope="session")
def ctx_1d() -> DomainContext:
    return make_context()


@pytest.fixture(scope="session")
def linear_problem():
    return build_problem(builtin_config("second-kind"))


@pytest.fixture(scope="session")
def linear_schedule(linear_problem):
    return build_schedule(linear_problem)


@pytest.fixture(scope="session")
def oscillating_problem():
    return build_problem(builtin_config("oscillating"))


@pytest.fixture(scope="session")
def oscillating_schedule(oscillating_problem):
    return build_schedule(oscillating_problem)


@pytest.fixture(scope="session")
def goursat_problem():
    return build_problem(builtin_config("goursat"))


def random_convex_polygon(rng: np.random.Generator, scale: float = 1.0) -> Polygon:
    """Random convex polygon (Valtr construction: paired coordinate
    increments sorted by angle close up into a convex CCW chain)."""
    k = int(rng.integers(3, 9))

    def increments(values: np.ndarray) -> np.ndarray:
        lo, hi = values[0], values[-1]
        mid = values[1:-1]
        mask = rng.random(mid.size) < 0.5
        up = np.concatenate(([lo], mid[mask], [hi]))
        down = np.concatenate(([lo], mid[~mask], [hi]))
        return np.concatenate((np.diff(up), -np.diff(down)))

    dx = increments(np.sort(rng.uniform(0.0, scale, size=k + 1)))
    dy = increments(np.sort(rng.uniform(0.0, scale, size=k + 1)))
    rng.shuffle(dy)
    order = np.argsort(np.arctan2(dy, dx))
    edges = np.stack((dx[order], dy[order]), axis=1)
    vertices = np.cumsum(edges, axis=0)
    vertices += rng.uniform(-2.0, 2.0, size=2)
    return Polygon(tuple(map(tuple, vertices)))


def random_family_values(rng: np.random.Generator, x: np.ndarray, count: int):
    """Smooth random scalar profiles for condensing/MNC tests."""
    out = []
    for _ in range(count):
        amp = rng.uniform(0.2, 1.0)
        freq = rng.uniform(0.5, 4.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        out.append(amp * np.sin(freq * x + phase))
    return out
