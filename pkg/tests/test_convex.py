"""Compact convex sets: Steiner selection, support functions, Hausdorff
distance.  The polygon Steiner point is cross-validated against the
rotation-average definition computed by direct quadrature."""

import math

import numpy as np
import pytest

from volterra.convex import (
    Ball,
    Box,
    InvalidDirection,
    Polygon,
    Singleton,
    contains,
    hausdorff,
    steiner,
    steiner_lipschitz_constant,
    support,
)
from volterra.domain import InvalidSet

from conftest import random_convex_polygon


def rotation_average_steiner(polygon: Polygon, count: int = 4096) -> np.ndarray:
    """Independent oracle: s(K) = (1/pi) integral of h_K(u) u over S^1."""
    theta = (np.arange(count) + 0.5) * (2.0 * math.pi / count)
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    verts = np.asarray(polygon.vertices)
    h = (dirs @ verts.T).max(axis=1)
    return (h[:, None] * dirs).sum(axis=0) * (2.0 * math.pi / count) / math.pi


class TestSteinerClosedForms:
    def test_interval_midpoint(self):
        assert steiner(Box((2.0,), (4.0,)))[0] == 3.0

    def test_ball_center(self):
        np.testing.assert_array_equal(steiner(Ball((1.0, 2.0), 5.0)), [1.0, 2.0])

    def test_square_center(self):
        sq = Polygon(((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)))
        np.testing.assert_allclose(steiner(sq), [0.5, 0.5], atol=1e-14)

    def test_singleton(self):
        np.testing.assert_array_equal(steiner(Singleton((7.0, -1.0))), [7.0, -1.0])

    def test_polygon_matches_rotation_average(self):
        rng = np.random.default_rng(41)
        for _ in range(100):
            poly = random_convex_polygon(rng)
            np.testing.assert_allclose(
                steiner(poly), rotation_average_steiner(poly), atol=5e-6
            )

    def test_membership(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            poly = random_convex_polygon(rng)
            assert contains(poly, steiner(poly))
        assert contains(Ball((0.0, 1.0), 2.0), steiner(Ball((0.0, 1.0), 2.0)))


class TestSteinerLipschitzConstant:
    @pytest.mark.parametrize(
        "m,expected", [(1, 1.0), (2, 4.0 / math.pi), (3, 1.5)]
    )
    def test_closed_forms(self, m, expected):
        assert steiner_lipschitz_constant(m) == pytest.approx(expected, abs=1e-12)

    def test_monotone_in_dimension(self):
        values = [steiner_lipschitz_constant(m) for m in range(1, 12)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            steiner_lipschitz_constant(0)


class TestSupport:
    def test_box_face(self):
        assert support(Box((-1.0, -1.0), (1.0, 1.0)), np.array([1.0, 0.0])) == 1.0

    def test_ball(self):
        assert support(Ball((0.0, 0.0), 2.0), np.array([0.0, 1.0])) == 2.0

    def test_triangle_diagonal(self):
        tri = Polygon(((0.0, 0.0), (2.0, 0.0), (0.0, 2.0)))
        d = np.array([1.0, 1.0]) / math.sqrt(2.0)
        assert support(tri, d) == pytest.approx(math.sqrt(2.0), abs=1e-14)

    def test_zero_direction_rejected(self):
        with pytest.raises(InvalidDirection):
            support(Ball((0.0,), 1.0), np.array([0.0]))


class TestHausdorff:
    def test_identity(self):
        b = Box((0.0, 0.0), (1.0, 2.0))
        assert hausdorff(b, b) == 0.0

    def test_shifted_intervals(self):
        assert hausdorff(Box((0.0,), (2.0,)), Box((1.0,), (3.0,))) == pytest.approx(
            1.0, abs=1e-12
        )

    def test_concentric_balls(self):
        assert hausdorff(Ball((0.0, 0.0), 1.0), Ball((0.0, 0.0), 2.0)) == pytest.approx(
            1.0, abs=1e-9
        )

    def test_metric_axioms_on_random_polygons(self):
        rng = np.random.default_rng(77)
        for _ in range(100):
            a, b, c = (random_convex_polygon(rng) for _ in range(3))
            dab, dba = hausdorff(a, b), hausdorff(b, a)
            assert dab == pytest.approx(dba, abs=1e-12)
            assert dab <= hausdorff(a, c) + hausdorff(c, b) + 1e-6

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(InvalidSet):
            hausdorff(Box((0.0,), (1.0,)), Box((0.0, 0.0), (1.0, 1.0)))


class TestSteinerProperties:
    def test_translation_equivariance_exact(self):
        rng = np.random.default_rng(123)
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
            np.testing.assert_allclose(
                steiner(shifted), steiner(s) + v, rtol=0.0, atol=1e-12
            )

    def test_lipschitz_bound_on_random_polygon_pairs(self):
        rng = np.random.default_rng(99)
        constant = steiner_lipschitz_constant(2)
        for _ in range(1000):
            a = random_convex_polygon(rng)
            b = random_convex_polygon(rng)
            gap = np.linalg.norm(steiner(a) - steiner(b))
            assert gap <= constant * hausdorff(a, b) + 1e-9
