"""Uniform grids, grid functions and trapezoid weight machinery."""

import numpy as np
import pytest

from volterra.grids import (
    Grid,
    GridCoverage,
    GridFunction,
    GridMismatch,
    box_node_weights,
    contract_weights,
    cumulative_trapezoid,
    fractional_weights,
)


class TestGrid:
    def test_from_box_snaps_to_closure(self):
        g = Grid.from_box((0.0,), (1.0,), 0.25)
        np.testing.assert_allclose(g.axis(0), [0.0, 0.25, 0.5, 0.75, 1.0])
        assert g.steps == (0.25,)

    def test_rectangular(self):
        g = Grid.from_box((0.0, -1.0), (1.0, 1.0), 0.5)
        assert g.shape == (3, 5)
        assert g.dim == 2
        assert g.points().shape == (15, 2)

    def test_matches_raises_on_disagreement(self):
        a = Grid.from_box((0.0,), (1.0,), 0.25)
        b = Grid.from_box((0.0,), (1.0,), 0.125)
        assert a.matches(a)
        with pytest.raises(GridMismatch):
            a.matches(b)

    def test_meshgrid_indexing(self):
        g = Grid.from_box((0.0, 0.0), (1.0, 2.0), 1.0)
        m1, m2 = g.meshgrid()
        assert m1.shape == m2.shape == g.shape
        assert m1[1, 0] == 1.0 and m2[0, 2] == 2.0


class TestGridFunction:
    def test_from_callable_and_norms(self):
        g = Grid.from_box((0.0,), (1.0,), 0.25)
        u = GridFunction.from_callable(g, lambda x: -(x**2))
        assert u.sup_norm() == 1.0
        assert u.values.shape == (5, 1)

    def test_vector_point_norms(self):
        g = Grid.from_box((0.0,), (1.0,), 0.5)
        vals = np.stack(
            [np.array([3.0, 0.0, 1.0]), np.array([4.0, 0.0, 0.0])], axis=-1
        )
        u = GridFunction(g, vals)
        np.testing.assert_allclose(u.point_norms(), [5.0, 0.0, 1.0])

    def test_csv_one_dimensional(self):
        g = Grid.from_box((0.0,), (1.0,), 0.5)
        u = GridFunction.from_callable(g, lambda x: x)
        assert u.to_csv() == "x,u\n0,0\n0.5,0.5\n1,1\n"

    def test_csv_vector_header(self):
        g = Grid.from_box((0.0,), (1.0,), 1.0)
        u = GridFunction(g, np.zeros((2, 2)))
        assert u.to_csv().splitlines()[0] == "x,u1,u2"

    def test_csv_two_dimensional_lexicographic(self):
        g = Grid.from_box((0.0, 0.0), (1.0, 1.0), 1.0)
        u = GridFunction.from_callable(g, lambda a, b: 10 * a + b)
        lines = u.to_csv().splitlines()
        assert lines[0] == "x1,x2,u"
        assert lines[1] == "0,0,0"
        assert lines[2] == "0,1,1"  # second axis varies fastest
        assert lines[3] == "1,0,10"

    def test_csv_seventeen_digits(self):
        g = Grid.from_box((0.0,), (1.0,), 1.0)
        u = GridFunction(g, np.array([[1.0 / 3.0], [np.e]]))
        body = u.to_csv().splitlines()[1:]
        assert body[0].split(",")[1] == "0.33333333333333331"


class TestWeights:
    def test_fractional_weights_integrate_constants_exactly(self):
        j0, w = fractional_weights(0.0, 0.25, 5, 0.1, 0.9)
        assert j0 == 0
        assert w.sum() == pytest.approx(0.8, abs=1e-15)

    def test_fractional_weights_integrate_linear_exactly(self):
        # integral of y over (0.1, 0.9) = (0.81 - 0.01)/2
        j0, w = fractional_weights(0.0, 0.25, 5, 0.1, 0.9)
        nodes = np.arange(j0, j0 + w.size) * 0.25
        assert float(w @ nodes) == pytest.approx(0.4, abs=1e-15)

    def test_fractional_weights_empty_interval(self):
        _, w = fractional_weights(0.0, 0.25, 5, 0.6, 0.6)
        assert w.sum() == 0.0

    def test_fractional_weights_coverage_guard(self):
        with pytest.raises(GridCoverage):
            fractional_weights(0.0, 0.25, 5, -0.5, 0.9)

    def test_box_node_weights_factorize_measure(self):
        g = Grid.from_box((0.0, 0.0), (1.0, 2.0), 0.5)
        offsets, vectors = box_node_weights(
            g, np.array([0.2, 0.3]), np.array([0.9, 1.7])
        )
        measure = np.prod([v.sum() for v in vectors])
        assert measure == pytest.approx(0.7 * 1.4, abs=1e-14)

    def test_box_node_weights_empty_returns_none(self):
        g = Grid.from_box((0.0,), (1.0,), 0.5)
        assert box_node_weights(g, np.array([0.7]), np.array([0.2])) is None

    def test_contract_weights_matches_manual_sum(self):
        g = Grid.from_box((0.0, 0.0), (1.0, 1.0), 0.25)
        vals = np.arange(25.0).reshape(5, 5)[..., None]
        offsets, vectors = box_node_weights(g, np.array([0.1, 0.2]), np.array([0.8, 0.9]))
        i0, j0 = offsets
        window = vals[i0 : i0 + vectors[0].size, j0 : j0 + vectors[1].size, 0]
        expected = float(vectors[0] @ window @ vectors[1])
        got = contract_weights(
            vals[i0 : i0 + vectors[0].size, j0 : j0 + vectors[1].size], vectors
        )
        assert float(got[0]) == pytest.approx(expected, rel=1e-14)


class TestCumulativeTrapezoid:
    def test_linear_integrand_exact(self):
        g = Grid.from_box((0.0,), (2.0,), 0.25)
        vals = g.axis(0)[:, None]
        out = cumulative_trapezoid(vals, g.steps, (0,))
        np.testing.assert_allclose(out[:, 0], g.axis(0) ** 2 / 2, atol=1e-15)

    def test_second_order_convergence(self):
        # integral of y^2 over (0, x): error halves twice per refinement
        errors = []
        for h in (0.1, 0.05):
            g = Grid.from_box((0.0,), (2.0,), h)
            vals = (g.axis(0) ** 2)[:, None]
            out = cumulative_trapezoid(vals, g.steps, (0,))
            errors.append(np.abs(out[:, 0] - g.axis(0) ** 3 / 3).max())
        ratio = errors[0] / errors[1]
        assert 3.5 <= ratio <= 4.5

    def test_two_axes_factorize(self):
        g = Grid.from_box((0.0, 0.0), (1.0, 1.0), 0.125)
        m1, m2 = g.meshgrid()
        vals = (m1 * m2)[..., None]
        out = cumulative_trapezoid(vals, g.steps, (0, 1))
        exact = (m1**2 / 2) * (m2**2 / 2)
        np.testing.assert_allclose(out[..., 0], exact, atol=1e-14)
