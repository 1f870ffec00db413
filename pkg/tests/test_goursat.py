"""Inclusion-exclusion assembly of boundary traces for cumulative
integral problems on the positive orthant."""

import numpy as np
import pytest

from volterra import expr as ex
from volterra.config import build_problem, goursat_config
from volterra.goursat import IncompatibleTraces, goursat_outer, trace_pattern_name
from volterra.grids import GridFunction
from volterra.solver import picard_solve, residual
from volterra.weights import build_schedule


def eval_g(outer, **bindings):
    return np.asarray(ex.evaluate(outer.g[0], bindings), dtype=float)


class TestAssembly:
    def test_pattern_names(self):
        assert trace_pattern_name((1, 0, 1)) == "trace on (x1, x3)"
        assert trace_pattern_name((0, 1)) == "trace on (x2)"

    def test_two_compatible_traces(self):
        outer = goursat_outer(
            {(1, 0): ex.parse("x1"), (0, 1): ex.parse("x2 ^ 2")}, corner=0.0, dim=2
        )
        assert len(outer.g) == 1
        assert ex.evaluate(outer.modulus, {"x": 5.0}) == 0.0
        x1, x2 = np.meshgrid(
            np.linspace(0.0, 1.0, 7), np.linspace(0.0, 1.0, 7), indexing="ij"
        )
        np.testing.assert_allclose(
            eval_g(outer, x1=x1, x2=x2), x1 + x2**2, rtol=0, atol=1e-15
        )

    def test_zero_traces_render_as_zero(self):
        outer = goursat_outer({}, corner=0.0, dim=2)
        assert ex.evaluate(outer.g[0], {}) == 0.0
        assert ex.variables(outer.g[0]) == set()

    def test_missing_patterns_default_to_flat_corner(self):
        outer = goursat_outer({(1, 0): ex.parse("3")}, corner=3.0, dim=2)
        x = np.linspace(0.0, 1.0, 5)
        np.testing.assert_allclose(eval_g(outer, x1=x, x2=x), 3.0)

    def test_three_dimensional_inclusion_exclusion(self):
        # all faces carry the restriction of x1 + x2 + x3, so g must
        # reproduce that sum exactly
        traces = {}
        for bits in [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (1, 0, 1), (0, 1, 1)]:
            parts = [f"x{i + 1}" for i, bit in enumerate(bits) if bit]
            traces[bits] = ex.parse(" + ".join(parts))
        outer = goursat_outer(traces, corner=0.0, dim=3)
        pts = np.linspace(0.0, 1.0, 4)
        x1, x2, x3 = np.meshgrid(pts, pts, pts, indexing="ij")
        np.testing.assert_allclose(
            eval_g(outer, x1=x1, x2=x2, x3=x3), x1 + x2 + x3, rtol=0, atol=1e-14
        )


class TestValidation:
    def test_corner_mismatch(self):
        with pytest.raises(IncompatibleTraces, match="origin"):
            goursat_outer({(1, 0): ex.parse("1 + x1")}, corner=0.0, dim=2)

    def test_shared_face_mismatch_names_witness(self):
        traces = {(1, 1, 0): ex.parse("x1"), (1, 0, 1): ex.parse("2 * x1")}
        with pytest.raises(IncompatibleTraces, match="differ by"):
            goursat_outer(traces, corner=0.0, dim=3)

    def test_degenerate_patterns_rejected(self):
        with pytest.raises(ValueError, match="unknown itself"):
            goursat_outer({(1, 1): ex.parse("x1")}, corner=0.0, dim=2)
        with pytest.raises(ValueError, match="corner value"):
            goursat_outer({(0, 0): ex.parse("0")}, corner=0.0, dim=2)
        with pytest.raises(ValueError, match="0/1 tuple"):
            goursat_outer({(1,): ex.parse("x1")}, corner=0.0, dim=2)

    def test_stray_coordinate_rejected(self):
        with pytest.raises(ValueError, match="outside its face"):
            goursat_outer({(1, 0): ex.parse("x2")}, corner=0.0, dim=2)

    def test_dimension_must_be_positive(self):
        with pytest.raises(ValueError):
            goursat_outer({}, corner=0.0, dim=0)


class TestEndToEnd:
    def test_unit_density_gives_product_solution(self):
        problem = build_problem(goursat_config(h=1.0 / 32.0))
        report = picard_solve(problem, build_schedule(problem))
        assert report.converged
        grid = problem.ctx.grid(problem.n)
        x1, x2 = grid.meshgrid()
        err = np.abs(report.solution.values[..., 0] - x1 * x2)
        assert err.max() <= 1e-3

    def test_trace_outer_is_exact_fixed_point_when_density_vanishes(self):
        outer = goursat_outer(
            {(1, 0): ex.parse("x1"), (0, 1): ex.parse("x2 ^ 2")}, corner=0.0, dim=2
        )
        config = goursat_config(f="0", g=ex.render(outer.g[0]), h=1.0 / 16.0)
        problem = build_problem(config)
        grid = problem.ctx.grid(problem.n)
        u = GridFunction.from_callable(grid, lambda x1, x2: x1 + x2**2)
        assert residual(problem, u) <= 1e-12
