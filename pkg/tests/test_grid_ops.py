import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nlwave import grid_ops as go
from nlwave.grid_ops import Grid, GridSequence, MeshMismatchError

EPS = np.finfo(float).eps
finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
meshes = st.sampled_from([0.05, 0.1, 0.25, 0.5, 1.0])


@st.composite
def sequences(draw, h=None, min_size=1, max_size=30):
    h = draw(meshes) if h is None else h
    n = draw(st.integers(min_size, max_size))
    lo = draw(st.integers(-20, 20))
    vals = draw(arrays(float, n, elements=finite))
    return GridSequence(Grid(h, lo, lo + n - 1), vals)


@st.composite
def pairs(draw):
    h = draw(meshes)
    return draw(sequences(h=h)), draw(sequences(h=h))


def direct_conv(u, v):
    # independent oracle: (u*v)_i = sum_j h u_{i-j} v_j on v's range
    out = []
    for i in v.grid.indices:
        out.append(sum(u.h * u[int(i) - int(j)] * v[int(j)] for j in v.grid.indices))
    return np.array(out)


class TestGrid:
    def test_points_are_exact_multiples(self):
        g = Grid(0.1, -3, 4)
        assert g.size == 8
        assert g.point(-3) == -3 * 0.1
        np.testing.assert_array_equal(g.x, np.arange(-3, 5) * 0.1)

    @pytest.mark.parametrize("h,i_min,i_max", [(0.0, 0, 1), (-1.0, 0, 1), (1.0, 2, 1)])
    def test_rejects_bad_bounds(self, h, i_min, i_max):
        with pytest.raises(ValueError):
            Grid(h, i_min, i_max)

    def test_from_interval(self):
        g = Grid.from_interval(0.125, -30, 30)
        assert (g.i_min, g.i_max) == (-240, 240)

    def test_from_interval_misaligned(self):
        with pytest.raises(ValueError):
            Grid.from_interval(0.3, -1, 1)


class TestGridSequence:
    def test_length_must_match(self):
        with pytest.raises(ValueError):
            GridSequence(Grid(1.0, 0, 2), [1.0, 2.0])

    def test_nonfinite_requires_flag(self):
        g = Grid(1.0, 0, 1)
        with pytest.raises(ValueError):
            GridSequence(g, [1.0, np.inf])
        assert GridSequence(g, [1.0, np.inf], diverged=True).diverged

    def test_values_read_only(self):
        u = GridSequence.zeros(Grid(1.0, 0, 3))
        with pytest.raises(ValueError):
            u.values[0] = 1.0

    def test_outside_reads_zero(self):
        u = GridSequence(Grid(1.0, 0, 1), [3.0, 4.0])
        assert u[-1] == 0.0 and u[1] == 4.0 and u[5] == 0.0


class TestNorms:
    def test_single_point_l1(self):
        u = GridSequence(Grid(0.5, 0, 0), [1.0])
        assert go.norm_lp(u, 1) == 0.5

    def test_three_four_five(self):
        u = GridSequence(Grid(1.0, 0, 1), [3.0, 4.0])
        assert go.norm_lp(u, 2) == pytest.approx(5.0, rel=1e-15)

    @pytest.mark.parametrize("p", [1, 2, math.inf])
    def test_zero(self, p):
        assert go.norm_lp(GridSequence.zeros(Grid(0.1, -5, 5)), p) == 0.0

    @pytest.mark.parametrize("p", [0.5, 3, -1])
    def test_unsupported_p(self, p):
        with pytest.raises(ValueError):
            go.norm_lp(GridSequence.zeros(Grid(1.0, 0, 1)), p)

    def test_linf(self):
        assert go.norm_linf(GridSequence(Grid(1.0, 0, 1), [-2.0, 1.0])) == 2.0

    def test_linf_sech2_peak_at_origin(self):
        u = go.restrict(lambda x: 1 / np.cosh(x) ** 2, Grid(0.3, -20, 17))
        assert go.norm_linf(u) == u[0] == 1.0


class TestConvolve:
    def test_delta_is_identity(self):
        h = 0.25
        v = GridSequence(Grid(h, -3, 4), np.arange(8.0) - 2.5)
        delta = GridSequence.delta(Grid(h, -2, 2), 0, 1 / h)
        np.testing.assert_allclose(go.convolve(delta, v).values, v.values, rtol=1e-15)

    def test_zero(self):
        v = GridSequence(Grid(1.0, 0, 4), np.ones(5))
        assert not np.any(go.convolve(GridSequence.zeros(Grid(1.0, -2, 2)), v).values)

    @pytest.mark.parametrize("method", ["direct", "fast"])
    def test_small_hand_case(self, method):
        u = GridSequence(Grid(1.0, 0, 1), [1.0, 1.0])
        r = go.convolve(u, u, method=method)
        assert r.grid == u.grid
        np.testing.assert_allclose(r.values, [1.0, 2.0], atol=1e-15)

    def test_mesh_mismatch(self):
        with pytest.raises(MeshMismatchError):
            go.convolve(GridSequence.zeros(Grid(1.0, 0, 1)), GridSequence.zeros(Grid(0.5, 0, 1)))

    @given(pairs())
    def test_direct_matches_oracle(self, uv):
        u, v = uv
        np.testing.assert_allclose(go.convolve(u, v, "direct").values, direct_conv(u, v), rtol=1e-13, atol=1e-13)

    @given(pairs())
    def test_fast_matches_direct(self, uv):
        u, v = uv
        scale = go.norm_lp(u, 1) * max(go.norm_linf(v), 1e-300)
        diff = np.abs(go.convolve(u, v, "fast").values - go.convolve(u, v, "direct").values)
        assert diff.max(initial=0) <= 1e-12 * scale + 1e-300

    @given(pairs(), st.sampled_from([1, 2]))
    def test_young_lp(self, uv, p):
        u, v = uv
        lhs = go.norm_lp(go.convolve(u, v, "direct"), p)
        assert lhs <= go.norm_lp(u, 1) * go.norm_lp(v, p) * (1 + 8 * EPS) + 1e-300

    @given(pairs())
    def test_young_linf(self, uv):
        u, v = uv
        lhs = go.norm_linf(go.convolve(u, v, "direct"))
        assert lhs <= go.norm_lp(u, 1) * go.norm_linf(v) * (1 + 8 * EPS) + 1e-300

    @given(pairs(), st.sampled_from(["forward", "backward"]))
    def test_commutes_with_differences(self, uv, which):
        u, v = uv
        D = go.diff_forward if which == "forward" else go.diff_backward
        # embed v with a zero margin so that every term sits inside the index range
        big = Grid(v.h, v.grid.i_min - u.grid.size - 3, v.grid.i_max + u.grid.size + 3)
        vb = v.on(big)
        a = D(go.convolve(u, vb, "direct")).values
        b = go.convolve(D(u.on(Grid(u.h, u.grid.i_min - 2, u.grid.i_max + 2))), vb, "direct").values
        c = go.convolve(u, D(vb), "direct").values
        inner = slice(2, -2)
        scale = go.norm_lp(u, 1) * go.norm_linf(v) / v.h + 1e-300
        assert np.max(np.abs(a - b)[inner], initial=0) <= 1e-12 * scale
        assert np.max(np.abs(a - c)[inner], initial=0) <= 1e-12 * scale


class TestDifferences:
    def test_linear_exact(self):
        u = go.restrict(lambda x: x, Grid(0.1, -10, 10))
        np.testing.assert_allclose(go.diff_forward(u).values[:-1], 1.0, rtol=1e-12)
        np.testing.assert_allclose(go.diff_backward(u).values[1:], 1.0, rtol=1e-12)

    def test_constant(self):
        u = GridSequence(Grid(0.2, 0, 9), np.full(10, 3.7))
        assert not np.any(go.diff_forward(u).values[:-1])
        assert not np.any(go.diff_second(u).values[1:-1])

    def test_square_forward_at_zero(self):
        u = go.restrict(lambda x: x * x, Grid(0.1, -5, 5))
        assert go.diff_forward(u)[0] == pytest.approx(0.1, rel=1e-12)

    @pytest.mark.parametrize("h", [0.5, 0.1, 0.03])
    def test_second_on_quadratic(self, h):
        u = go.restrict(lambda x: x * x, Grid(h, -20, 20))
        np.testing.assert_allclose(go.diff_second(u).values[1:-1], 2.0, rtol=1e-8)

    def test_second_on_quartic(self):
        u = go.restrict(lambda x: x ** 4, Grid(0.5, -3, 3))
        assert go.diff_second(u)[0] == pytest.approx(0.5, rel=1e-15)

    def test_second_on_linear(self):
        u = GridSequence(Grid(1.0, 0, 9), 2.0 * np.arange(10) - 1)
        assert not np.any(go.diff_second(u).values[1:-1])

    @given(sequences(min_size=3))
    def test_second_is_composition(self, u):
        s = go.diff_second(u).values
        fb = go.diff_forward(go.diff_backward(u)).values
        bf = go.diff_backward(go.diff_forward(u)).values
        np.testing.assert_array_equal(s[1:-1], fb[1:-1])
        np.testing.assert_array_equal(s[1:-1], bf[1:-1])

    @given(pairs())
    def test_summation_by_parts(self, uv):
        u, v = uv
        # compact support strictly inside a common range
        lo = min(u.grid.i_min, v.grid.i_min) - 2
        hi = max(u.grid.i_max, v.grid.i_max) + 2
        g = Grid(u.h, lo, hi)
        U, V = u.on(g), v.on(g)
        lhs = go.inner(go.diff_forward(U), V)
        rhs = -go.inner(U, go.diff_backward(V))
        scale = (np.abs(U.values).sum() * np.abs(V.values).sum() + 1.0)
        assert abs(lhs - rhs) <= 1e-12 * scale


class TestRestrictExtend:
    def test_restrict_identity(self):
        np.testing.assert_array_equal(go.restrict(lambda x: x, Grid(1.0, -1, 1)).values, [-1, 0, 1])

    def test_restrict_kernel(self):
        u = go.restrict(lambda x: 0.5 * np.exp(-np.abs(x)), Grid(0.1, -3, 3))
        assert u[0] == 0.5

    def test_p0_nodal_and_support(self):
        u = GridSequence(Grid(0.5, -2, 2), [1.0, 2.0, 3.0, 4.0, 5.0])
        P0 = go.extend_p0(u)
        np.testing.assert_array_equal(P0(u.x), u.values)
        assert P0(np.array([-1.01]))[0] == 0.0
        assert P0(np.array([1.2]))[0] == 5.0
        assert P0(np.array([1.5]))[0] == 0.0

    def test_p1_reproduces_linear(self):
        g = Grid(0.25, -8, 8)
        P1 = go.extend_p1(go.restrict(lambda x: 3 * x - 1, g))
        x = np.linspace(g.x[0], g.x[-1], 301)
        np.testing.assert_allclose(P1(x), 3 * x - 1, atol=1e-13)

    def test_p1_bound_gaussian_l2(self):
        from nlwave.lemmas import extension_errors, gaussian
        _, _, e1, b1 = extension_errors(gaussian(), 0.1, 2)
        assert e1 <= b1


class TestQuadrature:
    def test_gaussian(self):
        g = Grid.symmetric(0.1, 80)
        f = lambda x: np.exp(-x * x)
        d2 = go.lp_norm_function(lambda x: np.abs((4 * x * x - 2) * np.exp(-x * x)), 1, -8, 8, 0.001)
        q = go.quadrature_error_bound_check(f, g, second_variation=d2)
        assert not q.violated
        assert q.error <= 0.01 * d2

    def test_zero(self):
        q = go.quadrature_error_bound_check(lambda x: 0 * x, Grid(0.1, -5, 5), integral=0.0, df_l1=0.0)
        assert q.error == 0.0 and not q.violated

    def test_sech2_kernel(self):
        from nlwave.kernels import kernel_sech2
        k = kernel_sech2()
        g = Grid.symmetric(0.2, 300)
        q = go.quadrature_error_bound_check(k, g, integral=1.0, second_variation=k.tv_mass,
                                            tail=k.tail_mass(60.0))
        assert q.riemann_sum == pytest.approx(1.0, abs=0.04 * k.tv_mass)
        assert not q.violated
