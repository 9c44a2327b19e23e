from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fraclab.grid import GridFunction, build_grid, build_radial_grid
from fraclab.operators import (
    MAXIMAL_MODES,
    cz_stopping_cubes,
    dyadic_model_operator,
    fractional_maximal,
    riesz_at_points,
    riesz_potential,
    truncate,
    weighted_centered_fractional_maximal,
)

# frozen from an independent pure-Python evaluation of the model sum
MODEL_HALF_LINE = [
    4.121320343559643,
    4.621320343559643,
    4.621320343559643,
    4.121320343559643,
    2.914213562373095,
    2.414213562373095,
    1.7071067811865475,
    1.7071067811865475,
]

nonneg_1d = arrays(np.float64, 32, elements=st.floats(0.0, 10.0))


def indicator(grid, lo, hi):
    x = grid.centers
    return GridFunction(grid, ((x > lo) & (x < hi)).astype(float))


# {{{ Riesz potential


def test_riesz_indicator_at_point_oracle():
    g = build_grid(1, 2.0, 4096)
    val = riesz_at_points(indicator(g, 0.0, 1.0), 0.5, [2.0])[0]
    assert val == pytest.approx(2 * (math.sqrt(2) - 1), abs=2e-3)
    assert val == pytest.approx(2 * (math.sqrt(2) - 1), rel=1e-12)


def test_riesz_midpoint_matches_closed_form_off_support():
    g = build_grid(1, 2.0, 4096)
    If = riesz_potential(indicator(g, 0.0, 1.0), 0.5).values
    x = g.centers
    sel = (x > 1.2) & (x < 2.0)
    exact = 2 * (np.sqrt(x[sel]) - np.sqrt(x[sel] - 1))
    np.testing.assert_allclose(If[sel], exact, atol=2e-3)


def test_riesz_radial_grid_power_input():
    # I_{1/2} of |x|^{-1/4} on [-1, 1] at the origin is 2 int_0^1 t^{-3/4} dt = 8
    g = build_radial_grid(1e-14, 1.0, 800)
    with np.errstate(divide="ignore"):
        vals = np.abs(g.centers) ** -0.25
    from fraclab.grid import power_cell_averages

    vals[g.shells] = power_cell_averages(g, -0.25).values[g.shells]
    f = GridFunction(g, vals)
    assert riesz_at_points(f, 0.5, [0.0])[0] == pytest.approx(8.0, rel=1e-3)


def test_riesz_2d_constant_disc_center():
    # I_1 of chi_[-1,1]^2 at the origin is int |x|^{-1} over the square = 8 asinh(1)
    g = build_grid(2, 1.0, 64)
    f = GridFunction(g, np.ones(g.shape))
    If = riesz_potential(f, 1.0).values
    c = If[31:33, 31:33]
    assert np.all(np.abs(c / (8 * np.arcsinh(1.0)) - 1) < 0.02)


def test_riesz_rejects_bad_alpha():
    g = build_grid(1, 1.0, 8)
    with pytest.raises(ValueError, match="exponent out of range"):
        riesz_potential(GridFunction.constant(g), 1.0)


@settings(max_examples=30, deadline=None)
@given(f=nonneg_1d, h=nonneg_1d, s=st.floats(-3, 3))
def test_riesz_linear(f, h, s):
    g = build_grid(1, 1.0, 32)
    lhs = riesz_potential(GridFunction(g, f + s * h), 0.5).values
    rhs = riesz_potential(GridFunction(g, f), 0.5).values + s * riesz_potential(GridFunction(g, h), 0.5).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(rhs).max()))


@settings(max_examples=30, deadline=None)
@given(f=nonneg_1d, alpha=st.floats(0.05, 0.95))
def test_riesz_positive(f, alpha):
    g = build_grid(1, 1.0, 32)
    assert np.all(riesz_potential(GridFunction(g, f), alpha).values >= 0)


@pytest.mark.parametrize("lam", [0.5, 2.0, 8.0])
def test_riesz_dilation_covariance(lam):
    # f(lam x) sampled on the grid scaled by 1/lam carries the same values
    rng = np.random.default_rng(1)
    vals = rng.random(512)
    a = 0.3
    big = riesz_potential(GridFunction(build_grid(1, 1.0, 512), vals), a).values
    small = riesz_potential(GridFunction(build_grid(1, 1.0 / lam, 512), vals), a).values
    np.testing.assert_allclose(small, lam**-a * big, rtol=1e-2)


# }}}


# {{{ maximal functions


def test_maximal_indicator_at_origin():
    g = build_grid(1, 2.0, 256)
    M = fractional_maximal(indicator(g, -1.0, 1.0), 0.5).values
    assert M[127] == pytest.approx(math.sqrt(2), abs=2e-3)
    assert M[128] == pytest.approx(math.sqrt(2), abs=2e-3)


@pytest.mark.parametrize("mode", MAXIMAL_MODES)
@pytest.mark.parametrize("dim", [1, 2])
def test_maximal_of_constant_is_constant(mode, dim):
    g = build_grid(dim, 1.0, 16)
    M = fractional_maximal(GridFunction.constant(g), 0.0, mode).values
    np.testing.assert_allclose(M, 1.0, rtol=1e-12)


def test_maximal_unknown_mode():
    with pytest.raises(ValueError, match="unknown maximal mode"):
        fractional_maximal(GridFunction.constant(build_grid(1, 1.0, 4)), 0.0, "sideways")


@settings(max_examples=25, deadline=None)
@given(f=nonneg_1d, h=nonneg_1d, alpha=st.floats(0.0, 0.9))
def test_maximal_monotone_and_ordered(f, h, alpha):
    g = build_grid(1, 1.0, 32)
    F, G = GridFunction(g, f), GridFunction(g, f + h)
    unc = fractional_maximal(F, alpha).values
    assert np.all(unc <= fractional_maximal(G, alpha).values * (1 + 1e-12) + 1e-300)
    # centered and dyadic regions are among the intervals containing the cell
    for mode in ("centered-cube", "dyadic"):
        assert np.all(fractional_maximal(F, alpha, mode).values <= unc * (1 + 1e-12) + 1e-300)


@settings(max_examples=25, deadline=None)
@given(lo=st.integers(0, 31), width=st.integers(1, 32), mode=st.sampled_from(MAXIMAL_MODES))
def test_maximal_of_indicator_in_unit_interval(lo, width, mode):
    g = build_grid(1, 1.0, 32)
    v = np.zeros(32)
    v[lo : lo + width] = 1.0
    M = fractional_maximal(GridFunction(g, v), 0.0, mode).values
    assert np.all((M >= 0) & (M <= 1 + 1e-12))


def test_centered_maximal_unit_measure_is_plain_centered():
    rng = np.random.default_rng(4)
    g = build_grid(1, 1.0, 64)
    f = GridFunction(g, rng.random(64))
    a = weighted_centered_fractional_maximal(f, 0.5, GridFunction.constant(g)).values
    b = fractional_maximal(f, 0.5, "centered-cube").values
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_centered_maximal_skips_empty_measure():
    g = build_grid(1, 1.0, 8)
    nu = np.zeros(8)
    nu[5] = 2.0
    f = GridFunction(g, np.arange(8.0))
    M = weighted_centered_fractional_maximal(f, 0.0, GridFunction(g, nu)).values
    # every centered set that carries mass sees only cell 5
    np.testing.assert_allclose(M[M > 0], 5.0)
    with pytest.raises(ValueError, match="measure vanishes"):
        weighted_centered_fractional_maximal(f, 0.0, GridFunction(g, np.zeros(8)))


def test_maximal_dominated_by_riesz():
    rng = np.random.default_rng(6)
    g = build_grid(1, 1.0, 2048)
    f = GridFunction(g, rng.random(2048) * (rng.random(2048) < 0.2))
    M = fractional_maximal(f, 0.5).values
    If = riesz_potential(f, 0.5).values
    pos = M > 0
    assert np.max(M[pos] / If[pos]) <= 1.02


# }}}


# {{{ dyadic model operator


def test_model_operator_half_line_oracle():
    g = build_grid(1, 1.0, 8)
    S = dyadic_model_operator(indicator(g, -2.0, 0.0), 0.5).values
    np.testing.assert_allclose(S, MODEL_HALF_LINE, rtol=1e-13)


def test_model_operator_rejects_signed():
    g = build_grid(1, 1.0, 8)
    with pytest.raises(ValueError):
        dyadic_model_operator(GridFunction(g, np.linspace(-1, 1, 8)), 0.5)


@settings(max_examples=25, deadline=None)
@given(f=nonneg_1d, h=nonneg_1d)
def test_model_operator_monotone(f, h):
    g = build_grid(1, 1.0, 32)
    a = dyadic_model_operator(GridFunction(g, f), 0.5).values
    b = dyadic_model_operator(GridFunction(g, f + h), 0.5).values
    assert np.all(a <= b * (1 + 1e-12) + 1e-300)


def test_model_operator_2d_positive():
    g = build_grid(2, 1.0, 16)
    f = GridFunction(g, np.random.default_rng(2).random(g.shape))
    assert np.all(dyadic_model_operator(f, 1.0).values > 0)


# }}}


# {{{ stopping cubes


def test_cz_hand_example():
    g = build_grid(1, 1.0, 8)
    v = np.zeros(8)
    v[7] = 8.0
    sel = cz_stopping_cubes(GridFunction(g, v), 3.0)
    assert sel.levels == [0, 1]
    assert [(int(lo[0]), int(hi[0])) for lo, hi in sel.boxes[0]] == [(4, 8)]
    assert [(int(lo[0]), int(hi[0])) for lo, hi in sel.boxes[1]] == [(6, 8)]
    assert sel.exceptional_sets[(0, 0)].tolist() == [4, 5]
    assert sel.exceptional_sets[(1, 0)].tolist() == [6, 7]
    assert all(sel.verify().values())
    cube = sel.stopping_cubes[1][0]
    assert cube.center == pytest.approx((0.75,)) and cube.side == pytest.approx(0.5)


def test_cz_constant_function_has_no_levels():
    g = build_grid(1, 1.0, 16)
    sel = cz_stopping_cubes(GridFunction.constant(g), 3.0)
    assert sel.levels == []
    assert all(sel.verify().values())


def test_cz_errors():
    g = build_grid(2, 1.0, 8)
    with pytest.raises(ValueError, match="base ratio"):
        cz_stopping_cubes(GridFunction.constant(g), 4.0)
    with pytest.raises(ValueError):
        cz_stopping_cubes(GridFunction(g, np.zeros(g.shape)), 5.0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.sampled_from([1, 2]), mult=st.sampled_from([3.0, 5.0]))
def test_cz_properties_random(seed, dim, mult):
    g = build_grid(dim, 1.0, 64 if dim == 1 else 16)
    rng = np.random.default_rng(seed)
    sel = cz_stopping_cubes(GridFunction(g, np.exp(rng.normal(0, 2, g.shape))), mult * 2**dim)
    assert all(sel.verify().values())


# }}}


# {{{ truncation


def test_truncate_example():
    g = build_grid(1, 1.0, 5)
    t = truncate(GridFunction(g, np.array([0.0, 0.5, 1.0, 1.5, 3.0])), 1.0).values
    np.testing.assert_allclose(t, [0.0, 0.0, 0.0, 0.5, 1.0])


def test_truncate_errors():
    g = build_grid(1, 1.0, 2)
    with pytest.raises(ValueError):
        truncate(GridFunction(g, np.array([1.0, -1.0])), 1.0)
    with pytest.raises(ValueError):
        truncate(GridFunction(g, np.ones(2)), 0.0)


@settings(max_examples=40, deadline=None)
@given(a=nonneg_1d, b=nonneg_1d, lam=st.floats(0.01, 5.0))
def test_truncate_band_and_lipschitz(a, b, lam):
    g = build_grid(1, 1.0, 32)
    ta = truncate(GridFunction(g, a), lam).values
    tb = truncate(GridFunction(g, b), lam).values
    assert np.all((ta >= 0) & (ta <= lam * (1 + 1e-15)))
    assert np.all(ta[a <= lam] == 0)
    np.testing.assert_allclose(ta[a >= 2 * lam], lam)
    assert np.all(np.abs(ta - tb) <= np.abs(a - b) + 1e-12)


@settings(max_examples=40, deadline=None)
@given(a=arrays(np.float64, 32, elements=st.floats(0.0, 1000.0)))
def test_truncations_telescope(a):
    g = build_grid(1, 1.0, 32)
    f = GridFunction(g, a)
    total = sum(truncate(f, 2.0**k).values for k in range(-20, 11))
    np.testing.assert_allclose(total, np.minimum(a, 2.0**11) - np.minimum(a, 2.0**-20), atol=1e-9)


# }}}
