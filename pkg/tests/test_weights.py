from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraclab.grid import Cube, GridFunction, build_grid, enumerate_cubes, explicit_family
from fraclab.norms import fit_exponent
from fraclab.operators import riesz_matrix
from fraclab.weights import (
    ExponentTriple,
    Weight,
    a1q_constant,
    ap_constant,
    apq_constant,
    duality_identities,
    global_testing_constant,
    power_a1q_analytic,
    power_apq_analytic,
    power_family,
    reverse_doubling_report,
    sawyer_testing_constant,
    subset_ratio_check,
)

E1 = ExponentTriple(1, 4 / 3, 4.0, 0.5)
SWEEP = (0.4, 0.2, 0.1, 0.05)

# frozen from the mpmath oracle (exact power integrals, ternary search over the offset)
APQ_ALL_DELTA_01 = 8.48538767317078743
APQ_ALL_DELTA_01_OFFSET = 0.47911659026410510
# sup over all intervals of avg |x|^{-0.9} / inf |x|^{-0.9} (mpmath, ternary search)
A1_ALL_DELTA_01 = 16.5873644058133660


def w_delta(d, e=E1):
    return Weight.power((e.n - d) / e.p_dual)


def random_weight(grid, seed):
    rng = np.random.default_rng(seed)
    return Weight.sampled(GridFunction(grid, np.exp(rng.normal(0, 1.5, grid.shape))))


# {{{ exponents


def test_exponent_triple_derived():
    assert E1.p_dual == pytest.approx(4.0)
    assert E1.q_dual == pytest.approx(4 / 3)
    assert E1.r == pytest.approx(2.0)
    d = E1.dual_pair()
    assert (d.p, d.q) == pytest.approx((4 / 3, 4.0))


def test_exponent_triple_rejects_inconsistent():
    with pytest.raises(ValueError):
        ExponentTriple(1, 2.0, 3.0, 0.5)
    with pytest.raises(ValueError):
        ExponentTriple(1, 2.0, 1.5, 0.0)


# }}}


# {{{ constants


@pytest.mark.parametrize("kind", ["dyadic", "thirds"])
def test_constants_of_unit_weight(kind):
    fam = enumerate_cubes(build_grid(1, 1.0, 32), kind)
    w = Weight.ones()
    assert apq_constant(w, E1, fam).value == pytest.approx(1.0, rel=1e-14)
    assert ap_constant(w, 3.0, fam).value == pytest.approx(1.0, rel=1e-14)
    assert a1q_constant(w, 2.0, fam).value == pytest.approx(1.0, rel=1e-14)


def test_apq_single_cube_product():
    # two cells with avg w^4 = 2 and avg w^{-4} = 3, so q/p' = 1 gives 6
    b = 2 + math.sqrt(4 - 2 / 3)
    a = 4 - b
    g = build_grid(1, 1.0, 2)
    w = Weight.sampled(GridFunction(g, np.array([a, b]) ** 0.25))
    fam = explicit_family([Cube((0.0,), 2.0)], g)
    assert apq_constant(w, E1, fam).value == pytest.approx(6.0, rel=1e-12)


def test_a1q_two_cell_weight():
    g = build_grid(1, 1.0, 2)
    w = Weight.sampled(GridFunction(g, np.array([1.0, 4.0])))
    # single cells contribute 1, the whole interval 2.5
    fam = enumerate_cubes(g, "dyadic")
    assert a1q_constant(w, 1.0, fam).value == pytest.approx(2.5, rel=1e-14)


def test_weight_errors():
    g = build_grid(1, 1.0, 4)
    with pytest.raises(ValueError, match="weight must be positive"):
        Weight.sampled(GridFunction(g, np.array([1.0, 0.0, 1.0, 1.0])))
    fam = enumerate_cubes(g, "dyadic")
    with pytest.raises(ValueError, match="non-integrable"):
        apq_constant(Weight.power(-0.5), E1, fam)


def test_report_value_matches_extremal_cube():
    g = build_grid(1, 1.0, 64)
    w = random_weight(g, 3)
    fam = enumerate_cubes(g, "thirds")
    rep = apq_constant(w, E1, fam)
    one = apq_constant(w, E1, explicit_family([rep.extremal_cube], g))
    assert one.value == pytest.approx(rep.value, rel=1e-12)
    d = rep.to_dict()
    assert set(d) == {"value", "extremal_cube", "family"}
    assert set(d["extremal_cube"]) == {"center", "side"}


def test_apq_power_sweep_slope():
    vals = [power_apq_analytic((1 - d) / E1.p_dual, E1) for d in SWEEP]
    fit = fit_exponent(list(zip(SWEEP, vals)))
    assert fit.slope == pytest.approx(E1.q / E1.p_dual, abs=0.1)


def test_a1_power_sweep_slope_on_dyadic_family():
    fam = power_family("dyadic", 1)
    vals = [a1q_constant(Weight.power(d - 1), 1.0, fam).value for d in SWEEP]
    assert fit_exponent(list(zip(SWEEP, vals))).slope == pytest.approx(1.0, abs=0.1)


def test_a1_power_all_intervals_matches_oracle():
    assert power_a1q_analytic(-0.9, 1.0) == pytest.approx(A1_ALL_DELTA_01, rel=1e-8)


def test_power_apq_analytic_matches_oracle():
    val, off = power_apq_analytic(0.9 / 4, E1, return_offset=True)
    assert val == pytest.approx(APQ_ALL_DELTA_01, rel=1e-9)
    assert off[0] == pytest.approx(APQ_ALL_DELTA_01_OFFSET, abs=1e-6)


def test_power_apq_analytic_zero_exponent():
    assert power_apq_analytic(0.0, E1) == 1.0


def test_power_apq_analytic_agrees_with_grid_estimator():
    g = build_grid(1, 2.0, 512)
    grid_val = apq_constant(w_delta(0.1), E1, enumerate_cubes(g, "all-intervals")).value
    assert power_apq_analytic(0.9 / 4, E1) == pytest.approx(grid_val, rel=0.05)


@pytest.mark.parametrize("d", [0.1, 0.05])
def test_optimal_cube_contains_origin_for_small_delta(d):
    _, off = power_apq_analytic((1 - d) / 4, E1, return_offset=True)
    assert abs(off[0]) <= 0.5


def test_power_profile_is_unimodal_on_scan():
    from fraclab.weights import power_offset_profile

    t = np.linspace(0, 5, 501)
    prof = power_offset_profile(0.9 / 4, E1, t)
    k = int(np.argmax(prof))
    assert np.all(np.diff(prof[: k + 1]) >= -1e-12)
    assert np.all(np.diff(prof[k:]) <= 1e-12)


@pytest.mark.parametrize("lam", [1e-3, 0.5, 7.0, 1e4])
def test_power_constant_is_scale_free(lam):
    a = 0.9 / 4
    val, off = power_apq_analytic(a, E1, return_offset=True)
    fam = explicit_family([Cube((lam * off[0],), lam)])
    assert apq_constant(Weight.power(a), E1, fam).value == pytest.approx(val, rel=1e-8)


def test_power_apq_2d():
    e = ExponentTriple.from_alpha(2, 4 / 3, 0.5)
    a = (2 - 0.2) / e.p_dual
    val = power_apq_analytic(a, e)
    fam = power_family("thirds", 2, reach=8)
    assert val >= apq_constant(Weight.power(a), e, fam).value * (1 - 1e-9)


# }}}


# {{{ duality and reverse doubling


def test_duality_unit_weight():
    chk = duality_identities(Weight.ones(), E1, enumerate_cubes(build_grid(1, 1.0, 16), "dyadic"))
    assert (chk.lhs1, chk.rhs1, chk.lhs2, chk.rhs2) == pytest.approx((1, 1, 1, 1), rel=1e-14)


def test_duality_power_weight_dyadic():
    chk = duality_identities(Weight.power(1 / 8), E1, enumerate_cubes(build_grid(1, 1.0, 64), "dyadic"))
    assert max(chk.errors) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), sigma=st.floats(0.1, 3.0))
def test_duality_random_sampled(seed, sigma):
    g = build_grid(1, 1.0, 64)
    rng = np.random.default_rng(seed)
    w = Weight.sampled(GridFunction(g, np.exp(rng.normal(0, sigma, g.shape))))
    assert max(duality_identities(w, E1, enumerate_cubes(g, "thirds")).errors) <= 1e-10


def test_reverse_doubling_unit_weight():
    rep = reverse_doubling_report(Weight.ones(), E1, enumerate_cubes(build_grid(1, 1.0, 64), "dyadic"))
    assert rep.worst_ratio_margin == pytest.approx(0.4375, rel=1e-12)


def test_reverse_doubling_power_weight():
    rep = reverse_doubling_report(w_delta(0.2), E1, enumerate_cubes(build_grid(1, 1.0, 256), "dyadic"))
    assert rep.worst_ratio_margin >= 0


def test_subset_inequality_random():
    g = build_grid(1, 1.0, 64)
    fam = enumerate_cubes(g, "thirds")
    rng = np.random.default_rng(11)
    for t in range(100):
        w = random_weight(g, t) if t % 2 else w_delta(rng.uniform(0.05, 0.9))
        i = int(rng.integers(len(fam)))
        mask = np.zeros(g.shape, bool)
        sl = slice(fam.lo[i, 0], fam.hi[i, 0])
        mask[sl] = rng.random(mask[sl].shape) < 0.5
        mask[fam.lo[i, 0]] = True
        lhs, rhs = subset_ratio_check(w, E1, fam.lo[i], fam.hi[i], mask, g)
        assert lhs <= rhs * (1 + 1e-12)


# }}}


# {{{ testing conditions


def test_global_unit_weight_is_cube_independent():
    fam = explicit_family([Cube((c,), s) for c in (0.0, 0.3, 5.0) for s in (0.1, 1.0, 3.0)])
    rep = global_testing_constant(Weight.ones(), Weight.ones(), E1, fam)
    assert np.ptp(rep.per_cube) / rep.value < 1e-4


def test_global_dominates_inside_kernel_bound():
    g = build_grid(1, 1.0, 64)
    fam = enumerate_cubes(g, "dyadic")
    w = random_weight(g, 5)
    rep = global_testing_constant(w.pow(E1.q), w.pow(E1.p), E1, fam)
    pd = E1.p_dual
    sig = w.pow(E1.p * (1 - pd)).cell_integrals(g)
    u = w.pow(E1.q).cell_integrals(g)
    for k, Q in enumerate(fam.members):
        sl = slice(fam.lo[k, 0], fam.hi[k, 0])
        low = u[sl].sum() ** (1 / E1.q) * ((2 * Q.side) ** ((E1.alpha - 1) * pd) * sig[sl].sum()) ** (1 / pd)
        assert rep.per_cube[k] >= low * (1 - 1e-12)


def test_global_diverging_tail():
    fam = explicit_family([Cube((0.0,), 1.0)])
    with pytest.raises(ValueError, match="global integral diverges"):
        # sigma = v^{1-p'} grows too fast for the kernel decay
        global_testing_constant(Weight.ones(), Weight.power(-1.0), E1, fam)


def test_global_sampled_constant_extension_needs_negligible_tail():
    g = build_grid(1, 1.0, 32)
    fam = enumerate_cubes(g, "dyadic")
    with pytest.raises(ValueError, match="not negligible"):
        global_testing_constant(Weight.ones().pow(1.0), random_weight(g, 1), E1, fam, extension="constant")


def test_sawyer_unit_weights_nearly_cube_independent():
    g = build_grid(1, 1.0, 256)
    fam = enumerate_cubes(g, "dyadic")
    rep = sawyer_testing_constant(Weight.ones(), Weight.ones(), E1, fam)
    sides = np.array([fam.cube_at(l, h).side for l, h in zip(fam.lo, fam.hi)])
    big = rep.per_cube[sides >= 16 * g.spacing]
    assert big.max() / big.min() < 1.02


def test_sawyer_single_cube_brute_force():
    g = build_grid(1, 1.0, 32)
    w = random_weight(g, 9)
    u, sigma = w.pow(E1.q), w.pow(-E1.p_dual)
    fam = enumerate_cubes(g, "dyadic")
    k = 5
    lo, hi = fam.lo[k, 0], fam.hi[k, 0]
    one = type(fam)(fam.kind, g, fam.lo[k : k + 1], fam.hi[k : k + 1])
    rep = sawyer_testing_constant(u, sigma, E1, one)
    # brute force: the formula on that cube with an independent kernel sum
    A = riesz_matrix(g, 0.5)
    s = sigma.cell_integrals(g)
    x = g.centers
    Ig = np.array([sum(A[i, j] * s[j] / g.spacing for j in range(lo, hi)) for i in range(len(x))])
    norm = sum(Ig[i] ** 4 * u.cell_integrals(g)[i] for i in range(lo, hi)) ** 0.25
    assert rep.value == pytest.approx(s[lo:hi].sum() ** -0.75 * norm, rel=1e-12)


def test_sawyer_power_weight_finite():
    g = build_grid(1, 1.0, 128)
    w = w_delta(0.2)
    rep = sawyer_testing_constant(w.pow(E1.q), w.pow(-E1.p_dual), E1, enumerate_cubes(g, "dyadic"))
    assert math.isfinite(rep.value) and rep.value > 0


# }}}


# {{{ properties


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.floats(1.2, 4.0))
def test_per_cube_values_at_least_one(seed, p):
    g = build_grid(1, 1.0, 32)
    w = random_weight(g, seed)
    fam = enumerate_cubes(g, "dyadic")
    assert np.all(ap_constant(w, p, fam).per_cube >= 1 - 1e-12)
    assert np.all(apq_constant(w, E1, fam).per_cube >= 1 - 1e-12)
    assert np.all(a1q_constant(w, 2.0, fam).per_cube >= 1 - 1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_family_monotonicity(seed):
    g = build_grid(1, 1.0, 32)
    w = random_weight(g, seed)
    vals = [apq_constant(w, E1, enumerate_cubes(g, k)).value for k in ("dyadic", "thirds", "all-intervals")]
    assert vals[0] <= vals[1] * (1 + 1e-12) <= vals[2] * (1 + 1e-12) ** 2


@settings(max_examples=25, deadline=None)
@given(d=st.floats(0.02, 0.95))
def test_power_family_below_analytic_supremum(d):
    a = (1 - d) / E1.p_dual
    sup = power_apq_analytic(a, E1)
    for kind in ("dyadic", "thirds", "offsets"):
        assert apq_constant(Weight.power(a), E1, power_family(kind, 1)).value <= sup * (1 + 1e-9)


# }}}
