from __future__ import annotations

import json

import numpy as np
import pytest

from fraclab.experiments import (
    DEFAULT_DELTAS,
    SUITE_CHECKS,
    ExperimentConfig,
    GridSpec,
    hat_samples,
    run_experiment,
    run_identity_suite,
    special_exponents,
    truncation_chain,
    weight_constant,
)
from fraclab.grid import GridFunction, build_grid, enumerate_cubes
from fraclab.weights import (
    ExponentTriple,
    Weight,
    duality_identities,
    power_a1q_analytic,
    power_apq_analytic,
    reverse_doubling_report,
)


# {{{ special exponents


@pytest.mark.parametrize(
    "alpha, n, expected",
    [(0.5, 1, (1.2, 3.0)), (1.0, 2, (1.2, 3.0)), (1 / 3, 1, (15 / 11, 2.5))],
)
def test_special_exponents_examples(alpha, n, expected):
    assert special_exponents(alpha, n) == pytest.approx(expected, rel=1e-14)


def test_special_exponents_small_alpha_limit():
    assert special_exponents(1e-9) == pytest.approx((2.0, 2.0), abs=1e-8)


@pytest.mark.parametrize("alpha, n", [(0.0, 1), (1.0, 1), (-0.2, 2), (2.5, 2)])
def test_special_exponents_out_of_range(alpha, n):
    with pytest.raises(ValueError, match="exponent out of range"):
        special_exponents(alpha, n)


# }}}


# {{{ configuration


def test_config_defaults_and_derived_q():
    cfg = ExperimentConfig()
    assert cfg.deltas == DEFAULT_DELTAS
    assert cfg.q == pytest.approx(4.0)
    assert cfg.triple == ExponentTriple(1, 4 / 3, cfg.q, 0.5)


def test_config_weak_sweep_sits_lower():
    assert ExperimentConfig(experiment="weak").deltas == (0.1, 0.05, 0.025, 0.0125)
    assert ExperimentConfig(experiment="weak", deltas=[0.3, 0.2, 0.1]).deltas == (0.3, 0.2, 0.1)


@pytest.mark.parametrize(
    "over, msg",
    [
        ({"experiment": "nope"}, "unknown experiment"),
        ({"family": "hexagons"}, "unknown family"),
        ({"deltas": [0.5, 1.0, 0.2]}, r"\(0, 1\)"),
        ({"colour": "red"}, "unknown config keys"),
    ],
)
def test_config_errors(over, msg):
    with pytest.raises(ValueError, match=msg):
        ExperimentConfig.from_dict(over)


def test_config_round_trip_and_tolerance_merge(tmp_path):
    cfg = ExperimentConfig.from_dict({"experiment": "global", "tolerances": {"slope": 0.2}, "grid": {"shells": 100}})
    assert cfg.tolerances["slope"] == 0.2 and cfg.tolerances["r2"] == 0.98
    assert isinstance(cfg.grid, GridSpec) and cfg.grid.shells == 100
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.from_json(path).to_dict() == cfg.to_dict()


def test_degenerate_sweep_rejected():
    with pytest.raises(ValueError, match="at least 3"):
        run_experiment(ExperimentConfig(experiment="global", deltas=(0.4, 0.2)))


def test_insufficient_radial_resolution():
    cfg = ExperimentConfig(experiment="maximal", grid=GridSpec(r_min=0.5, shells=50))
    with pytest.raises(ValueError, match="insufficient radial resolution"):
        run_experiment(cfg)


@pytest.mark.parametrize(
    "over, msg",
    [
        ({"experiment": "buckley", "alpha": 0.5}, "alpha = 0"),
        ({"experiment": "sobolev", "n": 1}, "dim 2"),
        ({"experiment": "sobolev", "n": 2, "p": 4 / 3, "q": 3.0, "alpha": 0.5}, "1/p - 1/q = 1/n"),
        ({"experiment": "maximal", "n": 2, "alpha": 0.5}, "dim 1"),
    ],
)
def test_runner_preconditions(over, msg):
    with pytest.raises(ValueError, match=msg):
        run_experiment(ExperimentConfig.from_dict(over))


# }}}


# {{{ weight constants of the sweeps


def test_weight_constant_all_matches_analytic():
    e = ExponentTriple(1, 4 / 3, 4.0, 0.5)
    w = Weight.power(0.9 / 4)
    assert weight_constant(w, e, "all") == pytest.approx(power_apq_analytic(0.9 / 4, e))
    assert weight_constant(Weight.power(-0.9), ExponentTriple(1, 1.0, 1.0, 0.0), "all", "a1q") == pytest.approx(
        power_a1q_analytic(-0.9, 1.0)
    )


def test_weight_constant_ap_is_apq_of_root():
    # [w]_{A_p} = [w^{1/p}]_{A_{p,p}}, compared on a grid family
    e = ExponentTriple(1, 2.0, 2.0, 0.0)
    w = Weight.power(0.6)
    from fraclab.weights import ap_constant, apq_constant, power_family

    fam = power_family("thirds", 1)
    assert weight_constant(w, e, "thirds", "ap") == pytest.approx(ap_constant(w, 2.0, fam).value)
    assert ap_constant(w, 2.0, fam).value == pytest.approx(apq_constant(w.pow(0.5), e, fam).value, rel=1e-12)


@pytest.mark.parametrize("family", ["dyadic", "thirds", "offsets"])
def test_grid_families_stay_below_all_cubes(family):
    e = ExponentTriple(1, 4 / 3, 4.0, 0.5)
    for d in (0.4, 0.05):
        w = Weight.power((1 - d) / 4)
        assert weight_constant(w, e, family) <= weight_constant(w, e, "all") * (1 + 1e-9)


# }}}


# {{{ Sobolev pieces


def test_unit_hat_gradient_mass():
    g = build_grid(2, 2.0, 256)
    _, grad = hat_samples(g, (0.0, 0.0), 1.0)
    assert np.sum(grad) * g.spacing**2 == pytest.approx(np.pi, rel=5e-3)


def test_unit_hat_unweighted_norms():
    # ||f||_2 of the unit hat is sqrt(pi/6)
    g = build_grid(2, 2.0, 256)
    vals, _ = hat_samples(g, (0.0, 0.0), 1.0)
    assert np.sqrt(np.sum(vals**2) * g.spacing**2) == pytest.approx(np.sqrt(np.pi / 6), rel=1e-3)


@pytest.mark.parametrize("p, q", [(1.0, 2.0), (8 / 7, 8 / 3)])
def test_truncation_chain_on_hats(p, q):
    g = build_grid(2, 2.0, 64)
    u = Weight.power(-0.5).cell_integrals(g)
    for c, r in [((0.0, 0.0), 1.0), ((0.5, 0.5), 0.25)]:
        vals, _ = hat_samples(g, c, r)
        ch = truncation_chain(GridFunction(g, vals), u, p, q)
        assert ch["inclusion"]
        assert ch["band"] * ch["constant"] >= ch["lhs"]


# }}}


# {{{ identity suite


def test_unit_weight_identities_exact_and_margins_positive():
    e = ExponentTriple(1, 4 / 3, 4.0, 0.5)
    fam = enumerate_cubes(build_grid(1, 1.0, 64), "thirds")
    assert max(duality_identities(Weight.ones(), e, fam).errors) <= 1e-14
    assert reverse_doubling_report(Weight.ones(), e, fam).worst_ratio_margin > 0


def test_identity_suite_subset_runs_and_reports():
    cfg = ExperimentConfig(experiment="identities", seed=3)
    rep = run_identity_suite(cfg, ("duality", "cz"))
    assert rep.passed
    assert set(rep.details) == {"duality", "cz"}
    assert rep.to_csv().startswith("check,passed,value,bound\n")
    assert json.loads(rep.to_json())["metadata"]["suite"] == ["duality", "cz"]


def test_identity_suite_unknown_check():
    with pytest.raises(ValueError, match="unknown suite checks"):
        run_identity_suite(ExperimentConfig(experiment="identities"), ("telepathy",))


def test_identity_sections_reproducible_and_seeded():
    a = run_identity_suite(ExperimentConfig(experiment="identities", seed=5), ("duality",))
    b = run_identity_suite(ExperimentConfig(experiment="identities", seed=5), ("duality",))
    c = run_identity_suite(ExperimentConfig(experiment="identities", seed=6), ("duality",))
    assert a.to_json() == b.to_json()
    assert a.details != c.details


def test_identity_section_stream_does_not_depend_on_selection():
    cfg = ExperimentConfig(experiment="identities", seed=2)
    alone = run_identity_suite(cfg, ("cz",)).details["cz"]
    after = run_identity_suite(cfg, ("subset", "cz")).details["cz"]
    assert alone == after
    assert SUITE_CHECKS.index("cz") == 5


# }}}


# {{{ reports


def test_report_reproducible_bytes():
    cfg = ExperimentConfig(experiment="global")
    a, b = run_experiment(cfg), run_experiment(cfg)
    assert a.to_json(sort_keys=True) == b.to_json(sort_keys=True)
    assert a.to_csv() == b.to_csv()
    assert a.runtime_s is not None and "runtime" not in a.to_json()


def test_report_metadata_records_config():
    rep = run_experiment(ExperimentConfig(experiment="global", seed=11))
    meta = rep.to_dict()["metadata"]
    assert meta["seed"] == 11 and meta["config"]["experiment"] == "global"
    assert meta["family"] == "all" and "version" in meta


def test_buckley_unweighted_control_has_no_growth():
    rep = run_experiment(ExperimentConfig(experiment="buckley", p=2.0, alpha=0.0))
    ctrl = rep.columns["control"]
    assert max(ctrl) / min(ctrl) <= 1 + 1e-12


# }}}
