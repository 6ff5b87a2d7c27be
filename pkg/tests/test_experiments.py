"""Monte Carlo harness: config validation, screening, rates, law checks."""

import json

import numpy as np
import pytest

from poissonloc.errors import (ConfigError, DomainError, IdentifiabilityError,
                               RegimeError)
from poissonloc.experiments import (ExperimentConfig, RateReport,
                                    _require_identifiable, energy_distance,
                                    energy_permutation_test,
                                    identifiability_screen, limit_law_check,
                                    normality_check, run_rate_experiment)
from poissonloc.geometry import DetectorArray, arrival_times
from poissonloc.seeds import substream
from poissonloc.signal import FrontSpec, IntensityModel

from conftest import THETA0, default_box, five_detectors, make_model

SQUARE = DetectorArray([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])

FAST_MLE = dict(lattice=3, refine_starts=1, nm_restarts=1)


def _config(model, **kw):
    base = dict(scenario="test", array=five_detectors(), box=default_box(),
                theta0=THETA0, model=model, n_ladder=(60, 90, 130, 200),
                replications=50, master_seed=11, estimator="mle",
                estimator_options=dict(FAST_MLE))
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def smooth_model():
    return make_model(1.0, 1.0)


# -- config validation --------------------------------------------------------

def test_config_rejects_theta0_outside_open_box(smooth_model):
    box = default_box()
    on_edge = np.array(THETA0, dtype=float)
    on_edge[0] = box.lower[0]
    with pytest.raises(ConfigError, match="theta0"):
        _config(smooth_model, theta0=on_edge)


def test_config_rejects_short_ladder(smooth_model):
    with pytest.raises(ConfigError, match="n_ladder"):
        _config(smooth_model, n_ladder=(100, 200, 400))


def test_config_rejects_non_increasing_ladder(smooth_model):
    with pytest.raises(ConfigError, match="increasing"):
        _config(smooth_model, n_ladder=(100, 200, 200, 400))


def test_config_rejects_bad_ladder_values(smooth_model):
    with pytest.raises(ConfigError, match="n_ladder"):
        _config(smooth_model, n_ladder=(-5, 100, 200, 400))


def test_config_rejects_low_replication_count(smooth_model):
    with pytest.raises(ConfigError, match="replications"):
        _config(smooth_model, replications=20)


def test_config_rejects_unknown_estimator(smooth_model):
    with pytest.raises(ConfigError, match="estimator"):
        _config(smooth_model, estimator="map")


def test_config_rejects_bad_worker_count(smooth_model):
    with pytest.raises(ConfigError, match="workers"):
        _config(smooth_model, workers=0)


def test_config_rejects_model_array_size_mismatch():
    four = IntensityModel(FrontSpec(kappa=1.0, delta=0.25),
                          np.full((2, 4), 2.0), 0.5, 1.0, 2.75)
    with pytest.raises(ConfigError, match="detectors"):
        _config(four)


def test_swap_symmetry_follows_amplitude_profiles(smooth_model):
    assert _config(smooth_model).swap_symmetric()

    amps = np.full((2, 5), 2.0)
    amps[1] *= 1.5
    lopsided = IntensityModel(FrontSpec(kappa=1.0, delta=0.25),
                              amps, 0.5, 1.0, 2.75)
    assert not _config(lopsided).swap_symmetric()

    slopes = np.zeros((2, 5))
    slopes[0] = 0.1
    tilted = IntensityModel(FrontSpec(kappa=1.0, delta=0.25),
                            np.full((2, 5), 2.0), 0.5, 1.0, 2.75,
                            slopes=slopes)
    assert not _config(tilted).swap_symmetric()


# -- identifiability screen ---------------------------------------------------

def test_screen_square_corners_is_cross_with_demo():
    verdict = identifiability_screen(SQUARE, default_box())
    assert verdict.kind == "cross"
    assert not verdict.identifiable
    assert verdict.witness is not None
    assert verdict.confusable is not None

    th, th_alt = verdict.confusable
    box = default_box()
    assert box.contains(th) and box.contains(th_alt)
    assert np.linalg.norm(np.asarray(th) - np.asarray(th_alt)) > 1e-6
    # independent check that the demo pair really is indistinguishable:
    # every detector sees the same unordered pair of arrival times
    t1 = np.sort(arrival_times(SQUARE, th), axis=0)
    t2 = np.sort(arrival_times(SQUARE, th_alt), axis=0)
    assert np.max(np.abs(t1 - t2)) < 1e-9


def test_screen_generic_arrays_identifiable():
    rng = substream(2024)
    for _ in range(5):
        pts = rng.uniform(-1.5, 1.5, size=(5, 2))
        verdict = identifiability_screen(DetectorArray(pts))
        assert verdict.kind == "identifiable"
        assert verdict.witness is None


def test_screen_three_detectors_too_few():
    verdict = identifiability_screen(DetectorArray([[1.0, 0.2], [-0.5, 1.0],
                                                    [0.3, -1.1]]))
    assert verdict.kind == "too-few"
    assert "4" in verdict.note


def test_screen_collinear_four_is_cross():
    pts = np.column_stack([np.linspace(-1.5, 1.5, 4), np.zeros(4)])
    verdict = identifiability_screen(DetectorArray(pts))
    assert verdict.kind == "cross"
    assert verdict.witness is not None


def test_minimal_identifiable_array_notes_fragility():
    verdict = identifiability_screen(DetectorArray([[1.4, 0.3], [-0.2, 1.3],
                                                    [-1.2, -0.6], [0.7, -1.2]]))
    assert verdict.kind == "identifiable"
    assert "minimum" in verdict.note


def test_screen_refusal_carries_witness(smooth_model):
    four = IntensityModel(FrontSpec(kappa=1.0, delta=0.25),
                          np.full((2, 4), 2.0), 0.5, 1.0, 2.75)
    cfg = _config(four, array=SQUARE)
    with pytest.raises(IdentifiabilityError) as err:
        run_rate_experiment(cfg)
    assert err.value.witness is not None

    forced = _config(four, array=SQUARE, force=True)
    _require_identifiable(forced)  # force skips the screen entirely


# -- rate experiment ----------------------------------------------------------

@pytest.fixture(scope="module")
def smooth_rate_report(smooth_model):
    return run_rate_experiment(_config(smooth_model))


def test_smooth_rate_recovered_on_small_ladder(smooth_rate_report):
    rep = smooth_rate_report
    assert rep.regime == "smooth"
    assert rep.target == -0.5 and rep.tolerance == 0.1
    assert rep.shrinking and rep.passed
    assert -0.75 < rep.slope < -0.3
    assert rep.slope_se > 0.0
    assert rep.rmse[-1] < rep.rmse[0]
    assert rep.n_values == (60.0, 90.0, 130.0, 200.0)


def test_rate_report_validates_fields(smooth_rate_report):
    bad = dict(scenario="x", regime="smooth", n_values=(1.0, 2.0),
               rmse=(0.1, 0.0), slope=-0.5, slope_se=0.1, target=-0.5,
               tolerance=0.1, passed=False, shrinking=False)
    with pytest.raises(DomainError, match="RMSE"):
        RateReport(**bad)
    bad["rmse"] = (0.1, 0.05)
    bad["slope"] = np.nan
    with pytest.raises(DomainError, match="slope"):
        RateReport(**bad)


def test_rate_experiment_replays_bytewise_for_any_worker_count(
        smooth_model, tmp_path):
    out = {}
    for name, workers in [("a", 1), ("b", 2), ("c", 1)]:
        d = tmp_path / name
        run_rate_experiment(_config(smooth_model, workers=workers,
                                    out_dir=str(d)))
        out[name] = ((d / "results.csv").read_bytes(),
                     (d / "rates.json").read_bytes())
    assert out["a"] == out["b"]
    assert out["a"] == out["c"]


def test_results_csv_layout(smooth_model, tmp_path):
    cfg = _config(smooth_model, out_dir=str(tmp_path))
    run_rate_experiment(cfg)
    lines = (tmp_path / "results.csv").read_text().splitlines()
    assert lines[0] == "scenario,regime,n,rep,th1,th2,th3,th4,error"
    assert len(lines) == 1 + 4 * 50
    first = lines[1].split(",")
    assert first[0] == "test" and first[1] == "smooth"
    assert first[2] == "60" and first[3] == "0"
    theta_hat = np.array([float(v) for v in first[4:8]])
    # error column must equal the labeling-minimized distance to theta0
    plain = np.linalg.norm(theta_hat - THETA0)
    swapped = np.linalg.norm(np.r_[theta_hat[2:], theta_hat[:2]] - THETA0)
    assert float(first[8]) == pytest.approx(min(plain, swapped), rel=1e-12)

    parsed = json.loads((tmp_path / "rates.json").read_text())
    assert parsed["scenario"] == "test"
    assert parsed["passed"] in (True, False)
    assert len(parsed["rmse"]) == 4


def test_pure_noise_reports_rate_undefined():
    faint = IntensityModel(FrontSpec(kappa=1.0, delta=0.25),
                           np.full((2, 5), 1e-8), 0.5, 1.0, 2.75)
    rep = run_rate_experiment(_config(
        faint, estimator_options=dict(lattice=2, refine_starts=1,
                                      nm_restarts=1)))
    assert not rep.shrinking
    assert not rep.passed
    assert "undefined" in rep.note
    assert np.isfinite(rep.slope)
    assert all(r > 0 for r in rep.rmse)


# -- normality check ----------------------------------------------------------

def test_normality_check_needs_smooth_regime():
    cusp = make_model(0.25, 1.0)
    with pytest.raises(RegimeError, match="smooth"):
        normality_check(_config(cusp))


def test_normality_check_report(smooth_model, tmp_path):
    cfg = _config(smooth_model, n_ladder=(60, 90, 130, 400), replications=60,
                  master_seed=3, out_dir=str(tmp_path))
    rep = normality_check(cfg)
    assert rep["n"] == 400 and rep["replications"] == 60
    assert 0.0 < rep["cov_rel_frobenius"] < 0.8
    assert 0.6 < rep["risk_ratio"] < 1.8
    assert rep["trace_inverse"] > 0.0
    assert len(rep["skew_z"]) == 4 and len(rep["kurt_z"]) == 4
    assert all(abs(z) < 6.0 for z in rep["skew_z"])

    parsed = json.loads((tmp_path / "normality.json").read_text())
    assert list(parsed.keys()) == ["scenario", "regime", "n", "replications",
                                   "cov_rel_frobenius", "risk_ratio",
                                   "trace_inverse", "skew_z", "kurt_z"]


# -- limit-law check ----------------------------------------------------------

def test_limit_law_check_rejects_smooth_regime(smooth_model):
    with pytest.raises(RegimeError, match="cusp"):
        limit_law_check(_config(smooth_model))


def test_limit_law_check_cusp_small(tmp_path):
    cusp = make_model(0.25, 1.0)
    cfg = _config(cusp, n_ladder=(80, 160, 320, 600), replications=50,
                  estimator="be",
                  estimator_options=dict(draws=1200, lattice=3,
                                         refine_starts=1),
                  master_seed=5, out_dir=str(tmp_path))
    rep = limit_law_check(cfg, sampler_count=120, permutations=199,
                          control=True)
    assert rep["regime"] == "cusp"
    assert rep["rescaling"] == pytest.approx(600.0 ** (2.0 / 3.0))
    assert rep["control_rescaling"] == pytest.approx(np.sqrt(600.0))
    # low power at M=50 still should not reject the true law outright,
    # and must reject the deliberately wrong sqrt(n) rescaling
    assert rep["p_value"] > 0.005
    assert rep["control_p_value"] < 0.05
    assert rep["energy_distance"] > 0.0

    lines = (tmp_path / "limits.csv").read_text().splitlines()
    assert lines[0] == "kind,draw,u1,u2,u3,u4"
    kinds = [ln.split(",")[0] for ln in lines[1:]]
    assert kinds.count("rescaled_error") == 50
    assert kinds.count("sampler_draw") == 120
    assert kinds.count("control_error") == 50


# -- energy distance and permutation test -------------------------------------

def test_energy_distance_closed_forms():
    a = np.array([[0.0, 0.0, 0.0, 0.0]])
    b = np.array([[3.0, 4.0, 0.0, 0.0]])
    assert energy_distance(a, b) == pytest.approx(10.0)

    x = substream(1).normal(size=(40, 4))
    assert energy_distance(x, x) == 0.0
    assert energy_distance(x, x + 1.0) > 0.5


def test_energy_permutation_test_determinism_and_bounds():
    x = substream(2).normal(size=(60, 4))
    y = substream(3).normal(size=(60, 4))
    s1, p1 = energy_permutation_test(x, y, permutations=199, seed=9)
    s2, p2 = energy_permutation_test(x, y, permutations=199, seed=9)
    assert (s1, p1) == (s2, p2)
    assert 1.0 / 200.0 <= p1 <= 1.0
    _, p_other = energy_permutation_test(x, y, permutations=199, seed=10)
    assert 1.0 / 200.0 <= p_other <= 1.0

    with pytest.raises(DomainError, match="2 points"):
        energy_permutation_test(x[:1], y, permutations=19)
    with pytest.raises(DomainError, match="permutations"):
        energy_permutation_test(x, y, permutations=0)


def test_same_law_split_calibration():
    # null calibration: splitting one sample in half must look like one law
    pool = substream(7).normal(size=(600, 4))
    hits = 0
    for r in range(100):
        order = substream(100, r).permutation(600)
        _, p = energy_permutation_test(pool[order[:300]], pool[order[300:]],
                                       permutations=199, seed=r)
        hits += p > 0.01
    assert hits >= 95


def test_shifted_law_rejected():
    x = substream(4).normal(size=(150, 4))
    y = substream(5).normal(size=(150, 4)) + 0.8
    _, p = energy_permutation_test(x, y, permutations=199, seed=1)
    assert p == pytest.approx(1.0 / 200.0)
