import csv
from dataclasses import replace

import numpy as np
import pytest

from risdoa import bench
from risdoa.anm import AdmmConfig
from risdoa.bench import (
    ConfigError,
    ExperimentSpec,
    TrialResult,
    aggregate_rmse,
    build_spec,
    clipped_errors,
    format_config,
    parse_config,
    preset_spec,
    run_experiment,
    run_trial,
)
from risdoa.music import MusicConfig
from risdoa.scene import RisProfile, SceneConfig

from conftest import DEFAULT_DOAS


def _result(errors, time_s=0.1):
    errors = np.asarray(errors, float)
    return TrialResult(0.0, 0, np.zeros(errors.size), np.zeros(errors.size), errors,
                       float(np.sqrt(np.mean(errors**2))), time_s, 10, True, 1.0)


def test_aggregate_examples():
    assert aggregate_rmse([_result([0, 0, 0])])["rmse_deg"] == 0.0
    assert aggregate_rmse([_result([3, 4])])["rmse_deg"] == pytest.approx(np.sqrt(12.5))
    agg = aggregate_rmse([_result([1.0, 2.0]), _result([3.0, 0.0])])
    assert agg["rmse_deg"] == pytest.approx(np.sqrt((1 + 4 + 9) / 4))
    assert agg["n_trials"] == 2
    with pytest.raises(ValueError):
        aggregate_rmse([])


def test_single_trial_aggregate_is_the_trial():
    r = _result([0.5, 1.5, 0.25], time_s=0.3)
    agg = aggregate_rmse([r])
    assert agg["rmse_deg"] == pytest.approx(r.rmse_deg)
    assert agg["std_rmse_deg"] == 0.0
    assert agg["mean_time_s"] == 0.3


def test_clipping():
    err = clipped_errors([0.0, 10.0], [7.0, 11.0], 4.0)
    np.testing.assert_allclose(err, [4.0, 1.0])
    assert np.sum(err**2) == pytest.approx(17.0)  # 16 from the clipped error, not 49
    np.testing.assert_allclose(clipped_errors([0.0], [7.0], None), [7.0])


def test_sorted_pairing():
    np.testing.assert_allclose(clipped_errors([30.0, -10.0], [-9.0, 31.0], 4.0), [1.0, 1.0])


def test_presets_match_quoted_grids():
    assert preset_spec("snr_sweep").sweep_values == (-6, -3, 0, 3, 6, 9, 12)
    assert preset_spec("ris_sweep").sweep_values == (12, 15, 18, 21, 24, 27, 30)
    assert preset_spec("measurement_sweep").sweep_values == (20, 23, 26, 29, 32, 35, 38)
    assert preset_spec("cpu_time").sweep_values == (12, 15, 18, 21, 24, 27, 30)
    assert preset_spec("cpu_time").base.num_slots == 36
    ris = preset_spec("ris_sweep")
    assert (ris.base.num_slots, ris.base.snr_db) == (32, 3.0)
    meas = preset_spec("measurement_sweep")
    assert (meas.base.num_ris, meas.base.snr_db) == (16, 3.0)
    for name in bench.PRESETS:
        spec = preset_spec(name)
        assert spec.base.num_antennas == 4
        assert spec.base.source_doas == DEFAULT_DOAS
        assert spec.trials == 100 and spec.clip_deg == 4.0
        for v in spec.sweep_values:
            spec.scene_at(v)
    with pytest.raises(ValueError):
        preset_spec("nope")


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(trials=0)
    with pytest.raises(ValueError):
        ExperimentSpec(sweep_values=())
    with pytest.raises(ValueError):
        ExperimentSpec(sweep_param="wavelength")
    with pytest.raises(ValueError, match="K < N"):
        preset_spec("ris_sweep", sweep_values=(3,))


def test_noiseless_trial_default_angles():
    r = run_trial(SceneConfig(), AdmmConfig(), MusicConfig(num_sources=3), seed=11)
    assert r.rmse_deg < 0.02
    assert r.admm_converged
    assert r.wall_time_s > 0


def test_single_broadside_source():
    cfg = SceneConfig(source_doas=(0.0,))
    r = run_trial(cfg, AdmmConfig(), MusicConfig(num_sources=1), seed=2)
    assert r.per_source_errors_deg[0] < 1e-3


def test_rank_deficient_trial_is_recorded():
    cfg = SceneConfig()
    flat = RisProfile(np.ones((32, 16)), np.zeros((32, 16)))
    r = run_trial(cfg, seed=0, profile=flat, clip_deg=4.0)
    assert r.failed
    assert r.rmse_deg == 4.0
    np.testing.assert_array_equal(r.per_source_errors_deg, 4.0)


def test_trials_use_independent_streams():
    cfg = SceneConfig(snr_db=0.0)
    a = run_trial(cfg, seed=np.random.SeedSequence([1, 0, 0]))
    b = run_trial(cfg, seed=np.random.SeedSequence([1, 0, 1]))
    c = run_trial(cfg, seed=np.random.SeedSequence([1, 0, 0]))
    assert a.sigma0_est != b.sigma0_est
    np.testing.assert_array_equal(a.est_deg, c.est_deg)


def _small_spec(**kw):
    spec = preset_spec("snr_sweep", trials=2, sweep_values=(0.0, 12.0), seed=5)
    return replace(spec, **kw)


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_experiment_csv_schema(tmp_path):
    paths = run_experiment(_small_spec(), tmp_path)
    trials = _read(paths["trials"])
    assert trials[0] == bench.TRIAL_COLUMNS
    assert len(trials) == 1 + 2 * 2 * 3
    agg = _read(paths["aggregate"])
    assert agg[0] == bench.AGGREGATE_COLUMNS
    assert [row[0] for row in agg[1:]] == ["0", "12"]
    for row in trials[1:]:
        assert float(row[5]) <= 4.0
        assert float(row[9]) > 0
    cfg = parse_config(paths["config"].read_text())
    assert cfg["sweep_values"] == (0.0, 12.0)
    assert cfg["w_update_factor"] == 1


def test_experiment_aggregate_consistent_with_trials(tmp_path):
    paths = run_experiment(_small_spec(), tmp_path)
    rows = _read(paths["trials"])[1:]
    for agg in _read(paths["aggregate"])[1:]:
        errs = np.array([float(r[5]) for r in rows if r[0] == agg[0]])
        assert float(agg[1]) == pytest.approx(np.sqrt(np.mean(errs**2)), rel=1e-9)


def _strip_time(path, col):
    return [row[:col] + row[col + 1:] for row in _read(path)]


def test_experiment_deterministic(tmp_path):
    a = run_experiment(_small_spec(), tmp_path / "a")
    b = run_experiment(_small_spec(), tmp_path / "b", serial=False, workers=2)
    assert _strip_time(a["trials"], 9) == _strip_time(b["trials"], 9)
    assert _strip_time(a["aggregate"], 3) == _strip_time(b["aggregate"], 3)
    assert a["config"].read_text() == b["config"].read_text()


def test_fixed_ris_profile_option(tmp_path):
    spec = _small_spec(ris_redraw_per_trial=False, sweep_values=(np.inf,))
    paths = run_experiment(spec, tmp_path)
    assert len(_read(paths["trials"])) == 1 + 2 * 3


def test_unwritable_output_fails_before_compute(tmp_path, monkeypatch):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    called = []
    monkeypatch.setattr(bench, "run_sweep", lambda *a, **k: called.append(1))
    with pytest.raises(OSError):
        run_experiment(_small_spec(), blocker / "sub")
    assert not called


def test_config_roundtrip():
    spec = preset_spec("ris_sweep", trials=7, seed=3)
    again = build_spec(parse_config(format_config(spec)))
    assert again == spec


def test_config_overrides_and_errors():
    values = parse_config("""
        # comment line
        trials = 5   # trailing comment
        snr_db = 6
        gamma = auto
        source_doas = -10, 30
        refine = false
    """)
    spec = build_spec(values, "measurement_sweep")
    assert spec.trials == 5
    assert spec.base.snr_db == 6.0
    assert spec.base.source_doas == (-10.0, 30.0)
    assert spec.music.num_sources == 2 and not spec.music.refine
    assert spec.admm.gamma is None
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config("colour = blue")
    with pytest.raises(ConfigError):
        parse_config("trials = many")
    with pytest.raises(ConfigError):
        parse_config("just some words")
    with pytest.raises(ConfigError):
        build_spec({}, "custom")
    with pytest.raises(ConfigError):
        build_spec({"num_ris": 40}, "snr_sweep")


def test_custom_sweep():
    spec = build_spec({"sweep_param": "num_antennas", "sweep_values": (2, 8), "trials": 1}, "custom")
    assert spec.sweep_values == (2, 8)
    assert spec.scene_at(8).num_antennas == 8
