"""Acceptance gate: one test per exit criterion, each reporting a PASS/FAIL line.

The Monte-Carlo sweeps (criteria 6-8) take a few minutes in total; deselect
them with ``-m "not slow"`` for a quick run.
"""

import csv
import json
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import spearmanr

from risdoa import bench
from risdoa.anm import AdmmConfig, admm_solve, assemble_block, default_gamma, toeplitz_adjoint, toeplitz_build
from risdoa.bench import preset_spec, run_sweep, run_trial, simulate_scene
from risdoa.cli import main
from risdoa.covariance import denoised_ris_covariance, estimate_noise_variance, sample_covariance
from risdoa.music import MusicConfig
from risdoa.scene import SceneConfig

from conftest import DEFAULT_DOAS, random_psd

BASELINE = json.loads((Path(__file__).parent / "data" / "acceptance_baseline.json").read_text())


def check(report, number, title, passed, detail, elapsed=None, limit=None):
    timing = ""
    if elapsed is not None:
        timing = f" [{elapsed:.2f}s / limit {limit:g}s]"
        passed = passed and elapsed < limit
    report(f"{'PASS' if passed else 'FAIL'}  {number}. {title}: {detail}{timing}")
    assert passed, f"criterion {number} failed: {detail}{timing}"


def test_01_noise_fixed_point(report):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(20):
        L = (8, 16, 32)[i % 3]
        R = random_psd(rng, L, rank=int(rng.integers(2, L + 1)))
        est = estimate_noise_variance(R)
        ev = np.linalg.eigvalsh(R)
        target = (np.trace(R).real - ev[-1]) / (L - 1)
        worst = max(worst, abs(est.sigma0 - target) / target)
    elapsed = time.perf_counter() - t0
    check(report, 1, "noise-variance fixed point", worst < 1e-8,
          f"max relative deviation {worst:.2e} (tol 1e-8)", elapsed, 1.0)


def test_02_noise_consistency(report):
    t0 = time.perf_counter()
    est, target = [], []
    for t in range(100):
        cfg = SceneConfig(num_antennas=4, num_ris=16, num_slots=32, source_doas=(15.0,), snr_db=3.0)
        obs, _, _ = simulate_scene(cfg, np.random.SeedSequence([7, t]))
        est.append(estimate_noise_variance(sample_covariance(obs)).sigma0)
        target.append(cfg.num_antennas * obs.noise_var)
    elapsed = time.perf_counter() - t0
    rel = abs(np.mean(est) - np.mean(target)) / np.mean(target)
    check(report, 2, "noise-variance consistency", rel < 0.15,
          f"mean sigma0 {np.mean(est):.4g} vs M*var {np.mean(target):.4g}, "
          f"relative gap {rel:.1%} (tol 15%)", elapsed, 30.0)


def test_03_adjoint_identity(report):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(50):
        N = (4, 8, 16)[i % 3]
        Q = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
        Q = Q + Q.conj().T
        mu = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        mu[0] = mu[0].real
        lhs = np.real(np.trace(Q.conj().T @ toeplitz_build(mu)))
        rhs = np.real(np.vdot(toeplitz_adjoint(Q), mu))
        worst = max(worst, abs(lhs - rhs))
    elapsed = time.perf_counter() - t0
    check(report, 3, "Toeplitz adjoint identity", worst < 1e-10,
          f"max abs mismatch {worst:.2e} (tol 1e-10)", elapsed, 1.0)


def test_04_admm_feasibility_and_structure(report):
    cfg = SceneConfig(num_antennas=4, num_ris=16, num_slots=32, source_doas=DEFAULT_DOAS)
    obs, _, _ = simulate_scene(cfg, 4)
    S_Y = sample_covariance(obs)
    nz = estimate_noise_variance(S_Y)
    R_hat = denoised_ris_covariance(S_Y, nz.sigma0, obs.B)
    t0 = time.perf_counter()
    mu, st = admm_solve(R_hat, AdmmConfig(), gamma=default_gamma(nz.sigma0))
    elapsed = time.perf_counter() - t0
    S = assemble_block(st.W, st.R, mu.matrix())
    feas = np.linalg.norm(st.Z - S) / max(1.0, np.linalg.norm(S))
    zmin = np.linalg.eigvalsh(st.Z)[0]
    ev = np.sort(np.linalg.eigvalsh(mu.matrix()))[::-1]
    ratio = ev[3] / ev[2]
    ok = st.converged and feas < 1e-4 and zmin >= -1e-8 and ratio < 1e-3
    check(report, 4, "ADMM feasibility and rank", ok,
          f"converged={st.converged} in {st.iter} iters, ||Z-S||/max(1,||S||)={feas:.2e}, "
          f"min eig Z={zmin:.1e}, lambda4/lambda3={ratio:.1e}", elapsed, 60.0)


def test_05_end_to_end_noiseless(report):
    cfg = SceneConfig(num_antennas=4, num_ris=16, num_slots=32, source_doas=DEFAULT_DOAS)
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(5):
        r = run_trial(cfg, AdmmConfig(), MusicConfig(num_sources=3), seed=seed, clip_deg=None)
        worst = max(worst, float(np.max(r.per_source_errors_deg)))
    elapsed = time.perf_counter() - t0
    tol = BASELINE["end_to_end_noiseless_max_err_deg"]
    check(report, 5, "end-to-end noiseless recovery", worst < tol,
          f"max per-source error {worst:.4f} deg over 5 scenes (tol {tol})", elapsed, 60.0)


def _pooled(grouped):
    return {v: bench.aggregate_rmse(rs)["rmse_deg"] for v, rs in grouped.items()}


@pytest.mark.slow
def test_06_snr_trend(report):
    spec = preset_spec("snr_sweep", trials=100, seed=0)
    t0 = time.perf_counter()
    rmse = _pooled(run_sweep(spec))
    elapsed = time.perf_counter() - t0
    thr = BASELINE["snr_sweep_rmse_at_12db_max_deg"]
    ok = rmse[12.0] < rmse[-6.0] and rmse[12.0] < thr
    curve = ", ".join(f"{v:g}dB:{r:.3f}" for v, r in rmse.items())
    check(report, 6, "SNR sweep trend", ok,
          f"RMSE {curve}; need RMSE(12) < RMSE(-6) and RMSE(12) < {thr}", elapsed, 20 * 60.0)


@pytest.mark.slow
@pytest.mark.parametrize("preset, lo, hi", [("ris_sweep", 12, 30), ("measurement_sweep", 20, 38)])
def test_07_robustness_trend(report, preset, lo, hi):
    spec = preset_spec(preset, trials=100, seed=1, sweep_values=(lo, hi))
    t0 = time.perf_counter()
    rmse = _pooled(run_sweep(spec))
    elapsed = time.perf_counter() - t0
    name = "N" if preset == "ris_sweep" else "L"
    check(report, 7, f"{preset} robustness trend", rmse[hi] <= rmse[lo],
          f"RMSE({name}={hi})={rmse[hi]:.3f} <= RMSE({name}={lo})={rmse[lo]:.3f}", elapsed, 30 * 60.0)


@pytest.mark.slow
def test_08_cpu_time_scaling(report):
    """Mean estimation time per N, averaged over 5 serial repeats, must rank with N."""
    repeats, trials = 5, 10
    spec = preset_spec("cpu_time", trials=trials)
    times = np.zeros((repeats, len(spec.sweep_values)))
    t0 = time.perf_counter()
    for rep in range(repeats):
        grouped = run_sweep(replace(spec, seed=100 + rep), serial=True)
        times[rep] = [np.mean([r.wall_time_s for r in grouped[v]]) for v in spec.sweep_values]
    elapsed = time.perf_counter() - t0
    rho = spearmanr(spec.sweep_values, times.mean(axis=0)).statistic
    per_rep = [spearmanr(spec.sweep_values, t).statistic for t in times]
    means = ", ".join(f"N={n}:{1e3 * t:.0f}ms" for n, t in zip(spec.sweep_values, times.mean(axis=0)))
    check(report, 8, "CPU-time scaling in N", rho >= 0.8,
          f"Spearman {rho:.3f} (per repeat {', '.join(f'{r:.2f}' for r in per_rep)}); {means} "
          f"[{elapsed:.0f}s]")


def _without_column(path, name):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    idx = rows[0].index(name)
    return [r[:idx] + r[idx + 1:] for r in rows]


def test_09_determinism(report, tmp_path, capsys):
    cfg = tmp_path / "exp.txt"
    cfg.write_text("trials = 3\nsweep_values = -6, 3, 12\n")
    for run in ("a", "b"):
        assert main(["sweep", "snr_sweep", "--config", str(cfg), "--seed", "42",
                     "--out", str(tmp_path / run), "--serial"]) == 0
    same_trials = (_without_column(tmp_path / "a" / "snr_sweep_trials.csv", "time_s")
                   == _without_column(tmp_path / "b" / "snr_sweep_trials.csv", "time_s"))
    same_agg = (_without_column(tmp_path / "a" / "snr_sweep_aggregate.csv", "mean_time_s")
                == _without_column(tmp_path / "b" / "snr_sweep_aggregate.csv", "mean_time_s"))
    check(report, 9, "sweep determinism", same_trials and same_agg,
          f"trial CSV identical={same_trials}, aggregate CSV identical={same_agg} (timing excluded)")
