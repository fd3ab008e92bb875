"""Monte-Carlo benchmark harness.

Each trial draws an RIS profile, source amplitudes and noise from its own
seed stream, runs the estimator end to end and scores the sorted estimates
against the sorted true angles. Sweeps write one CSV row per (trial, source)
and an aggregate CSV per sweep value.
"""

from __future__ import annotations

import csv
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .anm import AdmmConfig, AdmmState, ToeplitzParam, admm_solve, default_gamma
from .covariance import (
    NoiseEstimate,
    RankDeficientError,
    RisCovariance,
    SampleCovariance,
    denoised_ris_covariance,
    estimate_noise_variance,
    sample_covariance,
)
from .music import DoaEstimate, MusicConfig, estimate_doas
from .scene import (
    ObservationMatrix,
    SceneConfig,
    draw_source_signals,
    random_ris_profile,
    synthesize_observations,
)

log = logging.getLogger(__name__)

DEFAULT_DOAS = (5.345, 25.789, 45.456)

PRESETS = {
    "snr_sweep": dict(
        sweep_param="snr_db",
        sweep_values=(-6.0, -3.0, 0.0, 3.0, 6.0, 9.0, 12.0),
        base=dict(num_ris=16, num_slots=32),
    ),
    "ris_sweep": dict(
        sweep_param="num_ris",
        sweep_values=(12, 15, 18, 21, 24, 27, 30),
        base=dict(num_slots=32, snr_db=3.0),
    ),
    "measurement_sweep": dict(
        sweep_param="num_slots",
        sweep_values=(20, 23, 26, 29, 32, 35, 38),
        base=dict(num_ris=16, snr_db=3.0),
    ),
    "cpu_time": dict(
        sweep_param="num_ris",
        sweep_values=(12, 15, 18, 21, 24, 27, 30),
        base=dict(num_slots=36, snr_db=3.0),
    ),
}

SWEEPABLE = {"snr_db": float, "num_ris": int, "num_slots": int, "num_antennas": int}

TRIAL_COLUMNS = [
    "sweep_value", "trial", "src_index", "true_deg", "est_deg", "err_deg",
    "sigma0_est", "admm_iters", "admm_converged", "time_s",
]
AGGREGATE_COLUMNS = ["sweep_value", "mean_rmse_deg", "std_rmse_deg", "mean_time_s", "n_trials"]


@dataclass(frozen=True)
class NoiseConfig:
    max_iter: int = 100
    tol: float = 1e-8


@dataclass
class PipelineOutput:
    sample: SampleCovariance
    noise: NoiseEstimate
    ris_cov: RisCovariance
    toeplitz: ToeplitzParam
    admm: AdmmState
    doas: DoaEstimate


@dataclass(frozen=True)
class TrialResult:
    sweep_value: float
    trial_index: int
    true_deg: np.ndarray
    est_deg: np.ndarray
    per_source_errors_deg: np.ndarray
    rmse_deg: float
    wall_time_s: float
    admm_iters: int
    admm_converged: bool
    sigma0_est: float
    failed: bool = False


@dataclass(frozen=True)
class ExperimentSpec:
    preset: str = "snr_sweep"
    sweep_param: str = "snr_db"
    sweep_values: tuple = PRESETS["snr_sweep"]["sweep_values"]
    trials: int = 100
    base: SceneConfig = field(default_factory=SceneConfig)
    clip_deg: float | None = 4.0
    admm: AdmmConfig = field(default_factory=AdmmConfig)
    music: MusicConfig = field(default_factory=MusicConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    seed: int = 0
    ris_redraw_per_trial: bool = True

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if len(self.sweep_values) == 0:
            raise ValueError("sweep_values must be nonempty")
        if self.sweep_param not in SWEEPABLE:
            raise ValueError(f"cannot sweep {self.sweep_param!r}; choose from {sorted(SWEEPABLE)}")
        for v in self.sweep_values:
            self.scene_at(v)

    def scene_at(self, value) -> SceneConfig:
        return replace(self.base, **{self.sweep_param: SWEEPABLE[self.sweep_param](value)})


def preset_spec(name: str, **overrides) -> ExperimentSpec:
    """ExperimentSpec for one of the named presets (M=4, three sources)."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    p = PRESETS[name]
    base = SceneConfig(num_antennas=4, source_doas=DEFAULT_DOAS, **p["base"])
    kw = dict(preset=name, sweep_param=p["sweep_param"], sweep_values=p["sweep_values"], base=base)
    kw.update(overrides)
    return ExperimentSpec(**kw)


def estimate_from_observations(
    obs: ObservationMatrix,
    B: np.ndarray,
    num_sources: int,
    admm: AdmmConfig,
    music: MusicConfig,
    noise: NoiseConfig = NoiseConfig(),
    positions=None,
    wavelength: float = 1.0,
    trace=None,
) -> PipelineOutput:
    """Noise floor -> denoised RIS covariance -> ADMM -> MUSIC."""
    sample = sample_covariance(obs)
    nz = estimate_noise_variance(sample, noise.max_iter, noise.tol)
    ris_cov = denoised_ris_covariance(sample, nz.sigma0, B)
    gamma = admm.gamma if admm.gamma is not None else default_gamma(nz.sigma0)
    mu, state = admm_solve(ris_cov, admm, gamma=gamma, trace=trace)
    mcfg = replace(music, num_sources=num_sources)
    doas = estimate_doas(mu.matrix(), mcfg, positions, wavelength)
    return PipelineOutput(sample, nz, ris_cov, mu, state, doas)


def _seed_streams(seed) -> list[np.random.Generator]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(3)]


def simulate_scene(cfg: SceneConfig, seed=None, profile=None):
    """Draw one scene realisation. Returns ``(observations, profile, s)``."""
    seed = cfg.rng_seed if seed is None else seed
    prof_rng, sig_rng, noise_rng = _seed_streams(seed)
    if profile is None:
        profile = random_ris_profile(cfg.num_slots, cfg.num_ris, prof_rng)
    s = draw_source_signals(cfg.num_sources, sig_rng)
    obs = synthesize_observations(cfg, profile, s, noise_rng)
    return obs, profile, s


def clipped_errors(true_deg, est_deg, clip_deg: float | None) -> np.ndarray:
    """Absolute errors of sorted estimates against sorted truths, clipped."""
    err = np.abs(np.sort(np.asarray(est_deg, float)) - np.sort(np.asarray(true_deg, float)))
    if clip_deg is not None:
        err = np.minimum(err, clip_deg)
    return err


def run_trial(
    cfg: SceneConfig,
    admm: AdmmConfig = AdmmConfig(),
    music: MusicConfig = MusicConfig(),
    seed=None,
    clip_deg: float | None = 4.0,
    noise: NoiseConfig = NoiseConfig(),
    profile=None,
    sweep_value: float = np.nan,
    trial_index: int = 0,
) -> TrialResult:
    """One Monte-Carlo trial. ``wall_time_s`` covers the estimation stages only."""
    obs, profile, _ = simulate_scene(cfg, seed, profile)
    truth = np.sort(np.asarray(cfg.source_doas))
    K = truth.size
    t0 = time.perf_counter()
    try:
        out = estimate_from_observations(
            obs, obs.B, K, admm, music, noise, cfg.p, cfg.wavelength
        )
    except RankDeficientError as exc:
        elapsed = time.perf_counter() - t0
        log.warning("trial %d failed: %s", trial_index, exc)
        fill = clip_deg if clip_deg is not None else np.nan
        return TrialResult(
            sweep_value, trial_index, truth, np.full(K, np.nan), np.full(K, fill),
            float(fill), elapsed, 0, False, np.nan, failed=True,
        )
    elapsed = time.perf_counter() - t0
    est = out.doas.angles
    err = clipped_errors(truth, est, clip_deg)
    return TrialResult(
        sweep_value, trial_index, truth, est, err, float(np.sqrt(np.mean(err**2))),
        elapsed, out.admm.iter, out.admm.converged, out.noise.sigma0,
    )


def aggregate_rmse(results) -> dict:
    """Pooled RMSE ``sqrt(sum err^2 / (trials * K))`` and spread of per-trial RMSEs."""
    results = list(results)
    if not results:
        raise ValueError("no trial results to aggregate")
    errs = np.concatenate([r.per_source_errors_deg for r in results])
    per_trial = np.array([r.rmse_deg for r in results])
    return {
        "rmse_deg": float(np.sqrt(np.mean(errs**2))),
        "std_rmse_deg": float(np.std(per_trial)),
        "mean_time_s": float(np.mean([r.wall_time_s for r in results])),
        "n_trials": len(results),
    }


def _trial_job(args):
    spec, sweep_index, value, trial = args
    cfg = spec.scene_at(value)
    profile = None
    if not spec.ris_redraw_per_trial:
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, sweep_index]))
        profile = random_ris_profile(cfg.num_slots, cfg.num_ris, rng)
    seed = np.random.SeedSequence([spec.seed, sweep_index, trial])
    return run_trial(
        cfg, spec.admm, spec.music, seed, spec.clip_deg, spec.noise, profile,
        sweep_value=value, trial_index=trial,
    )


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def run_sweep(spec: ExperimentSpec, serial: bool = True, workers: int | None = None):
    """Run every trial of ``spec``; returns ``{sweep_value: [TrialResult, ...]}``."""
    jobs = [
        (spec, si, v, t)
        for si, v in enumerate(spec.sweep_values)
        for t in range(spec.trials)
    ]
    workers = workers or os.cpu_count() or 1
    if serial or workers == 1:
        results = [_trial_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trial_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    grouped = {v: [] for v in spec.sweep_values}
    for (_, _, v, _), r in zip(jobs, results):
        grouped[v].append(r)
    return grouped


def run_experiment(
    spec: ExperimentSpec,
    out_dir,
    serial: bool = True,
    workers: int | None = None,
    name: str | None = None,
) -> dict[str, Path]:
    """Run a sweep and write ``<name>_trials.csv``, ``<name>_aggregate.csv``
    and the resolved ``<name>_config.txt`` into ``out_dir``."""
    out_dir = Path(out_dir)
    name = name or spec.preset
    paths = {
        "trials": out_dir / f"{name}_trials.csv",
        "aggregate": out_dir / f"{name}_aggregate.csv",
        "config": out_dir / f"{name}_config.txt",
    }
    # fail on an unwritable destination before spending any compute
    out_dir.mkdir(parents=True, exist_ok=True)
    handles = {k: open(p, "w", newline="", encoding="utf-8") for k, p in paths.items()}
    try:
        handles["config"].write(format_config(spec))
        grouped = run_sweep(spec, serial=serial, workers=workers)
        tw = csv.writer(handles["trials"], lineterminator="\n")
        aw = csv.writer(handles["aggregate"], lineterminator="\n")
        tw.writerow(TRIAL_COLUMNS)
        aw.writerow(AGGREGATE_COLUMNS)
        for value, results in grouped.items():
            for r in results:
                for k in range(r.true_deg.size):
                    tw.writerow([
                        _fmt(value), r.trial_index, k, _fmt(r.true_deg[k]), _fmt(r.est_deg[k]),
                        _fmt(r.per_source_errors_deg[k]), _fmt(r.sigma0_est), r.admm_iters,
                        _fmt(r.admm_converged), f"{r.wall_time_s:.6e}",
                    ])
            agg = aggregate_rmse(results)
            aw.writerow([
                _fmt(value), _fmt(agg["rmse_deg"]), _fmt(agg["std_rmse_deg"]),
                f"{agg['mean_time_s']:.6e}", agg["n_trials"],
            ])
    finally:
        for h in handles.values():
            h.close()
    return paths


# --- flat key/value configuration -------------------------------------------

CONFIG_KEYS = {
    # experiment
    "preset": str,
    "sweep_param": str,
    "sweep_values": "floats",
    "trials": int,
    "seed": int,
    "clip_deg": "optional_float",
    "ris_redraw_per_trial": "bool",
    # scene
    "num_antennas": int,
    "num_ris": int,
    "num_slots": int,
    "source_doas": "floats",
    "dod_alpha": float,
    "doa_beta": float,
    "wavelength": float,
    "snr_db": float,
    # noise estimation
    "noise_max_iter": int,
    "noise_tol": float,
    # admm
    "tau": float,
    "gamma": "optional_float",
    "admm_max_iter": int,
    "eps_abs": float,
    "eps_rel": float,
    "w_update_factor": int,
    # music
    "grid_step": float,
    "refine": "bool",
}


class ConfigError(ValueError):
    pass


def _parse_value(key: str, raw: str):
    kind = CONFIG_KEYS[key]
    raw = raw.strip()
    try:
        if kind == "floats":
            return tuple(float(x) for x in raw.replace(",", " ").split())
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "optional_float":
            return None if raw.lower() in ("", "none", "auto") else float(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from None


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, raw)
    return values


def load_config(path) -> dict:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def build_spec(values: dict, preset: str | None = None) -> ExperimentSpec:
    """Resolve an ExperimentSpec from parsed config values.

    A named preset supplies the sweep grid and fixed scene parameters; any
    key present in ``values`` overrides it. ``custom`` starts from the
    default scene and requires ``sweep_param`` and ``sweep_values``.
    """
    values = dict(values)
    preset = preset or values.pop("preset", None) or "snr_sweep"
    values.pop("preset", None)
    try:
        if preset == "custom":
            if "sweep_param" not in values or "sweep_values" not in values:
                raise ConfigError("custom sweeps need sweep_param and sweep_values")
            spec = ExperimentSpec(
                preset="custom",
                sweep_param=values["sweep_param"],
                sweep_values=values["sweep_values"],
            )
        else:
            spec = preset_spec(preset)

        scene_kw = {k: values[k] for k in
                    ("num_antennas", "num_ris", "num_slots", "source_doas", "dod_alpha",
                     "doa_beta", "wavelength", "snr_db") if k in values}
        admm_kw = {k: values[k] for k in ("tau", "gamma", "eps_abs", "eps_rel", "w_update_factor")
                   if k in values}
        if "admm_max_iter" in values:
            admm_kw["max_iter"] = values["admm_max_iter"]
        music_kw = {k: values[k] for k in ("grid_step", "refine") if k in values}
        noise_kw = {}
        if "noise_max_iter" in values:
            noise_kw["max_iter"] = values["noise_max_iter"]
        if "noise_tol" in values:
            noise_kw["tol"] = values["noise_tol"]

        sweep_param = values.get("sweep_param", spec.sweep_param)
        sweep_values = values.get("sweep_values", spec.sweep_values)
        cast = SWEEPABLE.get(sweep_param, float)
        sweep_values = tuple(cast(v) for v in sweep_values)

        base = replace(spec.base, **scene_kw)
        return replace(
            spec,
            sweep_param=sweep_param,
            sweep_values=sweep_values,
            base=base,
            admm=replace(spec.admm, **admm_kw),
            music=replace(spec.music, num_sources=base.num_sources, **music_kw),
            noise=replace(spec.noise, **noise_kw),
            **{k: values[k] for k in ("trials", "seed", "clip_deg", "ris_redraw_per_trial")
               if k in values},
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def format_config(spec: ExperimentSpec) -> str:
    """Serialise ``spec`` in the flat key/value format read by :func:`parse_config`."""
    b, a, m, n = spec.base, spec.admm, spec.music, spec.noise

    def opt(x):
        return "auto" if x is None else _fmt(x)

    rows = [
        ("preset", spec.preset),
        ("sweep_param", spec.sweep_param),
        ("sweep_values", ", ".join(_fmt(v) for v in spec.sweep_values)),
        ("trials", spec.trials),
        ("seed", spec.seed),
        ("clip_deg", "none" if spec.clip_deg is None else _fmt(spec.clip_deg)),
        ("ris_redraw_per_trial", _fmt(spec.ris_redraw_per_trial)),
        ("num_antennas", b.num_antennas),
        ("num_ris", b.num_ris),
        ("num_slots", b.num_slots),
        ("source_doas", ", ".join(_fmt(t) for t in b.source_doas)),
        ("dod_alpha", _fmt(b.dod_alpha)),
        ("doa_beta", _fmt(b.doa_beta)),
        ("wavelength", _fmt(b.wavelength)),
        ("snr_db", _fmt(b.snr_db)),
        ("noise_max_iter", n.max_iter),
        ("noise_tol", _fmt(n.tol)),
        ("tau", _fmt(a.tau)),
        ("gamma", opt(a.gamma)),
        ("admm_max_iter", a.max_iter),
        ("eps_abs", _fmt(a.eps_abs)),
        ("eps_rel", _fmt(a.eps_rel)),
        ("w_update_factor", a.w_update_factor),
        ("grid_step", _fmt(m.grid_step)),
        ("refine", _fmt(m.refine)),
    ]
    lines = ["# risdoa experiment configuration"]
    lines += [f"{k} = {v}" for k, v in rows]
    return "\n".join(lines) + "\n"
