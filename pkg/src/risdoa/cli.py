"""Command-line entry point: ``risdoa {simulate,sweep,spectrum}``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench
from .bench import ConfigError
from .music import write_spectrum_csv

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat key = value configuration file")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--seed", type=int, help="base RNG seed")
    p.add_argument("--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="risdoa", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one trial and print every pipeline stage")
    _common(p)
    p.add_argument("--snr-db", type=float, help="override the scene SNR")

    p = sub.add_parser("sweep", help="run a Monte-Carlo sweep and write CSV files")
    p.add_argument("preset", help="snr_sweep, ris_sweep, measurement_sweep, cpu_time or custom")
    _common(p)
    p.add_argument("--trials", type=int, help="trials per sweep value")
    p.add_argument("--serial", action="store_true", help="run trials sequentially")
    p.add_argument("--workers", type=int, help="worker processes when not serial")

    p = sub.add_parser("spectrum", help="write the MUSIC pseudospectrum of one trial as CSV")
    _common(p)
    p.add_argument("--snr-db", type=float, help="override the scene SNR")
    return parser


def _resolve(args, preset=None) -> bench.ExperimentSpec:
    values = bench.load_config(args.config) if args.config else {}
    if getattr(args, "trials", None) is not None:
        values["trials"] = args.trials
    if args.seed is not None:
        values["seed"] = args.seed
    if getattr(args, "snr_db", None) is not None:
        values["snr_db"] = args.snr_db
    return bench.build_spec(values, preset)


def _single_scene(spec: bench.ExperimentSpec):
    cfg = replace(spec.base, rng_seed=spec.seed)
    obs, profile, s = bench.simulate_scene(cfg, np.random.SeedSequence([spec.seed, 0, 0]))
    return cfg, obs


def cmd_simulate(args) -> int:
    spec = _resolve(args, "custom" if args.config else "snr_sweep")
    cfg, obs = _single_scene(spec)
    trace = None
    if args.verbose:
        args.out.mkdir(parents=True, exist_ok=True)
        trace = open(args.out / "admm_trace.csv", "w", newline="", encoding="utf-8")
    try:
        t0 = time.perf_counter()
        out = bench.estimate_from_observations(
            obs, obs.B, cfg.num_sources, spec.admm, spec.music, spec.noise,
            cfg.p, cfg.wavelength, trace=trace,
        )
        elapsed = time.perf_counter() - t0
    finally:
        if trace is not None:
            trace.close()
    truth = np.sort(cfg.source_doas)
    err = bench.clipped_errors(truth, out.doas.angles, spec.clip_deg)
    ev = np.linalg.eigvalsh(out.toeplitz.matrix())[::-1]
    print(f"scene: M={cfg.num_antennas} N={cfg.num_ris} L={cfg.num_slots} "
          f"K={cfg.num_sources} snr_db={cfg.snr_db:g} seed={spec.seed}")
    print(f"injected noise variance: {obs.noise_var:.6g} (M*var = {cfg.num_antennas * obs.noise_var:.6g})")
    print(f"noise estimate: sigma0={out.noise.sigma0:.6g} iterations={out.noise.iterations} "
          f"converged={out.noise.converged}")
    print(f"denoised RIS covariance: ||R_hat||_F={np.linalg.norm(out.ris_cov.R_hat):.6g}")
    st = out.admm
    print(f"admm: iters={st.iter} converged={st.converged} primal={st.primal_res:.3e} "
          f"dual={st.dual_res:.3e} gamma={st.gamma:.6g} w_update_factor={spec.admm.w_update_factor}")
    print("T(mu) leading eigenvalues: " + " ".join(f"{v:.4g}" for v in ev[: cfg.num_sources + 2]))
    print("true DoAs (deg):      " + " ".join(f"{v:9.4f}" for v in truth))
    print("estimated DoAs (deg): " + " ".join(f"{v:9.4f}" for v in out.doas.angles))
    print("abs errors (deg):     " + " ".join(f"{v:9.4f}" for v in err))
    print(f"rmse_deg={np.sqrt(np.mean(err ** 2)):.6g} time_s={elapsed:.4g}")
    if args.verbose:
        print(f"admm trace written to {args.out / 'admm_trace.csv'}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = _resolve(args, args.preset)
    if spec.preset == "cpu_time" and not args.serial:
        print("error: the cpu_time preset must run with --serial", file=sys.stderr)
        return EXIT_CONFIG
    paths = bench.run_experiment(spec, args.out, serial=args.serial, workers=args.workers)
    with open(paths["aggregate"], encoding="utf-8") as fh:
        sys.stdout.write(fh.read())
    if args.verbose:
        for kind, p in paths.items():
            print(f"{kind}: {p}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    spec = _resolve(args, "custom" if args.config else "snr_sweep")
    cfg, obs = _single_scene(spec)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "spectrum.csv"
    out = bench.estimate_from_observations(
        obs, obs.B, cfg.num_sources, spec.admm, spec.music, spec.noise, cfg.p, cfg.wavelength
    )
    write_spectrum_csv(path, out.doas.grid, out.doas.spectrum)
    print("estimated DoAs (deg): " + " ".join(f"{v:.4f}" for v in out.doas.angles))
    print(f"spectrum written to {path}")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "spectrum": cmd_spectrum}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
