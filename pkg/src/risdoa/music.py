"""MUSIC angle extraction from a reconstructed Toeplitz covariance."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .covariance import hermitian_part
from .scene import steering_vector

__all__ = [
    "MusicConfig",
    "DoaEstimate",
    "angle_grid",
    "noise_subspace",
    "music_spectrum",
    "estimate_doas",
    "write_spectrum_csv",
]

_DENOM_FLOOR = 1e-18


@dataclass(frozen=True)
class MusicConfig:
    num_sources: int = 3
    grid_step: float = 0.01
    scan_range: tuple[float, float] = (-90.0, 90.0)
    refine: bool = True

    def __post_init__(self):
        if not self.grid_step > 0:
            raise ValueError("grid_step must be positive")
        lo, hi = self.scan_range
        if not lo < hi:
            raise ValueError("scan_range must be increasing")
        if self.num_sources < 1:
            raise ValueError("num_sources must be >= 1")


@dataclass(frozen=True)
class DoaEstimate:
    angles: np.ndarray
    grid: np.ndarray | None = None
    spectrum: np.ndarray | None = None
    degenerate: bool = False


def angle_grid(step: float = 0.01, scan_range=(-90.0, 90.0)) -> np.ndarray:
    """Half-open grid ``[lo, hi)`` with spacing ``step``."""
    lo, hi = scan_range
    n = int(np.ceil((hi - lo) / step - 1e-9))
    # rounding keeps on-grid angles such as 10.00 exact
    return np.round(lo + step * np.arange(n), 10)


def noise_subspace(T: np.ndarray, num_sources: int) -> np.ndarray:
    T = np.asarray(T)
    N = T.shape[0]
    if not num_sources < N:
        raise ValueError(f"MUSIC needs K < N (K={num_sources}, N={N})")
    _, V = np.linalg.eigh(hermitian_part(T))
    return V[:, : N - num_sources]


def music_spectrum(T, num_sources: int, grid, positions=None, wavelength: float = 1.0) -> np.ndarray:
    """Pseudospectrum ``1 / ||E_n^H a(theta)||^2`` over ``grid`` (degrees).

    ``positions`` default to a half-wavelength ULA, matching the Toeplitz
    structure of ``T``.
    """
    T = np.asarray(T)
    N = T.shape[0]
    En = noise_subspace(T, num_sources)
    if positions is None:
        positions = np.arange(N) * (wavelength / 2.0)
    A = steering_vector(np.asarray(grid, dtype=float), positions, wavelength)
    proj = En.conj().T @ A
    denom = np.einsum("ij,ij->j", proj.real, proj.real) + np.einsum("ij,ij->j", proj.imag, proj.imag)
    return 1.0 / np.maximum(denom, _DENOM_FLOOR)


def _local_maxima(y: np.ndarray) -> np.ndarray:
    # a plateau resolves to its left end
    inner = (y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])
    return np.flatnonzero(inner) + 1


def _parabolic_offset(y: np.ndarray, i: int) -> float:
    a, b, c = np.log(y[i - 1 : i + 2])
    curv = a - 2.0 * b + c
    if curv >= 0:
        return 0.0
    return float(np.clip(0.5 * (a - c) / curv, -0.5, 0.5))


def estimate_doas(T, cfg: MusicConfig, positions=None, wavelength: float = 1.0) -> DoaEstimate:
    """Pick the ``cfg.num_sources`` strongest MUSIC peaks, sorted ascending.

    Peaks are interior samples exceeding both neighbours; with ``cfg.refine``
    each peak is shifted to the vertex of a parabola through the log-spectrum
    at the peak and its two neighbours. If fewer peaks exist than sources,
    the largest remaining grid samples fill in and ``degenerate`` is set.
    """
    grid = angle_grid(cfg.grid_step, cfg.scan_range)
    P = music_spectrum(T, cfg.num_sources, grid, positions, wavelength)
    K = cfg.num_sources

    peaks = _local_maxima(P)
    # stable sort on -P keeps the smaller angle first among equal heights
    peaks = peaks[np.argsort(-P[peaks], kind="stable")][:K]
    n_true = peaks.size
    degenerate = n_true < K
    if degenerate:
        rest = np.setdiff1d(np.argsort(-P, kind="stable"), peaks, assume_unique=True)
        order = np.argsort(-P[rest], kind="stable")
        peaks = np.concatenate([peaks, rest[order][: K - peaks.size]])

    angles = grid[peaks].astype(float)
    if cfg.refine:
        # padded fill-ins are not peaks and stay on the grid
        for n in range(n_true):
            angles[n] += _parabolic_offset(P, peaks[n]) * cfg.grid_step
    return DoaEstimate(np.sort(angles), grid, P, bool(degenerate))


def write_spectrum_csv(path, grid, spectrum) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["angle_deg", "pseudospectrum"])
        for a, p in zip(grid, spectrum):
            w.writerow([f"{a:.10g}", f"{p:.10e}"])
