"""Covariance-domain preprocessing: sample covariance, noise power, denoising.

The sample covariance keeps the antenna sum unnormalised (``Y Y^H``), so the
noise floor estimated here is ``M`` times the per-entry noise variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "SampleCovariance",
    "NoiseEstimate",
    "RisCovariance",
    "RankDeficientError",
    "hermitian_part",
    "sample_covariance",
    "estimate_noise_variance",
    "noise_fixed_point",
    "denoised_ris_covariance",
]


class RankDeficientError(ValueError):
    """The RIS measurement matrix cannot be inverted from the left."""


def hermitian_part(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + X.conj().T)


@dataclass(frozen=True)
class SampleCovariance:
    R_Y: np.ndarray

    @property
    def dim(self) -> int:
        return self.R_Y.shape[0]


@dataclass(frozen=True)
class NoiseEstimate:
    sigma0: float
    c: np.ndarray
    iterations: int
    converged: bool
    history: tuple[float, ...] = ()


@dataclass(frozen=True)
class RisCovariance:
    R_hat: np.ndarray


def sample_covariance(Y) -> SampleCovariance:
    """``Y Y^H`` for an observation matrix (or a raw L x M array)."""
    Y = np.asarray(getattr(Y, "Y", Y))
    if Y.ndim != 2 or Y.size == 0:
        raise ValueError("observation matrix must be a nonempty 2-D array")
    return SampleCovariance(hermitian_part(Y @ Y.conj().T))


def _as_matrix(R) -> np.ndarray:
    return np.asarray(getattr(R, "R_Y", R))


def noise_fixed_point(R_Y) -> float:
    """Closed-form limit of the noise iteration: ``(tr R - lambda_max) / (L - 1)``."""
    R = _as_matrix(R_Y)
    ev = np.linalg.eigvalsh(hermitian_part(R))
    return float((np.trace(R).real - ev[-1]) / (R.shape[0] - 1))


def estimate_noise_variance(R_Y, max_iter: int = 100, tol: float = 1e-8) -> NoiseEstimate:
    """Alternating rank-one fit of ``R_Y ~ c c^H + sigma0 I``.

    Each sweep takes ``c`` as the principal eigenpair of ``R_Y - sigma0 I``
    and then sets ``sigma0 = (tr R_Y - ||c||^2) / L``. Iteration starts from
    ``sigma0 = 0`` and stops after ``max_iter`` sweeps or when the relative
    change of ``sigma0`` drops below ``tol``.
    """
    R = _as_matrix(R_Y)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError("covariance must be square")
    L = R.shape[0]
    if L < 2:
        raise ValueError("noise estimation needs L >= 2")
    scale = max(np.abs(R).max(), np.finfo(float).tiny)
    if np.abs(R - R.conj().T).max() > 1e-10 * scale:
        raise ValueError("covariance must be Hermitian")
    R = hermitian_part(R)

    # eigenvectors do not change with the diagonal shift, only the top eigenvalue does
    ev, U = np.linalg.eigh(R)
    lam_max, u = ev[-1], U[:, -1]
    trace = float(np.trace(R).real)
    # below this the noise floor is indistinguishable from roundoff
    floor = 1e-12 * abs(trace) / L

    sigma = 0.0
    c = np.zeros(L, dtype=complex)
    history = []
    converged = False
    i = 0
    while i < max_iter:
        i += 1
        top = lam_max - sigma
        # sigma overshooting lambda_max would give a negative energy
        energy = max(top, 0.0)
        c = u * np.sqrt(energy)
        new_sigma = (trace - energy) / L
        history.append(new_sigma)
        delta = abs(new_sigma - sigma)
        if sigma != 0.0:
            done = delta / abs(sigma) < tol
        else:
            done = delta <= floor
        sigma = new_sigma
        if done:
            converged = True
            break
    if sigma < floor:
        sigma = 0.0
    return NoiseEstimate(float(sigma), c, i, converged, tuple(history))


def denoised_ris_covariance(R_Y, sigma0: float, B: np.ndarray) -> RisCovariance:
    """Strip the noise floor and the RIS measurement operator from ``R_Y``.

    Returns ``pinv(B^T) (R_Y - sigma0 I) pinv(B^*)``, Hermitian-symmetrised.
    ``B`` is the N x L measurement matrix (one RIS gain vector per column).
    """
    R = _as_matrix(R_Y)
    B = np.asarray(B)
    L = R.shape[0]
    if sigma0 < 0:
        raise ValueError("sigma0 must be nonnegative")
    if B.ndim != 2 or B.shape[1] != L:
        raise ValueError(f"B must be N x {L}, got {B.shape}")
    N = B.shape[0]
    sv = scipy.linalg.svdvals(B)
    if N > L or sv[-1] < 1e-10 * sv[0]:
        raise RankDeficientError(
            f"RIS measurement matrix ({N}x{L}) has numerical rank below N={N}; "
            f"need L >= N and non-degenerate RIS phase profiles"
        )
    left = np.linalg.pinv(B.T)  # N x L
    R_hat = left @ (R - sigma0 * np.eye(L)) @ left.conj().T
    return RisCovariance(hermitian_part(R_hat))
