"""
Observations through a RIS, and what the covariance tells us
=============================================================

A single-antenna-row base station sees three far-field users only through a
16-element RIS whose phases flip between 0 and pi on every slot.
"""

import numpy as np

from risdoa import SceneConfig, estimate_noise_variance, sample_covariance, denoised_ris_covariance
from risdoa.bench import simulate_scene

cfg = SceneConfig(num_antennas=4, num_ris=16, num_slots=32, snr_db=5.0)
obs, profile, s = simulate_scene(cfg, seed=11)
print("Y shape (slots x antennas):", obs.Y.shape)
print("phases of the first slot:", np.round(profile.phases[0] / np.pi).astype(int))

# The L x L sample covariance has one dominant direction (the BS steering
# vector folds all sources into a single column space) plus noise.
S_Y = sample_covariance(obs)
ev = np.linalg.eigvalsh(S_Y.R_Y)[::-1]
print("top eigenvalues:", np.round(ev[:4], 2))

nz = estimate_noise_variance(S_Y)
print(f"noise floor estimate {nz.sigma0:.3f} after {nz.iterations} iterations")
print(f"true per-entry noise variance x M: {cfg.num_antennas * obs.noise_var:.3f}")

# Remove the floor and undo the RIS measurement matrix.
R_hat = denoised_ris_covariance(S_Y, nz.sigma0, obs.B).R_hat
print("denoised RIS covariance:", R_hat.shape,
      "hermitian:", np.allclose(R_hat, R_hat.conj().T))
