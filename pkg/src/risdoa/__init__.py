"""Gridless DoA estimation through a reconfigurable intelligent surface.

Pipeline: simulate RIS-reflected observations (:mod:`risdoa.scene`), estimate
the noise floor and strip the RIS operator in the covariance domain
(:mod:`risdoa.covariance`), recover a Hermitian Toeplitz covariance by ADMM on
the atomic-norm SDP (:mod:`risdoa.anm`) and read off the angles with MUSIC
(:mod:`risdoa.music`). :mod:`risdoa.bench` runs Monte-Carlo sweeps.
"""

from .anm import AdmmConfig, AdmmState, ToeplitzParam, admm_solve, psd_project, toeplitz_adjoint, toeplitz_build
from .bench import ExperimentSpec, TrialResult, aggregate_rmse, preset_spec, run_experiment, run_trial
from .covariance import (
    NoiseEstimate,
    RankDeficientError,
    RisCovariance,
    SampleCovariance,
    denoised_ris_covariance,
    estimate_noise_variance,
    sample_covariance,
)
from .music import DoaEstimate, MusicConfig, estimate_doas, music_spectrum
from .scene import (
    ObservationMatrix,
    RisProfile,
    SceneConfig,
    draw_source_signals,
    random_ris_profile,
    ris_gain_vector,
    steering_vector,
    synthesize_observations,
)

__all__ = [
    "AdmmConfig",
    "AdmmState",
    "ToeplitzParam",
    "admm_solve",
    "psd_project",
    "toeplitz_adjoint",
    "toeplitz_build",
    "ExperimentSpec",
    "TrialResult",
    "aggregate_rmse",
    "preset_spec",
    "run_experiment",
    "run_trial",
    "NoiseEstimate",
    "RankDeficientError",
    "RisCovariance",
    "SampleCovariance",
    "denoised_ris_covariance",
    "estimate_noise_variance",
    "sample_covariance",
    "DoaEstimate",
    "MusicConfig",
    "estimate_doas",
    "music_spectrum",
    "ObservationMatrix",
    "RisProfile",
    "SceneConfig",
    "draw_source_signals",
    "random_ris_profile",
    "ris_gain_vector",
    "steering_vector",
    "synthesize_observations",
]

__version__ = "0.1.0"
