"""Synthetic RIS-assisted NLoS scenes.

A linear RIS with ``N`` elements reflects ``K`` far-field narrowband sources
towards an ``M``-antenna base station. Over ``L`` time slots the RIS applies a
different phase profile, and the BS records the ``L x M`` observation matrix

    Y = B^T A(theta) s h^T + V,

where ``B`` (N x L) stacks the per-slot RIS gain vectors, ``A`` is the array
manifold of the RIS, ``s`` holds the (slot-constant) source amplitudes and
``h`` is the BS steering row for the RIS->BS arrival angle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SceneConfig",
    "RisProfile",
    "ObservationMatrix",
    "steering_vector",
    "array_manifold",
    "random_ris_profile",
    "ris_gain_vector",
    "measurement_matrix",
    "draw_source_signals",
    "synthesize_observations",
]


def _half_wavelength_positions(count: int, wavelength: float) -> np.ndarray:
    return np.arange(count) * (wavelength / 2.0)


@dataclass(frozen=True)
class SceneConfig:
    """Physical and experiment parameters of one scene.

    Angles are in degrees. Positions default to a half-wavelength ULA starting
    at the origin. ``snr_db = inf`` disables the additive noise.
    """

    num_antennas: int = 4
    num_ris: int = 16
    num_slots: int = 32
    source_doas: tuple[float, ...] = (5.345, 25.789, 45.456)
    dod_alpha: float = 20.0
    doa_beta: float = 10.0
    wavelength: float = 1.0
    snr_db: float = np.inf
    rng_seed: int = 0
    ris_positions: tuple[float, ...] | None = None
    antenna_positions: tuple[float, ...] | None = None

    def __post_init__(self):
        for name in ("num_antennas", "num_ris", "num_slots"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        doas = tuple(float(t) for t in np.atleast_1d(self.source_doas))
        object.__setattr__(self, "source_doas", doas)
        K = len(doas)
        if K < 1:
            raise ValueError("at least one source DoA is required")
        if not all(np.isfinite(doas)) or any(t < -90.0 or t >= 90.0 for t in doas):
            raise ValueError(f"source DoAs must lie in [-90, 90) degrees, got {doas}")
        if len(set(doas)) != K:
            raise ValueError(f"source DoAs must be distinct, got {doas}")
        if not K < self.num_ris:
            raise ValueError(f"need K < N for identifiability (K={K}, N={self.num_ris})")
        if not K < self.num_slots:
            raise ValueError(f"need K < L for identifiability (K={K}, L={self.num_slots})")
        if self.num_slots < self.num_ris:
            raise ValueError(
                f"need L >= N so the RIS measurement matrix has full row rank "
                f"(L={self.num_slots}, N={self.num_ris})"
            )
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be unsigned")
        for name, count in (("ris_positions", self.num_ris), ("antenna_positions", self.num_antennas)):
            pos = getattr(self, name)
            if pos is not None:
                pos = tuple(float(x) for x in pos)
                if len(pos) != count:
                    raise ValueError(f"{name} must have {count} entries, got {len(pos)}")
                object.__setattr__(self, name, pos)

    @property
    def num_sources(self) -> int:
        return len(self.source_doas)

    @property
    def p(self) -> np.ndarray:
        """RIS element positions."""
        if self.ris_positions is None:
            return _half_wavelength_positions(self.num_ris, self.wavelength)
        return np.asarray(self.ris_positions, dtype=float)

    @property
    def q(self) -> np.ndarray:
        """BS antenna positions."""
        if self.antenna_positions is None:
            return _half_wavelength_positions(self.num_antennas, self.wavelength)
        return np.asarray(self.antenna_positions, dtype=float)


@dataclass(frozen=True)
class RisProfile:
    """Per-slot reflection amplitudes ``gains`` and phases (radians), both L x N."""

    gains: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=float)
        phases = np.asarray(self.phases, dtype=float)
        if gains.ndim != 2 or gains.shape != phases.shape:
            raise ValueError("gains and phases must be L x N matrices of equal shape")
        if np.any(gains <= 0):
            raise ValueError("RIS gains must be strictly positive")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "phases", phases)

    @property
    def num_slots(self) -> int:
        return self.gains.shape[0]

    @property
    def num_ris(self) -> int:
        return self.gains.shape[1]


@dataclass(frozen=True)
class ObservationMatrix:
    Y: np.ndarray
    clean: np.ndarray
    noise_var: float = 0.0
    B: np.ndarray | None = field(default=None, repr=False)


def steering_vector(theta, positions, wavelength=1.0):
    """Array response ``exp(j 2pi/lambda * p_n * sin(theta))`` for ``theta`` in degrees.

    ``theta`` may be a scalar (returns a length-N vector) or a 1-D array of
    angles (returns the N x len(theta) manifold).
    """
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ValueError("steering angle must be finite")
    positions = np.asarray(positions, dtype=float)
    if not np.all(np.isfinite(positions)):
        raise ValueError("positions must be finite")
    if not wavelength > 0:
        raise ValueError("wavelength must be positive")
    k = 2.0 * np.pi / wavelength
    phase = k * np.multiply.outer(positions, np.sin(np.deg2rad(theta)))
    return np.exp(1j * phase)


def array_manifold(cfg: SceneConfig) -> np.ndarray:
    """N x K matrix A(theta) of RIS steering vectors for the configured sources."""
    return steering_vector(np.asarray(cfg.source_doas), cfg.p, cfg.wavelength)


def random_ris_profile(num_slots: int, num_ris: int, rng: np.random.Generator) -> RisProfile:
    """Unit-gain profile with phases drawn i.i.d. from {0, pi} per slot and element."""
    phases = np.pi * rng.integers(0, 2, size=(num_slots, num_ris))
    return RisProfile(np.ones((num_slots, num_ris)), phases.astype(float))


def ris_gain_vector(profile: RisProfile, slot: int, alpha, positions, wavelength=1.0) -> np.ndarray:
    """Gain vector b(l) of the RIS in (1-based) slot ``slot``.

    Element n is ``G_n(l) exp(j phi_n(l)) exp(j 2pi/lambda p_n sin(alpha))``.
    """
    if not 1 <= slot <= profile.num_slots:
        raise IndexError(f"slot {slot} out of range 1..{profile.num_slots}")
    g = profile.gains[slot - 1] * np.exp(1j * profile.phases[slot - 1])
    return steering_vector(alpha, positions, wavelength) * g


def measurement_matrix(profile: RisProfile, alpha, positions, wavelength=1.0) -> np.ndarray:
    """The N x L RIS measurement matrix B = [b(1), ..., b(L)]."""
    positions = np.asarray(positions, dtype=float)
    if positions.shape != (profile.num_ris,):
        raise ValueError(f"expected {profile.num_ris} RIS positions, got {positions.shape}")
    g = profile.gains * np.exp(1j * profile.phases)  # L x N
    return (g * steering_vector(alpha, positions, wavelength)).T


def draw_source_signals(num_sources: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance circular complex Gaussian amplitudes, one per source."""
    z = rng.standard_normal((2, num_sources))
    return (z[0] + 1j * z[1]) / np.sqrt(2.0)


def _noise_variance(clean: np.ndarray, snr_db: float) -> float:
    if np.isposinf(snr_db):
        return 0.0
    power = np.sum(np.abs(clean) ** 2) / clean.size
    return float(power / 10.0 ** (snr_db / 10.0))


def synthesize_observations(
    cfg: SceneConfig,
    profile: RisProfile,
    s,
    rng: np.random.Generator | None = None,
) -> ObservationMatrix:
    """Build the observation matrix for ``cfg`` under RIS ``profile``.

    The noise variance is set so that the mean per-entry power of the clean
    part over the per-entry noise variance equals ``cfg.snr_db``. When no
    generator is passed, one is seeded from ``cfg.rng_seed``.
    """
    s = np.asarray(s, dtype=complex).ravel()
    if s.shape != (cfg.num_sources,):
        raise ValueError(f"expected {cfg.num_sources} source amplitudes, got {s.shape[0]}")
    if (profile.num_slots, profile.num_ris) != (cfg.num_slots, cfg.num_ris):
        raise ValueError(
            f"RIS profile is {profile.num_slots}x{profile.num_ris}, "
            f"scene needs {cfg.num_slots}x{cfg.num_ris}"
        )
    B = measurement_matrix(profile, cfg.dod_alpha, cfg.p, cfg.wavelength)
    column = B.T @ (array_manifold(cfg) @ s)
    bs_row = steering_vector(cfg.doa_beta, cfg.q, cfg.wavelength)
    clean = np.outer(column, bs_row)

    noise_var = _noise_variance(clean, cfg.snr_db)
    if noise_var == 0.0:
        return ObservationMatrix(clean.copy(), clean, 0.0, B)
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    z = rng.standard_normal((2,) + clean.shape)
    V = np.sqrt(noise_var / 2.0) * (z[0] + 1j * z[1])
    return ObservationMatrix(clean + V, clean, noise_var, B)
