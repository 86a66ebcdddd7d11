"""Power-law forcing spectrum and reproducible Gaussian increments.

The forcing is diagonal in the sine/cosine basis: independent Brownian
motions per mode with amplitude

    sigma_k = c_amp |k|^(-delta)

so a time-dt increment of the forcing term has per-mode variance
sigma_k^2 dt.  Reproducibility contract: every draw is a single
standard-normal vector in the canonical (lexicographic) mode order, keyed by
(master_seed, replica, stream, step) through a SeedSequence spawn key.  Draws
therefore do not depend on how replicas are scheduled across workers or on
any generator state carried between calls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import ModeIndexSet, SpectralField

# Stream identifiers keep independent uses of randomness from colliding.
STREAM_FORCING = 0  # per-step forcing increments
STREAM_EXACT = 1  # one-shot stationary/exact samples
STREAM_INITIAL = 2  # initial conditions
STREAM_ANALYSIS = 3  # post-hoc diagnostics (point-pair sampling etc.)


@dataclass(frozen=True)
class NoiseSpec:
    """Spectral slope and overall amplitude of the forcing."""

    delta: float = 0.25
    c_amp: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.delta):
            raise ValueError(f"delta must be finite, got {self.delta}")
        if not (self.c_amp >= 0):
            raise ValueError(f"c_amp must be >= 0, got {self.c_amp}")

    def sigma(self, modes: ModeIndexSet) -> np.ndarray:
        """Per-mode amplitudes sigma_k in canonical mode order."""
        return self.c_amp * modes.ksq ** (-0.5 * self.delta)


@dataclass(frozen=True)
class SeedSpec:
    """Addresses one replica's randomness under a master seed."""

    master_seed: int = 0
    replica: int = 0

    def __post_init__(self):
        if not (0 <= self.master_seed < 2**63):
            raise ValueError(f"master_seed out of range: {self.master_seed}")
        if self.replica < 0:
            raise ValueError(f"replica must be >= 0, got {self.replica}")

    def generator(self, stream: int, step: int) -> np.random.Generator:
        """Fresh generator for one (stream, step) address."""
        seq = np.random.SeedSequence(
            self.master_seed, spawn_key=(self.replica, stream, step)
        )
        return np.random.default_rng(seq)

    def with_replica(self, replica: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, replica)


def standard_normal_modes(
    modes: ModeIndexSet, seed: SeedSpec, stream: int, step: int
) -> np.ndarray:
    """One N(0,1) draw per mode, canonical order, fully seed-addressed."""
    return seed.generator(stream, step).standard_normal(len(modes))


def sample_increment(
    modes: ModeIndexSet,
    spec: NoiseSpec,
    seed: SeedSpec,
    step: int,
    dt: float,
) -> SpectralField:
    """Forcing increment over a time step: per-mode N(0, sigma_k^2 dt)."""
    if not (dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    xi = standard_normal_modes(modes, seed, STREAM_FORCING, step)
    return SpectralField(modes, spec.sigma(modes) * np.sqrt(dt) * xi)
