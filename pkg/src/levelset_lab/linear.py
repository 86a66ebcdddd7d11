"""Exactly solvable linear field: fractional dissipation driven by the
diagonal forcing, mode by mode an Ornstein-Uhlenbeck process.

Starting from zero, each coefficient at time t is a centered Gaussian with

    a_k(t)^2 = sigma_k^2 (1 - exp(-2 nu |k|^(2 alpha) t)) / (2 nu |k|^(2 alpha))

and distinct modes stay independent.  Everything downstream (structure
functions, two-point covariances, level-set statistics of the linear field)
reduces to lattice sums over these variances; this module owns those sums and
the exact samplers.

Lattice sums run over the punctured lattice truncated to |k| <= cutoff.  For
alpha + delta > 1 the tails decay like |k|^(-2(alpha+delta)); where noted, a
radial-integral tail correction is added so results are accurate to roughly
O(cutoff^(2/3 - 2(alpha+delta))) rather than O(cutoff^(2 - 2(alpha+delta))).
"""

from __future__ import annotations

import functools
import threading
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate

from .noise import (
    STREAM_EXACT,
    STREAM_FORCING,
    NoiseSpec,
    SeedSpec,
    standard_normal_modes,
)
from .spectral import BASIS_AMPLITUDE, ModeIndexSet, SpectralField


@dataclass(frozen=True)
class ModelParams:
    """Dissipation strength/exponent, velocity smoothing, and forcing."""

    nu: float = 1.0
    alpha: float = 1.5
    M: float = 1.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        if not (self.nu > 0):
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not (self.alpha > 0):
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.M < 0:
            raise ValueError(f"M must be >= 0, got {self.M}")

    @property
    def spectral_exponent(self) -> float:
        """alpha + delta; lattice sums converge iff this exceeds 1."""
        return self.alpha + self.noise.delta

    @property
    def level_set_dimension(self) -> float:
        """Predicted box dimension of level sets: 3 - alpha - delta."""
        return 3.0 - self.spectral_exponent

    def damping_rates(self, modes: ModeIndexSet) -> np.ndarray:
        """Per-mode rates nu |k|^(2 alpha)."""
        return self.nu * modes.ksq**self.alpha

    def decay_factors(self, modes: ModeIndexSet, dt: float) -> np.ndarray:
        """Per-mode semigroup factors exp(-nu |k|^(2 alpha) dt)."""
        return np.exp(-self.damping_rates(modes) * dt)


def mode_variance(params: ModelParams, modes: ModeIndexSet, t: float) -> np.ndarray:
    """Variance a_k(t)^2 of each coefficient at time t (zero start)."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    lam = params.damping_rates(modes)
    sig = params.noise.sigma(modes)
    return sig**2 * (-np.expm1(-2.0 * lam * t)) / (2.0 * lam)


def step_noise_scale(params: ModelParams, modes: ModeIndexSet, dt: float) -> np.ndarray:
    """Std dev of the exact one-step stochastic convolution, a_k(dt)."""
    return np.sqrt(mode_variance(params, modes, dt))


def sample_exact(
    params: ModelParams, modes: ModeIndexSet, t: float, seed: SeedSpec
) -> SpectralField:
    """One exact draw of the linear field at time t (zero initial state)."""
    scale = np.sqrt(mode_variance(params, modes, t))
    xi = standard_normal_modes(modes, seed, STREAM_EXACT, 0)
    return SpectralField(modes, scale * xi)


def evolve_exact(
    params: ModelParams,
    theta0: SpectralField,
    dt: float,
    n_steps: int,
    seed: SeedSpec,
    start_step: int = 0,
) -> SpectralField:
    """March the linear field with the exact per-step transition.

    Each step multiplies by the semigroup and adds an independent draw of
    the one-step stochastic convolution:

        theta_(n+1) = exp(-nu |k|^(2 alpha) dt) theta_n + a_k(dt) xi_n

    The noise consumes one standard-normal vector per step, addressed by
    (seed, forcing stream, start_step + n), so any solver using the same
    addressing integrates the identical noise path.
    """
    if not (dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    if n_steps < 0:
        raise ValueError(f"n_steps must be >= 0, got {n_steps}")
    modes = theta0.modes
    decay = params.decay_factors(modes, dt)
    scale = step_noise_scale(params, modes, dt)
    coeffs = theta0.coeffs.copy()
    for n in range(n_steps):
        xi = standard_normal_modes(modes, seed, STREAM_FORCING, start_step + n)
        coeffs = decay * coeffs + scale * xi
    return SpectralField(modes, coeffs)


# ---------------------------------------------------------------------------
# Lattice sums


_half_lattice_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
_half_lattice_lock = threading.Lock()


def half_lattice(cutoff: int) -> tuple[np.ndarray, np.ndarray]:
    """Half lattice {k2 > 0} U {k2 = 0, k1 > 0} with |k| <= cutoff.

    Returns (k, ksq) with k of shape (n, 2).  Each entry represents the
    +-k pair, so full-lattice sums of k -> -k symmetric summands are twice
    the half-lattice sum.
    """
    if cutoff < 1:
        raise ValueError(f"cutoff must be >= 1, got {cutoff}")
    with _half_lattice_lock:
        cached = _half_lattice_cache.get(cutoff)
        if cached is not None:
            return cached
    r = int(cutoff)
    k1 = np.arange(-r, r + 1, dtype=np.int64)
    k2 = np.arange(0, r + 1, dtype=np.int64)
    K1, K2 = np.meshgrid(k1, k2, indexing="ij")
    keep = (K2 > 0) | ((K2 == 0) & (K1 > 0))
    ksq = K1 * K1 + K2 * K2
    keep &= ksq <= r * r
    k = np.stack([K1[keep], K2[keep]], axis=1)
    out = (k, ksq[keep].astype(np.float64))
    with _half_lattice_lock:
        _half_lattice_cache[cutoff] = out
    return out


@functools.lru_cache(maxsize=8)
def _pair_variances(params: ModelParams, t: float, cutoff: int):
    """Half-lattice wavevectors and the variance a_k(t)^2 on each pair.

    Cached: repeated covariance evaluations at a fixed (params, t, cutoff)
    reuse the weights.  Callers must not mutate the returned arrays.
    """
    k, ksq = half_lattice(cutoff)
    lam = params.nu * ksq**params.alpha
    sig_sq = params.noise.c_amp**2 * ksq ** (-params.noise.delta)
    w = sig_sq * (-np.expm1(-2.0 * lam * t)) / (2.0 * lam)
    return k, w


def _warn_if_divergent(params: ModelParams) -> None:
    if params.spectral_exponent <= 1.0:
        warnings.warn(
            "alpha + delta <= 1: the mode-variance lattice sum diverges and "
            "truncated values grow without bound as the cutoff increases",
            RuntimeWarning,
            stacklevel=3,
        )


def _variance_tail_integral(params: ModelParams, t: float, cutoff: int) -> float:
    """Radial-integral estimate of sum a_k(t)^2 over |k| > cutoff (full lattice)."""
    nu, al = params.nu, params.alpha
    s2 = 2.0 * params.spectral_exponent
    camp2 = params.noise.c_amp**2

    def integrand(r):
        lam = nu * r ** (2.0 * al)
        return 2.0 * np.pi * r * camp2 * r ** (-s2 + 2.0 * al) * (
            -np.expm1(-2.0 * lam * t)
        ) / (2.0 * lam)

    val, _ = scipy.integrate.quad(integrand, cutoff, np.inf)
    return val


def sigma_t_squared(
    params: ModelParams,
    t: float,
    cutoff: int = 256,
    tail_correction: bool = True,
) -> float:
    """Normalized total variance sum_k (1 - exp(-2 nu |k|^(2a) t)) / (4 nu |k|^(2a+2d)).

    This is the c_amp-independent normalization used for level heights: the
    pointwise variance of the field is c_amp^2 sigma_t^2 / (2 pi^2).  Diverges
    as cutoff -> infinity when alpha + delta <= 1 (a warning is issued and the
    truncated sum returned).
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t == 0:
        return 0.0
    _warn_if_divergent(params)
    _, w = _pair_variances(params, t, cutoff)
    total = 2.0 * float(np.sum(w))
    if tail_correction and params.spectral_exponent > 1.0:
        total += _variance_tail_integral(params, t, cutoff)
    return total / (2.0 * params.noise.c_amp**2)


def pointwise_std(params: ModelParams, t: float, cutoff: int = 256) -> float:
    """Standard deviation of the field value at any fixed point."""
    var = params.noise.c_amp**2 * sigma_t_squared(params, t, cutoff) / (
        2.0 * np.pi**2
    )
    return float(np.sqrt(var))


def two_point_covariance(
    params: ModelParams,
    x,
    y,
    t: float,
    cutoff: int = 512,
) -> float:
    """Covariance E[z(t,x) z(t,y)] of the linear field (truncated sum).

    Stationary in space: depends on x and y only through x - y.
    """
    r = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    k, w = _pair_variances(params, t, cutoff)
    phase = k[:, 0] * r[0] + k[:, 1] * r[1]
    return float(BASIS_AMPLITUDE**2 * np.sum(w * np.cos(phase)))


def structure_function_analytic(
    params: ModelParams,
    r,
    t: float,
    cutoff: int = 1024,
    tail_correction: bool = True,
):
    """E|z(t,x) - z(t,x+r)|^2 for separation(s) r.

    r may be a single 2-vector or an (n, 2) array.  The lattice form is

        4 c^2 sum_(half lattice) a_k(t)^2 sin^2(k.r / 2)

    with c the basis amplitude.  The tail correction replaces sin^2 by its
    mean 1/2 beyond the cutoff and integrates radially.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    _warn_if_divergent(params)
    rs = np.atleast_2d(np.asarray(r, dtype=np.float64))
    if rs.shape[-1] != 2:
        raise ValueError(f"separations must have 2 components, got shape {rs.shape}")
    k, w = _pair_variances(params, t, cutoff)
    csq = BASIS_AMPLITUDE**2
    out = np.empty(rs.shape[0])
    for i, rv in enumerate(rs):
        half_phase = 0.5 * (k[:, 0] * rv[0] + k[:, 1] * rv[1])
        out[i] = 4.0 * csq * float(np.sum(w * np.sin(half_phase) ** 2))
    if tail_correction and params.spectral_exponent > 1.0:
        tail = csq * _variance_tail_integral(params, t, cutoff)
        out += np.where(np.all(rs == 0.0, axis=1), 0.0, tail)
    return out[0] if np.asarray(r).ndim == 1 else out
