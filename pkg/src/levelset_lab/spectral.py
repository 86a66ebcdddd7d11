"""Fourier-lattice bookkeeping and spectral operators on the 2-D torus.

Scalar fields live on [-pi, pi]^2 with periodic boundary conditions and zero
spatial mean.  The state representation is the real orthonormal basis

    e_k(x) = c sin(k.x)  for k in the positive half-lattice,
    e_k(x) = c cos(k.x)  for k in the negative half-lattice,

with c = sqrt(2)/(2 pi).  The positive half-lattice is
{k : k2 > 0} union {k : k1 > 0, k2 = 0}; the origin is excluded everywhere
(zero-mean condition).  Coefficients are real and indexed by the full
punctured mode set, so every per-mode multiplier (fractional Laplacian,
velocity map, truncation) is a plain array operation.  Conversion to the
conjugate-symmetric complex representation happens only inside the FFT-based
grid transforms.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.fft as _fft

# L2-normalizing amplitude of the sine/cosine basis functions.
BASIS_AMPLITUDE = np.sqrt(2.0) / (2.0 * np.pi)

TORUS_SIDE = 2.0 * np.pi
TORUS_AREA = TORUS_SIDE**2


class ResolutionError(ValueError):
    """Grid resolution cannot resolve the requested mode set."""


class WaveVector(NamedTuple):
    """Integer lattice wavevector, origin excluded."""

    k1: int
    k2: int

    @property
    def norm_sq(self) -> int:
        return self.k1 * self.k1 + self.k2 * self.k2

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.norm_sq))

    @property
    def in_positive_half(self) -> bool:
        """Membership in {k2 > 0} union {k1 > 0, k2 = 0}."""
        return self.k2 > 0 or (self.k2 == 0 and self.k1 > 0)

    def __neg__(self) -> "WaveVector":
        return WaveVector(-self.k1, -self.k2)


def _positive_half_mask(k1: np.ndarray, k2: np.ndarray) -> np.ndarray:
    return (k2 > 0) | ((k2 == 0) & (k1 > 0))


class ModeIndexSet:
    """Punctured-lattice truncation set, closed under k -> -k.

    shape "euclidean_ball" keeps |k| <= N, shape "square" keeps
    max(|k1|,|k2|) <= N; both exclude the origin.  Modes are stored in
    lexicographic (k1, k2) order.  Instances are immutable and interned by
    (radius, shape), so they are cheap to compare and safe to share.
    """

    SHAPES = ("euclidean_ball", "square")

    def __init__(self, radius: int, shape: str = "euclidean_ball"):
        if radius < 1:
            raise ValueError(f"truncation radius must be >= 1, got {radius}")
        if shape not in self.SHAPES:
            raise ValueError(f"shape must be one of {self.SHAPES}, got {shape!r}")
        self.radius = int(radius)
        self.shape = shape

        r = self.radius
        g = np.arange(-r, r + 1)
        K1, K2 = np.meshgrid(g, g, indexing="ij")
        k1, k2 = K1.ravel(), K2.ravel()
        keep = ~((k1 == 0) & (k2 == 0))
        if shape == "euclidean_ball":
            keep &= k1 * k1 + k2 * k2 <= r * r
        k1, k2 = k1[keep], k2[keep]
        order = np.lexsort((k2, k1))
        self.k = np.stack([k1[order], k2[order]], axis=1).astype(np.int64)
        self.k.flags.writeable = False
        self.ksq = (self.k[:, 0] ** 2 + self.k[:, 1] ** 2).astype(np.float64)
        self.ksq.flags.writeable = False

        pos_mask = _positive_half_mask(self.k[:, 0], self.k[:, 1])
        self._index = {(int(a), int(b)): i for i, (a, b) in enumerate(self.k)}
        self.pos = np.nonzero(pos_mask)[0]
        self.neg = np.array(
            [self._index[(-int(a), -int(b))] for a, b in self.k[self.pos]],
            dtype=np.intp,
        )
        self.pos.flags.writeable = False
        self.neg.flags.writeable = False

    def __len__(self) -> int:
        return self.k.shape[0]

    def __contains__(self, kv) -> bool:
        return (int(kv[0]), int(kv[1])) in self._index

    def index_of(self, kv) -> int:
        """Position of wavevector kv in the lexicographic coefficient layout."""
        return self._index[(int(kv[0]), int(kv[1]))]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ModeIndexSet)
            and self.radius == other.radius
            and self.shape == other.shape
        )

    def __hash__(self) -> int:
        return hash((self.radius, self.shape))

    def __repr__(self) -> str:
        return f"ModeIndexSet(radius={self.radius}, shape={self.shape!r}, n={len(self)})"


_mode_set_cache: dict[tuple[int, str], ModeIndexSet] = {}
_cache_lock = threading.Lock()


def mode_set(radius: int, shape: str = "euclidean_ball") -> ModeIndexSet:
    """Interned constructor for ModeIndexSet."""
    key = (int(radius), shape)
    with _cache_lock:
        ms = _mode_set_cache.get(key)
        if ms is None:
            ms = ModeIndexSet(radius, shape)
            _mode_set_cache[key] = ms
        return ms


@dataclass(frozen=True)
class SpectralField:
    """Real coefficients over the sine/cosine basis of a ModeIndexSet."""

    modes: ModeIndexSet
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.shape != (len(self.modes),):
            raise ValueError(
                f"coefficient array has shape {c.shape}, expected ({len(self.modes)},)"
            )
        c = c.copy() if c.flags.writeable else c
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, modes: ModeIndexSet) -> "SpectralField":
        return cls(modes, np.zeros(len(modes)))

    @classmethod
    def unit(cls, modes: ModeIndexSet, kv, amplitude: float = 1.0) -> "SpectralField":
        """Field with a single nonzero coefficient on wavevector kv."""
        c = np.zeros(len(modes))
        c[modes.index_of(kv)] = amplitude
        return cls(modes, c)

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.modes, coeffs)

    def coeff(self, kv) -> float:
        return float(self.coeffs[self.modes.index_of(kv)])

    def norm(self, gamma: float = 0.0) -> float:
        """Sobolev norm: ||f||_gamma^2 = sum |k|^(2 gamma) coeff_k^2."""
        if gamma == 0.0:
            return float(np.sqrt(np.sum(self.coeffs**2)))
        return float(np.sqrt(np.sum(self.modes.ksq**gamma * self.coeffs**2)))

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_modes(self, other)
        return SpectralField(self.modes, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_modes(self, other)
        return SpectralField(self.modes, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.modes, self.coeffs * float(scalar))

    __rmul__ = __mul__


def _check_same_modes(a: SpectralField, b: SpectralField) -> None:
    if a.modes != b.modes:
        raise ValueError("fields live on different mode sets")


@dataclass(frozen=True)
class GridField:
    """Real values on the uniform grid x_ij = (-pi + 2 pi i/N, -pi + 2 pi j/N).

    Row-major: values[i, j] samples the point with first coordinate indexed
    by i.  Resolution must be a power of two.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"grid values must be square, got shape {v.shape}")
        n = v.shape[0]
        if n < 2 or (n & (n - 1)) != 0:
            raise ValueError(f"grid resolution must be a power of two >= 2, got {n}")
        v = v.copy() if v.flags.writeable else v
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    @property
    def cell_size(self) -> float:
        return TORUS_SIDE / self.resolution

    def mean(self) -> float:
        return float(self.values.mean())


@dataclass(frozen=True)
class VelocityField:
    """Divergence-free velocity as two spectral components (u1, u2)."""

    u1: SpectralField
    u2: SpectralField

    def __post_init__(self):
        _check_same_modes(self.u1, self.u2)

    @property
    def modes(self) -> ModeIndexSet:
        return self.u1.modes

    def max_divergence_coeff(self) -> float:
        """max_k |k . u_k| over the spectral divergence coefficients."""
        div = divergence(self)
        return float(np.max(np.abs(div.coeffs))) if len(div.coeffs) else 0.0


def grid_axis(n_grid: int) -> np.ndarray:
    """Grid coordinates -pi + 2 pi i / n_grid for i = 0..n_grid-1."""
    return -np.pi + TORUS_SIDE * np.arange(n_grid) / n_grid


def evaluate_basis_direct(modes: ModeIndexSet, points: np.ndarray) -> np.ndarray:
    """Direct evaluation of the basis matrix e_k(x) (slow; oracle path).

    points: (m, 2) array.  Returns (m, n_modes).  Kept free of FFTs so it can
    serve as an independent check of the fast transforms.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    phase = pts @ modes.k.T.astype(np.float64)
    pos_mask = _positive_half_mask(modes.k[:, 0], modes.k[:, 1])
    out = np.where(pos_mask[None, :], np.sin(phase), np.cos(phase))
    return BASIS_AMPLITUDE * out


class _TransformPlan:
    """Cached index maps between the mode layout and the rfft2 half-spectrum."""

    def __init__(self, modes: ModeIndexSet, n_grid: int):
        if n_grid < 2 * modes.radius + 2:
            raise ResolutionError(
                f"resolution {n_grid} too small for modes with radius "
                f"{modes.radius}; need n_grid >= {2 * modes.radius + 2}"
            )
        self.n_grid = n_grid
        kpos = modes.k[modes.pos]
        self.rows = np.mod(kpos[:, 0], n_grid).astype(np.intp)
        self.cols = kpos[:, 1].astype(np.intp)
        # Shift from the FFT origin to x = (-pi, -pi): phase (-1)^(k1+k2).
        self.phase = 1.0 - 2.0 * ((kpos[:, 0] + kpos[:, 1]) & 1)
        axis = np.nonzero(kpos[:, 1] == 0)[0]  # k2 = 0 needs its mirror row
        self.axis = axis
        self.axis_rows = (n_grid - kpos[axis, 0]).astype(np.intp)


_plan_cache: dict[tuple[int, str, int], _TransformPlan] = {}


def _plan(modes: ModeIndexSet, n_grid: int) -> _TransformPlan:
    key = (modes.radius, modes.shape, n_grid)
    with _cache_lock:
        plan = _plan_cache.get(key)
        if plan is None:
            plan = _TransformPlan(modes, n_grid)
            _plan_cache[key] = plan
        return plan


def synthesize(f: SpectralField, n_grid: int) -> GridField:
    """Evaluate the basis expansion on the uniform grid via an inverse FFT."""
    plan = _plan(f.modes, n_grid)
    a = f.coeffs[f.modes.pos]  # sine coefficients
    b = f.coeffs[f.modes.neg]  # cosine coefficients
    # e_k pair -> complex coefficient (c/2)(b - i a), with the grid-shift phase
    # and the n^2 factor that cancels the inverse-FFT normalization.
    scale = 0.5 * BASIS_AMPLITUDE * n_grid * n_grid
    chat = (scale * plan.phase) * (b - 1j * a)
    spec = np.zeros((n_grid, n_grid // 2 + 1), dtype=np.complex128)
    spec[plan.rows, plan.cols] = chat
    spec[plan.axis_rows, 0] = np.conj(chat[plan.axis])
    values = _fft.irfft2(spec, s=(n_grid, n_grid))
    return GridField(values)


def analyze(g: GridField, modes: ModeIndexSet) -> SpectralField:
    """Project grid values onto the mode set (exact on band-limited input)."""
    n_grid = g.resolution
    plan = _plan(modes, n_grid)
    spec = _fft.rfft2(g.values)
    chat = spec[plan.rows, plan.cols] * (plan.phase / (n_grid * n_grid))
    inv = 2.0 / BASIS_AMPLITUDE
    coeffs = np.zeros(len(modes))
    coeffs[modes.pos] = -inv * chat.imag
    coeffs[modes.neg] = inv * chat.real
    return SpectralField(modes, coeffs)


def apply_fractional_laplacian(f: SpectralField, gamma: float) -> SpectralField:
    """Multiply every coefficient by |k|^(2 gamma).

    Negative powers are fine: the origin mode is excluded by construction.
    """
    if gamma == 0.0:
        return f
    return f.with_coeffs(f.coeffs * f.modes.ksq**gamma)


def perp_gradient_inverse(theta: SpectralField, M: float) -> VelocityField:
    """Velocity map u = perp-gradient of the inverse operator: grad^perp A^-M theta.

    Convention grad^perp f = (-d2 f, d1 f).  The output is spectrally
    divergence-free mode by mode.
    """
    modes = theta.modes
    mult = modes.ksq ** (-M)
    a_psi = (theta.coeffs * mult)[modes.pos]  # sine part of A^-M theta
    b_psi = (theta.coeffs * mult)[modes.neg]  # cosine part
    kpos = modes.k[modes.pos].astype(np.float64)
    k1, k2 = kpos[:, 0], kpos[:, 1]

    u1 = np.zeros(len(modes))
    u2 = np.zeros(len(modes))
    # d_j maps (sin, cos) coefficients (a, b) -> (-k_j b, k_j a).
    u1[modes.pos] = k2 * b_psi
    u1[modes.neg] = -k2 * a_psi
    u2[modes.pos] = -k1 * b_psi
    u2[modes.neg] = k1 * a_psi
    return VelocityField(SpectralField(modes, u1), SpectralField(modes, u2))


def divergence(u: VelocityField) -> SpectralField:
    """Spectral divergence d1 u1 + d2 u2."""
    modes = u.modes
    kpos = modes.k[modes.pos].astype(np.float64)
    k1, k2 = kpos[:, 0], kpos[:, 1]
    a1, b1 = u.u1.coeffs[modes.pos], u.u1.coeffs[modes.neg]
    a2, b2 = u.u2.coeffs[modes.pos], u.u2.coeffs[modes.neg]
    out = np.zeros(len(modes))
    out[modes.pos] = -k1 * b1 - k2 * b2
    out[modes.neg] = k1 * a1 + k2 * a2
    return SpectralField(modes, out)


def project(f: SpectralField, radius: int, shape: str = "euclidean_ball") -> SpectralField:
    """Zero every coefficient outside the truncation set. Idempotent."""
    if radius < 1:
        raise ValueError(f"truncation radius must be >= 1, got {radius}")
    k = f.modes.k
    if shape == "euclidean_ball":
        keep = f.modes.ksq <= radius * radius
    elif shape == "square":
        keep = np.maximum(np.abs(k[:, 0]), np.abs(k[:, 1])) <= radius
    else:
        raise ValueError(f"shape must be one of {ModeIndexSet.SHAPES}, got {shape!r}")
    return f.with_coeffs(np.where(keep, f.coeffs, 0.0))


def l2_inner(f: SpectralField, g: SpectralField) -> float:
    """L2 inner product via Parseval (orthonormal basis)."""
    _check_same_modes(f, g)
    return float(np.dot(f.coeffs, g.coeffs))


def sobolev_inner(f: SpectralField, g: SpectralField, gamma: float) -> float:
    """<A^gamma f, g> = sum |k|^(2 gamma) f_k g_k."""
    _check_same_modes(f, g)
    return float(np.sum(f.modes.ksq**gamma * f.coeffs * g.coeffs))
