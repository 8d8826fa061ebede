"""Cone-adapted shearlet filter banks as small real convolution kernels.

The bank is built in the frequency domain: for every (scale, direction) pair
a smooth Meyer-type window is placed on the horizontal or vertical frequency
cone, band-limited to an annulus whose radius grows with the scale index.
An inverse DFT and a center crop turn each window into a compact spatial
kernel suitable as fixed convolution weights.

Frequencies are expressed in cycles per sample, so the axis Nyquist rate is
0.5. Band centers are spaced geometrically (factor 2 per scale) below
``_TOP_BAND_CENTER``; each band spans ``_BAND_HALF_OCTAVES`` octaves to
either side. The top band sits just inside Nyquist so that even after a
5x5 crop the per-scale peak radii stay strictly ordered.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

# Radial placement of the band-pass annuli (cycles/sample and octaves).
_TOP_BAND_CENTER = 0.45
_BAND_SCALE_RATIO = 2.0
_BAND_HALF_OCTAVES = 0.6


@dataclass(frozen=True)
class ShearletSpec:
    """Parameters of a shearlet filter bank."""

    num_scales: int = 3
    dirs_per_scale: int = 6
    kernel_size: int = 5
    freq_grid: int = 64
    normalize: bool = True

    def __post_init__(self) -> None:
        if self.num_scales < 1:
            raise ValueError(f"num_scales must be >= 1, got {self.num_scales}")
        if self.dirs_per_scale < 1:
            raise ValueError(f"dirs_per_scale must be >= 1, got {self.dirs_per_scale}")
        if self.kernel_size < 3 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd and >= 3, got {self.kernel_size}")
        if self.freq_grid < 4 * self.kernel_size:
            raise ValueError(
                f"freq_grid must be >= 4 * kernel_size, got {self.freq_grid} < {4 * self.kernel_size}"
            )


@dataclass(frozen=True)
class FrequencySpectrum:
    """One DC-centered complex frequency window of the bank."""

    grid: np.ndarray
    scale: int
    direction: int

    def __post_init__(self) -> None:
        if self.grid.ndim != 2 or self.grid.shape[0] != self.grid.shape[1]:
            raise ValueError(f"grid must be square, got shape {self.grid.shape}")
        if not np.all(np.isfinite(self.grid)):
            raise ValueError("spectrum contains non-finite values")
        self.grid.setflags(write=False)


@dataclass(frozen=True)
class SpatialFilter:
    """A real square convolution kernel for one (scale, direction)."""

    weights: np.ndarray
    scale: int
    direction: int

    def __post_init__(self) -> None:
        if self.weights.ndim != 2 or self.weights.shape[0] != self.weights.shape[1]:
            raise ValueError(f"weights must be square, got shape {self.weights.shape}")
        self.weights.setflags(write=False)


@dataclass(frozen=True)
class FilterBank:
    """All spatial filters of a spec, ordered (s=1,d=1..D), (s=2,d=1..D), ..."""

    filters: tuple[SpatialFilter, ...]
    spec: ShearletSpec = field(default_factory=ShearletSpec)

    def __post_init__(self) -> None:
        expected = self.spec.num_scales * self.spec.dirs_per_scale
        if len(self.filters) != expected:
            raise ValueError(f"bank must hold {expected} filters, got {len(self.filters)}")

    def filter_at(self, scale: int, direction: int) -> SpatialFilter:
        idx = (scale - 1) * self.spec.dirs_per_scale + (direction - 1)
        return self.filters[idx]


def _meyer_ramp(t: np.ndarray) -> np.ndarray:
    """Polynomial C^3 ramp rising from 0 at t=0 to 1 at t=1."""
    t = np.clip(t, 0.0, 1.0)
    return t**4 * (35.0 - 84.0 * t + 70.0 * t**2 - 20.0 * t**3)


def _bump(x: np.ndarray) -> np.ndarray:
    """Smooth even bump: 1 at x=0, 0 for |x| >= 1."""
    ax = np.abs(x)
    out = np.zeros_like(ax)
    inside = ax < 1.0
    out[inside] = np.cos(0.5 * np.pi * _meyer_ramp(ax[inside]))
    return out


def _band_center(scale: int, num_scales: int) -> float:
    return _TOP_BAND_CENTER * _BAND_SCALE_RATIO ** (scale - num_scales)


def _radial_window(radius: np.ndarray, center: float) -> np.ndarray:
    """Band-pass bump in log2 radius around `center`; zero at DC."""
    out = np.zeros_like(radius)
    pos = radius > 0.0
    x = np.log2(radius[pos] / center) / _BAND_HALF_OCTAVES
    out[pos] = _bump(x)
    return out


def _cone_slopes(count: int) -> tuple[list[float], float]:
    """`count` slope centers uniformly covering [-1, 1], plus the cell step."""
    step = 2.0 / count
    centers = [-1.0 + step * (i + 0.5) for i in range(count)]
    return centers, step


def build_cone_shearlet_spectrum(spec: ShearletSpec, s: int, d: int) -> FrequencySpectrum:
    """Frequency window for scale ``s`` and direction ``d``.

    Directions 1..ceil(D/2) live on the horizontal cone (slope measured as
    fy/fx), the remainder on the vertical cone (fx/fy), each cone covered
    uniformly by increasing slope. The window is real and even, so the
    corresponding spatial kernel is real.
    """
    if not 1 <= s <= spec.num_scales:
        raise ValueError(f"scale index {s} outside [1, {spec.num_scales}]")
    if not 1 <= d <= spec.dirs_per_scale:
        raise ValueError(f"direction index {d} outside [1, {spec.dirs_per_scale}]")

    n = spec.freq_grid
    f = (np.arange(n) - n // 2) / n
    fy, fx = np.meshgrid(f, f, indexing="ij")
    radius = np.hypot(fx, fy)
    radial = _radial_window(radius, _band_center(s, spec.num_scales))

    n_horizontal = (spec.dirs_per_scale + 1) // 2
    if d <= n_horizontal:
        centers, step = _cone_slopes(n_horizontal)
        slope_center = centers[d - 1]
        denom, numer = fx, fy
    else:
        centers, step = _cone_slopes(spec.dirs_per_scale - n_horizontal)
        slope_center = centers[d - n_horizontal - 1]
        denom, numer = fy, fx

    slope = np.divide(numer, denom, out=np.full_like(denom, np.inf), where=denom != 0)
    angular = _bump((slope - slope_center) / step)
    angular[denom == 0] = 0.0

    grid = (radial * angular).astype(np.complex128)
    return FrequencySpectrum(grid=grid, scale=s, direction=d)


def spectrum_to_kernel(
    spectrum: FrequencySpectrum, kernel_size: int, normalize: bool = True
) -> SpatialFilter:
    """Inverse-transform a frequency window and crop it to a small kernel.

    The spectrum is Hermitian-symmetrized first so the inverse DFT is exactly
    real; the center crop is then optionally made zero-mean and unit-L2.
    """
    n = spectrum.grid.shape[0]
    if kernel_size % 2 == 0 or kernel_size < 1:
        raise ValueError(f"kernel_size must be odd and positive, got {kernel_size}")
    if kernel_size > n:
        raise ValueError(f"kernel_size {kernel_size} exceeds frequency grid {n}")

    unshifted = np.fft.ifftshift(spectrum.grid)
    reflected = np.conj(unshifted[(-np.arange(n)) % n][:, (-np.arange(n)) % n])
    symmetric = 0.5 * (unshifted + reflected)
    spatial = np.fft.fftshift(np.real(np.fft.ifft2(symmetric)))

    c = n // 2
    h = kernel_size // 2
    weights = spatial[c - h : c + h + 1, c - h : c + h + 1].copy()
    if normalize:
        weights -= weights.mean()
        norm = np.linalg.norm(weights)
        if norm == 0.0:
            raise ValueError("degenerate spectrum: cropped kernel has zero energy")
        weights /= norm
    return SpatialFilter(weights=weights, scale=spectrum.scale, direction=spectrum.direction)


def build_bank(spec: ShearletSpec) -> FilterBank:
    """Build every (scale, direction) filter of the spec, in bank order."""
    filters = []
    for s in range(1, spec.num_scales + 1):
        for d in range(1, spec.dirs_per_scale + 1):
            spectrum = build_cone_shearlet_spectrum(spec, s, d)
            filters.append(spectrum_to_kernel(spectrum, spec.kernel_size, spec.normalize))
    return FilterBank(filters=tuple(filters), spec=spec)


def frequency_response(filt: SpatialFilter, grid: int) -> np.ndarray:
    """DC-centered magnitude response of a kernel zero-padded to grid x grid."""
    ks = filt.weights.shape[0]
    if grid < ks:
        raise ValueError(f"response grid {grid} smaller than kernel size {ks}")
    padded = np.zeros((grid, grid))
    c = grid // 2
    h = ks // 2
    padded[c - h : c + h + 1, c - h : c + h + 1] = filt.weights
    return np.abs(np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(padded))))


def response_peak(magnitude: np.ndarray) -> tuple[float, float]:
    """(radius, orientation-in-[0, pi)) of the response argmax.

    Radius is in cycles/sample on the DC-centered grid the magnitudes were
    computed over.
    """
    n = magnitude.shape[0]
    iy, ix = np.unravel_index(int(np.argmax(magnitude)), magnitude.shape)
    fy = (iy - n // 2) / n
    fx = (ix - n // 2) / n
    return float(np.hypot(fx, fy)), float(np.arctan2(fy, fx) % np.pi)


def bank_to_json(bank: FilterBank) -> str:
    """Serialize a bank to the interchange JSON document."""
    doc = {
        "spec": {
            "num_scales": bank.spec.num_scales,
            "dirs_per_scale": bank.spec.dirs_per_scale,
            "kernel_size": bank.spec.kernel_size,
            "freq_grid": bank.spec.freq_grid,
            "normalize": bank.spec.normalize,
        },
        "filters": [
            {
                "scale": f.scale,
                "direction": f.direction,
                "weights": [float(w) for w in f.weights.ravel()],
            }
            for f in bank.filters
        ],
    }
    return json.dumps(doc, indent=2)


def bank_from_json(text: str) -> FilterBank:
    """Inverse of :func:`bank_to_json`."""
    doc = json.loads(text)
    spec = ShearletSpec(**doc["spec"])
    filters = tuple(
        SpatialFilter(
            weights=np.array(entry["weights"], dtype=float).reshape(
                spec.kernel_size, spec.kernel_size
            ),
            scale=entry["scale"],
            direction=entry["direction"],
        )
        for entry in doc["filters"]
    )
    return FilterBank(filters=filters, spec=spec)
