"""Synthetic measurement generation.

Applies the instrument distortion taxonomy (amplitude scaling, global phase,
cable delay, impedance-mismatch tilt, Fano displacement, additive noise) to
ideal reflection traces, and builds the non-equidistant sweep grids used to
oversample the resonance region. These simulated traces are the oracle for
every inverse-pipeline test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .devices import ResonatorParams, ideal_reflection

_PI = math.pi


@dataclass(frozen=True)
class ComplexTrace:
    """Ordered frequency grid with complex reflection samples.

    ``frequencies`` in Hz, strictly increasing, at least 3 points;
    ``samples`` the same length. ``meta`` holds free-form acquisition
    metadata (probe power, flux control value, label, ...).
    """

    frequencies: np.ndarray
    samples: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        s = np.asarray(self.samples, dtype=complex)
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "samples", s)
        if f.ndim != 1 or s.ndim != 1:
            raise ValueError("frequencies and samples must be 1-D")
        if len(f) != len(s):
            raise ValueError(f"length mismatch: {len(f)} frequencies vs {len(s)} samples")
        if len(f) < 3:
            raise ValueError(f"trace needs at least 3 points, got {len(f)}")
        if not np.all(np.isfinite(f)) or not np.all(np.isfinite(s.view(float))):
            raise ValueError("trace contains non-finite values")
        if not np.all(np.diff(f) > 0.0):
            raise ValueError("frequencies must be strictly increasing")

    def __len__(self) -> int:
        return len(self.frequencies)

    @property
    def omega(self) -> np.ndarray:
        """Angular frequency grid, rad/s."""
        return 2.0 * _PI * self.frequencies

    def replace_samples(self, samples, **meta_updates) -> "ComplexTrace":
        meta = dict(self.meta)
        meta.update(meta_updates)
        return ComplexTrace(self.frequencies, samples, meta)


@dataclass(frozen=True)
class DistortionParams:
    """Instrument background applied to an ideal trace.

    sample_k = amplitude * exp(i(phase_offset - 2 pi f_k delay))
               * [fano_offset + tilt_rotation(ideal_k)]

    where the tilt rotates the ideal value about the off-resonant point
    (1, 0). All fields at identity (1, 0, 0, 0, 0) leave traces unchanged.
    """

    amplitude: float = 1.0
    phase_offset: float = 0.0   # rad
    delay: float = 0.0          # s
    tilt: float = 0.0           # rad
    fano_offset: complex = 0.0
    noise_sigma: float = 0.0    # per-quadrature additive std

    def __post_init__(self):
        if not (math.isfinite(self.amplitude) and self.amplitude > 0.0):
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if self.noise_sigma < 0.0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        for name in ("phase_offset", "delay", "tilt"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not (math.isfinite(self.fano_offset.real) and math.isfinite(self.fano_offset.imag)):
            raise ValueError("fano_offset must be finite")


@dataclass(frozen=True)
class SweepGrid:
    """Specification of a (possibly non-equidistant) frequency sweep."""

    center: float          # Hz
    span: float            # Hz
    count: int
    concentration: float = 0.0   # 0 = uniform; larger = denser at center

    def __post_init__(self):
        if not (math.isfinite(self.center) and math.isfinite(self.span) and self.span > 0.0):
            raise ValueError("center must be finite and span positive")
        if self.count < 3:
            raise ValueError(f"count must be >= 3, got {self.count}")
        if not (math.isfinite(self.concentration) and self.concentration >= 0.0):
            raise ValueError(f"concentration must be >= 0, got {self.concentration}")


def synth_grid(grid: SweepGrid) -> np.ndarray:
    """Frequency grid, denser near the center for concentration > 0.

    Uses the arctangent warp u -> tan(c u)/tan(c) on [-1, 1] with
    c = arctan(concentration), which keeps the endpoints at
    center +- span/2 and gives a center-to-edge spacing ratio of
    approximately 1/(1 + concentration^2).
    """
    u = np.linspace(-1.0, 1.0, grid.count)
    if grid.concentration == 0.0:
        w = u
    else:
        c = math.atan(grid.concentration)
        w = np.tan(c * u) / math.tan(c)
    return grid.center + 0.5 * grid.span * w


def apply_distortion(ideal: ComplexTrace, d: DistortionParams) -> ComplexTrace:
    """Apply the deterministic part of the distortion model (no noise)."""
    tilted = 1.0 + (ideal.samples - 1.0) * np.exp(1j * d.tilt)
    phases = d.phase_offset - 2.0 * _PI * ideal.frequencies * d.delay
    out = d.amplitude * np.exp(1j * phases) * (d.fano_offset + tilted)
    return ideal.replace_samples(out)


def add_noise(trace: ComplexTrace, sigma: float, seed: int) -> ComplexTrace:
    """Add independent zero-mean Gaussian noise of std sigma per quadrature.

    Deterministic for a fixed seed; no global random state is touched.
    """
    if sigma < 0.0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0.0:
        return trace.replace_samples(trace.samples.copy())
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((2, len(trace)))
    out = trace.samples + sigma * (noise[0] + 1j * noise[1])
    return trace.replace_samples(out)


def synth_background(frequencies, d: DistortionParams) -> ComplexTrace:
    """Background trace: the distortion applied to a resonance-free unit trace.

    Mirrors acquiring the instrument response with the resonance tuned far
    out of band.
    """
    f = np.asarray(frequencies, dtype=float)
    unit = ComplexTrace(f, np.ones(len(f), dtype=complex))
    return apply_distortion(unit, d)


def simulate_reflection(params: ResonatorParams, frequencies, d: DistortionParams,
                        seed: int | None = None) -> ComplexTrace:
    """Full synthetic measurement of a resonator: ideal response, distortion, noise."""
    f = np.asarray(frequencies, dtype=float)
    ideal = ComplexTrace(f, ideal_reflection(2.0 * _PI * f - params.omega0, params))
    out = apply_distortion(ideal, d)
    if d.noise_sigma > 0.0:
        if seed is None:
            raise ValueError("a seed is required when noise_sigma > 0")
        out = add_noise(out, d.noise_sigma, seed)
    return out
