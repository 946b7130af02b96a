"""Real signals sampled on a uniform, power-of-two grid over ``[-T, T)``.

Conventions
-----------
Fourier transform: ``F^(xi) = int F(t) exp(-i xi t) dt`` with Parseval
``int |F|^2 = (1/2pi) int |F^|^2``.  The grid is treated as one period of a
``2T``-periodic signal, so :func:`integral` is the trapezoid rule on
``[-T, T]`` with the closure ``v(T) = v(-T)`` and the DFT bins sit at
``xi_j = j pi / T``.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import GridMismatchError, NyquistError
from .intervals import FreqIntervalSet, hull

PathLike = Union[str, os.PathLike]

PRECISION_ENV = "SMALLSPEC_PRECISION"


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def next_pow2(n: float) -> int:
    n = max(1, math.ceil(n))
    return 1 << (n - 1).bit_length()


@dataclass(frozen=True)
class Grid:
    """Sample points ``t_m = -T + m*step`` for ``m = 0..count-1``.

    ``nu_max`` is the largest frequency the caller intends to track; the
    grid refuses to exist if that frequency is above Nyquist.
    """

    half_width: float
    step: float
    count: int
    nu_max: Optional[float] = None

    def __post_init__(self) -> None:
        if not (self.half_width > 0 and self.step > 0):
            raise ValueError("half_width and step must be positive")
        if not _is_pow2(self.count):
            raise ValueError(f"sample count must be a power of two, got {self.count}")
        if self.count != round(2 * self.half_width / self.step):
            raise ValueError("count must equal round(2T / step)")
        if self.nu_max is not None and self.nu_max > self.nyquist:
            raise NyquistError(
                f"tracked frequency {self.nu_max} exceeds Nyquist {self.nyquist:.6g}"
            )

    @classmethod
    def from_step(cls, half_width: float, step: float, nu_max: Optional[float] = None) -> "Grid":
        """Grid with the requested step rounded down to a power-of-two count."""
        count = next_pow2(2 * half_width / step - 1e-9)
        return cls(half_width, 2 * half_width / count, count, nu_max)

    @classmethod
    def for_bandwidth(
        cls, half_width: float, nu_max: float, oversample: float = 4.0
    ) -> "Grid":
        """Smallest power-of-two grid with Nyquist >= oversample * nu_max."""
        if nu_max <= 0 or oversample < 1:
            raise ValueError("nu_max must be positive and oversample >= 1")
        return cls.from_step(half_width, math.pi / (oversample * nu_max), nu_max)

    @property
    def times(self) -> np.ndarray:
        return -self.half_width + self.step * np.arange(self.count)

    @property
    def nyquist(self) -> float:
        return math.pi / self.step

    @property
    def bin_width(self) -> float:
        return math.pi / self.half_width

    def same_as(self, other: "Grid") -> bool:
        return (
            self.count == other.count
            and self.half_width == other.half_width
            and self.step == other.step
        )

    def to_dict(self) -> dict:
        return {"T": self.half_width, "delta": self.step, "M": self.count}


@dataclass(frozen=True, eq=False)
class SampledSignal:
    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.count,):
            raise ValueError(
                f"expected {self.grid.count} samples, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("signal values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "SampledSignal":
        return cls(grid, np.full(grid.count, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "SampledSignal":
        return cls(grid, fn(grid.times))

    def scaled(self, factor: float) -> "SampledSignal":
        return SampledSignal(self.grid, factor * self.values)

    def __add__(self, other: "SampledSignal") -> "SampledSignal":
        _same_grid(self, other)
        return SampledSignal(self.grid, self.values + other.values)


@dataclass(frozen=True, eq=False)
class SpectrumEstimate:
    freqs: np.ndarray
    amplitudes: np.ndarray
    bin_width: float

    @property
    def energy(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def _same_grid(a: SampledSignal, b: SampledSignal) -> None:
    if not a.grid.same_as(b.grid):
        raise GridMismatchError("signals live on different grids")


def pointwise_product(a: SampledSignal, b: SampledSignal) -> SampledSignal:
    _same_grid(a, b)
    return SampledSignal(a.grid, a.values * b.values)


def one_minus(a: SampledSignal) -> SampledSignal:
    return SampledSignal(a.grid, 1.0 - a.values)


def cosine_modulate(a: SampledSignal, k: float) -> SampledSignal:
    if k < 0:
        raise ValueError("modulation frequency must be >= 0")
    return SampledSignal(a.grid, a.values * np.cos(k * a.grid.times))


def integral(a: SampledSignal) -> float:
    """Trapezoid rule over one period of the grid.

    With the periodic closure the two half-weighted endpoints collapse onto
    the single sample at ``-T``, leaving ``step * sum(values)``.  For
    integrands band-limited below ``2 * nyquist`` this equals the integral
    over the window up to the tail mass outside ``[-T, T]``.
    """
    return float(a.grid.step * math.fsum(a.values))


def inner_product(a: SampledSignal, b: SampledSignal) -> float:
    _same_grid(a, b)
    return integral(pointwise_product(a, b))


def l2_norm_sq(a: SampledSignal) -> float:
    return integral(SampledSignal(a.grid, a.values * a.values))


def _bin_indices(count: int) -> np.ndarray:
    return np.arange(-count // 2, count // 2)


def dft_spectrum(a: SampledSignal) -> SpectrumEstimate:
    """``amp_j = step * sum_m v_m exp(-i xi_j t_m)`` for ``j in [-M/2, M/2)``.

    Since ``t_0 = -T``, the window offset contributes the factor
    ``exp(i j pi) = (-1)^j`` on top of a plain FFT.
    """
    g = a.grid
    j = _bin_indices(g.count)
    sign = np.where(j % 2 == 0, 1.0, -1.0)
    amps = g.step * sign * np.fft.fftshift(np.fft.fft(a.values))
    return SpectrumEstimate(j * g.bin_width, amps, g.bin_width)


def inverse_spectrum(est: SpectrumEstimate, grid: Grid) -> SampledSignal:
    """Invert :func:`dft_spectrum`; the imaginary residue is dropped."""
    j = _bin_indices(grid.count)
    sign = np.where(j % 2 == 0, 1.0, -1.0)
    raw = np.fft.ifft(np.fft.ifftshift(est.amplitudes * sign / grid.step))
    return SampledSignal(grid, raw.real)


def band_mask(freqs: np.ndarray, support: FreqIntervalSet, guard: float) -> np.ndarray:
    inside = np.zeros(freqs.shape, dtype=bool)
    for part in support:
        inside |= (freqs >= part.lo - guard) & (freqs <= part.hi + guard)
    return inside


def out_of_band_energy(
    a: SampledSignal, support: FreqIntervalSet, guard_bins: int = 4
) -> float:
    """Fraction of spectral energy outside ``support`` widened by guard bins."""
    if guard_bins < 0:
        raise ValueError("guard_bins must be >= 0")
    if support and hull(support).radius > a.grid.nyquist:
        raise NyquistError(
            f"support reaches {hull(support).radius}, Nyquist is {a.grid.nyquist:.6g}"
        )
    est = dft_spectrum(a)
    energy = est.energy
    total = float(energy.sum())
    if total == 0.0:
        return 0.0
    outside = ~band_mask(est.freqs, support, guard_bins * est.bin_width)
    return float(energy[outside].sum()) / total


def _precision() -> int:
    raw = os.environ.get(PRECISION_ENV)
    if not raw:
        return 17
    digits = int(raw)
    if not 1 <= digits <= 17:
        raise ValueError(f"{PRECISION_ENV} must be in 1..17")
    return digits


def write_signal_csv(path: PathLike, a: SampledSignal) -> None:
    fmt = f"%.{_precision()}g"
    data = np.column_stack([a.grid.times, a.values])
    np.savetxt(path, data, fmt=fmt, delimiter=",", header="t,value", comments="")


def read_signal_csv(path: PathLike, grid: Grid) -> SampledSignal:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape != (grid.count, 2):
        raise ValueError(f"{Path(path).name}: expected {grid.count} rows of t,value")
    if not np.allclose(data[:, 0], grid.times, rtol=0, atol=1e-9 * grid.half_width):
        raise ValueError(f"{Path(path).name}: time column does not match the grid")
    return SampledSignal(grid, data[:, 1])


def write_spectrum_csv(path: PathLike, est: SpectrumEstimate) -> None:
    fmt = f"%.{_precision()}g"
    amps = est.amplitudes
    data = np.column_stack([est.freqs, amps.real, amps.imag, np.abs(amps)])
    np.savetxt(path, data, fmt=fmt, delimiter=",", header="xi,re,im,abs", comments="")
