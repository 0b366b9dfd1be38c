"""
Spectro-temporal field envelopes on uniform frequency grids.

All arrays hold envelopes relative to the grid's center frequency; the carrier only enters the
wavelength labels (and the interferometric autocorrelation). Units are rad/fs, fs and nm.
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .error import Error, ValidationError, raise_on_invalid

# Speed of light in nm/fs
C_NM_PER_FS = 299.792458

DEFAULT_CENTER_WAVELENGTH_NM = 800.0
DEFAULT_SPAN = 0.30
DEFAULT_N_POINTS = 1024

# Largest intensity at the grid edges, relative to the peak, for a mode to count as contained
EDGE_TOLERANCE = 1e-8

FWHM_PER_SIGMA = math.sqrt(8.0 * math.log(2.0))

# Zero padding factor of the spectrum when measuring pulse durations
DURATION_OVERSAMPLING = 16


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class FrequencyGrid:
    """
    Uniform angular frequency grid centered at ``center_omega``. Sample ``n_points // 2`` sits
    exactly at the center, so ``offsets`` contains an exact zero.
    """

    center_omega: float
    span: float
    n_points: int = DEFAULT_N_POINTS

    def __post_init__(self):
        raise_on_invalid(
            isinstance(self.n_points, (int, np.integer))
            and self.n_points >= 64
            and _is_power_of_two(int(self.n_points)),
            f"n_points must be a power of two and at least 64, got {self.n_points}",
        )
        raise_on_invalid(
            math.isfinite(self.span) and self.span > 0,
            f"span must be positive, got {self.span} rad/fs",
        )
        raise_on_invalid(
            math.isfinite(self.center_omega) and self.center_omega > self.span / 2,
            f"center_omega {self.center_omega} rad/fs does not leave room for a span of "
            f"{self.span} rad/fs",
        )

    @property
    def delta_omega(self) -> float:
        return self.span / self.n_points

    @property
    def delta_t(self) -> float:
        """
        Sample spacing of the conjugate time axis in fs.
        """
        return 2.0 * math.pi / self.span

    @cached_property
    def offsets(self) -> np.ndarray:
        """
        Envelope frequencies relative to ``center_omega`` in rad/fs.
        """
        k = np.arange(self.n_points) - self.n_points // 2
        return _frozen(k * self.delta_omega)

    @cached_property
    def omega(self) -> np.ndarray:
        """
        Absolute angular frequencies in rad/fs. Strictly increasing.
        """
        return _frozen(self.center_omega + self.offsets)

    @cached_property
    def wavelength_nm(self) -> np.ndarray:
        """
        Vacuum wavelength of each sample in nm. Decreasing, since ``omega`` increases.
        """
        return _frozen(2.0 * math.pi * C_NM_PER_FS / self.omega)

    @cached_property
    def times(self) -> np.ndarray:
        """
        Time axis of the conjugate ``TemporalField`` in fs.
        """
        j = np.arange(self.n_points) - self.n_points // 2
        return _frozen(j * self.delta_t)

    @property
    def center_wavelength_nm(self) -> float:
        return 2.0 * math.pi * C_NM_PER_FS / self.center_omega

    def nm_to_omega_width(self, width_nm: float) -> float:
        """
        Converts a (small) wavelength interval around the grid center into an angular frequency
        interval: ``Δω = 2πc·Δλ/λ0²``.
        """
        return 2.0 * math.pi * C_NM_PER_FS * width_nm / self.center_wavelength_nm**2

    def describe(self) -> str:
        return (
            f"center_omega={self.center_omega!r} span={self.span!r} n_points={self.n_points!r}"
        )


def make_grid(
    center_wavelength: float = DEFAULT_CENTER_WAVELENGTH_NM,
    span: float = DEFAULT_SPAN,
    n_points: int = DEFAULT_N_POINTS,
) -> FrequencyGrid:
    """
    Create a frequency grid centered at the angular frequency of ``center_wavelength``.

    Example:

    .. code-block:: python

        from photon_shaper import make_grid

        grid = make_grid(800.0, 0.30, 1024)
        # 2.3546 rad/fs
        grid.center_omega

    :param center_wavelength: Center wavelength in nm. Must lie within (100, 10000) nm.
    :param span: Width of the grid in rad/fs. The conjugate time step is ``2π/span``.
    :param n_points: Number of samples, a power of two and at least 64. The default of 1024 with a
        span of 0.30 rad/fs around 800 nm covers more than ten times the bandwidth of a 9.4 nm
        photon and resolves the beat structure of a 150 fs Michelson delay with margin.
    :return: The validated ``FrequencyGrid``.
    """
    raise_on_invalid(
        100.0 < center_wavelength < 10000.0,
        f"center wavelength must lie within (100, 10000) nm, got {center_wavelength}",
    )
    center_omega = 2.0 * math.pi * C_NM_PER_FS / center_wavelength
    return FrequencyGrid(center_omega=center_omega, span=float(span), n_points=n_points)


@dataclass(frozen=True, eq=False)
class SpectralMode:
    """
    Complex spectral amplitude Ψ(ω) of a photon or a pulse, sampled on ``grid``. Units of the
    amplitude are (rad/fs)^(-1/2), so that a normalized mode satisfies ``Σ|Ψ|²Δω = 1``.

    The amplitude array is copied on construction and read only afterwards.
    """

    grid: FrequencyGrid
    amplitude: np.ndarray

    def __post_init__(self):
        amplitude = np.array(self.amplitude, dtype=np.complex128)
        raise_on_invalid(
            amplitude.shape == (self.grid.n_points,),
            f"amplitude must have shape ({self.grid.n_points},), got {amplitude.shape}",
        )
        raise_on_invalid(
            bool(np.all(np.isfinite(amplitude))), "amplitude contains NaN or infinite entries"
        )
        object.__setattr__(self, "amplitude", _frozen(amplitude))

    @classmethod
    def from_amplitude(cls, grid: FrequencyGrid, amplitude) -> "SpectralMode":
        """
        Build a normalized mode from an arbitrary (non zero) amplitude profile.
        """
        return cls(grid, amplitude).normalized()

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    def norm(self) -> float:
        """
        ``Σ|Ψ|²Δω``. One for normalized modes.
        """
        return float(np.sum(self.intensity) * self.grid.delta_omega)

    def normalized(self) -> "SpectralMode":
        norm = self.norm()
        if not norm > 0.0:
            raise Error("can not normalize a mode which is zero everywhere")
        return SpectralMode(self.grid, self.amplitude / math.sqrt(norm))

    def with_amplitude(self, amplitude) -> "SpectralMode":
        return SpectralMode(self.grid, amplitude)

    def edge_ratio(self) -> float:
        """
        Largest intensity at either grid edge relative to the peak intensity.
        """
        intensity = self.intensity
        peak = intensity.max()
        if peak == 0.0:
            return 0.0
        return float(max(intensity[0], intensity[-1]) / peak)

    def check_contained(self):
        """
        Raises if the mode is clipped by the grid, i.e. if its intensity at the grid edges exceeds
        ``EDGE_TOLERANCE`` of its peak.
        """
        ratio = self.edge_ratio()
        if ratio >= EDGE_TOLERANCE:
            raise ValidationError(
                f"mode is clipped by the grid: edge intensity is {ratio:.3g} of the peak, the "
                f"limit is {EDGE_TOLERANCE:g}. Widen the span."
            )


@dataclass(frozen=True, eq=False)
class TemporalField:
    """
    Temporal envelope ``E(t)`` (units fs^(-1/2)) conjugate to a ``SpectralMode`` on the same grid.
    The carrier ``grid.center_omega`` is factored out.
    """

    grid: FrequencyGrid
    envelope: np.ndarray

    def __post_init__(self):
        envelope = np.array(self.envelope, dtype=np.complex128)
        raise_on_invalid(
            envelope.shape == (self.grid.n_points,),
            f"envelope must have shape ({self.grid.n_points},), got {envelope.shape}",
        )
        raise_on_invalid(
            bool(np.all(np.isfinite(envelope))), "envelope contains NaN or infinite entries"
        )
        object.__setattr__(self, "envelope", _frozen(envelope))

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def delta_t(self) -> float:
        return self.grid.delta_t

    @property
    def carrier_omega(self) -> float:
        return self.grid.center_omega

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.envelope) ** 2

    def energy(self) -> float:
        """
        ``Σ|E|²Δt``, which equals the norm of the conjugate spectral mode.
        """
        return float(np.sum(self.intensity) * self.delta_t)


def gaussian_mode(
    grid: FrequencyGrid, center_offset: float = 0.0, fwhm_lambda: float = 9.4
) -> SpectralMode:
    """
    Transform limited Gaussian mode. The intensity ``|Ψ|²`` is Gaussian with an intensity FWHM of
    ``fwhm_lambda`` nm (converted around the grid center via ``2πc·Δλ/λ0²``) and the spectral
    phase is flat.

    :param grid: Grid to sample the mode on.
    :param center_offset: Offset of the spectral peak from the grid center in rad/fs.
    :param fwhm_lambda: Intensity FWHM in nm. The corresponding spectral standard deviation must
        not exceed a sixth of the span.
    :return: Normalized mode.
    """
    raise_on_invalid(fwhm_lambda > 0, f"fwhm_lambda must be positive, got {fwhm_lambda} nm")
    sigma = grid.nm_to_omega_width(fwhm_lambda) / FWHM_PER_SIGMA
    raise_on_invalid(
        sigma <= grid.span / 6.0,
        f"a spectral FWHM of {fwhm_lambda} nm (σ = {sigma:.4g} rad/fs) does not fit into a span "
        f"of {grid.span} rad/fs",
    )
    delta = grid.offsets - center_offset
    mode = SpectralMode.from_amplitude(grid, np.exp(-(delta**2) / (4.0 * sigma**2)))
    mode.check_contained()
    return mode


def _check_same_grid(a: FrequencyGrid, b: FrequencyGrid):
    if a != b:
        raise ValidationError(
            f"modes live on different grids: ({a.describe()}) vs ({b.describe()})"
        )


def overlap(a: SpectralMode, b: SpectralMode) -> complex:
    """
    Mode overlap ``Σ conj(Ψa)·Ψb·Δω``. For normalized modes its magnitude is at most one. There is
    no resampling: modes on different grids are an error.
    """
    _check_same_grid(a.grid, b.grid)
    return complex(np.vdot(a.amplitude, b.amplitude) * a.grid.delta_omega)


def to_time(m: SpectralMode) -> TemporalField:
    """
    Temporal envelope ``E(t) = (2π)^(-1/2) Σ Ψ(Ω) e^(−iΩt) Δω`` of a spectral mode. With this sign
    convention a spectral phase ``+Ωτ`` delays the pulse by ``τ``.
    """
    grid = m.grid
    scale = grid.delta_omega / math.sqrt(2.0 * math.pi)
    envelope = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(m.amplitude))) * scale
    return TemporalField(grid, envelope)


def from_time(f: TemporalField) -> SpectralMode:
    """
    Inverse of ``to_time``.
    """
    grid = f.grid
    scale = grid.n_points * grid.delta_t / math.sqrt(2.0 * math.pi)
    amplitude = np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(f.envelope))) * scale
    return SpectralMode(grid, amplitude)


def _crossing(x: np.ndarray, y: np.ndarray, i: int, j: int, level: float) -> float:
    return float(x[i] + (level - y[i]) / (y[j] - y[i]) * (x[j] - x[i]))


def fwhm(x, profile) -> float:
    """
    Full width at half maximum of a sampled nonnegative curve, in the units of ``x``.

    The width is measured between the outermost samples crossing half of the global maximum, with
    linear interpolation between neighbouring samples. Structured profiles (e.g. two separated
    peaks) therefore report the width spanning all lobes, the way a lab spectrometer width of a
    structured pulse is quoted. A curve still above half maximum at the end of the axis is measured
    up to that end.

    :param x: Sample positions, monotonic.
    :param profile: Nonnegative samples.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(profile, dtype=np.float64)
    raise_on_invalid(
        x.shape == y.shape and x.ndim == 1, "axis and profile must be 1-D of equal size"
    )
    peak = y.max() if y.size else 0.0
    raise_on_invalid(peak > 0.0, "profile is zero everywhere, its width is undefined")
    half = peak / 2.0
    above = np.flatnonzero(y >= half)
    first, last = int(above[0]), int(above[-1])
    left = x[first] if first == 0 else _crossing(x, y, first - 1, first, half)
    right = x[last] if last == y.size - 1 else _crossing(x, y, last, last + 1, half)
    return float(abs(right - left))


def _oversampled_intensity(m: SpectralMode, factor: int):
    grid = m.grid
    n = grid.n_points * factor
    padded = np.zeros(n, dtype=np.complex128)
    start = n // 2 - grid.n_points // 2
    padded[start : start + grid.n_points] = m.amplitude
    envelope = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(padded)))
    envelope *= grid.delta_omega / math.sqrt(2.0 * math.pi)
    times = (np.arange(n) - n // 2) * (grid.delta_t / factor)
    return times, np.abs(envelope) ** 2


def duration_fwhm(m: SpectralMode, oversampling: int = DURATION_OVERSAMPLING) -> float:
    """
    Temporal intensity FWHM of a mode in fs.

    The spectrum is zero padded to ``oversampling`` times its size before the transform, so the
    half maximum crossings are interpolated on a time step of ``2π/(span·oversampling)``. A 100 fs
    pulse on the default grid is sampled every 1.3 fs instead of every 21 fs.
    """
    raise_on_invalid(oversampling >= 1, f"oversampling must be positive, got {oversampling}")
    times, intensity = _oversampled_intensity(m, int(oversampling))
    return fwhm(times, intensity)


def restrict(m: SpectralMode, lower: float, upper: float) -> SpectralMode:
    """
    Restrict a mode to the offsets ``lower <= Ω < upper`` (rad/fs) and renormalize it.
    """
    offsets = m.grid.offsets
    window = (offsets >= lower) & (offsets < upper)
    amplitude = np.where(window, m.amplitude, 0.0)
    if not np.any(amplitude != 0.0):
        raise Error(f"mode has no support within [{lower}, {upper}) rad/fs")
    return SpectralMode.from_amplitude(m.grid, amplitude)
