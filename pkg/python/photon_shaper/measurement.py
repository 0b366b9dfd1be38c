"""
Simulated balanced homodyne detection of a photon/vacuum mixture and the efficiency fitness.

Quadratures follow the convention of a vacuum variance of 1/2, so ``⟨x²⟩ = n + 1/2`` for the Fock
state ``|n⟩``.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterator, List, Optional

import numpy as np
from scipy.signal import find_peaks

from .error import ValidationError, raise_on_invalid
from .mode import SpectralMode, fwhm, overlap

logger = logging.getLogger(__name__)

VACUUM_VARIANCE = 0.5

# Smallest batch the moment estimator accepts
MIN_BATCH = 100

DEFAULT_SAMPLES_PER_EVAL = 10_000


@dataclass(frozen=True)
class DetectionChannel:
    """
    Homodyne detection channel.

    :param eta_sys: Lumped efficiency of detectors, optical losses, spatial mismatch and
        electronic noise, within ``[0, 1]``.
    :param lo_phase: Phase of the local oscillator in rad. The photon/vacuum mixture is phase
        invariant, so the sampler records but does not use it.

    Batches are drawn with explicit seeds derived from the master seed of a run, so the channel
    carries no random state of its own.
    """

    eta_sys: float
    lo_phase: float = 0.0

    def __post_init__(self):
        raise_on_invalid(
            0.0 <= self.eta_sys <= 1.0, f"eta_sys must lie within [0, 1], got {self.eta_sys}"
        )


@dataclass(frozen=True, eq=False)
class QuadratureBatch:
    """
    Homodyne samples measured at LO phase ``theta``. ``true_eta`` is ground truth known only to the
    simulation and never used by estimators.
    """

    samples: np.ndarray
    theta: float = 0.0
    true_eta: Optional[float] = None
    seed: Optional[int] = None

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64)
        raise_on_invalid(
            samples.ndim == 1 and samples.size >= 1, "a batch holds at least one sample"
        )
        raise_on_invalid(
            bool(np.all(np.isfinite(samples))), "batch contains NaN or infinite samples"
        )
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.size)


@dataclass(frozen=True)
class EtaEstimate:
    """
    Efficiency estimate. Unpacks as ``(eta_hat, stderr)``; ``unclamped`` keeps the raw moment value
    before clamping to ``[0, 1]``.
    """

    eta_hat: float
    stderr: float
    unclamped: float

    def __iter__(self) -> Iterator[float]:
        return iter((self.eta_hat, self.stderr))


def efficiency(lo: SpectralMode, sig: SpectralMode, ch: DetectionChannel) -> float:
    """
    Homodyne efficiency ``η = eta_sys·|⟨lo|sig⟩|²`` of detecting ``sig`` with local oscillator
    ``lo``.
    """
    c = overlap(lo, sig)
    eta = ch.eta_sys * (c.real**2 + c.imag**2)
    return float(min(max(eta, 0.0), 1.0))


def sample_quadratures(
    eta: float, n: int, seed: int, theta: float = 0.0
) -> QuadratureBatch:
    """
    Draw ``n`` quadratures of the state ``η|1⟩⟨1| + (1 − η)|0⟩⟨0|``.

    Vacuum samples are Gaussian with variance 1/2. Single photon samples have density
    ``2x²·e^(−x²)/√π``: their square is Gamma distributed with shape 3/2 and unit scale, the sign
    uniform. The batch is a pure function of ``seed``.

    Example:

    .. code-block:: python

        from photon_shaper import sample_quadratures, estimate_eta

        batch = sample_quadratures(0.6, 100_000, seed=1)
        eta_hat, stderr = estimate_eta(batch)

    :param eta: Single photon weight within ``[0, 1]``.
    :param n: Number of samples.
    :param seed: Seed of the ``numpy`` generator.
    :param theta: LO phase recorded with the batch.
    """
    raise_on_invalid(0.0 <= eta <= 1.0, f"eta must lie within [0, 1], got {eta}")
    raise_on_invalid(n >= 1, f"number of samples must be positive, got {n}")
    rng = np.random.default_rng(seed)
    photon = rng.random(n) < eta
    vacuum = rng.normal(0.0, math.sqrt(VACUUM_VARIANCE), n)
    magnitude = np.sqrt(rng.gamma(shape=1.5, scale=1.0, size=n))
    sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    samples = np.where(photon, sign * magnitude, vacuum)
    return QuadratureBatch(samples, theta=theta, true_eta=eta, seed=seed)


def estimate_eta(b: QuadratureBatch) -> EtaEstimate:
    """
    Moment estimator ``η̂ = mean(x²) − 1/2`` with standard error ``√(Var(x²)/n)``.

    The estimate is clamped to ``[0, 1]``; the unclamped value is kept for diagnostics.
    """
    n = len(b)
    if n < MIN_BATCH:
        raise ValidationError(
            f"estimating eta requires at least {MIN_BATCH} samples, batch has {n}"
        )
    squares = b.samples**2
    raw = float(squares.mean() - VACUUM_VARIANCE)
    stderr = float(math.sqrt(squares.var(ddof=1) / n))
    return EtaEstimate(eta_hat=min(max(raw, 0.0), 1.0), stderr=stderr, unclamped=raw)


def exact_stderr(eta: float, n: int) -> float:
    """
    Standard error of the moment estimator, ``√((1/2 + 2η − η²)/n)``.
    """
    return math.sqrt((0.5 + 2.0 * eta - eta**2) / n)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """
    Peak normalized intensity spectrum over increasing wavelength (nm).
    """

    wavelength_nm: np.ndarray
    intensity: np.ndarray

    def fwhm_nm(self) -> float:
        return fwhm(self.wavelength_nm, self.intensity)

    def peak_wavelength_nm(self) -> float:
        return float(self.wavelength_nm[int(np.argmax(self.intensity))])


def spectrometer(m: SpectralMode) -> Spectrum:
    """
    What a spectrometer shows for the mode: ``|Ψ|²`` on the wavelength axis, peak normalized.
    """
    intensity = m.intensity
    peak = intensity.max()
    if peak > 0.0:
        intensity = intensity / peak
    # omega increases along the grid, so the wavelength decreases
    return Spectrum(m.grid.wavelength_nm[::-1].copy(), intensity[::-1].copy())


@dataclass(frozen=True)
class Tooth:
    """
    One peak of a structured spectrum. It owns the grid samples ``start <= k < stop``, bounded by
    the intensity minima towards its neighbours; ``lower`` and ``upper`` are the corresponding
    offsets in rad/fs (``upper`` exclusive).
    """

    start: int
    stop: int
    lower: float
    upper: float
    peak: float
    height: float


def spectral_teeth(m: SpectralMode, min_fraction: float = 0.1) -> List[Tooth]:
    """
    Spectral peaks of a mode reaching ``min_fraction`` of the highest peak, from low to high
    frequency. Neighbouring teeth are separated at the intensity minimum between them, so the teeth
    partition the grid.
    """
    raise_on_invalid(
        0.0 < min_fraction <= 1.0, f"min_fraction must lie within (0, 1], got {min_fraction}"
    )
    intensity = m.intensity
    peak = intensity.max()
    if peak == 0.0:
        return []
    intensity = intensity / peak
    peaks, _ = find_peaks(intensity, height=min_fraction)
    if peaks.size == 0:
        peaks = np.array([int(np.argmax(intensity))])
    bounds = [0]
    for left, right in zip(peaks[:-1], peaks[1:]):
        bounds.append(int(left + np.argmin(intensity[left:right])))
    bounds.append(m.grid.n_points)
    offsets = m.grid.offsets
    delta = m.grid.delta_omega
    return [
        Tooth(
            start=start,
            stop=stop,
            lower=float(offsets[start]),
            upper=float(offsets[stop - 1] + delta),
            peak=float(offsets[p]),
            height=float(intensity[p]),
        )
        for start, stop, p in zip(bounds[:-1], bounds[1:], peaks)
    ]
