"""
Second harmonic FROG traces, their retrieval by principal components generalized projections, and
interferometric autocorrelation.

Traces live on the central ``n_delay`` samples of a field's time axis. Delays are circular shifts of
that window, so the delay step equals the time step ``2π/span`` of the field grid and the trace
frequency step is ``span/n_delay``.
"""

import logging
import math
from dataclasses import dataclass
from dataclasses import field as dataclass_field
from typing import List, Optional

import numpy as np
from scipy.signal.windows import tukey

from .error import ValidationError, raise_on_invalid
from .log import TRACE
from .mode import EDGE_TOLERANCE, FrequencyGrid, SpectralMode, TemporalField, from_time, to_time

logger = logging.getLogger(__name__)

DEFAULT_N_DELAY = 128
DEFAULT_MAX_ITER = 1000
DEFAULT_TOLERANCE = 1e-4

# G error below which a retrieval counts as successful
G_TARGET = 1e-3

# Largest fraction of the field energy a time gate may remove
GATE_TOLERANCE = 1e-3

# Fraction of a gate window tapered by the Tukey window
_GATE_TAPER = 0.5


@dataclass(frozen=True, eq=False)
class FrogTrace:
    """
    Peak normalized SHG-FROG intensity ``I[k, m]`` over the offset ``omega[k]`` (rad/fs) from the
    doubled carrier and the delay ``tau[m]`` (fs).

    ``scale`` is the peak of the trace before normalization, in units of fs²; together with the
    axes it recovers the energy of the field. ``grid`` is the grid of the field the trace has been
    recorded from.
    """

    intensity: np.ndarray
    omega: np.ndarray
    tau: np.ndarray
    scale: float
    grid: FrequencyGrid

    def __post_init__(self):
        intensity = np.array(self.intensity, dtype=np.float64)
        n = intensity.shape[0]
        raise_on_invalid(
            intensity.ndim == 2 and intensity.shape == (n, n),
            f"a FROG trace must be square, got shape {intensity.shape}",
        )
        raise_on_invalid(
            np.shape(self.omega) == (n,) and np.shape(self.tau) == (n,),
            "trace axes must match the trace size",
        )
        raise_on_invalid(bool(np.all(intensity >= 0.0)), "trace intensities must not be negative")
        intensity.flags.writeable = False
        object.__setattr__(self, "intensity", intensity)

    @property
    def size(self) -> int:
        return int(self.intensity.shape[0])

    @property
    def delta_omega(self) -> float:
        return float(self.omega[1] - self.omega[0])

    @property
    def delta_tau(self) -> float:
        return float(self.tau[1] - self.tau[0])

    def delay_marginal(self) -> np.ndarray:
        """
        Frequency integrated trace, i.e. the intensity autocorrelation.
        """
        return self.intensity.sum(axis=0) * self.delta_omega

    def energy(self) -> float:
        """
        ``ΣΣ I·scale·ΔωΔτ``, which equals ``2π·(Σ|E|²Δt)²`` of the recorded field.
        """
        return float(self.intensity.sum() * self.scale * self.delta_omega * self.delta_tau)

    def field_energy(self) -> float:
        return math.sqrt(self.energy() / (2.0 * math.pi))


@dataclass(frozen=True, eq=False)
class RetrievalResult:
    """
    Field recovered from a trace, embedded into the full time axis of the trace's grid. ``g_error``
    belongs to the returned field, the best iterate. ``converged`` is false if it stayed above
    ``G_TARGET``.
    """

    field: TemporalField
    g_error: float
    iterations: int
    converged: bool
    g_history: List[float] = dataclass_field(default_factory=list)

    def mode(self) -> SpectralMode:
        return from_time(self.field)


def _check_n_delay(n_delay: int, n: int):
    raise_on_invalid(
        2 <= n_delay <= n and n % n_delay == 0 and (n_delay & (n_delay - 1)) == 0,
        f"n_delay must be a power of two dividing n_points {n}, got {n_delay}",
    )


@dataclass(frozen=True, eq=False)
class TimeGate:
    """
    A field prepared for a FROG window of ``n_delay`` samples. ``energy_fraction`` is the share of
    the original energy the gate kept.
    """

    field: TemporalField
    n_delay: int
    energy_fraction: float


def time_gate(
    f: TemporalField, tolerance: float = GATE_TOLERANCE, min_delay: int = DEFAULT_N_DELAY
) -> TimeGate:
    """
    Fit a field into the smallest FROG window holding all but ``tolerance`` of its energy.

    The field is shifted circularly so that its intensity peak sits at ``t = 0``, a translation the
    trace does not see. The window is the smallest power of two of at least ``min_delay`` samples
    whose untapered central half covers the shortest interval around the peak with ``1 −
    tolerance`` of the energy. Within the window the field is multiplied by a Tukey window, outside
    of it set to zero, so weak satellites such as the replicas of a pixelated mask are removed
    instead of clipped.

    :param f: Field on its full time axis.
    :param tolerance: Largest fraction of the energy the gate may remove, within ``(0, 1)``.
    :param min_delay: Smallest window, a power of two dividing ``n_points``.
    """
    n = f.grid.n_points
    _check_n_delay(min_delay, n)
    raise_on_invalid(0.0 < tolerance < 1.0, f"tolerance must lie within (0, 1), got {tolerance}")
    intensity = f.intensity
    total = float(intensity.sum())
    raise_on_invalid(total > 0.0, "time gate of a zero field is undefined")

    center = n // 2
    shift = center - int(np.argmax(intensity))
    envelope = np.roll(f.envelope, shift)
    cumulative = np.concatenate([[0.0], np.cumsum(np.roll(intensity, shift))])
    half_widths = np.arange(center)
    inside = cumulative[center + half_widths + 1] - cumulative[center - half_widths]
    reached = np.flatnonzero(inside >= (1.0 - tolerance) * total)
    half_width = int(reached[0]) if reached.size else center

    n_delay = min_delay
    while n_delay < n and n_delay * (1.0 - _GATE_TAPER) < 2 * half_width + 1:
        n_delay *= 2
    start = center - n_delay // 2
    window = np.zeros(n)
    window[start : start + n_delay] = tukey(n_delay, _GATE_TAPER)
    gated = envelope * window
    kept = float(np.sum(np.abs(gated) ** 2)) / total
    logger.debug("Time gate of %d samples keeps %.5f of the field energy", n_delay, kept)
    return TimeGate(TemporalField(f.grid, gated), n_delay, kept)


def crop(
    f: TemporalField, n_delay: int = DEFAULT_N_DELAY, edge_tolerance: float = EDGE_TOLERANCE
) -> np.ndarray:
    """
    Central ``n_delay`` samples of the envelope. Sample ``n_delay // 2`` of the window is ``t = 0``.

    Raises if the field is not contained within the window: no intensity at the window edges or
    outside of it may reach ``edge_tolerance`` of the peak. ``time_gate`` prepares fields with weak
    satellites.
    """
    n = f.grid.n_points
    _check_n_delay(n_delay, n)
    start = n // 2 - n_delay // 2
    window = f.envelope[start : start + n_delay]
    intensity = np.abs(f.envelope) ** 2
    peak = intensity.max()
    edge = max(abs(window[0]) ** 2, abs(window[-1]) ** 2)
    outside = np.delete(intensity, np.s_[start : start + n_delay])
    if peak == 0.0 or edge >= edge_tolerance * peak or np.any(outside >= edge_tolerance * peak):
        raise ValidationError(
            f"field is clipped by the {n_delay} sample FROG window "
            f"({n_delay * f.delta_t:.0f} fs). Use a larger n_delay or gate the field."
        )
    return window.copy()


def _delay_shifts(n: int) -> np.ndarray:
    return np.arange(n) - n // 2


def _gate_indices(n: int) -> np.ndarray:
    """
    ``K[j, m] = (j − s_m) mod n``: time sample of the gate for signal sample ``j`` at delay ``m``.
    """
    j = np.arange(n)[:, None]
    return np.mod(j - _delay_shifts(n)[None, :], n)


def _signal_field(envelope: np.ndarray, gates: np.ndarray) -> np.ndarray:
    return envelope[:, None] * envelope[gates]


def _to_frequency(signal: np.ndarray, delta_t: float) -> np.ndarray:
    n = signal.shape[0]
    spectrum = np.fft.ifft(np.fft.ifftshift(signal, axes=0), axis=0)
    return np.fft.fftshift(spectrum, axes=0) * n * delta_t


def _to_time(spectrum: np.ndarray, delta_t: float) -> np.ndarray:
    n = spectrum.shape[0]
    signal = np.fft.fft(np.fft.ifftshift(spectrum, axes=0), axis=0)
    return np.fft.fftshift(signal, axes=0) / (n * delta_t)


def _trace_of_window(window: np.ndarray, delta_t: float) -> np.ndarray:
    gates = _gate_indices(window.size)
    return np.abs(_to_frequency(_signal_field(window, gates), delta_t)) ** 2


def frog_trace(
    f: TemporalField, n_delay: int = DEFAULT_N_DELAY, edge_tolerance: float = EDGE_TOLERANCE
) -> FrogTrace:
    """
    SHG-FROG trace ``I(ω, τ) = |∫E(t)E(t−τ)e^(iωt)dt|²`` of a field.

    The trace is computed on the central ``n_delay`` samples of the field's time axis (128 of 1024
    by default) with circular delays of the same step. It is symmetric in ``τ``.

    :param f: Field contained within the window.
    :param n_delay: Size of the square trace.
    :param edge_tolerance: Intensity relative to the peak the field may keep outside the window.
    """
    window = crop(f, n_delay, edge_tolerance)
    intensity = _trace_of_window(window, f.delta_t)
    scale = float(intensity.max())
    omega = _delay_shifts(n_delay) * (f.grid.span / n_delay)
    tau = _delay_shifts(n_delay) * f.delta_t
    return FrogTrace(intensity / scale, omega, tau, scale, f.grid)


def g_error(measured: np.ndarray, retrieved: np.ndarray) -> float:
    """
    RMS mismatch of two peak normalized traces, with the retrieved one rescaled by the least
    squares factor.
    """
    retrieved = retrieved / retrieved.max()
    alpha = np.sum(measured * retrieved) / np.sum(retrieved**2)
    return float(np.sqrt(np.mean((measured - alpha * retrieved) ** 2)))


def _initial_guess(trace: FrogTrace, rng: np.random.Generator) -> np.ndarray:
    n = trace.size
    marginal = trace.delay_marginal()
    above = np.flatnonzero(marginal >= marginal.max() / 2.0)
    width = max((above[-1] - above[0] + 1) * trace.delta_tau / math.sqrt(2.0), trace.delta_tau)
    t = _delay_shifts(n) * trace.delta_tau
    envelope = np.exp(-2.0 * math.log(2.0) * t**2 / width**2)
    return envelope * np.exp(2j * math.pi * rng.random(n))


def frog_retrieve(
    t: FrogTrace,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = 0,
    tolerance: float = DEFAULT_TOLERANCE,
) -> RetrievalResult:
    """
    Recover the field behind an SHG-FROG trace with principal components generalized projections.

    Each iteration replaces the magnitudes of the current signal field with the measured ones,
    transforms back to time, rearranges the signal into its outer product form and extracts the
    new field estimate with one power method step. The iteration stops once the G error drops to
    ``tolerance`` or after ``max_iter`` iterations and returns the best iterate.

    The trace determines the field only up to a constant phase, a time translation and time
    reversal with conjugation. Use ``align_to_reference`` to compare retrieved fields.

    :param t: Trace of a physical field.
    :param max_iter: Iteration budget.
    :param seed: Seed of the random initial phase.
    :param tolerance: G error at which to stop early.
    """
    raise_on_invalid(max_iter >= 1, f"max_iter must be at least 1, got {max_iter}")
    n = t.size
    delta_t = t.delta_tau
    measured = t.intensity
    amplitude = np.sqrt(measured)
    gates = _gate_indices(n)
    rows = np.repeat(np.arange(n)[:, None], n, axis=1)
    rng = np.random.default_rng(seed)

    envelope = _initial_guess(t, rng)
    best_envelope = envelope
    best_g = math.inf
    history: List[float] = []
    iterations = 0
    for iterations in range(1, max_iter + 1):
        spectrum = _to_frequency(_signal_field(envelope, gates), delta_t)
        g = g_error(measured, np.abs(spectrum) ** 2)
        history.append(g)
        if g < best_g:
            best_g = g
            best_envelope = envelope
        logger.log(TRACE, "PCGP iteration %d: G = %.3e", iterations, g)
        if g <= tolerance:
            break

        magnitude = np.abs(spectrum)
        phase = np.where(magnitude > 0.0, spectrum / np.where(magnitude > 0.0, magnitude, 1.0), 1.0)
        signal = _to_time(amplitude * phase, delta_t)
        outer = np.zeros((n, n), dtype=np.complex128)
        outer[rows, gates] = signal
        envelope = outer @ (outer.conj().T @ envelope)
        norm = np.linalg.norm(envelope)
        if norm == 0.0:
            break
        envelope = envelope / norm

    converged = best_g <= G_TARGET
    if not converged:
        logger.warning(
            "FROG retrieval stopped after %d iterations with G = %.3e above %g",
            iterations,
            best_g,
            G_TARGET,
        )

    grid = t.grid
    full = np.zeros(grid.n_points, dtype=np.complex128)
    start = grid.n_points // 2 - n // 2
    energy = np.sum(np.abs(best_envelope) ** 2) * delta_t
    full[start : start + n] = best_envelope * math.sqrt(t.field_energy() / energy)
    return RetrievalResult(
        field=TemporalField(grid, full),
        g_error=best_g,
        iterations=iterations,
        converged=converged,
        g_history=history,
    )


def _canonical(m: SpectralMode) -> SpectralMode:
    temporal = to_time(m)
    weights = temporal.intensity
    centroid = float(np.sum(temporal.times * weights) / np.sum(weights))
    amplitude = m.amplitude * np.exp(-1j * m.grid.offsets * centroid)
    peak = int(np.argmax(np.abs(amplitude)))
    return m.with_amplitude(amplitude * np.exp(-1j * np.angle(amplitude[peak])))


def align_to_reference(m: SpectralMode, reference: Optional[SpectralMode] = None) -> SpectralMode:
    """
    Canonical representative of the SHG-FROG ambiguity class of ``m``.

    The mode is translated to temporal centroid zero and its constant phase removed at the
    spectral peak. If a reference is given, the time orientation (``m`` or its time reversed
    conjugate) closest to the equally aligned reference is returned.
    """
    aligned = _canonical(m)
    if reference is None:
        return aligned
    if reference.grid != m.grid:
        raise ValidationError("mode and reference live on different grids")
    target = _canonical(reference).amplitude
    # Time reversal with conjugation is spectral conjugation
    reversed_ = _canonical(m.with_amplitude(np.conj(m.amplitude)))
    distance = np.linalg.norm(aligned.amplitude - target)
    distance_reversed = np.linalg.norm(reversed_.amplitude - target)
    return reversed_ if distance_reversed < distance else aligned


def autocorrelation(f: TemporalField, delays) -> np.ndarray:
    """
    Interferometric autocorrelation ``∫|(E(t) + E(t−τ))²|²dt`` of the real field including its
    carrier, normalized to a background of one at large delays. The peak at zero delay is eight.

    :param f: Field contained in its time window.
    :param delays: Delays in fs.
    """
    intensity = f.intensity
    peak = intensity.max()
    raise_on_invalid(peak > 0.0, "autocorrelation of a zero field is undefined")
    if max(intensity[0], intensity[-1]) >= EDGE_TOLERANCE * peak:
        raise ValidationError("field is clipped by its time window")
    mode = from_time(f)
    omega = f.grid.omega
    background = 2.0 * np.sum(intensity**2)
    delays = np.atleast_1d(np.asarray(delays, dtype=np.float64))
    values = np.empty(delays.shape)
    for i, tau in enumerate(delays):
        # A spectral phase ωτ delays the real field, carrier included, by τ
        delayed = to_time(mode.with_amplitude(mode.amplitude * np.exp(1j * omega * tau)))
        values[i] = np.sum(np.abs(f.envelope + delayed.envelope) ** 4) / background
    return values
