import math

import numpy as np
import pytest
from pytest import raises
from scipy.ndimage import gaussian_filter1d, maximum_filter1d, minimum_filter1d
from scipy.signal import find_peaks

from photon_shaper import (
    PhasePolynomial,
    SlmMask,
    ValidationError,
    align_to_reference,
    apply_phase,
    autocorrelation,
    duration_fwhm,
    frog_retrieve,
    frog_trace,
    g_error,
    michelson_modulate,
    overlap,
    gaussian_mode,
    slm_apply,
    spectral_teeth,
    time_gate,
    to_time,
)
from photon_shaper.log import TRACE
from photon_shaper.mode import fwhm


@pytest.fixture
def chirped(photon):
    return apply_phase(photon, PhasePolynomial(c2=3000.0, c3=50_000.0))


def test_trace_axes(photon):
    trace = frog_trace(to_time(photon))

    assert trace.size == 128
    assert trace.intensity.max() == pytest.approx(1.0)
    assert trace.delta_tau == pytest.approx(photon.grid.delta_t)
    assert trace.delta_omega == pytest.approx(photon.grid.span / 128)
    assert trace.tau[64] == 0.0


def test_trace_is_symmetric_in_delay(chirped):
    """
    The SHG trace does not change if the delay is reversed. Delay ``−64`` has no partner.
    """
    trace = frog_trace(to_time(chirped))

    inner = trace.intensity[:, 1:]
    np.testing.assert_allclose(inner, inner[:, ::-1], rtol=1e-9, atol=1e-12)


def test_trace_recovers_field_energy(photon):
    trace = frog_trace(to_time(photon))

    assert trace.field_energy() == pytest.approx(1.0, rel=1e-6)


def test_delayed_field_is_clipped(photon):
    delayed = apply_phase(photon, PhasePolynomial(c1=2000.0))

    with raises(ValidationError, match="clipped by the 128 sample FROG window"):
        frog_trace(to_time(delayed))


def test_wider_window_fits_delayed_field(photon):
    delayed = apply_phase(photon, PhasePolynomial(c1=2000.0))

    trace = frog_trace(to_time(delayed), n_delay=256)

    assert trace.size == 256


def test_window_size_must_be_power_of_two(photon):
    with raises(ValidationError, match="power of two"):
        frog_trace(to_time(photon), n_delay=100)


def test_g_error_ignores_scale(chirped):
    trace = frog_trace(to_time(chirped))

    assert g_error(trace.intensity, trace.intensity) == pytest.approx(0.0, abs=1e-15)
    assert g_error(trace.intensity, 3.0 * trace.intensity) == pytest.approx(0.0, abs=1e-15)


def test_g_error_of_different_traces(photon, chirped):
    first = frog_trace(to_time(photon)).intensity
    second = frog_trace(to_time(chirped)).intensity

    assert g_error(first, second) > 1e-3


def test_interferometric_autocorrelation_ratio(photon):
    """
    Peak to background ratio of 8 to 1.
    """
    values = autocorrelation(to_time(photon), [0.0, 2000.0])

    np.testing.assert_allclose(values, [8.0, 1.0], rtol=0.01)


def test_alignment_removes_delay_and_phase(chirped):
    shifted = apply_phase(chirped, PhasePolynomial(c0=1.2, c1=250.0))

    aligned = align_to_reference(shifted)

    np.testing.assert_allclose(aligned.amplitude, align_to_reference(chirped).amplitude, atol=1e-3)


def test_alignment_picks_time_orientation(chirped):
    """
    The time reversed conjugate produces the same trace. Given a reference, alignment undoes the
    reversal.
    """
    reversed_ = chirped.with_amplitude(np.conj(chirped.amplitude))

    aligned = align_to_reference(reversed_, chirped)

    assert abs(overlap(aligned, align_to_reference(chirped))) ** 2 == pytest.approx(1.0, abs=1e-9)


def test_retrieval_result_is_embedded_in_full_grid(photon):
    trace = frog_trace(to_time(photon))

    result = frog_retrieve(trace, max_iter=5, seed=1)

    assert result.field.grid == photon.grid
    assert result.iterations <= 5
    assert len(result.g_history) == result.iterations
    assert result.g_error == min(result.g_history)
    assert result.mode().norm() == pytest.approx(1.0, rel=1e-3)


def test_retrieval_needs_an_iteration(photon):
    with raises(ValidationError, match="max_iter"):
        frog_retrieve(frog_trace(to_time(photon)), max_iter=0)


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["chirped", "double_pulse"])
def test_retrieval_round_trip(kind, photon, chirped):
    # Given
    if kind == "chirped":
        field = chirped
    else:
        field = michelson_modulate(photon, 150.0, 0.0)
    trace = frog_trace(to_time(field))

    # When
    result = frog_retrieve(trace, max_iter=1000, seed=0)

    # Then
    retrieved = align_to_reference(result.mode().normalized(), field)
    assert result.g_error <= 1e-3
    assert abs(overlap(retrieved, align_to_reference(field))) ** 2 >= 0.99


@pytest.mark.slow
def test_retrieval_shows_phase_step_between_peaks(photon):
    """
    A photon born from a pump in antiphase carries a phase jump of π between its two spectral
    peaks.
    """
    field = michelson_modulate(photon, 150.0, math.pi)
    trace = frog_trace(to_time(field))

    result = frog_retrieve(trace, max_iter=1000, seed=0)

    retrieved = align_to_reference(result.mode().normalized(), field)
    first, second = spectral_teeth(field)
    low = int(np.argmin(np.abs(field.grid.offsets - first.peak)))
    high = int(np.argmin(np.abs(field.grid.offsets - second.peak)))
    step = np.angle(retrieved.amplitude[high] / retrieved.amplitude[low])
    assert abs(abs(step) - math.pi) <= 0.15


def test_delay_marginal_is_the_intensity_autocorrelation(grid):
    """
    Integrated over frequency, the trace of a transform limited Gaussian is a Gaussian √2 wider
    than the pulse.
    """
    pulse = gaussian_mode(grid, fwhm_lambda=3.0)
    trace = frog_trace(to_time(pulse))

    width = fwhm(trace.tau, trace.delay_marginal())

    assert width == pytest.approx(math.sqrt(2.0) * duration_fwhm(pulse), rel=2e-2)


def test_delay_marginal_of_a_double_pulse(grid):
    """
    Two pulses 150 fs apart correlate at zero delay and at ±150 fs.
    """
    pulses = michelson_modulate(gaussian_mode(grid, fwhm_lambda=16.0), 150.0, 0.0)
    trace = frog_trace(to_time(pulses))

    marginal = trace.delay_marginal()
    peaks, _ = find_peaks(marginal, height=0.2 * marginal.max())

    lobes = np.sort(trace.tau[peaks])
    assert lobes.size == 3
    np.testing.assert_allclose(lobes, [-150.0, 0.0, 150.0], atol=trace.delta_tau)
    assert marginal[peaks[1]] == pytest.approx(marginal.max())


def test_alignment_is_idempotent(chirped, photon):
    once = align_to_reference(chirped)
    np.testing.assert_allclose(align_to_reference(once).amplitude, once.amplitude, atol=1e-9)

    once = align_to_reference(chirped, photon)
    np.testing.assert_allclose(
        align_to_reference(once, photon).amplitude, once.amplitude, atol=1e-9
    )


@pytest.mark.parametrize("ambiguity", ["constant_phase", "translation", "time_reversal"])
def test_trace_is_blind_to_its_ambiguities(ambiguity, chirped):
    if ambiguity == "constant_phase":
        other = apply_phase(chirped, PhasePolynomial(c0=1.1))
    elif ambiguity == "translation":
        # A linear phase of one time step shifts the field by exactly one sample
        other = apply_phase(chirped, PhasePolynomial(c1=chirped.grid.delta_t))
    else:
        other = chirped.with_amplitude(np.conj(chirped.amplitude))

    original = frog_trace(to_time(chirped)).intensity
    np.testing.assert_allclose(frog_trace(to_time(other)).intensity, original, atol=1e-12)


def test_autocorrelation_is_symmetric_in_delay(chirped):
    delays = np.linspace(10.0, 400.0, 40)

    forward = autocorrelation(to_time(chirped), delays)
    backward = autocorrelation(to_time(chirped), -delays)

    np.testing.assert_allclose(forward, backward, rtol=1e-9)


def _envelope_and_fringe_extent(field):
    step = 0.25
    delays = np.arange(-800.0, 800.0, step)
    values = autocorrelation(to_time(field), delays)
    period = 2 * math.pi / field.grid.center_omega
    # Averaging over two optical periods leaves the background plus twice the intensity
    # autocorrelation
    envelope = gaussian_filter1d(values, 2 * period / step) - 1.0
    size = int(2 * period / step) + 1
    fringes = maximum_filter1d(values, size) - minimum_filter1d(values, size)

    def extent(curve):
        return step * np.count_nonzero(curve >= curve.max() / 2)

    return extent(envelope), extent(fringes)


def test_chirp_washes_out_the_autocorrelation_fringes(photon):
    """
    Chirp widens the envelope of the interferometric autocorrelation while its fringes stay
    confined to the coherence time.
    """
    envelope_tl, fringes_tl = _envelope_and_fringe_extent(photon)
    envelope, fringes = _envelope_and_fringe_extent(
        apply_phase(photon, PhasePolynomial(c2=8000.0))
    )

    assert envelope > 1.5 * envelope_tl
    assert fringes / envelope < 0.8 * fringes_tl / envelope_tl


def test_time_gate_keeps_the_energy(chirped):
    field = to_time(chirped)

    gate = time_gate(field, tolerance=1e-3)

    assert gate.n_delay == 128
    assert gate.energy_fraction >= 1.0 - 1e-3
    assert gate.energy_fraction <= 1.0
    energy = np.sum(gate.field.intensity) / np.sum(field.intensity)
    assert energy == pytest.approx(gate.energy_fraction)


def test_time_gate_grows_the_window_in_powers_of_two(photon):
    long_pulse = apply_phase(photon, PhasePolynomial(c2=60_000.0))

    gate = time_gate(to_time(long_pulse), min_delay=64)

    assert gate.n_delay > 64
    assert gate.n_delay & (gate.n_delay - 1) == 0
    assert gate.energy_fraction >= 1.0 - 1e-3
    assert frog_trace(gate.field, gate.n_delay).size == gate.n_delay


def test_time_gate_centers_a_delayed_field(photon):
    delayed = apply_phase(photon, PhasePolynomial(c1=2000.0))

    gate = time_gate(to_time(delayed))

    assert gate.n_delay == 128
    assert frog_trace(gate.field, gate.n_delay).size == 128


def test_pixelated_lo_is_gated_into_a_trace(photon):
    """
    The phase staircase of an SLM mask adds weak replicas of the pulse far from its center.
    Gating drops them, so the trace of the shaped LO can be recorded.
    """
    centers = SlmMask.identity(photon.grid).pixel_centers()
    phase = np.mod(3000.0 * centers**2 / 2.0, 2 * math.pi)
    lo, _ = slm_apply(photon, SlmMask(photon.grid, np.ones(128), phase))

    gate = time_gate(to_time(lo))
    trace = frog_trace(gate.field, gate.n_delay)

    assert trace.size == gate.n_delay
    assert gate.energy_fraction > 0.99


@pytest.mark.parametrize("tolerance", [0.0, 1.0])
def test_time_gate_tolerance_out_of_range(tolerance, photon):
    with raises(ValidationError, match="tolerance"):
        time_gate(to_time(photon), tolerance=tolerance)


def test_time_gate_window_must_be_power_of_two(photon):
    with raises(ValidationError, match="power of two"):
        time_gate(to_time(photon), min_delay=100)


def test_retrieval_iterations_are_logged_as_trace(photon, caplog):
    caplog.set_level(TRACE, logger="photon_shaper.frog")

    frog_retrieve(frog_trace(to_time(photon)), max_iter=3, seed=2, tolerance=1e-12)

    trace = [r for r in caplog.records if r.levelno == TRACE]
    assert len(trace) == 3
    assert "PCGP iteration 1" in trace[0].getMessage()
