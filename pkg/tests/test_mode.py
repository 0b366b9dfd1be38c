import math

import numpy as np
import pytest
from pytest import raises

from photon_shaper import (
    Error,
    FrequencyGrid,
    SpectralMode,
    ValidationError,
    apply_phase,
    duration_fwhm,
    from_time,
    gaussian_mode,
    make_grid,
    overlap,
    restrict,
    spectrometer,
    to_time,
)
from photon_shaper.mode import fwhm
from photon_shaper.shaping import PhasePolynomial


def random_mode(grid, rng) -> SpectralMode:
    amplitude = rng.normal(size=grid.n_points) + 1j * rng.normal(size=grid.n_points)
    return SpectralMode.from_amplitude(grid, amplitude)


def test_default_grid():
    """
    The default grid is centered at the angular frequency of 800 nm and has an exact zero offset
    at its center sample.
    """
    grid = make_grid()

    assert grid.center_omega == pytest.approx(2.354564, rel=1e-6)
    assert grid.n_points == 1024
    assert grid.offsets[512] == 0.0
    assert grid.delta_omega == pytest.approx(0.30 / 1024)
    assert grid.delta_t == pytest.approx(2 * math.pi / 0.30)
    assert np.all(np.diff(grid.omega) > 0)
    assert np.all(np.diff(grid.wavelength_nm) < 0)


def test_grid_size_must_be_power_of_two():
    """
    A grid of 1000 samples is rejected.
    """
    with raises(ValidationError, match="power of two"):
        make_grid(800.0, 0.30, 1000)


def test_grid_span_must_fit_below_center_frequency():
    with raises(ValidationError, match="does not leave room"):
        FrequencyGrid(center_omega=0.1, span=0.3)


def test_center_wavelength_out_of_range():
    with raises(ValidationError, match="center wavelength"):
        make_grid(50.0)


def test_grid_arrays_are_read_only(grid):
    with raises(ValueError):
        grid.offsets[0] = 1.0


def test_gaussian_mode_is_normalized_with_requested_bandwidth(grid):
    """
    A 9.4 nm Gaussian is normalized and shows a spectral FWHM of 9.4 nm on the wavelength axis.
    """
    mode = gaussian_mode(grid, fwhm_lambda=9.4)

    assert mode.norm() == pytest.approx(1.0, abs=1e-12)
    assert spectrometer(mode).fwhm_nm() == pytest.approx(9.4, rel=0.01)
    assert spectrometer(mode).peak_wavelength_nm() == pytest.approx(800.0, abs=0.1)


def test_transform_limited_duration(photon):
    """
    The intensity FWHM in time and angular frequency of a Gaussian multiply to 4·ln 2, so a 9.4 nm
    photon at 800 nm lasts about 100 fs.
    """
    bandwidth = photon.grid.nm_to_omega_width(9.4)

    duration = duration_fwhm(photon)

    assert duration * bandwidth == pytest.approx(4.0 * math.log(2.0), rel=1e-3)
    assert duration == pytest.approx(100.2, rel=1e-2)


def test_duration_oversampling_must_be_positive(photon):
    with raises(ValidationError, match="oversampling"):
        duration_fwhm(photon, oversampling=0)


def test_gaussian_too_wide_for_grid(grid):
    with raises(ValidationError, match="does not fit"):
        gaussian_mode(grid, fwhm_lambda=200.0)


def test_mode_amplitude_is_copied_and_read_only(grid):
    # Given
    amplitude = np.ones(grid.n_points, dtype=np.complex128)
    mode = SpectralMode(grid, amplitude)

    # When
    amplitude[0] = 5.0

    # Then
    assert mode.amplitude[0] == 1.0
    with raises(ValueError):
        mode.amplitude[0] = 2.0


def test_mode_shape_mismatch(grid):
    with raises(ValidationError, match="shape"):
        SpectralMode(grid, np.ones(10))


def test_normalizing_zero_mode(grid):
    with raises(Error, match="zero everywhere"):
        SpectralMode(grid, np.zeros(grid.n_points)).normalized()


def test_flat_spectrum_is_clipped(grid):
    """
    A mode with intensity at the grid edges reports being clipped.
    """
    flat = SpectralMode.from_amplitude(grid, np.ones(grid.n_points))

    with raises(ValidationError, match="clipped"):
        flat.check_contained()


def test_parseval_over_random_modes(grid):
    """
    The time domain energy equals the spectral norm for arbitrary modes.
    """
    rng = np.random.default_rng(42)
    for _ in range(1000):
        mode = random_mode(grid, rng)
        assert to_time(mode).energy() == pytest.approx(mode.norm(), rel=1e-10)


def test_cauchy_schwarz_over_random_modes(grid):
    rng = np.random.default_rng(7)
    for _ in range(1000):
        a = random_mode(grid, rng)
        b = random_mode(grid, rng)
        assert abs(overlap(a, b)) <= 1.0 + 1e-12


def test_overlap_is_conjugate_symmetric(grid):
    rng = np.random.default_rng(3)
    for _ in range(100):
        a = random_mode(grid, rng)
        b = random_mode(grid, rng)
        assert overlap(a, b) == pytest.approx(overlap(b, a).conjugate(), abs=1e-12)


def test_global_phase_does_not_change_the_overlap_magnitude(photon):
    chirped = apply_phase(photon, PhasePolynomial(c2=2000.0))
    rotated = chirped.with_amplitude(chirped.amplitude * np.exp(2.1j))

    assert abs(overlap(rotated, photon)) == pytest.approx(abs(overlap(chirped, photon)), abs=1e-12)


def test_chirped_overlap_matches_gaussian_integral(photon):
    """
    A quadratic phase ``φ₂Ω²/2`` with ``φ₂σ² = 0.615`` leaves ``|c|² = (1 + 0.615²)^(−1/2)``.
    """
    sigma = photon.grid.nm_to_omega_width(9.4) / math.sqrt(8.0 * math.log(2.0))
    chirped = apply_phase(photon, PhasePolynomial(c2=0.615 / sigma**2))

    overlap_sq = abs(overlap(photon, chirped)) ** 2

    assert overlap_sq == pytest.approx((1.0 + 0.615**2) ** -0.5, rel=1e-6)
    assert overlap_sq == pytest.approx(0.851, abs=1e-3)


def test_antisymmetric_double_peak_is_orthogonal(double_peak):
    """
    Flipping the sign of the upper peak of a symmetric double peak gives an orthogonal mode.
    """
    flip = np.where(double_peak.grid.offsets >= 0.0, -1.0, 1.0)
    flipped = double_peak.with_amplitude(double_peak.amplitude * flip)

    assert abs(overlap(double_peak, flipped)) < 1e-9


def test_self_overlap_is_one(photon):
    assert overlap(photon, photon) == pytest.approx(1.0 + 0j, abs=1e-12)


def test_time_round_trip(photon):
    back = from_time(to_time(photon))

    np.testing.assert_allclose(back.amplitude, photon.amplitude, atol=1e-12)


def test_positive_linear_phase_delays_the_pulse(photon):
    """
    A spectral phase ``+Ωτ`` moves the temporal peak to ``+τ``.
    """
    delayed = apply_phase(photon, PhasePolynomial(c1=200.0))

    field = to_time(delayed)
    peak = field.times[int(np.argmax(field.intensity))]
    assert peak == pytest.approx(200.0, abs=field.delta_t)


def test_double_peak_beats_in_time(grid):
    """
    Two equal peaks ``δω`` apart interfere into ``2|g(t)|²(1 + cos(δω·t))``, where ``g`` is the
    envelope of a single peak: the intensity beats with period ``2π/δω``.
    """
    # Half the spacing is a whole number of grid steps, so each peak is a shifted copy of the other
    shift = 68 * grid.delta_omega
    single = gaussian_mode(grid, fwhm_lambda=3.0)
    lower = gaussian_mode(grid, center_offset=-shift, fwhm_lambda=3.0)
    upper = gaussian_mode(grid, center_offset=shift, fwhm_lambda=3.0)
    spacing = 2.0 * shift

    field = to_time(SpectralMode(grid, lower.amplitude + upper.amplitude))

    envelope = to_time(single).intensity
    expected = 2.0 * envelope * (1.0 + np.cos(spacing * field.times))
    np.testing.assert_allclose(field.intensity, expected, atol=1e-10 * expected.max())


def test_overlap_on_different_grids(photon):
    other = gaussian_mode(make_grid(800.0, 0.30, 512))

    with raises(ValidationError, match="different grids"):
        overlap(photon, other)


def test_fwhm_interpolates_linearly():
    assert fwhm([0.0, 1.0, 2.0, 3.0, 4.0], [0.0, 1.0, 2.0, 1.0, 0.0]) == pytest.approx(2.0)


def test_fwhm_spans_separated_peaks():
    """
    Two peaks which drop below half maximum between them count as one structure: the width runs
    between the outermost half maximum crossings.
    """
    x = np.arange(11, dtype=np.float64)
    y = np.zeros(11)
    y[2] = y[8] = 1.0

    assert fwhm(x, y) == pytest.approx(7.0)


def test_fwhm_of_zero_profile():
    with raises(ValidationError, match="zero everywhere"):
        fwhm([0.0, 1.0, 2.0], [0.0, 0.0, 0.0])


def test_restrict_to_lower_peak(double_peak):
    """
    Restricting a double peaked mode to negative offsets keeps the lower peak, renormalized.
    """
    lower = restrict(double_peak, -1.0, 0.0)

    assert lower.norm() == pytest.approx(1.0)
    assert np.all(lower.amplitude[double_peak.grid.offsets >= 0.0] == 0.0)
    assert abs(overlap(lower, double_peak)) ** 2 == pytest.approx(0.5, abs=1e-6)


def test_restrict_to_empty_window(photon):
    with raises(Error, match="no support"):
        restrict(photon, 1.0, 2.0)
