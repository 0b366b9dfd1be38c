import math

import numpy as np
import pytest
from pytest import raises
from scipy.stats import skew

from photon_shaper import (
    DetectionChannel,
    PhasePolynomial,
    QuadratureBatch,
    ValidationError,
    apply_phase,
    efficiency,
    estimate_eta,
    gaussian_mode,
    michelson_modulate,
    sample_quadratures,
    spectral_teeth,
    spectrometer,
)
from photon_shaper.measurement import exact_stderr


def test_matched_lo_reaches_system_efficiency(photon):
    assert efficiency(photon, photon, DetectionChannel(0.6)) == pytest.approx(0.6)


def test_orthogonal_lo_detects_nothing(grid):
    """
    Two Gaussians far apart in frequency do not overlap.
    """
    lower = gaussian_mode(grid, center_offset=-0.05, fwhm_lambda=3.0)
    upper = gaussian_mode(grid, center_offset=0.05, fwhm_lambda=3.0)

    assert efficiency(lower, upper, DetectionChannel(0.6)) == pytest.approx(0.0, abs=1e-12)


def test_chirped_lo_loses_efficiency(photon):
    """
    A quadratic phase with ``φ₂σ² = 0.615`` on the LO costs a factor ``(1 + 0.615²)^(−1/2)``.
    """
    sigma = photon.grid.nm_to_omega_width(9.4) / math.sqrt(8.0 * math.log(2.0))
    chirped = apply_phase(photon, PhasePolynomial(c2=0.615 / sigma**2))

    eta = efficiency(chirped, photon, DetectionChannel(0.6))

    assert eta == pytest.approx(0.6 * (1.0 + 0.615**2) ** -0.5, rel=1e-6)
    assert eta == pytest.approx(0.511, abs=1e-3)


def test_system_efficiency_out_of_range():
    with raises(ValidationError, match="eta_sys"):
        DetectionChannel(1.2)


def test_sampling_is_a_pure_function_of_the_seed():
    first = sample_quadratures(0.6, 1000, seed=5)
    second = sample_quadratures(0.6, 1000, seed=5)
    other = sample_quadratures(0.6, 1000, seed=6)

    np.testing.assert_array_equal(first.samples, second.samples)
    assert not np.array_equal(first.samples, other.samples)
    assert first.true_eta == 0.6
    assert first.seed == 5


def test_vacuum_variance():
    """
    Vacuum quadratures have a variance of 1/2.
    """
    batch = sample_quadratures(0.0, 100_000, seed=11)

    assert batch.samples.var() == pytest.approx(0.5, abs=5 * math.sqrt(0.5 / 100_000))
    estimate = estimate_eta(batch)
    assert estimate.eta_hat <= 5 * exact_stderr(0.0, 100_000)


def test_estimate_of_photon_mixture():
    # Given
    n = 100_000
    batch = sample_quadratures(0.6, n, seed=1)

    # When
    eta_hat, stderr = estimate_eta(batch)

    # Then
    assert eta_hat == pytest.approx(0.6, abs=5 * exact_stderr(0.6, n))
    assert stderr == pytest.approx(exact_stderr(0.6, n), rel=0.05)


def test_single_photon_quadratures():
    """
    Pure single photon quadratures have ``⟨x²⟩ = 3/2`` and a density vanishing at the origin.
    """
    n = 400_000
    batch = sample_quadratures(1.0, n, seed=21)

    assert np.mean(batch.samples**2) == pytest.approx(1.5, abs=0.007)
    assert estimate_eta(batch).unclamped == pytest.approx(1.0, abs=0.007)
    # The density 2x²e^(−x²)/√π keeps about 7.5e-4 of the samples within |x| < 0.1
    assert np.mean(np.abs(batch.samples) < 0.1) < 0.005


def test_mixture_quadratures_are_symmetric():
    n = 100_000
    batch = sample_quadratures(0.6, n, seed=22)

    assert abs(skew(batch.samples)) < 10 / math.sqrt(n)


def test_estimate_keeps_unclamped_value():
    """
    A pure vacuum batch may estimate a slightly negative efficiency, which is clamped to zero.
    """
    estimates = [estimate_eta(sample_quadratures(0.0, 1000, seed)) for seed in range(20)]

    assert all(e.eta_hat >= 0.0 for e in estimates)
    assert any(e.unclamped < 0.0 for e in estimates)
    assert all(e.eta_hat == max(e.unclamped, 0.0) for e in estimates)


def test_batch_too_small():
    with raises(ValidationError, match="at least 100 samples"):
        estimate_eta(sample_quadratures(0.5, 99, seed=0))


def test_batch_rejects_non_finite_samples():
    with raises(ValidationError, match="NaN"):
        QuadratureBatch([0.1, float("nan")])


def test_exact_stderr():
    assert exact_stderr(0.0, 2) == pytest.approx(0.5)
    assert exact_stderr(1.0, 100) == pytest.approx(math.sqrt(1.5 / 100))


@pytest.mark.slow
@pytest.mark.parametrize("eta", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_estimator_calibration(eta):
    """
    Over batches of 10⁵ samples the estimator is unbiased and its spread matches
    ``(1/2 + 2η − η²)/n`` within 20%.
    """
    n = 100_000
    # 400 batches resolve the variance to about 7%
    raw = np.array(
        [estimate_eta(sample_quadratures(eta, n, seed)).unclamped for seed in range(400)]
    )

    stderr = exact_stderr(eta, n)
    assert abs(raw.mean() - eta) < 3 * stderr / 10
    assert raw.var(ddof=1) == pytest.approx(stderr**2, rel=0.2)


def test_spectrometer_axis_increases(photon):
    spectrum = spectrometer(photon)

    assert np.all(np.diff(spectrum.wavelength_nm) > 0)
    assert spectrum.intensity.max() == pytest.approx(1.0)


def test_double_peak_splits_at_center(double_peak):
    """
    A 150 fs Michelson delay in antiphase yields two teeth separated at the center sample, which
    is where SLM pixel 64 starts.
    """
    teeth = spectral_teeth(double_peak)

    assert len(teeth) == 2
    assert teeth[0].start == 0
    assert teeth[1].start == 512
    assert teeth[1].stop == 1024
    assert teeth[0].height == pytest.approx(1.0, abs=1e-3)
    assert teeth[1].height == pytest.approx(1.0, abs=1e-3)


def test_comb_of_a_long_delay(photon):
    """
    A 600 fs delay breaks the 9.4 nm spectrum into teeth 2π/600 rad/fs apart.
    """
    comb = michelson_modulate(photon, 600.0, 0.0)

    teeth = spectral_teeth(comb, 0.1)

    assert len(teeth) == 5
    spacing = np.diff([tooth.peak for tooth in teeth])
    np.testing.assert_allclose(spacing, 2 * math.pi / 600.0, atol=4 * photon.grid.delta_omega)
    # Teeth partition the grid
    assert all(a.stop == b.start for a, b in zip(teeth[:-1], teeth[1:]))


def test_single_peak(photon):
    assert len(spectral_teeth(photon)) == 1
