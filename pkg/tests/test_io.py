import json

import numpy as np
import pytest
from pytest import raises

from photon_shaper import (
    DetectionChannel,
    Encoding,
    Error,
    GaParams,
    GaProblem,
    PhasePolynomial,
    SlmMask,
    ValidationError,
    frog_trace,
    run_ga,
    sample_quadratures,
    to_time,
)
from photon_shaper.reader import (
    read_batch,
    read_mask,
    read_mode,
    read_polynomial,
    read_table,
    read_trace,
)
from photon_shaper.writer import (
    dumps_json,
    write_batch,
    write_ga_history,
    write_ga_individuals,
    write_mask,
    write_mode,
    write_polynomial,
    write_trace,
)


def test_mode_is_restored_bit_exactly(tmp_path, double_peak):
    path = tmp_path / "mode.csv"

    write_mode(path, double_peak)
    restored = read_mode(path)

    assert restored.grid == double_peak.grid
    np.testing.assert_array_equal(restored.amplitude, double_peak.amplitude)


def test_mode_header_line(tmp_path, photon):
    path = tmp_path / "mode.csv"

    write_mode(path, photon)

    first, second = path.read_text().splitlines()[:2]
    assert first.startswith("# center_omega=")
    assert "n_points=1024" in first
    assert second == '"omega_rad_per_fs","lambda_nm","re","im"'


def test_mask_is_restored(tmp_path, grid):
    rng = np.random.default_rng(1)
    mask = SlmMask(grid, rng.random(128), 6.0 * rng.random(128))
    path = tmp_path / "mask.csv"

    write_mask(path, mask)
    restored = read_mask(path)

    np.testing.assert_array_equal(restored.transmission, mask.transmission)
    np.testing.assert_array_equal(restored.phase, mask.phase)


def test_polynomial_is_restored(tmp_path):
    polynomial = PhasePolynomial(c1=12.5, c2=-4465.18, c3=3210.15)
    path = tmp_path / "polynomial.json"

    write_polynomial(path, polynomial)

    assert read_polynomial(path) == polynomial


def test_batch_with_sidecar(tmp_path):
    batch = sample_quadratures(0.6, 1000, seed=9, theta=0.5)
    path = tmp_path / "quadratures.csv"

    write_batch(path, batch)
    restored = read_batch(path)

    np.testing.assert_array_equal(restored.samples, batch.samples)
    assert restored.theta == 0.5
    assert restored.seed == 9
    assert restored.true_eta == 0.6
    assert json.loads((tmp_path / "quadratures.json").read_text())["n"] == 1000


def test_batch_without_sidecar(tmp_path):
    path = tmp_path / "quadratures.csv"
    write_batch(path, sample_quadratures(0.2, 200, seed=1))
    (tmp_path / "quadratures.json").unlink()

    restored = read_batch(path)

    assert restored.seed is None
    assert len(restored) == 200


def test_trace_is_restored(tmp_path, photon):
    trace = frog_trace(to_time(photon))
    path = tmp_path / "trace.csv"

    write_trace(path, trace)
    restored = read_trace(path)

    np.testing.assert_array_equal(restored.intensity, trace.intensity)
    np.testing.assert_array_equal(restored.tau, trace.tau)
    assert restored.scale == trace.scale
    assert restored.grid == photon.grid


def test_missing_file(tmp_path):
    with raises(Error, match="no such file"):
        read_mode(tmp_path / "missing.csv")


def test_file_lacking_columns(tmp_path):
    path = tmp_path / "mode.csv"
    path.write_text("# center_omega=2.35 span=0.3 n_points=1024\nomega_rad_per_fs,re\n1.0,2.0\n")

    with raises(ValidationError, match="lacks the column"):
        read_mode(path)


def test_malformed_header(tmp_path):
    path = tmp_path / "mode.csv"
    path.write_text("# center_omega\nomega_rad_per_fs,re,im\n1.0,2.0,0.0\n")

    with raises(ValidationError, match="expected key=value"):
        read_mode(path)


def test_mask_needs_grid(tmp_path):
    path = tmp_path / "mask.csv"
    path.write_text("pixel_index,transmission,phase_rad\n0,1.0,0.0\n")

    with raises(ValidationError, match="does not describe its grid"):
        read_mask(path)


def test_ga_history_of_chained_stages(tmp_path, photon):
    # Given
    problem = GaProblem(photon, photon, DetectionChannel(0.6), Encoding.POLY_PHASE)
    params = GaParams(population_size=4, max_generations=2, samples_per_eval=None)
    stages = [run_ga(problem, params, master_seed=seed) for seed in (1, 2)]

    # When
    write_ga_history(tmp_path / "history.csv", stages)
    write_ga_individuals(tmp_path / "individuals.csv", stages)

    # Then
    history, _ = read_table(tmp_path / "history.csv")
    assert history.column("stage").to_pylist() == [0, 0, 1, 1]
    assert history.column("generation").to_pylist() == [0, 1, 0, 1]
    elite = [record.elite_eta for stage in stages for record in stage.history]
    assert history.column("elite_eta").to_pylist() == pytest.approx(elite)
    individuals, _ = read_table(tmp_path / "individuals.csv")
    assert individuals.num_rows == 16
    assert individuals.column("worthless").to_pylist() == [False] * 16


def test_json_is_sorted_and_stable():
    payload = {"b": np.float64(0.5), "a": np.arange(3), "c": [True, np.bool_(False)]}

    text = dumps_json(payload)

    assert text == dumps_json(dict(reversed(list(payload.items()))))
    assert list(json.loads(text)) == ["a", "b", "c"]
    assert text.endswith("\n")


@pytest.mark.parametrize("value", [object(), {1, 2}])
def test_json_rejects_unknown_types(value):
    with raises(TypeError, match="not JSON serializable"):
        dumps_json({"value": value})
