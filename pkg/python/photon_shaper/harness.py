"""
Runs a scenario end to end: genetic algorithm stages, the efficiency of the optimized LO and the
analyses the scenario enables. Everything observable goes into the report payload; simulation
ground truth is kept under ``oracle_`` keys.
"""

import hashlib
import logging
import math
import platform
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .error import Error, ValidationError
from .evolve import GaProblem, GaResult, derive_seed, run_ga
from .frog import align_to_reference, frog_retrieve, frog_trace, time_gate
from .measurement import (
    QuadratureBatch,
    Tooth,
    efficiency,
    estimate_eta,
    sample_quadratures,
    spectral_teeth,
    spectrometer,
)
from .mode import SpectralMode, duration_fwhm, from_time, overlap, restrict, to_time
from .scenario import Scenario
from .shaping import SlmMask, TWO_PI, decode_polynomial, encode_mask, slm_apply
from .tomography import FockDiagonal, fit_diagonal, wigner
from .writer import (
    dumps_json,
    ga_summary,
    wigner_summary,
    write_batch,
    write_ga_history,
    write_ga_individuals,
    write_json,
    write_mask,
    write_mode,
    write_phase_scan,
    write_polynomial,
    write_spectrum,
    write_table_rows,
    write_temporal,
    write_trace,
    write_wigner,
)

logger = logging.getLogger(__name__)

# Seed streams of the analyses. The genetic algorithm uses the keys 0 to 2 below each stage seed.
_STAGE_STREAM = 10
_FINAL_STREAM = 11
_BASELINE_STREAM = 12
_TOMOGRAPHY_STREAM = 13
_FROG_STREAM = 14
_PHASE_SCAN_STREAM = 15
_COMB_STREAM = 16

_DEPENDENCIES = ("numpy", "scipy", "pyarrow", "pydantic", "joblib")

# Least fraction of the highest peak a spectral peak must reach to take part in a phase scan
PEAK_FRACTION = 0.1


@dataclass(frozen=True)
class CosineFit:
    """
    Least squares fit of ``η(φ) = A·cos²((φ − φ0)/2) + B``, with ``A >= 0`` and ``φ0`` wrapped into
    ``(−π, π]``.
    """

    amplitude: float
    phi0: float
    floor: float
    residual_rms: float
    mean_stderr: float

    @property
    def visibility(self) -> float:
        total = self.amplitude + self.floor
        return self.amplitude / total if total > 0.0 else 0.0

    def to_dict(self) -> Dict[str, float]:
        return {
            "A": self.amplitude,
            "B": self.floor,
            "phi0_rad": self.phi0,
            "visibility": self.visibility,
            "residual_rms": self.residual_rms,
            "mean_stderr": self.mean_stderr,
        }


@dataclass(frozen=True, eq=False)
class PhaseScan:
    """
    Efficiency of the best LO with an extra phase ``φ_LO`` on its second spectral peak. ``batches``
    holds the quadratures measured at every phase.
    """

    phases: np.ndarray
    eta_hat: np.ndarray
    stderr: np.ndarray
    eta_true: np.ndarray
    fit: CosineFit
    split: int
    batches: List[QuadratureBatch] = field(repr=False, default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "phi_rad": self.phases,
            "eta_hat": self.eta_hat,
            "stderr": self.stderr,
            "oracle_eta_true": self.eta_true,
            "split_sample": self.split,
            "fit": self.fit.to_dict(),
        }


@dataclass
class Report:
    """
    Outcome of ``run_scenario``. ``payload`` is a pure function of scenario and master seed;
    ``provenance`` holds the hash of the scenario, versions and the time of the run. ``artifacts``
    maps artifact names to the files written.
    """

    payload: Dict[str, Any]
    provenance: Dict[str, Any]
    artifacts: Dict[str, Path] = field(default_factory=dict)
    best_mask: Optional[SlmMask] = None
    best_lo: Optional[SpectralMode] = None
    stages: List[GaResult] = field(default_factory=list)

    def payload_json(self) -> str:
        return dumps_json(self.payload)

    def to_dict(self) -> Dict[str, Any]:
        return {"payload": self.payload, "provenance": self.provenance}


def _cosine_squared(phi, amplitude, phi0, floor):
    return amplitude * np.cos((phi - phi0) / 2.0) ** 2 + floor


def fit_cosine(phases, eta_hat, stderr) -> CosineFit:
    """
    Fit ``A·cos²((φ − φ0)/2) + B`` to a phase scan by least squares.
    """
    phases = np.asarray(phases, dtype=np.float64)
    eta_hat = np.asarray(eta_hat, dtype=np.float64)
    stderr = np.asarray(stderr, dtype=np.float64)
    if phases.size < 4:
        raise ValidationError(f"fitting a phase scan requires at least 4 points, got {phases.size}")
    guess = (
        float(eta_hat.max() - eta_hat.min()),
        float(phases[int(np.argmax(eta_hat))]),
        float(eta_hat.min()),
    )
    try:
        (amplitude, phi0, floor), _ = curve_fit(_cosine_squared, phases, eta_hat, p0=guess)
    except RuntimeError as error:
        raise Error(f"phase scan fit did not converge: {error}") from error
    if amplitude < 0.0:
        # A·cos²(x) + B == −A·cos²(x − π/2) + A + B
        amplitude, phi0, floor = -amplitude, phi0 + math.pi, floor + amplitude
    phi0 = float(math.remainder(phi0, TWO_PI))
    residual = eta_hat - _cosine_squared(phases, amplitude, phi0, floor)
    return CosineFit(
        amplitude=float(amplitude),
        phi0=phi0,
        floor=float(floor),
        residual_rms=float(np.sqrt(np.mean(residual**2))),
        mean_stderr=float(stderr.mean()),
    )


def _two_highest(teeth: Sequence[Tooth]) -> List[Tooth]:
    highest = sorted(teeth, key=lambda tooth: tooth.height, reverse=True)[:2]
    return sorted(highest, key=lambda tooth: tooth.start)


def peak_split(signal: SpectralMode) -> int:
    """
    First grid sample of the second of the two dominant spectral peaks of ``signal``.

    :raises ValidationError: If the spectrum has no resolvable double peak structure.
    """
    teeth = spectral_teeth(signal, PEAK_FRACTION)
    if len(teeth) < 2:
        raise ValidationError(
            "phase scan requires a signal with two spectral peaks above "
            f"{PEAK_FRACTION:g} of the maximum, found {len(teeth)}"
        )
    return _two_highest(teeth)[1].start


def second_peak_pixels(mask: SlmMask, split: int) -> np.ndarray:
    """
    Boolean selection of the pixels starting at or above grid sample ``split``.
    """
    starts = mask.first_sample + np.arange(mask.n_pixels) * mask.pixel_samples
    return starts >= split


def phase_scan(
    s: Scenario,
    best_mask: SlmMask,
    phases: Sequence[float],
    master_seed: int = 0,
    samples: int = 100_000,
) -> PhaseScan:
    """
    Scan the phase between the two spectral peaks of the LO.

    For each ``φ_LO`` the constant phase is added to every pixel of the second peak of the signal
    spectrum (the pixels above the intensity minimum separating the peaks) and the efficiency is
    measured on a fresh batch. An ideal LO for a photon in the superposition of both peaks yields
    ``η(φ) = η_opt·cos²(φ/2)``.

    :param s: Scenario of a photon with two spectral peaks.
    :param best_mask: The optimized mask.
    :param phases: LO phases in rad.
    :param master_seed: The batch at ``phases[i]`` derives its seed from it and ``i``.
    :param samples: Quadratures per phase.
    """
    grid = s.build_grid()
    signal = s.build_signal(grid)
    base_lo = s.build_base_lo(grid)
    channel = s.build_channel()
    split = peak_split(signal)
    second = second_peak_pixels(best_mask, split)
    phases = np.asarray(phases, dtype=np.float64)

    eta_hat, stderr, eta_true, batches = [], [], [], []
    for i, phi in enumerate(phases):
        mask = best_mask.with_phase(best_mask.phase + np.where(second, phi, 0.0))
        lo, _ = slm_apply(base_lo, mask)
        eta = efficiency(lo, signal, channel)
        batch = sample_quadratures(
            eta, samples, derive_seed(master_seed, _PHASE_SCAN_STREAM, i), theta=float(phi)
        )
        estimate = estimate_eta(batch)
        eta_hat.append(estimate.eta_hat)
        stderr.append(estimate.stderr)
        eta_true.append(eta)
        batches.append(batch)
        logger.debug("Phase scan at %.4f rad: eta %.4f ± %.4f", phi, *estimate)

    fit = fit_cosine(phases, eta_hat, stderr)
    logger.info(
        "Phase scan fit: A=%.4f B=%.4f phi0=%.4f rad", fit.amplitude, fit.floor, fit.phi0
    )
    return PhaseScan(
        phases=phases,
        eta_hat=np.array(eta_hat),
        stderr=np.array(stderr),
        eta_true=np.array(eta_true),
        fit=fit,
        split=split,
        batches=batches,
    )


def comb_analysis(
    s: Scenario,
    lo: SpectralMode,
    master_seed: int = 0,
    min_fraction: float = 0.1,
    pair_steps: int = 16,
    samples: int = 100_000,
) -> Dict[str, Any]:
    """
    Spectral qudit analysis of a comb shaped photon.

    Reports the weight of the photon in every tooth, the projection of the LO onto every single
    tooth mode and, for adjacent teeth, a scan of the LO phase on the upper tooth of the pair with
    the LO restricted to the pair.
    """
    grid = s.build_grid()
    signal = s.build_signal(grid)
    channel = s.build_channel()
    teeth = spectral_teeth(signal, min_fraction)
    if len(teeth) < 3:
        raise ValidationError(
            f"comb analysis requires at least 3 teeth above {min_fraction:g} of the peak, "
            f"found {len(teeth)}"
        )
    tooth_modes = [restrict(signal, tooth.lower, tooth.upper) for tooth in teeth]
    signal_weights = [abs(overlap(mode, signal)) ** 2 for mode in tooth_modes]
    projections = [overlap(mode, lo) for mode in tooth_modes]

    phases = np.linspace(0.0, TWO_PI, pair_steps)
    offsets = grid.offsets
    pairs = []
    for k in range(len(teeth) - 1):
        lower, upper = teeth[k], teeth[k + 1]
        pair_lo = restrict(lo, lower.lower, upper.upper)
        in_upper = (offsets >= upper.lower) & (offsets < upper.upper)
        eta_hat, stderr = [], []
        for i, phi in enumerate(phases):
            shifted = pair_lo.with_amplitude(
                pair_lo.amplitude * np.where(in_upper, np.exp(1j * phi), 1.0)
            )
            eta = efficiency(shifted, signal, channel)
            batch = sample_quadratures(
                eta, samples, derive_seed(master_seed, _COMB_STREAM, k, i), theta=float(phi)
            )
            estimate = estimate_eta(batch)
            eta_hat.append(estimate.eta_hat)
            stderr.append(estimate.stderr)
        fit = fit_cosine(phases, eta_hat, stderr)
        pairs.append(
            {"teeth": [k, k + 1], "phi_rad": phases, "eta_hat": eta_hat, "fit": fit.to_dict()}
        )

    return {
        "n_teeth": len(teeth),
        "tooth_peaks_rad_per_fs": [tooth.peak for tooth in teeth],
        "tooth_heights": [tooth.height for tooth in teeth],
        "oracle_signal_weights": signal_weights,
        "oracle_lo_projections": [abs(c) ** 2 for c in projections],
        "oracle_lo_phases_rad": [float(np.angle(c)) for c in projections],
        "oracle_projection_sum": float(sum(abs(c) ** 2 for c in projections)),
        "pairs": pairs,
    }


def _versions() -> Dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in ("photon-shaper",) + _DEPENDENCIES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def _mode_characteristics(mode: SpectralMode) -> Dict[str, float]:
    return {
        "fwhm_nm": spectrometer(mode).fwhm_nm(),
        "duration_fs": duration_fwhm(mode),
        "peak_nm": spectrometer(mode).peak_wavelength_nm(),
    }


def _measure(eta: float, samples: int, seed: int) -> Dict[str, Any]:
    batch = sample_quadratures(eta, samples, seed)
    estimate = estimate_eta(batch)
    return {
        "eta_hat": estimate.eta_hat,
        "stderr": estimate.stderr,
        "n": samples,
        "oracle_eta_true": eta,
    }


def _run_stages(s: Scenario, signal, base_lo, channel, master_seed, n_jobs) -> List[GaResult]:
    results: List[GaResult] = []
    for i, stage in enumerate(s.stages):
        encoding = stage.encoding_enum
        ranges = stage.polynomial_ranges.build()
        seed_genes = None
        if stage.seed_from_previous:
            seed_genes = encode_mask(results[-1].best_mask, encoding, ranges)
        problem = GaProblem(
            signal,
            base_lo,
            channel,
            encoding,
            n_pixels=stage.n_pixels,
            ranges=ranges,
            seed_genes=seed_genes,
        )
        logger.info("Stage %d: evolving %s masks", i, encoding.value)
        results.append(
            run_ga(problem, stage.ga.build(), derive_seed(master_seed, _STAGE_STREAM, i), n_jobs)
        )
    return results


def _frog(cfg, lo: SpectralMode, master_seed: int):
    gate = time_gate(to_time(lo), cfg.gate_tolerance, cfg.n_delay)
    trace = frog_trace(gate.field, gate.n_delay)
    result = frog_retrieve(
        trace, cfg.max_iter, seed=derive_seed(master_seed, _FROG_STREAM), tolerance=cfg.tolerance
    )
    gated = from_time(gate.field).normalized()
    retrieved = align_to_reference(result.mode().normalized(), gated)
    summary = {
        "n_delay": gate.n_delay,
        "gated_energy_fraction": gate.energy_fraction,
        "g_error": result.g_error,
        "iterations": result.iterations,
        "converged": result.converged,
        "duration_fs": duration_fwhm(retrieved),
        "fwhm_nm": spectrometer(retrieved).fwhm_nm(),
        "oracle_field_overlap_sq": abs(overlap(retrieved, align_to_reference(gated))) ** 2,
    }
    return summary, trace


def _vacuum_deviation(batch: QuadratureBatch, cfg) -> Dict[str, Any]:
    diagonal = fit_diagonal(batch, cfg.n_max)
    reconstructed = wigner(diagonal, cfg.half_width, cfg.n_side)
    vacuum = wigner(FockDiagonal.vacuum(cfg.n_max), cfg.half_width, cfg.n_side)
    return {
        "phi_rad": batch.theta,
        "w_origin": reconstructed.origin,
        "max_abs_deviation_from_vacuum": float(np.abs(reconstructed.values - vacuum.values).max()),
    }


def run_scenario(
    s: Scenario,
    master_seed: int = 0,
    out_dir: Optional[Path] = None,
    n_jobs: Optional[int] = None,
) -> Report:
    """
    Execute a scenario.

    The genetic algorithm stages shape the base LO, the final LO is measured on a fresh batch and
    compared against the unshaped LO, then the enabled analyses run on the optimum. All randomness
    derives from ``master_seed``, so the payload is identical for any ``n_jobs``.

    Example:

    .. code-block:: python

        from photon_shaper import load_scenario, run_scenario

        report = run_scenario(load_scenario("fig3_dispersed"), master_seed=42, out_dir="run")
        print(report.payload["eta_hat"], report.payload["baseline"]["eta_hat"])

    :param s: A validated scenario.
    :param master_seed: Nonnegative seed.
    :param out_dir: Directory receiving ``report.json`` and the CSV artifacts. Nothing is written
        if omitted.
    :param n_jobs: Worker threads for fitness evaluation.
    :raises Error: Failures of the run, their message prefixed with the scenario name.
    """
    try:
        return _run(s, master_seed, Path(out_dir) if out_dir is not None else None, n_jobs)
    except Error as error:
        raise type(error)(f"scenario '{s.name}': {error.message()}") from error


def _run(s: Scenario, master_seed: int, out_dir: Optional[Path], n_jobs) -> Report:
    logger.info("Running scenario '%s' with master seed %d", s.name, master_seed)
    grid = s.build_grid()
    signal = s.build_signal(grid)
    base_lo = s.build_base_lo(grid)
    channel = s.build_channel()
    analysis = s.analysis

    stages = _run_stages(s, signal, base_lo, channel, master_seed, n_jobs)
    best_mask = stages[-1].best_mask if stages else SlmMask.identity(grid)
    lo, throughput = slm_apply(base_lo, best_mask)
    eta = efficiency(lo, signal, channel)
    final_batch = sample_quadratures(
        eta, analysis.final_samples, derive_seed(master_seed, _FINAL_STREAM)
    )
    final = estimate_eta(final_batch)
    logger.info("Final LO: eta %.4f ± %.4f (true %.4f)", final.eta_hat, final.stderr, eta)

    payload: Dict[str, Any] = {
        "scenario": s.name,
        "stages": [
            dict(ga_summary(result), n_pixels=stage.n_pixels)
            for stage, result in zip(s.stages, stages)
        ],
        "eta_hat": final.eta_hat,
        "eta_stderr": final.stderr,
        "n_samples": analysis.final_samples,
        "throughput": throughput,
        "oracle_eta_true": eta,
        "oracle_overlap_sq": abs(overlap(lo, signal)) ** 2,
        "lo": _mode_characteristics(lo),
        "oracle_signal": _mode_characteristics(signal),
    }
    if analysis.baseline:
        baseline_eta = efficiency(base_lo, signal, channel)
        payload["baseline"] = _measure(
            baseline_eta, analysis.final_samples, derive_seed(master_seed, _BASELINE_STREAM)
        )

    writes = {}
    if analysis.frog is not None:
        payload["frog"], trace = _frog(analysis.frog, lo, master_seed)
        writes["frog_trace.csv"] = lambda path: write_trace(path, trace)
    if analysis.tomography is not None:
        cfg = analysis.tomography
        batch = sample_quadratures(eta, cfg.samples, derive_seed(master_seed, _TOMOGRAPHY_STREAM))
        diagonal = fit_diagonal(batch, cfg.n_max)
        grid_w = wigner(diagonal, cfg.half_width, cfg.n_side)
        payload["tomography"] = dict(wigner_summary(grid_w, diagonal), n=cfg.samples)
        writes["wigner.csv"] = lambda path: write_wigner(path, grid_w, diagonal)
        writes["quadratures.csv"] = lambda path: write_batch(path, batch)
    if analysis.phase_scan is not None:
        cfg = analysis.phase_scan
        phases = np.linspace(cfg.phi_min_rad, cfg.phi_max_rad, cfg.n_steps)
        scan = phase_scan(s, best_mask, phases, master_seed, cfg.samples)
        payload["phase_scan"] = scan.to_dict()
        if analysis.tomography is not None:
            opposite = int(np.argmin(np.abs(np.mod(scan.phases, TWO_PI) - math.pi)))
            payload["phase_scan"]["opposite_phase_state"] = _vacuum_deviation(
                scan.batches[opposite], analysis.tomography
            )
        writes["phase_scan.csv"] = lambda path: write_phase_scan(
            path, scan.phases, scan.eta_hat, scan.stderr, scan.eta_true
        )
    if analysis.comb is not None:
        cfg = analysis.comb
        payload["comb"] = comb_analysis(
            s, lo, master_seed, cfg.min_tooth_fraction, cfg.pair_steps, cfg.samples
        )

    provenance = {
        "scenario_sha256": hashlib.sha256(s.canonical_json().encode("utf-8")).hexdigest(),
        "master_seed": master_seed,
        "n_jobs": n_jobs,
        "versions": _versions(),
        "platform": sys.platform,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    report = Report(payload, provenance, best_mask=best_mask, best_lo=lo, stages=stages)
    if out_dir is not None:
        _write_artifacts(report, out_dir, s, signal, final_batch, writes)
    return report


def _write_artifacts(report, out_dir: Path, s, signal, final_batch, writes):
    out_dir.mkdir(parents=True, exist_ok=True)
    lo = report.best_lo
    artifacts = {
        "best_mask.csv": lambda path: write_mask(path, report.best_mask),
        "best_mode.csv": lambda path: write_mode(path, lo),
        "signal_mode.csv": lambda path: write_mode(path, signal),
        "lo_spectrum.csv": lambda path: _write_spectrum(path, lo),
        "lo_temporal.csv": lambda path: _write_temporal(path, lo),
        "final_quadratures.csv": lambda path: write_batch(path, final_batch),
    }
    if report.stages:
        artifacts["ga_history.csv"] = lambda path: write_ga_history(path, report.stages)
        artifacts["ga_individuals.csv"] = lambda path: write_ga_individuals(path, report.stages)
        last = report.stages[-1].best
        if last.encoding.is_polynomial:
            artifacts["best_polynomial.json"] = lambda path: write_polynomial(
                path, decode_polynomial(last)
            )
    if "comb" in report.payload:
        artifacts["comb_pairs.csv"] = lambda path: _write_comb_pairs(path, report.payload["comb"])
    artifacts.update(writes)

    for name, write in sorted(artifacts.items()):
        path = out_dir / name
        write(path)
        report.artifacts[name] = path
    report_path = out_dir / "report.json"
    write_json(report_path, report.to_dict())
    report.artifacts["report.json"] = report_path
    logger.info("Wrote %d artifacts to %s", len(report.artifacts), out_dir)


def _write_spectrum(path: Path, mode: SpectralMode):
    spectrum = spectrometer(mode)
    write_spectrum(path, spectrum.wavelength_nm, spectrum.intensity)


def _write_temporal(path: Path, mode: SpectralMode):
    temporal = to_time(mode)
    write_temporal(path, temporal.times, temporal.envelope)


def _write_comb_pairs(path: Path, comb: Dict[str, Any]):
    rows = {"lower_tooth": [], "phi_rad": [], "eta_hat": []}
    for pair in comb["pairs"]:
        for phi, eta in zip(pair["phi_rad"], pair["eta_hat"]):
            rows["lower_tooth"].append(pair["teeth"][0])
            rows["phi_rad"].append(float(phi))
            rows["eta_hat"].append(eta)
    write_table_rows(path, rows)
