"""
Writes simulation artifacts. Tables go through ``pyarrow.csv``; metadata travels either in a
leading ``# key=value`` comment line or in a JSON side car next to the CSV file.
"""

import dataclasses
import json
import math
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
import pyarrow as pa
from pyarrow import csv

from .evolve import GaResult
from .frog import FrogTrace
from .measurement import QuadratureBatch
from .mode import FrequencyGrid, SpectralMode
from .shaping import PhasePolynomial, SlmMask
from .tomography import FockDiagonal, WignerGrid

PathLike = Union[str, Path]


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def _finite_or_none(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None


def dumps_json(payload: Any) -> str:
    """
    Byte stable JSON: sorted keys, two space indentation, trailing newline.
    """
    return json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n"


def write_json(path: PathLike, payload: Any):
    Path(path).write_text(dumps_json(payload), encoding="utf-8")


def grid_metadata(grid: FrequencyGrid) -> Dict[str, Any]:
    return {
        "center_omega": float(grid.center_omega),
        "span": float(grid.span),
        "n_points": int(grid.n_points),
    }


def write_table(path: PathLike, table: pa.Table, metadata: Optional[Dict[str, Any]] = None):
    """
    Write ``table`` as CSV. ``metadata`` becomes a single leading comment line of ``key=value``
    pairs, floats in their round trip ``repr``.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as sink:
        if metadata:
            pairs = " ".join(f"{key}={value!r}" for key, value in metadata.items())
            sink.write(f"# {pairs}\n".encode("utf-8"))
        csv.write_csv(table, sink)


def write_mode(path: PathLike, mode: SpectralMode):
    """
    Spectral mode as CSV with columns ``omega_rad_per_fs, lambda_nm, re, im`` and the grid in the
    header line.
    """
    table = pa.table(
        {
            "omega_rad_per_fs": mode.grid.omega,
            "lambda_nm": mode.grid.wavelength_nm,
            "re": mode.amplitude.real,
            "im": mode.amplitude.imag,
        }
    )
    write_table(path, table, grid_metadata(mode.grid))


def write_mask(path: PathLike, mask: SlmMask):
    table = pa.table(
        {
            "pixel_index": np.arange(mask.n_pixels, dtype=np.int64),
            "transmission": mask.transmission,
            "phase_rad": mask.phase,
        }
    )
    write_table(path, table, grid_metadata(mask.grid))


def write_polynomial(path: PathLike, polynomial: PhasePolynomial):
    write_json(path, polynomial.to_dict())


def sidecar_path(path: PathLike) -> Path:
    return Path(path).with_suffix(".json")


def write_batch(path: PathLike, batch: QuadratureBatch):
    """
    Quadrature batch as CSV ``index, x, theta_rad`` plus a JSON side car holding ``n``, ``seed``
    and the simulation internal ``eta_true``.
    """
    n = len(batch)
    table = pa.table(
        {
            "index": np.arange(n, dtype=np.int64),
            "x": batch.samples,
            "theta_rad": np.full(n, batch.theta),
        }
    )
    write_table(path, table)
    write_json(sidecar_path(path), {"n": n, "seed": batch.seed, "eta_true": batch.true_eta})


def write_trace(path: PathLike, trace: FrogTrace):
    """
    FROG trace as CSV ``omega, tau, intensity`` (delay varying fastest) plus a JSON side car with
    the axes, the normalization and the grid of the recorded field.
    """
    omega, tau = np.meshgrid(trace.omega, trace.tau, indexing="ij")
    table = pa.table(
        {
            "omega": omega.ravel(),
            "tau": tau.ravel(),
            "intensity": trace.intensity.ravel(),
        }
    )
    write_table(path, table)
    write_json(
        sidecar_path(path),
        {
            "n": trace.size,
            "delta_omega": trace.delta_omega,
            "delta_tau": trace.delta_tau,
            "normalization": "peak",
            "scale": trace.scale,
            "grid": grid_metadata(trace.grid),
        },
    )


def wigner_summary(grid: WignerGrid, diagonal: FockDiagonal) -> Dict[str, Any]:
    return {
        "w_origin": grid.origin,
        "w_min": grid.minimum(),
        "integral": grid.integral(),
        "rho_diagonal": diagonal.populations,
        "log_likelihood": _finite_or_none(diagonal.log_likelihood),
        "em_iterations": diagonal.iterations,
        "em_converged": diagonal.converged,
    }


def write_wigner(path: PathLike, grid: WignerGrid, diagonal: FockDiagonal):
    """
    Wigner function as CSV ``x, p, W`` plus a JSON summary with ``W(0, 0)``, the minimum and the
    Fock populations.
    """
    x, p = np.meshgrid(grid.x, grid.p, indexing="ij")
    table = pa.table({"x": x.ravel(), "p": p.ravel(), "W": grid.values.ravel()})
    write_table(path, table)
    write_json(sidecar_path(path), wigner_summary(grid, diagonal))


def _as_stages(results: Union[GaResult, Sequence[GaResult]]) -> Sequence[GaResult]:
    return [results] if isinstance(results, GaResult) else results


def write_ga_history(path: PathLike, results: Union[GaResult, Sequence[GaResult]]):
    """
    Per generation fitness of one or more chained stages. ``elite_eta`` is the mean fitness of the
    re-evaluated elites the stall rule watches. ``best_overlap_sq_true`` is simulation ground truth,
    unknown to the algorithm.
    """
    rows = [
        (stage, record)
        for stage, result in enumerate(_as_stages(results))
        for record in result.history
    ]
    table = pa.table(
        {
            "stage": np.array([stage for stage, _ in rows], dtype=np.int64),
            "generation": np.array([r.generation for _, r in rows], dtype=np.int64),
            "best_eta": np.array([r.best_eta for _, r in rows], dtype=np.float64),
            "mean_eta": np.array([r.mean_eta for _, r in rows], dtype=np.float64),
            "best_stderr": np.array([r.best_stderr for _, r in rows], dtype=np.float64),
            "elite_eta": np.array([r.elite_eta for _, r in rows], dtype=np.float64),
            "elite_stderr": np.array([r.elite_stderr for _, r in rows], dtype=np.float64),
            "best_overlap_sq_true": np.array(
                [r.best_overlap_sq_true for _, r in rows], dtype=np.float64
            ),
        }
    )
    write_table(path, table)


def write_ga_individuals(path: PathLike, results: Union[GaResult, Sequence[GaResult]]):
    rows = [
        (stage, record)
        for stage, result in enumerate(_as_stages(results))
        for record in result.individuals
    ]
    table = pa.table(
        {
            "stage": np.array([stage for stage, _ in rows], dtype=np.int64),
            "generation": np.array([r.generation for _, r in rows], dtype=np.int64),
            "index": np.array([r.index for _, r in rows], dtype=np.int64),
            "eta_hat": np.array([r.eta_hat for _, r in rows], dtype=np.float64),
            "stderr": np.array([r.stderr for _, r in rows], dtype=np.float64),
            "worthless": pa.array([r.worthless for _, r in rows], type=pa.bool_()),
        }
    )
    write_table(path, table)


def write_table_rows(path: PathLike, columns: Dict[str, Sequence[Any]]):
    """
    Plain CSV of equally long columns, no metadata.
    """
    write_table(path, pa.table({name: list(values) for name, values in columns.items()}))


def ga_summary(result: GaResult) -> Dict[str, Any]:
    return {
        "params": dataclasses.asdict(result.params),
        "master_seed": result.master_seed,
        "stop_reason": result.stop_reason,
        "generations": result.generations,
        "evaluations": result.evaluations,
        "encoding": result.best.encoding.value,
        "best_genes": result.best.genes,
        "best_eta": [r.best_eta for r in result.history],
        "mean_eta": [r.mean_eta for r in result.history],
        "elite_eta": [r.elite_eta for r in result.history],
    }


def write_phase_scan(path: PathLike, phases, eta_hat, stderr, eta_true):
    table = pa.table(
        {
            "phi_rad": np.asarray(phases, dtype=np.float64),
            "eta_hat": np.asarray(eta_hat, dtype=np.float64),
            "stderr": np.asarray(stderr, dtype=np.float64),
            "eta_true": np.asarray(eta_true, dtype=np.float64),
        }
    )
    write_table(path, table)


def write_spectrum(path: PathLike, wavelength_nm, intensity):
    table = pa.table(
        {
            "lambda_nm": np.asarray(wavelength_nm, dtype=np.float64),
            "intensity": np.asarray(intensity, dtype=np.float64),
        }
    )
    write_table(path, table)


def write_temporal(path: PathLike, times, envelope):
    envelope = np.asarray(envelope)
    table = pa.table(
        {
            "t_fs": np.asarray(times, dtype=np.float64),
            "intensity": np.abs(envelope) ** 2,
            "phase_rad": np.angle(envelope),
        }
    )
    write_table(path, table)
