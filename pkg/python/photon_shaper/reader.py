"""
Reads the artifacts written by ``photon_shaper.writer``.
"""

import ast
import json
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
import pyarrow as pa
from pyarrow import csv

from .error import Error, ValidationError
from .frog import FrogTrace
from .measurement import QuadratureBatch
from .mode import FrequencyGrid, SpectralMode
from .shaping import PhasePolynomial, SlmMask
from .writer import PathLike, sidecar_path


def _parse_header(line: str) -> Dict[str, Any]:
    metadata = {}
    for pair in line.lstrip("#").split():
        key, sep, value = pair.partition("=")
        if not sep:
            raise ValidationError(f"malformed header entry '{pair}', expected key=value")
        try:
            metadata[key] = ast.literal_eval(value)
        except (ValueError, SyntaxError):
            metadata[key] = value
    return metadata


def read_table(path: PathLike) -> Tuple[pa.Table, Dict[str, Any]]:
    """
    Read a CSV artifact together with the metadata of its leading comment line (if any).
    """
    path = Path(path)
    if not path.is_file():
        raise Error(f"no such file: {path}")
    with open(path, "rb") as source:
        first = source.readline().decode("utf-8")
    metadata = _parse_header(first) if first.startswith("#") else {}
    read_options = csv.ReadOptions(skip_rows=1 if metadata or first.startswith("#") else 0)
    try:
        table = csv.read_csv(path, read_options=read_options)
    except pa.ArrowInvalid as error:
        raise ValidationError(f"{path} is not a valid CSV artifact: {error}") from error
    return table, metadata


def _columns(table: pa.Table, names: Sequence[str], path: PathLike) -> Tuple[np.ndarray, ...]:
    missing = [name for name in names if name not in table.column_names]
    if missing:
        raise ValidationError(f"{path} lacks the column(s): {', '.join(missing)}")
    return tuple(table.column(name).to_numpy() for name in names)


def _read_json(path: Path) -> Dict[str, Any]:
    if not path.is_file():
        raise Error(f"no such file: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as error:
        raise ValidationError(f"{path} is not valid JSON: {error}") from error


def grid_from_metadata(metadata: Dict[str, Any], origin: PathLike) -> FrequencyGrid:
    try:
        return FrequencyGrid(
            center_omega=float(metadata["center_omega"]),
            span=float(metadata["span"]),
            n_points=int(metadata["n_points"]),
        )
    except KeyError as error:
        raise ValidationError(f"{origin} does not describe its grid, missing {error}") from error


def read_mode(path: PathLike) -> SpectralMode:
    """
    Spectral mode written by ``write_mode``. The amplitudes are restored bit exactly, without
    renormalization.
    """
    table, metadata = read_table(path)
    grid = grid_from_metadata(metadata, path)
    omega, re, im = _columns(table, ("omega_rad_per_fs", "re", "im"), path)
    if omega.shape != grid.omega.shape or not np.allclose(omega, grid.omega, rtol=1e-12, atol=0):
        raise ValidationError(f"frequency column of {path} does not match its header grid")
    return SpectralMode(grid, re + 1j * im)


def read_mask(path: PathLike, grid: Optional[FrequencyGrid] = None) -> SlmMask:
    """
    SLM mask written by ``write_mask``. ``grid`` is required only for files without a header.
    """
    table, metadata = read_table(path)
    if grid is None:
        grid = grid_from_metadata(metadata, path)
    index, transmission, phase = _columns(table, ("pixel_index", "transmission", "phase_rad"), path)
    if not np.array_equal(index, np.arange(index.size)):
        raise ValidationError(f"pixel indices of {path} must run from 0 without gaps")
    return SlmMask(grid, transmission, phase)


def read_polynomial(path: PathLike) -> PhasePolynomial:
    return PhasePolynomial.from_dict(_read_json(Path(path)))


def read_batch(path: PathLike) -> QuadratureBatch:
    """
    Quadrature batch written by ``write_batch``. The JSON side car is optional.
    """
    table, _ = read_table(path)
    (x,) = _columns(table, ("x",), path)
    theta = 0.0
    if "theta_rad" in table.column_names and table.num_rows > 0:
        theta = float(table.column("theta_rad")[0].as_py())
    sidecar = sidecar_path(path)
    info = _read_json(sidecar) if sidecar.is_file() else {}
    return QuadratureBatch(x, theta=theta, true_eta=info.get("eta_true"), seed=info.get("seed"))


def read_trace(path: PathLike) -> FrogTrace:
    """
    FROG trace written by ``write_trace``, together with its JSON side car.
    """
    table, _ = read_table(path)
    omega, tau, intensity = _columns(table, ("omega", "tau", "intensity"), path)
    info = _read_json(sidecar_path(path))
    n = int(info["n"])
    if intensity.size != n * n:
        raise ValidationError(f"{path} holds {intensity.size} values, expected {n}×{n}")
    grid = grid_from_metadata(info.get("grid", {}), sidecar_path(path))
    return FrogTrace(
        intensity.reshape(n, n),
        omega.reshape(n, n)[:, 0].copy(),
        tau.reshape(n, n)[0, :].copy(),
        float(info["scale"]),
        grid,
    )
