"""
Command line interface. Exit code 0 on success, 2 on validation errors, 1 on other errors.
"""

import argparse
import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .error import Error, ValidationError
from .frog import (
    DEFAULT_MAX_ITER,
    DEFAULT_N_DELAY,
    GATE_TOLERANCE,
    align_to_reference,
    frog_retrieve,
    frog_trace,
    time_gate,
)
from .harness import phase_scan, run_scenario
from .log import log_to_stderr
from .mode import duration_fwhm, from_time, overlap, to_time
from .reader import read_batch, read_mask, read_mode, read_trace
from .scenario import PhaseScanConfig, bundled_scenarios, load_scenario
from .shaping import SlmMask
from .tomography import DEFAULT_HALF_WIDTH, DEFAULT_N_MAX, DEFAULT_N_SIDE, reconstruct_state
from .writer import (
    dumps_json,
    wigner_summary,
    write_mode,
    write_phase_scan,
    write_trace,
    write_wigner,
)

SEED_VARIABLE = "PHOTON_SHAPER_SEED"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID = 2


def resolve_seed(flag: Optional[int]) -> int:
    """
    The ``--seed`` flag wins over the ``PHOTON_SHAPER_SEED`` environment variable, which wins over
    the default of 0.
    """
    if flag is not None:
        seed = flag
    else:
        value = os.environ.get(SEED_VARIABLE)
        if value is None or value.strip() == "":
            return 0
        try:
            seed = int(value)
        except ValueError:
            raise ValidationError(f"{SEED_VARIABLE} must be an integer, got '{value}'") from None
    if seed < 0:
        raise ValidationError(f"seed must not be negative, got {seed}")
    return seed


def _emit(payload):
    sys.stdout.write(dumps_json(payload))


def _run(args) -> int:
    scenario = load_scenario(args.scenario)
    seed = resolve_seed(args.seed)
    report = run_scenario(scenario, seed, out_dir=args.out, n_jobs=args.jobs)
    summary = {
        "scenario": scenario.name,
        "master_seed": seed,
        "eta_hat": report.payload["eta_hat"],
        "eta_stderr": report.payload["eta_stderr"],
        "artifacts": sorted(str(path) for path in report.artifacts.values()),
    }
    if "baseline" in report.payload:
        summary["baseline_eta_hat"] = report.payload["baseline"]["eta_hat"]
    _emit(summary)
    return EXIT_OK


def _scan(args) -> int:
    scenario = load_scenario(args.scenario)
    seed = resolve_seed(args.seed)
    grid = scenario.build_grid()
    mask = read_mask(args.mask) if args.mask else SlmMask.identity(grid)
    cfg = scenario.analysis.phase_scan or PhaseScanConfig()
    n_steps = args.steps if args.steps is not None else cfg.n_steps
    phases = np.linspace(cfg.phi_min_rad, cfg.phi_max_rad, n_steps)
    scan = phase_scan(scenario, mask, phases, seed, cfg.samples)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_phase_scan(
            out / "phase_scan.csv", scan.phases, scan.eta_hat, scan.stderr, scan.eta_true
        )
    _emit(scan.fit.to_dict())
    return EXIT_OK


def _frog(args) -> int:
    seed = resolve_seed(args.seed)
    reference = None
    if args.trace:
        trace = read_trace(args.trace)
    else:
        gate = time_gate(to_time(read_mode(args.mode)), args.gate_tolerance, args.n_delay)
        reference = from_time(gate.field).normalized()
        trace = frog_trace(gate.field, gate.n_delay)
    result = frog_retrieve(trace, args.max_iter, seed=seed)
    retrieved = align_to_reference(result.mode().normalized(), reference)
    summary = {
        "g_error": result.g_error,
        "iterations": result.iterations,
        "converged": result.converged,
        "duration_fs": duration_fwhm(retrieved),
    }
    if reference is not None:
        canonical = align_to_reference(reference)
        summary["oracle_field_overlap_sq"] = abs(overlap(retrieved, canonical)) ** 2
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_trace(out / "frog_trace.csv", trace)
        write_mode(out / "retrieved_mode.csv", retrieved)
    _emit(summary)
    return EXIT_OK


def _tomo(args) -> int:
    batch = read_batch(args.batch)
    diagonal, grid = reconstruct_state(batch, args.n_max, args.half_width, args.n_side)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_wigner(out / "wigner.csv", grid, diagonal)
    _emit(wigner_summary(grid, diagonal))
    return EXIT_OK


def _modes_diff(args) -> int:
    a = read_mode(args.first)
    b = read_mode(args.second)
    c = overlap(a.normalized(), b.normalized())
    _emit({"overlap_sq": abs(c) ** 2, "overlap_phase_rad": float(np.angle(c))})
    return EXIT_OK


def _scenarios(args) -> int:
    for name in bundled_scenarios():
        sys.stdout.write(f"{Path(name).stem}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photon-shaper",
        description="Simulate the optimization of a homodyne LO mode for single photons.",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="Log to standard error. Repeat for more detail (-v info, -vv debug, -vvv trace).",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run a scenario and write its artifacts.")
    run.add_argument("scenario", help="Scenario file or name of a bundled scenario.")
    run.add_argument("--seed", type=int, help=f"Master seed. Overrides {SEED_VARIABLE}.")
    run.add_argument("--out", help="Output directory. Nothing is written if omitted.")
    run.add_argument("--jobs", type=int, help="Worker threads for fitness evaluation.")
    run.set_defaults(handler=_run)

    scan = commands.add_parser("scan", help="Scan the LO phase between two spectral peaks.")
    scan.add_argument("scenario", help="Scenario file or name of a bundled scenario.")
    scan.add_argument("--mask", help="SLM mask CSV shaping the LO. Defaults to no shaping.")
    scan.add_argument("--steps", type=int, help="Number of phases between 0 and 2π.")
    scan.add_argument("--seed", type=int, help=f"Master seed. Overrides {SEED_VARIABLE}.")
    scan.add_argument("--out", help="Output directory for phase_scan.csv.")
    scan.set_defaults(handler=_scan)

    frog = commands.add_parser("frog", help="Record and retrieve an SHG-FROG trace.")
    source = frog.add_mutually_exclusive_group(required=True)
    source.add_argument("--mode", help="Spectral mode CSV to record a trace of.")
    source.add_argument("--trace", help="FROG trace CSV to retrieve.")
    frog.add_argument(
        "--n-delay", type=int, default=DEFAULT_N_DELAY, help="Smallest FROG window in samples."
    )
    frog.add_argument(
        "--gate-tolerance",
        type=float,
        default=GATE_TOLERANCE,
        help="Largest fraction of the mode energy the time gate may remove.",
    )
    frog.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    frog.add_argument(
        "--seed", type=int, help=f"Seed of the initial guess. Overrides {SEED_VARIABLE}."
    )
    frog.add_argument("--out", help="Output directory for the trace and the retrieved mode.")
    frog.set_defaults(handler=_frog)

    tomo = commands.add_parser("tomo", help="Reconstruct a state from quadrature samples.")
    tomo.add_argument("batch", help="Quadrature CSV as written by 'run'.")
    tomo.add_argument("--n-max", type=int, default=DEFAULT_N_MAX)
    tomo.add_argument("--half-width", type=float, default=DEFAULT_HALF_WIDTH)
    tomo.add_argument("--n-side", type=int, default=DEFAULT_N_SIDE)
    tomo.add_argument("--out", help="Output directory for wigner.csv.")
    tomo.set_defaults(handler=_tomo)

    modes = commands.add_parser("modes", help="Operations on serialized modes.")
    mode_commands = modes.add_subparsers(dest="modes_command", required=True)
    diff = mode_commands.add_parser("diff", help="Overlap of two spectral modes.")
    diff.add_argument("first")
    diff.add_argument("second")
    diff.set_defaults(handler=_modes_diff)

    scenarios = commands.add_parser("scenarios", help="List the bundled scenarios.")
    scenarios.set_defaults(handler=_scenarios)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        try:
            log_to_stderr(min(1 + args.verbose, 4))
        except Error:
            # Logging has already been set up by the embedding application
            pass
    try:
        return args.handler(args)
    except ValidationError as error:
        sys.stderr.write(f"error: {error.message()}\n")
        return EXIT_INVALID
    except Error as error:
        sys.stderr.write(f"error: {error.message()}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
