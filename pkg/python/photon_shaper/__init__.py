from .error import Error, ValidationError
from .evolve import GaParams, GaProblem, GaResult, init_population, run_ga, substream_seed
from .evolve import evaluate, next_generation, tournament_select
from .frog import FrogTrace, align_to_reference, autocorrelation, frog_retrieve, frog_trace
from .frog import g_error, time_gate
from .harness import Report, comb_analysis, phase_scan, run_scenario
from .log import log_to_stderr
from .measurement import DetectionChannel, QuadratureBatch, efficiency, estimate_eta
from .measurement import sample_quadratures, spectral_teeth, spectrometer
from .mode import FrequencyGrid, SpectralMode, TemporalField, duration_fwhm, from_time
from .mode import gaussian_mode, make_grid, overlap, restrict, to_time
from .pool import enable_parallel_evaluation
from .scenario import Scenario, comb_scenario, load_scenario
from .shaping import Encoding, GeneVector, PhasePolynomial, SlmMask, apply_phase
from .shaping import decode_genes, encode_mask, material_phase, michelson_modulate, slm_apply
from .tomography import FockDiagonal, WignerGrid, fit_diagonal, reconstruct_state, wigner

__all__ = [
    "Error",
    "ValidationError",
    "GaParams",
    "GaProblem",
    "GaResult",
    "init_population",
    "evaluate",
    "next_generation",
    "tournament_select",
    "run_ga",
    "substream_seed",
    "FrogTrace",
    "frog_trace",
    "frog_retrieve",
    "g_error",
    "time_gate",
    "align_to_reference",
    "autocorrelation",
    "Report",
    "run_scenario",
    "phase_scan",
    "comb_analysis",
    "log_to_stderr",
    "DetectionChannel",
    "QuadratureBatch",
    "efficiency",
    "sample_quadratures",
    "estimate_eta",
    "spectrometer",
    "spectral_teeth",
    "FrequencyGrid",
    "SpectralMode",
    "TemporalField",
    "make_grid",
    "gaussian_mode",
    "overlap",
    "to_time",
    "from_time",
    "duration_fwhm",
    "restrict",
    "enable_parallel_evaluation",
    "Scenario",
    "load_scenario",
    "comb_scenario",
    "Encoding",
    "GeneVector",
    "PhasePolynomial",
    "SlmMask",
    "material_phase",
    "apply_phase",
    "michelson_modulate",
    "decode_genes",
    "encode_mask",
    "slm_apply",
    "FockDiagonal",
    "WignerGrid",
    "fit_diagonal",
    "wigner",
    "reconstruct_state",
]
