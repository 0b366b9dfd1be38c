"""
Scenario files: JSON documents describing one experiment, validated by strict pydantic models.
Units are part of the key names. Unknown keys are errors.
"""

import json
import math
from importlib import resources
from pathlib import Path
from typing import List, Literal, Optional, Union

import pydantic
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .error import Error, ValidationError
from .evolve import GaParams
from .measurement import DetectionChannel, spectral_teeth
from .mode import FrequencyGrid, SpectralMode, gaussian_mode, make_grid
from .shaping import (
    DEFAULT_N_PIXELS,
    SELLMEIER,
    Encoding,
    PhasePolynomial,
    PolynomialRanges,
    apply_phase,
    material_phase,
    michelson_modulate,
)

_BUNDLED = "scenarios"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridConfig(_Strict):
    center_wavelength_nm: float = 800.0
    span_rad_per_fs: float = Field(0.30, gt=0)
    n_points: int = 1024

    def build(self) -> FrequencyGrid:
        return make_grid(self.center_wavelength_nm, self.span_rad_per_fs, self.n_points)


class MichelsonConfig(_Strict):
    delay_fs: float = Field(ge=0)
    phi_rad: float = 0.0


class ModeRecipe(_Strict):
    """
    A Gaussian photon (or LO) optionally shaped by a Michelson interferometer on its pump, an
    additional quadratic phase and a block of glass, applied in this order.
    """

    fwhm_nm: float = Field(9.4, gt=0)
    center_offset_rad_per_fs: float = 0.0
    michelson: Optional[MichelsonConfig] = None
    extra_c2_fs2: float = 0.0
    material: Optional[str] = None
    material_length_mm: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _material_needs_length(self):
        if (self.material is None) != (self.material_length_mm is None):
            raise ValueError("material and material_length_mm must be given together")
        if self.material is not None and self.material.upper() not in SELLMEIER:
            raise ValueError(
                f"unknown material '{self.material}', known materials: {', '.join(SELLMEIER)}"
            )
        return self

    def build(self, grid: FrequencyGrid) -> SpectralMode:
        mode = gaussian_mode(grid, self.center_offset_rad_per_fs, self.fwhm_nm)
        if self.michelson is not None:
            mode = michelson_modulate(mode, self.michelson.delay_fs, self.michelson.phi_rad)
        if self.extra_c2_fs2 != 0.0:
            mode = apply_phase(mode, PhasePolynomial(c2=self.extra_c2_fs2))
        if self.material is not None:
            mode = apply_phase(mode, material_phase(self.material, self.material_length_mm, grid))
        mode.check_contained()
        return mode


class ChannelConfig(_Strict):
    eta_sys: float = Field(0.6, ge=0, le=1)
    lo_phase_rad: float = 0.0


class PolynomialRangesConfig(_Strict):
    c1_fs: float = Field(500.0, gt=0)
    c2_fs2: float = Field(1.0e4, gt=0)
    c3_fs3: float = Field(1.0e5, gt=0)
    c4_fs4: float = Field(1.0e6, gt=0)

    def build(self) -> PolynomialRanges:
        return PolynomialRanges(self.c1_fs, self.c2_fs2, self.c3_fs3, self.c4_fs4)


class GaConfig(_Strict):
    population_size: int = Field(30, ge=4)
    elite_count: int = Field(2, ge=0)
    tournament_size: int = Field(3, ge=1)
    crossover_rate: float = Field(0.9, ge=0, le=1)
    mutation_rate: float = Field(0.03, ge=0, le=1)
    mutation_sigma: float = Field(0.08, ge=0)
    max_generations: int = Field(80, ge=1)
    stall_generations: int = Field(15, ge=1)
    # None scores individuals with their exact efficiency
    samples_per_eval: Optional[int] = Field(10_000, ge=100)
    reevaluate_elites: bool = True
    target_eta: Optional[float] = Field(None, gt=0, le=1)

    def build(self) -> GaParams:
        return GaParams(**self.model_dump())


class StageConfig(_Strict):
    encoding: Literal["PixelPhase", "PixelAmpPhase", "PolyPhase", "PolyPlusAmpPixels"]
    n_pixels: int = Field(DEFAULT_N_PIXELS, ge=1)
    ga: GaConfig = GaConfig()
    polynomial_ranges: PolynomialRangesConfig = PolynomialRangesConfig()
    # Start from the best mask of the previous stage
    seed_from_previous: bool = False

    @property
    def encoding_enum(self) -> Encoding:
        return Encoding.parse(self.encoding)

    @model_validator(mode="after")
    def _polynomial_genes_can_not_be_seeded(self):
        if self.seed_from_previous and self.encoding_enum.is_polynomial:
            raise ValueError(f"{self.encoding} genes can not be seeded from a previous mask")
        return self


class TomographyConfig(_Strict):
    samples: int = Field(100_000, ge=1000)
    n_max: int = Field(5, ge=1)
    half_width: float = Field(3.0, gt=0)
    n_side: int = Field(121, ge=2)


class FrogConfig(_Strict):
    # Smallest FROG window; it grows until the gate keeps all but gate_tolerance of the energy
    n_delay: int = 128
    gate_tolerance: float = Field(1e-3, gt=0, lt=1)
    max_iter: int = Field(1000, ge=1)
    tolerance: float = Field(1e-4, gt=0)


class PhaseScanConfig(_Strict):
    n_steps: int = Field(16, ge=4)
    phi_min_rad: float = 0.0
    phi_max_rad: float = 2.0 * math.pi
    samples: int = Field(100_000, ge=100)


class CombConfig(_Strict):
    min_tooth_fraction: float = Field(0.1, gt=0, le=1)
    pair_steps: int = Field(16, ge=4)
    samples: int = Field(100_000, ge=100)


class AnalysisConfig(_Strict):
    # Samples of the batch measuring the efficiency of the final and the unshaped LO
    final_samples: int = Field(100_000, ge=100)
    baseline: bool = True
    tomography: Optional[TomographyConfig] = None
    frog: Optional[FrogConfig] = None
    phase_scan: Optional[PhaseScanConfig] = None
    comb: Optional[CombConfig] = None


class Scenario(_Strict):
    """
    One experiment: the photon, the LO before shaping, the detection channel, the chain of genetic
    algorithm stages and the analyses to run on the result. Without stages the unshaped LO is
    characterized.
    """

    name: str
    note: Optional[str] = None
    grid: GridConfig = GridConfig()
    signal: ModeRecipe
    base_lo: ModeRecipe = ModeRecipe()
    channel: ChannelConfig = ChannelConfig()
    stages: List[StageConfig] = []
    analysis: AnalysisConfig = AnalysisConfig()

    @model_validator(mode="after")
    def _first_stage_has_no_predecessor(self):
        if self.stages and self.stages[0].seed_from_previous:
            raise ValueError("the first stage has no previous stage to seed from")
        return self

    def build_grid(self) -> FrequencyGrid:
        return self.grid.build()

    def build_signal(self, grid: Optional[FrequencyGrid] = None) -> SpectralMode:
        return self.signal.build(grid if grid is not None else self.build_grid())

    def build_base_lo(self, grid: Optional[FrequencyGrid] = None) -> SpectralMode:
        return self.base_lo.build(grid if grid is not None else self.build_grid())

    def build_channel(self) -> DetectionChannel:
        return DetectionChannel(self.channel.eta_sys, self.channel.lo_phase_rad)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def _describe(error: pydantic.ValidationError) -> str:
    lines = []
    for entry in error.errors():
        path = ".".join(str(part) for part in entry["loc"]) or "<root>"
        lines.append(f"{path}: {entry['msg']}")
    return "invalid scenario: " + "; ".join(lines)


def parse_scenario(document: Union[str, dict], origin: str = "<scenario>") -> Scenario:
    """
    Validate a scenario given as JSON text or as an already decoded document.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as error:
            raise ValidationError(f"{origin} is not valid JSON: {error}") from error
    try:
        return Scenario.model_validate(document)
    except pydantic.ValidationError as error:
        raise ValidationError(f"{origin}: {_describe(error)}") from error


def bundled_scenarios() -> List[str]:
    """
    File names of the scenarios shipped with the package.
    """
    folder = resources.files(__package__).joinpath(_BUNDLED)
    return sorted(entry.name for entry in folder.iterdir() if entry.name.endswith(".json"))


def load_scenario(path: Union[str, Path]) -> Scenario:
    """
    Load and validate a scenario.

    :param path: Path to a JSON file or the file name of a bundled scenario, with or without the
        ``.json`` suffix (e.g. ``"fig3_dispersed"``).
    :return: The validated scenario. Violations raise ``ValidationError`` naming the dotted path of
        the offending key, e.g. ``stages.0.ga.mutationrate``.
    """
    candidate = Path(path)
    if candidate.is_file():
        return parse_scenario(candidate.read_text(encoding="utf-8"), str(candidate))
    name = candidate.name if candidate.suffix == ".json" else f"{candidate.name}.json"
    if str(candidate.parent) in ("", ".") and name in bundled_scenarios():
        text = resources.files(__package__).joinpath(_BUNDLED, name).read_text(encoding="utf-8")
        return parse_scenario(text, name)
    raise Error(f"no scenario file '{path}' and no bundled scenario of that name")


def shaping_stages() -> List[StageConfig]:
    """
    A polynomial phase stage seeding a stage of amplitude and phase pixels, as the bundled
    scenarios chain them.
    """
    return [
        StageConfig(encoding="PolyPhase", ga=GaConfig(max_generations=60)),
        StageConfig(
            encoding="PixelAmpPhase",
            seed_from_previous=True,
            ga=GaConfig(
                max_generations=150,
                stall_generations=25,
                samples_per_eval=40_000,
                mutation_sigma=0.05,
            ),
        ),
    ]


def comb_scenario(
    delay: float,
    n_teeth: int = 3,
    fwhm_nm: float = 9.4,
    eta_sys: float = 0.6,
    min_tooth_fraction: float = 0.1,
) -> Scenario:
    """
    Spectral qudit: a photon whose pump passed a long Michelson interferometer breaks up into a
    comb of teeth spaced ``2π/delay``. The LO evolves through ``shaping_stages``; the analysis
    projects the optimized LO onto every tooth and scans the phase between adjacent teeth.

    :param delay: Michelson delay in fs.
    :param n_teeth: Least number of teeth above ``min_tooth_fraction`` of the highest one the
        spectrum must show. At least three.
    :raises ValidationError: If the spectrum resolves fewer teeth.
    """
    if not delay > 0:
        raise ValidationError(f"a comb needs a positive Michelson delay, got {delay} fs")
    if n_teeth < 3:
        raise ValidationError(f"a qudit comb has at least 3 teeth, {n_teeth} requested")
    scenario = Scenario(
        name=f"comb_{delay:g}fs",
        note="Spectral qudit from a long Michelson delay on the pump.",
        signal=ModeRecipe(fwhm_nm=fwhm_nm, michelson=MichelsonConfig(delay_fs=delay)),
        base_lo=ModeRecipe(fwhm_nm=fwhm_nm),
        channel=ChannelConfig(eta_sys=eta_sys),
        stages=shaping_stages(),
        analysis=AnalysisConfig(comb=CombConfig(min_tooth_fraction=min_tooth_fraction)),
    )
    teeth = spectral_teeth(scenario.build_signal(), min_tooth_fraction)
    if len(teeth) < n_teeth:
        raise ValidationError(
            f"a delay of {delay} fs resolves {len(teeth)} teeth above {min_tooth_fraction:g} of "
            f"the peak, {n_teeth} required"
        )
    return scenario
