"""
Spectral transforms of the setup: material dispersion, the Michelson modulation of the pump
inherited by the heralded photon, and the pixelated SLM with the gene encodings the genetic
algorithm evolves.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from .error import Error, ValidationError, raise_on_invalid
from .mode import C_NM_PER_FS, FrequencyGrid, SpectralMode

logger = logging.getLogger(__name__)

DEFAULT_N_PIXELS = 128

# Number of levels each pixel value is quantized to
QUANTIZATION_LEVELS = 4096

# Norm below which a transform is considered to extinguish the mode
MIN_THROUGHPUT = 1e-12

TWO_PI = 2.0 * math.pi

# Sellmeier coefficients (B1, B2, B3, C1, C2, C3), C in µm², for n² = 1 + Σ B λ² / (λ² − C)
SELLMEIER = {
    "BK7": (1.03961212, 0.231792344, 1.01046945, 0.00600069867, 0.0200179144, 103.560653),
}

# Step in rad/fs of the finite difference stencils used for dispersion coefficients
_DISPERSION_STEP = 0.004


@dataclass(frozen=True)
class PhasePolynomial:
    """
    Spectral phase ``φ(Ω) = Σ c_n Ω^n / n!`` around the grid center, ``Ω = ω − ω0``.

    Units: ``c0`` rad, ``c1`` fs, ``c2`` fs², ``c3`` fs³, ``c4`` fs⁴.
    """

    c0: float = 0.0
    c1: float = 0.0
    c2: float = 0.0
    c3: float = 0.0
    c4: float = 0.0

    def __post_init__(self):
        for name, value in zip(("c0", "c1", "c2", "c3", "c4"), self.coefficients()):
            raise_on_invalid(
                math.isfinite(value), f"coefficient {name} must be finite, got {value}"
            )

    def coefficients(self) -> Tuple[float, float, float, float, float]:
        return (self.c0, self.c1, self.c2, self.c3, self.c4)

    def evaluate(self, offsets) -> np.ndarray:
        offsets = np.asarray(offsets, dtype=np.float64)
        phase = np.zeros_like(offsets)
        for n, c in enumerate(self.coefficients()):
            if c != 0.0:
                phase += c * offsets**n / math.factorial(n)
        return phase

    def __add__(self, other: "PhasePolynomial") -> "PhasePolynomial":
        return PhasePolynomial(*(a + b for a, b in zip(self.coefficients(), other.coefficients())))

    def __neg__(self) -> "PhasePolynomial":
        return PhasePolynomial(*(-c for c in self.coefficients()))

    def scaled(self, factor: float) -> "PhasePolynomial":
        return PhasePolynomial(*(factor * c for c in self.coefficients()))

    def to_dict(self) -> dict:
        """
        Named coefficients with their units, as stored in polynomial JSON files.
        """
        return {
            "c0_rad": self.c0,
            "c1_fs": self.c1,
            "c2_fs2": self.c2,
            "c3_fs3": self.c3,
            "c4_fs4": self.c4,
        }

    @classmethod
    def from_dict(cls, values: dict) -> "PhasePolynomial":
        keys = ("c0_rad", "c1_fs", "c2_fs2", "c3_fs3", "c4_fs4")
        unknown = sorted(set(values) - set(keys))
        raise_on_invalid(not unknown, f"unknown polynomial coefficients: {', '.join(unknown)}")
        return cls(*(float(values.get(key, 0.0)) for key in keys))


def _refractive_index(coefficients, omega: float) -> float:
    b1, b2, b3, c1, c2, c3 = coefficients
    lam2 = (TWO_PI * C_NM_PER_FS / omega / 1000.0) ** 2
    n2 = 1.0 + b1 * lam2 / (lam2 - c1) + b2 * lam2 / (lam2 - c2) + b3 * lam2 / (lam2 - c3)
    return math.sqrt(n2)


def material_phase(material_id: str, length: float, grid: FrequencyGrid) -> PhasePolynomial:
    """
    Dispersion of a block of glass as a phase polynomial around the grid center.

    The spectral phase ``φ(ω) = n(ω)·ω·L/c`` is differentiated numerically (central differences of
    the Sellmeier index) at the grid center. Only group delay dispersion ``c2`` and third order
    dispersion ``c3`` are returned, since constant phase and absolute delay do not change the mode
    shape. The coefficients are exactly proportional to ``length``.

    :param material_id: Name of the glass. Currently ``"BK7"``.
    :param length: Thickness in mm.
    :param grid: Grid whose center frequency is the expansion point.
    :return: Polynomial with ``c2`` in fs² and ``c3`` in fs³.
    """
    coefficients = SELLMEIER.get(material_id.upper())
    if coefficients is None:
        raise ValidationError(
            f"unknown material '{material_id}', known materials: {', '.join(sorted(SELLMEIER))}"
        )
    raise_on_invalid(length > 0, f"material length must be positive, got {length} mm")

    # Phase per mm of glass, 1 mm = 1e6 nm
    def phi(omega):
        return _refractive_index(coefficients, omega) * omega * 1e6 / C_NM_PER_FS

    w0 = grid.center_omega
    h = _DISPERSION_STEP
    p2, p1, p0, m1, m2 = (phi(w0 + 2 * h), phi(w0 + h), phi(w0), phi(w0 - h), phi(w0 - 2 * h))
    gdd_per_mm = (p1 - 2.0 * p0 + m1) / h**2
    tod_per_mm = (p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * h**3)
    logger.debug(
        "%s: %.6g fs²/mm GDD, %.6g fs³/mm TOD at %.2f nm",
        material_id,
        gdd_per_mm,
        tod_per_mm,
        grid.center_wavelength_nm,
    )
    return PhasePolynomial(c2=gdd_per_mm * length, c3=tod_per_mm * length)


def apply_phase(m: SpectralMode, p: PhasePolynomial) -> SpectralMode:
    """
    Multiply the mode by ``exp(iφ(Ω))``. The intensity spectrum is unchanged.
    """
    return m.with_amplitude(m.amplitude * np.exp(1j * p.evaluate(m.grid.offsets)))


def michelson_factor(grid: FrequencyGrid, delay: float, phi: float) -> np.ndarray:
    """
    Spectral transfer ``(1 + e^(i(Ωτ + φ)))/2`` of a Michelson interferometer with arm delay ``τ``
    (fs) and relative phase ``φ`` (rad).
    """
    raise_on_invalid(delay >= 0, f"Michelson delay must not be negative, got {delay} fs")
    return (1.0 + np.exp(1j * (grid.offsets * delay + phi))) / 2.0


def michelson_modulate(m: SpectralMode, delay: float, phi: float) -> SpectralMode:
    """
    Sinusoidal amplitude modulation of a mode by a Michelson interferometer, renormalized.

    The heralded photon inherits the spectral modulation of its pump, so the interferometer
    transfer is applied directly to the photon envelope with the pump's delay.

    :param m: Mode to modulate.
    :param delay: Arm delay in fs. The spectral period is ``2π/delay``.
    :param phi: Relative phase in rad. ``π`` digs a node at the center frequency.
    """
    amplitude = m.amplitude * michelson_factor(m.grid, delay, phi)
    shaped = m.with_amplitude(amplitude)
    norm = shaped.norm()
    if norm < MIN_THROUGHPUT:
        raise Error(
            f"Michelson modulation with delay {delay} fs and phase {phi} rad extinguishes the mode "
            f"(remaining norm {norm:.3g})"
        )
    return SpectralMode(m.grid, amplitude / math.sqrt(norm))


class Encoding(Enum):
    """
    How a gene vector maps onto the SLM.
    """

    #: One phase gene per pixel, full transmission.
    PIXEL_PHASE = "PixelPhase"
    #: One transmission gene per pixel followed by one phase gene per pixel.
    PIXEL_AMP_PHASE = "PixelAmpPhase"
    #: Five polynomial genes ``c0..c4``. ``c0`` always decodes to zero.
    POLY_PHASE = "PolyPhase"
    #: Five polynomial genes followed by one transmission gene per pixel.
    POLY_PLUS_AMP_PIXELS = "PolyPlusAmpPixels"

    def gene_count(self, n_pixels: int = DEFAULT_N_PIXELS) -> int:
        if self is Encoding.PIXEL_PHASE:
            return n_pixels
        if self is Encoding.PIXEL_AMP_PHASE:
            return 2 * n_pixels
        if self is Encoding.POLY_PHASE:
            return 5
        return 5 + n_pixels

    @property
    def is_polynomial(self) -> bool:
        return self in (Encoding.POLY_PHASE, Encoding.POLY_PLUS_AMP_PIXELS)

    @classmethod
    def parse(cls, value) -> "Encoding":
        if isinstance(value, cls):
            return value
        for encoding in cls:
            if value in (encoding.value, encoding.name):
                return encoding
        raise ValidationError(
            f"unknown encoding '{value}', expected one of: {', '.join(e.value for e in cls)}"
        )


@dataclass(frozen=True)
class PolynomialRanges:
    """
    Half widths of the symmetric ranges polynomial genes are rescaled to. A gene of 0.5 decodes to
    zero, 0 and 1 to the range boundaries.
    """

    c1: float = 500.0
    c2: float = 1.0e4
    c3: float = 1.0e5
    c4: float = 1.0e6

    def __post_init__(self):
        for name in ("c1", "c2", "c3", "c4"):
            value = getattr(self, name)
            raise_on_invalid(
                math.isfinite(value) and value > 0,
                f"polynomial range {name} must be positive, got {value}",
            )

    def decode(self, genes) -> PhasePolynomial:
        _, g1, g2, g3, g4 = (float(g) for g in genes)
        return PhasePolynomial(
            c0=0.0,
            c1=(2.0 * g1 - 1.0) * self.c1,
            c2=(2.0 * g2 - 1.0) * self.c2,
            c3=(2.0 * g3 - 1.0) * self.c3,
            c4=(2.0 * g4 - 1.0) * self.c4,
        )


@dataclass(frozen=True, eq=False)
class GeneVector:
    """
    Genes in ``[0, 1]`` of one individual, tagged with the encoding that gives them meaning.
    """

    encoding: Encoding
    genes: np.ndarray
    n_pixels: int = DEFAULT_N_PIXELS
    ranges: PolynomialRanges = field(default_factory=PolynomialRanges)

    def __post_init__(self):
        encoding = Encoding.parse(self.encoding)
        genes = np.array(self.genes, dtype=np.float64)
        expected = encoding.gene_count(self.n_pixels)
        if genes.shape != (expected,):
            raise ValidationError(
                f"{encoding.value} with {self.n_pixels} pixels takes {expected} genes, got "
                f"{genes.size}"
            )
        raise_on_invalid(
            bool(np.all((genes >= 0.0) & (genes <= 1.0))), "genes must lie within [0, 1]"
        )
        genes.flags.writeable = False
        object.__setattr__(self, "encoding", encoding)
        object.__setattr__(self, "genes", genes)


def pixel_samples(n_points: int, n_pixels: int) -> int:
    """
    Number of grid samples covered by one SLM pixel. The pixels tile the grid, leaving at most
    ``n_points mod n_pixels`` samples uncovered.
    """
    return max(1, n_points // n_pixels)


@dataclass(frozen=True, eq=False)
class SlmMask:
    """
    Per pixel transmission and phase of the SLM, mapped onto ``grid``.

    Pixel ``p`` covers the contiguous samples ``first + p·w ... first + (p+1)·w − 1`` where ``w`` is
    ``pixel_samples(n_points, n_pixels)`` and pixel ``n_pixels/2`` starts at the center sample.
    Samples outside the window pass unmodified.
    """

    grid: FrequencyGrid
    transmission: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        transmission = np.array(self.transmission, dtype=np.float64)
        phase = np.array(self.phase, dtype=np.float64)
        raise_on_invalid(
            transmission.ndim == 1 and transmission.shape == phase.shape and transmission.size > 0,
            "transmission and phase must be 1-D arrays with one entry per pixel",
        )
        raise_on_invalid(
            bool(np.all(np.isfinite(transmission)) and np.all(np.isfinite(phase))),
            "mask contains NaN or infinite entries",
        )
        raise_on_invalid(
            bool(np.all((transmission >= 0.0) & (transmission <= 1.0))),
            "pixel transmissions must lie within [0, 1]",
        )
        n_pixels = transmission.size
        raise_on_invalid(
            n_pixels * pixel_samples(self.grid.n_points, n_pixels) <= self.grid.n_points,
            f"{n_pixels} pixels do not fit onto a grid of {self.grid.n_points} samples",
        )
        phase = np.mod(phase, TWO_PI)
        # np.mod may return exactly 2π for tiny negative inputs
        phase[phase >= TWO_PI] = 0.0
        transmission.flags.writeable = False
        phase.flags.writeable = False
        object.__setattr__(self, "transmission", transmission)
        object.__setattr__(self, "phase", phase)

    @classmethod
    def identity(cls, grid: FrequencyGrid, n_pixels: int = DEFAULT_N_PIXELS) -> "SlmMask":
        return cls(grid, np.ones(n_pixels), np.zeros(n_pixels))

    @property
    def n_pixels(self) -> int:
        return int(self.transmission.size)

    @property
    def pixel_samples(self) -> int:
        return pixel_samples(self.grid.n_points, self.n_pixels)

    @property
    def first_sample(self) -> int:
        return self.grid.n_points // 2 - (self.n_pixels // 2) * self.pixel_samples

    def pixel_slice(self, p: int) -> slice:
        start = self.first_sample + p * self.pixel_samples
        return slice(start, start + self.pixel_samples)

    def pixel_centers(self) -> np.ndarray:
        """
        Mean offset ``Ω`` (rad/fs) of the samples each pixel covers.
        """
        w = self.pixel_samples
        start = self.first_sample
        window = self.grid.offsets[start : start + w * self.n_pixels]
        return window.reshape(self.n_pixels, w).mean(axis=1)

    def pixel_of_offset(self, offset: float) -> Optional[int]:
        """
        Pixel covering the grid sample nearest to ``offset``, or ``None`` outside the window.
        """
        k = int(round(offset / self.grid.delta_omega)) + self.grid.n_points // 2
        p = (k - self.first_sample) // self.pixel_samples
        return p if 0 <= p < self.n_pixels else None

    def transfer(self) -> np.ndarray:
        """
        Complex transfer function on every grid sample; one outside the SLM window.
        """
        transfer = np.ones(self.grid.n_points, dtype=np.complex128)
        per_pixel = self.transmission * np.exp(1j * self.phase)
        start = self.first_sample
        stop = start + self.pixel_samples * self.n_pixels
        transfer[start:stop] = np.repeat(per_pixel, self.pixel_samples)
        return transfer

    def compose(self, other: "SlmMask") -> "SlmMask":
        """
        Mask equivalent to passing through ``self`` and then ``other``: transmissions multiply and
        phases add.
        """
        raise_on_invalid(
            self.grid == other.grid and self.n_pixels == other.n_pixels,
            "only masks with the same pixel layout on the same grid can be composed",
        )
        return SlmMask(
            self.grid, self.transmission * other.transmission, self.phase + other.phase
        )

    def with_phase(self, phase) -> "SlmMask":
        return SlmMask(self.grid, self.transmission, phase)


def quantize_transmission(genes) -> np.ndarray:
    levels = QUANTIZATION_LEVELS - 1
    return np.round(np.asarray(genes, dtype=np.float64) * levels) / levels


def quantize_phase(turns) -> np.ndarray:
    """
    Maps phases given in turns (``φ/2π``) onto the 4096 phase levels within ``[0, 2π)``.
    """
    steps = np.round(np.asarray(turns, dtype=np.float64) * QUANTIZATION_LEVELS)
    levels = np.mod(steps, QUANTIZATION_LEVELS)
    return TWO_PI * levels / QUANTIZATION_LEVELS


def decode_genes(g: GeneVector, grid: FrequencyGrid) -> SlmMask:
    """
    Deterministic map from genes to a quantized SLM mask.

    * ``PixelPhase``: ``φ_p = 2π·g_p``, ``t_p = 1``.
    * ``PixelAmpPhase``: ``t_p = g_p``, ``φ_p = 2π·g_(p + n_pixels)``.
    * ``PolyPhase``: genes rescale affinely onto the ``PolynomialRanges`` (``c0`` is always zero);
      the polynomial is sampled at the pixel centers.
    * ``PolyPlusAmpPixels``: ``PolyPhase`` plus one transmission gene per pixel.

    Every pixel value is quantized to 4096 levels.
    """
    n = g.n_pixels
    genes = g.genes
    encoding = g.encoding
    if encoding is Encoding.PIXEL_PHASE:
        transmission = np.ones(n)
        turns = genes
    elif encoding is Encoding.PIXEL_AMP_PHASE:
        transmission = quantize_transmission(genes[:n])
        turns = genes[n:]
    else:
        polynomial = g.ranges.decode(genes[:5])
        centers = SlmMask.identity(grid, n).pixel_centers()
        turns = polynomial.evaluate(centers) / TWO_PI
        if encoding is Encoding.POLY_PHASE:
            transmission = np.ones(n)
        else:
            transmission = quantize_transmission(genes[5:])
    return SlmMask(grid, transmission, quantize_phase(turns))


def decode_polynomial(g: GeneVector) -> PhasePolynomial:
    """
    Polynomial encoded by the first five genes of a polynomial gene vector.
    """
    raise_on_invalid(g.encoding.is_polynomial, f"{g.encoding.value} carries no polynomial genes")
    return g.ranges.decode(g.genes[:5])


def encode_mask(
    mask: SlmMask, encoding: Encoding, ranges: Optional[PolynomialRanges] = None
) -> GeneVector:
    """
    Genes which decode to ``mask``. Exact for masks produced by ``decode_genes`` with a pixel
    encoding. ``PixelPhase`` requires unit transmission. Polynomial encodings can not represent
    arbitrary masks and are rejected.
    """
    encoding = Encoding.parse(encoding)
    if encoding.is_polynomial:
        raise ValidationError(f"a mask can not be re-encoded as {encoding.value} genes")
    turns = mask.phase / TWO_PI
    if encoding is Encoding.PIXEL_PHASE:
        raise_on_invalid(
            bool(np.all(mask.transmission == 1.0)),
            "PixelPhase genes can not represent a mask with amplitude modulation",
        )
        genes = turns
    else:
        genes = np.concatenate([mask.transmission, turns])
    return GeneVector(
        encoding,
        np.clip(genes, 0.0, 1.0),
        n_pixels=mask.n_pixels,
        ranges=ranges if ranges is not None else PolynomialRanges(),
    )


def slm_apply(m: SpectralMode, mask: SlmMask) -> Tuple[SpectralMode, float]:
    """
    Shape a mode with the SLM.

    :return: The renormalized shaped mode and the throughput ``Σ|Ψ'|²Δω`` before renormalization.
        Amplitude shaping costs power, it does not invalidate the mode.
    """
    if m.grid != mask.grid:
        raise ValidationError("mask is mapped onto a different grid than the mode")
    shaped = m.with_amplitude(m.amplitude * mask.transfer())
    throughput = shaped.norm()
    if throughput < MIN_THROUGHPUT:
        raise Error(f"mask blocks the mode entirely (throughput {throughput:.3g})")
    return SpectralMode(m.grid, shaped.amplitude / math.sqrt(throughput)), throughput
