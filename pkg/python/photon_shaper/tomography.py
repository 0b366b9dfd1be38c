"""
Reconstruction of phase invariant states from homodyne data and their Wigner functions.

The measured states are mixtures of Fock states, so only the diagonal of the density matrix is
reconstructed.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import eval_laguerre

from .error import ValidationError, raise_on_invalid
from .measurement import QuadratureBatch

logger = logging.getLogger(__name__)

DEFAULT_N_MAX = 5
DEFAULT_HALF_WIDTH = 3.0
DEFAULT_N_SIDE = 121

# Smallest batch a reconstruction accepts
MIN_SAMPLES = 1000

LL_TOLERANCE = 1e-9
MAX_EM_ITERATIONS = 10_000


def fock_densities(x, n_max: int) -> np.ndarray:
    """
    Quadrature densities ``|ψ_n(x)|²`` of the Fock states ``n = 0..n_max`` (vacuum variance 1/2).

    The eigenfunctions are evaluated with the three term recurrence
    ``ψ_(n+1) = √(2/(n+1))·x·ψ_n − √(n/(n+1))·ψ_(n−1)``, which stays finite for large ``n``.

    :return: Array of shape ``(n_max + 1, len(x))``.
    """
    x = np.asarray(x, dtype=np.float64)
    psi = np.empty((n_max + 1,) + x.shape)
    psi[0] = math.pi**-0.25 * np.exp(-(x**2) / 2.0)
    if n_max >= 1:
        psi[1] = math.sqrt(2.0) * x * psi[0]
    for n in range(1, n_max):
        psi[n + 1] = math.sqrt(2.0 / (n + 1)) * x * psi[n] - math.sqrt(n / (n + 1)) * psi[n - 1]
    return psi**2


@dataclass(frozen=True, eq=False)
class FockDiagonal:
    """
    Fock populations ``ρ_nn`` for ``n = 0..n_max`` with the log-likelihood (per sample) they
    achieve. ``converged`` is false if the fit ran out of iterations.
    """

    populations: np.ndarray
    log_likelihood: float = float("nan")
    iterations: int = 0
    converged: bool = True
    ll_history: List[float] = field(default_factory=list)

    def __post_init__(self):
        populations = np.array(self.populations, dtype=np.float64)
        raise_on_invalid(populations.ndim == 1 and populations.size >= 1, "populations must be 1-D")
        raise_on_invalid(bool(np.all(populations >= 0.0)), "populations must not be negative")
        raise_on_invalid(
            abs(populations.sum() - 1.0) < 1e-9,
            f"populations must sum to one, got {populations.sum()}",
        )
        populations.flags.writeable = False
        object.__setattr__(self, "populations", populations)

    @classmethod
    def vacuum(cls, n_max: int = DEFAULT_N_MAX) -> "FockDiagonal":
        populations = np.zeros(n_max + 1)
        populations[0] = 1.0
        return cls(populations)

    @classmethod
    def photon_mixture(cls, eta: float, n_max: int = DEFAULT_N_MAX) -> "FockDiagonal":
        """
        ``η|1⟩⟨1| + (1 − η)|0⟩⟨0|``.
        """
        raise_on_invalid(0.0 <= eta <= 1.0, f"eta must lie within [0, 1], got {eta}")
        raise_on_invalid(n_max >= 1, "a photon mixture needs n_max of at least 1")
        populations = np.zeros(n_max + 1)
        populations[0] = 1.0 - eta
        populations[1] = eta
        return cls(populations)

    @property
    def n_max(self) -> int:
        return self.populations.size - 1

    def wigner_origin(self) -> float:
        """
        ``W(0, 0) = Σ_n ρ_nn·(−1)^n/π``.
        """
        signs = (-1.0) ** np.arange(self.populations.size)
        return float(np.dot(signs, self.populations) / math.pi)


@dataclass(frozen=True, eq=False)
class WignerGrid:
    """
    Wigner function sampled on the square ``[−L, L]²``. ``values[i, j]`` belongs to
    ``(x[i], p[j])``. ``origin`` is ``W(0, 0)`` evaluated exactly, whether or not the origin is a
    grid point.
    """

    x: np.ndarray
    p: np.ndarray
    values: np.ndarray
    origin: float

    def integral(self) -> float:
        return float(trapezoid(trapezoid(self.values, self.p, axis=1), self.x))

    def minimum(self) -> float:
        return float(self.values.min())


def fit_diagonal(
    b: Union[QuadratureBatch, np.ndarray],
    n_max: int = DEFAULT_N_MAX,
    max_iter: int = MAX_EM_ITERATIONS,
) -> FockDiagonal:
    """
    Maximum likelihood Fock populations of phase averaged quadrature samples.

    Expectation maximization ``ρ_n ← ρ_n·mean_i(p_n(x_i) / Σ_m ρ_m p_m(x_i))`` starting from
    uniform populations. The log-likelihood never decreases; iterations stop once it gains less
    than 1e-9 per sample. A fit exhausting ``max_iter`` is returned with ``converged`` unset.

    :param b: At least 1000 samples.
    :param n_max: Highest Fock state of the model.
    """
    samples = b.samples if isinstance(b, QuadratureBatch) else np.asarray(b, dtype=np.float64)
    if samples.size < MIN_SAMPLES:
        raise ValidationError(
            f"reconstruction requires at least {MIN_SAMPLES} samples, got {samples.size}"
        )
    raise_on_invalid(n_max >= 0, f"n_max must not be negative, got {n_max}")
    densities = fock_densities(samples, n_max)
    tiny = np.finfo(np.float64).tiny

    rho = np.full(n_max + 1, 1.0 / (n_max + 1))
    mixture = np.maximum(rho @ densities, tiny)
    ll = float(np.mean(np.log(mixture)))
    history = [ll]
    converged = False
    iterations = 0
    while iterations < max_iter:
        iterations += 1
        rho = rho * np.mean(densities / mixture, axis=1)
        rho /= rho.sum()
        mixture = np.maximum(rho @ densities, tiny)
        new_ll = float(np.mean(np.log(mixture)))
        history.append(new_ll)
        gain = new_ll - ll
        ll = new_ll
        logger.debug("EM iteration %d: log-likelihood %.12f", iterations, ll)
        if gain < LL_TOLERANCE:
            converged = True
            break
    if not converged:
        logger.warning(
            "Fock population fit did not converge within %d iterations (last gain above %g)",
            max_iter,
            LL_TOLERANCE,
        )
    return FockDiagonal(
        rho, log_likelihood=ll, iterations=iterations, converged=converged, ll_history=history
    )


def wigner(
    d: FockDiagonal, half_width: float = DEFAULT_HALF_WIDTH, n_side: int = DEFAULT_N_SIDE
) -> WignerGrid:
    """
    Wigner function ``W = Σ_n ρ_nn·((−1)^n/π)·L_n(2r²)·e^(−r²)`` of a Fock diagonal state on an
    ``n_side × n_side`` grid over ``[−half_width, half_width]²``. The vacuum peaks at ``1/π``.
    """
    raise_on_invalid(half_width > 0, f"half_width must be positive, got {half_width}")
    raise_on_invalid(n_side >= 2, f"n_side must be at least 2, got {n_side}")
    axis = np.linspace(-half_width, half_width, n_side)
    r2 = axis[:, None] ** 2 + axis[None, :] ** 2
    values = np.zeros_like(r2)
    for n, rho in enumerate(d.populations):
        if rho != 0.0:
            values += rho * (-1.0) ** n / math.pi * eval_laguerre(n, 2.0 * r2) * np.exp(-r2)
    return WignerGrid(x=axis, p=axis.copy(), values=values, origin=d.wigner_origin())


def reconstruct_state(
    samples: Union[QuadratureBatch, np.ndarray],
    n_max: int = DEFAULT_N_MAX,
    half_width: float = DEFAULT_HALF_WIDTH,
    n_side: int = DEFAULT_N_SIDE,
) -> Tuple[FockDiagonal, WignerGrid]:
    """
    Fit the Fock populations of ``samples`` and render their Wigner function.
    """
    diagonal = fit_diagonal(samples, n_max)
    grid = wigner(diagonal, half_width, n_side)
    logger.info(
        "Reconstructed state: rho_00=%.4f rho_11=%.4f W(0,0)=%.4f",
        diagonal.populations[0],
        diagonal.populations[1] if diagonal.n_max >= 1 else 0.0,
        grid.origin,
    )
    return diagonal, grid
