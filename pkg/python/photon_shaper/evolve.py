"""
Genetic algorithm shaping the local oscillator against the noisy homodyne efficiency.

Every random draw derives from a master seed through ``numpy.random.SeedSequence`` spawn keys, so a
run is a pure function of its problem, its parameters and the master seed, independent of how many
threads evaluate the individuals.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .error import Error, ValidationError, raise_on_invalid
from .log import TRACE
from .measurement import (
    DEFAULT_SAMPLES_PER_EVAL,
    MIN_BATCH,
    DetectionChannel,
    efficiency,
    estimate_eta,
    sample_quadratures,
)
from .mode import SpectralMode, overlap
from .pool import ordered_map
from .shaping import (
    DEFAULT_N_PIXELS,
    Encoding,
    GeneVector,
    PolynomialRanges,
    SlmMask,
    decode_genes,
    slm_apply,
)

logger = logging.getLogger(__name__)

# Spawn keys separating the random streams derived from one master seed
_INIT_STREAM = 0
_SAMPLING_STREAM = 1
_BREEDING_STREAM = 2

CONVERGED = "converged"
STALLED = "stalled"
BUDGET = "budget"


@dataclass(frozen=True)
class GaParams:
    """
    Parameters of the genetic algorithm.

    ``samples_per_eval`` set to ``None`` switches to noiseless fitness: individuals are scored with
    their exact efficiency instead of an estimate from a quadrature batch. ``target_eta`` stops the
    run as soon as the best fitness of a generation reaches it.
    """

    population_size: int = 30
    elite_count: int = 2
    tournament_size: int = 3
    crossover_rate: float = 0.9
    mutation_rate: float = 0.03
    mutation_sigma: float = 0.08
    max_generations: int = 80
    stall_generations: int = 15
    samples_per_eval: Optional[int] = DEFAULT_SAMPLES_PER_EVAL
    reevaluate_elites: bool = True
    target_eta: Optional[float] = None

    def __post_init__(self):
        raise_on_invalid(
            self.population_size >= 4,
            f"population_size must be at least 4, got {self.population_size}",
        )
        raise_on_invalid(
            0 <= self.elite_count < self.population_size,
            f"elite_count must lie within [0, population_size), got {self.elite_count}",
        )
        raise_on_invalid(
            1 <= self.tournament_size <= self.population_size,
            f"tournament_size must lie within [1, population_size], got {self.tournament_size}",
        )
        for name in ("crossover_rate", "mutation_rate"):
            value = getattr(self, name)
            raise_on_invalid(0.0 <= value <= 1.0, f"{name} must lie within [0, 1], got {value}")
        raise_on_invalid(
            self.mutation_sigma >= 0,
            f"mutation_sigma must not be negative, got {self.mutation_sigma}",
        )
        raise_on_invalid(
            self.max_generations >= 1,
            f"max_generations must be at least 1, got {self.max_generations}",
        )
        raise_on_invalid(
            self.stall_generations >= 1,
            f"stall_generations must be at least 1, got {self.stall_generations}",
        )
        raise_on_invalid(
            self.samples_per_eval is None or self.samples_per_eval >= MIN_BATCH,
            f"samples_per_eval must be at least {MIN_BATCH}, got {self.samples_per_eval}",
        )
        raise_on_invalid(
            self.target_eta is None or 0.0 < self.target_eta <= 1.0,
            f"target_eta must lie within (0, 1], got {self.target_eta}",
        )


@dataclass(frozen=True, eq=False)
class GaProblem:
    """
    What the algorithm optimizes: shaping ``base_lo`` with masks of ``encoding`` so that its
    efficiency against ``signal`` on ``channel`` is maximal. ``seed_genes`` (optional) is the first
    individual of the initial population, the others being mutated copies of it.
    """

    signal: SpectralMode
    base_lo: SpectralMode
    channel: DetectionChannel
    encoding: Encoding
    n_pixels: int = DEFAULT_N_PIXELS
    ranges: PolynomialRanges = field(default_factory=PolynomialRanges)
    seed_genes: Optional[GeneVector] = None

    def __post_init__(self):
        if self.signal.grid != self.base_lo.grid:
            raise ValidationError("signal and base LO live on different grids")
        object.__setattr__(self, "encoding", Encoding.parse(self.encoding))
        if self.seed_genes is not None:
            raise_on_invalid(
                self.seed_genes.encoding is self.encoding
                and self.seed_genes.n_pixels == self.n_pixels,
                "seed genes must use the encoding and pixel count of the problem",
            )


@dataclass(frozen=True, eq=False)
class Population:
    """
    One generation of individuals. Fitness arrays are aligned with ``individuals``; entries are NaN
    until evaluated. ``overlap_sq`` holds the true ``|⟨lo|sig⟩|²`` of each shaped LO, known only to
    the simulation. ``seed`` is the seed the individuals were generated from.
    """

    generation: int
    individuals: List[GeneVector]
    fitness: np.ndarray
    stderr: np.ndarray
    worthless: np.ndarray
    overlap_sq: np.ndarray
    seed: int

    @classmethod
    def unevaluated(cls, generation: int, individuals: List[GeneVector], seed: int) -> "Population":
        n = len(individuals)
        return cls(
            generation=generation,
            individuals=list(individuals),
            fitness=np.full(n, np.nan),
            stderr=np.full(n, np.nan),
            worthless=np.zeros(n, dtype=bool),
            overlap_sq=np.full(n, np.nan),
            seed=seed,
        )

    def __len__(self) -> int:
        return len(self.individuals)

    @property
    def is_evaluated(self) -> bool:
        return not bool(np.any(np.isnan(self.fitness)))

    def ranking(self) -> np.ndarray:
        """
        Indices of the individuals by descending fitness. Ties keep population order.
        """
        raise_on_invalid(self.is_evaluated, "population has not been evaluated")
        return np.argsort(-self.fitness, kind="stable")

    def best_index(self) -> int:
        return int(self.ranking()[0])


@dataclass(frozen=True)
class GenerationRecord:
    """
    Summary of one evaluated generation. ``elite_eta`` is the mean fitness of the elites scored on
    fresh batches in this generation, ``elite_stderr`` its standard error. Without re-evaluated
    elites both fall back to the best individual.
    """

    generation: int
    best_eta: float
    mean_eta: float
    best_stderr: float
    # Simulation ground truth of the best individual
    best_overlap_sq_true: float
    evaluations: int
    elite_eta: float = math.nan
    elite_stderr: float = math.nan


@dataclass(frozen=True)
class IndividualRecord:
    generation: int
    index: int
    eta_hat: float
    stderr: float
    worthless: bool


@dataclass(frozen=True, eq=False)
class GaResult:
    """
    Outcome of ``run_ga``. ``history`` has one record per executed generation and ``individuals``
    one record per scored individual and generation.
    """

    best: GeneVector
    best_mask: SlmMask
    history: List[GenerationRecord]
    individuals: List[IndividualRecord]
    evaluations: int
    stop_reason: str
    final_population: Population
    params: GaParams
    master_seed: int

    @property
    def generations(self) -> int:
        return len(self.history)

    @property
    def best_eta(self) -> float:
        return self.history[-1].best_eta


def derive_seed(master_seed: int, *keys: int) -> int:
    raise_on_invalid(master_seed >= 0, f"master seed must not be negative, got {master_seed}")
    sequence = np.random.SeedSequence(master_seed, spawn_key=tuple(keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def substream_seed(master_seed: int, generation: int, index: int) -> int:
    """
    Seed of the quadrature batch scoring individual ``index`` of ``generation``. A pure function of
    its arguments, so serial and parallel evaluation draw identical batches.
    """
    return derive_seed(master_seed, _SAMPLING_STREAM, generation, index)


def init_population(
    encoding: Encoding,
    params: GaParams,
    seed: int,
    n_pixels: int = DEFAULT_N_PIXELS,
    ranges: Optional[PolynomialRanges] = None,
    seed_genes: Optional[GeneVector] = None,
) -> Population:
    """
    Generation 0, unevaluated. Genes are drawn i.i.d. uniform on ``[0, 1]``, unless ``seed_genes``
    is given: it then becomes the first individual and every other one is a copy of it mutated
    with ``mutation_rate`` and ``mutation_sigma``.
    """
    encoding = Encoding.parse(encoding)
    ranges = ranges if ranges is not None else PolynomialRanges()
    rng = np.random.default_rng(seed)
    if seed_genes is None:
        genes = rng.random((params.population_size, encoding.gene_count(n_pixels)))
    else:
        raise_on_invalid(
            seed_genes.encoding is encoding and seed_genes.n_pixels == n_pixels,
            "seed genes must use the encoding and pixel count of the population",
        )
        genes = [seed_genes.genes] + [
            _mutate(seed_genes.genes, params, rng) for _ in range(params.population_size - 1)
        ]
    individuals = [GeneVector(encoding, row, n_pixels=n_pixels, ranges=ranges) for row in genes]
    return Population.unevaluated(0, individuals, seed)


@dataclass(frozen=True)
class _Score:
    eta_hat: float
    stderr: float
    worthless: bool
    overlap_sq: float


def evaluate(
    pop: Population,
    scenario_sig: SpectralMode,
    ch: DetectionChannel,
    base_lo: SpectralMode,
    samples_per_eval: Optional[int] = DEFAULT_SAMPLES_PER_EVAL,
    master_seed: int = 0,
    n_jobs: Optional[int] = None,
) -> Population:
    """
    Score every individual which has no fitness yet.

    Each individual's genes shape ``base_lo``; its fitness is the efficiency estimated from a
    quadrature batch of ``samples_per_eval`` samples drawn with
    ``substream_seed(master_seed, generation, index)``, or the exact efficiency if
    ``samples_per_eval`` is ``None``. Individuals whose mask blocks the LO entirely are legal but
    worthless: they score 0 and are flagged.

    :param n_jobs: Worker threads. Defaults to the process wide setting of
        ``enable_parallel_evaluation``.
    :return: The population with fitness filled in.
    """
    grid = base_lo.grid
    pending = [i for i in range(len(pop)) if math.isnan(pop.fitness[i])]

    def score(index: int) -> _Score:
        try:
            mask = decode_genes(pop.individuals[index], grid)
            lo, _ = slm_apply(base_lo, mask)
        except Error as error:
            logger.warning(
                "Generation %d, individual %d is worthless: %s", pop.generation, index, error
            )
            return _Score(0.0, 0.0, True, 0.0)
        eta = efficiency(lo, scenario_sig, ch)
        c = overlap(lo, scenario_sig)
        overlap_sq = c.real**2 + c.imag**2
        if samples_per_eval is None:
            return _Score(eta, 0.0, False, overlap_sq)
        batch = sample_quadratures(
            eta, samples_per_eval, substream_seed(master_seed, pop.generation, index)
        )
        eta_hat, stderr = estimate_eta(batch)
        return _Score(eta_hat, stderr, False, overlap_sq)

    scores = ordered_map(score, pending, n_jobs=n_jobs)

    fitness = pop.fitness.copy()
    stderr = pop.stderr.copy()
    worthless = pop.worthless.copy()
    overlap_sq = pop.overlap_sq.copy()
    for index, s in zip(pending, scores):
        fitness[index] = s.eta_hat
        stderr[index] = s.stderr
        worthless[index] = s.worthless
        overlap_sq[index] = s.overlap_sq
        logger.log(
            TRACE,
            "Generation %d, individual %d: eta_hat=%.4f stderr=%.4f",
            pop.generation,
            index,
            s.eta_hat,
            s.stderr,
        )
    return replace(pop, fitness=fitness, stderr=stderr, worthless=worthless, overlap_sq=overlap_sq)


def tournament_select(fitness: np.ndarray, tournament_size: int, rng: np.random.Generator) -> int:
    """
    Index of the fittest of ``tournament_size`` individuals drawn without replacement. Ties go to
    the contender drawn first, so equal fitness selects uniformly.
    """
    contenders = rng.choice(len(fitness), size=tournament_size, replace=False)
    return int(contenders[np.argmax(fitness[contenders])])


def _two_point_crossover(a: np.ndarray, b: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    first, second = np.sort(rng.choice(a.size + 1, size=2, replace=False))
    child = a.copy()
    child[first:second] = b[first:second]
    return child


def _mutate(genes: np.ndarray, params: GaParams, rng: np.random.Generator) -> np.ndarray:
    hits = rng.random(genes.size) < params.mutation_rate
    mutated = genes.copy()
    mutated[hits] += rng.normal(0.0, params.mutation_sigma, int(hits.sum()))
    return np.clip(mutated, 0.0, 1.0)


def next_generation(pop: Population, params: GaParams, seed: int) -> Population:
    """
    Breed the next generation of an evaluated population.

    The ``elite_count`` fittest individuals are cloned unchanged. Every other slot receives a child
    of two tournament winners: two-point crossover with probability ``crossover_rate``, otherwise a
    clone of the first parent, followed by Gaussian mutation of each gene with probability
    ``mutation_rate``, clipped to ``[0, 1]``.

    With ``reevaluate_elites`` disabled the elites keep their fitness, otherwise they are scored
    again on fresh batches.
    """
    raise_on_invalid(pop.is_evaluated, "only an evaluated population can breed")
    rng = np.random.default_rng(seed)
    ranking = pop.ranking()
    elites = [int(i) for i in ranking[: params.elite_count]]

    template = pop.individuals[0]
    individuals = [pop.individuals[i] for i in elites]
    while len(individuals) < params.population_size:
        mother = pop.individuals[tournament_select(pop.fitness, params.tournament_size, rng)]
        father = pop.individuals[tournament_select(pop.fitness, params.tournament_size, rng)]
        if rng.random() < params.crossover_rate:
            genes = _two_point_crossover(mother.genes, father.genes, rng)
        else:
            genes = mother.genes.copy()
        genes = _mutate(genes, params, rng)
        individuals.append(
            GeneVector(template.encoding, genes, n_pixels=template.n_pixels, ranges=template.ranges)
        )

    child = Population.unevaluated(pop.generation + 1, individuals, seed)
    if not params.reevaluate_elites:
        for slot, i in enumerate(elites):
            child.fitness[slot] = pop.fitness[i]
            child.stderr[slot] = pop.stderr[i]
            child.worthless[slot] = pop.worthless[i]
            child.overlap_sq[slot] = pop.overlap_sq[i]
    return child


def _stalled(history: Sequence[GenerationRecord], stall_generations: int) -> bool:
    """
    Whether the mean elite fitness of the last ``stall_generations`` generations exceeds the one of
    the ``stall_generations`` before by no more than twice their pooled standard error.
    """
    if len(history) < 2 * stall_generations:
        return False
    now = history[-stall_generations:]
    then = history[-2 * stall_generations : -stall_generations]

    def mean_and_variance(window):
        eta = np.array([r.elite_eta for r in window])
        stderr = np.array([r.elite_stderr for r in window])
        return eta.mean(), float((stderr**2).sum()) / len(window) ** 2

    eta_now, var_now = mean_and_variance(now)
    eta_then, var_then = mean_and_variance(then)
    pooled = math.sqrt((var_now + var_then) / 2.0)
    return eta_now - eta_then <= 2.0 * pooled


def _elite_fitness(pop: Population, params: GaParams) -> Tuple[float, float]:
    k = params.elite_count
    if pop.generation == 0 or k == 0 or not params.reevaluate_elites:
        best = pop.best_index()
        return float(pop.fitness[best]), float(pop.stderr[best])
    # Breeding puts the elites first
    return (
        float(pop.fitness[:k].mean()),
        float(math.sqrt(float((pop.stderr[:k] ** 2).sum())) / k),
    )


def run_ga(
    scenario: GaProblem, params: GaParams, master_seed: int, n_jobs: Optional[int] = None
) -> GaResult:
    """
    Evolve LO masks until the fitness converges.

    Each generation is evaluated, recorded and bred into the next one. The run stops

    * ``"converged"``: once the best fitness reaches ``params.target_eta``,
    * ``"stalled"``: once the elites, scored afresh every generation, averaged over the last
      ``stall_generations`` generations beat their average over the ``stall_generations`` before
      by no more than twice the pooled standard error,
    * ``"budget"``: after ``max_generations`` generations.

    Worthless individuals never abort a run.

    Example:

    .. code-block:: python

        from photon_shaper import (
            DetectionChannel, Encoding, GaParams, GaProblem, gaussian_mode, make_grid, run_ga
        )

        grid = make_grid()
        photon = gaussian_mode(grid)
        problem = GaProblem(photon, photon, DetectionChannel(0.6), Encoding.POLY_PHASE)
        result = run_ga(problem, GaParams(max_generations=10), master_seed=7)
        # One of "converged", "stalled" or "budget"
        result.stop_reason

    :param scenario: The optimization problem.
    :param params: Parameters of the algorithm.
    :param master_seed: Nonnegative seed all random streams derive from.
    :param n_jobs: Worker threads for fitness evaluation. Results do not depend on it.
    """
    pop = init_population(
        scenario.encoding,
        params,
        derive_seed(master_seed, _INIT_STREAM),
        n_pixels=scenario.n_pixels,
        ranges=scenario.ranges,
        seed_genes=scenario.seed_genes,
    )

    history: List[GenerationRecord] = []
    records: List[IndividualRecord] = []
    evaluations = 0
    while True:
        pending = int(np.isnan(pop.fitness).sum())
        pop = evaluate(
            pop,
            scenario.signal,
            scenario.channel,
            scenario.base_lo,
            samples_per_eval=params.samples_per_eval,
            master_seed=master_seed,
            n_jobs=n_jobs,
        )
        evaluations += pending
        best = pop.best_index()
        elite_eta, elite_stderr = _elite_fitness(pop, params)
        history.append(
            GenerationRecord(
                generation=pop.generation,
                best_eta=float(pop.fitness[best]),
                mean_eta=float(pop.fitness.mean()),
                best_stderr=float(pop.stderr[best]),
                best_overlap_sq_true=float(pop.overlap_sq[best]),
                evaluations=evaluations,
                elite_eta=elite_eta,
                elite_stderr=elite_stderr,
            )
        )
        records.extend(
            IndividualRecord(
                generation=pop.generation,
                index=i,
                eta_hat=float(pop.fitness[i]),
                stderr=float(pop.stderr[i]),
                worthless=bool(pop.worthless[i]),
            )
            for i in range(len(pop))
        )
        logger.info(
            "Generation %d: best eta %.4f, mean eta %.4f",
            pop.generation,
            history[-1].best_eta,
            history[-1].mean_eta,
        )

        stop_reason = None
        if params.target_eta is not None and history[-1].best_eta >= params.target_eta:
            stop_reason = CONVERGED
        elif _stalled(history, params.stall_generations):
            stop_reason = STALLED
        elif len(history) >= params.max_generations:
            stop_reason = BUDGET
        if stop_reason is not None:
            break
        pop = next_generation(
            pop, params, derive_seed(master_seed, _BREEDING_STREAM, pop.generation)
        )

    logger.info("Genetic algorithm stopped after %d generations: %s", len(history), stop_reason)
    best_genes = pop.individuals[pop.best_index()]
    return GaResult(
        best=best_genes,
        best_mask=decode_genes(best_genes, scenario.base_lo.grid),
        history=history,
        individuals=records,
        evaluations=evaluations,
        stop_reason=stop_reason,
        final_population=pop,
        params=params,
        master_seed=master_seed,
    )
