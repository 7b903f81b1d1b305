"""Distribution-based test-case generation and the novelty-guided search loop."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator

import numpy as np

from novaq.archive import GridArchive
from novaq.circuits import initial_circuit, initial_states
from novaq.errors import ConfigurationError
from novaq.metrics import MetricTriple, metric_array
from novaq.rng import stream
from novaq.statevector import StateVector, apply_circuit, init_zero

MEAN_RANGE = (-15.0, 15.0)
VARIANCE_RANGE = (0.1, 30.0)
STEP = 0.5


@dataclass(frozen=True)
class Seed:
    """Mean and variance of the Gaussian every U-gate parameter is drawn from."""

    mean: float
    variance: float

    def __post_init__(self):
        object.__setattr__(self, "mean", float(np.clip(self.mean, *MEAN_RANGE)))
        object.__setattr__(self, "variance", float(np.clip(self.variance, *VARIANCE_RANGE)))

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @classmethod
    def random(cls, rng: np.random.Generator) -> "Seed":
        return cls(rng.uniform(*MEAN_RANGE), rng.uniform(*VARIANCE_RANGE))


@dataclass(frozen=True, eq=False)
class TestCase:
    """A generated input state with its provenance and evaluation."""

    __test__ = False  # not a pytest class

    index: int
    n: int
    params: np.ndarray
    seed_id: int
    iteration: int
    seed: Seed | None = None
    metrics: MetricTriple | None = None
    cell: tuple[int, int, int] | None = None
    novelty: float | None = None

    @cached_property
    def state(self) -> StateVector:
        return StateVector(self.n, initial_states(self.params)[0])


@dataclass(frozen=True)
class CampaignConfig:
    n_qubits: int = 3
    pool_size: int = 10
    tests_per_seed_per_iter: int = 10
    survivors: int = 5
    total_budget: int = 1500
    p_random_mutation: float = 0.1
    seed: int = 0
    mode: str = "novaq"
    bins_per_dim: int = 10

    def validate(self) -> "CampaignConfig":
        if not 1 <= self.n_qubits <= 14:
            raise ConfigurationError(f"n_qubits must be in [1, 14], got {self.n_qubits}")
        if self.mode not in ("novaq", "baseline"):
            raise ConfigurationError(f"mode must be 'novaq' or 'baseline', got {self.mode!r}")
        if self.pool_size < 1 or self.tests_per_seed_per_iter < 1:
            raise ConfigurationError("pool_size and tests_per_seed_per_iter must be positive")
        if not 1 <= self.survivors <= self.pool_size:
            raise ConfigurationError("survivors must be in [1, pool_size]")
        if self.total_budget < self.batch_size:
            raise ConfigurationError(
                f"total_budget {self.total_budget} is smaller than one iteration ({self.batch_size} cases)"
            )
        if not 0.0 <= self.p_random_mutation <= 1.0:
            raise ConfigurationError("p_random_mutation must be a probability")
        if self.bins_per_dim < 1:
            raise ConfigurationError("bins_per_dim must be positive")
        return self

    @property
    def batch_size(self) -> int:
        return self.pool_size * self.tests_per_seed_per_iter


def sample_params(seed: Seed, n: int, rng: np.random.Generator, count: int | None = None) -> np.ndarray:
    """3n independent Normal(mean, sqrt(variance)) draws, or a (count, 3n) block."""
    size = 3 * n if count is None else (count, 3 * n)
    return rng.normal(seed.mean, seed.std, size=size)


def generate_test_case(seed: Seed, n: int, rng: np.random.Generator, *, index: int = 0,
                       seed_id: int = 0, iteration: int = 0) -> TestCase:
    params = sample_params(seed, n, rng)
    state = apply_circuit(init_zero(n), initial_circuit(n, params))
    case = TestCase(index, n, params, seed_id, iteration, seed,
                    MetricTriple(*metric_array(state)[0]))
    case.__dict__["state"] = state
    return case


def mutate(seed: Seed, rng: np.random.Generator, p_random: float = 0.1) -> Seed:
    """Random restart with probability ``p_random``, else a uniform +-0.5 step
    on mean and variance; the result is clamped to the seed ranges."""
    u, a, b = rng.random(3)
    if u < p_random:
        return Seed(MEAN_RANGE[0] + a * (MEAN_RANGE[1] - MEAN_RANGE[0]),
                    VARIANCE_RANGE[0] + b * (VARIANCE_RANGE[1] - VARIANCE_RANGE[0]))
    return Seed(seed.mean + (a - 0.5) * 2 * STEP, seed.variance + (b - 0.5) * 2 * STEP)


def select_survivors(fitness: np.ndarray, k: int) -> list[int]:
    """Indices of the k lowest mean-novelty seeds; ties go to the lower index."""
    return sorted(np.argsort(np.asarray(fitness), kind="stable")[:k].tolist())


@dataclass
class IterationLog:
    iteration: int
    seed_ids: list[int]
    seeds: list[Seed]
    fitness: list[float]
    survivors: list[int] = field(default_factory=list)


def _evaluate_block(n, params, snapshot: GridArchive):
    amps = initial_states(params)
    metrics = metric_array(amps)
    novelty = snapshot.novelty_scores(metrics)
    return metrics, novelty


def evolve(config: CampaignConfig, archive: GridArchive, log: list | None = None) -> Iterator[TestCase]:
    """Novelty-guided seed search; yields test cases in generation order.

    Per iteration every pool seed emits ``tests_per_seed_per_iter`` cases,
    scored against the archive as it stood at iteration start. All cases are
    then recorded, seeds ranked by mean novelty, the lowest ``survivors`` kept
    and the pool refilled with their mutants round-robin.
    """
    config.validate()
    n = config.n_qubits
    init_rng = stream(config.seed, "init")
    pool = [Seed.random(init_rng) for _ in range(config.pool_size)]
    ids = list(range(config.pool_size))
    next_id = config.pool_size
    emitted = 0
    iteration = 0
    while emitted < config.total_budget:
        snapshot = archive.snapshot()
        fitness = []
        blocks = []
        for slot, seed in enumerate(pool):
            k = min(config.tests_per_seed_per_iter, config.total_budget - emitted)
            if k <= 0:
                break
            params = sample_params(seed, n, stream(config.seed, "generation", iteration, slot), k)
            metrics, novelty = _evaluate_block(n, params, snapshot)
            blocks.append((slot, params, metrics, novelty))
            fitness.append(float(novelty.mean()))
            emitted += k
        for slot, params, metrics, novelty in blocks:
            cells = archive.record_many(metrics)
            for j in range(params.shape[0]):
                yield TestCase(
                    archive.total_recorded - params.shape[0] + j, n, params[j], ids[slot],
                    iteration, pool[slot], MetricTriple(*metrics[j]),
                    tuple(int(c) for c in cells[j]), float(novelty[j]),
                )
        entry = IterationLog(iteration, list(ids), list(pool), fitness)
        if log is not None:
            log.append(entry)
        if emitted >= config.total_budget:
            break
        keep = select_survivors(np.array(fitness), config.survivors)
        entry.survivors = keep
        mut_rng = stream(config.seed, "mutation", iteration)
        new_pool = [pool[i] for i in keep]
        new_ids = [ids[i] for i in keep]
        j = 0
        while len(new_pool) < config.pool_size:
            parent = pool[keep[j % len(keep)]]
            new_pool.append(mutate(parent, mut_rng, config.p_random_mutation))
            new_ids.append(next_id)
            next_id += 1
            j += 1
        pool, ids = new_pool, new_ids
        iteration += 1


def baseline_params(n: int, rng: np.random.Generator, count: int) -> np.ndarray:
    return rng.uniform(0.0, 2 * math.pi, size=(count, 3 * n))


def baseline_generate(config: CampaignConfig, archive: GridArchive) -> Iterator[TestCase]:
    """Uniform [0, 2 pi) U-gate parameters through the same generator circuit."""
    config.validate()
    n = config.n_qubits
    emitted = 0
    block = 0
    while emitted < config.total_budget:
        k = min(config.batch_size, config.total_budget - emitted)
        params = baseline_params(n, stream(config.seed, "baseline", block), k)
        metrics, novelty = _evaluate_block(n, params, archive.snapshot())
        cells = archive.record_many(metrics)
        for j in range(k):
            yield TestCase(emitted + j, n, params[j], -1, block, None,
                           MetricTriple(*metrics[j]), tuple(int(c) for c in cells[j]), float(novelty[j]))
        emitted += k
        block += 1


def generate(config: CampaignConfig, archive: GridArchive | None = None, log: list | None = None
             ) -> tuple[list[TestCase], GridArchive]:
    """Run either generator to budget and collect the cases."""
    if archive is None:
        archive = GridArchive(config.bins_per_dim)
    if config.mode == "novaq":
        cases = list(evolve(config, archive, log))
    else:
        config.validate()
        cases = list(baseline_generate(config, archive))
    return cases, archive
