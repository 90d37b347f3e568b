"""Genetic-algorithm search over spectral-clustering hyperparameters.

Chromosomes are index vectors into discrete per-gene domains.  The GA
minimizes AMPM: selection is roulette-wheel on inverse fitness, crossover
is uniform, mutation redraws single genes uniformly, and one elite
individual survives each generation unchanged — which makes the
best-fitness history exactly non-increasing.

Clusterings that overload (or underwork) caregivers against their weekly
hour windows are penalized at 10^4 miles per violated caregiver.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .allocation import AllocationDecision, FeasibilityStatus, attach_centroids, check_feasibility
from .clustering import EigStrategy, Kernel, SpectralParams, spectral_cluster
from .ingest import InstanceModel
from .metrics import ampm

log = logging.getLogger(__name__)

HOURS_PENALTY_MILES = 1e4
_FITNESS_EPS = 1e-9

Chromosome = tuple[int, ...]


class InvalidChromosome(Exception):
    """Chromosome indices fall outside the hyperparameter domains."""


@dataclass(frozen=True)
class HyperparamSpace:
    """Discrete per-gene domains anchored to the stock hyperparameters."""

    kernels: tuple[Kernel, ...]
    psis: tuple[float, ...]
    knn_ks: tuple[int, ...]
    kmeans_n_inits: tuple[int, ...]
    eig_strategies: tuple[EigStrategy, ...]
    eig_max_iters: tuple[int, ...]
    embed_dim: int
    eig_tol: float = 1e-8

    def __post_init__(self) -> None:
        for name, domain in self.domains().items():
            if not domain:
                raise ValueError(f"empty domain for gene {name}")

    @classmethod
    def for_instance(cls, C: int, n: int) -> "HyperparamSpace":
        """Search space for an instance with C caregivers and n patients:
        ψ on a 25-point geometric grid over [1e-3, 1e2]; k-NN fan-out on
        multiples of C up to 10·C, clamped below n."""
        knn = sorted({max(1, min(m * C, n - 1)) for m in range(1, 11)})
        return cls(
            kernels=(Kernel.RBF, Kernel.KNEAREST),
            psis=tuple(float(p) for p in np.geomspace(1e-3, 1e2, 25)),
            knn_ks=tuple(knn),
            kmeans_n_inits=(5, 10, 20),
            eig_strategies=(EigStrategy.DENSE, EigStrategy.ITERATIVE),
            eig_max_iters=(50, 100, 200),
            embed_dim=C,
        )

    def domains(self) -> dict[str, tuple]:
        return {
            "kernel": self.kernels,
            "psi": self.psis,
            "knn_k": self.knn_ks,
            "kmeans_n_init": self.kmeans_n_inits,
            "eig_strategy": self.eig_strategies,
            "eig_max_iter": self.eig_max_iters,
        }

    def domain_sizes(self) -> tuple[int, ...]:
        return tuple(len(d) for d in self.domains().values())

    def decode(self, chromosome: Chromosome) -> SpectralParams:
        domains = list(self.domains().values())
        if len(chromosome) != len(domains):
            raise InvalidChromosome(f"expected {len(domains)} genes, got {len(chromosome)}")
        for gene, domain in zip(chromosome, domains):
            if not 0 <= gene < len(domain):
                raise InvalidChromosome(f"gene value {gene} outside domain of size {len(domain)}")
        kernel, psi, knn_k, n_init, strategy, max_iter = (
            domain[gene] for gene, domain in zip(chromosome, domains)
        )
        return SpectralParams(
            kernel=kernel,
            psi=psi,
            knn_k=knn_k,
            embed_dim=self.embed_dim,
            kmeans_n_init=n_init,
            eig_strategy=strategy,
            eig_max_iter=max_iter,
            eig_tol=self.eig_tol,
        )

    def encode_defaults(self, defaults: SpectralParams) -> Chromosome:
        """Chromosome for the nearest representable version of ``defaults``."""

        def closest(domain: Sequence, value) -> int:
            if value in domain:
                return list(domain).index(value)
            numeric = [abs(float(d) - float(value)) for d in domain]
            return int(np.argmin(numeric))

        return (
            list(self.kernels).index(defaults.kernel),
            closest(self.psis, defaults.psi),
            closest(self.knn_ks, defaults.knn_k),
            closest(self.kmeans_n_inits, defaults.kmeans_n_init),
            list(self.eig_strategies).index(defaults.eig_strategy),
            closest(self.eig_max_iters, defaults.eig_max_iter),
        )


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 40
    crossover_rate: float = 0.5
    mutation_rate: float = 0.1
    max_iterations: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover_rate must lie in [0, 1]")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must lie in [0, 1]")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass(frozen=True)
class TuneResult:
    best_params: SpectralParams
    best_fitness: float
    history: tuple[float, ...]
    evaluations: int

    def __post_init__(self) -> None:
        if any(b > a + 1e-12 for a, b in zip(self.history, self.history[1:])):
            raise ValueError("fitness history must be non-increasing")

    def to_dict(self) -> dict:
        return {
            "best_params": self.best_params.to_dict(),
            "best_fitness": self.best_fitness,
            "history": list(self.history),
            "evaluations": self.evaluations,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "TuneResult":
        return cls(
            best_params=SpectralParams.from_dict(raw["best_params"]),
            best_fitness=float(raw["best_fitness"]),
            history=tuple(float(h) for h in raw["history"]),
            evaluations=int(raw["evaluations"]),
        )


def evaluate_fitness(
    chromosome: Chromosome,
    space: HyperparamSpace,
    instance: InstanceModel,
    gamma: float,
    seed: int,
    weighting: str = "additive",
) -> float:
    """AMPM of the clustering the chromosome induces, plus 10^4 miles per
    caregiver whose imputed weekly hours leave the [W_min, W_max] window."""
    params = space.decode(chromosome)
    patient_distance = instance.distance.submatrix(instance.patient_ids)
    assignment = spectral_cluster(
        [p.location for p in instance.patients],
        C=len(instance.caregivers),
        params=params,
        seed=seed,
        discipline=instance.discipline,
        patient_ids=instance.patient_ids,
        distance=patient_distance,
    )
    baseline = attach_centroids(
        assignment,
        [(c.id, c.home) for c in instance.caregivers],
        instance.distance,
        [(p.id, p.location) for p in instance.patients],
    )
    value = ampm(baseline.assignment, instance.distance, gamma, weighting)

    centroid_of = baseline.assignment.centroid_of or {}
    assignments = {
        pid: centroid_of[label]
        for pid, label in zip(assignment.patient_ids, assignment.labels)
    }
    decision = AllocationDecision(assignments=assignments)
    report = check_feasibility(decision, instance, gamma)
    violations = sum(
        1 for entry in report.entries.values() if entry.status is not FeasibilityStatus.FEASIBLE
    )
    return value + HOURS_PENALTY_MILES * violations


def roulette_probabilities(scores: Sequence[float]) -> np.ndarray:
    """Selection distribution for minimization: proportional to inverse
    fitness, floored by a small epsilon so exact zeros stay selectable."""
    weights = np.array([1.0 / (s + _FITNESS_EPS) for s in scores], dtype=float)
    return weights / weights.sum()


def ga_minimize(
    domain_sizes: Sequence[int],
    fitness: Callable[[Chromosome], float],
    config: GAConfig,
    seed_chromosomes: Sequence[Chromosome] = (),
) -> tuple[Chromosome, float, tuple[float, ...], int]:
    """Generic GA core over index chromosomes; returns
    (best chromosome, best fitness, per-generation history, evaluations).

    ``seed_chromosomes`` are injected into the initial population, so with
    elitism the result can never be worse than the best of them.
    """
    if not domain_sizes or any(size < 1 for size in domain_sizes):
        raise ValueError("every gene domain must be non-empty")
    for ch in seed_chromosomes:
        if len(ch) != len(domain_sizes) or any(
            not 0 <= g < size for g, size in zip(ch, domain_sizes)
        ):
            raise InvalidChromosome(f"seed chromosome {ch} outside the domain")
    rng = np.random.default_rng(config.seed)
    cache: dict[Chromosome, float] = {}
    evaluations = 0

    def evaluate(chromosome: Chromosome) -> float:
        nonlocal evaluations
        if chromosome not in cache:
            cache[chromosome] = fitness(chromosome)
            evaluations += 1
        return cache[chromosome]

    def random_chromosome() -> Chromosome:
        return tuple(int(rng.integers(size)) for size in domain_sizes)

    population = list(seed_chromosomes)[: config.population_size]
    while len(population) < config.population_size:
        population.append(random_chromosome())
    scores = [evaluate(ch) for ch in population]
    best_idx = int(np.argmin(scores))
    best, best_fit = population[best_idx], scores[best_idx]
    history = [best_fit]

    for _ in range(config.max_iterations):
        probs = roulette_probabilities(scores)
        next_pop: list[Chromosome] = [best]  # elitism of 1
        while len(next_pop) < config.population_size:
            i = int(rng.choice(len(population), p=probs))
            j = int(rng.choice(len(population), p=probs))
            a, b = list(population[i]), list(population[j])
            if rng.random() < config.crossover_rate:
                for g in range(len(domain_sizes)):
                    if rng.random() < 0.5:
                        a[g], b[g] = b[g], a[g]
            for child in (a, b):
                for g in range(len(domain_sizes)):
                    if rng.random() < config.mutation_rate:
                        child[g] = int(rng.integers(domain_sizes[g]))
                if len(next_pop) < config.population_size:
                    next_pop.append(tuple(child))
        population = next_pop
        scores = [evaluate(ch) for ch in population]
        gen_idx = int(np.argmin(scores))
        if scores[gen_idx] < best_fit:
            best, best_fit = population[gen_idx], scores[gen_idx]
        history.append(best_fit)

    return best, best_fit, tuple(history), evaluations


def ga_optimize(
    space: HyperparamSpace,
    instance: InstanceModel,
    gamma: float,
    config: GAConfig,
    weighting: str = "additive",
) -> TuneResult:
    """Tune spectral hyperparameters for one instance by minimizing AMPM."""

    def fitness(chromosome: Chromosome) -> float:
        return evaluate_fitness(chromosome, space, instance, gamma, config.seed, weighting)

    # Seed the search with the stock defaults: elitism then guarantees the
    # tuned result is never worse than the out-of-the-box configuration.
    defaults = SpectralParams.defaults(C=len(instance.caregivers), n=len(instance.patients))
    best, best_fit, history, evaluations = ga_minimize(
        space.domain_sizes(), fitness, config, seed_chromosomes=[space.encode_defaults(defaults)]
    )
    return TuneResult(
        best_params=space.decode(best),
        best_fitness=best_fit,
        history=history,
        evaluations=evaluations,
    )
