"""Elitist genetic algorithm over gene-inclusion words.

Each generation adds five crossover children, five mutants of the enlarged
pool and five nearly-full random words, then truncates back to the fittest
50 unique words.  Evaluation goes through a caller-supplied batch function
(the pipeline wires in its caching, journaling worker pool there) and the
loop exits early as soon as any new word reaches the target bootstrap.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .evaluator import EvalOutcome, ScoredTree
from .words import GeneWord

EvaluateBatch = Callable[[Sequence[GeneWord]], list[EvalOutcome]]

_REDRAW_LIMIT = 16


@dataclass(frozen=True)
class GaParams:
    population_size: int = 50
    crossovers_per_generation: int = 5
    mutations_per_generation: int = 5
    injections_per_generation: int = 5
    generations_stage_one: int = 200
    generations_stage_two: int = 1000
    target_bootstrap: int = 95

    def __post_init__(self):
        for name in (
            "population_size",
            "crossovers_per_generation",
            "mutations_per_generation",
            "injections_per_generation",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.generations_stage_one < 0 or self.generations_stage_two < 0:
            raise ValueError("generation caps must be >= 0")
        if not 0 <= self.target_bootstrap <= 100:
            raise ValueError("target bootstrap must lie in [0, 100]")


def fitness_key(st: ScoredTree) -> tuple[float, float, str]:
    """Sort key: higher score first, then higher gene rate, then the
    lexicographically smaller word (favouring larger gene subsets on ties)."""
    return (-st.score.s, -st.score.p, str(st.word))


class Population:
    """At most ``capacity`` unique words, kept sorted best-first."""

    def __init__(self, members: Sequence[ScoredTree], capacity: int, generation: int = 0):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        ordered = sorted(members, key=fitness_key)
        unique: list[ScoredTree] = []
        seen: set[GeneWord] = set()
        for st in ordered:
            if st.word not in seen:
                seen.add(st.word)
                unique.append(st)
            if len(unique) == capacity:
                break
        if not unique:
            raise ValueError("population cannot be empty")
        self.members = unique
        self.capacity = capacity
        self.generation = generation

    @property
    def best(self) -> ScoredTree:
        return self.members[0]

    @property
    def word_length(self) -> int:
        return self.members[0].word.n

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)


def init_population(evaluated: Sequence[ScoredTree], size: int) -> Population:
    """Top ``size`` of the evaluated words, deduplicated."""
    if not evaluated:
        raise ValueError("cannot initialize a population from zero evaluations")
    return Population(evaluated, capacity=size, generation=0)


# ── operators ────────────────────────────────────────────────────────────


def crossover_at(w1: GeneWord, w2: GeneWord, cuts: Sequence[int]) -> GeneWord | None:
    """Multi-point crossover at 1-indexed cut positions ``1 < i_1 < ... < i_k < n``.

    The child copies w1 up to and including i_1, w2 up to i_2, and so on,
    alternating.  Returns None when the child would be all-zero.
    """
    n = w1.n
    if w2.n != n:
        raise ValueError("parents must have equal length")
    if list(cuts) != sorted(set(cuts)) or (cuts and (cuts[0] < 2 or cuts[-1] > n - 1)):
        raise ValueError(f"bad cut positions {cuts!r}")
    mask = 0
    segment = 0
    boundary = iter(list(cuts) + [n])
    upto = next(boundary)
    source = (w1, w2)
    for i in range(n):  # i is the 0-indexed position; 1-indexed = i + 1
        if i + 1 > upto:
            segment += 1
            upto = next(boundary)
        mask |= source[segment % 2].bit(i) << i
    if mask == 0:
        return None
    return GeneWord(n, mask)


def crossover(w1: GeneWord, w2: GeneWord, rng: random.Random) -> GeneWord:
    """Random multi-point crossover; all-zero children are redrawn."""
    n = w1.n
    if n < 4:
        raise ValueError("crossover needs words of length >= 4")
    k_max = math.ceil(n / 2) - 1
    for _ in range(_REDRAW_LIMIT):
        k = rng.randint(1, k_max)
        cuts = sorted(rng.sample(range(2, n), k))
        child = crossover_at(w1, w2, cuts)
        if child is not None:
            return child
    return w1


def mutate(w: GeneWord, rng: random.Random) -> GeneWord:
    """Flip k bits, k uniform in [1, n // 4]; all-zero results are redrawn."""
    n = w.n
    if n < 4:
        raise ValueError("mutation needs words of length >= 4")
    k_max = n // 4
    for _ in range(_REDRAW_LIMIT):
        k = rng.randint(1, k_max)
        positions = rng.sample(range(n), k)
        mutated = w.flip(positions)
        if mutated.mask:
            return mutated
    return w


def random_word(n: int, rng: random.Random) -> GeneWord:
    """Nearly-full word: all ones with k random zeros, k uniform in [1, 10].

    For n <= 10 the range shrinks to [1, n - 1] so the word stays non-empty.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    k_max = 10 if n >= 11 else n - 1
    k = rng.randint(1, k_max)
    zeros = rng.sample(range(n), k)
    return GeneWord.excluding(n, zeros)


# ── generation loop ──────────────────────────────────────────────────────


@dataclass
class GaOutcome:
    population: Population
    winner: Optional[ScoredTree]
    generations: int


def _pick_winner(
    scored: Sequence[ScoredTree], target: int
) -> Optional[ScoredTree]:
    qualifying = [st for st in scored if st.score.b >= target]
    return min(qualifying, key=fitness_key) if qualifying else None


def next_generation(
    pop: Population,
    evaluate_batch: EvaluateBatch,
    params: GaParams,
    rng: random.Random,
) -> tuple[Population, Optional[ScoredTree]]:
    """One generation: crossovers, mutations, injections, then truncation.

    All random draws happen on the driver before each batch is dispatched,
    so runs are reproducible regardless of evaluation concurrency.  Failed
    evaluations are simply not added to the pool.
    """
    children: list[GeneWord] = []
    for _ in range(params.crossovers_per_generation):
        if len(pop) >= 2:
            p1, p2 = rng.sample(pop.members, 2)
        else:
            p1 = p2 = pop.members[0]
        children.append(crossover(p1.word, p2.word, rng))
    scored_children = [o.result for o in evaluate_batch(children) if o.ok]

    after_crossover = pop.members + scored_children
    mutants: list[GeneWord] = []
    for _ in range(params.mutations_per_generation):
        source = rng.choice(after_crossover)
        mutants.append(mutate(source.word, rng))
    scored_mutants = [o.result for o in evaluate_batch(mutants) if o.ok]

    injections = [random_word(pop.word_length, rng) for _ in range(params.injections_per_generation)]
    scored_injections = [o.result for o in evaluate_batch(injections) if o.ok]

    new_scored = scored_children + scored_mutants + scored_injections
    next_pop = Population(
        pop.members + new_scored, capacity=params.population_size, generation=pop.generation + 1
    )
    return next_pop, _pick_winner(new_scored, params.target_bootstrap)


def run_ga(
    pop: Population,
    evaluate_batch: EvaluateBatch,
    params: GaParams,
    rng: random.Random,
    max_generations: int,
) -> GaOutcome:
    """Iterate generations until a word reaches the target or the cap."""
    winner: Optional[ScoredTree] = None
    generations = 0
    for generations in range(1, max_generations + 1):
        previous_best = fitness_key(pop.best)
        pop, winner = next_generation(pop, evaluate_batch, params, rng)
        # elitism: the old population is part of the candidate pool
        assert fitness_key(pop.best) <= previous_best
        if winner is not None:
            return GaOutcome(population=pop, winner=winner, generations=generations)
    return GaOutcome(population=pop, winner=None, generations=max_generations if max_generations > 0 else 0)
