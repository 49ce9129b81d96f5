"""Variable-length NSGA-II searching anchor placements.

A chromosome is a flat list of 2N coordinates decoding to N anchor
positions; N may differ between individuals. Fitness runs the belief
propagation localizer on a frozen base scenario (fixed unknown positions,
fixed per-pair measurement noise streams), so every chromosome is scored
under common random numbers and re-evaluation is exactly reproducible.

Selection minimizes (network mean error, anchor count). Survivor selection
is the usual non-dominated sort plus crowding-distance truncation; parents
come from binary tournaments on (rank, crowding). Crossovers cut only at
anchor boundaries and draw cut points independently in each parent, which
is what lets offspring lengths drift.
"""

from __future__ import annotations

import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._seeds import (TAG_CHROM, TAG_CROSSOVER, TAG_EVAL, TAG_GA, TAG_MUTATE,
                     derive, stream)
from .field import FieldScenario, MeasurementModel, measure_ranges, with_anchors
from .nbp import NbpParams, mean_error, run_nbp

__all__ = [
    "AnchorChromosome", "ObjectiveVector", "GaConfig", "GenerationStats",
    "ParetoArchive", "random_chromosome", "evaluate_chromosome", "dominates",
    "nondominated_sort", "crowding_distance", "crossover", "mutate", "nsga2_run",
    "write_pareto_csv", "write_generation_log_csv",
]

log = logging.getLogger(__name__)

CROSSOVER_MODES = ("one_point", "two_point", "arithmetic")


@dataclass(frozen=True)
class AnchorChromosome:
    genes: np.ndarray  # flat (2N,) coordinate list

    def __post_init__(self):
        object.__setattr__(self, "genes", np.asarray(self.genes, dtype=np.float64))
        if self.genes.ndim != 1 or self.genes.size % 2 != 0 or self.genes.size == 0:
            raise ValueError("genes must be a flat non-empty even-length list")

    @property
    def n_anchors(self) -> int:
        return self.genes.size // 2

    def as_points(self) -> np.ndarray:
        return self.genes.reshape(-1, 2)

    def check(self, width: float, height: float, n_min: int, n_max: int) -> None:
        n = self.n_anchors
        if not n_min <= n <= n_max:
            raise ValueError(f"anchor count {n} outside [{n_min}, {n_max}]")
        pts = self.as_points()
        if (pts[:, 0] < 0).any() or (pts[:, 0] > width).any() \
                or (pts[:, 1] < 0).any() or (pts[:, 1] > height).any():
            raise ValueError("chromosome coordinate outside field bounds")


@dataclass(frozen=True)
class ObjectiveVector:
    error_m: float
    anchor_count: int
    penalized: bool = False  # evaluation failed; error set to the field diagonal


@dataclass(frozen=True)
class GaConfig:
    population: int = 40
    max_generations: int = 100
    stall_generations: int = 10
    crossover_rate: float = 0.9
    mutation_sigma: float = 5.0
    length_mutation_rate: float = 0.1
    n_min: int = 3
    n_max: int = 12
    master_seed: int = 0
    width: float = 100.0
    height: float = 100.0

    def __post_init__(self):
        if self.population < 4 or self.population % 2 != 0:
            raise ValueError("population must be even and >= 4")
        if self.n_min < 1 or self.n_max < self.n_min:
            raise ValueError("need 1 <= n_min <= n_max")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover_rate must be in [0, 1]")
        if not 0.0 <= self.length_mutation_rate <= 1.0:
            raise ValueError("length_mutation_rate must be in [0, 1]")
        if self.mutation_sigma < 0:
            raise ValueError("mutation_sigma must be >= 0")
        if self.max_generations < 0 or self.stall_generations < 1:
            raise ValueError("bad generation limits")


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    front1_size: int
    min_error: float
    median_error: float


@dataclass
class ParetoArchive:
    members: list          # (AnchorChromosome, ObjectiveVector) pairs
    fronts: list           # index lists, best front first
    crowding: list         # per-member crowding distance
    history: list = field(default_factory=list)

    def front1(self):
        return [self.members[i] for i in self.fronts[0]]


def random_chromosome(config: GaConfig, seed: int) -> AnchorChromosome:
    rng = stream(seed, TAG_CHROM)
    n = int(rng.integers(config.n_min, config.n_max + 1))
    pts = rng.uniform((0.0, 0.0), (config.width, config.height), size=(n, 2))
    return AnchorChromosome(pts.reshape(-1))


def chromosome_seed(master_seed: int, chrom: AnchorChromosome) -> int:
    """Stable 64-bit seed from the chromosome's canonical byte content."""
    h = hashlib.blake2b(chrom.genes.tobytes(), digest_size=8,
                        salt=int(master_seed).to_bytes(8, "little", signed=False))
    return int.from_bytes(h.digest(), "little")


def evaluate_chromosome(chrom: AnchorChromosome, base: FieldScenario,
                        params: NbpParams, master_seed: int,
                        model: MeasurementModel | None = None) -> ObjectiveVector:
    """(mean localization error, anchor count) for one candidate placement.

    The base scenario and the per-pair range-noise streams are frozen, so
    two chromosomes are always compared under the same randomness.
    """
    model = model if model is not None else MeasurementModel()
    scenario = with_anchors(base, chrom.as_points())
    ranges = measure_ranges(scenario, model, derive(master_seed, TAG_EVAL))
    try:
        result = run_nbp(scenario, ranges, params, chromosome_seed(master_seed, chrom),
                         model)
        return ObjectiveVector(mean_error(result, scenario), chrom.n_anchors)
    except Exception:
        log.exception("evaluation failed; assigning penalty objective")
        diag = math.hypot(base.width, base.height)
        return ObjectiveVector(diag, chrom.n_anchors, penalized=True)


def dominates(a: ObjectiveVector, b: ObjectiveVector) -> bool:
    """True iff a is no worse in both objectives and better in at least one."""
    if a.error_m > b.error_m or a.anchor_count > b.anchor_count:
        return False
    return a.error_m < b.error_m or a.anchor_count < b.anchor_count


def nondominated_sort(objs) -> list:
    """Partition indices into fronts, best first (Deb's counting scheme)."""
    if not objs:
        raise ValueError("cannot sort an empty population")
    n = len(objs)
    dominated_by = [[] for _ in range(n)]
    count = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if dominates(objs[i], objs[j]):
                dominated_by[i].append(j)
                count[j] += 1
            elif dominates(objs[j], objs[i]):
                dominated_by[j].append(i)
                count[i] += 1
    fronts = []
    current = [i for i in range(n) if count[i] == 0]
    while current:
        fronts.append(sorted(current))
        nxt = []
        for i in current:
            for j in dominated_by[i]:
                count[j] -= 1
                if count[j] == 0:
                    nxt.append(j)
        current = nxt
    return fronts


def crowding_distance(front_objs) -> list:
    """Normalized objective-gap sums; boundary members get infinity."""
    n = len(front_objs)
    if n == 0:
        raise ValueError("empty front")
    cd = [0.0] * n
    for key in (lambda o: o.error_m, lambda o: float(o.anchor_count)):
        order = sorted(range(n), key=lambda i: (key(front_objs[i]), i))
        cd[order[0]] = cd[order[-1]] = math.inf
        fmin, fmax = key(front_objs[order[0]]), key(front_objs[order[-1]])
        if fmax == fmin:
            continue  # degenerate range: this objective adds nothing inside
        for k in range(1, n - 1):
            gap = key(front_objs[order[k + 1]]) - key(front_objs[order[k - 1]])
            if math.isfinite(cd[order[k]]):
                cd[order[k]] += gap / (fmax - fmin)
    return cd


def _clone(chrom: AnchorChromosome) -> AnchorChromosome:
    return AnchorChromosome(chrom.genes.copy())


def crossover(p1: AnchorChromosome, p2: AnchorChromosome, mode: str, seed: int,
              n_min: int = 1, n_max: int = 10 ** 9):
    """Anchor-boundary-aligned crossover; cut points drawn per parent.

    Children whose anchor count leaves [n_min, n_max] trigger cut
    resampling (up to 10 attempts) before falling back to cloning.
    """
    if mode not in CROSSOVER_MODES:
        raise ValueError(f"unknown crossover mode {mode!r}")
    rng = stream(seed, TAG_CROSSOVER)
    g1, g2 = p1.genes, p2.genes
    n1, n2 = p1.n_anchors, p2.n_anchors

    if mode == "arithmetic":
        alpha = rng.uniform()
        share = 2 * min(n1, n2)
        head1 = alpha * g1[:share] + (1.0 - alpha) * g2[:share]
        head2 = (1.0 - alpha) * g1[:share] + alpha * g2[:share]
        return (AnchorChromosome(np.concatenate([head1, g1[share:]])),
                AnchorChromosome(np.concatenate([head2, g2[share:]])))

    for _ in range(10):
        if mode == "one_point":
            if n1 < 2 or n2 < 2:
                break
            c1 = int(rng.integers(1, n1))
            c2 = int(rng.integers(1, n2))
            child1 = np.concatenate([g1[:2 * c1], g2[2 * c2:]])
            child2 = np.concatenate([g2[:2 * c2], g1[2 * c1:]])
        else:  # two_point: swap the middles
            a1 = int(rng.integers(0, n1))
            b1 = int(rng.integers(a1 + 1, n1 + 1))
            a2 = int(rng.integers(0, n2))
            b2 = int(rng.integers(a2 + 1, n2 + 1))
            child1 = np.concatenate([g1[:2 * a1], g2[2 * a2:2 * b2], g1[2 * b1:]])
            child2 = np.concatenate([g2[:2 * a2], g1[2 * a1:2 * b1], g2[2 * b2:]])
        if all(n_min <= c.size // 2 <= n_max and c.size > 0 for c in (child1, child2)):
            return AnchorChromosome(child1), AnchorChromosome(child2)
    return _clone(p1), _clone(p2)


def mutate(chrom: AnchorChromosome, config: GaConfig, seed: int) -> AnchorChromosome:
    """Per-coordinate Gaussian jitter plus occasional anchor insertion/deletion."""
    rng = stream(seed, TAG_MUTATE)
    genes = chrom.genes.copy()
    size = genes.size
    hit = rng.random(size) < 1.0 / size
    noise = rng.normal(0.0, config.mutation_sigma, size)
    genes[hit] += noise[hit]
    np.clip(genes[0::2], 0.0, config.width, out=genes[0::2])
    np.clip(genes[1::2], 0.0, config.height, out=genes[1::2])

    if rng.random() < config.length_mutation_rate:
        n = size // 2
        insert = bool(rng.random() < 0.5)
        if n >= config.n_max:
            insert = False
        elif n <= config.n_min:
            insert = True
        if insert and n < config.n_max:
            slot = int(rng.integers(0, n + 1))
            new_pt = rng.uniform((0.0, 0.0), (config.width, config.height))
            genes = np.concatenate([genes[:2 * slot], new_pt, genes[2 * slot:]])
        elif not insert and n > config.n_min:
            slot = int(rng.integers(0, n))
            genes = np.concatenate([genes[:2 * slot], genes[2 * slot + 2:]])
    return AnchorChromosome(genes)


def _ranks_and_crowding(objs):
    fronts = nondominated_sort(objs)
    rank = [0] * len(objs)
    crowd = [0.0] * len(objs)
    for level, front in enumerate(fronts):
        cds = crowding_distance([objs[i] for i in front])
        for i, cd in zip(front, cds):
            rank[i] = level
            crowd[i] = cd
    return fronts, rank, crowd


def _front1_signature(objs, fronts):
    return frozenset((objs[i].error_m, objs[i].anchor_count) for i in fronts[0])


def nsga2_run(base: FieldScenario, nbp_params: NbpParams, config: GaConfig,
              model: MeasurementModel | None = None, workers: int = 1) -> ParetoArchive:
    """Generational loop: tournament mating, pooled survivor selection.

    Stops at ``max_generations`` or once the first front's objective set has
    not changed for ``stall_generations`` consecutive generations. The
    returned archive holds the final population with fronts, crowding and
    the per-generation log.
    """
    rng = stream(config.master_seed, TAG_GA)
    cache: dict[bytes, ObjectiveVector] = {}

    def evaluate_all(chroms):
        fresh = [c for c in chroms if c.genes.tobytes() not in cache]
        uniq = {c.genes.tobytes(): c for c in fresh}
        items = list(uniq.items())
        if workers > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                scored = list(pool.map(
                    lambda kv: (kv[0], evaluate_chromosome(
                        kv[1], base, nbp_params, config.master_seed, model)), items))
        else:
            scored = [(key, evaluate_chromosome(c, base, nbp_params,
                                                config.master_seed, model))
                      for key, c in items]
        cache.update(scored)
        return [cache[c.genes.tobytes()] for c in chroms]

    population = [random_chromosome(config, derive(config.master_seed, TAG_CHROM, i))
                  for i in range(config.population)]
    objs = evaluate_all(population)
    fronts, rank, crowd = _ranks_and_crowding(objs)
    history = [GenerationStats(0, len(fronts[0]),
                               min(o.error_m for o in objs),
                               float(np.median([o.error_m for o in objs])))]
    prev_signature = _front1_signature(objs, fronts)
    stall = 0

    def tournament():
        i, j = int(rng.integers(0, config.population)), int(rng.integers(0, config.population))
        if rank[i] != rank[j]:
            return i if rank[i] < rank[j] else j
        if crowd[i] != crowd[j]:
            return i if crowd[i] > crowd[j] else j
        return i

    for gen in range(1, config.max_generations + 1):
        offspring = []
        while len(offspring) < config.population:
            pa, pb = population[tournament()], population[tournament()]
            mode = CROSSOVER_MODES[int(rng.integers(0, 3))]
            if rng.random() < config.crossover_rate:
                c1, c2 = crossover(pa, pb, mode, int(rng.integers(0, 2 ** 62)),
                                   config.n_min, config.n_max)
            else:
                c1, c2 = _clone(pa), _clone(pb)
            c1 = mutate(c1, config, int(rng.integers(0, 2 ** 62)))
            c2 = mutate(c2, config, int(rng.integers(0, 2 ** 62)))
            offspring.extend([c1, c2])
        offspring = offspring[:config.population]
        for child in offspring:
            child.check(config.width, config.height, config.n_min, config.n_max)

        pool_chroms = population + offspring
        pool_objs = objs + evaluate_all(offspring)
        pool_fronts = nondominated_sort(pool_objs)
        selected: list[int] = []
        for front in pool_fronts:
            if len(selected) + len(front) <= config.population:
                selected.extend(front)
                continue
            cds = crowding_distance([pool_objs[i] for i in front])
            by_crowding = sorted(range(len(front)), key=lambda k: (-cds[k], front[k]))
            need = config.population - len(selected)
            selected.extend(front[k] for k in by_crowding[:need])
            break
        population = [pool_chroms[i] for i in selected]
        objs = [pool_objs[i] for i in selected]
        fronts, rank, crowd = _ranks_and_crowding(objs)
        history.append(GenerationStats(gen, len(fronts[0]),
                                       min(o.error_m for o in objs),
                                       float(np.median([o.error_m for o in objs]))))
        signature = _front1_signature(objs, fronts)
        if signature == prev_signature:
            stall += 1
            if stall >= config.stall_generations:
                break
        else:
            stall = 0
            prev_signature = signature

    fronts, _rank, crowd = _ranks_and_crowding(objs)
    return ParetoArchive(list(zip(population, objs)), fronts, crowd, history)


def write_pareto_csv(archive: ParetoArchive, path) -> None:
    # rows are ragged: two fixed columns then one column per gene
    lines = ["anchor_count,error_m,genes"]
    for chrom, obj in sorted(archive.front1(),
                             key=lambda co: (co[1].anchor_count, co[1].error_m)):
        genes = ",".join(f"{g:.6f}" for g in chrom.genes)
        lines.append(f"{obj.anchor_count},{obj.error_m:.6f},{genes}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_generation_log_csv(archive: ParetoArchive, path) -> None:
    lines = ["generation,front1_size,min_error,median_error"]
    for s in archive.history:
        lines.append(f"{s.generation},{s.front1_size},{s.min_error:.6f},{s.median_error:.6f}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
