"""Multi-parent, multi-population BRKGA with optional implicit path-relinking.

All random draws happen on the calling thread in a fixed order; only
decoding may be farmed out to worker processes, so a run is reproducible
bit for bit whatever the worker count.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from hhcrsp import ipr as ipr_mod
from hhcrsp.decoder import FULL, DecoderConfig, decode, decode_batch
from hhcrsp.evaluation import DecodedSolution, serialize_solution, validate
from hhcrsp.instance import Instance

BIASES = ("constant", "linear", "loginverse", "exponential", "quadratic", "cubic")


def bias_weight(fn: str, rank: int) -> float:
    if rank < 1:
        raise ValueError("rank must be >= 1")
    if fn == "constant":
        return 1.0
    if fn == "linear":
        return 1.0 / rank
    if fn == "quadratic":
        return rank**-2.0
    if fn == "cubic":
        return rank**-3.0
    if fn == "loginverse":
        return 1.0 / math.log2(rank + 1)
    if fn == "exponential":
        return math.exp(-rank)
    raise ValueError(f"unknown bias function {fn!r}")


@dataclass(frozen=True)
class BrkgaConfig:
    population_size: int = 1462
    elite_pct: float = 0.30678
    mutant_pct: float = 0.07575
    total_parents: int = 5
    elite_parents: int = 4
    bias: str = "constant"
    num_islands: int = 2
    immigrants: int = 73
    exchange_interval: int = 167
    classic_rho_e: float | None = None
    seed: int = 0
    stall_limit: int | None = None  # None: ceil(|C| / 2)
    max_generations: int | None = None
    max_seconds: float | None = None

    @property
    def num_elite(self) -> int:
        return max(1, math.floor(self.elite_pct * self.population_size))

    @property
    def num_mutants(self) -> int:
        return math.floor(self.mutant_pct * self.population_size)

    def check(self) -> None:
        p, pe, pm = self.population_size, self.num_elite, self.num_mutants
        problems = []
        if not 1 <= pe < p:
            problems.append(f"need 1 <= elite count ({pe}) < population ({p})")
        if pe + pm > p:
            problems.append("elite + mutants exceed the population")
        if not 1 <= self.elite_parents < self.total_parents <= p:
            problems.append("need 1 <= elite_parents < total_parents <= population")
        if self.elite_parents > pe:
            problems.append("more elite parents than elite individuals")
        if self.total_parents - self.elite_parents > p - pe:
            problems.append("more non-elite parents than non-elite individuals")
        if self.bias not in BIASES:
            problems.append(f"unknown bias {self.bias!r}")
        if self.num_islands < 1:
            problems.append("need at least one island")
        if self.immigrants < 0 or self.immigrants * self.num_islands > p:
            problems.append("need 0 <= immigrants and immigrants * islands <= population")
        if self.exchange_interval < 1:
            problems.append("exchange_interval must be >= 1")
        if self.classic_rho_e is not None:
            if not 0.5 <= self.classic_rho_e < 1:
                problems.append("classic rho_e must be in [0.5, 1)")
            if (self.total_parents, self.elite_parents) != (2, 1):
                problems.append("classic rho_e needs total_parents=2, elite_parents=1")
        if not 0 <= self.seed < 2**64:
            problems.append("seed must be a 64-bit unsigned integer")
        if self.stall_limit is not None and self.stall_limit < 1:
            problems.append("stall_limit must be >= 1")
        if problems:
            raise ValueError("; ".join(problems))

    def stall_for(self, inst: Instance) -> int:
        return self.stall_limit if self.stall_limit is not None else math.ceil(inst.num_patients / 2)


class Population:
    """Chromosome matrix plus fitness vector, kept sorted best first."""

    def __init__(self, keys: np.ndarray, fitness: np.ndarray):
        self.keys = keys
        self.fitness = fitness
        self.sort()

    def __len__(self) -> int:
        return self.keys.shape[0]

    def sort(self) -> None:
        order = np.argsort(self.fitness, kind="stable")
        self.keys = self.keys[order]
        self.fitness = self.fitness[order]

    @property
    def best(self) -> float:
        return float(self.fitness[0])

    def replace_worst(self, keys: np.ndarray, fitness: np.ndarray) -> None:
        m = keys.shape[0]
        if m == 0:
            return
        self.keys[-m:] = keys
        self.fitness[-m:] = fitness
        self.sort()


# ---------------------------------------------------------------------------
# fitness evaluation


_worker_state: tuple | None = None


def _worker_init(inst: Instance, cfg: DecoderConfig) -> None:
    global _worker_state
    _worker_state = (inst, cfg)


def _worker_decode(keys: np.ndarray) -> np.ndarray:
    inst, cfg = _worker_state
    return decode_batch(keys, inst, cfg)


class FitnessEvaluator:
    """Decodes chromosome matrices, memoising on the decode-relevant view of each row.

    Two chromosomes with the same task order (and, in full mode, the same
    ``>= 0.5`` pattern over task keys and toggles) decode identically, so a
    cache hit is exact.
    """

    def __init__(self, inst: Instance, cfg: DecoderConfig, workers: int = 1, cache_size: int = 500_000):
        self.inst = inst
        self.cfg = cfg
        self.workers = workers
        self.cache_size = cache_size
        self.cache: dict[bytes, float] = {}
        self.decodes = 0
        self._pool = None
        if workers > 1:
            self._pool = ProcessPoolExecutor(workers, initializer=_worker_init, initargs=(inst, cfg))

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _signatures(self, keys: np.ndarray) -> list[bytes]:
        n = self.inst.num_patients
        orders = np.argsort(keys[:, :n], axis=1, kind="stable").astype(np.int32)
        if self.cfg.mode == FULL:
            bits = np.packbits(keys >= 0.5, axis=1)
            return [o.tobytes() + b.tobytes() for o, b in zip(orders, bits)]
        return [o.tobytes() for o in orders]

    def __call__(self, keys: np.ndarray) -> np.ndarray:
        keys = np.atleast_2d(keys)
        sigs = self._signatures(keys)
        out = np.empty(keys.shape[0])
        todo: dict[bytes, int] = {}
        for r, s in enumerate(sigs):
            hit = self.cache.get(s)
            if hit is not None:
                out[r] = hit
            elif s not in todo:
                todo[s] = r
        if todo:
            rows = list(todo.values())
            fresh = self._decode(keys[rows])
            self.decodes += len(rows)
            if len(self.cache) + len(rows) > self.cache_size:
                self.cache.clear()
            for s, f in zip(todo, fresh):
                self.cache[s] = float(f)
            for r, s in enumerate(sigs):
                if s in todo:
                    out[r] = self.cache[s]
        return out

    def _decode(self, keys: np.ndarray) -> np.ndarray:
        if self._pool is None or keys.shape[0] < 2 * self.workers:
            return decode_batch(keys, self.inst, self.cfg)
        chunks = np.array_split(keys, self.workers)
        return np.concatenate(list(self._pool.map(_worker_decode, chunks)))


# ---------------------------------------------------------------------------
# genetic operators


def mate(
    parents: list[tuple[np.ndarray, float]],
    cfg: BrkgaConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """One offspring from ``total_parents`` parents, elite parents listed first."""
    keys = np.vstack([np.asarray(k, dtype=float) for k, _ in parents])
    fit = np.array([f for _, f in parents])
    probs = _parent_probs(cfg)
    if cfg.classic_rho_e is None:
        keys = keys[np.argsort(fit, kind="stable")]
    choice = _pick(probs, rng.random(keys.shape[1]))
    return keys[choice, np.arange(keys.shape[1])]


def _parent_probs(cfg: BrkgaConfig) -> np.ndarray:
    if cfg.classic_rho_e is not None:
        return np.array([cfg.classic_rho_e, 1.0 - cfg.classic_rho_e])
    w = np.array([bias_weight(cfg.bias, r) for r in range(1, cfg.total_parents + 1)])
    return w / w.sum()


def _pick(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(probs)
    return np.minimum(np.searchsorted(cum, u, side="right"), len(probs) - 1)


def _sample_distinct(rng: np.random.Generator, rows: int, pool: int, k: int) -> np.ndarray:
    # k distinct indices per row, uniform without replacement
    if k == 0:
        return np.empty((rows, 0), dtype=np.intp)
    return np.argpartition(rng.random((rows, pool)), k - 1, axis=1)[:, :k]


def evolve_generation(
    pop: Population,
    fitness: Callable[[np.ndarray], np.ndarray],
    cfg: BrkgaConfig,
    rng: np.random.Generator,
) -> Population:
    p, pe, pm = len(pop), cfg.num_elite, cfg.num_mutants
    length = pop.keys.shape[1]
    n_off = p - pe - pm
    mutants = rng.random((pm, length))

    elite_idx = _sample_distinct(rng, n_off, pe, cfg.elite_parents)
    other_idx = pe + _sample_distinct(rng, n_off, p - pe, cfg.total_parents - cfg.elite_parents)
    parents = np.hstack([elite_idx, other_idx])
    if cfg.classic_rho_e is None:
        order = np.argsort(pop.fitness[parents], axis=1, kind="stable")
        parents = np.take_along_axis(parents, order, axis=1)
    choice = _pick(_parent_probs(cfg), rng.random((n_off, length)))
    src = np.take_along_axis(parents, choice, axis=1)
    offspring = pop.keys[src, np.arange(length)]

    fresh = np.vstack([mutants, offspring])
    fresh_fit = fitness(fresh)
    return Population(
        np.vstack([pop.keys[:pe], fresh]),
        np.concatenate([pop.fitness[:pe], fresh_fit]),
    )


# ---------------------------------------------------------------------------
# driver


@dataclass
class RunReport:
    instance: str
    seed: int
    config: dict
    generations: list[dict] = field(default_factory=list)
    immigrations: list[dict] = field(default_factory=list)
    ipr_events: list[dict] = field(default_factory=list)
    best_fitness: float = math.inf
    best_keys: list[float] = field(default_factory=list)
    best_solution: DecodedSolution | None = None
    num_generations: int = 0
    since_improvement: int = 0
    stop_reason: str = ""
    seconds: float = 0.0
    decodes: int = 0

    @property
    def best_series(self) -> list[float]:
        return [g["best"] for g in self.generations]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["best_solution"] = serialize_solution(self.best_solution) if self.best_solution else None
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def average_fitness(self) -> float:
        """Mean of the per-generation population means over the run."""
        return float(np.mean([g["mean"] for g in self.generations]))

    def csv_row(self) -> dict:
        return {
            "instance": self.instance,
            "seed": self.seed,
            "best": repr(self.best_fitness),
            "avg": repr(self.average_fitness()),
            "generations": self.num_generations,
            "seconds": f"{self.seconds:.3f}",
        }


def _snapshot(gen: int, islands: list[Population], best: float) -> dict:
    fit = np.concatenate([isl.fitness for isl in islands])
    keys = np.vstack([isl.keys for isl in islands])
    return {
        "generation": gen,
        "best": best,
        "island_best": [isl.best for isl in islands],
        "mean": float(fit.mean()),
        "std": float(fit.std()),
        "diversity": float(keys.std(axis=0).mean()),
    }


def immigrate(islands: list[Population], m: int, generation: int | None = None) -> list[dict]:
    """Copy each island's ``m`` best over the next island's ``m`` worst, ring-wise."""
    k = len(islands)
    if k < 2 or m == 0:
        return []
    outgoing = [(isl.keys[:m].copy(), isl.fitness[:m].copy()) for isl in islands]
    events = []
    for i in range(k):
        dst = islands[(i + 1) % k]
        before = dst.best
        dst.replace_worst(*outgoing[i])
        events.append(
            {"generation": generation, "from": i, "to": (i + 1) % k, "count": m, "best_before": before, "best_after": dst.best}
        )
    return events


def run(
    inst: Instance,
    cfg: BrkgaConfig,
    decoder_cfg: DecoderConfig = DecoderConfig(),
    ipr_cfg: ipr_mod.IprConfig | None = None,
    workers: int = 1,
    log: Callable[[str], None] | None = None,
) -> RunReport:
    cfg.check()
    stall_limit = cfg.stall_for(inst)
    started = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    length = inst.num_patients + 2
    report = RunReport(
        instance=inst.name,
        seed=cfg.seed,
        config={
            "brkga": asdict(replace(cfg, stall_limit=stall_limit)),
            "ipr": asdict(ipr_cfg) if ipr_cfg else None,
            "decoder": asdict(decoder_cfg),
        },
    )

    with FitnessEvaluator(inst, decoder_cfg, workers) as fitness:
        islands = []
        for _ in range(cfg.num_islands):
            keys = rng.random((cfg.population_size, length))
            islands.append(Population(keys, fitness(keys)))

        best_island = min(range(len(islands)), key=lambda i: islands[i].best)
        best = islands[best_island].best
        best_keys = islands[best_island].keys[0].copy()
        report.generations.append(_snapshot(0, islands, best))

        gen = stall = 0
        while True:
            if stall >= stall_limit:
                report.stop_reason = "stall"
                break
            if cfg.max_generations is not None and gen >= cfg.max_generations:
                report.stop_reason = "max_generations"
                break
            if cfg.max_seconds is not None and time.perf_counter() - started >= cfg.max_seconds:
                report.stop_reason = "max_seconds"
                break
            gen += 1
            islands = [evolve_generation(isl, fitness, cfg, rng) for isl in islands]
            if cfg.num_islands > 1 and gen % cfg.exchange_interval == 0:
                report.immigrations += immigrate(islands, cfg.immigrants, gen)
            if ipr_cfg is not None and gen % ipr_cfg.frequency == 0:
                report.ipr_events += ipr_mod.apply(
                    islands,
                    ipr_cfg,
                    inst,
                    decoder_cfg,
                    rng,
                    cfg.num_elite,
                    fitness,
                    max_injections=cfg.num_mutants,
                    generation=gen,
                )
            cur_island = min(range(len(islands)), key=lambda i: islands[i].best)
            if islands[cur_island].best < best:
                best = islands[cur_island].best
                best_keys = islands[cur_island].keys[0].copy()
                stall = 0
            else:
                stall += 1
            report.generations.append(_snapshot(gen, islands, best))
            if log:
                log(f"gen {gen} best {best:.4f} stall {stall}")
        report.decodes = fitness.decodes

    sol = decode(best_keys, inst, decoder_cfg)
    if sol.cost.objective != best:
        raise AssertionError("re-decoded best differs from its recorded fitness")
    problems = validate(sol, inst)
    if problems:
        raise AssertionError(f"best solution is infeasible: {problems[:3]}")
    report.best_fitness = best
    report.best_keys = best_keys.tolist()
    report.best_solution = sol
    report.num_generations = gen
    report.since_improvement = stall
    report.seconds = time.perf_counter() - started
    return report
