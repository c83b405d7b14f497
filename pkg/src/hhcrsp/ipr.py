"""Implicit path-relinking over the permutation induced by random keys."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from hhcrsp.decoder import DecoderConfig, decode_batch
from hhcrsp.instance import Instance

BEST = "best"
RANDOM = "random"

FitnessFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class IprConfig:
    pairs: int = 95
    selection: str = RANDOM
    path_pct: float = 0.33754
    frequency: int = 40
    min_distance: float = 0.0

    def __post_init__(self) -> None:
        if self.pairs < 1:
            raise ValueError("IPR pairs must be >= 1")
        if self.selection not in (BEST, RANDOM):
            raise ValueError(f"IPR selection must be {BEST!r} or {RANDOM!r}")
        if not 0 < self.path_pct <= 1:
            raise ValueError("IPR path_pct must be in (0, 1]")
        if self.frequency < 1:
            raise ValueError("IPR frequency must be >= 1")
        if self.min_distance < 0:
            raise ValueError("IPR min_distance must be nonnegative")


def _check_permutation(p: Sequence[int], n: int) -> None:
    if sorted(p) != list(range(min(p, default=0), min(p, default=0) + n)):
        raise ValueError("not a permutation")


def kendall_tau(a: Sequence[int], b: Sequence[int]) -> int:
    """Number of element pairs ordered differently by ``a`` and ``b``. O(n log n)."""
    a = [int(x) for x in a]
    b = [int(x) for x in b]
    if len(a) != len(b):
        raise ValueError("permutations differ in length")
    _check_permutation(a, len(a))
    if set(a) != set(b):
        raise ValueError("permutations are over different index sets")
    pos = {x: k for k, x in enumerate(b)}
    seq = [pos[x] for x in a]
    return _count_inversions(seq)


def _count_inversions(seq: list[int]) -> int:
    n = len(seq)
    buf = seq[:]
    tmp = [0] * n
    inv = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if buf[i] <= buf[j]:
                    tmp[k] = buf[i]
                    i += 1
                else:
                    tmp[k] = buf[j]
                    inv += mid - i
                    j += 1
                k += 1
            tmp[k : k + mid - i] = buf[i:mid]
            k += mid - i
            tmp[k : k + hi - j] = buf[j:hi]
        buf, tmp = tmp, buf
        width *= 2
    return inv


class RelinkOutcome(NamedTuple):
    distance: int
    steps: int  # intermediates decoded
    best: tuple[np.ndarray, float] | None


class _Walker:
    """One working chromosome moving its sorted order towards a target order."""

    def __init__(self, keys: np.ndarray, n: int, target: np.ndarray):
        self.keys = keys
        self.order = list(np.argsort(keys[:n], kind="stable"))
        self.rank = [0] * n
        for r, idx in enumerate(self.order):
            self.rank[idx] = r
        self.target = [int(x) for x in target]
        self.j = 0
        self.n = n

    def step(self) -> bool:
        while self.j < self.n and self.order[self.j] == self.target[self.j]:
            self.j += 1
        if self.j >= self.n:
            return False
        j = self.j
        want, cur = self.target[j], self.order[j]
        self.keys[want], self.keys[cur] = self.keys[cur], self.keys[want]
        rw = self.rank[want]
        self.order[j], self.order[rw] = want, cur
        self.rank[want], self.rank[cur] = j, rw
        self.j += 1
        return True


def relink_detailed(
    base: np.ndarray,
    guide: np.ndarray,
    inst: Instance,
    decoder_cfg: DecoderConfig,
    cfg: IprConfig,
    fitness: FitnessFn | None = None,
    base_fitness: float | None = None,
    guide_fitness: float | None = None,
) -> RelinkOutcome:
    n = inst.num_patients
    if fitness is None:
        fitness = lambda keys: decode_batch(keys, inst, decoder_cfg)  # noqa: E731
    base = np.asarray(base, dtype=float)
    guide = np.asarray(guide, dtype=float)
    perm_b = np.argsort(base[:n], kind="stable")
    perm_g = np.argsort(guide[:n], kind="stable")
    distance = kendall_tau(perm_b, perm_g)
    if distance <= cfg.min_distance:
        return RelinkOutcome(distance, 0, None)

    max_steps = math.ceil(cfg.path_pct * n)
    from_base = base.copy()
    from_guide = guide.copy()
    from_guide[n:] = base[n:]
    # alternate: base side moves towards the guide, guide side towards the base
    walkers = [_Walker(from_base, n, perm_g), _Walker(from_guide, n, perm_b)]
    stuck = [False, False]
    side = 0
    path = []
    while len(path) < max_steps and not all(stuck):
        w = walkers[side]
        if not stuck[side]:
            if w.step():
                path.append(w.keys.copy())
            else:
                stuck[side] = True
        side ^= 1
    if not path:
        return RelinkOutcome(distance, 0, None)

    fits = fitness(np.vstack(path))
    if base_fitness is None or guide_fitness is None:
        ends = fitness(np.vstack([base, guide]))
        base_fitness = ends[0] if base_fitness is None else base_fitness
        guide_fitness = ends[1] if guide_fitness is None else guide_fitness
    k = int(np.argmin(fits))
    if fits[k] < min(base_fitness, guide_fitness):
        return RelinkOutcome(distance, len(path), (path[k], float(fits[k])))
    return RelinkOutcome(distance, len(path), None)


def relink(base, guide, inst, decoder_cfg, cfg, fitness=None, base_fitness=None, guide_fitness=None):
    """Best intermediate strictly better than both ends, or None."""
    return relink_detailed(base, guide, inst, decoder_cfg, cfg, fitness, base_fitness, guide_fitness).best


def _pairs_for(cfg: IprConfig, num_elite: int, same_island: bool, rng: np.random.Generator):
    if same_island and num_elite < 2:
        return []
    if cfg.selection == BEST:
        if same_island:
            return [(r, r + 1) for r in range(min(cfg.pairs, num_elite - 1))]
        return [(r, r) for r in range(min(cfg.pairs, num_elite))]
    out = []
    for _ in range(cfg.pairs):
        b = int(rng.integers(num_elite))
        if same_island:
            g = int(rng.integers(num_elite - 1))
            g += g >= b
        else:
            g = int(rng.integers(num_elite))
        out.append((b, g))
    return out


def apply(
    islands: list,
    cfg: IprConfig,
    inst: Instance,
    decoder_cfg: DecoderConfig,
    rng: np.random.Generator,
    num_elite: int,
    fitness: FitnessFn | None = None,
    max_injections: int | None = None,
    generation: int | None = None,
) -> list[dict]:
    """Relink elite pairs ring-wise between islands; improvements replace the guide island's worst.

    ``islands`` are sorted populations exposing ``keys``, ``fitness`` and
    ``replace_worst``. Returns one event dict per attempted pair.
    """
    k = len(islands)
    ring = [(0, 0)] if k == 1 else [(i, (i + 1) % k) for i in range(k)]
    injected = 0
    events = []
    for src, dst in ring:
        eb_keys = islands[src].keys[:num_elite].copy()
        eb_fit = islands[src].fitness[:num_elite].copy()
        eg_keys = islands[dst].keys[:num_elite].copy()
        eg_fit = islands[dst].fitness[:num_elite].copy()
        for b, g in _pairs_for(cfg, num_elite, src == dst, rng):
            out = relink_detailed(
                eb_keys[b], eg_keys[g], inst, decoder_cfg, cfg, fitness, float(eb_fit[b]), float(eg_fit[g])
            )
            event = {
                "generation": generation,
                "base_island": src,
                "guide_island": dst,
                "base": b,
                "guide": g,
                "distance": out.distance,
                "steps": out.steps,
                "improved": out.best is not None,
                "fitness": None if out.best is None else out.best[1],
                "injected": False,
            }
            if out.best is not None and (max_injections is None or injected < max_injections):
                islands[dst].replace_worst(out.best[0][None, :], np.array([out.best[1]]))
                injected += 1
                event["injected"] = True
            events.append(event)
    return events
