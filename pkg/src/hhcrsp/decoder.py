"""Chromosome decoder: greedy cheapest insertion at route ends.

A chromosome holds ``|C| + 2`` random keys. The first ``|C|`` keys order the
patients (ascending key, ties by patient id); in full mode each patient's own
key also decides near-ties (``>= 0.5`` lets an equally cheap later candidate
win), key ``|C|+1`` switches on the convex-hull cost (return leg to the depot
counted during selection) and key ``|C|+2`` switches on workload balancing.
Simple mode ignores all of that and keeps the first strictly cheapest
candidate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from hhcrsp.evaluation import (
    DEFAULT_WEIGHTS,
    CostComponents,
    DecodedSolution,
    Route,
    Visit,
    Weights,
    make_cost,
    objective,
)
from hhcrsp.instance import Instance, Patient

SIMPLE = "simple"
FULL = "full"

_SINGLE, _SIMULTANEOUS, _PRECEDENCE = 0, 1, 2


@dataclass(frozen=True)
class DecoderConfig:
    mode: str = FULL
    tie_tol: float = 1e-6
    weights: Weights = DEFAULT_WEIGHTS

    def __post_init__(self) -> None:
        if self.mode not in (SIMPLE, FULL):
            raise ValueError(f"decoder mode must be {SIMPLE!r} or {FULL!r}, not {self.mode!r}")
        if self.tie_tol < 0:
            raise ValueError("tie_tol must be nonnegative")


@dataclass
class PartialState:
    """Routes under construction. Caregivers are indexed by id - 1."""

    loc: list[int]
    leave: list[float]
    wload: list[float]
    dist: float = 0.0  # legs travelled so far, return legs excluded
    tard: float = 0.0
    tmax: float = 0.0
    visits: list[list[Visit]] = field(default_factory=list)

    @classmethod
    def empty(cls, num_caregivers: int) -> PartialState:
        return cls(
            [0] * num_caregivers,
            [0.0] * num_caregivers,
            [0.0] * num_caregivers,
            visits=[[] for _ in range(num_caregivers)],
        )


class Insertion(NamedTuple):
    dist: float  # merged totals, as the selection sees them
    tard: float
    tmax: float
    objective: float
    start1: float
    start2: float | None


def check_chromosome(keys, inst: Instance) -> np.ndarray:
    arr = np.asarray(keys, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != inst.num_patients + 2:
        raise ValueError(f"chromosome must have {inst.num_patients + 2} keys, got shape {arr.shape}")
    if not np.all((arr >= 0.0) & (arr < 1.0)):
        raise ValueError("chromosome keys must lie in [0, 1)")
    return arr


def sort_tasks(ch, inst: Instance) -> list[int]:
    keys = check_chromosome(ch, inst)
    return [int(i) + 1 for i in np.argsort(keys[: inst.num_patients], kind="stable")]


def _insert(d, loc, leave, e, l, kind, sep_min, sep_max, i, a, b, conv):
    """Cost deltas of appending patient ``i`` to caregiver ``a`` (and ``b``).

    Returns (dist, tard, tmax, start1, start2).
    """
    la = loc[a]
    arr1 = leave[a] + d[la][i]
    if arr1 < e:
        arr1 = e
    dist = d[la][i]
    if kind == _SINGLE:
        tard = arr1 - l if arr1 > l else 0.0
        if conv:
            dist = dist - d[la][0] + d[i][0]
        return dist, tard, tard, arr1, None
    lb = loc[b]
    arr2 = leave[b] + d[lb][i]
    if arr2 < e:
        arr2 = e
    dist = dist + d[lb][i]
    if conv:
        dist = dist - d[la][0] + d[i][0]
        dist = dist - d[lb][0] + d[i][0]
    if kind == _SIMULTANEOUS:
        start = arr1 if arr1 > arr2 else arr2
        late = max(0.0, start - l)
        return dist, 2 * late, late, start, start
    start1 = arr1
    start2 = max(arr1 + sep_min, arr2)
    if start2 - start1 > sep_max:
        start1 = start2 - sep_max  # v1 waits so the gap closes to sep_max
    late1 = max(0.0, start1 - l)
    late2 = max(0.0, start2 - l)
    return dist, late1 + late2, max(late1, late2), start1, start2


def _kind(p: Patient) -> int:
    if not p.is_double:
        return _SINGLE
    return _SIMULTANEOUS if p.is_simultaneous else _PRECEDENCE


def find_insertion_cost(
    state: PartialState,
    v1: int,
    v2: int | None,
    patient: Patient,
    convex_hull: bool,
    inst: Instance,
    weights: Weights = DEFAULT_WEIGHTS,
) -> Insertion:
    """Cost of the solution after appending ``patient`` to the given caregivers' routes."""
    services = patient.services
    if v1 is None or services[0] not in inst.caregiver(v1).skills:
        raise ValueError(f"caregiver {v1} is not qualified for service {services[0]}")
    if patient.is_double:
        if v2 is None or v2 == v1 or services[1] not in inst.caregiver(v2).skills:
            raise ValueError(f"caregiver {v2} is not a valid partner for service {services[1]}")
    elif v2 is not None:
        raise ValueError("single-service patient takes one caregiver")
    dd, dt, dtm, st1, st2 = _insert(
        inst.travel,
        state.loc,
        state.leave,
        patient.tw_start,
        patient.tw_end,
        _kind(patient),
        patient.sep_min,
        patient.sep_max,
        patient.id,
        v1 - 1,
        None if v2 is None else v2 - 1,
        convex_hull,
    )
    dist, tard, tmax = state.dist + dd, state.tard + dt, max(state.tmax, dtm)
    return Insertion(dist, tard, tmax, objective(dist, tard, tmax, weights), st1, st2)


class _Context:
    """Per-instance tables the decode loop reads."""

    def __init__(self, inst: Instance, cfg: DecoderConfig):
        self.inst = inst
        self.cfg = cfg
        self.d = inst.travel
        self.n = inst.num_patients
        self.m = inst.num_caregivers
        self.tasks = [None]
        for p in inst.patients:
            services = p.services
            q1 = [v - 1 for v in inst.qualified(services[0])]
            if p.is_double:
                q2 = [v - 1 for v in inst.qualified(services[1])]
                cands = [(a, b) for a in q1 for b in q2 if a != b]
                durs = (p.demands[0][1], p.demands[1][1])
            else:
                cands = [(a, None) for a in q1]
                durs = (p.demands[0][1], 0.0)
            if not cands:
                raise ValueError(f"no qualified caregivers for patient {p.id}")
            self.tasks.append(
                (p.tw_start, p.tw_end, _kind(p), p.sep_min, p.sep_max, services, durs, cands)
            )


_last_ctx: _Context | None = None


def context(inst: Instance, cfg: DecoderConfig) -> _Context:
    global _last_ctx
    ctx = _last_ctx
    if ctx is None or ctx.inst is not inst or ctx.cfg != cfg:
        ctx = _last_ctx = _Context(inst, cfg)
    return ctx


def _run(ctx: _Context, keys: Sequence[float], order: Sequence[int], build: bool, trace: list | None = None):
    d = ctx.d
    n, m = ctx.n, ctx.m
    cfg = ctx.cfg
    w1, w2, w3 = cfg.weights
    tol = cfg.tie_tol
    full = cfg.mode == FULL
    conv = full and keys[n] >= 0.5
    wbal = full and keys[n + 1] >= 0.5

    loc = [0] * m
    leave = [0.0] * m
    wload = [0.0] * m
    D = T = TM = 0.0
    legs: list[float] = []
    tards: list[float] = []
    routes: list[list[Visit]] | None = [[] for _ in range(m)] if build else None
    inf = math.inf

    for pos, i in enumerate(order):
        e, l, kind, smin, smax, services, durs, cands = ctx.tasks[i]
        tie_ok = full and keys[i - 1] >= 0.5
        cstar = inf
        best = None
        tied = False
        for a, b in cands:
            dd, dt, dtm, st1, st2 = _insert(d, loc, leave, e, l, kind, smin, smax, i, a, b, conv)
            c = w1 * (D + dd) + w2 * (T + dt) + w3 * (TM if TM > dtm else dtm)
            if wbal:
                c += wload[a] if b is None else wload[a] + wload[b]
            if c < cstar - tol:
                cstar, best = c, (a, b, st1, st2)
            elif abs(c - cstar) <= tol:
                tied = True
                if tie_ok:
                    cstar, best = c, (a, b, st1, st2)
        if trace is not None and tied:
            trace.append(pos)

        a, b, st1, st2 = best
        leg = d[loc[a]][i]
        legs.append(leg)
        D += leg
        z1 = max(0.0, st1 - l)
        tards.append(z1)
        T += z1
        if z1 > TM:
            TM = z1
        loc[a] = i
        leave[a] = st1 + durs[0]
        wload[a] += durs[0]
        if build:
            routes[a].append(Visit(i, services[0], st1, z1))
        if b is not None:
            leg = d[loc[b]][i]
            legs.append(leg)
            D += leg
            z2 = max(0.0, st2 - l)
            tards.append(z2)
            T += z2
            if z2 > TM:
                TM = z2
            loc[b] = i
            leave[b] = st2 + durs[1]
            wload[b] += durs[1]
            if build:
                routes[b].append(Visit(i, services[1], st2, z2))

    for v in range(m):
        if loc[v]:
            legs.append(d[loc[v]][0])
    cost = make_cost(math.fsum(legs), math.fsum(tards), max(tards, default=0.0), cfg.weights)
    if not build:
        return cost
    sol = DecodedSolution(tuple(Route(v + 1, tuple(routes[v])) for v in range(m)), cost)
    return sol


def decode(ch, inst: Instance, cfg: DecoderConfig = DecoderConfig()) -> DecodedSolution:
    keys = check_chromosome(ch, inst)
    order = np.argsort(keys[: inst.num_patients], kind="stable") + 1
    return _run(context(inst, cfg), keys.tolist(), order.tolist(), build=True)


def decode_cost(ch, inst: Instance, cfg: DecoderConfig = DecoderConfig()) -> CostComponents:
    """Cost of ``decode(ch)`` without materialising routes."""
    keys = check_chromosome(ch, inst)
    order = np.argsort(keys[: inst.num_patients], kind="stable") + 1
    return _run(context(inst, cfg), keys.tolist(), order.tolist(), build=False)


def decode_traced(ch, inst: Instance, cfg: DecoderConfig = DecoderConfig()) -> tuple[DecodedSolution, list[int]]:
    """Decode and report the task positions where a near-tie between candidates occurred."""
    keys = check_chromosome(ch, inst)
    order = np.argsort(keys[: inst.num_patients], kind="stable") + 1
    trace: list[int] = []
    sol = _run(context(inst, cfg), keys.tolist(), order.tolist(), build=True, trace=trace)
    return sol, trace


def decode_batch(keys: np.ndarray, inst: Instance, cfg: DecoderConfig) -> np.ndarray:
    """Objective values for each row of a chromosome matrix."""
    ctx = context(inst, cfg)
    n = inst.num_patients
    if keys.ndim != 2 or keys.shape[1] != n + 2:
        raise ValueError(f"expected a matrix with {n + 2} columns, got shape {keys.shape}")
    orders = np.argsort(keys[:, :n], axis=1, kind="stable") + 1
    out = np.empty(keys.shape[0])
    for r in range(keys.shape[0]):
        out[r] = _run(ctx, keys[r].tolist(), orders[r].tolist(), build=False).objective
    return out
