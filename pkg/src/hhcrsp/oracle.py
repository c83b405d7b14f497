"""Exhaustive references for tiny instances.

``best_decoder_reachable`` searches everything the decoder can produce;
``best_routing`` searches every assignment and visit order under the same
earliest-start timing rules, using its own scheduler.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from hhcrsp.decoder import FULL, DecoderConfig, decode_traced
from hhcrsp.evaluation import (
    CostComponents,
    DecodedSolution,
    Route,
    Visit,
    evaluate,
    serialize_solution,
    validate,
)
from hhcrsp.instance import Instance

MAX_DECODER_PATIENTS = 7
MAX_ROUTING_PATIENTS = 4
MAX_ROUTING_CAREGIVERS = 3


class OracleTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class OracleResult:
    best_cost: CostComponents
    best_solution: DecodedSolution
    space_size: int
    best_keys: tuple[float, ...] | None = None


def _better(sol: DecodedSolution, incumbent: DecodedSolution | None) -> bool:
    if incumbent is None:
        return True
    a, b = sol.cost.objective, incumbent.cost.objective
    if a != b:
        return a < b
    return serialize_solution(sol) < serialize_solution(incumbent)


def synthetic_keys(order, split: int, toggles: tuple[bool, bool], n: int) -> np.ndarray:
    """Chromosome whose sorted order is ``order``; positions ``>= split`` carry keys ``>= 0.5``."""
    keys = np.empty(n + 2)
    for r, pid in enumerate(order):
        base = 0.5 * (r + 0.5) / n
        keys[pid - 1] = base if r < split else 0.5 + base
    keys[n] = 0.75 if toggles[0] else 0.25
    keys[n + 1] = 0.75 if toggles[1] else 0.25
    return keys


def best_decoder_reachable(inst: Instance, mode: DecoderConfig = DecoderConfig()) -> OracleResult:
    """Minimum of the decoder over every chromosome.

    Decoding depends only on the task order, the two toggles and whether each
    task key is ``>= 0.5``. Keys are sorted, so along any order that pattern is
    a run of lows followed by highs: ``n + 1`` split points. Splits that agree
    at every near-tie the decoder actually met give the same solution and are
    counted once in ``space_size``.
    """
    n = inst.num_patients
    if n > MAX_DECODER_PATIENTS:
        raise OracleTooLarge(f"decoder oracle limited to {MAX_DECODER_PATIENTS} patients")
    best = best_keys = None
    space = 0
    full = mode.mode == FULL
    toggle_set = list(itertools.product((False, True), repeat=2)) if full else [(False, False)]
    splits = range(n + 1) if full else [0]
    for order in itertools.permutations(range(1, n + 1)):
        for toggles in toggle_set:
            seen = set()
            for split in splits:
                keys = synthetic_keys(order, split, toggles, n)
                sol, trace = decode_traced(keys, inst, mode)
                sig = tuple((pos, pos >= split) for pos in trace) if full else ()
                if sig in seen:
                    continue
                seen.add(sig)
                if _better(sol, best):
                    best, best_keys = sol, keys
            space += len(seen)
    return OracleResult(best.cost, best, space, tuple(best_keys.tolist()))


def _schedule(inst: Instance, order, assign) -> DecodedSolution | None:
    """Earliest-start forward schedule for patients in ``order``.

    ``assign[pid]`` is ``(v1,)`` or ``(v1, v2)`` (caregiver ids). Returns None
    when a caregiver is asked to serve both services of one patient.
    """
    d = inst.travel
    m = inst.num_caregivers
    where = [0] * (m + 1)
    free = [0.0] * (m + 1)
    routes: list[list[Visit]] = [[] for _ in range(m + 1)]
    for pid in order:
        p = inst.patient(pid)
        vs = assign[pid]
        if len(vs) == 2 and vs[0] == vs[1]:
            return None
        ready = [max(p.tw_start, free[v] + d[where[v]][pid]) for v in vs]
        if len(vs) == 1:
            starts = ready
        elif p.is_simultaneous:
            t = max(ready)
            starts = [t, t]
        else:
            first = ready[0]
            second = max(ready[0] + p.sep_min, ready[1])
            if second - first > p.sep_max:
                first = second - p.sep_max
            starts = [first, second]
        for v, (svc, dur), t in zip(vs, p.demands, starts):
            routes[v].append(Visit(pid, svc, t, max(0.0, t - p.tw_end)))
            where[v] = pid
            free[v] = t + dur
    return DecodedSolution(
        tuple(Route(v, tuple(routes[v])) for v in range(1, m + 1)),
        CostComponents(0.0, 0.0, 0.0, 0.0),
    )


def best_routing(inst: Instance, weights=None) -> OracleResult:
    """Minimum over all caregiver assignments and visit sequences (earliest-start timing)."""
    n, m = inst.num_patients, inst.num_caregivers
    if n > MAX_ROUTING_PATIENTS or m > MAX_ROUTING_CAREGIVERS:
        raise OracleTooLarge(
            f"routing oracle limited to {MAX_ROUTING_PATIENTS} patients and {MAX_ROUTING_CAREGIVERS} caregivers"
        )
    choices = []
    for p in inst.patients:
        per_service = [[c.id for c in inst.caregivers if s in c.skills] for s in p.services]
        choices.append([combo for combo in itertools.product(*per_service) if len(set(combo)) == len(combo)])

    seen = set()
    best = None
    for combo in itertools.product(*choices):
        assign = {pid: vs for pid, vs in enumerate(combo, start=1)}
        for order in itertools.permutations(range(1, n + 1)):
            structure = tuple(
                tuple((pid, k) for pid in order for k, v in enumerate(assign[pid]) if v == vid)
                for vid in range(1, m + 1)
            )
            if structure in seen:
                continue
            seen.add(structure)
            sol = _schedule(inst, order, assign)
            if sol is None:
                continue
            problems = validate(sol, inst)
            if problems:
                raise AssertionError(f"oracle built an infeasible schedule: {problems}")
            cost = evaluate(sol, inst) if weights is None else evaluate(sol, inst, weights)
            sol = DecodedSolution(sol.routes, cost)
            if _better(sol, best):
                best = sol
    if best is None:
        raise ValueError("instance has no feasible routing")
    return OracleResult(best.cost, best, len(seen))


def chain_holds(inst: Instance, keys, mode: DecoderConfig = DecoderConfig(), tol: float = 1e-9) -> bool:
    """best_routing <= best_decoder_reachable <= decode(keys)."""
    from hhcrsp.decoder import decode

    r = best_routing(inst, mode.weights).best_cost.objective
    b = best_decoder_reachable(inst, mode).best_cost.objective
    d = decode(keys, inst, mode).cost.objective
    return r <= b + tol and b <= d + tol and math.isfinite(d)
