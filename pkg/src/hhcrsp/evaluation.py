"""Cost recomputation and feasibility checking for routed solutions.

Both functions look only at the routes and start times; they never trust the
producer's bookkeeping. Totals use ``math.fsum`` so the result does not
depend on summation order.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import TextIO

from hhcrsp.instance import Instance

Weights = tuple[float, float, float]
DEFAULT_WEIGHTS: Weights = (1 / 3, 1 / 3, 1 / 3)

# slack for comparisons of start times built from sums of reals
TIME_EPS = 1e-9


@dataclass(frozen=True)
class Visit:
    patient: int
    service: int
    start: float
    tardiness: float = 0.0


@dataclass(frozen=True)
class Route:
    caregiver: int
    visits: tuple[Visit, ...] = ()


@dataclass(frozen=True)
class CostComponents:
    dist: float
    tard: float
    tmax: float
    objective: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.dist, self.tard, self.tmax, self.objective)


def objective(dist: float, tard: float, tmax: float, weights: Weights = DEFAULT_WEIGHTS) -> float:
    w1, w2, w3 = weights
    return w1 * dist + w2 * tard + w3 * tmax


def make_cost(dist: float, tard: float, tmax: float, weights: Weights = DEFAULT_WEIGHTS) -> CostComponents:
    return CostComponents(dist, tard, tmax, objective(dist, tard, tmax, weights))


@dataclass(frozen=True)
class DecodedSolution:
    routes: tuple[Route, ...]
    cost: CostComponents

    def visits(self):
        for r in self.routes:
            for v in r.visits:
                yield r.caregiver, v


@dataclass(frozen=True)
class Violation:
    kind: str  # coverage | skill | timing | time_window | sync | tardiness | unknown
    ids: tuple
    message: str


def evaluate(sol: DecodedSolution, inst: Instance, weights: Weights = DEFAULT_WEIGHTS) -> CostComponents:
    d = inst.travel
    legs: list[float] = []
    tards: list[float] = []
    for route in sol.routes:
        inst.caregiver(route.caregiver)
        loc = 0
        for v in route.visits:
            p = inst.patient(v.patient)
            legs.append(d[loc][v.patient])
            tards.append(max(0.0, v.start - p.tw_end))
            loc = v.patient
        if route.visits:
            legs.append(d[loc][0])
    dist = math.fsum(legs)
    tard = math.fsum(tards)
    tmax = max(tards, default=0.0)
    return make_cost(dist, tard, tmax, weights)


def validate(sol: DecodedSolution, inst: Instance) -> list[Violation]:
    """Every broken constraint family, with the offending ids. Empty means feasible."""
    out: list[Violation] = []
    d = inst.travel
    starts: dict[tuple[int, int], list[float]] = {}
    seen_caregivers = set()
    for route in sol.routes:
        vid = route.caregiver
        if not 1 <= vid <= inst.num_caregivers:
            out.append(Violation("unknown", (vid,), f"unknown caregiver {vid}"))
            continue
        if vid in seen_caregivers:
            out.append(Violation("coverage", (vid,), f"caregiver {vid} has more than one route"))
        seen_caregivers.add(vid)
        skills = inst.caregiver(vid).skills
        loc, ready = 0, 0.0
        for v in route.visits:
            if not 1 <= v.patient <= inst.num_patients:
                out.append(Violation("unknown", (v.patient,), f"unknown patient {v.patient}"))
                continue
            p = inst.patient(v.patient)
            if v.service not in skills:
                out.append(
                    Violation("skill", (v.patient, v.service, vid), f"caregiver {vid} lacks skill {v.service}")
                )
            if v.start + TIME_EPS < ready + d[loc][v.patient]:
                out.append(
                    Violation(
                        "timing",
                        (v.patient, v.service, vid),
                        f"caregiver {vid} cannot reach patient {v.patient} by {v.start}",
                    )
                )
            if v.start + TIME_EPS < p.tw_start:
                out.append(
                    Violation("time_window", (v.patient, v.service), f"start {v.start} before {p.tw_start}")
                )
            expected = max(0.0, v.start - p.tw_end)
            if abs(v.tardiness - expected) > TIME_EPS:
                out.append(
                    Violation("tardiness", (v.patient, v.service), f"recorded {v.tardiness}, actual {expected}")
                )
            starts.setdefault((v.patient, v.service), []).append(v.start)
            if v.service in p.services:
                ready = v.start + p.duration(v.service)
            else:
                ready = v.start
            loc = v.patient

    for p in inst.patients:
        for s in p.services:
            got = len(starts.get((p.id, s), ()))
            if got != 1:
                out.append(Violation("coverage", (p.id, s), f"service {s} of patient {p.id} served {got} times"))
    for (pid, s), lst in starts.items():
        if 1 <= pid <= inst.num_patients and s not in inst.patient(pid).services:
            out.append(Violation("coverage", (pid, s), f"patient {pid} did not demand service {s}"))

    for p in inst.patients:
        if not p.is_double:
            continue
        s1, s2 = p.services
        a, b = starts.get((p.id, s1)), starts.get((p.id, s2))
        if not a or not b or len(a) != 1 or len(b) != 1:
            continue
        gap = b[0] - a[0]
        if gap < p.sep_min - TIME_EPS or gap > p.sep_max + TIME_EPS:
            out.append(
                Violation(
                    "sync",
                    (p.id, s1, s2),
                    f"patient {p.id}: start gap {gap} outside [{p.sep_min}, {p.sep_max}]",
                )
            )
    return out


# ---------------------------------------------------------------------------
# text form: ROUTE <caregiver> / VISIT <patient> <service> <start> / COST ...


def serialize_solution(sol: DecodedSolution) -> str:
    out = io.StringIO()
    for r in sol.routes:
        out.write(f"ROUTE {r.caregiver}\n")
        for v in r.visits:
            out.write(f"VISIT {v.patient} {v.service} {v.start!r}\n")
    c = sol.cost
    out.write(f"COST {c.dist!r} {c.tard!r} {c.tmax!r} {c.objective!r}\n")
    return out.getvalue()


def parse_solution(text: str | TextIO, inst: Instance | None = None) -> DecodedSolution:
    """Inverse of serialize_solution. Tardiness is recomputed when ``inst`` is given."""
    if not isinstance(text, str):
        text = text.read()
    routes: list[tuple[int, list[Visit]]] = []
    cost = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = raw.split("#", 1)[0].split()
        if not toks:
            continue
        try:
            if toks[0] == "ROUTE" and len(toks) == 2:
                routes.append((int(toks[1]), []))
            elif toks[0] == "VISIT" and len(toks) == 4:
                if not routes:
                    raise ValueError("VISIT before any ROUTE")
                pid, svc, start = int(toks[1]), int(toks[2]), float(toks[3])
                tard = max(0.0, start - inst.patient(pid).tw_end) if inst is not None else 0.0
                routes[-1][1].append(Visit(pid, svc, start, tard))
            elif toks[0] == "COST" and len(toks) == 5:
                dist, tard, tmax, obj = map(float, toks[1:])
                cost = CostComponents(dist, tard, tmax, obj)
            else:
                raise ValueError(f"unrecognised record {toks[0]!r}")
        except (ValueError, KeyError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if cost is None:
        raise ValueError("missing COST footer")
    return DecodedSolution(tuple(Route(v, tuple(vs)) for v, vs in routes), cost)
