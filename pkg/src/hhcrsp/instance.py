"""Problem data model, the native text format, and the benchmark-style generator.

Node 0 is the depot; patient ``i`` is node ``i``. Times are minutes, travel
times are Euclidean distances on the grid and are never rounded.

Native format (``#`` starts a comment)::

    HHCRSP <name>
    SIZES <patients> <caregivers> <services> <horizon>
    PATIENT <id> <x> <y> <e> <l> <sepmin> <sepmax> <k> (<svc> <dur>)*k
    CAREGIVER <id> <k> <svc>*k
    TRAVEL
    <patients+1 rows of travel times>
"""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field, fields
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

TravelMatrix = tuple[tuple[float, ...], ...]

NUM_BENCHMARK_SERVICES = 6

# subset -> (|C|, |C^s|, |C^d|, |V|)
SUBSETS: dict[str, tuple[int, int, int, int]] = {
    "A": (10, 7, 3, 3),
    "B": (25, 17, 8, 5),
    "C": (50, 35, 15, 10),
    "D": (75, 52, 23, 15),
    "E": (100, 70, 30, 20),
    "F": (200, 140, 60, 30),
    "G": (300, 200, 100, 40),
}


class InstanceError(ValueError):
    """Malformed or inconsistent instance data."""


@dataclass(frozen=True)
class Patient:
    id: int
    x: float
    y: float
    tw_start: float
    tw_end: float
    demands: tuple[tuple[int, float], ...]  # (service, duration), services ascending
    sep_min: float = 0.0
    sep_max: float = 0.0

    @property
    def services(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.demands)

    @property
    def is_double(self) -> bool:
        return len(self.demands) == 2

    @property
    def is_simultaneous(self) -> bool:
        return self.is_double and self.sep_min == 0 and self.sep_max == 0

    def duration(self, service: int) -> float:
        for s, dur in self.demands:
            if s == service:
                return dur
        raise KeyError(f"patient {self.id} does not demand service {service}")


@dataclass(frozen=True)
class Caregiver:
    id: int
    skills: frozenset[int]


@dataclass(frozen=True)
class Instance:
    name: str
    patients: tuple[Patient, ...]
    caregivers: tuple[Caregiver, ...]
    num_services: int
    travel: TravelMatrix
    horizon: float
    big_m: float = field(default=0.0, compare=False)

    def __post_init__(self) -> None:
        check_instance(self)
        if not self.big_m:
            max_dur = max((d for p in self.patients for _, d in p.demands), default=0.0)
            max_travel = max((max(row) for row in self.travel), default=0.0)
            object.__setattr__(self, "big_m", self.horizon + max_dur + max_travel)

    @property
    def num_patients(self) -> int:
        return len(self.patients)

    @property
    def num_caregivers(self) -> int:
        return len(self.caregivers)

    def patient(self, pid: int) -> Patient:
        if not 1 <= pid <= len(self.patients):
            raise KeyError(f"unknown patient {pid}")
        return self.patients[pid - 1]

    def caregiver(self, vid: int) -> Caregiver:
        if not 1 <= vid <= len(self.caregivers):
            raise KeyError(f"unknown caregiver {vid}")
        return self.caregivers[vid - 1]

    def qualified(self, service: int) -> tuple[int, ...]:
        """Ids of caregivers able to perform ``service``, ascending."""
        return tuple(c.id for c in self.caregivers if service in c.skills)


def check_instance(inst: Instance) -> None:
    """Raise InstanceError on the first broken invariant."""
    n = len(inst.patients)
    if inst.num_services < 1:
        raise InstanceError("number of services must be positive")
    for k, p in enumerate(inst.patients, start=1):
        where = f"patient {p.id}"
        if p.id != k:
            raise InstanceError(f"{where}: ids must be contiguous from 1 (expected {k})")
        if not 1 <= len(p.demands) <= 2:
            raise InstanceError(f"{where}: must demand one or two services")
        svcs = p.services
        if len(set(svcs)) != len(svcs):
            raise InstanceError(f"{where}: demanded services must be distinct")
        if list(svcs) != sorted(svcs):
            raise InstanceError(f"{where}: demands must be ordered by service id")
        for s, dur in p.demands:
            if not 1 <= s <= inst.num_services:
                raise InstanceError(f"{where}: service {s} out of range")
            if not dur > 0:
                raise InstanceError(f"{where}: duration of service {s} must be positive")
        if not p.tw_start < p.tw_end:
            raise InstanceError(f"{where}: time window start must precede its end")
        if p.tw_start < 0:
            raise InstanceError(f"{where}: negative time window start")
        if p.is_double:
            if not 0 <= p.sep_min <= p.sep_max:
                raise InstanceError(f"{where}: need 0 <= sep_min <= sep_max")
        elif p.sep_min or p.sep_max:
            raise InstanceError(f"{where}: single-service patient with separation times")
    for k, c in enumerate(inst.caregivers, start=1):
        if c.id != k:
            raise InstanceError(f"caregiver {c.id}: ids must be contiguous from 1 (expected {k})")
        if not c.skills:
            raise InstanceError(f"caregiver {c.id}: empty skill set")
        if any(not 1 <= s <= inst.num_services for s in c.skills):
            raise InstanceError(f"caregiver {c.id}: skill out of range")
    if len(inst.travel) != n + 1 or any(len(row) != n + 1 for row in inst.travel):
        raise InstanceError(f"travel matrix must be {n + 1}x{n + 1}")
    for i, row in enumerate(inst.travel):
        if row[i] != 0:
            raise InstanceError(f"travel[{i}][{i}] must be 0")
        for j, d in enumerate(row):
            if not (math.isfinite(d) and d >= 0):
                raise InstanceError(f"travel[{i}][{j}] must be finite and nonnegative")
            if d != inst.travel[j][i]:
                raise InstanceError(f"travel matrix not symmetric at ({i}, {j})")
    for p in inst.patients:
        for s in p.services:
            if not any(s in c.skills for c in inst.caregivers):
                raise InstanceError(f"patient {p.id}: no caregiver qualified for service {s}")
        if p.is_double:
            s1, s2 = p.services
            if not any(
                s1 in a.skills and s2 in b.skills and a.id != b.id
                for a in inst.caregivers
                for b in inst.caregivers
            ):
                raise InstanceError(
                    f"patient {p.id}: no pair of distinct caregivers covers services {s1} and {s2}"
                )


def euclidean_travel(points: Sequence[tuple[float, float]]) -> TravelMatrix:
    """Symmetric straight-line travel times; index 0 is the depot."""
    if not points:
        raise ValueError("need at least the depot")
    n = len(points)
    d = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            d[i][j] = d[j][i] = math.dist(points[i], points[j])
    return tuple(tuple(row) for row in d)


# ---------------------------------------------------------------------------
# native text format


def _num(x: float) -> str:
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def serialize_instance(inst: Instance) -> str:
    """Canonical native-format text; parse_instance inverts it exactly."""
    out = io.StringIO()
    out.write(f"HHCRSP {inst.name}\n")
    out.write(
        f"SIZES {inst.num_patients} {inst.num_caregivers} {inst.num_services} {_num(inst.horizon)}\n"
    )
    for p in inst.patients:
        demands = " ".join(f"{s} {_num(d)}" for s, d in p.demands)
        out.write(
            f"PATIENT {p.id} {_num(p.x)} {_num(p.y)} {_num(p.tw_start)} {_num(p.tw_end)} "
            f"{_num(p.sep_min)} {_num(p.sep_max)} {len(p.demands)} {demands}\n"
        )
    for c in inst.caregivers:
        skills = " ".join(str(s) for s in sorted(c.skills))
        out.write(f"CAREGIVER {c.id} {len(c.skills)} {skills}\n")
    out.write("TRAVEL\n")
    for row in inst.travel:
        out.write(" ".join(_num(d) for d in row) + "\n")
    return out.getvalue()


def write_instance(inst: Instance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_instance(inst))


def read_instance(path, format: str = "native") -> Instance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh, format=format)


def parse_instance(text: str | TextIO, format: str = "native") -> Instance:
    if not isinstance(text, str):
        text = text.read()
    if format == "native":
        return _parse_native(text)
    if format == "legacy":
        return _parse_legacy(text)
    raise ValueError(f"unknown instance format {format!r}")


def _parse_native(text: str) -> Instance:
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append((lineno, line.split()))
    if not lines:
        raise InstanceError("empty instance")

    def err(lineno: int, msg: str) -> InstanceError:
        return InstanceError(f"line {lineno}: {msg}")

    def number(lineno: int, tok: str, what: str) -> float:
        try:
            return float(tok)
        except ValueError:
            raise err(lineno, f"bad {what} {tok!r}") from None

    def integer(lineno: int, tok: str, what: str) -> int:
        try:
            return int(tok)
        except ValueError:
            raise err(lineno, f"bad {what} {tok!r}") from None

    lineno, toks = lines[0]
    if toks[0] != "HHCRSP" or len(toks) != 2:
        raise err(lineno, "expected header 'HHCRSP <name>'")
    name = toks[1]
    if len(lines) < 2 or lines[1][1][0] != "SIZES" or len(lines[1][1]) != 5:
        raise err(lines[min(1, len(lines) - 1)][0], "expected 'SIZES <C> <V> <S> <horizon>'")
    lineno, toks = lines[1]
    n = integer(lineno, toks[1], "patient count")
    m = integer(lineno, toks[2], "caregiver count")
    num_services = integer(lineno, toks[3], "service count")
    horizon = number(lineno, toks[4], "horizon")
    if n < 1 or m < 1 or num_services < 1:
        raise err(lineno, "sizes must be positive")

    patients: dict[int, Patient] = {}
    caregivers: dict[int, Caregiver] = {}
    rows: list[tuple[float, ...]] | None = None
    k = 2
    while k < len(lines):
        lineno, toks = lines[k]
        tag = toks[0]
        if tag == "PATIENT":
            if len(toks) < 9:
                raise err(lineno, "PATIENT line too short")
            pid = integer(lineno, toks[1], "patient id")
            vals = [number(lineno, t, "patient field") for t in toks[2:8]]
            nd = integer(lineno, toks[8], "demand count")
            if len(toks) != 9 + 2 * nd:
                raise err(lineno, f"PATIENT {pid}: expected {nd} (service, duration) pairs")
            demands = tuple(
                sorted(
                    (integer(lineno, toks[9 + 2 * q], "service"), number(lineno, toks[10 + 2 * q], "duration"))
                    for q in range(nd)
                )
            )
            sep_min, sep_max = (vals[4], vals[5]) if nd == 2 else (0.0, 0.0)
            if pid in patients:
                raise err(lineno, f"duplicate patient {pid}")
            patients[pid] = Patient(pid, vals[0], vals[1], vals[2], vals[3], demands, sep_min, sep_max)
        elif tag == "CAREGIVER":
            if len(toks) < 3:
                raise err(lineno, "CAREGIVER line too short")
            vid = integer(lineno, toks[1], "caregiver id")
            ns = integer(lineno, toks[2], "skill count")
            if len(toks) != 3 + ns:
                raise err(lineno, f"CAREGIVER {vid}: expected {ns} skills")
            if vid in caregivers:
                raise err(lineno, f"duplicate caregiver {vid}")
            caregivers[vid] = Caregiver(vid, frozenset(integer(lineno, t, "skill") for t in toks[3:]))
        elif tag == "TRAVEL":
            body = lines[k + 1 :]
            if len(body) != n + 1:
                raise err(lineno, f"dimension mismatch: expected {n + 1} travel rows, found {len(body)}")
            rows = []
            for rl, rtoks in body:
                if len(rtoks) != n + 1:
                    raise err(rl, f"dimension mismatch: expected {n + 1} travel entries, found {len(rtoks)}")
                rows.append(tuple(number(rl, t, "travel time") for t in rtoks))
            break
        else:
            raise err(lineno, f"unknown record {tag!r}")
        k += 1

    if rows is None:
        raise InstanceError("missing TRAVEL section")
    if sorted(patients) != list(range(1, n + 1)):
        raise InstanceError(f"dimension mismatch: SIZES declares {n} patients, found ids {sorted(patients)}")
    if sorted(caregivers) != list(range(1, m + 1)):
        raise InstanceError(f"dimension mismatch: SIZES declares {m} caregivers, found ids {sorted(caregivers)}")
    return Instance(
        name=name,
        patients=tuple(patients[i] for i in range(1, n + 1)),
        caregivers=tuple(caregivers[i] for i in range(1, m + 1)),
        num_services=num_services,
        travel=tuple(rows),
        horizon=horizon,
    )


_LEGACY_KEYS = ("nbNodes", "nbVehi", "nbServi", "r", "DS", "a", "x", "y", "d", "p", "mind", "maxd", "e", "l")


def _parse_legacy(text: str) -> Instance:
    """Best-effort reader for the keyword/section layout of the published dataset.

    Sections are introduced by a keyword token followed by whitespace-separated
    numbers: ``nbNodes`` (patients + depot), ``nbVehi``, ``nbServi``, ``r``
    (node x service demand flags), ``DS`` (optional), ``a`` (vehicle x service
    skills), ``x``, ``y``, ``d`` (node x node), ``p`` (node x service, or node x
    vehicle x service with vehicle-independent values), ``mind``, ``maxd``,
    ``e``, ``l``. Row 0 of every node-indexed table is the depot.
    """
    sections: dict[str, list[float]] = {}
    current = None
    for tok in re.split(r"[\s,;\[\]=]+", text):
        if not tok:
            continue
        if tok in _LEGACY_KEYS:
            current = tok
            sections[current] = []
            continue
        if current is None:
            raise InstanceError(f"legacy: data token {tok!r} before any section keyword")
        try:
            sections[current].append(float(tok))
        except ValueError:
            raise InstanceError(f"legacy: unexpected token {tok!r} in section {current!r}") from None
    for key in ("nbNodes", "nbVehi", "nbServi", "r", "a", "d", "p", "e", "l"):
        if key not in sections:
            raise InstanceError(f"legacy: missing section {key!r}")
    nodes = int(sections["nbNodes"][0])
    nv = int(sections["nbVehi"][0])
    ns = int(sections["nbServi"][0])
    n = nodes - 1

    def table(key: str, rows: int, cols: int) -> list[list[float]]:
        vals = sections[key]
        if len(vals) != rows * cols:
            raise InstanceError(f"legacy: section {key!r} has {len(vals)} values, expected {rows * cols}")
        return [vals[r * cols : (r + 1) * cols] for r in range(rows)]

    req = table("r", nodes, ns)
    skills = table("a", nv, ns)
    dist = table("d", nodes, nodes)
    e = table("e", nodes, 1)
    l = table("l", nodes, 1)
    if len(sections["p"]) == nodes * ns:
        proc = table("p", nodes, ns)
    elif len(sections["p"]) == nodes * nv * ns:
        full = table("p", nodes, nv * ns)
        proc = []
        for i, row in enumerate(full):
            per_svc = []
            for s in range(ns):
                vals = {row[v * ns + s] for v in range(nv) if skills[v][s]} or {row[s]}
                if len(vals) > 1:
                    raise InstanceError(f"legacy: vehicle-dependent processing time at node {i}")
                per_svc.append(vals.pop())
            proc.append(per_svc)
    else:
        raise InstanceError("legacy: section 'p' has an unexpected size")
    mind = table("mind", nodes, 1) if "mind" in sections else [[0.0]] * nodes
    maxd = table("maxd", nodes, 1) if "maxd" in sections else [[0.0]] * nodes
    xs = sections.get("x", [0.0] * nodes)
    ys = sections.get("y", [0.0] * nodes)

    patients = []
    for i in range(1, nodes):
        demands = tuple((s + 1, proc[i][s]) for s in range(ns) if req[i][s])
        double = len(demands) == 2
        patients.append(
            Patient(
                i,
                xs[i],
                ys[i],
                e[i][0],
                l[i][0],
                demands,
                mind[i][0] if double else 0.0,
                maxd[i][0] if double else 0.0,
            )
        )
    caregivers = tuple(
        Caregiver(v + 1, frozenset(s + 1 for s in range(ns) if skills[v][s])) for v in range(nv)
    )
    return Instance(
        name="legacy",
        patients=tuple(patients),
        caregivers=caregivers,
        num_services=ns,
        travel=tuple(tuple(row) for row in dist),
        horizon=max(r[0] for r in l[1:]) if n else 0.0,
    )


# ---------------------------------------------------------------------------
# generator


@dataclass(frozen=True)
class GenSpec:
    """Recipe for a synthetic instance.

    Named subsets take their patient/caregiver counts from the benchmark
    table; ``subset="custom"`` uses ``num_patients``/``num_caregivers``.
    ``num_double``/``num_simultaneous`` override the 30%/15% split.
    """

    subset: str = "custom"
    num_patients: int = 10
    num_caregivers: int = 3
    seed: int = 0
    horizon: float = 600
    tw_width: float = 120
    dur_min: int = 10
    dur_max: int = 20
    num_double: int | None = None
    num_simultaneous: int | None = None

    def __post_init__(self) -> None:
        if self.subset != "custom":
            if self.subset not in SUBSETS:
                raise ValueError(f"unknown subset {self.subset!r}")
            n, _, _, m = SUBSETS[self.subset]
            object.__setattr__(self, "num_patients", n)
            object.__setattr__(self, "num_caregivers", m)
        if self.num_patients < 1 or self.num_caregivers < 1:
            raise ValueError("num_patients and num_caregivers must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not 0 < self.tw_width <= self.horizon:
            raise ValueError("need 0 < tw_width <= horizon")
        if not 0 < self.dur_min <= self.dur_max:
            raise ValueError("need 0 < dur_min <= dur_max")

    @classmethod
    def from_mapping(cls, values: Mapping[str, str]) -> GenSpec:
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ValueError(f"unknown generator key {key!r}")
            if key == "subset":
                kwargs[key] = raw
            elif key in ("horizon", "tw_width"):
                kwargs[key] = float(raw)
            else:
                kwargs[key] = int(raw)
        return cls(**kwargs)

    def patient_mix(self) -> tuple[int, int]:
        """(double-service count, simultaneous count)."""
        n = self.num_patients
        if self.num_double is not None:
            n_d = self.num_double
        elif self.subset in SUBSETS:
            n_d = SUBSETS[self.subset][2]
        else:
            n_d = math.floor(0.30 * n + 0.5)
        n_sim = self.num_simultaneous if self.num_simultaneous is not None else math.floor(0.15 * n)
        n_sim = min(n_sim, n_d)
        if not 0 <= n_d <= n:
            raise ValueError("double-service count out of range")
        return n_d, n_sim

    @property
    def default_name(self) -> str:
        return f"{self.subset}-gen-s{self.seed}"


def _skill_subsets(pool: Sequence[int]) -> list[tuple[int, ...]]:
    out = []
    for mask in range(1, 2 ** len(pool)):
        out.append(tuple(s for b, s in enumerate(pool) if mask >> b & 1))
    return out


def generate_instance(spec: GenSpec, name: str | None = None) -> Instance:
    rng = np.random.default_rng(spec.seed)
    n, m = spec.num_patients, spec.num_caregivers
    n_d, n_sim = spec.patient_mix()

    # caregivers: first half from {1,2,3}, second half from {4,5,6}
    first_half = (m + 1) // 2
    pools = ((1, 2, 3), (4, 5, 6))
    skills: list[set[int]] = []
    for v in range(m):
        options = _skill_subsets(pools[0] if v < first_half else pools[1])
        skills.append(set(options[int(rng.integers(len(options)))]))
    for s in range(1, NUM_BENCHMARK_SERVICES + 1):
        if any(s in sk for sk in skills):
            continue
        half = range(first_half) if s <= 3 else range(first_half, m)
        candidates = list(half) or list(range(m))
        skills[candidates[int(rng.integers(len(candidates)))]].add(s)

    offered = sorted(set().union(*skills))
    pairs = [
        (s1, s2)
        for i, s1 in enumerate(offered)
        for s2 in offered[i + 1 :]
        if any(s1 in skills[a] and s2 in skills[b] for a in range(m) for b in range(m) if a != b)
    ]
    if n_d and not pairs:
        raise ValueError("no pair of distinct caregivers can serve a double-service patient")

    kinds = ["sim"] * n_sim + ["prec"] * (n_d - n_sim) + ["single"] * (n - n_d)
    kinds = [kinds[k] for k in rng.permutation(n)]

    depot = (int(rng.integers(0, 101)), int(rng.integers(0, 101)))
    points = [depot]
    patients = []
    for pid, kind in enumerate(kinds, start=1):
        x, y = int(rng.integers(0, 101)), int(rng.integers(0, 101))
        points.append((x, y))
        e = int(rng.integers(0, int(spec.horizon - spec.tw_width) + 1))
        if kind == "single":
            svcs: tuple[int, ...] = (offered[int(rng.integers(len(offered)))],)
        else:
            svcs = pairs[int(rng.integers(len(pairs)))]
        demands = tuple((s, float(rng.integers(spec.dur_min, spec.dur_max + 1))) for s in svcs)
        sep_min = sep_max = 0.0
        if kind == "prec":
            sep_min = float(rng.integers(5, 31))
            sep_max = sep_min + float(rng.integers(10, 61))
        patients.append(Patient(pid, x, y, float(e), float(e + spec.tw_width), demands, sep_min, sep_max))

    caregivers = tuple(Caregiver(v + 1, frozenset(sk)) for v, sk in enumerate(skills))
    return Instance(
        name=name or spec.default_name,
        patients=tuple(patients),
        caregivers=caregivers,
        num_services=NUM_BENCHMARK_SERVICES,
        travel=euclidean_travel(points),
        horizon=float(spec.horizon),
    )


def parse_key_values(lines: Iterable[str]) -> dict[str, str]:
    """``key=value`` lines with ``#`` comments; later keys win."""
    out = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out
