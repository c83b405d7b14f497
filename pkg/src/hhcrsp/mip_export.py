"""LP-format writer for the routing/scheduling MIP with skill-based pruning.

Arc variables ``x_i_j_v_s`` exist only where caregiver ``v`` can perform a
service ``s`` demanded at the arc head ``j``; arcs back to the depot carry
the service performed at the tail. Start-time and tardiness variables exist
only for demanded (patient, service) pairs. The depot start time is fixed
at 0, so sequencing rows leaving the depot have no depot time variable.
"""

from __future__ import annotations

import io
from collections import Counter
from dataclasses import dataclass, field
from typing import TextIO

from hhcrsp.evaluation import DEFAULT_WEIGHTS, Weights
from hhcrsp.instance import Instance

TERMS_PER_LINE = 6


@dataclass
class MipStats:
    num_binary_vars: int = 0
    num_continuous_vars: int = 0
    num_constraints: int = 0
    big_m: float = 0.0
    by_family: Counter = field(default_factory=Counter)


def _coef(c: float) -> str:
    c = float(c)
    if c.is_integer() and abs(c) < 1e15:
        return str(int(c))
    return repr(c)


def _linear(terms: list[tuple[float, str]]) -> str:
    parts = []
    for k, (c, name) in enumerate(terms):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        body = name if mag == 1 else f"{_coef(mag)} {name}"
        if k == 0:
            parts.append(body if sign == "+" else f"- {body}")
        else:
            parts.append(f"{sign} {body}")
    lines = [" ".join(parts[i : i + TERMS_PER_LINE]) for i in range(0, len(parts), TERMS_PER_LINE)]
    return "\n   ".join(lines)


def x_name(i, j, v, s):
    return f"x_{i}_{j}_{v}_{s}"


def t_name(i, v, s):
    return f"t_{i}_{v}_{s}"


def z_name(i, s):
    return f"z_{i}_{s}"


def export_mip(inst: Instance, weights: Weights = DEFAULT_WEIGHTS, out: TextIO | None = None) -> MipStats:
    """Write the model to ``out`` (LP text) and return its size."""
    n = inst.num_patients
    d = inst.travel
    M = inst.big_m
    stats = MipStats(big_m=M)
    nodes = range(n + 1)
    vehicles = [c.id for c in inst.caregivers]
    skills = {c.id: c.skills for c in inst.caregivers}
    demanded = {p.id: p.services for p in inst.patients}
    dur = {(p.id, s): du for p in inst.patients for s, du in p.demands}

    # variables
    x = []
    for i in nodes:
        for j in nodes:
            if i == j:
                continue
            head = demanded[j] if j else demanded[i]
            for v in vehicles:
                for s in head:
                    if s in skills[v]:
                        x.append((i, j, v, s))
    x_set = set(x)
    t = [(i, v, s) for i in range(1, n + 1) for s in demanded[i] for v in vehicles if s in skills[v]]
    z = [(i, s) for i in range(1, n + 1) for s in demanded[i]]
    stats.num_binary_vars = len(x)
    stats.num_continuous_vars = len(t) + len(z) + 3

    rows: list[tuple[str, str, str, str]] = []  # (name, lhs, sense, rhs)

    def add(family: str, name: str, terms, sense: str, rhs: float) -> None:
        rows.append((name, _linear(terms), sense, _coef(rhs)))
        stats.by_family[family] += 1

    # total travel
    add("dist", "dist", [(1, "D")] + [(-d[i][j], x_name(i, j, v, s)) for i, j, v, s in x if d[i][j]], "=", 0)
    # total tardiness and max tardiness
    add("tard", "tard", [(1, "T")] + [(-1, z_name(i, s)) for i, s in z], "=", 0)
    for i, s in z:
        add("tmax", f"tmax_{i}_{s}", [(1, "Tmax"), (-1, z_name(i, s))], ">=", 0)

    out_arcs: dict[tuple[int, int], list[str]] = {}
    in_arcs: dict[tuple[int, int], list[str]] = {}
    in_arcs_s: dict[tuple[int, int, int], list[str]] = {}
    for i, j, v, s in x:
        name = x_name(i, j, v, s)
        out_arcs.setdefault((i, v), []).append(name)
        in_arcs.setdefault((j, v), []).append(name)
        in_arcs_s.setdefault((j, v, s), []).append(name)

    # leave and return to the depot equally often, and at most once
    for v in vehicles:
        leave = [(1, a) for a in out_arcs.get((0, v), [])]
        terms = leave + [(-1, a) for a in in_arcs.get((0, v), [])]
        if terms:
            add("depot", f"depot_{v}", terms, "=", 0)
            add("depot_once", f"once_{v}", leave, "<=", 1)
    # flow conservation, skipped when empty after pruning
    for i in range(1, n + 1):
        for v in vehicles:
            terms = [(1, a) for a in in_arcs.get((i, v), [])] + [(-1, a) for a in out_arcs.get((i, v), [])]
            if terms:
                add("flow", f"flow_{i}_{v}", terms, "=", 0)
    # each demand served once by a skilled caregiver
    for i, s in z:
        terms = [(1, a) for v in vehicles for a in in_arcs_s.get((i, v, s), [])]
        add("assign", f"assign_{i}_{s}", terms, "=", 1)
    # sequencing: t_i + p_i + d_ij <= t_j + M (1 - x_ij)
    t_set = set(t)
    for i, j, v, s2 in x:
        if j == 0:
            continue
        xn = x_name(i, j, v, s2)
        if i == 0:
            add("seq", f"seq_0_{j}_{v}_0_{s2}", [(1, t_name(j, v, s2)), (-M, xn)], ">=", d[0][j] - M)
            continue
        for s1 in demanded[i]:
            if (i, v, s1) not in t_set:
                continue
            add(
                "seq",
                f"seq_{i}_{j}_{v}_{s1}_{s2}",
                [(1, t_name(i, v, s1)), (-1, t_name(j, v, s2)), (M, xn)],
                "<=",
                M - dur[(i, s1)] - d[i][j],
            )
    # soft window end
    for i, v, s in t:
        add("tw", f"tw_{i}_{v}_{s}", [(1, t_name(i, v, s)), (-1, z_name(i, s))], "<=", inst.patient(i).tw_end)
    # separation between the two services of double-service patients
    for p in inst.patients:
        if not p.is_double:
            continue
        s1, s2 = p.services
        for v1 in vehicles:
            if s1 not in skills[v1]:
                continue
            for v2 in vehicles:
                if s2 not in skills[v2]:
                    continue
                served = [(-M, a) for a in in_arcs_s.get((p.id, v1, s1), [])]
                served += [(-M, a) for a in in_arcs_s.get((p.id, v2, s2), [])]
                base = [(1, t_name(p.id, v2, s2)), (-1, t_name(p.id, v1, s1))]
                add("sync_min", f"syncmin_{p.id}_{v1}_{v2}", base + served, ">=", p.sep_min - 2 * M)
                add(
                    "sync_max",
                    f"syncmax_{p.id}_{v1}_{v2}",
                    base + [(-c, a) for c, a in served],
                    "<=",
                    p.sep_max + 2 * M,
                )
    stats.num_constraints = len(rows)

    if out is None:
        return stats
    w1, w2, w3 = weights
    out.write(f"\\ HHCRSP model for instance {inst.name}\n")
    out.write("Minimize\n")
    out.write(f" obj: {_linear([(w1, 'D'), (w2, 'T'), (w3, 'Tmax')])}\n")
    out.write("Subject To\n")
    for name, lhs, sense, rhs in rows:
        out.write(f" {name}: {lhs} {sense} {rhs}\n")
    out.write("Bounds\n")
    for i, v, s in t:
        out.write(f" {t_name(i, v, s)} >= {_coef(inst.patient(i).tw_start)}\n")
    out.write("Binaries\n")
    for k in range(0, len(x), TERMS_PER_LINE):
        out.write(" " + " ".join(x_name(*a) for a in x[k : k + TERMS_PER_LINE]) + "\n")
    families = " ".join(f"{f}={c}" for f, c in sorted(stats.by_family.items()))
    out.write(
        f"\\ binaries={stats.num_binary_vars} continuous={stats.num_continuous_vars} "
        f"constraints={stats.num_constraints} big_m={_coef(M)}\n"
    )
    out.write(f"\\ {families}\n")
    out.write("End\n")
    return stats


def export_mip_text(inst: Instance, weights: Weights = DEFAULT_WEIGHTS) -> tuple[str, MipStats]:
    buf = io.StringIO()
    stats = export_mip(inst, weights, buf)
    return buf.getvalue(), stats
