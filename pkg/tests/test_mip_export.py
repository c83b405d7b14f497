from __future__ import annotations

import os
import tempfile

import pytest

from conftest import DATA, make_instance
from hhcrsp.instance import GenSpec, generate_instance, read_instance
from hhcrsp.mip_export import export_mip, export_mip_text
from hhcrsp.oracle import best_routing


def closed_form(inst):
    """Counts derived by hand from the pruning rule, independent of the writer."""
    n = inst.num_patients
    q = {s: len(inst.qualified(s)) for s in range(1, inst.num_services + 1)}
    demanded = [(p.id, s) for p in inst.patients for s in p.services]
    t_count = sum(q[s] for _, s in demanded)
    x_count = (n + 1) * t_count  # n arcs into each qualified (patient, service) plus one return arc
    continuous = t_count + len(demanded) + 3

    used = [c for c in inst.caregivers if any(s in c.skills for _, s in demanded)]
    # a (patient, caregiver) flow row is empty only if the caregiver can serve nobody
    # at that patient (no arcs in, no return arc) and nobody elsewhere (no arcs out)
    flow = sum(
        1
        for p in inst.patients
        for c in inst.caregivers
        if any(c.skills & set(o.services) for o in inst.patients)
    )
    seq = 0
    for p in inst.patients:  # arcs into p, one row per service the caregiver could hold at the tail
        for s2 in p.services:
            for c in inst.caregivers:
                if s2 not in c.skills:
                    continue
                seq += 1  # from the depot
                seq += sum(len(c.skills & set(o.services)) for o in inst.patients if o.id != p.id)
    sync = sum(2 * q[p.services[0]] * q[p.services[1]] for p in inst.patients if p.is_double)
    rows = 2 + len(demanded) + 2 * len(used) + flow + len(demanded) + seq + t_count + sync
    return x_count, continuous, rows


def test_one_demand_two_arcs():
    inst = make_instance([(0, 0), (1, 1)], [(0, 100, [(1, 5)], 0, 0)], [{1}])
    stats = export_mip(inst)
    assert stats.num_binary_vars == 2
    assert stats.num_continuous_vars == 1 + 1 + 3


@pytest.mark.parametrize("seed", range(20))
def test_closed_form_counts(seed):
    spec = GenSpec(num_patients=2 + seed % 7, num_caregivers=2 + seed % 4, seed=seed)
    inst = generate_instance(spec)
    stats = export_mip(inst)
    assert (stats.num_binary_vars, stats.num_continuous_vars, stats.num_constraints) == closed_form(inst)
    n = inst.num_patients
    assert stats.num_binary_vars <= (n + 1) ** 2 * inst.num_caregivers * inst.num_services
    assert stats.big_m == inst.big_m
    assert sum(stats.by_family.values()) == stats.num_constraints


def test_golden_file():
    inst = read_instance(DATA / "tiny.hhcrsp")
    text, stats = export_mip_text(inst)
    assert text == (DATA / "tiny.lp").read_text(encoding="utf-8")
    assert export_mip_text(inst)[0] == text
    assert f"binaries={stats.num_binary_vars} " in text


def test_stats_without_sink_match():
    inst = generate_instance(GenSpec(subset="A", seed=3))
    assert export_mip(inst) == export_mip_text(inst)[1]


def _solve_lp(text):
    highspy = pytest.importorskip("highspy")
    with tempfile.NamedTemporaryFile("w", suffix=".lp", delete=False) as fh:
        fh.write(text)
    try:
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("mip_rel_gap", 0.0)
        h.readModel(fh.name)
        h.run()
        assert h.getModelStatus() == highspy.HighsModelStatus.kOptimal
        return h.getInfo().objective_function_value
    finally:
        os.unlink(fh.name)


def test_external_solver_matches_routing_oracle():
    inst = read_instance(DATA / "mip_check.hhcrsp")
    optimum = _solve_lp(export_mip_text(inst)[0])
    assert optimum == pytest.approx(best_routing(inst).best_cost.objective, abs=1e-4)
