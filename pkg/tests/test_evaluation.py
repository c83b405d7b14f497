from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_instance
from hhcrsp.decoder import decode
from hhcrsp.evaluation import (
    CostComponents,
    DecodedSolution,
    Route,
    Visit,
    evaluate,
    objective,
    parse_solution,
    serialize_solution,
    validate,
)
from hhcrsp.instance import GenSpec, generate_instance

EMPTY = CostComponents(0.0, 0.0, 0.0, 0.0)


def _sol(*routes):
    return DecodedSolution(tuple(Route(v, tuple(visits)) for v, visits in routes), EMPTY)


@pytest.fixture
def line():
    # depot at 0, patient 1 at distance 10, patient 2 (simultaneous) at distance 20
    return make_instance(
        [(0, 0), (10, 0), (20, 0)],
        [(15, 100, [(1, 5)], 0, 0), (0, 50, [(1, 5), (2, 5)], 0, 0)],
        [{1, 2}, {1, 2}],
    )


def test_empty_routes(line):
    assert evaluate(_sol((1, []), (2, [])), line).as_tuple() == (0.0, 0.0, 0.0, 0.0)


def test_objective_arithmetic():
    assert objective(390.0, 0.0, 0.0) == pytest.approx(130.0, abs=1e-12)


def test_single_route_hand_trace(line):
    sol = _sol((1, [Visit(1, 1, 15.0, 0.0)]), (2, []))
    assert evaluate(sol, line).as_tuple() == pytest.approx((20.0, 0.0, 0.0, 20.0 / 3.0), abs=1e-12)


def test_tardiness_and_tmax(line):
    # patient 2 served at 70 by both caregivers: 20 late each
    sol = _sol((1, [Visit(2, 1, 70.0, 20.0)]), (2, [Visit(2, 2, 70.0, 20.0)]))
    c = evaluate(sol, line)
    assert (c.dist, c.tard, c.tmax) == (80.0, 40.0, 20.0)


def test_sync_violation(line):
    sol = _sol(
        (1, [Visit(1, 1, 15.0, 0.0), Visit(2, 1, 100.0, 50.0)]),
        (2, [Visit(2, 2, 105.0, 55.0)]),
    )
    problems = validate(sol, line)
    assert [v.kind for v in problems] == ["sync"]


def test_skill_violation():
    inst = make_instance([(0, 0), (1, 0)], [(0, 100, [(2, 5)], 0, 0)], [{1}, {2}])
    problems = validate(_sol((1, [Visit(1, 2, 1.0, 0.0)]), (2, [])), inst)
    assert [v.kind for v in problems] == ["skill"]


def test_other_violation_kinds(line):
    missing = validate(_sol((1, [Visit(1, 1, 15.0, 0.0)]), (2, [])), line)
    assert {v.kind for v in missing} == {"coverage"}
    early = validate(_sol((1, [Visit(1, 1, 5.0, 0.0)]), (2, [])), line)
    assert {"timing", "time_window"} <= {v.kind for v in early}
    wrong_tard = validate(_sol((1, [Visit(1, 1, 15.0, 3.0)]), (2, [])), line)
    assert "tardiness" in {v.kind for v in wrong_tard}
    ghost = validate(_sol((7, [])), line)
    assert "unknown" in {v.kind for v in ghost}


def test_evaluate_unknown_patient(line):
    with pytest.raises(KeyError):
        evaluate(_sol((1, [Visit(9, 1, 0.0, 0.0)])), line)


def test_solution_text_round_trip():
    inst = generate_instance(GenSpec(subset="A", seed=4))
    sol = decode(np.random.default_rng(0).random(inst.num_patients + 2), inst)
    assert parse_solution(serialize_solution(sol), inst) == sol


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), delay=st.floats(0.0, 200.0), idx=st.integers(0, 100))
def test_delaying_a_visit_never_lowers_tardiness(seed, delay, idx):
    inst = generate_instance(GenSpec(num_patients=6, num_caregivers=3, seed=seed))
    sol = decode(np.random.default_rng(seed).random(inst.num_patients + 2), inst)
    base = evaluate(sol, inst)
    flat = [(r, k) for r, route in enumerate(sol.routes) for k in range(len(route.visits))]
    r, k = flat[idx % len(flat)]
    routes = list(sol.routes)
    visits = list(routes[r].visits)
    v = visits[k]
    visits[k] = Visit(v.patient, v.service, v.start + delay, v.tardiness)
    routes[r] = Route(routes[r].caregiver, tuple(visits))
    later = evaluate(DecodedSolution(tuple(routes), sol.cost), inst)
    assert later.tard >= base.tard and later.tmax >= base.tmax and later.dist == base.dist
