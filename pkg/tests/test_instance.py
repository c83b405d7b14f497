from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hhcrsp.instance import (
    SUBSETS,
    GenSpec,
    InstanceError,
    euclidean_travel,
    generate_instance,
    parse_instance,
    serialize_instance,
)

NATIVE_A = """\
HHCRSP demo
SIZES 2 2 6 600
PATIENT 1 0 0 10 40 0 0 1 3 12
PATIENT 2 3 4 20 80 5 30 2 1 15 2 10.5
CAREGIVER 1 3 1 2 3
CAREGIVER 2 1 2
TRAVEL
0 1 5
1 0 5
5 5 0
"""


def test_parse_native_small():
    inst = parse_instance(NATIVE_A)
    assert inst.num_patients == 2 and inst.num_caregivers == 2 and inst.num_services == 6
    p2 = inst.patient(2)
    assert p2.services == (1, 2) and p2.duration(2) == 10.5
    assert (p2.sep_min, p2.sep_max) == (5, 30)


def test_double_service_needs_two_caregivers():
    with pytest.raises(InstanceError):
        parse_instance(NATIVE_A.replace("SIZES 2 2", "SIZES 2 1").replace("CAREGIVER 2 1 2\n", ""))


def test_generated_subset_a_sizes():
    inst = generate_instance(GenSpec(subset="A", seed=1))
    assert (inst.num_patients, inst.num_caregivers, inst.num_services) == (10, 3, 6)
    doubles = sum(p.is_double for p in inst.patients)
    assert (inst.num_patients - doubles, doubles) == (7, 3)
    assert parse_instance(serialize_instance(inst)) == inst


def test_generated_subset_g_sizes():
    inst = generate_instance(GenSpec(subset="G", seed=3))
    assert inst.num_patients == 300 and inst.num_caregivers == 40
    assert sum(p.is_double for p in inst.patients) == 100


@pytest.mark.parametrize("subset", sorted(SUBSETS))
def test_subset_table(subset):
    n, ns, nd, m = SUBSETS[subset]
    assert ns + nd == n
    spec = GenSpec(subset=subset)
    assert spec.patient_mix()[0] == nd


def test_dimension_mismatch():
    bad = NATIVE_A.replace("5 5 0\n", "")
    with pytest.raises(InstanceError, match="dimension mismatch"):
        parse_instance(bad)
    bad = NATIVE_A.replace("5 5 0\n", "5 5\n")
    with pytest.raises(InstanceError, match="dimension mismatch"):
        parse_instance(bad)


@pytest.mark.parametrize(
    "old,new",
    [
        ("10 40 0 0 1 3 12", "40 10 0 0 1 3 12"),  # window end before start
        ("1 3 12", "1 9 12"),  # service not offered
        ("0 1 5\n", "0 -1 5\n"),  # negative travel
        ("1 0 5\n", "2 0 5\n"),  # asymmetric
        ("SIZES 2 2 6", "SIZES 2 2 2"),  # service id out of range
    ],
)
def test_invariant_violations(old, new):
    text = NATIVE_A
    with pytest.raises(InstanceError):
        parse_instance(text.replace(old, new, 1))


def test_same_seed_byte_identical():
    a = serialize_instance(generate_instance(GenSpec(subset="B", seed=7)))
    b = serialize_instance(generate_instance(GenSpec(subset="B", seed=7)))
    c = serialize_instance(generate_instance(GenSpec(subset="B", seed=8)))
    assert a == b and a != c


def test_euclidean_travel_examples():
    assert euclidean_travel([(0, 0), (3, 4)])[0][1] == 5.0
    assert euclidean_travel([(0, 0)]) == ((0.0,),)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.integers(1, 25),
    m=st.integers(2, 6),
)
def test_generator_invariants(seed, n, m):
    inst = generate_instance(GenSpec(num_patients=n, num_caregivers=m, seed=seed))
    d = inst.travel
    for i in range(n + 1):
        assert d[i][i] == 0
        for j in range(n + 1):
            assert d[i][j] == d[j][i] >= 0
            for k in range(n + 1):
                assert d[i][j] <= d[i][k] + d[k][j] + 1e-9
    for p in inst.patients:
        assert 0 <= p.tw_start <= p.tw_end <= inst.horizon
        for s in p.services:
            assert inst.qualified(s)
        if p.is_double and not p.is_simultaneous:
            assert 0 <= p.sep_min <= p.sep_max
    n_d, n_sim = GenSpec(num_patients=n).patient_mix()
    assert sum(p.is_double for p in inst.patients) == n_d
    assert sum(p.is_simultaneous for p in inst.patients) == n_sim
    assert parse_instance(serialize_instance(inst)) == inst


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(-50, 50), st.integers(-50, 50)), min_size=1, max_size=8))
def test_euclidean_matches_hypot(points):
    d = euclidean_travel(points)
    for i, a in enumerate(points):
        for j, b in enumerate(points):
            assert d[i][j] == pytest.approx(math.hypot(a[0] - b[0], a[1] - b[1]), abs=1e-12)


LEGACY = """
nbNodes = 3
nbVehi = 2
nbServi = 2
r = [0 0, 1 0, 1 1]
a = [1 0, 1 1]
x = [0 3 0]
y = [0 4 4]
d = [0 5 4, 5 0 3, 4 3 0]
p = [0 0, 10 0, 15 20]
mind = [0 0 5]
maxd = [0 0 25]
e = [0 10 30]
l = [500 60 90]
"""


def test_legacy_reader():
    inst = parse_instance(LEGACY, format="legacy")
    assert inst.num_patients == 2 and inst.num_caregivers == 2 and inst.num_services == 2
    p1, p2 = inst.patients
    assert p1.demands == ((1, 10.0),) and p2.demands == ((1, 15.0), (2, 20.0))
    assert (p2.sep_min, p2.sep_max, p2.tw_start, p2.tw_end) == (5, 25, 30, 90)
    assert inst.travel[1][2] == 3
    assert inst.caregiver(2).skills == {1, 2}


def test_legacy_reader_rejects_bad_sizes():
    with pytest.raises(InstanceError):
        parse_instance(LEGACY.replace("d = [0 5 4, 5 0 3, 4 3 0]", "d = [0 5 4, 5 0 3]"), format="legacy")
