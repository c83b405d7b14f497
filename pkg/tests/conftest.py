from __future__ import annotations

from pathlib import Path

import pytest

from hhcrsp.instance import Caregiver, Instance, Patient, read_instance

DATA = Path(__file__).parent / "data"


def make_instance(points, patients, skills, horizon=1000.0, name="t", travel=None):
    """Small hand-made instance.

    ``points`` lists depot then patient coordinates; ``patients`` holds
    ``(tw_start, tw_end, demands, sep_min, sep_max)`` per patient; ``skills``
    lists one service set per caregiver.
    """
    from hhcrsp.instance import euclidean_travel

    pats = tuple(
        Patient(i, points[i][0], points[i][1], e, l, tuple(sorted(dem)), smin, smax)
        for i, (e, l, dem, smin, smax) in enumerate(patients, start=1)
    )
    cgs = tuple(Caregiver(v, frozenset(s)) for v, s in enumerate(skills, start=1))
    num_services = max(s for sk in skills for s in sk)
    return Instance(name, pats, cgs, num_services, travel or euclidean_travel(points), horizon)


@pytest.fixture
def greedy_gap():
    return read_instance(DATA / "greedy_gap.hhcrsp")
