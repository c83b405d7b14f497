from __future__ import annotations

import itertools

import numpy as np
import pytest

from conftest import make_instance
from hhcrsp.decoder import FULL, SIMPLE, DecoderConfig, decode
from hhcrsp.evaluation import evaluate, validate
from hhcrsp.instance import GenSpec, generate_instance
from hhcrsp.oracle import (
    OracleTooLarge,
    best_decoder_reachable,
    best_routing,
    chain_holds,
    synthetic_keys,
)

# frozen from the exhaustive searches on tests/data/greedy_gap.hhcrsp
GAP_ROUTING = 77.27764495136795
GAP_DECODER = 83.9443116180346


def naive_decoder_best(inst, mode):
    """Every order x every tie-bit pattern x toggles, keys built per bit."""
    n = inst.num_patients
    best = np.inf
    for order in itertools.permutations(range(n)):
        for bits in itertools.product((0, 1), repeat=n):
            for t in itertools.product((0.25, 0.75), repeat=2):
                keys = np.empty(n + 2)
                for r, idx in enumerate(order):
                    # rank r keeps its position whatever its bit: bit 1 maps into [0.5, 1)
                    keys[idx] = 0.5 * bits[idx] + 0.5 * (r + 0.5) / n
                keys[n:] = t
                if list(np.argsort(keys[:n], kind="stable")) != list(order):
                    continue
                best = min(best, decode(keys, inst, mode).cost.objective)
    return best


def test_single_patient_space_size():
    inst = make_instance([(0, 0), (3, 4)], [(0, 100, [(1, 5)], 0, 0)], [{1}])
    res = best_decoder_reachable(inst, DecoderConfig(mode=FULL))
    assert res.space_size == 4
    assert res.best_cost.dist == 10.0
    assert best_decoder_reachable(inst, DecoderConfig(mode=SIMPLE)).space_size == 1
    assert best_routing(inst).best_cost == res.best_cost


@pytest.mark.parametrize("seed", range(6))
def test_split_enumeration_matches_naive(seed):
    inst = generate_instance(GenSpec(num_patients=3, num_caregivers=3, seed=seed, num_double=1, num_simultaneous=seed % 2))
    cfg = DecoderConfig()
    assert best_decoder_reachable(inst, cfg).best_cost.objective == naive_decoder_best(inst, cfg)


def test_synthetic_keys_shape():
    keys = synthetic_keys((3, 1, 2), 1, (True, False), 3)
    assert list(np.argsort(keys[:3], kind="stable") + 1) == [3, 1, 2]
    assert [k >= 0.5 for k in keys[:3]] == [True, True, False]
    assert keys[3] >= 0.5 > keys[4]


def test_greedy_gap(greedy_gap):
    routing = best_routing(greedy_gap)
    reach = best_decoder_reachable(greedy_gap)
    assert routing.best_cost.objective == GAP_ROUTING
    assert reach.best_cost.objective == GAP_DECODER
    assert routing.best_cost.objective < reach.best_cost.objective
    for res in (routing, reach):
        assert validate(res.best_solution, greedy_gap) == []
        assert evaluate(res.best_solution, greedy_gap) == res.best_cost
    assert decode(reach.best_keys, greedy_gap).cost == reach.best_cost


@pytest.mark.parametrize("seed", range(8))
def test_chain_and_modes(seed):
    inst = generate_instance(GenSpec(num_patients=3 + seed % 2, num_caregivers=2 + seed % 2, seed=seed))
    full = best_decoder_reachable(inst, DecoderConfig(mode=FULL)).best_cost.objective
    simple = best_decoder_reachable(inst, DecoderConfig(mode=SIMPLE)).best_cost.objective
    assert full <= simple
    keys = np.random.default_rng(seed).random(inst.num_patients + 2)
    assert chain_holds(inst, keys)


def test_size_limits():
    with pytest.raises(OracleTooLarge):
        best_routing(generate_instance(GenSpec(num_patients=5, num_caregivers=2)))
    with pytest.raises(OracleTooLarge):
        best_decoder_reachable(generate_instance(GenSpec(num_patients=8, num_caregivers=2)))
