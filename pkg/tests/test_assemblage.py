import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from distincompat.assemblage import (Povm, PovmError, SimulationMap, WeightedAssemblage, append, concat,
                                     parent_povm_simulation, random_povm, random_projective, simulate,
                                     split, splitting_map)
from distincompat.strategies import DeterministicStrategySet, EnumerationCapExceeded

from conftest import SZ, paulis


def test_povm_validation():
    Povm([np.eye(2) / 2, np.eye(2) / 2])
    with pytest.raises(PovmError):
        Povm([np.eye(2), np.eye(2)])
    with pytest.raises(PovmError):
        Povm([np.diag([1.5, 0.5]), np.diag([-0.5, 0.5])])
    with pytest.raises(PovmError):
        Povm([])


def test_depolarize_formula():
    P = Povm([np.diag([1, 0]), np.diag([0, 1])])
    Q = P.depolarize(0.6)
    assert np.allclose(Q[0], np.diag([0.8, 0.2]))


def test_weights_and_concat():
    A = paulis(which="XZ")
    B = WeightedAssemblage([paulis(which="Y")[0]])
    C = concat(A, B)
    assert np.allclose(C.weights, 1 / 3)
    assert np.allclose(append(A, B[0]).weights, C.weights)
    D = concat(A, B, mix=0.5)
    assert np.allclose(D.weights, [0.25, 0.25, 0.5])
    with pytest.raises(PovmError):
        WeightedAssemblage(A.measurements, [0.7, 0.7])
    with pytest.raises(PovmError):
        concat(A, WeightedAssemblage([Povm([np.eye(3)])]))


def test_subset_renormalizes():
    A = WeightedAssemblage(paulis().measurements, [0.5, 0.3, 0.2])
    S = A.subset([1, 2])
    assert np.allclose(S.weights, [0.6, 0.4])
    assert S[0] is A[1]


def test_json_roundtrip(rng):
    A = WeightedAssemblage([random_povm(3, 4, rng), random_projective(3, rng)], [0.25, 0.75])
    B = WeightedAssemblage.from_json(A.to_json())
    assert A.allclose(B, atol=1e-15)
    data = json.loads(A.to_json())
    data["measurements"][0]["effects"][0]["re"][0][0] += 0.1
    with pytest.raises(PovmError):
        WeightedAssemblage.from_dict(data)


def test_split_matches_splitting_map():
    A = paulis(0.9)
    S = split(A, [2, 1, 3])
    T = simulate(A, splitting_map(A, [2, 1, 3]))
    assert S.allclose(T)
    assert np.allclose(S.weights, [1 / 6, 1 / 6, 1 / 3, 1 / 9, 1 / 9, 1 / 9])


def test_simulation_checks_weights():
    A = paulis(which="XZ")
    sim = SimulationMap(np.array([[1.0, 0.0]]), [[np.eye(2), np.eye(2)]], [1.0])
    with pytest.raises(PovmError):
        simulate(A, sim)
    out = simulate(A, sim, check_weights=False)
    assert np.allclose(out[0][0], A[0][0])
    with pytest.raises(PovmError):
        SimulationMap(np.array([[0.5, 0.4]]), [[np.eye(2), np.eye(2)]], [1.0])


def test_coarse_graining_relabel():
    A = WeightedAssemblage([Povm.from_basis(np.eye(3))])
    q = np.array([[1, 1, 0], [0, 0, 1.0]])
    out = simulate(A, SimulationMap(np.ones((1, 1)), [[q]], [1.0]))
    assert np.allclose(out[0][0], np.diag([1, 1, 0]))


def test_strategy_table_order():
    s = DeterministicStrategySet((2, 3))
    assert len(s) == 6
    assert s.table.tolist() == [[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [1, 2]]
    v = s.response(1)
    assert v.shape == (3, 6) and np.allclose(v.sum(axis=0), 1)
    assert s.tensor().shape == (2, 3, 6)
    with pytest.raises(EnumerationCapExceeded):
        DeterministicStrategySet((2,) * 21)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 3), st.lists(st.integers(1, 3), min_size=1, max_size=3), st.integers(0, 2**32 - 1))
def test_parent_simulation_is_valid(d, outs, seed):
    rng = np.random.default_rng(seed)
    strat = DeterministicStrategySet(outs)
    parent = random_povm(d, len(strat), rng)
    A = parent_povm_simulation(parent, strat)
    assert A.outcomes == tuple(outs)
    for m in A.measurements:
        assert np.allclose(sum(m.effects), np.eye(d))


def test_conjugation_keeps_validity(rng):
    from distincompat.linalg import random_unitary
    U = random_unitary(2, rng)
    A = paulis(0.8).conjugate(U)
    assert np.allclose(A[1][0], U @ ((np.eye(2) + 0.8 * SZ) / 2) @ U.conj().T)
