import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from distincompat.assemblage import Povm, WeightedAssemblage, random_projective
from distincompat.incompat import is_jointly_measurable
from distincompat.mub import analytic_incompatibility, build_mub
from distincompat.structures import (average_subset_bounds, check_result1, check_subset_bounds, closest_conv,
                                     closest_pairwise, decompose, incompatibility_gain)

from conftest import paulis

SQ2, SQ3 = np.sqrt(2), np.sqrt(3)


def _random_trio(rng, d=2, eta=0.95):
    return WeightedAssemblage([random_projective(d, rng).depolarize(eta) for _ in range(3)])


@pytest.mark.parametrize("eta", [0.5, 0.65, 0.9, 1.0])
def test_pauli_gain_closed_form(eta):
    fam3, fam2 = build_mub(2, 3), build_mub(2, 2)
    M = fam3.assemblage(eta)
    rep = incompatibility_gain(M.subset([0, 1]), M[2], with_bounds=False)
    expected = analytic_incompatibility(fam3, eta) - analytic_incompatibility(fam2, eta)
    assert abs(rep.delta - expected) < 1e-6


def test_pauli_gain_regimes():
    # zero below 1/sqrt3, then I(M123), then the constant (1/sqrt2 - 1/sqrt3)/2
    fam = build_mub(2, 3)
    gains = {}
    for eta in (0.55, 0.65, 0.8, 0.95):
        M = fam.assemblage(eta)
        gains[eta] = incompatibility_gain(M.subset([0, 1]), M[2], with_bounds=False).delta
    assert abs(gains[0.55]) < 1e-7
    assert abs(gains[0.65] - (0.65 + 0.35 / 2 - (3 + SQ3) / 6)) < 1e-6
    for eta in (0.8, 0.95):
        assert abs(gains[eta] - 0.5 * (1 / SQ2 - 1 / SQ3)) < 1e-6


def test_gain_bounds_for_paulis():
    M = paulis(0.9)
    rep = incompatibility_gain(M.subset([0, 1]), M[2])
    assert rep.hypothesis_holds
    assert rep.slack_gain_vs_N >= -1e-7
    assert rep.slack_N_vs_G >= -1e-7
    # symmetric triple: the bound is attained
    assert abs(rep.I_N - rep.delta) < 1e-6
    assert len(rep.N) == 6 and len(rep.G) == 3
    json.dumps(rep.to_dict())


def test_trivial_setting_dilutes():
    M = paulis(1.0, "XZ")
    rep = incompatibility_gain(M, Povm.trivial(2), with_bounds=False)
    assert abs(rep.delta + rep.I_before / 3) < 1e-7
    assert rep.delta <= 0


def test_gain_bound_reorders_settings():
    # X and Z are sharp, Y is heavily depolarized: best pair is (0, 2)
    M = WeightedAssemblage([paulis(1.0, "X")[0], paulis(0.3, "Y")[0], paulis(1.0, "Z")[0]])
    rep = check_result1(M)
    assert rep.order == (0, 2, 1)
    assert rep.hypothesis_holds
    assert rep.slack_gain_vs_N >= -1e-7 and rep.slack_N_vs_G >= -1e-7


def test_gain_bound_with_repeated_measurement(rng):
    A = random_projective(2, rng)
    M = WeightedAssemblage([A, A, random_projective(2, rng)])
    rep = check_result1(M)
    assert rep.slack_gain_vs_N >= -1e-7 and rep.slack_N_vs_G >= -1e-7


@settings(max_examples=4, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gain_bound_random_qubits(seed):
    rep = check_result1(_random_trio(np.random.default_rng(seed)))
    assert rep.hypothesis_holds
    assert rep.delta <= rep.I_N + 1e-7 <= rep.I_G + 2e-7


def test_input_checks():
    with pytest.raises(ValueError):
        check_result1(paulis(which="XZ"))
    with pytest.raises(ValueError):
        check_result1(WeightedAssemblage(paulis().measurements, [0.5, 0.25, 0.25]))
    with pytest.raises(ValueError):
        check_subset_bounds(paulis(), [0, 1, 2])
    with pytest.raises(ValueError):
        decompose(paulis(which="XZ"))


def test_subset_bounds_pauli_tight():
    b = check_subset_bounds(paulis(), [0, 1])
    assert b.min_slack >= -1e-7
    assert abs(b.upper_slack) < 1e-6
    assert set(b.average) >= {"lower_slack", "upper_slack", "I_N"}
    json.dumps(b.to_dict())


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([[0], [0, 1], [1, 2]]))
def test_subset_bounds_random_weights(seed, C):
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(3))
    M = WeightedAssemblage(_random_trio(rng).measurements, w)
    b = check_subset_bounds(M, C)
    assert b.lower_slack >= -1e-7 and b.upper_slack >= -1e-7
    assert not b.average


def test_single_setting_subset_gives_partial_bound():
    M = paulis(0.9)
    b = check_subset_bounds(M, [2], average=False)
    assert b.I_subset == 0.0
    assert abs(b.weight - 1 / 3) < 1e-12


def test_average_bound_with_parents():
    out = average_subset_bounds(paulis(0.95), 2, with_parents=True)
    assert out["lower_slack"] >= -1e-7 and out["upper_slack"] >= -1e-7
    assert out["parent_slack"] >= -1e-7


@pytest.mark.slow
def test_four_setting_splitting_bound():
    rng = np.random.default_rng(1)
    M = WeightedAssemblage([random_projective(2, rng).depolarize(0.9) for _ in range(4)])
    out = average_subset_bounds(M, 3)
    assert out["lower_slack"] >= -1e-7 and out["upper_slack"] >= -1e-7


def test_decompose_paulis():
    rep = decompose(paulis())
    assert abs(rep.I_total - 0.5 * (1 - 1 / SQ3)) < 1e-6
    assert min(rep.I_gen, rep.I_pair, rep.I_hollow) >= -1e-8
    assert rep.slack >= -1e-7
    assert is_jointly_measurable(rep.M_pair.subset([0, 1]))
    assert abs(np.sum(rep.hull_weights) - 1) < 1e-7
    json.dumps(rep.to_dict())


def test_decompose_jm_input_is_zero():
    rep = decompose(paulis(0.5))
    assert max(rep.I_total, rep.I_gen, rep.I_pair, rep.I_hollow) < 1e-6


def test_pairwise_witness_is_pairwise_compatible(rng):
    M = _random_trio(rng)
    _, M_conv, _ = closest_conv(M)
    _, M_pair = closest_pairwise(M_conv)
    for pair in ((0, 1), (0, 2), (1, 2)):
        assert is_jointly_measurable(M_pair.subset(pair))
