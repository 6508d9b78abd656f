import json

import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from distincompat.assemblage import Povm, WeightedAssemblage, random_povm, random_projective
from distincompat.incompat import (SolverFailure, certificate_objective, certificate_violation,
                                   closest_jm_subset, diamond_distance, dichotomic_distance, incompatibility,
                                   is_jointly_measurable, measure_prepare_distance)
from distincompat.linalg import random_unitary
from distincompat.mub import analytic_incompatibility, build_mub
from distincompat.solver import SolverTolerances
from distincompat.strategies import DeterministicStrategySet, EnumerationCapExceeded

from conftest import SX, dichotomic, paulis


def cvxpy_incompatibility(M: WeightedAssemblage) -> float:
    """Independent transcription with the general (non block-diagonal) Z_x."""
    d = M.dim
    strat = DeterministicStrategySet(M.outcomes)
    G = [cp.Variable((d, d), hermitian=True) for _ in range(len(strat))]
    cons = [g >> 0 for g in G] + [sum(G) == np.eye(d)]
    obj = 0
    for x, P in enumerate(M.measurements):
        o = P.outcomes
        Z = cp.Variable((o * d, o * d), hermitian=True)
        a = cp.Variable()
        J = 0
        for k in range(o):
            F = sum(G[lam] for lam in np.flatnonzero(strat.table[:, x] == k))
            E = np.zeros((o, o))
            E[k, k] = 1
            J = J + cp.kron(E, (P[k] - F).T)
        cons += [Z >> 0, Z - J >> 0, a * np.eye(d) - cp.partial_trace(Z, [o, d], axis=0) >> 0]
        obj = obj + M.weights[x] * a
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver="CLARABEL")
    return float(prob.value)


@pytest.mark.parametrize("dm", [(2, 2), (2, 3), (3, 2)])
@pytest.mark.parametrize("formulation", ["primal", "dual"])
def test_matches_closed_form(dm, formulation):
    fam = build_mub(*dm)
    for eta in (1.0, 0.8, 0.6):
        rep = incompatibility(fam.assemblage(eta), formulation=formulation)
        assert abs(rep.value - analytic_incompatibility(fam, eta)) < 1e-6
        assert rep.gap < 1e-7


def test_full_z_agrees_with_pinched():
    M = paulis(0.9)
    a = incompatibility(M, formulation="primal").value
    b = incompatibility(M, formulation="primal", full_z=True).value
    assert abs(a - b) < 1e-7


def test_against_cvxpy(rng):
    for M in (WeightedAssemblage([random_projective(2, rng) for _ in range(3)]),
              WeightedAssemblage([random_povm(2, 3, rng), random_projective(2, rng)], [0.3, 0.7])):
        ours = incompatibility(M).value
        assert abs(ours - cvxpy_incompatibility(M)) < 1e-5


def test_certificate_is_feasible_and_bounds_value(rng):
    M = WeightedAssemblage([random_projective(3, rng) for _ in range(2)])
    rep = incompatibility(M)
    assert certificate_violation(M, rep.certificate) < 1e-9
    assert abs(certificate_objective(M, rep.certificate) - rep.dual_objective) < 1e-12
    assert rep.dual_objective <= rep.value + 1e-9
    assert rep.gap < 1e-7
    assert is_jointly_measurable(rep.closest)
    json.dumps(rep.to_dict())


def test_compatible_inputs_give_zero():
    assert incompatibility(paulis(which="ZZ")).value < 1e-8
    assert incompatibility(paulis(0.5)).value < 1e-8
    M = WeightedAssemblage([Povm.trivial(2), dichotomic(SX)])
    assert incompatibility(M).value < 1e-8


def test_jm_verdict():
    v = is_jointly_measurable(paulis(0.70, "XZ"))
    assert v and v.margin >= 0
    from distincompat.assemblage import parent_povm_simulation
    rebuilt = parent_povm_simulation(v.parent, DeterministicStrategySet((2, 2)))
    assert rebuilt.allclose(paulis(0.70, "XZ"), atol=1e-7)
    assert not is_jointly_measurable(paulis(0.72, "XZ"))


def test_dichotomic_closed_form_matches_sdp(rng):
    for _ in range(4):
        A, B = random_povm(2, 2, rng), random_povm(2, 2, rng)
        sdp = measure_prepare_distance(A, B)
        assert abs(sdp - dichotomic_distance(A, B)) < 1e-7
        assert abs(sdp - measure_prepare_distance(A, B, full_z=True)) < 1e-7


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_distance_is_a_metric(seed):
    rng = np.random.default_rng(seed)
    A, B, C = (random_povm(2, 3, rng) for _ in range(3))
    dab, dbc, dac = (measure_prepare_distance(*p) for p in ((A, B), (B, C), (A, C)))
    assert abs(dab - measure_prepare_distance(B, A)) < 1e-7
    assert dac <= dab + dbc + 1e-7
    assert measure_prepare_distance(A, A) < 1e-8


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.3, 1.0))
def test_unitary_invariance_and_noise_monotonicity(seed, eta):
    rng = np.random.default_rng(seed)
    M = WeightedAssemblage([random_projective(2, rng) for _ in range(2)])
    I = incompatibility(M).value
    U = random_unitary(2, rng)
    assert abs(incompatibility(M.conjugate(U)).value - I) < 1e-7
    assert incompatibility(M.depolarize(eta)).value <= I + 1e-7


def test_weighted_distance_is_convex_combination():
    # setting 0 differs by 0.25 * sigma_x (distance 0.25), setting 1 not at all
    M = paulis(1.0, "XZ")
    w = WeightedAssemblage(M.measurements, [0.2, 0.8])
    v = WeightedAssemblage([dichotomic(0.5 * SX), M[1]], [0.2, 0.8])
    assert abs(diamond_distance(w, v) - 0.2 * 0.25) < 1e-7


def test_closest_jm_subset_replaces_only_subset():
    M = paulis()
    out = closest_jm_subset(M, [0, 1])
    assert out[2] is M[2]
    assert is_jointly_measurable(out.subset([0, 1]))
    assert closest_jm_subset(M, [1]) is M


def test_errors():
    with pytest.raises(EnumerationCapExceeded):
        incompatibility(paulis(), cap=4)
    with pytest.raises(SolverFailure):
        incompatibility(paulis(), tol=SolverTolerances(max_iter=2))
    with pytest.raises(ValueError):
        incompatibility(paulis(), formulation="both")
    zero_weight = WeightedAssemblage(paulis(which="XZ").measurements, [1.0, 0.0])
    with pytest.raises(ValueError):
        incompatibility(zero_weight)
