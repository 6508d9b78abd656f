import io

import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from distincompat.linalg import random_hermitian
from distincompat.solver import (ConicProgram, IllPosedProgram, Model, NonnegBlock, PsdBlock, SExpr,
                                 SolverTolerances, dualize, dump_triplets, load_triplets, scaled_identity,
                                 solve)


def _lp(c, G, h, A=None, b=None, sense="min"):
    n = len(c)
    A = np.zeros((0, n)) if A is None else A
    b = np.zeros(0) if b is None else b
    return ConicProgram(np.asarray(c, float), A, b, [NonnegBlock(len(h), np.arange(n), G, h)], sense=sense)


def test_lp_oracle():
    # min x1 + x2 s.t. x1 + x2 >= 1, x >= 0  ->  1
    G = -np.array([[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    res = solve(_lp([1, 1], G, np.array([-1.0, 0.0, 0.0])))
    assert res.optimal
    assert abs(res.primal_objective - 1) < 1e-8
    assert abs(res.dual_objective - 1) < 1e-8


def test_lp_max_sense():
    # max x s.t. x <= 2  ->  2
    res = solve(_lp([1.0], np.array([[1.0]]), np.array([2.0]), sense="max"))
    assert res.optimal and abs(res.primal_objective - 2) < 1e-8


def test_lp_primal_infeasible():
    # x >= 1 and x <= 0
    G = np.array([[-1.0], [1.0]])
    res = solve(_lp([1.0], G, np.array([-1.0, 0.0])))
    assert res.status == "infeasible" and res.infeasibility == "primal"


def test_lp_unbounded_is_dual_infeasible():
    # min -x s.t. x >= 0
    res = solve(_lp([-1.0], np.array([[-1.0]]), np.array([0.0])))
    assert res.status == "infeasible" and res.infeasibility == "dual"


def test_rank_deficient_equalities_are_named():
    m = Model()
    x = m.scalars(2)
    m.nonneg([SExpr(np.array([x[0]]), np.ones(1)), SExpr(np.array([x[1]]), np.ones(1))])
    m.eq(SExpr(x, np.ones(2)), 1.0, name="first")
    m.eq(SExpr(x, 2 * np.ones(2)), 2.0, name="twice the first")
    m.objective(SExpr(x, np.array([1.0, 2.0])))
    with pytest.raises(IllPosedProgram, match="rank deficient"):
        m.solve()


def test_illposed_data_rejected():
    with pytest.raises(IllPosedProgram):
        ConicProgram(np.ones(1), np.zeros((0, 1)), np.zeros(0),
                     [PsdBlock(2, [0], np.array([[[0, 1], [0, 0]]]), np.eye(2))])
    with pytest.raises(IllPosedProgram):
        ConicProgram(np.array([np.nan]), np.zeros((0, 1)), np.zeros(0), [])


def _lambda_max_model(H):
    d = H.shape[0]
    m = Model()
    t = m.scalar()
    m.psd(scaled_identity(t, d) - H, name="t - H")
    m.objective(t)
    return m


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_lambda_max_matches_eigensolver(d, seed):
    H = random_hermitian(d, np.random.default_rng(seed))
    res = _lambda_max_model(H).solve().result
    assert res.optimal
    assert abs(res.primal_objective - np.linalg.eigvalsh(H).max()) < 1e-7


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_trace_norm_by_splitting(d, seed):
    H = random_hermitian(d, np.random.default_rng(seed))
    m = Model()
    P, Q = m.herm(d), m.herm(d)
    m.psd(P)
    m.psd(Q)
    m.eq_herm(P - Q, H, name="P - Q = H")
    m.objective(Model.trace(P) + Model.trace(Q))
    res = m.solve().result
    assert res.optimal
    assert abs(res.primal_objective - np.abs(np.linalg.eigvalsh(H)).sum()) < 1e-7


def test_dualize_same_value():
    H = random_hermitian(3, np.random.default_rng(5))
    prog = _lambda_max_model(H).build()
    a = solve(prog)
    b = solve(dualize(prog))
    assert a.optimal and b.optimal
    assert abs(a.primal_objective - b.primal_objective) < 1e-7
    assert dualize(prog).sense == "max"


def test_triplet_roundtrip():
    H = random_hermitian(2, np.random.default_rng(6))
    prog = _lambda_max_model(H).build()
    buf = io.StringIO()
    dump_triplets(prog, buf)
    buf.seek(0)
    back = load_triplets(buf)
    assert np.allclose(back.c, prog.c) and np.allclose(back.A, prog.A)
    assert abs(solve(back).primal_objective - solve(prog).primal_objective) < 1e-10


def test_max_iterations_status():
    H = random_hermitian(3, np.random.default_rng(7))
    res = _lambda_max_model(H).solve(SolverTolerances(max_iter=2)).result
    assert res.status == "max-iterations"
    assert not res.optimal


def test_random_sdp_against_cvxpy():
    # min Tr[C X] s.t. Tr[A_i X] = b_i, X >= 0 (complex Hermitian X)
    rng = np.random.default_rng(8)
    d, k = 3, 4
    C = random_hermitian(d, rng)
    C = C + (abs(np.linalg.eigvalsh(C).min()) + 0.5) * np.eye(d)
    As = [random_hermitian(d, rng) for _ in range(k)]
    X0 = np.eye(d) / d
    b = [np.real(np.trace(A @ X0)) for A in As]

    m = Model()
    X = m.herm(d)
    m.psd(X)
    for i, (A, bi) in enumerate(zip(As, b)):
        m.eq(Model.trace(X, A), bi, name=f"row {i}")
    m.objective(Model.trace(X, C))
    ours = m.solve().result
    assert ours.optimal

    Xc = cp.Variable((d, d), hermitian=True)
    cons = [Xc >> 0] + [cp.real(cp.trace(A @ Xc)) == bi for A, bi in zip(As, b)]
    ref = cp.Problem(cp.Minimize(cp.real(cp.trace(C @ Xc))), cons)
    ref.solve(solver="CLARABEL")
    assert abs(ours.primal_objective - ref.value) < 1e-6


def test_stalled_end_game_returns_best_iterate():
    # tolerances below double precision cannot be met; the best iterate is kept
    H = random_hermitian(3, np.random.default_rng(9))
    unreachable = dict(gap=1e-18, feas=1e-18, max_iter=40)
    res = _lambda_max_model(H).solve(SolverTolerances(near=1e12, **unreachable)).result
    assert res.status == "near-optimal" and res.optimal
    assert abs(res.primal_objective - np.linalg.eigvalsh(H).max()) < 1e-7
    res = _lambda_max_model(H).solve(SolverTolerances(near=1.0, **unreachable)).result
    assert not res.optimal
