"""Steering and Bell-nonlocality analogs of the incompatibility quantifier.

Steering: consistent steering distance, an SDP over local hidden state
models whose total state equals Bob's reduced state.  Nonlocality:
consistent classical trace distance, an LP over product deterministic
strategies with both one-party marginals held fixed.  Plus CHSH tools.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .assemblage import WeightedAssemblage
from .incompat import SolverFailure
from .linalg import (as_hermitian, eigvalsh, kron, partial_trace_first, partial_trace_second,
                     psd_sqrt)
from .solver import Model, SExpr, SolverTolerances, hsum
from .strategies import ENUMERATION_CAP, DeterministicStrategySet

PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
AVG_CHSH_QUANTUM = (4 * np.sqrt(2) + 2) / 3
AVG_CHSH_NS = 10 / 3
TSIRELSON = 2 * np.sqrt(2)

# correlator coefficients c[x, y] of the Bell functionals
CHSH_PAIRS = ((0, 1), (0, 2), (1, 2))


def chsh_coefficients(i: int, j: int, m_A: int = 3) -> np.ndarray:
    """``CHSH_(i,j) = <A_i B_1> + <A_i B_2> + <A_j B_1> - <A_j B_2>``."""
    c = np.zeros((m_A, 2))
    c[i] = [1, 1]
    c[j] += [1, -1]
    return c


def avg_chsh_coefficients() -> np.ndarray:
    return sum(chsh_coefficients(i, j) for i, j in CHSH_PAIRS) / 3


# ---- steering ---------------------------------------------------------------

class SteeringError(ValueError):
    pass


def _herm(a):
    return 0.5 * (a + a.conj().T)


@dataclass
class SteeringAssemblage:
    """Subnormalized states ``sigma[x][a]`` on Bob's side, plus setting weights."""

    sigma: list  # per setting, array (o_x, d, d)
    weights: np.ndarray = None
    tol: float = 1e-9

    def __post_init__(self):
        self.sigma = [np.asarray(s, dtype=complex) for s in self.sigma]
        if not self.sigma:
            raise SteeringError("empty steering assemblage")
        m = len(self.sigma)
        self.weights = np.full(m, 1.0 / m) if self.weights is None else np.asarray(self.weights, float)
        if self.weights.shape != (m,) or abs(self.weights.sum() - 1) > 1e-9 or np.any(self.weights <= 0):
            raise SteeringError("setting weights must be positive and sum to one")
        rho = self.rho_B
        for x, s in enumerate(self.sigma):
            if s.ndim != 3 or s.shape[1:] != rho.shape:
                raise SteeringError(f"setting {x} has wrong shape {s.shape}")
            if np.max(np.abs(s - s.conj().transpose(0, 2, 1))) > self.tol:
                raise SteeringError(f"setting {x} is not Hermitian")
            if min(eigvalsh(e).min() for e in s) < -self.tol:
                raise SteeringError(f"setting {x} has a non-positive element")
            if np.max(np.abs(s.sum(axis=0) - rho)) > self.tol:
                raise SteeringError(f"setting {x} is inconsistent with rho_B")

    @property
    def dim(self) -> int:
        return self.sigma[0].shape[1]

    @property
    def settings(self) -> int:
        return len(self.sigma)

    @property
    def outcomes(self) -> tuple:
        return tuple(s.shape[0] for s in self.sigma)

    @property
    def rho_B(self) -> np.ndarray:
        return self.sigma[0].sum(axis=0)

    def subset(self, idx: Sequence[int]) -> "SteeringAssemblage":
        idx = list(idx)
        w = self.weights[idx]
        return SteeringAssemblage([self.sigma[i] for i in idx], w / w.sum(), self.tol)

    def distance(self, other: "SteeringAssemblage") -> float:
        """``(1/2) sum_x p(x) sum_a ||sigma_{a|x} - other_{a|x}||_1``."""
        tot = 0.0
        for w, s, t in zip(self.weights, self.sigma, other.sigma):
            tot += w * sum(np.abs(eigvalsh(_herm(a - b))).sum() for a, b in zip(s, t))
        return 0.5 * float(tot)

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(),
                "sigma": [[[np.real(e).tolist(), np.imag(e).tolist()] for e in s] for s in self.sigma]}


def concat_steering(*parts: SteeringAssemblage) -> SteeringAssemblage:
    """Uniformly weighted concatenation of steering assemblages."""
    sig = [s for p in parts for s in p.sigma]
    return SteeringAssemblage(sig, None, max(p.tol for p in parts))


def steer_from_state(state, M: WeightedAssemblage) -> SteeringAssemblage:
    """``sigma_{a|x} = Tr_A[(M_{a|x} (x) 1) rho]`` with Alice's dimension ``M.dim``."""
    rho = as_hermitian(state)
    dA = M.dim
    if rho.shape[0] % dA:
        raise SteeringError("state dimension is not a multiple of Alice's dimension")
    dB = rho.shape[0] // dA
    if abs(np.trace(rho).real - 1) > 1e-9 or eigvalsh(rho).min() < -1e-9:
        raise SteeringError("state must be positive with unit trace")
    eyeB = np.eye(dB)
    sig = []
    for P in M.measurements:
        sig.append(np.array([_herm(partial_trace_first(kron(e, eyeB) @ rho, dA)) for e in P.effects]))
    return SteeringAssemblage(sig, M.weights)


@dataclass
class SteeringReport:
    value: float
    solver_value: float
    dual_bound: float
    closest: SteeringAssemblage = field(repr=False)
    hidden_states: np.ndarray = field(repr=False)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"value": self.value, "solver_value": self.solver_value,
                "dual_bound": self.dual_bound, "diagnostics": self.diagnostics}


def _rescale_to(ops: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Clip to PSD and congruence-rescale so that the stack sums to ``target``."""
    w, v = np.linalg.eigh(np.array([_herm(o) for o in ops]))
    ops = np.einsum("kij,kj,klj->kil", v, np.clip(w, 0, None), v.conj())
    S = ops.sum(axis=0)
    T = psd_sqrt(target) @ np.linalg.pinv(psd_sqrt(S), hermitian=True)
    return np.array([_herm(T @ o @ T.conj().T) for o in ops])


def steering_distance(sa: SteeringAssemblage, *, tol: SolverTolerances | None = None,
                      cap: int = ENUMERATION_CAP) -> SteeringReport:
    """Consistent steering distance and the closest LHS assemblage.

    The trace norm of ``sigma - tau`` is split as ``P - Q`` with P, Q >= 0.
    Q is eliminated through ``P >= sigma - tau``, and since both assemblages
    share the same total state the objective reduces to ``sum p(x) Tr P``.
    """
    d = sa.dim
    strat = DeterministicStrategySet(sa.outcomes, cap=cap)
    model = Model()
    S = [model.herm(d) for _ in range(len(strat))]
    for lam, s in enumerate(S):
        model.psd(s, name=f"sigma_lambda[{lam}] >= 0")
    model.eq_herm(hsum(S), sa.rho_B, name="sum sigma_lambda = rho_B")
    tau, Ps = [], []
    for x in range(sa.settings):
        tx = [hsum([S[lam] for lam in np.flatnonzero(strat.table[:, x] == a)], dim=d)
              for a in range(sa.outcomes[x])]
        tau.append(tx)
        for a in range(sa.outcomes[x]):
            P = model.herm(d)
            Ps.append((x, P))
            model.psd(P, name=f"P[{a}|{x}] >= 0")
            model.psd(P - (tx[a] * -1.0 + sa.sigma[x][a]), name=f"P[{a}|{x}] >= sigma - tau")
    obj = None
    for x, P in Ps:
        term = Model.trace(P) * float(sa.weights[x])
        obj = term if obj is None else obj + term
    model.objective(obj)
    sol = model.solve(tol)
    if not sol.result.optimal:
        raise SolverFailure("steering distance", sol.result)
    hidden = _rescale_to(np.array([sol.value(s) for s in S]), sa.rho_B)
    closest = SteeringAssemblage([np.array([hidden[strat.table[:, x] == a].sum(axis=0)
                                            for a in range(sa.outcomes[x])])
                                  for x in range(sa.settings)], sa.weights, tol=1e-7)
    value = sa.distance(closest)
    res = sol.result
    return SteeringReport(value, res.primal_objective, res.dual_objective, closest, hidden,
                          res.diagnostics())


def steering_bounds(sa: SteeringAssemblage, *, tol: SolverTolerances | None = None) -> dict:
    """Three-setting sandwich bounds for the steering distance, as slacks."""
    if sa.settings != 3:
        raise SteeringError("steering_bounds expects three settings")
    S = steering_distance(sa, tol=tol).value
    pairs = [steering_distance(sa.subset(p), tol=tol) for p in CHSH_PAIRS]
    vals = [r.value for r in pairs]
    mean = float(np.mean(vals))
    tau = concat_steering(*[r.closest for r in pairs])
    S_tau = steering_distance(tau, tol=tol).value
    partial = concat_steering(pairs[0].closest, sa.subset([2]))
    S_partial = steering_distance(partial, tol=tol).value
    return {
        "S": S, "pairs": vals, "S_tau": S_tau, "S_partial": S_partial,
        "avg_lower_slack": S - mean,
        "avg_upper_slack": mean + S_tau - S,
        "pair_lower_slack": S - 2 / 3 * vals[0],
        "pair_upper_slack": 2 / 3 * vals[0] + S_partial - S,
    }


# ---- behaviors and nonlocality ---------------------------------------------

class BehaviorError(ValueError):
    pass


@dataclass
class BehaviorTable:
    """``q[x, y, a, b] = q(a, b | x, y)``."""

    q: np.ndarray
    tol: float = 1e-9

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        if self.q.ndim != 4:
            raise BehaviorError("behavior must have shape (m_A, m_B, o_A, o_B)")
        if self.q.min() < -self.tol:
            raise BehaviorError("negative probability")
        if np.max(np.abs(self.q.sum(axis=(2, 3)) - 1)) > self.tol:
            raise BehaviorError("behavior not normalized for every (x, y)")
        if self.signaling() > self.tol:
            raise BehaviorError(f"behavior is signaling by {self.signaling():.3g}")

    @property
    def m_A(self) -> int:
        return self.q.shape[0]

    @property
    def m_B(self) -> int:
        return self.q.shape[1]

    @property
    def o_A(self) -> int:
        return self.q.shape[2]

    @property
    def o_B(self) -> int:
        return self.q.shape[3]

    def signaling(self) -> float:
        pa = self.q.sum(axis=3)  # (x, y, a)
        pb = self.q.sum(axis=2)  # (x, y, b)
        return float(max(np.max(np.abs(pa - pa[:, :1])), np.max(np.abs(pb - pb[:1]))))

    def marginal_A(self) -> np.ndarray:
        return self.q.sum(axis=3)[:, 0]

    def marginal_B(self) -> np.ndarray:
        return self.q.sum(axis=2)[0]

    def correlators(self) -> np.ndarray:
        """``<A_x B_y>`` for dichotomic outcomes labelled +1, -1."""
        if self.o_A != 2 or self.o_B != 2:
            raise BehaviorError("correlators need two outcomes per party")
        sign = np.array([[1, -1], [-1, 1]])
        return np.einsum("xyab,ab->xy", self.q, sign)

    def subset_A(self, idx: Sequence[int]) -> "BehaviorTable":
        return BehaviorTable(self.q[list(idx)], self.tol)

    def distance(self, other: "BehaviorTable") -> float:
        return 0.5 * float(np.abs(self.q - other.q).sum() / (self.m_A * self.m_B))

    def to_json(self) -> str:
        return json.dumps({"q": self.q.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "BehaviorTable":
        return cls(np.array(json.loads(text)["q"], dtype=float))


def concat_behaviors(*parts: BehaviorTable) -> BehaviorTable:
    """Stack Alice's settings; Bob's settings are shared."""
    return BehaviorTable(np.concatenate([p.q for p in parts], axis=0), max(p.tol for p in parts))


def behavior_from_state(state, alice: WeightedAssemblage, bob: WeightedAssemblage) -> BehaviorTable:
    rho = as_hermitian(state)
    if alice.outcomes.count(alice.outcomes[0]) != alice.settings or \
            bob.outcomes.count(bob.outcomes[0]) != bob.settings:
        raise BehaviorError("each party needs a common outcome count")
    q = np.zeros((alice.settings, bob.settings, alice.outcomes[0], bob.outcomes[0]))
    for x, A in enumerate(alice.measurements):
        for y, B in enumerate(bob.measurements):
            for a, ea in enumerate(A.effects):
                for b, eb in enumerate(B.effects):
                    q[x, y, a, b] = np.real(np.trace(kron(ea, eb) @ rho))
    return BehaviorTable(np.clip(q, 0, None), tol=1e-8)


def local_deterministic(alice_out: Sequence[int], bob_out: Sequence[int], o_A: int = 2, o_B: int = 2) -> BehaviorTable:
    q = np.zeros((len(alice_out), len(bob_out), o_A, o_B))
    for x, a in enumerate(alice_out):
        for y, b in enumerate(bob_out):
            q[x, y, a, b] = 1.0
    return BehaviorTable(q)


def independent_rows(A: np.ndarray, b: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Drop linearly dependent equality rows; raise if the dropped rows are inconsistent."""
    if not len(A):
        return A, b
    _, R, piv = scipy.linalg.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > tol * max(diag[0], 1.0)))
    keep = np.sort(piv[:rank])
    sol, *_ = np.linalg.lstsq(A[keep], b[keep], rcond=None)
    if np.max(np.abs(A @ sol - b)) > 1e-8:
        raise BehaviorError("equality constraints are inconsistent")
    return A[keep], b[keep]


@dataclass
class NonlocalityReport:
    value: float
    solver_value: float
    dual_bound: float
    closest: BehaviorTable = field(repr=False)
    weights: np.ndarray = field(repr=False)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"value": self.value, "solver_value": self.solver_value,
                "dual_bound": self.dual_bound, "closest": self.closest.q.tolist(),
                "diagnostics": self.diagnostics}


def _vertex_tensor(m_A, m_B, o_A, o_B, cap) -> np.ndarray:
    """``D[k, x, y, a, b]`` for every product deterministic strategy ``k``."""
    sa = DeterministicStrategySet((o_A,) * m_A, cap=cap)
    sb = DeterministicStrategySet((o_B,) * m_B, cap=cap)
    if len(sa) * len(sb) > cap:
        raise BehaviorError(f"{len(sa) * len(sb)} local vertices exceed the cap of {cap}")
    va = np.eye(o_A)[sa.table]  # (la, x, a)
    vb = np.eye(o_B)[sb.table]  # (lb, y, b)
    D = np.einsum("ixa,jyb->ijxyab", va, vb)
    return D.reshape(len(sa) * len(sb), m_A, m_B, o_A, o_B)


def _solve_lp(model: Model, what: str, tol):
    sol = model.solve(tol)
    if not sol.result.optimal:
        raise SolverFailure(what, sol.result)
    return sol


def nonlocality_distance(q: BehaviorTable, *, tol: SolverTolerances | None = None,
                         cap: int = ENUMERATION_CAP) -> NonlocalityReport:
    """Consistent classical trace distance to the local set, by LP."""
    D = _vertex_tensor(q.m_A, q.m_B, q.o_A, q.o_B, cap)
    K = D.shape[0]
    n_entries = q.q.size
    model = Model()
    pi = model.scalars(K)
    s = model.scalars(n_entries)
    Dm = D.reshape(K, n_entries).T  # t = Dm @ pi
    qv = q.q.ravel()
    exprs = [SExpr(np.array([c]), np.ones(1)) for c in pi]
    for i in range(n_entries):
        nz = np.flatnonzero(Dm[i])
        t_i = SExpr(pi[nz], Dm[i, nz])
        s_i = SExpr(np.array([s[i]]), np.ones(1))
        exprs.append(s_i - t_i + qv[i])  # s >= t - q
        exprs.append(s_i + t_i - qv[i])  # s >= q - t
    model.nonneg(exprs, name="pi >= 0 and |q - t| <= s")
    # consistency: both one-party marginals of t equal those of q
    rows, rhs = [], []
    mA = D.sum(axis=4)  # (K, x, y, a)
    mB = D.sum(axis=3)  # (K, x, y, b)
    qa, qb = q.q.sum(axis=3), q.q.sum(axis=2)
    for x, y, a in itertools.product(range(q.m_A), range(q.m_B), range(q.o_A)):
        rows.append(mA[:, x, y, a]); rhs.append(qa[x, y, a])
    for x, y, b in itertools.product(range(q.m_A), range(q.m_B), range(q.o_B)):
        rows.append(mB[:, x, y, b]); rhs.append(qb[x, y, b])
    Aeq, beq = independent_rows(np.array(rows), np.array(rhs))
    for row, r in zip(Aeq, beq):
        nz = np.flatnonzero(row)
        model.eq(SExpr(pi[nz], row[nz]), float(r), name="marginal consistency")
    w = 0.5 / (q.m_A * q.m_B)
    model.objective(SExpr(s, np.full(n_entries, w)))
    sol = _solve_lp(model, "nonlocality distance", tol)
    weights = np.clip(sol.result.x[pi], 0, None)
    t = np.einsum("k,kxyab->xyab", weights, D)
    t /= t.sum(axis=(2, 3), keepdims=True)
    closest = BehaviorTable(t, tol=1e-6)
    return NonlocalityReport(q.distance(closest), sol.result.primal_objective,
                             sol.result.dual_objective, closest, weights, sol.result.diagnostics())


def nonlocality_bounds(q: BehaviorTable, *, tol: SolverTolerances | None = None) -> dict:
    """Three-setting sandwich bounds on Alice's side, as slacks."""
    if q.m_A != 3:
        raise BehaviorError("nonlocality_bounds expects three settings for Alice")
    N = nonlocality_distance(q, tol=tol).value
    pairs = [nonlocality_distance(q.subset_A(p), tol=tol) for p in CHSH_PAIRS]
    vals = [r.value for r in pairs]
    mean = float(np.mean(vals))
    t = concat_behaviors(*[r.closest for r in pairs])
    N_t = nonlocality_distance(t, tol=tol).value
    partial = concat_behaviors(pairs[0].closest, q.subset_A([2]))
    N_partial = nonlocality_distance(partial, tol=tol).value
    return {
        "N": N, "pairs": vals, "N_t": N_t, "N_partial": N_partial,
        "avg_lower_slack": N - mean,
        "avg_upper_slack": mean + N_t - N,
        "pair_lower_slack": N - 2 / 3 * vals[0],
        "pair_upper_slack": 2 / 3 * vals[0] + N_partial - N,
    }


def no_signaling_value(coef: np.ndarray, *, tol: SolverTolerances | None = None) -> float:
    """max of ``sum_xy coef[x, y] <A_x B_y>`` over no-signaling dichotomic behaviors."""
    m_A, m_B = coef.shape
    n = m_A * m_B * 4
    model = Model()
    v = model.scalars(n)
    idx = np.arange(n).reshape(m_A, m_B, 2, 2)
    model.nonneg([SExpr(np.array([c]), np.ones(1)) for c in v], name="q >= 0")
    rows, rhs = [], []
    for x, y in itertools.product(range(m_A), range(m_B)):
        r = np.zeros(n); r[idx[x, y].ravel()] = 1
        rows.append(r); rhs.append(1.0)
    for x, a in itertools.product(range(m_A), range(2)):
        for y in range(1, m_B):
            r = np.zeros(n); r[idx[x, y, a]] = 1; r[idx[x, 0, a]] = -1
            rows.append(r); rhs.append(0.0)
    for y, b in itertools.product(range(m_B), range(2)):
        for x in range(1, m_A):
            r = np.zeros(n); r[idx[x, y, :, b]] = 1; r[idx[0, y, :, b]] = -1
            rows.append(r); rhs.append(0.0)
    Aeq, beq = independent_rows(np.array(rows), np.array(rhs))
    for row, r in zip(Aeq, beq):
        nz = np.flatnonzero(row)
        model.eq(SExpr(v[nz], row[nz]), float(r), name="normalization / no-signaling")
    sign = np.array([[1, -1], [-1, 1]])
    c = np.einsum("xy,ab->xyab", coef, sign).ravel()
    model.objective(SExpr(v, c), sense="max")
    return float(_solve_lp(model, "no-signaling value", tol).result.primal_objective)


# ---- CHSH --------------------------------------------------------------------

def _check_observable(A: np.ndarray) -> np.ndarray:
    A = as_hermitian(A)
    ev = eigvalsh(A)
    if ev.min() < -1 - 1e-9 or ev.max() > 1 + 1e-9:
        raise ValueError("observable eigenvalues must lie in [-1, 1]")
    return A


def correlator_matrix(state, alice_obs: Sequence, bob_obs: Sequence) -> np.ndarray:
    rho = as_hermitian(state)
    A = [_check_observable(a) for a in alice_obs]
    B = [_check_observable(b) for b in bob_obs]
    return np.array([[np.real(np.trace(rho @ kron(a, b))) for b in B] for a in A])


def chsh_values(state, alice_obs: Sequence, bob_obs: Sequence) -> tuple[float, float, float, float]:
    """(CHSH_12, CHSH_13, CHSH_23, average) for three Alice and two Bob observables."""
    if len(alice_obs) != 3 or len(bob_obs) != 2:
        raise ValueError("need three observables for Alice and two for Bob")
    E = correlator_matrix(state, alice_obs, bob_obs)
    vals = [float(np.sum(chsh_coefficients(i, j) * E)) for i, j in CHSH_PAIRS]
    return vals[0], vals[1], vals[2], float(np.mean(vals))


def bloch_observable(r: Sequence[float]) -> np.ndarray:
    r = np.asarray(r, float)
    return r[0] * PAULI["X"] + r[1] * PAULI["Y"] + r[2] * PAULI["Z"]


def _sign_observable(K: np.ndarray) -> np.ndarray:
    """Dichotomic observable maximizing ``Tr[A K]``: the sign of K."""
    w, v = np.linalg.eigh(_herm(K))
    return (v * np.where(w >= 0, 1.0, -1.0)) @ v.conj().T


@dataclass
class ChshOptimum:
    value: float
    state: np.ndarray
    alice: list
    bob: list
    restart_values: list

    def to_dict(self) -> dict:
        def c(op):
            return [np.real(op).tolist(), np.imag(op).tolist()]
        return {"value": self.value, "restart_values": self.restart_values,
                "alice": [c(a) for a in self.alice], "bob": [c(b) for b in self.bob],
                "state": c(self.state)}


def bell_operator(coef: np.ndarray, alice: Sequence, bob: Sequence) -> np.ndarray:
    return sum(coef[x, y] * kron(alice[x], bob[y]) for x in range(len(alice)) for y in range(len(bob)))


def seesaw(coef: np.ndarray, rng: np.random.Generator, *, iters: int = 500, tol: float = 1e-13):
    """One seesaw run on two qubits from random Bloch-vector observables."""
    m_A, m_B = coef.shape

    def rand_obs():
        r = rng.normal(size=3)
        return bloch_observable(r / np.linalg.norm(r))

    A = [rand_obs() for _ in range(m_A)]
    B = [rand_obs() for _ in range(m_B)]
    prev = -np.inf
    for _ in range(iters):
        w, v = np.linalg.eigh(bell_operator(coef, A, B))
        psi = v[:, -1]
        rho = np.outer(psi, psi.conj())
        for x in range(m_A):
            K = partial_trace_second(rho @ kron(np.eye(2), sum(coef[x, y] * B[y] for y in range(m_B))), 2)
            A[x] = _sign_observable(K)
        for y in range(m_B):
            K = partial_trace_first(rho @ kron(sum(coef[x, y] * A[x] for x in range(m_A)), np.eye(2)), 2)
            B[y] = _sign_observable(K)
        val = float(eigvalsh(bell_operator(coef, A, B))[-1])
        if val - prev < tol:
            break
        prev = val
    w, v = np.linalg.eigh(bell_operator(coef, A, B))
    psi = v[:, -1]
    return float(w[-1]), np.outer(psi, psi.conj()), A, B


def maximize_avg_chsh(seed: int = 0, restarts: int = 20, *, single_pair: bool = False,
                      iters: int = 500) -> ChshOptimum:
    """Seesaw search for the largest quantum value of the averaged CHSH functional.

    With ``single_pair`` only ``CHSH_(1,2)`` is maximized.  Each restart
    draws from its own child seed, so results do not depend on run order.
    """
    coef = chsh_coefficients(0, 1) if single_pair else avg_chsh_coefficients()
    seeds = np.random.SeedSequence(seed).spawn(restarts)
    best, vals = None, []
    for s in seeds:
        val, rho, A, B = seesaw(coef, np.random.default_rng(s), iters=iters)
        vals.append(val)
        if best is None or val > best[0]:
            best = (val, rho, A, B)
    val, rho, A, B = best
    # the reported value is evaluated directly on the returned configuration
    E = correlator_matrix(rho, A, B)
    return ChshOptimum(float(np.sum(coef * E)), rho, A, B, vals)


def maximally_entangled(d: int = 2) -> np.ndarray:
    psi = np.eye(d).ravel() / np.sqrt(d)
    return np.outer(psi, psi.conj()).astype(complex)
