"""Diamond-distance incompatibility quantifier and joint measurability.

The quantifier of a weighted assemblage ``M`` is

    I(M) = min_{F jointly measurable} sum_x p(x) D(Lambda_{M_x}, Lambda_{F_x})

where ``D`` is half the diamond norm distance of the measure-and-prepare
channels ``rho -> sum_a Tr[M_a rho] |a><a|``.  Two equivalent programs
are available:

* ``primal``: variables a_x, Z_{a|x}, G_lam with
  ``Z_{a|x} >= M_{a|x} - F_{a|x}``, ``Z_{a|x} >= 0``,
  ``a_x 1 >= sum_a Z_{a|x}``, ``F = sum_lam v G_lam``, ``sum_lam G_lam = 1``.
  Because the channel output is classical, the joint operator Z_x can be
  taken block diagonal in the outcome register; ``full_z=True`` keeps the
  general ``Z_x >= sum_a |a><a| (x) (M - F)^T`` form for cross-checks.
* ``dual``: maximize ``sum_x p(x) Tr[M_{a|x} C_{a|x}] - Tr L`` subject to
  ``L >= sum_x p(x) C_{lam(x)|x}`` for all lam, ``0 <= C_{a|x} <= rho_x``,
  ``Tr rho_x = 1``.  The parent POVM is read off the multipliers of the
  lam-constraints.  Much smaller when there are many strategies.

Either way the report carries an exactly feasible dual certificate, so
``dual_objective`` is a rigorous lower bound, and ``primal_objective`` is
the distance from ``M`` to the returned jointly measurable witness.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .assemblage import Povm, PovmError, WeightedAssemblage, parent_povm_simulation
from .linalg import kron, partial_trace_first, psd_sqrt
from .solver import HExpr, Model, SolverTolerances, hsum, scaled_identity
from .strategies import ENUMERATION_CAP, DeterministicStrategySet

log = logging.getLogger(__name__)

NEGATIVE_VALUE_TOL = 1e-9
# primal/dual formulation switch: number of real parent-POVM coordinates
DUAL_THRESHOLD = 300


class SolverFailure(RuntimeError):
    def __init__(self, what: str, result):
        super().__init__(f"{what}: solver returned {result.status} ({result.message})")
        self.result = result


@dataclass
class DualCertificate:
    C: list  # per setting x: array (o_x, d, d)
    rho: np.ndarray  # (m, d, d)
    L: np.ndarray  # (d, d)

    def to_dict(self) -> dict:
        def enc(a):
            a = np.asarray(a)
            return {"re": a.real.tolist(), "im": a.imag.tolist()}
        return {"C": [[enc(c) for c in cx] for cx in self.C],
                "rho": [enc(r) for r in self.rho], "L": enc(self.L)}


def certificate_objective(M: WeightedAssemblage, cert: DualCertificate) -> float:
    val = 0.0
    for x in range(M.settings):
        val += M.weights[x] * sum(np.real(np.trace(M[x][a] @ cert.C[x][a])) for a in range(M[x].outcomes))
    return float(val - np.real(np.trace(cert.L)))


def certificate_violation(M: WeightedAssemblage, cert: DualCertificate,
                          strat: DeterministicStrategySet | None = None) -> float:
    """Largest violation of the dual constraints (0 for a feasible certificate)."""
    strat = strat or DeterministicStrategySet(M.outcomes)
    worst = 0.0
    for x in range(M.settings):
        worst = max(worst, abs(np.real(np.trace(cert.rho[x])) - 1.0))
        for a in range(M[x].outcomes):
            c = cert.C[x][a]
            worst = max(worst, -np.linalg.eigvalsh(c).min(), -np.linalg.eigvalsh(cert.rho[x] - c).min())
    X = _strategy_sums(M, cert.C, strat)
    worst = max(worst, -np.linalg.eigvalsh(cert.L[None] - X).min())
    return float(max(worst, 0.0))


def _strategy_sums(M: WeightedAssemblage, C: list, strat: DeterministicStrategySet) -> np.ndarray:
    """``sum_x p(x) C_{lam(x)|x}`` for every strategy, shape (|Lambda|, d, d)."""
    out = np.zeros((len(strat), M.dim, M.dim), dtype=complex)
    for x in range(M.settings):
        out += M.weights[x] * np.asarray(C[x])[strat.table[:, x]]
    return out


def _herm(a):
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def _clip_psd(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(_herm(a))
    return (v * np.clip(w, 0.0, None)) @ v.conj().T


def repair_certificate(M: WeightedAssemblage, cert: DualCertificate,
                       strat: DeterministicStrategySet) -> DualCertificate:
    """Nearby exactly feasible certificate (up to eigensolver rounding).

    C is clipped to the PSD cone, rho is shifted by the worst violation of
    ``C <= rho`` and renormalized together with C, and L is raised until it
    dominates every strategy sum.
    """
    d = M.dim
    C = [np.array([_clip_psd(c) for c in cx]) for cx in cert.C]
    rho = np.array([_clip_psd(r) for r in cert.rho])
    for x in range(M.settings):
        shift = max(0.0, max(-np.linalg.eigvalsh(rho[x] - c).min() for c in C[x]))
        r = rho[x] + shift * np.eye(d)
        tr = np.real(np.trace(r))
        rho[x] = r / tr
        C[x] = C[x] / tr
    L = _herm(np.asarray(cert.L, dtype=complex))
    X = _strategy_sums(M, C, strat)
    excess = np.linalg.eigvalsh(X - L[None]).max()
    if excess > 0:
        L = L + excess * np.eye(d)
    return DualCertificate(C, rho, L)


def repair_parent(G: np.ndarray) -> np.ndarray:
    """Clip to PSD and renormalize so that the effects sum to the identity."""
    G = np.array([_clip_psd(g) for g in G])
    S = G.sum(axis=0)
    isq = np.linalg.inv(psd_sqrt(S))
    return np.array([_herm(isq @ g @ isq) for g in G])


@dataclass
class IncompatReport:
    value: float
    primal_objective: float
    dual_objective: float
    gap: float
    closest: WeightedAssemblage
    parent: Povm
    certificate: DualCertificate
    formulation: str
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self, *, certificate: bool = True) -> dict:
        out = {
            "value": self.value,
            "primal_objective": self.primal_objective,
            "dual_objective": self.dual_objective,
            "gap": self.gap,
            "formulation": self.formulation,
            "closest": self.closest.to_dict(),
            "parent": [{"re": g.real.tolist(), "im": g.imag.tolist()} for g in self.parent.effects],
            "diagnostics": self.diagnostics,
        }
        if certificate:
            out["certificate"] = self.certificate.to_dict()
        return out


# ---- program builders --------------------------------------------------------

def add_diamond_blocks(model: Model, M: WeightedAssemblage, F: list, full_z: bool):
    """Blocks bounding D(M_x, F_x) by a_x; returns (a list, W handles, R handles)."""
    d = M.dim
    avars, W, R = [], [], []
    for x in range(M.settings):
        ax = model.scalar()
        avars.append(ax)
        o = M[x].outcomes
        diffs = [F[x][a] * -1.0 + M[x][a] for a in range(o)]  # M - F
        if full_z:
            Z = model.herm(o * d)
            units = np.eye(o)
            J = hsum([diffs[a].map(lambda X, a=a: kron(np.diag(units[a]), X.T), dim=o * d) for a in range(o)])
            W.append(model.psd(Z - J, name=f"Z[{x}] >= J[{x}]"))
            model.psd(Z, name=f"Z[{x}] >= 0")
            trZ = Z.map(lambda X: partial_trace_first(X, o), dim=d)
            R.append(model.psd(scaled_identity(ax, d) - trZ, name=f"a[{x}] bound"))
        else:
            Zs = [model.herm(d) for _ in range(o)]
            W.append([model.psd(Zs[a] - diffs[a], name=f"Z[{a}|{x}] >= M - F") for a in range(o)])
            for a in range(o):
                model.psd(Zs[a], name=f"Z[{a}|{x}] >= 0")
            R.append(model.psd(scaled_identity(ax, d) - hsum(Zs), name=f"a[{x}] bound"))
    return avars, W, R


def weighted_sum(avars, weights):
    out = avars[0] * float(weights[0])
    for a, w in zip(avars[1:], weights[1:]):
        out = out + a * float(w)
    return out


def _parent_variables(model: Model, d: int, strat: DeterministicStrategySet, M: WeightedAssemblage):
    G = [model.herm(d) for _ in range(len(strat))]
    for lam, g in enumerate(G):
        model.psd(g, name=f"G[{lam}] >= 0")
    eq_row = model.eq_herm(hsum(G), np.eye(d), name="sum G = 1")
    F = [[hsum([G[lam] for lam in np.flatnonzero(strat.table[:, x] == a)], dim=d)
          for a in range(M[x].outcomes)] for x in range(M.settings)]
    return G, F, eq_row


def _check_inputs(M: WeightedAssemblage, cap: int) -> DeterministicStrategySet:
    if not len(M):
        raise PovmError("empty assemblage")
    M.require_positive_weights()
    return DeterministicStrategySet(M.outcomes, cap=cap)


def _finish(M, strat, G_raw, cert_raw, upper, solver_res, formulation) -> IncompatReport:
    G = repair_parent(G_raw)
    parent = Povm(G)
    closest = parent_povm_simulation(parent, strat, M.weights)
    cert = repair_certificate(M, cert_raw, strat)
    lower = certificate_objective(M, cert)
    # upper bound: distance to the returned (exactly JM) witness
    solver_value = upper
    upper = diamond_distance(M, closest)
    if upper < -NEGATIVE_VALUE_TOL:
        raise SolverFailure(f"negative quantifier value {upper:.3e}", solver_res)
    value = float(np.clip(upper, 0.0, 1.0))
    diag = solver_res.diagnostics()
    diag["solver_value"] = float(solver_value)
    diag["certificate_violation"] = certificate_violation(M, cert, strat)
    return IncompatReport(value, float(upper), float(lower), float(upper - lower),
                          closest, parent, cert, formulation, diag)


def _solve_primal(M, strat, tol, full_z):
    d = M.dim
    model = Model()
    G, F, eq_row = _parent_variables(model, d, strat, M)
    avars, W, R = add_diamond_blocks(model, M, F, full_z)
    model.objective(weighted_sum(avars, M.weights))
    sol = model.solve(tol)
    if not sol.result.optimal:
        raise SolverFailure("incompatibility primal", sol.result)
    Gv = np.array([sol.value(g) for g in G])
    if full_z:
        C = []
        for x in range(M.settings):
            o = M[x].outcomes
            Wx = sol.dual_herm(W[x]).reshape(o, d, o, d)
            C.append(np.array([Wx[a, :, a, :].T for a in range(o)]) / M.weights[x])
    else:
        C = [np.array([sol.dual_herm(k) for k in W[x]]) / M.weights[x] for x in range(M.settings)]
    rho = np.array([sol.dual_herm(R[x]) / M.weights[x] for x in range(M.settings)])
    L = sol.dual_eq_herm(eq_row, d)
    return Gv, DualCertificate(C, rho, L), sol.result.primal_objective, sol.result


def _solve_dual(M, strat, tol):
    d = M.dim
    model = Model()
    C = [[model.herm(d) for _ in range(M[x].outcomes)] for x in range(M.settings)]
    rho = [model.herm(d) for _ in range(M.settings)]
    L = model.herm(d)
    for x in range(M.settings):
        for a, c in enumerate(C[x]):
            model.psd(c, name=f"C[{a}|{x}] >= 0")
            model.psd(rho[x] - c, name=f"rho[{x}] >= C[{a}|{x}]")
        model.eq(model.trace(rho[x]), 1.0, name=f"Tr rho[{x}] = 1")
    lam_blocks = []
    for lam in range(len(strat)):
        X = hsum([C[x][strat.table[lam, x]] * float(M.weights[x]) for x in range(M.settings)], dim=d)
        lam_blocks.append(model.psd(L - X, name=f"L >= X[{lam}]"))
    obj = None
    for x in range(M.settings):
        for a in range(M[x].outcomes):
            t = model.trace(C[x][a], M[x][a]) * float(M.weights[x])
            obj = t if obj is None else obj + t
    model.objective(obj - model.trace(L), sense="max")
    sol = model.solve(tol)
    if not sol.result.optimal:
        raise SolverFailure("incompatibility dual", sol.result)
    Gv = np.array([sol.dual_herm(k) for k in lam_blocks])
    cert = DualCertificate([np.array([sol.value(c) for c in cx]) for cx in C],
                           np.array([sol.value(r) for r in rho]), sol.value(L))
    # the min-form optimum of this max program is its dual objective
    return Gv, cert, sol.result.dual_objective, sol.result


def incompatibility(M: WeightedAssemblage, *, formulation: str = "auto", full_z: bool = False,
                    tol: SolverTolerances | None = None, cap: int = ENUMERATION_CAP) -> IncompatReport:
    """Diamond-distance incompatibility with closest JM assemblage and certificate."""
    strat = _check_inputs(M, cap)
    if formulation == "auto":
        formulation = "dual" if len(strat) * M.dim ** 2 > DUAL_THRESHOLD and not full_z else "primal"
    if formulation == "primal":
        out = _solve_primal(M, strat, tol, full_z)
    elif formulation == "dual":
        if full_z:
            raise ValueError("full_z only applies to the primal formulation")
        out = _solve_dual(M, strat, tol)
    else:
        raise ValueError(f"unknown formulation {formulation!r}")
    return _finish(M, strat, *out, formulation)


# ---- diamond distance ---------------------------------------------------------

def measure_prepare_distance(M: Povm, N: Povm, *, full_z: bool = False,
                             tol: SolverTolerances | None = None) -> float:
    """Half diamond norm of Lambda_M - Lambda_N for two POVMs."""
    if M.dim != N.dim or M.outcomes != N.outcomes:
        raise PovmError("POVMs must share dimension and outcome count")
    A = WeightedAssemblage([M])
    F = [[HExpr.constant(N[a]) for a in range(N.outcomes)]]
    model = Model()
    avars, _, _ = add_diamond_blocks(model, A, F, full_z)
    model.objective(avars[0])
    sol = model.solve(tol)
    if not sol.result.optimal:
        raise SolverFailure("diamond distance", sol.result)
    return float(sol.result.primal_objective)


def dichotomic_distance(M: Povm, N: Povm) -> float:
    """Closed form for two-outcome POVMs: ||M_0 - N_0||_inf."""
    if M.outcomes != 2 or N.outcomes != 2:
        raise PovmError("closed form needs two-outcome POVMs")
    return float(np.abs(np.linalg.eigvalsh(M[0] - N[0])).max())


def diamond_distance(M: WeightedAssemblage, N: WeightedAssemblage, *,
                     tol: SolverTolerances | None = None) -> float:
    """sum_x p(x) D(Lambda_{M_x}, Lambda_{N_x})."""
    if M.dim != N.dim or M.outcomes != N.outcomes:
        raise PovmError("assemblages must share dimension and outcome grid")
    if not np.allclose(M.weights, N.weights, atol=1e-12):
        raise PovmError("assemblages must share the weights")
    return float(sum(w * measure_prepare_distance(M[x], N[x], tol=tol)
                     for x, w in enumerate(M.weights) if w > 0))


# ---- joint measurability ------------------------------------------------------

@dataclass
class JmVerdict:
    jointly_measurable: bool
    margin: float
    parent: Povm | None
    diagnostics: dict = field(default_factory=dict)

    def __bool__(self):
        return self.jointly_measurable


def is_jointly_measurable(M: WeightedAssemblage, *, margin_tol: float = 1e-8,
                          tol: SolverTolerances | None = None, cap: int = ENUMERATION_CAP) -> JmVerdict:
    """JM test by maximizing the smallest eigenvalue ``t`` over all exact parents.

    ``G_lam >= t 1``, ``sum G = 1``, ``sum_lam v G_lam = M_{a|x}``; the
    assemblage is JM iff the optimal ``t`` is nonnegative (up to
    ``margin_tol``).  This program is always strictly feasible in ``t``,
    so no infeasibility detection is needed.
    """
    if not len(M):
        raise PovmError("empty assemblage")
    strat = DeterministicStrategySet(M.outcomes, cap=cap)
    d = M.dim
    model = Model()
    t = model.scalar()
    G = [model.herm(d) for _ in range(len(strat))]
    for lam, g in enumerate(G):
        model.psd(g - scaled_identity(t, d), name=f"G[{lam}] >= t")
    model.eq_herm(hsum(G), np.eye(d), name="sum G = 1")
    for x in range(M.settings):
        # the last outcome follows from normalization
        for a in range(M[x].outcomes - 1):
            F = hsum([G[lam] for lam in np.flatnonzero(strat.table[:, x] == a)], dim=d)
            model.eq_herm(F, M[x][a], name=f"marginal[{a}|{x}]")
    model.objective(t, sense="max")
    sol = model.solve(tol)
    if not sol.result.optimal:
        raise SolverFailure("joint measurability", sol.result)
    margin = float(sol.result.primal_objective)
    diag = sol.result.diagnostics()
    if margin < -margin_tol:
        return JmVerdict(False, margin, None, diag)
    parent = Povm(repair_parent(np.array([sol.value(g) for g in G])))
    return JmVerdict(True, margin, parent, diag)


# ---- subsets ------------------------------------------------------------------

def closest_jm_subset(M: WeightedAssemblage, subset: Sequence[int], **kw) -> WeightedAssemblage:
    """Replace the settings in ``subset`` by the closest JM approximation of M_subset."""
    idx = sorted(set(int(i) for i in subset))
    if not idx:
        raise ValueError("subset must be nonempty")
    if len(idx) == 1:
        return M
    rep = incompatibility(M.subset(idx), **kw)
    return M.replace(idx, rep.closest)
