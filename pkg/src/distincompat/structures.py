"""Incompatibility gain, subset bounds and the three-setting decomposition.

Notation: ``I`` is :func:`incompatibility`, ``M_S`` the restriction of an
assemblage to the settings in ``S`` (weights renormalized), ``M#_S`` its
closest jointly measurable approximation and ``M^{#S}`` the assemblage with
the settings of ``S`` replaced by ``M#_S``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .assemblage import Povm, WeightedAssemblage, append
from .incompat import (SolverFailure, add_diamond_blocks, weighted_sum, closest_jm_subset,
                       diamond_distance, incompatibility)
from .linalg import psd_sqrt
from .solver import Model, SExpr, SolverTolerances, hsum, scaled_identity
from .strategies import DeterministicStrategySet


def _require_uniform(M: WeightedAssemblage, what: str) -> None:
    if not np.allclose(M.weights, 1.0 / len(M), atol=1e-12):
        raise ValueError(f"{what} needs uniformly weighted settings")


@dataclass
class SubsetFamily:
    """Closest JM approximations of a family of setting subsets."""

    subsets: list
    reports: list  # IncompatReport per subset
    N: WeightedAssemblage  # concatenation of the M#_S
    G: WeightedAssemblage  # concatenation of the parent POVMs

    @property
    def values(self) -> list[float]:
        return [r.value for r in self.reports]


def subset_family(M: WeightedAssemblage, subsets: Sequence[Sequence[int]], **kw) -> SubsetFamily:
    """Build ``N = M#_S1 ++ M#_S2 ++ ...`` and the parent assemblage ``G``.

    Both are uniformly weighted over their settings.
    """
    reports = [incompatibility(M.subset(S), **kw) for S in subsets]
    n_meas = [m for r in reports for m in r.closest.measurements]
    g_meas = [r.parent for r in reports]
    return SubsetFamily([tuple(S) for S in subsets], reports,
                        WeightedAssemblage(n_meas), WeightedAssemblage(g_meas))


# ---- incompatibility gain ---------------------------------------------------

@dataclass
class GainReport:
    delta: float
    I_before: float
    I_after: float
    I_N: float
    I_G: float
    subset_values: dict
    hypothesis_holds: bool
    slack_gain_vs_N: float  # I(N) - delta
    slack_N_vs_G: float  # I(G) - I(N)
    N: WeightedAssemblage = field(repr=False)
    G: WeightedAssemblage = field(repr=False)
    order: tuple = ()

    def to_dict(self) -> dict:
        return {
            "delta": self.delta, "I_before": self.I_before, "I_after": self.I_after,
            "I_N": self.I_N, "I_G": self.I_G,
            "subset_values": {",".join(map(str, k)): v for k, v in self.subset_values.items()},
            "hypothesis_holds": self.hypothesis_holds,
            "slack_gain_vs_N": self.slack_gain_vs_N, "slack_N_vs_G": self.slack_N_vs_G,
            "order": list(self.order),
        }


def incompatibility_gain(base: WeightedAssemblage, added: Povm, *, with_bounds: bool = True,
                         tol: SolverTolerances | None = None) -> GainReport:
    """Gain ``I(base ++ added) - I(base)`` with the N and G upper bounds.

    ``N`` concatenates the closest JM approximations of all ``m``-subsets of
    the ``m + 1`` settings (``base`` first), ``G`` their parent POVMs.
    """
    full = append(base, added)
    m = len(base)
    before = incompatibility(base, tol=tol)
    after = incompatibility(full, tol=tol)
    delta = after.value - before.value
    if not with_bounds:
        nan = float("nan")
        return GainReport(delta, before.value, after.value, nan, nan, {}, False, nan, nan,
                          None, None, tuple(range(m + 1)))
    subsets = list(itertools.combinations(range(m + 1), m))
    fam = subset_family(full, subsets, tol=tol)
    values = dict(zip(fam.subsets, fam.values))
    hyp = values[tuple(range(m))] >= max(v for S, v in values.items() if S != tuple(range(m))) - 1e-9
    I_N = incompatibility(fam.N, tol=tol).value
    I_G = incompatibility(fam.G, tol=tol).value
    return GainReport(delta, before.value, after.value, I_N, I_G, values, bool(hyp),
                      I_N - delta, I_G - I_N, fam.N, fam.G, tuple(range(m + 1)))


def check_result1(M3: WeightedAssemblage, *, tol: SolverTolerances | None = None) -> GainReport:
    """Gain bound ``dI <= I(N) <= I(G)`` for three settings.

    The settings are reordered so that the most incompatible pair comes
    first, which makes the hypothesis of the bound hold.
    """
    if len(M3) != 3:
        raise ValueError("expected three settings")
    _require_uniform(M3, "check_result1")
    pairs = [(0, 1), (0, 2), (1, 2)]
    vals = [incompatibility(M3.subset(p), tol=tol).value for p in pairs]
    best = pairs[int(np.argmax(vals))]
    rest = [x for x in range(3) if x not in best][0]
    order = (best[0], best[1], rest)
    base = WeightedAssemblage([M3[best[0]], M3[best[1]]])
    rep = incompatibility_gain(base, M3[rest], tol=tol)
    rep.order = order
    return rep


# ---- subset bounds ----------------------------------------------------------

@dataclass
class SubsetBounds:
    I: float
    subset: tuple
    I_subset: float
    weight: float  # p(C)
    I_partial: float  # I(M^{#C})
    lower_slack: float  # I - p(C) I(M_C)
    upper_slack: float  # p(C) I(M_C) + I(M^{#C}) - I
    average: dict = field(default_factory=dict)  # m = 3 sandwich, if computed

    def to_dict(self) -> dict:
        return {"I": self.I, "subset": list(self.subset), "I_subset": self.I_subset,
                "weight": self.weight, "I_partial": self.I_partial,
                "lower_slack": self.lower_slack, "upper_slack": self.upper_slack,
                "average": self.average}

    @property
    def min_slack(self) -> float:
        s = [self.lower_slack, self.upper_slack]
        s += [v for k, v in self.average.items() if k.endswith("slack")]
        return float(min(s))


def check_subset_bounds(M: WeightedAssemblage, C: Sequence[int], *, average: bool | None = None,
                        tol: SolverTolerances | None = None) -> SubsetBounds:
    """``p(C) I(M_C) <= I(M) <= p(C) I(M_C) + I(M^{#C})``.

    With three uniformly weighted settings (or ``average=True``) the
    average-subset sandwich over all pairs is checked as well.
    """
    idx = tuple(sorted(set(int(c) for c in C)))
    if not idx or len(idx) >= len(M):
        raise ValueError("C must be a nonempty proper subset of the settings")
    I = incompatibility(M, tol=tol).value
    I_C = incompatibility(M.subset(idx), tol=tol).value if len(idx) > 1 else 0.0
    pC = float(M.weights[list(idx)].sum())
    partial = closest_jm_subset(M, idx, tol=tol)
    I_partial = incompatibility(partial, tol=tol).value
    out = SubsetBounds(I, idx, I_C, pC, I_partial, I - pC * I_C, pC * I_C + I_partial - I)
    if average is None:
        average = len(M) == 3 and np.allclose(M.weights, 1 / 3)
    if average:
        out.average = average_subset_bounds(M, len(M) - 1, tol=tol, I_total=I)
    return out


def average_subset_bounds(M: WeightedAssemblage, k: int, *, tol: SolverTolerances | None = None,
                          I_total: float | None = None, with_parents: bool = False) -> dict:
    """Sandwich ``mean_S I(M_S) <= I(M) <= mean_S I(M_S) + I(N)`` over all k-subsets."""
    _require_uniform(M, "average_subset_bounds")
    subsets = list(itertools.combinations(range(len(M)), k))
    fam = subset_family(M, subsets, tol=tol)
    mean = float(np.mean(fam.values))
    I = incompatibility(M, tol=tol).value if I_total is None else I_total
    I_N = incompatibility(fam.N, tol=tol).value
    out = {"k": k, "mean_subset": mean, "I": I, "I_N": I_N,
           "lower_slack": I - mean, "upper_slack": mean + I_N - I}
    if with_parents:
        out["I_G"] = incompatibility(fam.G, tol=tol).value
        out["parent_slack"] = out["I_G"] - I_N
    return out


# ---- decomposition over JM^conv / JM^pair -----------------------------------

PAIRS = ((0, 1), (0, 2), (1, 2))


@dataclass
class DecompositionReport:
    I_total: float
    I_gen: float
    I_pair: float
    I_hollow: float
    M_conv: WeightedAssemblage = field(repr=False)
    M_pair: WeightedAssemblage = field(repr=False)
    hull_weights: np.ndarray = field(default=None, repr=False)

    @property
    def total_bound(self) -> float:
        return self.I_gen + self.I_pair + self.I_hollow

    @property
    def slack(self) -> float:
        return self.total_bound - self.I_total

    def to_dict(self) -> dict:
        return {"I_total": self.I_total, "I_gen": self.I_gen, "I_pair": self.I_pair,
                "I_hollow": self.I_hollow, "sum": self.total_bound, "slack": self.slack,
                "hull_weights": None if self.hull_weights is None else list(map(float, self.hull_weights)),
                "M_conv": self.M_conv.to_dict(), "M_pair": self.M_pair.to_dict()}


def _pair_parent(model: Model, M: WeightedAssemblage, s: int, t: int, scale=None):
    """Parent for settings (s, t); sum of parent effects is ``scale * 1`` (or 1)."""
    d = M.dim
    strat = DeterministicStrategySet((M[s].outcomes, M[t].outcomes))
    G = [model.herm(d) for _ in range(len(strat))]
    for lam, g in enumerate(G):
        model.psd(g, name=f"G{s}{t}[{lam}] >= 0")
    total = hsum(G)
    if scale is None:
        model.eq_herm(total, np.eye(d), name=f"sum G{s}{t} = 1")
    else:
        model.eq_herm(total - scaled_identity(scale, d), name=f"sum G{s}{t} = w 1")
    marg = {}
    for i, x in enumerate((s, t)):
        marg[x] = [hsum([G[lam] for lam in np.flatnonzero(strat.table[:, i] == a)], dim=d)
                   for a in range(M[x].outcomes)]
    return marg


def _normalize_effects(effs: np.ndarray) -> np.ndarray:
    effs = np.array([0.5 * (e + e.conj().T) for e in effs])
    w, v = np.linalg.eigh(effs)
    effs = np.einsum("aij,aj,akj->aik", v, np.clip(w, 0, None), v.conj())
    isq = np.linalg.inv(psd_sqrt(effs.sum(axis=0)))
    return np.array([isq @ e @ isq for e in effs])


def _witness(M: WeightedAssemblage, F, sol) -> WeightedAssemblage:
    meas = []
    for x in range(len(M)):
        effs = np.array([sol.value(f) for f in F[x]])
        meas.append(Povm(_normalize_effects(effs)))
    return WeightedAssemblage(meas, M.weights)


def _solve_or_raise(model: Model, what: str, tol):
    sol = model.solve(tol)
    if not sol.result.optimal:
        raise SolverFailure(what, sol.result)
    return sol


def closest_conv(M: WeightedAssemblage, tol: SolverTolerances | None = None):
    """min D(M, F) over F in the convex hull of the pair-compatible sets.

    Each hull component is kept subnormalized (``sum_a J_{a|x} = w 1``) so
    the hull weights enter linearly.
    """
    if len(M) != 3:
        raise ValueError("expected three settings")
    d = M.dim
    model = Model()
    w = model.scalars(3)
    wexpr = [SExpr(np.array([w[k]]), np.ones(1)) for k in range(3)]
    model.nonneg(wexpr, name="hull weights >= 0")
    model.eq(SExpr(w, np.ones(3)), 1.0, name="sum w = 1")
    F = [[None] * M[x].outcomes for x in range(3)]
    for k, (s, t) in enumerate(PAIRS):
        marg = _pair_parent(model, M, s, t, scale=wexpr[k])
        u = [x for x in range(3) if x not in (s, t)][0]
        free = [model.herm(d) for _ in range(M[u].outcomes)]
        for a, e in enumerate(free):
            model.psd(e, name=f"J{s}{t}[{a}|{u}] >= 0")
        model.eq_herm(hsum(free) - scaled_identity(wexpr[k], d), name=f"sum J{s}{t}[.|{u}] = w 1")
        marg[u] = free
        for x in range(3):
            for a in range(M[x].outcomes):
                F[x][a] = marg[x][a] if F[x][a] is None else F[x][a] + marg[x][a]
    avars, _, _ = add_diamond_blocks(model, M, F, full_z=False)
    model.objective(weighted_sum(avars, M.weights))
    sol = _solve_or_raise(model, "closest hull element", tol)
    return sol.result.primal_objective, _witness(M, F, sol), sol.result.x[w]


def closest_pairwise(M: WeightedAssemblage, tol: SolverTolerances | None = None):
    """min D(M, F) over F with every pair of settings jointly measurable."""
    if len(M) != 3:
        raise ValueError("expected three settings")
    model = Model()
    m01 = _pair_parent(model, M, 0, 1)
    m02 = _pair_parent(model, M, 0, 2)
    m12 = _pair_parent(model, M, 1, 2)
    F = [m01[0], m01[1], m02[2]]
    # consistency of the other two parents; the last outcome follows from normalization
    for marg, x in ((m02, 0), (m12, 1), (m12, 2)):
        for a in range(M[x].outcomes - 1):
            model.eq_herm(marg[x][a] - F[x][a], name=f"pair marginal [{a}|{x}]")
    avars, _, _ = add_diamond_blocks(model, M, F, full_z=False)
    model.objective(weighted_sum(avars, M.weights))
    sol = _solve_or_raise(model, "closest pairwise compatible element", tol)
    return sol.result.primal_objective, _witness(M, F, sol)


def decompose(M3: WeightedAssemblage, *, tol: SolverTolerances | None = None) -> DecompositionReport:
    """Genuine, pairwise and hollow parts bounding I(M3) from above."""
    if len(M3) != 3:
        raise ValueError("expected three settings")
    M3.require_positive_weights()
    I_total = incompatibility(M3, tol=tol).value
    _, M_conv, hull = closest_conv(M3, tol)
    I_gen = diamond_distance(M3, M_conv, tol=tol)
    _, M_pair = closest_pairwise(M_conv, tol)
    I_pair = diamond_distance(M_conv, M_pair, tol=tol)
    I_hol = incompatibility(M_pair, tol=tol).value
    return DecompositionReport(I_total, I_gen, I_pair, I_hol, M_conv, M_pair, hull)
