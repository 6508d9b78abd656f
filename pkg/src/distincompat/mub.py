"""Heisenberg-Weyl mutually unbiased bases in prime dimension."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .assemblage import Povm, WeightedAssemblage
from .strategies import ENUMERATION_CAP, DeterministicStrategySet

log = logging.getLogger(__name__)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % k for k in range(2, int(n ** 0.5) + 1))


def shift_clock(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Shift X|j> = |j+1> and clock Z|j> = w^j |j>."""
    w = np.exp(2j * np.pi / d)
    X = np.roll(np.eye(d, dtype=complex), 1, axis=0)
    Z = np.diag(w ** np.arange(d))
    return X, Z


def _fix_phase(v: np.ndarray) -> np.ndarray:
    k = int(np.flatnonzero(np.abs(v) > 1e-12)[0])
    return v * (abs(v[k]) / v[k])


def eigenbasis(U: np.ndarray) -> np.ndarray:
    """Orthonormal eigenvectors of a unitary with nondegenerate spectrum.

    Columns are ordered by eigenvalue phase in [0, 2pi) and each has its
    first nonzero component real positive.
    """
    w, v = np.linalg.eig(U)
    order = np.argsort(np.mod(np.angle(w) + 1e-12, 2 * np.pi))
    v, _ = np.linalg.qr(v[:, order])  # re-orthonormalize without reordering
    return np.column_stack([_fix_phase(v[:, a]) for a in range(v.shape[1])])


@dataclass(frozen=True)
class MubFamily:
    d: int
    m: int
    bases: tuple  # m arrays (d, d), basis vectors as columns

    @property
    def projectors(self) -> np.ndarray:
        """``Pi[x, a]`` of shape (m, d, d, d)."""
        return np.array([[np.outer(b[:, a], b[:, a].conj()) for a in range(self.d)] for b in self.bases])

    def assemblage(self, eta: float = 1.0, weights=None) -> WeightedAssemblage:
        meas = [Povm.from_basis(b) for b in self.bases]
        out = WeightedAssemblage(meas, weights)
        return out if eta == 1.0 else out.depolarize(eta)

    def max_overlap_error(self) -> float:
        """Worst deviation from orthonormality and from |<v|w>| = 1/sqrt(d)."""
        err = 0.0
        for x, b in enumerate(self.bases):
            err = max(err, np.max(np.abs(b.conj().T @ b - np.eye(self.d))))
            for c in self.bases[x + 1:]:
                err = max(err, np.max(np.abs(np.abs(b.conj().T @ c) - 1 / np.sqrt(self.d))))
        return float(err)


def build_mub(d: int, m: int) -> MubFamily:
    """First ``m`` bases of the ordered family X, Z, XZ, XZ^2, ..., XZ^(d-1)."""
    if not is_prime(d):
        raise ValueError(f"d = {d} is not prime")
    if not 1 <= m <= d + 1:
        raise ValueError(f"m = {m} outside [1, {d + 1}]")
    X, Z = shift_clock(d)
    ops = [X, Z] + [X @ np.linalg.matrix_power(Z, k) for k in range(1, d)]
    bases = []
    for U in ops[:m]:
        # Z is diagonal: use the computational basis exactly
        bases.append(np.eye(d, dtype=complex) if U is Z else eigenbasis(U))
    return MubFamily(d, m, tuple(bases))


def max_strategy_norm(assemblage: WeightedAssemblage, cap: int = ENUMERATION_CAP) -> tuple[float, np.ndarray]:
    """max over deterministic strategies of ||sum_x M_{lam(x)|x}||_inf and the maximizer."""
    strat = DeterministicStrategySet(assemblage.outcomes, cap=cap)
    eff = assemblage.padded()
    best, arg = -np.inf, None
    chunk = 4096
    for start in range(0, len(strat), chunk):
        rows = strat.table[start:start + chunk]
        ops = sum(eff[x, rows[:, x]] for x in range(assemblage.settings))
        norms = np.abs(np.linalg.eigvalsh(ops)).max(axis=1)
        k = int(np.argmax(norms))
        if norms[k] > best:
            best, arg = float(norms[k]), rows[k].copy()
    return best, arg


def compute_T(fam: MubFamily, cap: int = ENUMERATION_CAP) -> float:
    if fam.d ** fam.m > cap:
        raise ValueError(f"{fam.d ** fam.m} strategies exceed the enumeration cap of {cap}")
    return max_strategy_norm(fam.assemblage(), cap)[0]


@dataclass(frozen=True)
class RobustnessData:
    T: float
    eta_star: float
    d: int
    m: int
    heuristic: bool


def closed_form_valid(d: int, m: int) -> bool:
    return m in (2, d, d + 1)


def white_noise_robustness(fam: MubFamily, cap: int = ENUMERATION_CAP) -> RobustnessData:
    T = compute_T(fam, cap)
    d, m = fam.d, fam.m
    heuristic = not closed_form_valid(d, m)
    if heuristic:
        log.warning("closed-form robustness for d=%d, m=%d is not established; value is heuristic", d, m)
    eta = (d * T - m) / (d * m - m) if m > 1 else 1.0
    return RobustnessData(T, eta, d, m, heuristic)


def analytic_incompatibility(fam: MubFamily, eta: float, *, allow_heuristic: bool = False) -> float:
    """max(0, (d-1)/d (eta - eta*_m)) for depolarized MUB."""
    if not (closed_form_valid(fam.d, fam.m) or allow_heuristic):
        raise ValueError(f"no closed form for d={fam.d}, m={fam.m}")
    rob = white_noise_robustness(fam)
    return max(0.0, (fam.d - 1) / fam.d * (eta - rob.eta_star))


def mub_dual_certificate(fam: MubFamily, eta: float = 1.0):
    """Closed-form dual feasible point for uniformly weighted noisy MUB.

    ``C_{a|x} = Pi_{a|x}/d``, ``rho_x = 1/d`` and ``L = T/(d m) 1``.  Its
    objective is ``eta + (1 - eta)/d - T/m``; returns (certificate, that value).
    """
    from .incompat import DualCertificate

    T = compute_T(fam)
    d, m = fam.d, fam.m
    Pi = fam.projectors
    cert = DualCertificate([Pi[x] / d for x in range(m)],
                           np.array([np.eye(d, dtype=complex) / d] * m),
                           np.eye(d, dtype=complex) * T / (d * m))
    return cert, eta + (1 - eta) / d - T / m
