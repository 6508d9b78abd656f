"""POVMs, weighted measurement assemblages and their structural operations."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import as_hermitian

VALIDITY_TOL = 1e-9


class PovmError(ValueError):
    pass


@dataclass(frozen=True)
class Povm:
    effects: tuple  # tuple of (d, d) complex arrays

    def __init__(self, effects: Sequence, *, validate: bool = True, tol: float = VALIDITY_TOL):
        effs = tuple(as_hermitian(e) for e in effects)
        if not effs:
            raise PovmError("a POVM needs at least one effect")
        d = effs[0].shape[0]
        if any(e.shape != (d, d) for e in effs):
            raise PovmError("effects have inconsistent dimensions")
        object.__setattr__(self, "effects", effs)
        if validate:
            self.validate(tol)

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    @property
    def outcomes(self) -> int:
        return len(self.effects)

    def __len__(self):
        return len(self.effects)

    def __getitem__(self, a):
        return self.effects[a]

    def validate(self, tol: float = VALIDITY_TOL) -> None:
        d = self.dim
        for a, e in enumerate(self.effects):
            w = np.linalg.eigvalsh(e)
            if w.min() < -tol or w.max() > 1 + tol:
                raise PovmError(f"effect {a} has eigenvalues outside [0, 1]: [{w.min():.3e}, {w.max():.3e}]")
        total = sum(self.effects)
        dev = np.max(np.abs(total - np.eye(d)))
        if dev > tol:
            raise PovmError(f"effects do not sum to identity (deviation {dev:.3e})")

    def stack(self) -> np.ndarray:
        return np.array(self.effects)

    @classmethod
    def from_basis(cls, vectors) -> "Povm":
        """Projective measurement onto the columns of ``vectors``."""
        v = np.asarray(vectors, dtype=complex)
        return cls([np.outer(v[:, a], v[:, a].conj()) for a in range(v.shape[1])])

    @classmethod
    def trivial(cls, d: int) -> "Povm":
        return cls([np.eye(d, dtype=complex)])

    def depolarize(self, eta: float) -> "Povm":
        d = self.dim
        return Povm([eta * e + (1 - eta) * np.trace(e).real * np.eye(d) / d for e in self.effects])

    def conjugate(self, u: np.ndarray) -> "Povm":
        return Povm([u @ e @ u.conj().T for e in self.effects])


@dataclass(frozen=True)
class WeightedAssemblage:
    measurements: tuple
    weights: np.ndarray = field(compare=False)

    def __init__(self, measurements: Sequence[Povm], weights=None):
        meas = tuple(measurements)
        if meas:
            d = meas[0].dim
            if any(m.dim != d for m in meas):
                raise PovmError("measurements act on different dimensions")
        if weights is None:
            w = np.full(len(meas), 1.0 / len(meas)) if meas else np.zeros(0)
        else:
            w = np.asarray(weights, dtype=float).reshape(-1)
        if w.size != len(meas):
            raise PovmError(f"{len(meas)} measurements but {w.size} weights")
        if meas and (np.any(w < -1e-12) or abs(w.sum() - 1) > 1e-9):
            raise PovmError(f"weights are not a probability vector: {w}")
        object.__setattr__(self, "measurements", meas)
        object.__setattr__(self, "weights", np.clip(w, 0.0, None))

    @property
    def dim(self) -> int:
        return self.measurements[0].dim

    @property
    def settings(self) -> int:
        return len(self.measurements)

    @property
    def outcomes(self) -> tuple[int, ...]:
        return tuple(m.outcomes for m in self.measurements)

    def __len__(self):
        return len(self.measurements)

    def __getitem__(self, x) -> Povm:
        return self.measurements[x]

    def effect(self, a: int, x: int) -> np.ndarray:
        m = self.measurements[x]
        return m.effects[a] if a < m.outcomes else np.zeros((self.dim, self.dim), dtype=complex)

    def padded(self) -> np.ndarray:
        """Effects on a rectangular (x, a) grid, zero-padded, shape (m, o_max, d, d)."""
        omax = max(self.outcomes)
        out = np.zeros((self.settings, omax, self.dim, self.dim), dtype=complex)
        for x, m in enumerate(self.measurements):
            out[x, :m.outcomes] = m.stack()
        return out

    def require_positive_weights(self) -> None:
        if np.any(self.weights <= 0):
            raise PovmError("quantifiers need p(x) > 0 for every setting")

    def subset(self, idx: Sequence[int]) -> "WeightedAssemblage":
        """Restriction to the settings ``idx`` with renormalized weights."""
        idx = list(idx)
        w = self.weights[idx]
        return WeightedAssemblage([self.measurements[i] for i in idx], w / w.sum())

    def replace(self, idx: Sequence[int], sub: "WeightedAssemblage") -> "WeightedAssemblage":
        meas = list(self.measurements)
        for i, m in zip(idx, sub.measurements):
            meas[i] = m
        return WeightedAssemblage(meas, self.weights)

    def reweight(self, weights) -> "WeightedAssemblage":
        return WeightedAssemblage(self.measurements, weights)

    def conjugate(self, u: np.ndarray) -> "WeightedAssemblage":
        return WeightedAssemblage([m.conjugate(u) for m in self.measurements], self.weights)

    def depolarize(self, eta: float) -> "WeightedAssemblage":
        return depolarize(self, eta)

    def allclose(self, other: "WeightedAssemblage", atol: float = 1e-9) -> bool:
        if self.outcomes != other.outcomes or not np.allclose(self.weights, other.weights, atol=atol):
            return False
        return all(np.allclose(a.stack(), b.stack(), atol=atol)
                   for a, b in zip(self.measurements, other.measurements))

    # ---- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "measurements": [
                {"effects": [{"re": e.real.tolist(), "im": e.imag.tolist()} for e in m.effects]}
                for m in self.measurements
            ],
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict, *, validate: bool = True) -> "WeightedAssemblage":
        d = int(data["dim"])
        meas = []
        for m in data["measurements"]:
            effs = [np.asarray(e["re"], dtype=float) + 1j * np.asarray(e.get("im", np.zeros((d, d))), dtype=float)
                    for e in m["effects"]]
            if any(e.shape != (d, d) for e in effs):
                raise PovmError(f"effect shape does not match dim {d}")
            meas.append(Povm(effs, validate=validate))
        return cls(meas, data.get("weights"))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "WeightedAssemblage":
        return cls.from_dict(json.loads(text))


def concat(a: WeightedAssemblage, b: WeightedAssemblage, mix: float | None = None) -> WeightedAssemblage:
    """Ordered concatenation; ``mix`` is the total weight kept by ``a``.

    Defaults to the uniform choice ``m_a / (m_a + m_b)``.
    """
    if not len(b):
        return a
    if not len(a):
        return b
    if a.dim != b.dim:
        raise PovmError(f"dimension mismatch {a.dim} vs {b.dim}")
    if mix is None:
        mix = len(a) / (len(a) + len(b))
    if not 0 < mix < 1:
        raise PovmError("mix must lie in (0, 1)")
    w = np.concatenate([mix * a.weights, (1 - mix) * b.weights])
    return WeightedAssemblage(a.measurements + b.measurements, w)


def append(a: WeightedAssemblage, povm: Povm) -> WeightedAssemblage:
    """Append one measurement with uniform re-weighting."""
    return concat(a, WeightedAssemblage([povm]))


def split(a: WeightedAssemblage, copies, shares=None) -> WeightedAssemblage:
    """Duplicate every setting ``copies[x]`` times.

    By default each copy gets weight ``p(x)/copies[x]``; ``shares[x]`` may
    give an uneven split (nonnegative, summing to one per setting).
    """
    copies = np.broadcast_to(np.asarray(copies, dtype=int), (len(a),))
    if np.any(copies < 1):
        raise PovmError("copies must be >= 1")
    meas, w = [], []
    for x, (m, c) in enumerate(zip(a.measurements, copies)):
        sh = np.full(c, 1.0 / c) if shares is None else np.asarray(shares[x], dtype=float)
        if sh.size != c or abs(sh.sum() - 1) > 1e-12 or np.any(sh < 0):
            raise PovmError(f"invalid split shares for setting {x}")
        meas += [m] * c
        w += list(a.weights[x] * sh)
    return WeightedAssemblage(meas, w)


@dataclass
class SimulationMap:
    """Classical simulation: ``M'_{b|y} = sum_x p(x|y) sum_a q(b|y,x,a) M_{a|x}``.

    ``mixing[y, x] = p(x|y)``; ``relabel[y][x]`` is an array ``q[b, a]``
    (columns sum to one); ``weights[y] = q(y)``.
    """

    mixing: np.ndarray
    relabel: list
    weights: np.ndarray

    def __post_init__(self):
        self.mixing = np.asarray(self.mixing, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        ny, nx = self.mixing.shape
        if self.weights.size != ny:
            raise PovmError("weights do not match the number of output settings")
        if np.any(self.mixing < -1e-12) or not np.allclose(self.mixing.sum(axis=1), 1, atol=1e-9):
            raise PovmError("p(x|y) must be a probability vector for every y")
        for y in range(ny):
            for x in range(nx):
                q = np.asarray(self.relabel[y][x], dtype=float)
                if np.any(q < -1e-12) or not np.allclose(q.sum(axis=0), 1, atol=1e-9):
                    raise PovmError(f"q(b|y={y},x={x},a) is not column-stochastic")

    def input_weights(self) -> np.ndarray:
        return self.weights @ self.mixing


def simulate(a: WeightedAssemblage, sim: SimulationMap, *, check_weights: bool = True) -> WeightedAssemblage:
    ny, nx = sim.mixing.shape
    if nx != len(a):
        raise PovmError(f"map expects {nx} settings, assemblage has {len(a)}")
    if check_weights and not np.allclose(sim.input_weights(), a.weights, atol=1e-9):
        raise PovmError("inconsistent weights: p(x) != sum_y q(y) p(x|y)")
    out = []
    for y in range(ny):
        nb = np.asarray(sim.relabel[y][0]).shape[0]
        effs = np.zeros((nb, a.dim, a.dim), dtype=complex)
        for x in range(nx):
            q = np.asarray(sim.relabel[y][x], dtype=float)
            if q.shape[1] != a[x].outcomes:
                raise PovmError(f"relabeling for (y={y}, x={x}) expects {q.shape[1]} outcomes")
            effs += sim.mixing[y, x] * np.einsum("ba,aij->bij", q, a[x].stack())
        out.append(Povm(effs))
    return WeightedAssemblage(out, sim.weights)


def splitting_map(a: WeightedAssemblage, copies) -> SimulationMap:
    """The simulation map realising :func:`split` with even shares."""
    copies = np.broadcast_to(np.asarray(copies, dtype=int), (len(a),))
    ny = int(copies.sum())
    mixing = np.zeros((ny, len(a)))
    weights = np.zeros(ny)
    y = 0
    for x, c in enumerate(copies):
        for _ in range(c):
            mixing[y, x] = 1.0
            weights[y] = a.weights[x] / c
            y += 1
    relabel = [[np.eye(a[x].outcomes) for x in range(len(a))] for _ in range(ny)]
    # the off-support relabelings are irrelevant but must be valid and shape-consistent
    for yy in range(ny):
        xs = int(np.argmax(mixing[yy]))
        ob = a[xs].outcomes
        relabel[yy] = [np.eye(ob, a[x].outcomes) if x == xs else _collapse(ob, a[x].outcomes)
                       for x in range(len(a))]
    return SimulationMap(mixing, relabel, weights)


def _collapse(nb: int, na: int) -> np.ndarray:
    q = np.zeros((nb, na))
    q[0] = 1.0
    return q


def depolarize(a: WeightedAssemblage, eta: float) -> WeightedAssemblage:
    if not 0 <= eta <= 1:
        raise PovmError(f"eta must lie in [0, 1], got {eta}")
    return WeightedAssemblage([m.depolarize(eta) for m in a.measurements], a.weights)


def parent_povm_simulation(parent: Povm, strategies, weights=None) -> WeightedAssemblage:
    """Assemblage ``M_{a|x} = sum_lam v(a|x,lam) G_lam`` generated by ``parent``."""
    if parent.outcomes != len(strategies):
        raise PovmError(f"parent has {parent.outcomes} outcomes but there are {len(strategies)} strategies")
    G = parent.stack()
    meas = []
    for x in range(strategies.settings):
        v = strategies.response(x)  # (o_x, |Lambda|)
        meas.append(Povm(np.einsum("al,lij->aij", v, G)))
    return WeightedAssemblage(meas, weights)


def random_projective(d: int, rng: np.random.Generator) -> Povm:
    from .linalg import random_unitary
    return Povm.from_basis(random_unitary(d, rng))


def random_povm(d: int, outcomes: int, rng: np.random.Generator, rank: int = 1) -> Povm:
    """Random POVM: ``S^{-1/2} W_a S^{-1/2}`` for Wishart ``W_a``.

    The rank is raised to ``ceil(d / outcomes)`` if needed so that S is invertible.
    """
    rank = max(rank, -(-d // outcomes))
    ws = []
    for _ in range(outcomes):
        g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
        ws.append(g @ g.conj().T)
    S = sum(ws)
    w, v = np.linalg.eigh(S)
    isq = (v / np.sqrt(w)) @ v.conj().T
    return Povm([isq @ x @ isq for x in ws])
