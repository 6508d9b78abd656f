"""Small modeling layer: Hermitian matrix variables and affine expressions.

A Hermitian variable of size d owns d*d real columns (coordinates in
``hermitian_basis(d)``).  Affine Hermitian expressions are stored as
``const + sum_j x[cols[j]] * mats[j]`` with complex Hermitian ``mats``.
Constraints ``expr >= 0`` become real-embedded PSD blocks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..linalg import hermitian_basis, real_embed, real_unembed
from .ipm import SolverResult, SolverTolerances, solve
from .program import ConicProgram, NonnegBlock, PsdBlock


def _embed_stack(mats: np.ndarray, d: int) -> np.ndarray:
    """Real embedding of a stack of (d, d) complex matrices."""
    out = np.empty((len(mats), 2 * d, 2 * d))
    r, s = mats.real, mats.imag
    out[:, :d, :d] = r
    out[:, d:, d:] = r
    out[:, :d, d:] = -s
    out[:, d:, :d] = s
    return out


@dataclass
class HExpr:
    """Affine Hermitian expression ``const + sum_j x[cols[j]] mats[j]``."""

    dim: int
    cols: np.ndarray
    mats: np.ndarray
    const: np.ndarray

    @classmethod
    def constant(cls, op) -> "HExpr":
        op = np.asarray(op, dtype=complex)
        return cls(op.shape[0], np.zeros(0, dtype=int), np.zeros((0,) + op.shape, dtype=complex), op)

    @classmethod
    def zeros(cls, dim: int) -> "HExpr":
        return cls.constant(np.zeros((dim, dim), dtype=complex))

    def __add__(self, other) -> "HExpr":
        if not isinstance(other, HExpr):
            other = HExpr.constant(other)
        return HExpr(self.dim, np.concatenate([self.cols, other.cols]),
                     np.concatenate([self.mats, other.mats]), self.const + other.const)

    def __radd__(self, other) -> "HExpr":
        if isinstance(other, (int, float)) and other == 0:
            return self
        return self.__add__(other)

    def __neg__(self) -> "HExpr":
        return HExpr(self.dim, self.cols, -self.mats, -self.const)

    def __sub__(self, other) -> "HExpr":
        if not isinstance(other, HExpr):
            other = HExpr.constant(other)
        return self + (-other)

    def __rsub__(self, other) -> "HExpr":
        return (-self) + other

    def __mul__(self, a: float) -> "HExpr":
        a = float(a)
        return HExpr(self.dim, self.cols, a * self.mats, a * self.const)

    __rmul__ = __mul__

    def map(self, f, dim: int | None = None) -> "HExpr":
        """Apply a real-linear map ``f`` on operators to every term."""
        const = f(self.const)
        mats = np.array([f(m) for m in self.mats]) if len(self.cols) else np.zeros((0,) + const.shape, dtype=complex)
        return HExpr(const.shape[0] if dim is None else dim, self.cols, mats, const)

    def compact(self) -> "HExpr":
        if not len(self.cols):
            return self
        u, inv = np.unique(self.cols, return_inverse=True)
        mats = np.zeros((u.size, self.dim, self.dim), dtype=complex)
        np.add.at(mats, inv, self.mats)
        return HExpr(self.dim, u, mats, self.const)

    def value(self, x: np.ndarray) -> np.ndarray:
        return self.const + np.tensordot(x[self.cols], self.mats, axes=1)


def hsum(exprs, dim: int | None = None) -> HExpr:
    """Sum of many Hermitian expressions in one concatenation."""
    exprs = list(exprs)
    if not exprs:
        return HExpr.zeros(dim)
    return HExpr(exprs[0].dim, np.concatenate([e.cols for e in exprs]),
                 np.concatenate([e.mats for e in exprs]), sum(e.const for e in exprs))


def scaled_identity(s: "SExpr", d: int) -> HExpr:
    """Hermitian expression ``s * I_d`` for a scalar expression ``s``."""
    eye = np.eye(d, dtype=complex)
    return HExpr(d, np.asarray(s.cols), np.asarray(s.coefs)[:, None, None] * eye, s.const * eye)


@dataclass
class SExpr:
    """Affine real scalar ``const + coefs @ x[cols]``."""

    cols: np.ndarray
    coefs: np.ndarray
    const: float = 0.0

    def __add__(self, other) -> "SExpr":
        if not isinstance(other, SExpr):
            return SExpr(self.cols, self.coefs, self.const + float(other))
        return SExpr(np.concatenate([self.cols, other.cols]),
                     np.concatenate([self.coefs, other.coefs]), self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> "SExpr":
        return SExpr(self.cols, -self.coefs, -self.const)

    def __sub__(self, other) -> "SExpr":
        return self + (-other if isinstance(other, SExpr) else -float(other))

    def __mul__(self, a: float) -> "SExpr":
        return SExpr(self.cols, float(a) * self.coefs, float(a) * self.const)

    __rmul__ = __mul__

    def value(self, x: np.ndarray) -> float:
        return float(self.const + self.coefs @ x[self.cols])


class Model:
    def __init__(self):
        self.n = 0
        self._c: dict[int, float] = {}
        self.sense = "min"
        self.offset = 0.0
        self._eq_rows: list[tuple[np.ndarray, np.ndarray, float]] = []
        self._eq_names: list[tuple[str, int]] = []
        self._blocks: list = []
        self._herm_blocks: dict[int, int] = {}  # block index -> hermitian dim
        self._bases: dict[int, np.ndarray] = {}

    # ---- variables ----------------------------------------------------------
    def basis(self, d: int) -> np.ndarray:
        if d not in self._bases:
            self._bases[d] = hermitian_basis(d)
        return self._bases[d]

    def scalars(self, count: int) -> np.ndarray:
        cols = np.arange(self.n, self.n + count)
        self.n += count
        return cols

    def scalar(self) -> SExpr:
        col = self.scalars(1)
        return SExpr(col, np.ones(1))

    def herm(self, d: int) -> HExpr:
        cols = self.scalars(d * d)
        return HExpr(d, cols, self.basis(d).copy(), np.zeros((d, d), dtype=complex))

    # ---- constraints --------------------------------------------------------
    def psd(self, expr: HExpr, name: str = "") -> int:
        """Add ``expr >= 0``; returns the block index."""
        e = expr.compact()
        mats = _embed_stack(e.mats, e.dim)
        self._blocks.append(PsdBlock(2 * e.dim, e.cols, -mats, real_embed(e.const), name=name))
        k = len(self._blocks) - 1
        self._herm_blocks[k] = e.dim
        return k

    def nonneg(self, exprs: list[SExpr], name: str = "") -> int:
        """Add ``expr_i >= 0`` for every scalar expression."""
        allcols = np.unique(np.concatenate([e.cols for e in exprs]).astype(int))
        pos = {c: i for i, c in enumerate(allcols)}
        mat = np.zeros((len(exprs), allcols.size))
        h = np.zeros(len(exprs))
        for i, e in enumerate(exprs):
            for col, v in zip(e.cols, e.coefs):
                mat[i, pos[int(col)]] -= v
            h[i] = e.const
        self._blocks.append(NonnegBlock(len(exprs), allcols, mat, h, name=name))
        return len(self._blocks) - 1

    def eq_herm(self, expr: HExpr, rhs=None, name: str = "") -> int:
        """Add ``expr == rhs`` (Hermitian); returns the first equality row."""
        e = expr.compact()
        rhs = np.zeros((e.dim, e.dim)) if rhs is None else np.asarray(rhs, dtype=complex)
        B = self.basis(e.dim)
        coef = np.real(np.einsum("kij,rji->kr", B, e.mats))
        target = np.real(np.einsum("kij,ji->k", B, rhs - e.const))
        start = len(self._eq_rows)
        for k in range(B.shape[0]):
            self._eq_rows.append((e.cols, coef[k], float(target[k])))
        self._eq_names.append((name or f"herm equality {len(self._eq_names)}", B.shape[0]))
        return start

    def eq(self, expr: SExpr, rhs: float = 0.0, name: str = "") -> int:
        self._eq_rows.append((np.asarray(expr.cols), np.asarray(expr.coefs, float), float(rhs) - expr.const))
        self._eq_names.append((name or f"equality {len(self._eq_names)}", 1))
        return len(self._eq_rows) - 1

    # ---- objective ----------------------------------------------------------
    def objective(self, expr: SExpr, sense: str = "min") -> None:
        self._c = {}
        for col, v in zip(expr.cols, expr.coefs):
            self._c[int(col)] = self._c.get(int(col), 0.0) + float(v)
        self.offset = expr.const
        self.sense = sense

    @staticmethod
    def trace(expr: HExpr, weight=None) -> SExpr:
        """Real scalar ``Tr[weight @ expr]`` (weight Hermitian, default identity)."""
        if weight is None:
            coefs = np.real(np.einsum("rii->r", expr.mats))
            const = float(np.real(np.trace(expr.const)))
        else:
            w = np.asarray(weight, dtype=complex)
            coefs = np.real(np.einsum("ij,rji->r", w, expr.mats))
            const = float(np.real(np.trace(w @ expr.const)))
        return SExpr(np.asarray(expr.cols), coefs, const)

    # ---- assembly and solve -------------------------------------------------
    def build(self) -> ConicProgram:
        c = np.zeros(self.n)
        for col, v in self._c.items():
            c[col] = v
        A = np.zeros((len(self._eq_rows), self.n))
        b = np.zeros(len(self._eq_rows))
        for i, (cols, coefs, rhs) in enumerate(self._eq_rows):
            np.add.at(A[i], np.asarray(cols, dtype=int), coefs)
            b[i] = rhs
        return ConicProgram(c, A, b, list(self._blocks), sense=self.sense,
                            offset=self.offset, eq_names=list(self._eq_names))

    def solve(self, tol: SolverTolerances | None = None) -> "Solution":
        prog = self.build()
        return Solution(self, prog, solve(prog, tol))


class Solution:
    def __init__(self, model: Model, prog: ConicProgram, result: SolverResult):
        self.model = model
        self.prog = prog
        self.result = result

    @property
    def status(self) -> str:
        return self.result.status

    def value(self, expr):
        return expr.value(self.result.x)

    def dual_herm(self, block: int) -> np.ndarray:
        """Hermitian multiplier of a Hermitian PSD block.

        The real-embedded multiplier Z pairs with the embedded slack as
        <Z, embed(S)> = Tr[(2 unembed(Z)) S], hence the factor of two.
        """
        return 2.0 * real_unembed(self.result.z[block])

    def dual_nonneg(self, block: int) -> np.ndarray:
        return np.asarray(self.result.z[block])

    def dual_eq(self, row: int, count: int = 1) -> np.ndarray:
        return self.result.y[row:row + count]

    def dual_eq_herm(self, row: int, dim: int) -> np.ndarray:
        """Hermitian operator built from the multipliers of an ``eq_herm`` block."""
        y = self.result.y[row:row + dim * dim]
        return np.tensordot(y, self.model.basis(dim), axes=1)
