"""Conic program container, mechanical dualization, and a triplet dump.

Programs are stored in inequality form::

    minimize (or maximize)  c^T x + offset
    subject to              A x = b
                            h_k - G_k x  in  K_k      for every block k

where each ``K_k`` is either a nonnegative orthant or a cone of real
symmetric PSD matrices.  Hermitian constraints enter through the real
embedding of :mod:`distincompat.linalg` (see :mod:`.model`).

Each block only stores the columns of ``G_k`` that are nonzero, which keeps
the many tiny parent-POVM blocks cheap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TextIO

import numpy as np


class IllPosedProgram(ValueError):
    """Raised for programs the interior-point method cannot handle as posed."""


@dataclass
class PsdBlock:
    """Constraint ``h - sum_j x[cols[j]] * mats[j]`` is PSD."""

    size: int
    cols: np.ndarray
    mats: np.ndarray
    h: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.cols = np.asarray(self.cols, dtype=int).reshape(-1)
        self.mats = np.asarray(self.mats, dtype=float).reshape(len(self.cols), self.size, self.size)
        self.h = np.asarray(self.h, dtype=float).reshape(self.size, self.size)

    @property
    def degree(self) -> int:
        return self.size

    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.tensordot(x[self.cols], self.mats, axes=1)

    def adjoint(self, z: np.ndarray) -> np.ndarray:
        return self.mats.reshape(len(self.cols), -1) @ np.asarray(z).reshape(-1)


@dataclass
class NonnegBlock:
    """Constraint ``h - mat @ x[cols] >= 0`` elementwise."""

    size: int
    cols: np.ndarray
    mat: np.ndarray
    h: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.cols = np.asarray(self.cols, dtype=int).reshape(-1)
        self.mat = np.asarray(self.mat, dtype=float).reshape(self.size, len(self.cols))
        self.h = np.asarray(self.h, dtype=float).reshape(self.size)

    @property
    def degree(self) -> int:
        return self.size

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.mat @ x[self.cols]

    def adjoint(self, z: np.ndarray) -> np.ndarray:
        return self.mat.T @ np.asarray(z).reshape(-1)


Block = PsdBlock | NonnegBlock


@dataclass
class ConicProgram:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    blocks: list[Block]
    sense: str = "min"
    offset: float = 0.0
    # (name, row count) spans labelling the rows of A, for error messages
    eq_names: list[tuple[str, int]] = field(default_factory=list)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.sense not in ("min", "max"):
            raise ValueError(f"unknown sense {self.sense!r}")
        self.validate()

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def degree(self) -> int:
        return sum(blk.degree for blk in self.blocks)

    def validate(self) -> None:
        n = self.n
        if self.A.shape[0] != self.b.size:
            raise IllPosedProgram(f"A has {self.A.shape[0]} rows but b has {self.b.size}")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.b))):
            raise IllPosedProgram("program data has non-finite entries")
        for k, blk in enumerate(self.blocks):
            label = blk.name or f"block {k}"
            if blk.cols.size and (blk.cols.min() < 0 or blk.cols.max() >= n):
                raise IllPosedProgram(f"{label}: column index out of range")
            if np.unique(blk.cols).size != blk.cols.size:
                raise IllPosedProgram(f"{label}: duplicated columns")
            if isinstance(blk, PsdBlock):
                if not np.allclose(blk.mats, np.swapaxes(blk.mats, 1, 2), atol=1e-12):
                    raise IllPosedProgram(f"{label}: coefficient matrices are not symmetric")
                if not np.allclose(blk.h, blk.h.T, atol=1e-12):
                    raise IllPosedProgram(f"{label}: constant term is not symmetric")
                data = (blk.mats, blk.h)
            else:
                data = (blk.mat, blk.h)
            if not all(np.all(np.isfinite(d)) for d in data):
                raise IllPosedProgram(f"{label}: non-finite entries")

    def eq_row_name(self, row: int) -> str:
        start = 0
        for name, count in self.eq_names:
            if start <= row < start + count:
                return f"{name}[{row - start}]"
            start += count
        return f"equality row {row}"

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x + self.offset)

    def residuals(self, x: np.ndarray) -> tuple[float, float]:
        """(equality residual norm, worst cone violation) of a candidate x."""
        eq = float(np.linalg.norm(self.A @ x - self.b)) if self.b.size else 0.0
        worst = 0.0
        for blk in self.blocks:
            slack = blk.h - blk.apply(x)
            if isinstance(blk, PsdBlock):
                lo = np.linalg.eigvalsh(0.5 * (slack + slack.T)).min()
            else:
                lo = slack.min() if slack.size else 0.0
            worst = max(worst, -float(lo))
        return eq, worst


def sym_basis(p: int) -> np.ndarray:
    """Orthonormal basis of real symmetric p x p matrices, shape (p(p+1)/2, p, p)."""
    out = np.zeros((p * (p + 1) // 2, p, p))
    k = 0
    c = 1.0 / np.sqrt(2.0)
    for i in range(p):
        for j in range(i, p):
            if i == j:
                out[k, i, i] = 1.0
            else:
                out[k, i, j] = out[k, j, i] = c
            k += 1
    return out


def dualize(prog: ConicProgram) -> ConicProgram:
    """Mechanical conic dual of ``prog``.

    For ``min c^T x, Ax = b, h - Gx in K`` the dual is
    ``max -b^T y - <h, z>`` subject to ``A^T y + G^T z + c = 0, z in K``.
    The returned program has the same optimal value as ``prog`` (under
    strong duality).  Its variables are ``y`` followed by the coordinates
    of each ``z_k`` (orthonormal symmetric basis for PSD blocks).
    """
    sign = 1.0 if prog.sense == "min" else -1.0
    c_eff = sign * prog.c
    n = prog.n
    p = prog.b.size
    coords = []  # (block, start, count, basis)
    nvar = p
    for blk in prog.blocks:
        if isinstance(blk, PsdBlock):
            basis = sym_basis(blk.size)
            coords.append((blk, nvar, basis.shape[0], basis))
            nvar += basis.shape[0]
        else:
            coords.append((blk, nvar, blk.size, None))
            nvar += blk.size

    obj = np.zeros(nvar)
    obj[:p] = -prog.b
    A_d = np.zeros((n, nvar))
    A_d[:, :p] = prog.A.T
    blocks: list[Block] = []
    for k, (blk, start, count, basis) in enumerate(coords):
        cols = np.arange(start, start + count)
        label = f"dual of {blk.name or f'block {k}'}"
        if basis is None:
            obj[cols] = -blk.h
            A_d[np.ix_(blk.cols, cols)] += blk.mat.T
            blocks.append(NonnegBlock(count, cols, -np.eye(count), np.zeros(count), name=label))
        else:
            obj[cols] = -np.einsum("kij,ij->k", basis, blk.h)
            A_d[np.ix_(blk.cols, cols)] += np.einsum("rij,kij->rk", blk.mats, basis)
            blocks.append(PsdBlock(blk.size, cols, -basis, np.zeros((blk.size, blk.size)), name=label))

    # dual optimum equals min c_eff; for an original max problem flip back
    if sign > 0:
        return ConicProgram(obj, A_d, -c_eff, blocks, sense="max", offset=prog.offset,
                            eq_names=[("stationarity", n)])
    return ConicProgram(-obj, A_d, -c_eff, blocks, sense="min", offset=prog.offset,
                        eq_names=[("stationarity", n)])


def dump_triplets(prog: ConicProgram, fh: TextIO) -> None:
    """Write ``prog`` as whitespace-separated sparse triplets.

    Line formats (indices 0-based, only nonzeros written)::

        program <n> <sense> <offset>
        c <col> <value>
        A <row> <col> <value>
        b <row> <value>
        block <k> psd|nonneg <size>
        G <k> <col> <i> <j> <value>      # PSD: i <= j; nonneg: j = 0
        h <k> <i> <j> <value>
    """
    fh.write(f"program {prog.n} {prog.sense} {float(prog.offset)!r}\n")
    for j in np.flatnonzero(prog.c):
        fh.write(f"c {j} {float(prog.c[j])!r}\n")
    for i, j in zip(*np.nonzero(prog.A)):
        fh.write(f"A {i} {j} {float(prog.A[i, j])!r}\n")
    for i in np.flatnonzero(prog.b):
        fh.write(f"b {i} {float(prog.b[i])!r}\n")
    for k, blk in enumerate(prog.blocks):
        if isinstance(blk, PsdBlock):
            fh.write(f"block {k} psd {blk.size}\n")
            iu = np.triu_indices(blk.size)
            for r, col in enumerate(blk.cols):
                for i, j in zip(*iu):
                    v = blk.mats[r, i, j]
                    if v != 0.0:
                        fh.write(f"G {k} {col} {i} {j} {float(v)!r}\n")
            for i, j in zip(*iu):
                if blk.h[i, j] != 0.0:
                    fh.write(f"h {k} {i} {j} {float(blk.h[i, j])!r}\n")
        else:
            fh.write(f"block {k} nonneg {blk.size}\n")
            for i, r in zip(*np.nonzero(blk.mat)):
                fh.write(f"G {k} {blk.cols[r]} {i} 0 {float(blk.mat[i, r])!r}\n")
            for i in np.flatnonzero(blk.h):
                fh.write(f"h {k} {i} 0 {float(blk.h[i])!r}\n")


def load_triplets(fh: TextIO) -> ConicProgram:
    """Inverse of :func:`dump_triplets`."""
    c = A = b = None
    rows_A: list[tuple[int, int, float]] = []
    rows_b: list[tuple[int, float]] = []
    blocks: dict[int, dict] = {}
    n = 0
    sense, offset = "min", 0.0
    for line in fh:
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        tag = parts[0]
        if tag == "program":
            n, sense, offset = int(parts[1]), parts[2], float(parts[3])
            c = np.zeros(n)
        elif tag == "c":
            c[int(parts[1])] = float(parts[2])
        elif tag == "A":
            rows_A.append((int(parts[1]), int(parts[2]), float(parts[3])))
        elif tag == "b":
            rows_b.append((int(parts[1]), float(parts[2])))
        elif tag == "block":
            blocks[int(parts[1])] = {"kind": parts[2], "size": int(parts[3]), "G": {}, "h": []}
        elif tag == "G":
            k, col, i, j, v = int(parts[1]), int(parts[2]), int(parts[3]), int(parts[4]), float(parts[5])
            blocks[k]["G"].setdefault(col, []).append((i, j, v))
        elif tag == "h":
            blocks[int(parts[1])]["h"].append((int(parts[2]), int(parts[3]), float(parts[4])))
        else:
            raise ValueError(f"unknown triplet tag {tag!r}")
    m = 1 + max((r for r, _, _ in rows_A), default=-1)
    m = max(m, 1 + max((r for r, _ in rows_b), default=-1))
    A = np.zeros((m, n))
    b = np.zeros(m)
    for i, j, v in rows_A:
        A[i, j] = v
    for i, v in rows_b:
        b[i] = v
    out: list[Block] = []
    for k in sorted(blocks):
        spec = blocks[k]
        size = spec["size"]
        cols = np.array(sorted(spec["G"]), dtype=int)
        if spec["kind"] == "psd":
            mats = np.zeros((cols.size, size, size))
            for r, col in enumerate(cols):
                for i, j, v in spec["G"][col]:
                    mats[r, i, j] = mats[r, j, i] = v
            h = np.zeros((size, size))
            for i, j, v in spec["h"]:
                h[i, j] = h[j, i] = v
            out.append(PsdBlock(size, cols, mats, h))
        else:
            mat = np.zeros((size, cols.size))
            for r, col in enumerate(cols):
                for i, _, v in spec["G"][col]:
                    mat[i, r] = v
            h = np.zeros(size)
            for i, _, v in spec["h"]:
                h[i] = v
            out.append(NonnegBlock(size, cols, mat, h))
    return ConicProgram(c, A, b, out, sense=sense, offset=offset)
