"""Primal-dual interior-point method for :class:`ConicProgram`.

Homogeneous self-dual embedding with Nesterov-Todd scaling and a Mehrotra
predictor-corrector, in the style of cvxopt's ``conelp``.  Every Newton
system is reduced to a dense normal-equation solve::

    H = sum_k Ghat_k^T Ghat_k + A^T A,   Ghat_k = W_k^{-T} G_k

followed by a Schur complement on the equality rows.  All blocks are
small; same-shape PSD blocks are stacked and handled with batched numpy.

Sign convention for the returned multipliers (minimization form, after
negating ``c`` for a ``max`` program)::

    c + A^T y + sum_k G_k^T z_k = 0,   z_k in K_k
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .program import ConicProgram, IllPosedProgram, NonnegBlock, PsdBlock

log = logging.getLogger(__name__)


@dataclass
class SolverTolerances:
    gap: float = 1e-8
    feas: float = 1e-8
    max_iter: int = 200
    step: float = 0.99
    refine: int = 1
    near: float = 10.0  # accept the best iterate within this factor of the targets on failure


@dataclass
class SolverResult:
    status: str  # optimal | near-optimal | infeasible | max-iterations | numerical-failure
    primal_objective: float
    dual_objective: float
    gap: float
    x: np.ndarray
    y: np.ndarray
    z: list = field(default_factory=list)
    s: list = field(default_factory=list)
    iterations: int = 0
    primal_residual: float = np.nan
    dual_residual: float = np.nan
    infeasibility: str | None = None  # "primal" | "dual" when status is infeasible
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status in ("optimal", "near-optimal")

    def diagnostics(self) -> dict:
        return {
            "status": self.status,
            "primal_objective": self.primal_objective,
            "dual_objective": self.dual_objective,
            "gap": self.gap,
            "iterations": self.iterations,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "infeasibility": self.infeasibility,
            "message": self.message,
        }


# ---- cone arithmetic in the scaled space -------------------------------------
#
# PSD blocks of equal size and column count are stacked into one group so
# that factorizations and eigenvalue checks run batched.  For each block the
# scaling is W(z) = R^T z R with s = R lam R^T and z = R^{-T} lam R^{-1};
# lam is kept as the diagonal of the scaled point.  For an orthant block W is
# diag(d) with s = d*lam, z = lam/d.


def _sym(u):
    return 0.5 * (u + np.swapaxes(u, -1, -2))


class _PsdGroup:
    def __init__(self, blks: list[PsdBlock], idx: list[int]):
        self.idx = idx
        self.k = len(blks)
        self.p = p = blks[0].size
        self.cols = np.stack([b.cols for b in blks])
        self.mats = np.stack([b.mats for b in blks])
        self.flat = self.mats.reshape(self.k, self.cols.shape[1], p * p)
        self.h = np.stack([b.h for b in blks])
        self.R = np.tile(np.eye(p), (self.k, 1, 1))
        self.Rinv = self.R.copy()
        self.lam = np.ones((self.k, p))
        self.eye = np.eye(p)

    def split(self, u):
        return list(u)

    def apply(self, x):
        return np.einsum("kn,knq->kq", x[self.cols], self.flat).reshape(self.h.shape)

    def adjoint_add(self, out, z):
        np.add.at(out, self.cols, np.einsum("knq,kq->kn", self.flat, z.reshape(self.k, -1)))

    def e(self):
        return np.broadcast_to(self.eye, self.h.shape).copy()

    def lam_mat(self):
        return self.lam[:, :, None] * self.eye

    def scaled_G(self):
        # rows of W^{-T} G as flattened p*p vectors
        Ri = self.Rinv[:, None]
        g = Ri @ self.mats @ np.swapaxes(Ri, -1, -2)
        return g.reshape(self.k, self.cols.shape[1], -1)

    def add_normal(self, H, g):
        c = self.cols
        np.add.at(H, (c[:, :, None], c[:, None, :]), g @ np.swapaxes(g, -1, -2))

    def g_add(self, out, g, v):
        np.add.at(out, self.cols, np.einsum("knq,kq->kn", g, v.reshape(self.k, -1)))

    def gT(self, g, ux):
        return np.einsum("knq,kn->kq", g, ux[self.cols]).reshape(self.h.shape)

    def winvT(self, u):
        return self.Rinv @ u @ np.swapaxes(self.Rinv, -1, -2)

    def s(self):
        return (self.R * self.lam[:, None, :]) @ np.swapaxes(self.R, -1, -2)

    def z(self):
        Rt = np.swapaxes(self.Rinv, -1, -2)
        return (Rt * self.lam[:, None, :]) @ self.Rinv

    def lam_sq(self):
        return (self.lam ** 2)[:, :, None] * self.eye

    def lam_div(self, v):
        # solve lam o x = v (Jordan product) for symmetric v
        return 2.0 * v / (self.lam[:, :, None] + self.lam[:, None, :])

    @staticmethod
    def prod(u, v):
        return 0.5 * (u @ v + v @ u)

    @staticmethod
    def inner(u, v):
        return float(np.sum(u * v))

    def max_step(self, ds):
        isq = 1.0 / np.sqrt(self.lam)
        t = np.linalg.eigvalsh(isq[:, :, None] * ds * isq[:, None, :]).min()
        return np.inf if t >= 0 else -1.0 / t

    def rescale(self, s_new, z_new):
        L1 = np.linalg.cholesky(_sym(s_new))
        L2 = np.linalg.cholesky(_sym(z_new))
        _, lam, Vt = np.linalg.svd(np.swapaxes(L2, -1, -2) @ L1)
        rs = 1.0 / np.sqrt(lam)
        self.R = self.R @ (L1 @ np.swapaxes(Vt, -1, -2)) * rs[:, None, :]
        # inverse: diag(sqrt(lam)) V^T L1^{-1} Rinv
        t = np.linalg.solve(L1, self.Rinv)
        self.Rinv = np.sqrt(lam)[:, :, None] * (Vt @ t)
        self.lam = lam

    @staticmethod
    def interior_shift(u):
        return -np.linalg.eigvalsh(_sym(u)).min()


class _Nonneg:
    def __init__(self, blk: NonnegBlock, idx: int):
        self.blk = blk
        self.idx = [idx]
        self.cols = blk.cols
        self.h = blk.h
        self.q = blk.size
        self.d = np.ones(self.q)
        self.lam = np.ones(self.q)

    @staticmethod
    def split(u):
        return [u]

    def apply(self, x):
        return self.blk.apply(x)

    def adjoint_add(self, out, z):
        out[self.cols] += self.blk.adjoint(z)

    def e(self):
        return np.ones(self.q)

    def lam_mat(self):
        return self.lam.copy()

    def scaled_G(self):
        return (self.blk.mat / self.d[:, None]).T

    def add_normal(self, H, g):
        H[np.ix_(self.cols, self.cols)] += g @ g.T

    def g_add(self, out, g, v):
        out[self.cols] += g @ v

    def gT(self, g, ux):
        return g.T @ ux[self.cols]

    def winvT(self, u):
        return u / self.d

    def s(self):
        return self.d * self.lam

    def z(self):
        return self.lam / self.d

    def lam_sq(self):
        return self.lam ** 2

    def lam_div(self, v):
        return v / self.lam

    @staticmethod
    def prod(u, v):
        return u * v

    @staticmethod
    def inner(u, v):
        return float(u @ v)

    def max_step(self, ds):
        r = ds / self.lam
        t = r.min() if r.size else 0.0
        return np.inf if t >= 0 else -1.0 / t

    def rescale(self, s_new, z_new):
        self.d = self.d * np.sqrt(s_new / z_new)
        self.lam = np.sqrt(s_new * z_new)

    @staticmethod
    def interior_shift(u):
        return -u.min() if u.size else -1.0


def _check_equalities(prog: ConicProgram) -> None:
    A = prog.A
    if A.shape[0] == 0:
        return
    # pivoted QR of A^T: trailing pivots beyond the rank are dependent rows
    _, r, piv = sla.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(A.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0) * 1e3
    rank = int(np.sum(diag > tol))
    if rank < A.shape[0]:
        bad = sorted(prog.eq_row_name(int(i)) for i in piv[rank:])
        raise IllPosedProgram(
            f"equality constraints are rank deficient ({rank} < {A.shape[0]}); "
            f"dependent rows: {', '.join(bad[:8])}{' ...' if len(bad) > 8 else ''}"
        )


def _cho_regularized(M: np.ndarray):
    """Cholesky factor, adding a growing diagonal shift if M is numerically singular.

    Near the optimum of degenerate programs the scaled normal matrix loses
    definiteness in floating point; the shift is compensated by iterative
    refinement of the KKT solve.
    """
    try:
        return sla.cho_factor(M, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    scale = max(float(np.max(np.abs(np.diag(M)))), 1e-300)
    for rel in (1e-14, 1e-12, 1e-10):
        try:
            return sla.cho_factor(M + rel * scale * np.eye(M.shape[0]), lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError("normal matrix is not positive definite")


class _Kkt:
    """Factorization of the scaled KKT system for one scaling."""

    def __init__(self, prog: ConicProgram, cones: list):
        self.prog = prog
        self.cones = cones
        n = prog.n
        H = prog.A.T @ prog.A
        self.gs = []
        for cone in cones:
            g = cone.scaled_G()
            self.gs.append(g)
            cone.add_normal(H, g)
        free = np.flatnonzero(np.diag(H) <= 0.0)
        if free.size:
            raise IllPosedProgram(
                "normal matrix is singular; variables not determined by any constraint: "
                f"{free[:8].tolist()}"
            )
        self.Hf = _cho_regularized(H)
        A = prog.A
        if A.shape[0]:
            HiAt = sla.cho_solve(self.Hf, A.T, check_finite=False)
            S = A @ HiAt
            self.Sf = _cho_regularized(S)
        else:
            self.Sf = None
        self.n = n

    def _solve_once(self, px, py, pz):
        A = self.prog.A
        rhs = px.copy()
        for cone, g, v in zip(self.cones, self.gs, pz):
            cone.g_add(rhs, g, v)
        if A.shape[0]:
            rhs += A.T @ py
            t = sla.cho_solve(self.Hf, rhs, check_finite=False)
            uy = sla.cho_solve(self.Sf, A @ t - py, check_finite=False)
            ux = sla.cho_solve(self.Hf, rhs - A.T @ uy, check_finite=False)
        else:
            uy = np.zeros(0)
            ux = sla.cho_solve(self.Hf, rhs, check_finite=False)
        uz = []
        for cone, g, v in zip(self.cones, self.gs, pz):
            uz.append(cone.gT(g, ux) - v)
        return ux, uy, uz

    def _apply(self, ux, uy, uz):
        # scaled KKT operator: [0 A^T Ghat^T; A 0 0; Ghat 0 -I]
        A = self.prog.A
        ox = A.T @ uy if A.shape[0] else np.zeros(self.n)
        ox = ox.copy()
        oz = []
        for cone, g, w in zip(self.cones, self.gs, uz):
            cone.g_add(ox, g, w)
            oz.append(cone.gT(g, ux) - w)
        oy = A @ ux if A.shape[0] else np.zeros(0)
        return ox, oy, oz

    def solve(self, px, py, pz, refine: int = 1):
        ux, uy, uz = self._solve_once(px, py, pz)
        for _ in range(refine):
            ox, oy, oz = self._apply(ux, uy, uz)
            rx, ry = px - ox, py - oy
            rz = [a - b for a, b in zip(pz, oz)]
            dx, dy, dz = self._solve_once(rx, ry, rz)
            ux, uy = ux + dx, uy + dy
            uz = [a + b for a, b in zip(uz, dz)]
        return ux, uy, uz


def _cones(prog: ConicProgram) -> list:
    cones, groups = [], {}
    for i, b in enumerate(prog.blocks):
        if isinstance(b, PsdBlock):
            groups.setdefault((b.size, len(b.cols)), []).append(i)
        else:
            cones.append(_Nonneg(b, i))
    for idx in groups.values():
        cones.append(_PsdGroup([prog.blocks[i] for i in idx], idx))
    return cones


def _unstack(cones: list, us: list, nblocks: int) -> list:
    out = [None] * nblocks
    for cone, u in zip(cones, us):
        for i, part in zip(cone.idx, cone.split(u)):
            out[i] = part
    return out


def solve(prog: ConicProgram, tol: SolverTolerances | None = None) -> SolverResult:
    """Solve ``prog``; never raises on infeasibility, only on ill-posed input."""
    tol = tol or SolverTolerances()
    _check_equalities(prog)
    sign = 1.0 if prog.sense == "min" else -1.0
    c = sign * prog.c
    A, b = prog.A, prog.b
    cones = _cones(prog)
    hs = [cone.h for cone in cones]
    deg = prog.degree
    n = prog.n

    resx0 = max(1.0, np.linalg.norm(c))
    resy0 = max(1.0, np.linalg.norm(b)) if b.size else 1.0
    resz0 = max(1.0, np.sqrt(sum(np.sum(h * h) for h in hs)))

    def apply_G(x):
        return [cone.apply(x) for cone in cones]

    def apply_GT(zs):
        out = np.zeros(n)
        for cone, zk in zip(cones, zs):
            cone.adjoint_add(out, zk)
        return out

    def inner(us, vs):
        return sum(cone.inner(u, v) for cone, u, v in zip(cones, us, vs))

    def norm(us):
        return np.sqrt(max(inner(us, us), 0.0))

    # ---- initial point (W = I) ---------------------------------------------
    kkt = _Kkt(prog, cones)
    x, _, zt = kkt.solve(np.zeros(n), b.copy(), [h.copy() for h in hs], tol.refine)
    s = [-v for v in zt]
    _, y, z = kkt.solve(-c, np.zeros(b.size), [np.zeros_like(h) for h in hs], tol.refine)

    def shift(us):
        a = max(cone.interior_shift(u) for cone, u in zip(cones, us)) if cones else -1.0
        if a >= -1e-8 * max(norm(us), 1.0):
            us = [u + (1.0 + a) * cone.e() for cone, u in zip(cones, us)]
        return us

    s, z = shift(s), shift(z)
    for cone, sk, zk in zip(cones, s, z):
        cone.rescale(sk, zk)
    tau, kappa = 1.0, 1.0

    result = None
    best, best_merit = None, np.inf
    it = 0
    for it in range(tol.max_iter + 1):
        s = [cone.s() for cone in cones]
        z = [cone.z() for cone in cones]
        Gx = apply_G(x)
        GTz = apply_GT(z)
        Aty = A.T @ y if b.size else np.zeros(n)
        rx = -(Aty + GTz + c * tau)
        ry = A @ x - b * tau if b.size else np.zeros(0)
        rz = [sk + gk - h * tau for sk, gk, h in zip(s, Gx, hs)]
        cx = float(c @ x)
        by = float(b @ y) if b.size else 0.0
        hz = inner(hs, z)
        rt = kappa + cx + by + hz
        gap = sum(float(np.sum(cone.lam ** 2)) for cone in cones)
        mu = (gap + tau * kappa) / (deg + 1)
        pcost = cx / tau
        dcost = -(by + hz) / tau
        pres = max(np.linalg.norm(ry) / tau / resy0, norm(rz) / tau / resz0)
        dres = np.linalg.norm(rx) / tau / resx0
        abs_gap = max(gap / tau ** 2, abs(pcost - dcost))
        log.debug("it %d pcost %.10e dcost %.10e gap %.2e pres %.2e dres %.2e k/t %.2e",
                  it, pcost, dcost, abs_gap, pres, dres, kappa / tau)
        merit = max(pres / tol.feas, dres / tol.feas,
                    abs_gap / (tol.gap * max(1.0, min(abs(pcost), abs(dcost)))))
        if merit < best_merit:
            best_merit = merit
            best = (x.copy(), y.copy(), z, s, tau, pcost, dcost, pres, dres, it)

        if (pres <= tol.feas and dres <= tol.feas
                and abs_gap <= tol.gap * max(1.0, min(abs(pcost), abs(dcost)))):
            result = ("optimal", "")
            break
        # infeasibility certificates
        if by + hz < 0:
            pinf = np.linalg.norm(Aty + GTz) / resx0 / (-(by + hz))
            if pinf <= tol.feas:
                result = ("infeasible", "primal")
                break
        if cx < 0:
            dinf = max(np.linalg.norm(A @ x) / resy0 if b.size else 0.0,
                       norm([gk + sk for gk, sk in zip(Gx, s)]) / resz0) / (-cx)
            if dinf <= tol.feas:
                result = ("infeasible", "dual")
                break
        if it == tol.max_iter:
            result = ("max-iterations", "iteration limit reached")
            break

        try:
            kkt = _Kkt(prog, cones)
        except IllPosedProgram as exc:
            result = ("numerical-failure", str(exc))
            break
        except (np.linalg.LinAlgError, ValueError) as exc:
            result = ("numerical-failure", f"KKT factorization failed: {exc}")
            break
        hs_t = [cone.winvT(h) for cone, h in zip(cones, hs)]
        x2, y2, z2 = kkt.solve(-c, b, hs_t, tol.refine)
        z2sq = inner(z2, z2)
        lam = [cone.lam_mat() for cone in cones]

        def newton(dx, dy, dz, dtau, ds, dkappa):
            lds = [cone.lam_div(v) for cone, v in zip(cones, ds)]
            pz = [cone.winvT(v) - w for cone, v, w in zip(cones, dz, lds)]
            x1, y1, z1 = kkt.solve(-dx, dy, pz, tol.refine)
            dt = (dtau - dkappa / tau - c @ x1 - (b @ y1 if b.size else 0.0) - inner(hs_t, z1)) \
                / (-z2sq - kappa / tau)
            Dx = x1 + dt * x2
            Dy = y1 + dt * y2
            Dz = [u + dt * v for u, v in zip(z1, z2)]
            Ds = [w - v for w, v in zip(lds, Dz)]
            Dk = (dkappa - kappa * dt) / tau
            return Dx, Dy, Dz, dt, Ds, Dk

        def max_step(Dz, Ds, dt, dk):
            a = np.inf
            for cone, u, v in zip(cones, Ds, Dz):
                a = min(a, cone.max_step(u), cone.max_step(v))
            if dt < 0:
                a = min(a, -tau / dt)
            if dk < 0:
                a = min(a, -kappa / dk)
            return a

        try:
            # predictor
            ds = [-cone.lam_sq() for cone in cones]
            aff = newton(-rx, -ry, [-v for v in rz], -rt, ds, -tau * kappa)
            a_aff = min(1.0, max_step(aff[2], aff[4], aff[3], aff[5]))
            sigma = (1.0 - a_aff) ** 3
            # corrector
            ds = [-cone.lam_sq() - cone.prod(u, v) + sigma * mu * cone.e()
                  for cone, u, v in zip(cones, aff[4], aff[2])]
            dk = -tau * kappa - aff[3] * aff[5] + sigma * mu
            f = 1.0 - sigma
            Dx, Dy, Dz, dt, Ds, Dk = newton(-f * rx, -f * ry, [-f * v for v in rz], -f * rt, ds, dk)
            alpha = min(1.0, tol.step * max_step(Dz, Ds, dt, Dk))
            if not np.isfinite(alpha) or alpha < 1e-12:
                result = ("numerical-failure", "step length collapsed")
                break
            x = x + alpha * Dx
            y = y + alpha * Dy
            tau = tau + alpha * dt
            kappa = kappa + alpha * Dk
            for cone, l, u, v in zip(cones, lam, Ds, Dz):
                cone.rescale(l + alpha * u, l + alpha * v)
        except (np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
            result = ("numerical-failure", f"{type(exc).__name__}: {exc}")
            break

    status, msg = result
    if status in ("numerical-failure", "max-iterations") and best_merit <= tol.near:
        # the end game stalled; fall back to the best iterate seen
        x, y, z, s, tau, pcost, dcost, pres, dres, it = best
        status, msg = "near-optimal", f"{msg}; returning iterate {it} within {best_merit:.2g}x of tolerance"
        log.info("solver %s", msg)
    z, s = _unstack(cones, z, len(prog.blocks)), _unstack(cones, s, len(prog.blocks))
    infeas = None
    if status == "infeasible":
        infeas, msg = msg, f"{msg} infeasibility certificate found"
        # certificates are directions; normalize for reporting
        scale = -(by + hz) if infeas == "primal" else -cx
        xs, ys, zs_, ss = x / scale, y / scale, [v / scale for v in z], [v / scale for v in s]
        pobj = np.inf if infeas == "primal" else -np.inf
        dobj = pobj
        gapv = np.nan
    else:
        xs, ys = x / tau, y / tau
        zs_ = [v / tau for v in z]
        ss = [v / tau for v in s]
        pobj, dobj, gapv = pcost, dcost, pcost - dcost
    if sign < 0:
        pobj, dobj = -pobj, -dobj
        gapv = -gapv if np.isfinite(gapv) else gapv
    out = SolverResult(
        status=status,
        primal_objective=pobj + prog.offset,
        dual_objective=dobj + prog.offset,
        gap=abs(gapv) if np.isfinite(gapv) else gapv,
        x=xs, y=ys, z=zs_, s=ss,
        iterations=it,
        primal_residual=pres,
        dual_residual=dres,
        infeasibility=infeas,
        message=msg,
    )
    log.debug("solve finished: %s after %d iterations", status, it)
    return out
