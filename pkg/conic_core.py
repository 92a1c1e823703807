# conic_core.py
"""
Dense primal log-barrier interior-point solver for small concave maximization
problems with

    linear equalities        A x = c
    linear inequalities      B x <= d
    box bounds               l <= x <= u
    convex quadratics        x_I^T Q x_I + q^T x_I + s <= 0        (Q PSD)
    hyperbolic constraints   r(x)^2 <= a(x) b(x), a(x) >= 0, b(x) >= 0   (a, b, r affine)

Equalities are eliminated with a null-space basis, so every Newton step is an
unconstrained step in the reduced coordinates. Infeasible starts go through a
phase-I program that relaxes every inequality by a common slack.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg

import config
from logger import logger

Objective = Callable[[np.ndarray], Tuple[float, np.ndarray, np.ndarray]]

ARMIJO_C = 1e-4
ARMIJO_SHRINK = 0.5
BARRIER_MU = 10.0
MAX_BACKTRACK = 60
CENTERING_EPS = 1e-10
MAX_CENTERING = 50
MAX_INITIAL_T = 1e8
NEWTON_RIDGE = 1e-13
ROUNDING_DECREMENT = 1e-9


@dataclass
class Affine:
    coef: np.ndarray
    const: float = 0.0

    def __call__(self, x: np.ndarray) -> float:
        return float(self.coef @ x + self.const)

    @classmethod
    def var(cls, n: int, i: int, scale: float = 1.0, const: float = 0.0) -> "Affine":
        coef = np.zeros(n)
        coef[i] = scale
        return cls(coef, const)

    @classmethod
    def constant(cls, n: int, value: float) -> "Affine":
        return cls(np.zeros(n), float(value))

    def padded(self, extra: float = 0.0) -> "Affine":
        return Affine(np.append(self.coef, extra), self.const)


@dataclass
class QuadraticConstraint:
    """x_I^T Q x_I + q^T x_I + s <= 0 on the index subset I."""
    Q: np.ndarray
    q: np.ndarray
    s: float
    index: np.ndarray
    group: str = "quadratic"

    def value(self, x: np.ndarray) -> float:
        xi = x[self.index]
        return float(xi @ self.Q @ xi + self.q @ xi + self.s)


@dataclass
class HyperbolicConstraint:
    """r^2 <= a * b with a, b >= 0."""
    r: Affine
    a: Affine
    b: Affine
    group: str = "hyperbolic"


def schur_2x2_to_hyperbolic(a: Affine, b: Affine, r: Affine, group: str = "schur") -> HyperbolicConstraint:
    """[[a, r], [r, b]] >= 0  <=>  r^2 <= a b, a >= 0, b >= 0."""
    return HyperbolicConstraint(r=r, a=a, b=b, group=group)


def hyperbolic_holds(a: float, b: float, r: float) -> bool:
    return a >= 0.0 and b >= 0.0 and a * b >= r * r


@dataclass
class ConicProgram:
    n: int
    objective: Objective
    eq_rows: List[np.ndarray] = field(default_factory=list)
    eq_rhs: List[float] = field(default_factory=list)
    eq_groups: List[str] = field(default_factory=list)
    ineq_rows: List[np.ndarray] = field(default_factory=list)
    ineq_rhs: List[float] = field(default_factory=list)
    ineq_groups: List[str] = field(default_factory=list)
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    quadratics: List[QuadraticConstraint] = field(default_factory=list)
    hyperbolics: List[HyperbolicConstraint] = field(default_factory=list)

    def __post_init__(self):
        if self.lower is None:
            self.lower = np.full(self.n, -np.inf)
        if self.upper is None:
            self.upper = np.full(self.n, np.inf)

    # builders
    def add_eq(self, row, rhs: float, group: str = "equality") -> None:
        self.eq_rows.append(np.asarray(row, dtype=float))
        self.eq_rhs.append(float(rhs))
        self.eq_groups.append(group)

    def add_ineq(self, row, rhs: float, group: str = "linear") -> None:
        self.ineq_rows.append(np.asarray(row, dtype=float))
        self.ineq_rhs.append(float(rhs))
        self.ineq_groups.append(group)

    def set_bounds(self, i, lo: float = -np.inf, hi: float = np.inf) -> None:
        self.lower[i] = lo
        self.upper[i] = hi

    def add_quadratic(self, Q, q, s: float, index=None, group: str = "quadratic") -> None:
        Q = np.asarray(Q, dtype=float)
        Q = 0.5 * (Q + Q.T)
        idx = np.arange(self.n) if index is None else np.asarray(index, dtype=int)
        if Q.shape != (idx.size, idx.size):
            raise ValueError(f"quadratic {group}: Q is {Q.shape}, index has {idx.size} entries")
        jitter = 1e-12 * max(1.0, float(np.trace(np.abs(Q))))
        try:
            np.linalg.cholesky(Q + jitter * np.eye(idx.size))
        except np.linalg.LinAlgError:
            raise ValueError(f"quadratic constraint {group!r} is not PSD") from None
        self.quadratics.append(QuadraticConstraint(Q, np.asarray(q, dtype=float), float(s), idx, group))

    def add_hyperbolic(self, con: HyperbolicConstraint) -> None:
        self.hyperbolics.append(con)

    @property
    def eq_matrix(self) -> Tuple[np.ndarray, np.ndarray]:
        if not self.eq_rows:
            return np.zeros((0, self.n)), np.zeros(0)
        return np.vstack(self.eq_rows), np.asarray(self.eq_rhs)

    def to_text(self) -> str:
        """Plain-text listing for offline cross-checks against another solver."""
        fmt = config.FLOAT_FORMAT.format

        def sparse(vec):
            return " ".join(f"{i}:{fmt(v)}" for i, v in enumerate(vec) if v != 0.0)

        out = [f"n {self.n}"]
        for row, rhs, grp in zip(self.eq_rows, self.eq_rhs, self.eq_groups):
            out.append(f"eq {grp} rhs={fmt(rhs)} {sparse(row)}")
        for row, rhs, grp in zip(self.ineq_rows, self.ineq_rhs, self.ineq_groups):
            out.append(f"le {grp} rhs={fmt(rhs)} {sparse(row)}")
        for i in range(self.n):
            if np.isfinite(self.lower[i]) or np.isfinite(self.upper[i]):
                out.append(f"box {i} {fmt(self.lower[i])} {fmt(self.upper[i])}")
        for qc in self.quadratics:
            out.append(f"quad {qc.group} s={fmt(qc.s)} index={','.join(map(str, qc.index))}")
            out.append("  q " + " ".join(fmt(v) for v in qc.q))
            for qrow in qc.Q:
                out.append("  Q " + " ".join(fmt(v) for v in qrow))
        for hc in self.hyperbolics:
            out.append(f"hyp {hc.group}")
            for name, aff in (("r", hc.r), ("a", hc.a), ("b", hc.b)):
                out.append(f"  {name} const={fmt(aff.const)} {sparse(aff.coef)}")
        return "\n".join(out) + "\n"


@dataclass
class SolveStatus:
    status: str                      # ok | stalled | infeasible
    iterations: int = 0
    stationarity: float = np.inf
    primal: float = np.inf
    dual: float = np.inf             # duality gap certified by the barrier multipliers
    complementarity: float = np.inf
    objective: float = -np.inf
    failed_group: str = ""
    trace: List[float] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "ok"


# ---------------- barrier machinery ----------------
class _QuadBlock:
    """Quadratic constraints sharing one index-set size, stacked for batched evaluation."""

    def __init__(self, quads: List[QuadraticConstraint]):
        self.Q = np.stack([qc.Q for qc in quads])
        self.q = np.stack([qc.q for qc in quads])
        self.s = np.array([qc.s for qc in quads])
        self.idx = np.stack([qc.index for qc in quads])
        self.groups = [qc.group for qc in quads]

    def parts(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        xi = x[self.idx]
        Qx = np.einsum("bij,bj->bi", self.Q, xi)
        g = np.einsum("bi,bi->b", xi, Qx) + np.einsum("bi,bi->b", self.q, xi) + self.s
        return g, 2.0 * Qx + self.q


class _Barrier:
    """Inequality side of a program: slacks, log-barrier value, gradient and Hessian."""

    def __init__(self, prog: ConicProgram):
        n = prog.n
        eye = np.eye(n)
        lo = np.flatnonzero(np.isfinite(prog.lower))
        hi = np.flatnonzero(np.isfinite(prog.upper))
        rows = list(prog.ineq_rows) + [-eye[lo], eye[hi]]
        rows = [np.atleast_2d(r) for r in rows if np.size(r)]
        self.n = n
        self.G = np.vstack(rows) if rows else np.zeros((0, n))
        self.h = np.concatenate([np.asarray(prog.ineq_rhs, dtype=float), -prog.lower[lo], prog.upper[hi]])
        self.lin_groups = list(prog.ineq_groups) + [f"lower[{i}]" for i in lo] + [f"upper[{i}]" for i in hi]

        by_size: Dict[int, List[QuadraticConstraint]] = {}
        for qc in prog.quadratics:
            by_size.setdefault(qc.index.size, []).append(qc)
        self.quad_blocks = [_QuadBlock(group) for group in by_size.values()]

        hyps = prog.hyperbolics
        self.hyp_groups = [hc.group for hc in hyps]
        if hyps:
            self.Ha = np.vstack([hc.a.coef for hc in hyps])
            self.Hb = np.vstack([hc.b.coef for hc in hyps])
            self.Hr = np.vstack([hc.r.coef for hc in hyps])
            self.ca = np.array([hc.a.const for hc in hyps])
            self.cb = np.array([hc.b.const for hc in hyps])
            self.cr = np.array([hc.r.const for hc in hyps])
        n_quads = sum(len(blk.s) for blk in self.quad_blocks)
        self.nu = self.G.shape[0] + n_quads + 4 * len(hyps)

    def _hyp_parts(self, x: np.ndarray):
        a = self.Ha @ x + self.ca
        b = self.Hb @ x + self.cb
        r = self.Hr @ x + self.cr
        return a, b, r

    def slacks(self, x: np.ndarray) -> Tuple[np.ndarray, List[str]]:
        vals = [self.h - self.G @ x]
        names = list(self.lin_groups)
        for blk in self.quad_blocks:
            g, _ = blk.parts(x)
            vals.append(-g)
            names += blk.groups
        if self.hyp_groups:
            a, b, r = self._hyp_parts(x)
            vals.append(np.stack([a, b, a * b - r * r], axis=1).ravel())
            names += [grp for grp in self.hyp_groups for _ in range(3)]
        return np.concatenate(vals), names

    def strictly_feasible(self, x: np.ndarray) -> bool:
        s, _ = self.slacks(x)
        return bool(np.all(s > 0.0))

    def value(self, x: np.ndarray) -> float:
        s, _ = self.slacks(x)
        if np.any(s <= 0.0):
            return np.inf
        return float(-np.sum(np.log(s)))

    def derivatives(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        n = self.n
        grad = np.zeros(n)
        hess = np.zeros((n, n))
        if self.G.shape[0]:
            inv = 1.0 / (self.h - self.G @ x)
            grad += self.G.T @ inv
            hess += (self.G.T * inv ** 2) @ self.G
        for blk in self.quad_blocks:
            g, dg = blk.parts(x)
            rows = np.arange(g.size)[:, None]
            np.add.at(grad, blk.idx, dg / (-g)[:, None])
            DG = np.zeros((g.size, n))
            np.add.at(DG, (rows, blk.idx), dg)
            hess += DG.T @ (DG / (g ** 2)[:, None])
            np.add.at(hess, (blk.idx[:, :, None], blk.idx[:, None, :]), 2.0 * blk.Q / (-g)[:, None, None])
        if self.hyp_groups:
            a, b, r = self._hyp_parts(x)
            hv = a * b - r * r
            # d(ab - r^2) stacked row-wise
            DH = b[:, None] * self.Ha + a[:, None] * self.Hb - 2.0 * r[:, None] * self.Hr
            grad += -DH.T @ (1.0 / hv) - self.Ha.T @ (1.0 / a) - self.Hb.T @ (1.0 / b)
            cross = (self.Ha.T * (1.0 / hv)) @ self.Hb
            hess += (DH.T * (1.0 / hv ** 2)) @ DH
            hess += -(cross + cross.T) + 2.0 * (self.Hr.T * (1.0 / hv)) @ self.Hr
            hess += (self.Ha.T * (1.0 / a ** 2)) @ self.Ha + (self.Hb.T * (1.0 / b ** 2)) @ self.Hb
        return grad, hess


def _safe_objective(prog: ConicProgram, x: np.ndarray):
    with np.errstate(all="ignore"):
        try:
            f, g, H = prog.objective(x)
        except (ValueError, FloatingPointError, ZeroDivisionError):
            return None
    if not np.isfinite(f):
        return None
    return float(f), np.asarray(g, dtype=float), np.asarray(H, dtype=float)


def _newton_direction(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Solve H d = -g on the Jacobi-equilibrated system with a rounding-level ridge."""
    diag = np.abs(np.diag(H))
    d = 1.0 / np.sqrt(np.where(diag > 0.0, diag, 1.0))
    Hs = H * d[:, None] * d[None, :]
    Hs[np.diag_indices_from(Hs)] += NEWTON_RIDGE
    try:
        factor = scipy.linalg.cho_factor(Hs, lower=True, check_finite=False)
        return d * scipy.linalg.cho_solve(factor, -d * g, check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
        return d * scipy.linalg.lstsq(Hs, -d * g)[0]


def _initial_t(gf: np.ndarray, gb: np.ndarray) -> float:
    """Barrier weight whose centering residual ||-t gf + gb|| is smallest, clipped."""
    den = float(gf @ gf)
    if den <= 0.0 or not np.isfinite(den):
        return 1.0
    return float(np.clip(float(gf @ gb) / den, 1.0, MAX_INITIAL_T))


def _barrier_method(prog: ConicProgram, x0: np.ndarray, basis: np.ndarray, tol: float, max_iter: int,
                    stop: Optional[Callable[[np.ndarray], bool]] = None):
    """Central path from a strictly feasible x0. Returns (x, t, newton_iterations, trace, stalled)."""
    barrier = _Barrier(prog)
    x = x0.copy()
    t = None
    iters = 0
    trace: List[float] = []
    while True:
        centering = 0
        while True:
            fo = _safe_objective(prog, x)
            if fo is None:
                return x, t or 1.0, iters, trace, True
            f, gf, Hf = fo
            gb, Hb = barrier.derivatives(x)
            if t is None:
                t = _initial_t(basis.T @ gf, basis.T @ gb)
            grad = -t * gf + gb
            hess = -t * Hf + Hb
            dz = _newton_direction(basis.T @ hess @ basis, basis.T @ grad)
            dx = basis @ dz
            slope = float(grad @ dx)
            decrement = -slope / 2.0
            if decrement <= CENTERING_EPS:
                break
            if iters >= max_iter:
                return x, t, iters, trace, True
            if centering >= MAX_CENTERING:
                # move on along the path; the next weight re-centers from here
                break
            psi = -t * f + barrier.value(x)
            step = 1.0
            accepted = False
            for _ in range(MAX_BACKTRACK):
                xn = x + step * dx
                if barrier.strictly_feasible(xn):
                    fn = _safe_objective(prog, xn)
                    if fn is not None and -t * fn[0] + barrier.value(xn) <= psi + ARMIJO_C * step * slope:
                        accepted = True
                        break
                step *= ARMIJO_SHRINK
            iters += 1
            centering += 1
            if not accepted:
                if decrement <= ROUNDING_DECREMENT * max(1.0, abs(psi)):
                    break
                return x, t, iters, trace, True
            x = xn
            if stop is not None and stop(x):
                return x, t, iters, trace, False
        trace.append(f)
        if barrier.nu == 0 or barrier.nu / t < tol:
            return x, t, iters, trace, False
        t *= BARRIER_MU


def _equality_basis(prog: ConicProgram, x0: np.ndarray):
    A, c = prog.eq_matrix
    if A.shape[0] == 0:
        return x0.copy(), np.eye(prog.n), 0.0
    x = x0 - scipy.linalg.lstsq(A, A @ x0 - c)[0]
    resid = float(np.max(np.abs(A @ x - c)))
    return x, scipy.linalg.null_space(A), resid


def _phase_one(prog: ConicProgram, x: np.ndarray) -> ConicProgram:
    """Relax every inequality by a shared slack sigma (last variable) and minimize sigma."""
    n = prog.n

    def objective(z):
        g = np.zeros(n + 1)
        g[-1] = -1.0
        return -z[-1], g, np.zeros((n + 1, n + 1))

    p1 = ConicProgram(n + 1, objective)
    for row, rhs, grp in zip(prog.eq_rows, prog.eq_rhs, prog.eq_groups):
        p1.add_eq(np.append(row, 0.0), rhs, grp)
    for row, rhs, grp in zip(prog.ineq_rows, prog.ineq_rhs, prog.ineq_groups):
        p1.add_ineq(np.append(row, -1.0), rhs, grp)
    for i in range(n):
        if np.isfinite(prog.lower[i]):
            row = np.zeros(n + 1)
            row[i], row[-1] = -1.0, -1.0
            p1.add_ineq(row, -prog.lower[i], f"lower[{i}]")
        if np.isfinite(prog.upper[i]):
            row = np.zeros(n + 1)
            row[i], row[-1] = 1.0, -1.0
            p1.add_ineq(row, prog.upper[i], f"upper[{i}]")
    for qc in prog.quadratics:
        k = qc.index.size
        Q = np.zeros((k + 1, k + 1))
        Q[:k, :k] = qc.Q
        p1.quadratics.append(QuadraticConstraint(Q, np.append(qc.q, -1.0), qc.s, np.append(qc.index, n), qc.group))
    for hc in prog.hyperbolics:
        p1.add_hyperbolic(HyperbolicConstraint(hc.r.padded(0.0), hc.a.padded(1.0), hc.b.padded(1.0), hc.group))
    p1.set_bounds(n, lo=-1.0)
    return p1


def _initial_sigma(prog: ConicProgram, x: np.ndarray) -> float:
    need = [0.0]
    barrier = _Barrier(prog)
    if barrier.G.shape[0]:
        need.append(float(np.max(barrier.G @ x - barrier.h)))
    for qc in prog.quadratics:
        need.append(qc.value(x))
    for hc in prog.hyperbolics:
        a, b, r = hc.a(x), hc.b(x), hc.r(x)
        need.append(max(-a, -b) + abs(r))
    return max(need) + 1.0


def _kkt(prog: ConicProgram, x: np.ndarray, t: float, basis: np.ndarray, eq_resid: float):
    barrier = _Barrier(prog)
    fo = _safe_objective(prog, x)
    f, gf = (fo[0], fo[1]) if fo is not None else (-np.inf, np.zeros(prog.n))
    gb, _ = barrier.derivatives(x) if barrier.nu else (np.zeros(prog.n), None)
    stat = float(np.linalg.norm(basis.T @ (gf - gb / t))) / max(1.0, float(np.linalg.norm(gf)))
    s, _ = barrier.slacks(x)
    primal = max(eq_resid, float(max(0.0, -np.min(s))) if s.size else 0.0)
    comp = 1.0 / t if s.size else 0.0
    # barrier multipliers 1/(t s_i) are dual feasible; the gap they certify is nu / t
    gap = barrier.nu / t
    return f, stat, primal, comp, gap


def solve(prog: ConicProgram, x0: Optional[np.ndarray] = None, tol: float = 1e-7,
          max_iter: int = 200) -> Tuple[np.ndarray, SolveStatus]:
    """Maximize prog.objective; deterministic given (prog, x0)."""
    x_start = np.zeros(prog.n) if x0 is None else np.asarray(x0, dtype=float)
    x, basis, eq_resid = _equality_basis(prog, x_start)
    scale = 1.0 + float(np.max(np.abs(prog.eq_matrix[1]))) if prog.eq_rows else 1.0
    if eq_resid > 1e-8 * scale:
        return x, SolveStatus("infeasible", failed_group="equality", primal=eq_resid)

    barrier = _Barrier(prog)
    iters = 0
    if not barrier.strictly_feasible(x):
        p1 = _phase_one(prog, x)
        z0 = np.append(x, _initial_sigma(prog, x))
        _, basis1, _ = _equality_basis(p1, z0)
        z, _, iters, _, _ = _barrier_method(
            p1, z0, basis1, tol, max_iter, stop=lambda z: z[-1] < 0.0 and barrier.strictly_feasible(z[:-1])
        )
        x = z[:-1]
        if not barrier.strictly_feasible(x):
            s, names = barrier.slacks(x)
            worst = names[int(np.argmin(s))] if s.size else "unknown"
            logger.debug("[SOLVER] phase I failed, worst group %s (sigma=%.3e)", worst, z[-1])
            return x, SolveStatus("infeasible", iterations=iters, failed_group=worst, primal=float(-np.min(s)))

    if basis.shape[1] == 0:
        f, _, primal, _, _ = _kkt(prog, x, 1.0 / tol, basis, eq_resid)
        return x, SolveStatus("ok", iterations=iters, stationarity=0.0, primal=primal, dual=0.0, complementarity=0.0,
                              objective=f, trace=[f])

    x, t, n2, trace, stalled = _barrier_method(prog, x, basis, tol, max(1, max_iter - iters))
    iters += n2
    f, stat, primal, comp, gap = _kkt(prog, x, t, basis, eq_resid)
    ok = not stalled and stat <= tol and primal <= tol and comp <= tol
    status = SolveStatus("ok" if ok else "stalled", iterations=iters, stationarity=stat, primal=primal, dual=gap,
                         complementarity=comp, objective=f, trace=trace)
    if not ok:
        logger.debug("[SOLVER] stalled after %d Newton steps (stat=%.2e comp=%.2e)", iters, stat, comp)
    return x, status
