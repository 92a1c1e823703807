# mm_decoder.py
"""
Per-user decoder design: maximize u^H B_k u / u^H D_k u by minorize-maximization.

    B_k = sum_l  F_a F^H G Theta h_l h_l^H Theta^H G^H F F_a^H + sigma^2 F_a F^H F F_a^H + A_a
    D_k = B_k - F_a F^H G Theta h_k h_k^H Theta^H G^H F F_a^H

The quotient equals 1 + SINR_k, so its maximizer is the SINR-optimal decoder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

from logger import logger
from quantizer import CombinerState, QuantizerError, aqnm_pair, combined_channel, quant_noise_diag
from scenario import PAPER_FAITHFUL

EPS = float(np.finfo(float).eps)
STALL_STEPS = 3


@dataclass(frozen=True)
class MmOptions:
    tol: float = 1e-8
    max_iter: int = 500


@dataclass
class QuotientPair:
    B: np.ndarray
    Dm: np.ndarray


@dataclass
class MmResult:
    u: np.ndarray
    quotient: float
    iterations: int
    status: str                      # ok | stalled | degenerate
    trace: List[float] = field(default_factory=list)

    @property
    def sinr(self) -> float:
        return self.quotient - 1.0


def build_quotient(chan, comb: CombinerState, theta, sigma2: float, k: int,
                   mode: str = PAPER_FAITHFUL) -> QuotientPair:
    f = comb.combiner
    if not np.any(f):
        raise QuantizerError("empty combiner")
    z = combined_channel(chan, comb, theta)
    gain, _ = aqnm_pair(comb.bits, mode)
    base = sigma2 * gain ** 2 * (f.conj().T @ f) + np.diag(quant_noise_diag(chan, comb, theta, sigma2, mode))
    others = [l for l in range(z.shape[1]) if l != k]
    zo = z[:, others]
    Dm = base + gain ** 2 * (zo @ zo.conj().T)
    zk = z[:, k]
    B = Dm + gain ** 2 * np.outer(zk, zk.conj())
    return QuotientPair(B=0.5 * (B + B.conj().T), Dm=0.5 * (Dm + Dm.conj().T))


def quotient(u: np.ndarray, qp: QuotientPair) -> float:
    return float(np.real(u.conj() @ qp.B @ u) / np.real(u.conj() @ qp.Dm @ u))


def lambda_max(m: np.ndarray) -> float:
    return float(scipy.linalg.eigvalsh(m)[-1])


def quotient_oracle(qp: QuotientPair) -> Tuple[float, np.ndarray]:
    """Dominant generalized eigenpair of (B, Dm)."""
    vals, vecs = scipy.linalg.eigh(qp.B, qp.Dm)
    return float(vals[-1]), vecs[:, -1]


def minorizer(u: np.ndarray, u_bar: np.ndarray, qp: QuotientPair, lam: float) -> float:
    """g(u | u_bar) plus the constant that makes it touch the quotient at u_bar."""
    q = float(np.real(u_bar.conj() @ qp.Dm @ u_bar))
    p = float(np.real(u_bar.conj() @ qp.B @ u_bar))
    shifted = qp.Dm - lam * np.eye(qp.Dm.shape[0])
    upper = lam * np.real(u.conj() @ u) + 2 * np.real(u.conj() @ shifted @ u_bar) - np.real(u_bar.conj() @ shifted @ u_bar)
    return 2 * np.real(u_bar.conj() @ qp.B @ u) / q - p / q ** 2 * upper


def mm_step(u_prev: np.ndarray, qp: QuotientPair, lam: float = None) -> Tuple[np.ndarray, bool]:
    """One MM update; returns (u_next, degenerate). u_next has unit norm."""
    if lam is None:
        lam = lambda_max(qp.Dm)
    q = float(np.real(u_prev.conj() @ qp.Dm @ u_prev))
    p = float(np.real(u_prev.conj() @ qp.B @ u_prev))
    beta = lam * p / q ** 2
    if beta <= 0.0 or not np.isfinite(beta):
        return u_prev, True
    v = qp.B @ u_prev / q - p * (qp.Dm @ u_prev - lam * u_prev) / q ** 2
    u_next = v / beta
    nrm = np.linalg.norm(u_next)
    if nrm == 0.0:
        return u_prev, True
    return u_next / nrm, False


class _Residual:
    """Generalized eigen-residual of (B, Dm) measured in the Dm-whitened frame."""

    def __init__(self, qp: QuotientPair):
        self.qp = qp
        try:
            self.factor = scipy.linalg.cho_factor(qp.Dm, lower=True)
        except scipy.linalg.LinAlgError:
            self.factor = None

    def raw(self, u: np.ndarray, value: float) -> np.ndarray:
        return self.qp.B @ u - value * (self.qp.Dm @ u)

    def precondition(self, r: np.ndarray) -> np.ndarray:
        if self.factor is None:
            return r
        return scipy.linalg.cho_solve(self.factor, r)

    def relative(self, u: np.ndarray, value: float) -> float:
        r = self.raw(u, value)
        if self.factor is None:
            return float(np.linalg.norm(r) / (value * max(np.linalg.norm(self.qp.Dm @ u), 1e-300)))
        # ||L^{-1} r|| / (q ||L^H u||) with Dm = L L^H
        whitened = scipy.linalg.solve_triangular(self.factor[0], r, lower=True)
        scale = math.sqrt(max(float(np.real(u.conj() @ self.qp.Dm @ u)), 1e-300))
        return float(np.linalg.norm(whitened) / (value * scale))


def ritz_refine(qp: QuotientPair, columns: List[np.ndarray]) -> Optional[np.ndarray]:
    """Best quotient over span(columns), or None when the span is empty or the small pencil fails."""
    cols = []
    for c in columns:
        if c is None:
            continue
        nrm = np.linalg.norm(c)
        if nrm > 0.0 and np.isfinite(nrm):
            cols.append(c / nrm)
    if not cols:
        return None
    V = scipy.linalg.orth(np.column_stack(cols), rcond=1e-10)
    if V.shape[1] == 0:
        return None
    Bv = V.conj().T @ qp.B @ V
    Dv = V.conj().T @ qp.Dm @ V
    try:
        _, vecs = scipy.linalg.eigh(0.5 * (Bv + Bv.conj().T), 0.5 * (Dv + Dv.conj().T))
    except (scipy.linalg.LinAlgError, ValueError):
        return None
    y = V @ vecs[:, -1]
    nrm = np.linalg.norm(y)
    return y / nrm if nrm > 0.0 and np.isfinite(nrm) else None


def mm_solve(qp: QuotientPair, u0: np.ndarray, tol: float = 1e-8, max_iter: int = 500) -> MmResult:
    """
    MM ascent on the quotient, each step refined over span{u_mm, u, u_prev, Dm^-1 r}.

    The span holds the MM update, so the refined point never has a lower quotient than
    the plain MM step. Stops when the whitened eigen-residual drops below tol; a quotient
    flat to rounding for STALL_STEPS steps ends the run early.
    """
    lam = lambda_max(qp.Dm)
    res = _Residual(qp)
    u = u0 / np.linalg.norm(u0)
    value = quotient(u, qp)
    trace = [value]
    prev = None
    flat = 0
    for it in range(1, max_iter + 1):
        u_mm, degenerate = mm_step(u, qp, lam)
        if degenerate:
            return MmResult(u, value, it, "degenerate", trace)
        cand, cand_value = u_mm, quotient(u_mm, qp)
        ritz = ritz_refine(qp, [u_mm, u, prev, res.precondition(res.raw(u_mm, cand_value))])
        if ritz is not None:
            ritz_value = quotient(ritz, qp)
            if ritz_value >= cand_value:
                cand, cand_value = ritz, ritz_value
        flat = flat + 1 if cand_value <= value * (1.0 + 4.0 * EPS) else 0
        if cand_value >= value:
            prev, u, value = u, cand, cand_value
        trace.append(value)
        rel = res.relative(u, value)
        if rel <= tol:
            return MmResult(u, value, it, "ok", trace)
        if flat >= STALL_STEPS:
            # rounding floor: the residual cannot shrink further in floating point
            status = "ok" if rel <= math.sqrt(tol) else "stalled"
            return MmResult(u, value, it, status, trace)
    return MmResult(u, value, max_iter, "stalled", trace)


def matched_filter(chan, comb: CombinerState, theta, k: int, mode: str = PAPER_FAITHFUL) -> np.ndarray:
    gain, _ = aqnm_pair(comb.bits, mode)
    return gain * combined_channel(chan, comb, theta)[:, k]


def optimize_decoders(chan, comb: CombinerState, theta, sigma2: float, mode: str = PAPER_FAITHFUL,
                      u_init: np.ndarray = None, options: MmOptions = MmOptions()) -> Tuple[np.ndarray, List[MmResult]]:
    """Run the MM iteration for every user; returns (U with unit-norm columns, per-user results)."""
    K = chan.n_users
    M = comb.n_rf
    U = np.zeros((M, K), dtype=complex)
    results = []
    for k in range(K):
        qp = build_quotient(chan, comb, theta, sigma2, k, mode)
        u0 = matched_filter(chan, comb, theta, k, mode) if u_init is None else np.asarray(u_init[:, k])
        if not np.any(u0):
            u0 = np.zeros(M, dtype=complex)
            u0[0] = 1.0
        res = mm_solve(qp, u0, options.tol, options.max_iter)
        if res.status != "ok":
            logger.debug("[MM] user %d: %s after %d steps (quotient %.6g)", k, res.status, res.iterations, res.quotient)
        U[:, k] = res.u
        results.append(res)
    return U, results
