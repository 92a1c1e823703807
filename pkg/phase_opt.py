# phase_opt.py
"""
RIS phase optimization on the complex circle manifold {theta : |theta_i| = 1}.

Gradients follow the 2 * d/d(conj theta) convention, so for a direction d the
directional derivative of the sum rate is Re(<egrad, d>) = Re(egrad^H d).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from logger import logger
from quantizer import CombinerState, aqnm_pair, sinr_terms, sum_rate
from scenario import PAPER_FAITHFUL

LN2 = np.log(2.0)


@dataclass(frozen=True)
class MoOptions:
    tol: float = 1e-6
    max_iter: int = 200
    initial_step: float = 1.0
    shrink: float = 0.5
    armijo_c: float = 1e-4
    max_backtrack: int = 50
    conjugate: bool = False
    fd_grad: bool = False
    fd_step: float = 1e-6


@dataclass
class MoResult:
    theta: np.ndarray
    objective: float
    iterations: int
    status: str                      # ok | stalled
    trace: List[float] = field(default_factory=list)


def sum_rate_egrad(chan, comb: CombinerState, decoders, theta, sigma2: float, mode: str = PAPER_FAITHFUL) -> np.ndarray:
    """Analytic 2 * d(sum_k R_k)/d(conj theta), including the theta dependence of A_a."""
    f = comb.combiner
    gain, dist = aqnm_pair(comb.bits, mode)
    U = np.asarray(decoders)
    H = chan.h
    X = chan.g.conj().T @ f                                   # (n_ris, M)
    Z = X.conj().T @ (theta[:, None] * H)                     # F^H G diag(theta) H, (M, K)
    C = U.conj().T @ Z                                        # C[k, l] = u_k^H Z[:, l]
    XU = X @ U                                                # column k: G^H F u_k
    Y = H.conj() @ Z.T                                        # (n_ris, M); Y[:, m] = sum_l conj(h_l) z_ml
    quant_grad = 2.0 * dist * (X * Y) @ (np.abs(U) ** 2)      # (n_ris, K)

    signal, denom = sinr_terms(chan, comb, theta, U, sigma2, mode)
    total = signal + denom
    K = U.shape[1]
    grad = np.zeros(chan.n_ris, dtype=complex)
    for k in range(K):
        all_users = XU[:, k] * (H.conj() @ C[k, :])
        own = XU[:, k] * (H[:, k].conj() * C[k, k])
        g_total = 2.0 * gain ** 2 * all_users + quant_grad[:, k]
        g_denom = g_total - 2.0 * gain ** 2 * own
        grad += (g_total / total[k] - g_denom / denom[k]) / LN2
    return grad


def sum_rate_egrad_fd(chan, comb, decoders, theta, sigma2: float, mode: str = PAPER_FAITHFUL,
                      step: float = 1e-6) -> np.ndarray:
    """Central differences on the real and imaginary parts of theta."""
    n = theta.shape[0]
    grad = np.zeros(n, dtype=complex)
    for i in range(n):
        e = np.zeros(n, dtype=complex)
        e[i] = step
        re = (sum_rate(chan, comb, theta + e, decoders, sigma2, mode)
              - sum_rate(chan, comb, theta - e, decoders, sigma2, mode)) / (2 * step)
        im = (sum_rate(chan, comb, theta + 1j * e, decoders, sigma2, mode)
              - sum_rate(chan, comb, theta - 1j * e, decoders, sigma2, mode)) / (2 * step)
        grad[i] = re + 1j * im
    return grad


def riemannian_grad(theta: np.ndarray, egrad: np.ndarray) -> np.ndarray:
    return egrad - np.real(egrad * theta.conj()) * theta


def retract(theta: np.ndarray, direction: np.ndarray, step: float) -> np.ndarray:
    """Elementwise normalization; an element that lands on zero keeps its previous value."""
    v = theta + step * direction
    mag = np.abs(v)
    out = theta.copy()
    ok = mag > 0
    out[ok] = v[ok] / mag[ok]
    return out


def _inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.vdot(a, b)))


def mo_solve(chan, comb: CombinerState, decoders, sigma2: float, theta0: np.ndarray,
             mode: str = PAPER_FAITHFUL, options: MoOptions = MoOptions()) -> MoResult:
    """Riemannian ascent with Armijo backtracking; each accepted step raises the sum rate."""
    def objective(th):
        return sum_rate(chan, comb, th, decoders, sigma2, mode)

    def gradient(th):
        if options.fd_grad:
            return sum_rate_egrad_fd(chan, comb, decoders, th, sigma2, mode, options.fd_step)
        return sum_rate_egrad(chan, comb, decoders, th, sigma2, mode)

    theta = theta0 / np.abs(theta0)
    value = objective(theta)
    trace = [value]
    rgrad = riemannian_grad(theta, gradient(theta))
    direction = rgrad
    for it in range(options.max_iter):
        if np.linalg.norm(rgrad) < options.tol:
            return MoResult(theta, value, it, "ok", trace)
        slope = _inner(rgrad, direction)
        if slope <= 0:
            direction, slope = rgrad, _inner(rgrad, rgrad)
        step = options.initial_step
        for _ in range(options.max_backtrack):
            cand = retract(theta, direction, step)
            cand_value = objective(cand)
            if cand_value >= value + options.armijo_c * step * slope:
                break
            step *= options.shrink
        else:
            logger.debug("[MO] line search failed at iteration %d (|rgrad|=%.3e)", it, np.linalg.norm(rgrad))
            return MoResult(theta, value, it, "stalled", trace)
        theta, value = cand, cand_value
        trace.append(value)
        new_rgrad = riemannian_grad(theta, gradient(theta))
        if options.conjugate:
            # Polak-Ribiere+, previous direction carried over by tangent projection
            carried = riemannian_grad(theta, direction)
            old = riemannian_grad(theta, rgrad)
            beta = max(0.0, _inner(new_rgrad, new_rgrad - old) / max(_inner(rgrad, rgrad), 1e-300))
            direction = new_rgrad + beta * carried
        else:
            direction = new_rgrad
        rgrad = new_rgrad
    return MoResult(theta, value, options.max_iter, "ok" if np.linalg.norm(rgrad) < options.tol else "stalled", trace)
