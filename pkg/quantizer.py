# quantizer.py
"""
AQNM model, hybrid combiner algebra and the achievable-rate formula.

This is the only place the rate is computed; every optimizer scores its
iterates through `rate_per_user` / `sum_rate`.

Notation used below:
    F      = D W                      (n_ap x M hybrid combiner)
    Heff   = G diag(theta) H          (n_ap x K effective channel)
    Z      = F^H Heff                 (M x K combined channel)
    gain   = F_alpha scalar           (alpha in paper-faithful mode, 1 - rho otherwise)
    dist   = distortion scale         (alpha * b, resp. rho * (1 - rho))
    A_a    = dist * diag(Z Z^H + sigma^2 F^H F)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from channel import ChannelRealization, steering_vector
from scenario import PAPER_FAITHFUL, STANDARD_AQNM

ALPHA_SCALE = math.pi * math.sqrt(3.0) / 2.0


class QuantizerError(ValueError):
    pass


@dataclass
class CombinerState:
    codebook: np.ndarray            # D, (n_ap, S)
    selection: np.ndarray           # W, (S, M); binary or relaxed
    bits: float                     # b; integer for a deployable state

    @property
    def n_beams(self) -> int:
        return self.codebook.shape[1]

    @property
    def n_rf(self) -> int:
        return self.selection.shape[1]

    @property
    def combiner(self) -> np.ndarray:
        return self.codebook @ self.selection

    def is_binary(self, tol: float = 1e-12) -> bool:
        w = self.selection
        binary = np.all((np.abs(w) <= tol) | (np.abs(w - 1.0) <= tol))
        cols_ok = np.allclose(w.sum(axis=0), 1.0, atol=tol)
        rows_ok = np.all(w.sum(axis=1) <= 1.0 + tol)
        return bool(binary and cols_ok and rows_ok)

    def beams(self) -> Tuple[int, ...]:
        """Beam index per RF chain of a binary selection."""
        return tuple(int(s) for s in np.argmax(self.selection, axis=0))


def selection_from_beams(beams: Sequence[int], n_beams: int) -> np.ndarray:
    w = np.zeros((n_beams, len(beams)))
    for m, s in enumerate(beams):
        w[s, m] = 1.0
    return w


def dft_codebook(n_ap: int, n_beams: int) -> np.ndarray:
    """S orthonormal DFT beams, evenly spread over the N-point DFT grid."""
    cols = []
    for s in range(n_beams):
        idx = (s * n_ap) // n_beams
        psi = 2.0 * idx / n_ap
        if psi >= 1.0:
            psi -= 2.0
        cols.append(steering_vector(n_ap, math.asin(psi)))
    return np.stack(cols, axis=1)


def unit_modulus(theta: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.all(np.abs(np.abs(theta) - 1.0) <= tol))


# ---------------- AQNM ----------------
def alpha_of_bits(b: float) -> float:
    if b < 0:
        raise QuantizerError(f"bits must be nonnegative, got {b}")
    return ALPHA_SCALE * 4.0 ** (-b)


def aqnm_pair(b: float, mode: str = PAPER_FAITHFUL) -> Tuple[float, float]:
    """(signal gain, distortion scale) for b bits."""
    a = alpha_of_bits(b)
    if mode == PAPER_FAITHFUL:
        return a, a * b
    if mode == STANDARD_AQNM:
        return 1.0 - a, a * (1.0 - a)
    raise QuantizerError(f"unknown aqnm mode {mode!r}")


# ---------------- combiner algebra ----------------
def effective_channel(chan: ChannelRealization, theta: np.ndarray) -> np.ndarray:
    return chan.g @ (theta[:, None] * chan.h)


def combined_channel(chan: ChannelRealization, comb: CombinerState, theta: np.ndarray) -> np.ndarray:
    f = comb.combiner
    if not np.any(f):
        raise QuantizerError("empty combiner")
    return f.conj().T @ effective_channel(chan, theta)


def _gram_diag(z: np.ndarray, f: np.ndarray, sigma2: float) -> np.ndarray:
    return np.sum(np.abs(z) ** 2, axis=1) + sigma2 * np.sum(np.abs(f) ** 2, axis=0)


def quant_noise_diag(chan, comb: CombinerState, theta, sigma2: float, mode: str = PAPER_FAITHFUL) -> np.ndarray:
    z = combined_channel(chan, comb, theta)
    _, dist = aqnm_pair(comb.bits, mode)
    return dist * _gram_diag(z, comb.combiner, sigma2)


def quant_noise_cov(chan, comb: CombinerState, theta, sigma2: float, mode: str = PAPER_FAITHFUL) -> np.ndarray:
    return np.diag(quant_noise_diag(chan, comb, theta, sigma2, mode)).astype(complex)


def quantize(y_analog: np.ndarray, comb: CombinerState, chan, theta, sigma2: float,
             rng: np.random.Generator, mode: str = PAPER_FAITHFUL) -> np.ndarray:
    """gain * y + n_q with n_q ~ CN(0, A_a). Monte-Carlo validation only."""
    gain, _ = aqnm_pair(comb.bits, mode)
    var = quant_noise_diag(chan, comb, theta, sigma2, mode)
    m = var.shape[0]
    n_q = np.sqrt(var / 2.0) * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
    return gain * np.asarray(y_analog) + n_q


# ---------------- rates ----------------
def sinr_terms(chan, comb: CombinerState, theta, decoders: np.ndarray, sigma2: float,
               mode: str = PAPER_FAITHFUL) -> Tuple[np.ndarray, np.ndarray]:
    """(signal, interference + noise + quantization) per user; decoders is (M, K)."""
    f = comb.combiner
    z = combined_channel(chan, comb, theta)
    gain, dist = aqnm_pair(comb.bits, mode)
    u = np.asarray(decoders)
    c = gain * (u.conj().T @ z)                               # c[k, l] = u_k^H F_a F^H G Theta h_l
    power = np.abs(c) ** 2
    signal = np.diag(power).copy()
    interference = power.sum(axis=1) - signal
    noise = sigma2 * gain ** 2 * np.sum(np.abs(f @ u) ** 2, axis=0)
    a_diag = dist * _gram_diag(z, f, sigma2)
    quant = np.real(np.sum(np.abs(u) ** 2 * a_diag[:, None], axis=0))
    denom = interference + noise + quant
    if np.any(denom <= 0):
        raise QuantizerError("zero decoder")
    return signal, denom


def sinr_per_user(chan, comb, theta, decoders, sigma2: float, mode: str = PAPER_FAITHFUL) -> np.ndarray:
    signal, denom = sinr_terms(chan, comb, theta, decoders, sigma2, mode)
    return signal / denom


def rate_per_user(chan, comb, theta, decoders, sigma2: float, mode: str = PAPER_FAITHFUL) -> np.ndarray:
    """log2(1 + SINR_k) in bits/s/Hz."""
    return np.log2(1.0 + sinr_per_user(chan, comb, theta, decoders, sigma2, mode))


def sum_rate(chan, comb, theta, decoders, sigma2: float, mode: str = PAPER_FAITHFUL) -> float:
    return float(np.sum(rate_per_user(chan, comb, theta, decoders, sigma2, mode)))
