# channel.py
"""
Geometric mmWave channels: G (RIS -> AP) and h_k (user k -> RIS).

    G   = beta * sqrt(gain_G / L_1) * sum_l alpha_l a_AP(theta_l) a_RIS(phi_l)^H
    h_k = beta_k * sqrt(gain_h / L_k) * sum_l alpha_kl a_RIS(vartheta_kl)

beta is one CN(0, 10^{-0.1 kappa}) draw with kappa = 72 + 29.2 log10(d) + shadowing,
alpha are i.i.d. CN(0, 1), steering vectors have unit norm, and the array gain
factors are n_ap * n_ris (resp. n_ris) when cfg.array_gain is on, 1 otherwise.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from logger import logger
from scenario import SystemConfig, TrialSeed, rng_for

PATH_LOSS_INTERCEPT_DB = 72.0
PATH_LOSS_SLOPE_DB = 29.2


class ChannelFileError(ValueError):
    pass


@dataclass(frozen=True)
class PathRecord:
    """Per-link metadata kept for inspection and dumps."""
    distance: float
    beta_ls: complex
    alpha: np.ndarray
    angles_far: np.ndarray          # AP side for G; empty for h_k
    angles_ris: np.ndarray          # (L,) for a ULA RIS, (L, 2) for a UPA RIS


@dataclass
class ChannelRealization:
    g: np.ndarray                   # (n_ap, n_ris)
    h: np.ndarray                   # (n_ris, K); column k is h_k
    g_paths: Optional[PathRecord] = None
    h_paths: List[PathRecord] = field(default_factory=list)

    @property
    def n_ap(self) -> int:
        return self.g.shape[0]

    @property
    def n_ris(self) -> int:
        return self.g.shape[1]

    @property
    def n_users(self) -> int:
        return self.h.shape[1]

    @property
    def h_list(self) -> List[np.ndarray]:
        return [self.h[:, k] for k in range(self.n_users)]

    def scaled(self, factor: float) -> "ChannelRealization":
        """Scale every user->RIS link; all received signal terms scale by factor^2."""
        return dataclasses.replace(self, h=self.h * factor)

    def check(self, cfg: Optional[SystemConfig] = None) -> None:
        if cfg is not None:
            expected = (cfg.n_ap, cfg.n_ris, cfg.n_users)
            if (self.n_ap, self.n_ris, self.n_users) != expected:
                raise ChannelFileError(
                    f"realization is {self.n_ap}x{self.n_ris} with {self.n_users} users, expected {expected}"
                )
        if self.h.shape[0] != self.g.shape[1]:
            raise ChannelFileError("g and h disagree on the RIS size")
        if not (np.all(np.isfinite(self.g)) and np.all(np.isfinite(self.h))):
            raise ChannelFileError("non-finite channel entries")


def direct_as_realization(h_direct: np.ndarray) -> ChannelRealization:
    """Present a direct (n_ap x K) channel as g = H_d, h = I_K so that G diag(1) h_k = H_d[:, k]."""
    k = h_direct.shape[1]
    return ChannelRealization(g=np.asarray(h_direct, dtype=complex), h=np.eye(k, dtype=complex))


# ---------------- steering vectors ----------------
def steering_vector(n: int, angle: float) -> np.ndarray:
    """Half-wavelength ULA response, unit norm."""
    i = np.arange(n)
    return np.exp(1j * np.pi * i * np.sin(angle)) / np.sqrt(n)


def upa_steering_vector(rows: int, cols: int, azimuth: float, elevation: float) -> np.ndarray:
    a_row = np.exp(1j * np.pi * np.arange(rows) * np.sin(azimuth) * np.sin(elevation))
    a_col = np.exp(1j * np.pi * np.arange(cols) * np.cos(elevation))
    return np.kron(a_row, a_col) / np.sqrt(rows * cols)


def ris_steering(cfg: SystemConfig, angles) -> np.ndarray:
    if cfg.ris_geometry == "upa":
        az, el = angles
        return upa_steering_vector(cfg.ris_rows, cfg.n_ris // cfg.ris_rows, az, el)
    return steering_vector(cfg.n_ris, float(np.atleast_1d(angles)[0]))


# ---------------- large-scale fading ----------------
def path_loss_db(d: float) -> float:
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    return PATH_LOSS_INTERCEPT_DB + PATH_LOSS_SLOPE_DB * math.log10(d)


def large_scale_variance(d: float, shadow_term_db: float = 0.0) -> float:
    return 10.0 ** (-0.1 * (path_loss_db(d) + shadow_term_db))


def large_scale_gain(d: float, draw: complex, shadow_term_db: float = 0.0) -> complex:
    """One CN(0, 10^{-0.1 kappa}) sample built from a standard complex normal draw."""
    return complex(draw) * math.sqrt(large_scale_variance(d, shadow_term_db))


def standard_complex_normal(rng: np.random.Generator, size=None):
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def _uniform_angles(rng: np.random.Generator, count: int, planar: bool) -> np.ndarray:
    shape = (count, 2) if planar else (count,)
    return rng.uniform(-np.pi / 2, np.pi / 2, size=shape)


def _link_gain(rng: np.random.Generator, d: float, shadow_db: float) -> complex:
    draw = standard_complex_normal(rng)
    shadow = shadow_db * rng.standard_normal() if shadow_db > 0 else 0.0
    return large_scale_gain(d, draw, shadow)


# ---------------- realizations ----------------
def draw_channels(cfg: SystemConfig, positions: np.ndarray, seed: TrialSeed) -> ChannelRealization:
    """Draw G then h_1..h_K from the trial's "channels" stream; order is part of the seed contract."""
    rng = rng_for(seed, "channels")
    planar = cfg.ris_geometry == "upa"
    ap = np.asarray(cfg.ap_pos, dtype=float)
    ris = np.asarray(cfg.ris_pos, dtype=float)

    # G: RIS -> AP
    d_g = float(np.linalg.norm(ap - ris))
    beta = _link_gain(rng, d_g, cfg.shadow_db)
    alpha = standard_complex_normal(rng, cfg.n_paths_g)
    ang_ap = _uniform_angles(rng, cfg.n_paths_g, planar=False)
    ang_ris = _uniform_angles(rng, cfg.n_paths_g, planar)
    scale = math.sqrt((cfg.n_ap * cfg.n_ris if cfg.array_gain else 1.0) / cfg.n_paths_g)
    g = np.zeros((cfg.n_ap, cfg.n_ris), dtype=complex)
    for l in range(cfg.n_paths_g):
        a_t = steering_vector(cfg.n_ap, ang_ap[l])
        a_r = ris_steering(cfg, ang_ris[l])
        g += alpha[l] * np.outer(a_t, a_r.conj())
    g *= beta * scale
    g_paths = PathRecord(d_g, beta, alpha, ang_ap, ang_ris)

    # h_k: user k -> RIS
    h = np.zeros((cfg.n_ris, cfg.n_users), dtype=complex)
    h_paths = []
    scale_h = math.sqrt((cfg.n_ris if cfg.array_gain else 1.0) / cfg.n_paths_h)
    for k in range(cfg.n_users):
        d_k = float(np.linalg.norm(np.asarray(positions[k], dtype=float) - ris))
        beta_k = _link_gain(rng, d_k, cfg.shadow_db)
        alpha_k = standard_complex_normal(rng, cfg.n_paths_h)
        ang_k = _uniform_angles(rng, cfg.n_paths_h, planar)
        for l in range(cfg.n_paths_h):
            h[:, k] += alpha_k[l] * ris_steering(cfg, ang_k[l])
        h[:, k] *= beta_k * scale_h
        h_paths.append(PathRecord(d_k, beta_k, alpha_k, np.empty(0), ang_k))

    chan = ChannelRealization(g=g, h=h, g_paths=g_paths, h_paths=h_paths)
    chan.check(cfg)
    return chan


def draw_direct_channel(cfg: SystemConfig, positions: np.ndarray, seed: TrialSeed) -> np.ndarray:
    """User -> AP channels (n_ap x K) for the NO-RIS baseline: same geometric law plus a blockage loss."""
    rng = rng_for(seed, "direct")
    ap = np.asarray(cfg.ap_pos, dtype=float)
    scale = math.sqrt((cfg.n_ap if cfg.array_gain else 1.0) / cfg.n_paths_h)
    h_d = np.zeros((cfg.n_ap, cfg.n_users), dtype=complex)
    for k in range(cfg.n_users):
        d_k = float(np.linalg.norm(np.asarray(positions[k], dtype=float) - ap))
        beta_k = _link_gain(rng, d_k, cfg.shadow_db) * 10.0 ** (-cfg.direct_loss_db / 20.0)
        alpha_k = standard_complex_normal(rng, cfg.n_paths_h)
        ang_k = _uniform_angles(rng, cfg.n_paths_h, planar=False)
        for l in range(cfg.n_paths_h):
            h_d[:, k] += alpha_k[l] * steering_vector(cfg.n_ap, ang_k[l])
        h_d[:, k] *= beta_k * scale
    return h_d


# ---------------- dumps ----------------
# <path> holds little-endian interleaved re/im doubles: G row-major, then h row-major,
# then the direct channel when present. <path>.hdr is the text header.
def _header_path(path: Path) -> Path:
    return path.with_name(path.name + ".hdr")


def write_channels(path, chan: ChannelRealization, h_direct: Optional[np.ndarray] = None) -> None:
    path = Path(path)
    blocks = [chan.g, chan.h] + ([h_direct] if h_direct is not None else [])
    payload = np.concatenate([np.ascontiguousarray(b, dtype="<c16").ravel() for b in blocks])
    path.write_bytes(payload.tobytes())
    header = [
        "format = complex128-le-interleaved",
        f"n_ap = {chan.n_ap}",
        f"n_ris = {chan.n_ris}",
        f"n_users = {chan.n_users}",
        f"direct = {1 if h_direct is not None else 0}",
    ]
    _header_path(path).write_text("\n".join(header) + "\n", encoding="utf-8")
    logger.debug("write_channels(%s): %d complex values", path, payload.size)


def load_channels(path, cfg: Optional[SystemConfig] = None) -> Tuple[ChannelRealization, Optional[np.ndarray]]:
    path = Path(path)
    hdr = _header_path(path)
    if not hdr.exists():
        raise ChannelFileError(f"missing header {hdr}")
    meta = {}
    for line in hdr.read_text(encoding="utf-8").splitlines():
        if "=" in line:
            key, value = (p.strip() for p in line.split("=", 1))
            meta[key] = value
    try:
        n_ap, n_ris, k = int(meta["n_ap"]), int(meta["n_ris"]), int(meta["n_users"])
        has_direct = meta.get("direct", "0") == "1"
    except (KeyError, ValueError) as e:
        raise ChannelFileError(f"bad header {hdr}: {e}") from None

    data = np.frombuffer(path.read_bytes(), dtype="<c16")
    expected = n_ap * n_ris + n_ris * k + (n_ap * k if has_direct else 0)
    if data.size != expected:
        raise ChannelFileError(f"{path}: {data.size} values, header implies {expected}")

    g = data[: n_ap * n_ris].reshape(n_ap, n_ris).astype(complex)
    h = data[n_ap * n_ris: n_ap * n_ris + n_ris * k].reshape(n_ris, k).astype(complex)
    h_direct = data[n_ap * n_ris + n_ris * k:].reshape(n_ap, k).astype(complex) if has_direct else None
    chan = ChannelRealization(g=g, h=h)
    chan.check(cfg)
    return chan, h_direct
