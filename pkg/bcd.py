# bcd.py
"""
Outer block-coordinate loop over (b, W), u and Theta, plus the baseline schemes.

All blocks work on a noise-normalized realization (h scaled by sqrt(P / sigma^2),
sigma^2 = 1); rates are invariant under that scaling.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from bitbeam_sca import (ScaIterate, ScaOptions, local_search, optimize_bits_and_beams, project_selection,
                         round_bits)
from channel import ChannelRealization, direct_as_realization, draw_channels, draw_direct_channel
from logger import logger
from mm_decoder import MmOptions, optimize_decoders
from phase_opt import MoOptions, mo_solve
from quantizer import CombinerState, dft_codebook, rate_per_user, selection_from_beams, sum_rate
from scenario import SystemConfig, TrialSeed, rng_for, user_positions

PHASE_MODES = ("optimized", "random", "fixed")


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-4
    max_outer: int = 30
    round_each_iter: bool = False
    delta: float = 0.5
    phase_mode: str = "optimized"
    b_fixed: Optional[int] = None
    sca: ScaOptions = ScaOptions()
    mm: MmOptions = MmOptions()
    mo: MoOptions = MoOptions()


@dataclass
class SolveReport:
    trace: List[float]
    bits: int
    selection: np.ndarray
    decoders: np.ndarray
    theta: Optional[np.ndarray]
    user_rates: np.ndarray
    sum_rate: float
    iterations: int
    status: str                                  # ok | max-iter
    flags: List[str] = field(default_factory=list)
    block_times: Dict[str, float] = field(default_factory=dict)
    sca_traces: List[List[ScaIterate]] = field(default_factory=list)

    @property
    def beams(self) -> Tuple[int, ...]:
        return tuple(int(s) for s in np.argmax(self.selection, axis=0))


@dataclass
class TrialData:
    seed: TrialSeed
    positions: np.ndarray
    chan: ChannelRealization
    direct: np.ndarray


def draw_trial(cfg: SystemConfig, seed: TrialSeed) -> TrialData:
    positions = user_positions(cfg, seed)
    return TrialData(seed, positions, draw_channels(cfg, positions, seed), draw_direct_channel(cfg, positions, seed))


def normalized(cfg: SystemConfig, chan: ChannelRealization) -> ChannelRealization:
    return chan.scaled(math.sqrt(1.0 / cfg.effective_noise))


def greedy_selection(codebook: np.ndarray, g: np.ndarray, n_rf: int) -> np.ndarray:
    """Strongest beams of |D^H G| (row energy), one per RF chain, strongest first."""
    score = np.sum(np.abs(codebook.conj().T @ g) ** 2, axis=1)
    order = np.argsort(-score, kind="stable")
    return selection_from_beams(order[:n_rf], codebook.shape[1])


def random_phases(n: int, rng: np.random.Generator) -> np.ndarray:
    return np.exp(2j * np.pi * rng.random(n))


def _run_blocks(cfg: SystemConfig, chan: ChannelRealization, theta0: np.ndarray, options: SolveOptions,
                optimize_phase: bool, report_theta: bool) -> SolveReport:
    mode = cfg.aqnm_mode
    sigma2 = 1.0
    if options.b_fixed is not None:
        if not cfg.b_min <= options.b_fixed <= cfg.b_max:
            raise ValueError(f"b_fixed={options.b_fixed} outside [{cfg.b_min}, {cfg.b_max}]")
        b_bounds = (options.b_fixed, options.b_fixed)
    else:
        b_bounds = (cfg.b_min, cfg.b_max)

    D = dft_codebook(chan.n_ap, cfg.n_beams)
    comb = CombinerState(D, greedy_selection(D, chan.g, cfg.n_rf), b_bounds[1])
    theta = theta0.copy()
    U, _ = optimize_decoders(chan, comb, theta, sigma2, mode, options=options.mm)

    def score(c: CombinerState, th: np.ndarray, u: np.ndarray) -> float:
        return sum_rate(chan, c, th, u, sigma2, mode)

    value = score(comb, theta, U)
    trace = [value]
    flags: List[str] = []
    times = {"sca": 0.0, "mm": 0.0, "mo": 0.0}
    sca_traces: List[List[ScaIterate]] = []
    status = "max-iter"
    iterations = 0

    for j in range(options.max_outer):
        iterations = j + 1
        # block 1: bits and beams
        t0 = time.perf_counter()
        res = optimize_bits_and_beams(chan, comb, theta, U, sigma2, b_bounds, mode, options.sca)
        sca_traces.append(res.trace)
        if res.status != "ok":
            flags.append(f"sca-stalled@{j}")
        rounded = CombinerState(D, project_selection(res.selection), round_bits(res.bits, options.delta, *b_bounds))
        polished = local_search(chan, rounded, theta, U, sigma2, b_bounds, [res.selection, comb.selection], mode)
        deployable = [rounded, CombinerState(D, polished.selection, polished.bits)]
        candidates = deployable if options.round_each_iter else [CombinerState(D, res.selection, res.bits)] + deployable
        scored = [(score(c, theta, U), c) for c in candidates]
        best_value, best = max(scored, key=lambda item: item[0])
        if best_value >= value:
            comb, value = best, best_value
        else:
            flags.append(f"sca-reverted@{j}")
            logger.debug("[BCD] it=%d bit/beam block would lower the rate (%.6f < %.6f); reverted", j, best_value, value)
        times["sca"] += time.perf_counter() - t0

        # block 2: decoders
        t0 = time.perf_counter()
        U_new, mm_results = optimize_decoders(chan, comb, theta, sigma2, mode, u_init=U, options=options.mm)
        if any(r.status != "ok" for r in mm_results):
            flags.append(f"mm-stalled@{j}")
        new_value = score(comb, theta, U_new)
        if new_value >= value:
            U, value = U_new, new_value
        else:
            flags.append(f"mm-reverted@{j}")
        times["mm"] += time.perf_counter() - t0

        # block 3: phases
        if optimize_phase:
            t0 = time.perf_counter()
            mo = mo_solve(chan, comb, U, sigma2, theta, mode, options.mo)
            if mo.status != "ok":
                flags.append(f"mo-stalled@{j}")
            if mo.objective >= value:
                theta, value = mo.theta, mo.objective
            else:
                flags.append(f"mo-reverted@{j}")
            times["mo"] += time.perf_counter() - t0

        trace.append(value)
        logger.debug("[BCD] it=%d sum_rate=%.6f b=%s", j, value, comb.bits)
        if abs(trace[-1] - trace[-2]) < options.tol:
            status = "ok"
            break

    # deployable point: integer bits, binary selection, decoders polished for it
    t0 = time.perf_counter()
    final = CombinerState(D, project_selection(comb.selection), round_bits(comb.bits, options.delta, *b_bounds))
    polished = local_search(chan, final, theta, U, sigma2, b_bounds, [comb.selection], mode)
    if polished.value > score(final, theta, U):
        final = CombinerState(D, polished.selection, polished.bits)
    times["sca"] += time.perf_counter() - t0
    t0 = time.perf_counter()
    U, _ = optimize_decoders(chan, final, theta, sigma2, mode, u_init=U, options=options.mm)
    times["mm"] += time.perf_counter() - t0
    rates = rate_per_user(chan, final, theta, U, sigma2, mode)
    logger.info("[BCD] done: %d outer iterations, status=%s, sum rate %.4f bits/s/Hz, b=%d",
                iterations, status, float(np.sum(rates)), final.bits)
    return SolveReport(
        trace=trace, bits=int(final.bits), selection=final.selection, decoders=U,
        theta=theta if report_theta else None, user_rates=rates, sum_rate=float(np.sum(rates)),
        iterations=iterations, status=status, flags=flags, block_times=times, sca_traces=sca_traces,
    )


def bcd_solve(cfg: SystemConfig, chan: ChannelRealization, options: SolveOptions = SolveOptions(),
              seed: Optional[TrialSeed] = None) -> SolveReport:
    """Full pipeline: SCA bits/beams, MM decoders, manifold phases, repeated until the rate settles."""
    if options.phase_mode not in PHASE_MODES:
        raise ValueError(f"unknown phase_mode {options.phase_mode!r}")
    chan_n = normalized(cfg, chan)
    if options.phase_mode == "random":
        rng = rng_for(seed, "phases") if seed is not None else np.random.default_rng(cfg.seed)
        theta0 = random_phases(chan.n_ris, rng)
    else:
        theta0 = np.ones(chan.n_ris, dtype=complex)
    return _run_blocks(cfg, chan_n, theta0, options, optimize_phase=options.phase_mode == "optimized",
                       report_theta=True)


def baseline_no_ris(cfg: SystemConfig, chan_direct: np.ndarray, options: SolveOptions = SolveOptions()) -> SolveReport:
    """Bits, beams and decoders optimized over the direct user -> AP channel only."""
    pseudo = normalized(cfg, direct_as_realization(chan_direct))
    theta0 = np.ones(pseudo.n_ris, dtype=complex)
    return _run_blocks(cfg, pseudo, theta0, options, optimize_phase=False, report_theta=False)


def baseline_fixed(cfg: SystemConfig, chan: ChannelRealization, b_fixed: int, phase_mode: str = "optimized",
                   options: SolveOptions = SolveOptions(), seed: Optional[TrialSeed] = None) -> SolveReport:
    """Bits pinned to b_fixed; beams, decoders and (per phase_mode) phases still optimized."""
    if phase_mode not in ("random", "optimized"):
        raise ValueError(f"phase_mode must be 'random' or 'optimized', got {phase_mode!r}")
    return bcd_solve(cfg, chan, replace(options, b_fixed=b_fixed, phase_mode=phase_mode), seed)
