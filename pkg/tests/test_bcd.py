# tests/test_bcd.py
from dataclasses import replace

import numpy as np
import pytest

from bcd import (SolveOptions, baseline_fixed, baseline_no_ris, bcd_solve, draw_trial, greedy_selection, normalized)
from bitbeam_sca import enumerate_oracle
from quantizer import CombinerState, dft_codebook, unit_modulus
from scenario import SystemConfig, trial_seed

FAST = SolveOptions(max_outer=4)
TRIALS = 50


def trial(cfg, index=0):
    return draw_trial(cfg, trial_seed(cfg.seed, index))


def test_report_is_deployable(tiny_cfg):
    t = trial(tiny_cfg)
    rep = bcd_solve(tiny_cfg, t.chan, FAST, t.seed)
    assert tiny_cfg.b_min <= rep.bits <= tiny_cfg.b_max
    assert isinstance(rep.bits, int)
    assert CombinerState(np.eye(3), rep.selection, rep.bits).is_binary()
    assert len(set(rep.beams)) == tiny_cfg.n_rf
    assert unit_modulus(rep.theta, tol=1e-9)
    assert rep.user_rates.shape == (2,)
    assert np.all(rep.user_rates >= 0)
    assert rep.sum_rate == pytest.approx(float(np.sum(rep.user_rates)))
    assert rep.status in ("ok", "max-iter")
    assert 1 <= rep.iterations <= FAST.max_outer
    assert set(rep.block_times) == {"sca", "mm", "mo"}


def test_outer_trace_never_decreases(tiny_cfg):
    t = trial(tiny_cfg, 1)
    rep = bcd_solve(tiny_cfg, t.chan, FAST, t.seed)
    assert len(rep.trace) == rep.iterations + 1
    assert np.all(np.diff(rep.trace) >= -1e-9)


def test_single_beam_single_element_matches_oracle():
    cfg = SystemConfig(n_ap=4, n_ris=1, n_beams=1, n_rf=1, n_users=1, n_paths_g=1, n_paths_h=1, seed=3)
    t = trial(cfg)
    rep = bcd_solve(cfg, t.chan, SolveOptions(), t.seed)
    chan = normalized(cfg, t.chan)
    comb = CombinerState(dft_codebook(cfg.n_ap, 1), np.ones((1, 1)), cfg.b_min)
    oracle = enumerate_oracle(chan, comb, np.ones(1, dtype=complex), np.ones((1, 1), dtype=complex), 1.0,
                              (cfg.b_min, cfg.b_max), cfg.aqnm_mode)
    assert rep.bits == oracle.bits
    assert rep.sum_rate == pytest.approx(oracle.value, rel=1e-9)


def test_solve_is_deterministic(tiny_cfg):
    t = trial(tiny_cfg, 2)
    a = bcd_solve(tiny_cfg, t.chan, FAST, t.seed)
    b = bcd_solve(tiny_cfg, t.chan, FAST, t.seed)
    assert a.sum_rate == b.sum_rate
    assert a.trace == b.trace


def test_no_ris_with_zero_direct_channel(tiny_cfg):
    rep = baseline_no_ris(tiny_cfg, np.zeros((tiny_cfg.n_ap, tiny_cfg.n_users), dtype=complex), FAST)
    assert rep.sum_rate == 0.0
    assert rep.theta is None


def test_no_ris_runs_on_direct_channel(tiny_cfg):
    t = trial(tiny_cfg)
    rep = baseline_no_ris(tiny_cfg, t.direct, FAST)
    assert rep.sum_rate > 0.0
    assert rep.theta is None
    assert rep.block_times["mo"] == 0.0


def test_fixed_bits_are_kept(tiny_cfg):
    t = trial(tiny_cfg)
    rep = baseline_fixed(tiny_cfg, t.chan, 2, "optimized", FAST, t.seed)
    assert rep.bits == 2
    with pytest.raises(ValueError):
        baseline_fixed(tiny_cfg, t.chan, tiny_cfg.b_max + 1, "optimized", FAST, t.seed)
    with pytest.raises(ValueError):
        baseline_fixed(tiny_cfg, t.chan, 2, "fixed", FAST, t.seed)


def test_random_phases_are_seeded_and_kept(tiny_cfg):
    t = trial(tiny_cfg)
    opts = replace(FAST, phase_mode="random")
    a = bcd_solve(tiny_cfg, t.chan, opts, t.seed)
    b = bcd_solve(tiny_cfg, t.chan, opts, t.seed)
    np.testing.assert_array_equal(a.theta, b.theta)
    assert unit_modulus(a.theta, tol=1e-12)
    assert a.block_times["mo"] == 0.0


def test_unknown_phase_mode(tiny_cfg):
    t = trial(tiny_cfg)
    with pytest.raises(ValueError):
        bcd_solve(tiny_cfg, t.chan, replace(FAST, phase_mode="learned"))


def test_round_each_iteration_variant(tiny_cfg):
    t = trial(tiny_cfg)
    rep = bcd_solve(tiny_cfg, t.chan, replace(FAST, round_each_iter=True), t.seed)
    assert np.all(np.diff(rep.trace) >= -1e-9)
    assert CombinerState(np.eye(3), rep.selection, rep.bits).is_binary()


def test_greedy_selection_prefers_strong_beams():
    D = dft_codebook(4, 4)
    g = np.outer(D[:, 2] * 3.0 + D[:, 0], np.ones(2))
    W = greedy_selection(D, g, 2)
    assert CombinerState(D, W, 1).beams() == (2, 0)


def median_rate(cfg, trials=TRIALS, **kwargs):
    rates = []
    for i in range(trials):
        t = trial(cfg, i)
        rates.append(bcd_solve(cfg, t.chan, replace(SolveOptions(), **kwargs), t.seed).sum_rate)
    return float(np.median(rates))


@pytest.mark.slow
def test_optimized_phases_beat_random_phases(small_cfg):
    assert median_rate(small_cfg) >= median_rate(small_cfg, phase_mode="random")


@pytest.mark.slow
def test_outer_loop_plateaus_on_paper_defaults():
    cfg = SystemConfig()
    settled = 0
    for i in range(100):
        t = trial(cfg, i)
        rep = bcd_solve(cfg, t.chan, SolveOptions(), t.seed)
        assert np.all(np.diff(rep.trace) >= -1e-6)
        if rep.status == "ok" and rep.iterations <= 30:
            settled += 1
    assert settled >= 95


@pytest.mark.slow
def test_rate_strictly_grows_with_ris_elements(small_cfg):
    medians = [median_rate(replace(small_cfg, n_ris=n)) for n in (4, 8, 16)]
    assert medians[0] < medians[1] < medians[2]


@pytest.mark.slow
def test_rate_does_not_drop_with_rf_chains(small_cfg):
    base = replace(small_cfg, n_ap=16, n_beams=8)
    medians = [median_rate(replace(base, n_rf=m)) for m in (4, 6, 8)]
    assert medians[0] <= medians[1] <= medians[2]


@pytest.mark.slow
def test_more_bits_help_under_standard_aqnm(small_cfg):
    cfg = replace(small_cfg, aqnm_mode="standard-aqnm")
    medians = [median_rate(replace(cfg, b_max=b)) for b in range(1, 6)]
    assert all(lo <= hi for lo, hi in zip(medians, medians[1:]))


@pytest.mark.slow
def test_ris_beats_no_ris_at_sixteen_elements(small_cfg):
    cfg = replace(small_cfg, n_ris=16)
    no_ris = []
    for i in range(TRIALS):
        t = trial(cfg, i)
        no_ris.append(baseline_no_ris(cfg, t.direct, SolveOptions()).sum_rate)
    assert median_rate(cfg) > float(np.median(no_ris))
