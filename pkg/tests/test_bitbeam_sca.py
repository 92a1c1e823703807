# tests/test_bitbeam_sca.py
import math

import numpy as np
import pytest

from bcd import draw_trial, greedy_selection, normalized
from bitbeam_sca import (OracleCapError, ScaOptions, SelectionError, agm_bound, agm_point, assemble_subproblem,
                         build_linear_forms, enumerate_oracle, first_subproblem, initial_state, local_search,
                         optimize_bits_and_beams, project_selection, relaxed_violation, round_bits, sca_loop,
                         taylor_bound, unvec_selection, vec_selection)
from conic_core import hyperbolic_holds, solve
from mm_decoder import optimize_decoders
from quantizer import CombinerState, dft_codebook, selection_from_beams, sum_rate
from scenario import trial_seed


@pytest.mark.parametrize("b_star, expected", [(2.4, 2), (2.6, 3), (2.5, 2), (3.0, 3)])
def test_round_bits(b_star, expected):
    assert round_bits(b_star, 0.5) == expected


def test_round_bits_respects_range():
    assert round_bits(5.7, 0.5, 1, 5) == 5
    assert round_bits(0.2, 0.5, 1, 5) == 1
    assert round_bits(2.3, 0.2) == 3


def test_project_selection_max_weight():
    W = np.array([[0.9, 0.1], [0.8, 0.7], [0.1, 0.9]])
    P = project_selection(W)
    np.testing.assert_array_equal(P, [[1, 0], [0, 0], [0, 1]])
    assert float(np.sum(P * W)) == pytest.approx(1.8)


def test_project_selection_ties_go_to_lowest_beam():
    P = project_selection(np.full((3, 2), 0.5))
    assert CombinerState(np.eye(3), P, 1).beams() == (0, 1)


def test_project_selection_needs_enough_beams():
    with pytest.raises(SelectionError):
        project_selection(np.full((2, 3), 1 / 2))


def test_project_selection_accepts_vectorized_input():
    W = np.array([[0.2, 0.6], [0.7, 0.3], [0.1, 0.1]])
    np.testing.assert_array_equal(project_selection(vec_selection(W), n_beams=3), project_selection(W))


def test_vectorization_is_column_major():
    W = np.arange(6.0).reshape(3, 2)
    w = vec_selection(W)
    assert w[1 * 3 + 2] == W[2, 1]
    np.testing.assert_array_equal(unvec_selection(w, 3, 2), W)


def test_agm_bound_majorizes_and_touches():
    rng = np.random.default_rng(3)
    w, w_hat = rng.random(50), rng.random(50)
    eta = agm_point(w_hat, w)
    np.testing.assert_allclose(agm_bound(w, w_hat, eta), w * (1 - w_hat), rtol=1e-12)
    for other in (0.3, 1.0, 4.0):
        assert np.all(agm_bound(w, w_hat, other) >= w * (1 - w_hat) - 1e-15)


def test_agm_point_is_clamped_at_zero():
    eta = agm_point(np.array([0.0]), np.array([0.0]), eta_max=1e3)
    assert eta[0] == 1e3


def test_taylor_bound_minorizes_and_touches():
    t_bar, w_bar = 1.5, 2.0
    assert taylor_bound(t_bar, w_bar, t_bar, w_bar) == pytest.approx(t_bar ** 2 / w_bar)
    for t, w in [(0.5, 1.0), (3.0, 0.7), (1.5, 5.0)]:
        assert taylor_bound(t, w, t_bar, w_bar) <= t ** 2 / w + 1e-12


def test_binary_point_satisfies_binarity_blocks():
    for w in (0.0, 1.0):
        assert hyperbolic_holds(w, 1.0 - w, 0.0)


def test_relaxed_violation():
    assert relaxed_violation(selection_from_beams([0, 2], 3)) == 0.0
    assert relaxed_violation(np.array([[0.6, 0.6], [0.6, 0.6]])) == pytest.approx(0.2)


def test_linear_forms_reproduce_decoded_signal(make_instance):
    inst = make_instance(n_ap=6, n_ris=3, n_beams=4, n_rf=2, n_users=3, bits=2)
    forms = build_linear_forms(inst.chan, inst.comb, inst.theta, inst.decoders)
    w = vec_selection(inst.comb.selection)
    z = inst.comb.combiner.conj().T @ inst.chan.g @ np.diag(inst.theta) @ inst.chan.h
    c = forms.gain * inst.decoders.conj().T @ z
    for k in range(3):
        for l in range(3):
            assert w @ forms.A[k, l] == pytest.approx(c[k, l])


def test_subproblem_size_at_default_dimensions(make_instance):
    inst = make_instance(n_ap=16, n_ris=4, n_beams=12, n_rf=8, n_users=10, bits=3)
    prog = first_subproblem(inst.chan, inst.comb, inst.theta, inst.decoders, inst.sigma2)
    assert prog.n == 3 * 12 * 8 + 4 * 10 + 2
    assert len(prog.hyperbolics) >= 10


def test_single_beam_matches_bit_enumeration(make_instance):
    inst = make_instance(n_ap=4, n_ris=2, n_beams=1, n_rf=1, n_users=1, bits=1)
    for mode in ("paper-faithful", "standard-aqnm"):
        res = optimize_bits_and_beams(inst.chan, inst.comb, inst.theta, inst.decoders, inst.sigma2, (1, 5), mode)
        oracle = enumerate_oracle(inst.chan, inst.comb, inst.theta, inst.decoders, inst.sigma2, (1, 5), mode)
        assert res.bits == pytest.approx(oracle.bits)
        assert res.rate == pytest.approx(oracle.value, rel=1e-9)
        assert sorted(res.per_bits) == [1, 2, 3, 4, 5]


def test_relaxed_solution_is_feasible_and_bounded_by_oracle(make_instance):
    inst = make_instance(n_ap=4, n_ris=2, n_beams=3, n_rf=2, n_users=2, bits=2)
    res = optimize_bits_and_beams(inst.chan, inst.comb, inst.theta, inst.decoders, inst.sigma2, (1, 3))
    assert relaxed_violation(res.selection) < 1e-6
    assert 1 - 1e-9 <= res.bits <= 3 + 1e-9
    # the surrogate never exceeds the true rate of its own iterate
    assert res.objective <= res.rate + 1e-6
    assert np.all(np.diff(res.objective_trace) >= -1e-9)

    oracle = enumerate_oracle(inst.chan, inst.comb, inst.theta, inst.decoders, inst.sigma2, (1, 3))
    rounded = CombinerState(inst.comb.codebook, project_selection(res.selection), round_bits(res.bits, 0.5, 1, 3))
    assert sum_rate(inst.chan, rounded, inst.theta, inst.decoders, inst.sigma2) <= oracle.value + 1e-9


def test_printed_linearization_variant_runs(make_instance):
    inst = make_instance(n_ap=4, n_ris=2, n_beams=3, n_rf=2, n_users=2, bits=2)
    res = optimize_bits_and_beams(inst.chan, inst.comb, inst.theta, inst.decoders, inst.sigma2, (2, 2),
                                  options=ScaOptions(literal_17=True, max_iter=5))
    assert res.bits == pytest.approx(2.0)
    assert res.selection.shape == (3, 2)
    assert math.isfinite(res.rate)


def test_linearized_bit_coupling_stays_in_range(make_instance):
    inst = make_instance(n_ap=4, n_ris=2, n_beams=3, n_rf=2, n_users=2, bits=2)
    res = optimize_bits_and_beams(inst.chan, inst.comb, inst.theta, inst.decoders, inst.sigma2, (1, 4),
                                  options=ScaOptions(bit_coupling="linearized", max_iter=8))
    assert 1.0 - 1e-6 <= res.bits <= 4.0 + 1e-6
    assert math.isfinite(res.rate)


def test_oracle_counts_evaluations(make_instance):
    inst = make_instance(n_ap=4, n_ris=2, n_beams=4, n_rf=2, n_users=2)
    oracle = enumerate_oracle(inst.chan, inst.comb, inst.theta, inst.decoders, inst.sigma2, (1, 5))
    assert oracle.evaluations == 60
    assert CombinerState(inst.comb.codebook, oracle.selection, oracle.bits).is_binary()


def test_oracle_cap():
    comb = CombinerState(dft_codebook(16, 12), selection_from_beams(range(8), 12), 3)
    with pytest.raises(OracleCapError):
        enumerate_oracle(None, comb, None, None, 1.0, (1, 5))


def test_agm_point_at_symmetric_point():
    assert agm_point(np.array([0.5]), np.array([0.5]))[0] == pytest.approx(1.0)


def test_one_hot_selection_picks_one_entry(make_instance):
    inst = make_instance(n_ap=4, n_ris=2, n_beams=3, n_rf=2, n_users=2, bits=2)
    forms = build_linear_forms(inst.chan, inst.comb, inst.theta, inst.decoders)
    W = np.zeros((3, 2))
    W[2, 0] = 1.0
    w = vec_selection(W)
    z = inst.comb.codebook.conj().T @ inst.chan.g @ np.diag(inst.theta) @ inst.chan.h
    for k in range(2):
        for l in range(2):
            expected = forms.gain * np.conj(inst.decoders[0, k]) * z[2, l]
            assert w @ forms.A[k, l] == pytest.approx(expected)


def test_zero_channel_gives_zero_forms(make_instance):
    inst = make_instance()
    inst.chan.g[:] = 0.0
    forms = build_linear_forms(inst.chan, inst.comb, inst.theta, inst.decoders)
    assert not np.any(forms.A)


def test_infinite_tolerance_solves_once(make_instance):
    inst = make_instance(n_ap=4, n_ris=2, n_beams=3, n_rf=2, n_users=2, bits=2)
    opts = ScaOptions(tol=math.inf)
    forms = build_linear_forms(inst.chan, inst.comb, inst.theta, inst.decoders)
    state0 = initial_state(forms, inst.sigma2, inst.comb.selection, 2, (2, 2), opts)
    res = sca_loop(state0, forms, inst.sigma2, opts)
    assert len(res.solver) == 1


def test_binary_selection_is_a_fixed_point_of_projection():
    W = selection_from_beams([3, 1, 0], 5)
    np.testing.assert_array_equal(project_selection(W), W)


def test_assembled_program_starts_on_the_selection_equalities(make_instance):
    inst = make_instance(n_ap=4, n_ris=2, n_beams=3, n_rf=2, n_users=2, bits=2)
    opts = ScaOptions()
    forms = build_linear_forms(inst.chan, inst.comb, inst.theta, inst.decoders)
    state0 = initial_state(forms, inst.sigma2, inst.comb.selection, 2, (2, 2), opts)
    prog, x0 = assemble_subproblem(state0, forms, inst.sigma2, opts)
    assert x0.shape == (prog.n,) == (3 * 3 * 2 + 4 * 2 + 2,)
    groups = set(prog.eq_groups) | set(prog.ineq_groups)
    assert {"column-sum", "w-hat", "row-sum", "taylor"} <= groups
    for row, rhs, group in zip(prog.eq_rows, prog.eq_rhs, prog.eq_groups):
        if group in ("column-sum", "w-hat"):
            assert row @ x0 == pytest.approx(rhs, abs=1e-12)
    assert any(qc.group == "agm-binarity" for qc in prog.quadratics)


def test_first_subproblem_reaches_kkt_tolerance(make_instance):
    inst = make_instance(n_ap=4, n_ris=2, n_beams=3, n_rf=2, n_users=2, bits=2)
    opts = ScaOptions()
    forms = build_linear_forms(inst.chan, inst.comb, inst.theta, inst.decoders)
    state0 = initial_state(forms, inst.sigma2, inst.comb.selection, 2, (2, 2), opts)
    prog, x0 = assemble_subproblem(state0, forms, inst.sigma2, opts)
    _, st = solve(prog, x0, tol=opts.solver_tol, max_iter=opts.solver_max_iter)
    assert st.converged
    assert max(st.stationarity, st.primal, st.complementarity) <= opts.solver_tol


def test_user_blocks_start_at_unit_scale(make_instance):
    inst = make_instance(n_ap=4, n_ris=2, n_beams=3, n_rf=2, n_users=2, bits=2)
    inst.chan.h *= 1e3
    forms = build_linear_forms(inst.chan, inst.comb, inst.theta, inst.decoders)
    state0 = initial_state(forms, inst.sigma2, inst.comb.selection, 2, (2, 2), ScaOptions())
    np.testing.assert_allclose(state0.omega, 1.1)
    assert np.all(state0.scale > 10.0)


def test_stalled_subproblem_marks_the_loop_stalled(make_instance):
    inst = make_instance(n_ap=4, n_ris=2, n_beams=3, n_rf=2, n_users=2, bits=2)
    opts = ScaOptions(solver_max_iter=1)
    forms = build_linear_forms(inst.chan, inst.comb, inst.theta, inst.decoders)
    state0 = initial_state(forms, inst.sigma2, inst.comb.selection, 2, (2, 2), opts)
    res = sca_loop(state0, forms, inst.sigma2, opts)
    assert res.solver[0].status == "stalled"
    assert res.status == "stalled"
    assert len(res.solver) == 1
    assert np.all(np.diff(res.objective_trace) >= -1e-12)


def test_local_search_with_one_chain_is_exhaustive(make_instance):
    inst = make_instance(n_ap=6, n_ris=2, n_beams=5, n_rf=1, n_users=2, bits=2)
    inst.decoders = np.ones((1, 2), dtype=complex)
    oracle = enumerate_oracle(inst.chan, inst.comb, inst.theta, inst.decoders, inst.sigma2, (1, 4))
    found = local_search(inst.chan, inst.comb, inst.theta, inst.decoders, inst.sigma2, (1, 4),
                         [selection_from_beams([0], 5)])
    assert found.value == pytest.approx(oracle.value, rel=1e-12)
    assert found.bits == oracle.bits


def test_local_search_never_lowers_its_start(make_instance):
    inst = make_instance(n_ap=6, n_ris=3, n_beams=5, n_rf=3, n_users=2, bits=2)
    start = selection_from_beams([4, 2, 0], 5)
    found = local_search(inst.chan, inst.comb, inst.theta, inst.decoders, inst.sigma2, (2, 2), [start])
    assert found.bits == 2
    assert CombinerState(inst.comb.codebook, found.selection, 2).is_binary()
    assert found.value >= sum_rate(inst.chan, CombinerState(inst.comb.codebook, start, 2), inst.theta,
                                   inst.decoders, inst.sigma2) - 1e-12
    with pytest.raises(SelectionError):
        local_search(inst.chan, inst.comb, inst.theta, inst.decoders, inst.sigma2, (2, 2), [])


@pytest.mark.slow
def test_deployable_point_is_near_the_oracle(small_cfg):
    bounds = (small_cfg.b_min, small_cfg.b_max)
    D = dft_codebook(small_cfg.n_ap, small_cfg.n_beams)
    theta = np.ones(small_cfg.n_ris, dtype=complex)
    hits = 0
    for i in range(200):
        t = draw_trial(small_cfg, trial_seed(small_cfg.seed, i))
        chan = normalized(small_cfg, t.chan)
        comb = CombinerState(D, greedy_selection(D, chan.g, small_cfg.n_rf), small_cfg.b_max)
        U, _ = optimize_decoders(chan, comb, theta, 1.0)
        res = optimize_bits_and_beams(chan, comb, theta, U, 1.0, bounds)
        deployed = local_search(chan, comb, theta, U, 1.0, bounds, [res.selection])
        oracle = enumerate_oracle(chan, comb, theta, U, 1.0, bounds)
        if deployed.value >= 0.95 * oracle.value:
            hits += 1
    assert hits >= 180
