"""Smoke tests for the python bindings: end-to-end sanity on the main
operations, cross-checked against numpy where that is cheap."""

import math

import numpy as np
import pytest

import ofdma_ranging as rg


@pytest.fixture
def plan():
    return rg.RangingPlan()


def test_plan_defaults_and_indexing(plan):
    plan.validate()
    assert plan.n == 1024 and plan.q == 16 and plan.v == 2 and plan.m == 4
    assert plan.n_t() == 1280 and plan.n_r() == 256
    assert rg.subcarrier_index(0, 0, 0, plan) == 0
    assert rg.subcarrier_index(1, 0, 0, plan) == 64
    assert rg.subcarrier_index(3, 2, 1, plan) == 209
    bins = rg.subchannel_bins(plan, 3)
    assert len(bins) == 32 and sorted(set(bins)) == bins


def test_codebook_is_the_fourier_set():
    book = rg.fourier_codebook(4)
    assert book.size() == 3
    np.testing.assert_allclose(book.code(1), [1, 1j, -1, -1j], atol=1e-15)
    np.testing.assert_allclose(book.code(2), [1, -1, 1, -1], atol=1e-15)
    assert abs(np.vdot(book.code(1), book.code(3))) < 1e-14


def test_dft_matches_numpy():
    x = rg.sample_cgaussian(rg.SeededStream(7, 1), 64, 1.0)
    ours = rg.dft(x)
    theirs = np.fft.fft(np.asarray(x)) / math.sqrt(64)
    np.testing.assert_allclose(ours, theirs, atol=1e-12)
    back = rg.dft(ours, inverse=True)
    np.testing.assert_allclose(back, x, atol=1e-12)


def test_hermitian_eig_reconstructs():
    raw = np.asarray(rg.sample_cgaussian(rg.SeededStream(9, 2), 16, 1.0)).reshape(4, 4)
    herm = 0.5 * (raw + raw.conj().T)
    lam, vec = rg.hermitian_eig(herm)
    np.testing.assert_allclose(vec @ np.diag(lam) @ vec.conj().T, herm, atol=1e-10)
    assert all(lam[i] >= lam[i + 1] for i in range(3))


def test_noiseless_single_user_end_to_end(plan):
    taps = rg.draw_channel(rg.ChannelProfile.exponential(plan.l, plan.channel_decay),
                           rg.SeededStream(11, 3))
    user = rg.UserTruth(code_index=2, theta=37, epsilon=0.02, taps=list(taps))
    rx = rg.synthesize_uplink([user], plan, 0)
    obs = rg.receiver_frontend(rx, plan, 0)
    assert obs.matrix.shape == (4, 32)

    det = rg.detect_codes(obs, rg.fourier_codebook(plan.m),
                          rg.CfoSearch(eps_bound=0.075), plan)
    assert det.detected_codes() == [2]
    assert abs(det.detected[0].eps_hat - 0.02) < 1e-3

    sig = rg.decouple_signatures(obs, det, rg.fourier_codebook(plan.m), plan)
    assert rg.lste_estimate(sig, 0, plan.theta_max).theta_hat == 37
    for mode in (rg.RcteMode.generic, rg.RcteMode.closed_form_v2):
        res = rg.rcte_estimate(sig, 0, plan.theta_max, mode)
        assert (res.beta_hat, res.p_hat, res.theta_hat) == (5, 2, 37)


def test_zero_cfo_cir_recovery_is_exact(plan):
    taps = rg.draw_channel(rg.ChannelProfile.exponential(plan.l, plan.channel_decay),
                           rg.SeededStream(11, 4))
    user = rg.UserTruth(code_index=3, theta=101, epsilon=0.0, taps=list(taps))
    obs = rg.receiver_frontend(rg.synthesize_uplink([user], plan, 0), plan, 0)
    det = rg.detect_codes(obs, rg.fourier_codebook(plan.m),
                          rg.CfoSearch(eps_bound=0.075), plan)
    assert det.detected_codes() == [3]
    sig = rg.decouple_signatures(obs, det, rg.fourier_codebook(plan.m), plan)
    assert rg.lste_estimate(sig, 0, plan.theta_max).theta_hat == 101
    cir = rg.estimate_cir(sig, 0, 101)
    np.testing.assert_allclose(cir, taps, atol=1e-9)


def test_model_oracle_agrees_with_synthesis(plan):
    taps = rg.draw_channel(rg.ChannelProfile.exponential(plan.l, plan.channel_decay),
                           rg.SeededStream(13, 4))
    user = rg.UserTruth(code_index=1, theta=150, epsilon=0.05, taps=list(taps))
    obs = rg.receiver_frontend(rg.synthesize_uplink([user], plan, 2), plan, 2)
    model = rg.model_oracle([user], plan, 2, rg.OracleMode.exact)
    scale = np.abs(model.matrix).max()
    assert np.abs(obs.matrix - model.matrix).max() / scale < 1e-9


def test_harness_round_trip():
    cfg = rg.parse_config("snr_db = 12\ntrials = 3\nk_users = 2\nomega_max = 0.05\nseed = 8\n")
    out1 = rg.run_trial(cfg, 12.0, 0)
    out2 = rg.run_trial(cfg, 12.0, 0)
    assert out1.true_codes == out2.true_codes
    assert [u.theta for u in out1.users] == [u.theta for u in out2.users]
    assert [u.eps_hat for u in out1.users] == [u.eps_hat for u in out2.users]

    table = rg.sweep(cfg)
    csv = rg.to_csv(table)
    header = csv.splitlines()[0]
    assert header == ("snr_db,k_users,omega_max,detector,estimator,trials,pf,pf_ci95,"
                      "cfo_rmse,cfo_rmse_ci95,p_eps,p_eps_ci95")
    assert rg.to_csv(rg.sweep(cfg)) == csv

    with pytest.raises(ValueError):
        rg.parse_config("snr_db = 0\ntrials = 1\nk_users = 9\n")


def test_timing_error_window():
    assert not rg.timing_error_event(126, 100, 64, 12)
    assert rg.timing_error_event(127, 100, 64, 12)
    assert not rg.timing_error_event(73, 100, 64, 12)
    assert rg.timing_error_event(72, 100, 64, 12)
