"""Estimators: hand-computed scores, algebraic identities, oracle MC checks."""

import math

import numpy as np
import pytest

from dml4ssi import (
    AdeDgpConfig,
    NuisanceSet,
    PhiSeries,
    RngStream,
    SwitchbackDesign,
    SwitchbackDgpConfig,
    derive_stream,
    oracle_nuisances,
    phi_ade,
    phi_gate,
    psi_ade_dml,
    psi_dml_naive,
    psi_gate_dml,
    psi_gate_plugin,
    psi_ht_naive,
    psi_plugin,
    psi_sb_ht,
    psi_ssac,
    simulate_ade_dgp,
    simulate_switchback_dgp,
    true_ade,
    true_gate,
)

from helpers import ConstOutcome, ConstProp, ade_traj, sb_traj


def _const_nuis(f1: float, f0: float, p: float, with_h: bool = True) -> NuisanceSet:
    return NuisanceSet(
        f=ConstOutcome(f1, f0, includes_shared_state=with_h),
        m=ConstProp(p),
        zeta=0.1,
        includes_shared_state=with_h,
    )


def test_phi_ade_hand_values():
    nuis = _const_nuis(2.0, 1.0, 0.5)
    traj = ade_traj(d=[1, 0], y=[3.0, 1.0])
    obs1, obs0 = traj.obs[0], traj.obs[1]
    # d=1: (2-1) + (1/0.5)(3-2) = 3
    assert phi_ade(obs1, nuis) == pytest.approx(3.0)
    # d=0: (2-1) - (1/0.5)(1-1) = 1
    assert phi_ade(obs0, nuis) == pytest.approx(1.0)
    # d=0 with a residual: 1 - 2*(2.5-1) = -2
    traj2 = ade_traj(d=[0], y=[2.5])
    assert phi_ade(traj2.obs[0], nuis) == pytest.approx(-2.0)


def test_psi_ade_dml_is_mean_of_scores():
    nuis = _const_nuis(2.0, 1.0, 0.5)
    traj = ade_traj(d=[1, 0], y=[3.0, 1.0])
    psi, phis = psi_ade_dml(traj, nuis)
    assert psi == pytest.approx(2.0)
    np.testing.assert_allclose(phis.values, [3.0, 1.0])
    assert phis.estimator == "dml4ssi"
    assert phis.mean() == psi
    scalar = [phi_ade(traj.obs[i], nuis) for i in range(traj.T)]
    np.testing.assert_allclose(phis.values, scalar, atol=1e-12)


def test_psi_ht_naive_hand_values():
    traj = ade_traj(d=[1, 0], y=[2.0, 0.0])
    psi, phis = psi_ht_naive(traj, ConstProp(0.5))
    np.testing.assert_allclose(phis.values, [4.0, 0.0])
    assert psi == pytest.approx(2.0)
    zero = ade_traj(d=[1, 0, 1], y=[0.0, 0.0, 0.0])
    assert psi_ht_naive(zero, ConstProp(0.3))[0] == 0.0


def test_psi_plugin_constant_contrast():
    nuis = _const_nuis(5.5, 2.0, 0.4)
    traj = ade_traj(d=[1, 0, 0, 1], y=[9.0, -3.0, 0.0, 1.0])
    psi, phis = psi_plugin(traj, nuis)
    assert psi == pytest.approx(3.5)
    np.testing.assert_array_equal(phis.values, np.full(4, 3.5))
    assert phis.estimator == "plugin"


def test_dml_naive_with_zero_outcome_model_is_ht():
    traj = simulate_ade_dgp(AdeDgpConfig(), 200, RngStream(1))
    nuis = _const_nuis(0.0, 0.0, 0.37, with_h=False)
    psi_naive, phis_naive = psi_dml_naive(traj, nuis)
    psi_ht, phis_ht = psi_ht_naive(traj, ConstProp(0.37))
    np.testing.assert_array_equal(phis_naive.values, phis_ht.values)
    assert psi_naive == psi_ht


def test_dml_naive_rejects_shared_state_nuisance():
    traj = ade_traj(d=[1, 0], y=[1.0, 2.0])
    with pytest.raises(ValueError, match="no-shared-state"):
        psi_dml_naive(traj, _const_nuis(1.0, 0.0, 0.5, with_h=True))


def test_ssac_matches_ade_arithmetic_bitwise():
    traj = simulate_ade_dgp(AdeDgpConfig(), 300, RngStream(2))
    nuis = oracle_nuisances(AdeDgpConfig())
    psi_a, phis_a = psi_ade_dml(traj, nuis)
    psi_s, phis_s = psi_ssac(traj, nuis)
    assert psi_a == psi_s
    np.testing.assert_array_equal(phis_a.values, phis_s.values)
    assert phis_s.estimator == "ssac"


def test_phi_gate_hand_values():
    design = SwitchbackDesign(m=2, block_len=4, treat_prob=0.5)
    nuis = _const_nuis(3.0, 1.0, 0.5)
    # t=3 observation treated with an all-ones window
    traj = sb_traj(d=[0, 1, 1], lags=[[0, 0], [0, 0], [1, 1]], y=[0.0, 0.0, 5.0],
                   design=design)
    # offset cases for the window {1,2,3}: one segment (offset 1 or 4) with
    # probability 1/2 each, two segments (offset 2 or 3) with 1/4 each
    pi1 = (0.5 + 0.25 + 0.25 + 0.5) / 4.0
    from dml4ssi import switchback_window_prob

    assert switchback_window_prob(design, 3, "all-ones") == pytest.approx(pi1)
    got = phi_gate(traj, 3, nuis, design)
    # (3-1) + (1/pi1)(5-3)
    assert got == pytest.approx((3.0 - 1.0) + (5.0 - 3.0) / pi1)
    # treated step over untreated lags: incomplete window, plug-in term only
    assert phi_gate(traj, 2, nuis, design) == pytest.approx(2.0)


def test_phi_gate_validates_t():
    design = SwitchbackDesign(m=1, block_len=3)
    traj = sb_traj(d=[1, 0], lags=[[0], [1]], y=[1.0, 2.0], design=design)
    nuis = _const_nuis(1.0, 0.0, 0.5)
    with pytest.raises(ValueError, match="t must lie"):
        phi_gate(traj, 0, nuis, design)
    with pytest.raises(ValueError, match="t must lie"):
        phi_gate(traj, 3, nuis, design)


def test_gate_dml_decomposes_into_plugin_plus_correction():
    cfg = SwitchbackDgpConfig()
    traj = simulate_switchback_dgp(cfg, 400, RngStream(3))
    nuis = oracle_nuisances(cfg)
    psi_dml, phis_dml = psi_gate_dml(traj, nuis)
    psi_plug, phis_plug = psi_gate_plugin(traj, nuis)
    corr = phis_dml.values - phis_plug.values
    assert psi_dml == pytest.approx(psi_plug + corr.mean(), rel=1e-12)
    # correction vanishes off complete windows
    m = cfg.design.m
    ind1 = (traj.d == 1) & np.all(traj.h[:, :m] == 1.0, axis=1)
    ind0 = (traj.d == 0) & np.all(traj.h[:, :m] == 0.0, axis=1)
    assert np.all(corr[~(ind1 | ind0)] == 0.0)
    assert np.any(ind1) and np.any(ind0)


def test_phi_gate_matches_vectorized_series():
    cfg = SwitchbackDgpConfig()
    traj = simulate_switchback_dgp(cfg, 60, RngStream(4))
    nuis = oracle_nuisances(cfg)
    _, phis = psi_gate_dml(traj, nuis)
    scalar = [phi_gate(traj, t, nuis) for t in range(1, traj.T + 1)]
    np.testing.assert_allclose(phis.values, scalar, atol=1e-12)


def test_sb_ht_uses_only_complete_windows():
    design = SwitchbackDesign(m=2, block_len=4, treat_prob=0.5)
    traj = sb_traj(
        d=[1, 0, 1, 0],
        lags=[[1, 1], [0, 0], [0, 1], [1, 0]],
        y=[2.0, 3.0, 7.0, 9.0],
        design=design,
    )
    psi, phis = psi_sb_ht(traj, design)
    pi1 = np.array([7.0 / 16.0, 0.375, 0.375, 0.375])  # t=1 window is likelier
    from dml4ssi.dgp import window_prob_series

    np.testing.assert_allclose(window_prob_series(design, 4, "all-ones"), pi1)
    expect = np.array([2.0 / pi1[0], -3.0 / pi1[1], 0.0, 0.0])
    np.testing.assert_allclose(phis.values, expect)
    assert psi == pytest.approx(expect.mean())
    assert phis.estimator == "sb-ht"


def test_switchback_estimators_require_design():
    traj = simulate_ade_dgp(AdeDgpConfig(), 20, RngStream(5))
    nuis = oracle_nuisances(AdeDgpConfig())
    with pytest.raises(ValueError, match="requires a design"):
        psi_sb_ht(traj)
    with pytest.raises(ValueError, match="requires a design"):
        psi_gate_dml(traj, nuis)


def test_phi_series_rejects_non_finite():
    from dml4ssi.core import geometric_ergodic

    with pytest.raises(ValueError, match="non-finite"):
        PhiSeries(values=np.array([1.0, np.nan]), estimator="dml4ssi",
                  regime=geometric_ergodic())


def test_ade_dml_oracle_unbiased():
    cfg = AdeDgpConfig()
    nuis = oracle_nuisances(cfg)
    psi_star = true_ade(cfg).psi_star
    base = RngStream(6)
    R, T = 300, 400
    est = np.empty(R)
    for r in range(R):
        traj = simulate_ade_dgp(cfg, T, derive_stream(base, r))
        est[r] = psi_ade_dml(traj, nuis)[0]
    se = est.std(ddof=1) / math.sqrt(R)
    assert abs(est.mean() - psi_star) < 3 * se


def test_gate_dml_and_sb_ht_oracle_unbiased():
    cfg = SwitchbackDgpConfig()
    nuis = oracle_nuisances(cfg)
    psi_star = true_gate(cfg).psi_star
    base = RngStream(7)
    R, T = 300, 400
    est_dml = np.empty(R)
    est_ht = np.empty(R)
    for r in range(R):
        traj = simulate_switchback_dgp(cfg, T, derive_stream(base, r))
        est_dml[r] = psi_gate_dml(traj, nuis)[0]
        est_ht[r] = psi_sb_ht(traj)[0]
    for est in (est_dml, est_ht):
        se = est.std(ddof=1) / math.sqrt(R)
        assert abs(est.mean() - psi_star) < 3 * se
    # the debiased estimator is the more precise of the two
    assert est_dml.var(ddof=1) < est_ht.var(ddof=1)
