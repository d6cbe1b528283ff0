"""Structural models: simulators, analytic truths, window probabilities."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dml4ssi import (
    RngStream,
    SwitchbackDesign,
    oracle_true_ade,
    oracle_true_gate,
    simulate_ade_dgp,
    simulate_switchback_dgp,
    switchback_window_prob,
    true_ade,
    true_gate,
    validate_trajectory,
)
from dml4ssi.dgp import (
    AdeDgpConfig,
    SwitchbackDgpConfig,
    ade_outcome_mean,
    ar1_step,
    draw_switchback_assignments,
    m_periodic_start,
    propensity_true,
    window_prob_series,
)


def test_ar1_step_hand_values():
    cfg = AdeDgpConfig()
    assert ar1_step(1.0, 0.0, cfg) == 1.0
    assert ar1_step(3.0, 0.0, cfg) == 2.5
    assert ar1_step(1.0, 0.5, cfg) == 1.5


def test_propensity_true_clipping():
    assert propensity_true(0.05, 0.1) == 0.1
    assert propensity_true(0.5, 0.1) == 0.5
    assert propensity_true(1.7, 0.1) == 0.9
    vec = propensity_true(np.array([-3.0, 0.3, 2.0]), 0.1)
    np.testing.assert_allclose(vec, [0.1, 0.3, 0.9])


def test_ade_outcome_formula_point():
    # sin(2*pi*0.25) + 2*1 + 2*1*1 - 1 = 1 + 2 + 2 - 1
    cfg = AdeDgpConfig()
    assert ade_outcome_mean(cfg, 1.0, 0.25, 1.0) == pytest.approx(4.0)
    assert ade_outcome_mean(cfg, 0.0, 0.25, 1.0) == pytest.approx(0.0)


def test_zero_noise_ade_outcomes_match_formula():
    cfg = AdeDgpConfig(y_noise_sd=0.0, h_noise_sd=0.0)
    traj = simulate_ade_dgp(cfg, 50, RngStream(1))
    np.testing.assert_array_equal(traj.h, np.ones((50, 1)))
    expected = ade_outcome_mean(cfg, traj.d.astype(float), traj.x[:, 0], traj.h[:, 0])
    np.testing.assert_allclose(traj.y, expected, rtol=0, atol=0)


def test_ade_simulation_valid_and_shaped():
    traj = simulate_ade_dgp(AdeDgpConfig(), 1000, RngStream(2))
    assert validate_trajectory(traj) == []
    assert traj.p_x == 10 and traj.p_h == 1
    assert traj.regime.kind == "geometric-ergodic"
    assert traj.design is None


def test_ade_shared_state_moments():
    traj = simulate_ade_dgp(AdeDgpConfig(), 100_000, RngStream(3))
    h = traj.h[100:, 0]
    var_stat = 16.0 / 7.0
    se_mean = math.sqrt(var_stat / h.size)
    assert abs(h.mean() - 1.0) < 3 * se_mean
    assert abs(h.var() - var_stat) < 0.05 * var_stat


def test_ade_treatment_follows_propensity():
    traj = simulate_ade_dgp(AdeDgpConfig(), 50_000, RngStream(4))
    p = propensity_true(traj.x[:, 0], 0.1)
    # grouped by propensity decile, realized frequency tracks the probability
    order = np.argsort(p)
    for chunk in np.array_split(order, 10):
        expect = p[chunk].mean()
        got = traj.d[chunk].mean()
        se = math.sqrt(expect * (1 - expect) / chunk.size)
        assert abs(got - expect) < 4 * se


def test_true_ade_defaults_and_degenerate_cases():
    assert true_ade(AdeDgpConfig()).psi_star == 4.0
    assert true_ade(AdeDgpConfig(interaction_coef=0.0)).psi_star == 2.0
    assert true_ade(AdeDgpConfig()).method == "analytic"


def test_true_ade_finite_horizon_off_fixed_point():
    cfg = AdeDgpConfig(h0_mode="deterministic", h0_value=5.0)
    T = 40
    # E[H_t] = 1 + 4 * 0.75^t; psi*_T = 2 + (2/T) * sum_t E[H_t]
    mean_h = sum(1.0 + 4.0 * 0.75**t for t in range(1, T + 1)) / T
    expected = 2.0 + 2.0 * mean_h
    assert true_ade(cfg, T=T).psi_star == pytest.approx(expected, rel=1e-12)
    assert true_ade(cfg, T=T).psi_star > 4.0


def test_true_ade_matches_oracle():
    cfg = AdeDgpConfig(h0_mode="deterministic", h0_value=5.0)
    spec = oracle_true_ade(cfg, R=3000, rng=RngStream(5), T=40)
    assert spec.method.startswith("oracle")
    assert abs(spec.psi_star - true_ade(cfg, T=40).psi_star) < 3 * spec.se


def test_true_gate_value():
    got = true_gate(SwitchbackDgpConfig())
    assert got.psi_star == pytest.approx(2.0 + 2.0 * (math.exp(-1.0 / 3.0) - 1.0))
    assert got.psi_star == pytest.approx(1.4330626211475785, abs=1e-15)
    assert true_gate(SwitchbackDgpConfig(spill_coef=0.0)).psi_star == 2.0
    big = true_gate(SwitchbackDgpConfig(spill_scale=1e9)).psi_star
    assert big == pytest.approx(2.0, abs=1e-6)


def test_true_gate_matches_oracle():
    cfg = SwitchbackDgpConfig()
    spec = oracle_true_gate(cfg, R=4000, rng=RngStream(6))
    assert abs(spec.psi_star - true_gate(cfg).psi_star) < 3 * spec.se


def test_window_prob_hand_enumerated_values():
    d105 = SwitchbackDesign(m=5, block_len=10)
    d65 = SwitchbackDesign(m=5, block_len=6)
    t_interior = 30
    assert switchback_window_prob(d105, t_interior, "all-ones") == pytest.approx(0.375)
    assert switchback_window_prob(d65, t_interior, "all-ones") == pytest.approx(7 / 24)
    assert switchback_window_prob(
        SwitchbackDesign(m=0, block_len=3, treat_prob=0.3), 5, "all-ones"
    ) == pytest.approx(0.3)


def test_window_prob_symmetry_and_bound():
    for m, ell in [(5, 10), (5, 6), (1, 4), (0, 1), (3, 7)]:
        design = SwitchbackDesign(m=m, block_len=ell)
        for t in range(1, 25):
            p1 = switchback_window_prob(design, t, "all-ones")
            p0 = switchback_window_prob(design, t, "all-zeros")
            assert p1 == pytest.approx(p0)  # treat_prob = 1/2
            assert p1 >= (ell - m) / (2.0 * ell) - 1e-12


def test_window_prob_periodic_in_t():
    design = SwitchbackDesign(m=5, block_len=10)
    start = m_periodic_start(design)
    for t in range(start, start + 10):
        assert switchback_window_prob(design, t, "all-ones") == pytest.approx(
            switchback_window_prob(design, t + 10, "all-ones")
        )


def test_window_prob_series_matches_pointwise():
    design = SwitchbackDesign(m=3, block_len=5, treat_prob=0.4)
    series = window_prob_series(design, 40, "all-ones")
    direct = [switchback_window_prob(design, t, "all-ones") for t in range(1, 41)]
    np.testing.assert_allclose(series, direct, rtol=1e-15)


def test_window_prob_rejects_bad_inputs():
    design = SwitchbackDesign()
    with pytest.raises(ValueError):
        switchback_window_prob(design, 3, "mixed")
    with pytest.raises(ValueError):
        switchback_window_prob(design, 0, "all-ones")


def test_window_prob_matches_empirical_frequency():
    design = SwitchbackDesign(m=5, block_len=10)
    t = 17
    n = 4000
    hits = 0
    base = RngStream(7)
    from dml4ssi import derive_stream

    for r in range(n):
        d_all, _ = draw_switchback_assignments(design, t, derive_stream(base, r))
        window = d_all[t - 1 : t + design.m]  # positions t-m .. t
        hits += int(np.all(window == 1))
    p = switchback_window_prob(design, t, "all-ones")
    se = math.sqrt(p * (1 - p) / n)
    assert abs(hits / n - p) < 3 * se


def test_assignments_block_structure():
    design = SwitchbackDesign(m=5, block_len=10, treat_prob=0.5)
    T = 200
    d_all, offset = draw_switchback_assignments(design, T, RngStream(8))
    assert d_all.shape == (T + design.m,)
    assert 1 <= offset <= design.block_len
    positions = np.arange(1 - design.m, T + 1)
    # constant within the initial segment and within each later block
    init = d_all[positions < offset]
    assert init.size == 0 or len(np.unique(init)) == 1
    for b in range((T - offset) // design.block_len + 1):
        lo, hi = offset + b * design.block_len, offset + (b + 1) * design.block_len
        block = d_all[(positions >= lo) & (positions < hi)]
        assert block.size == 0 or len(np.unique(block)) == 1


def test_assignments_degenerate_design_iid():
    design = SwitchbackDesign(m=0, block_len=1)
    n = 20_000
    d_all, _ = draw_switchback_assignments(design, n, RngStream(9))
    assert d_all.shape == (n,)
    assert abs(d_all.mean() - 0.5) < 3 * math.sqrt(0.25 / n)
    # no block structure: adjacent agreement near 1/2
    agree = (d_all[1:] == d_all[:-1]).mean()
    assert abs(agree - 0.5) < 3 * math.sqrt(0.25 / n)


def test_zero_noise_switchback_outcomes():
    design = SwitchbackDesign(m=5, block_len=10, treat_prob=0.5)
    cfg = SwitchbackDgpConfig(design=design, y_noise_sd=0.0)
    traj = simulate_switchback_dgp(cfg, 400, RngStream(10))
    assert validate_trajectory(traj) == []
    assert traj.regime.kind == "m-dependent" and traj.regime.m == 5
    # all-treated window: y = sin(2 pi x1) + 2 + 2 e^{-1/3} - 1
    lag = traj.h[:, :5]
    full1 = (traj.d == 1) & np.all(lag == 1.0, axis=1)
    full0 = (traj.d == 0) & np.all(lag == 0.0, axis=1)
    assert full1.any() and full0.any()
    y1 = traj.y[full1] - np.sin(2 * np.pi * traj.x[full1, 0])
    np.testing.assert_allclose(y1, 1.0 + 2.0 * math.exp(-1.0 / 3.0), atol=1e-12)
    y0 = traj.y[full0] - np.sin(2 * np.pi * traj.x[full0, 0])
    np.testing.assert_allclose(y0, 1.0, atol=1e-12)


def test_switchback_lagged_state_consistency():
    traj = simulate_switchback_dgp(SwitchbackDgpConfig(), 80, RngStream(11))
    m = traj.design.m
    # h_t's first lag block equals the realized treatments d_{t-m}..d_{t-1}
    for t in range(m, traj.T):
        np.testing.assert_array_equal(traj.h[t, :m], traj.d[t - m : t])
        np.testing.assert_allclose(traj.h[t, m:], traj.x[t - m : t, 0])


def test_switchback_outcomes_decorrelate_beyond_window_plus_block():
    # y_t depends on d_{t-m..t}; assignments are correlated within blocks of
    # length block_len, so outcomes decorrelate once lags exceed m+block_len-1
    traj = simulate_switchback_dgp(SwitchbackDgpConfig(), 100_000, RngStream(12))
    y = traj.y - traj.y.mean()

    def acorr(k: int) -> float:
        return float(np.dot(y[k:], y[:-k]) / ((y.size - k) * y.var()))

    assert acorr(3) > 0.05  # same-block overlap keeps nearby outcomes coupled
    for k in (15, 18, 25):
        assert abs(acorr(k)) < 0.02


def test_simulation_determinism():
    a = simulate_ade_dgp(AdeDgpConfig(), 50, RngStream(13))
    b = simulate_ade_dgp(AdeDgpConfig(), 50, RngStream(13))
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.d, b.d)
    sa = simulate_switchback_dgp(SwitchbackDgpConfig(), 50, RngStream(13))
    sb = simulate_switchback_dgp(SwitchbackDgpConfig(), 50, RngStream(13))
    np.testing.assert_array_equal(sa.y, sb.y)


def test_config_validation():
    with pytest.raises(ValueError):
        AdeDgpConfig(zeta=0.6)
    with pytest.raises(ValueError):
        AdeDgpConfig(ar_coef=1.0)
    with pytest.raises(ValueError):
        AdeDgpConfig(h0_mode="sideways")
    with pytest.raises(ValueError):
        SwitchbackDgpConfig(spill_scale=0.0)
    with pytest.raises(ValueError):
        simulate_ade_dgp(AdeDgpConfig(), 0, RngStream(1))


@settings(max_examples=20, deadline=None)
@given(
    m=st.integers(0, 4),
    extra=st.integers(1, 6),
    p=st.floats(0.1, 0.9),
    t=st.integers(1, 40),
)
def test_window_prob_is_probability(m, extra, p, t):
    design = SwitchbackDesign(m=m, block_len=m + extra, treat_prob=p)
    val = switchback_window_prob(design, t, "all-ones")
    assert 0.0 < val <= 1.0


@settings(max_examples=15, deadline=None)
@given(h=st.floats(-50, 50), noise=st.floats(-5, 5))
def test_ar1_step_linearity(h, noise):
    cfg = AdeDgpConfig()
    assert ar1_step(h, noise, cfg) == pytest.approx(
        0.75 * (h - 1.0) + 1.0 + noise, rel=1e-12, abs=1e-12
    )
