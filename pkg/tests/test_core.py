"""Core types, trajectory validation, and the interchange CSV format."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dml4ssi import (
    EstimateReport,
    Regime,
    RngStream,
    SwitchbackDesign,
    Trajectory,
    TrajectoryFormatError,
    geometric_ergodic,
    m_dependent,
    read_trajectory_csv,
    simulate_ade_dgp,
    simulate_switchback_dgp,
    validate_trajectory,
    write_trajectory_csv,
)
from dml4ssi.dgp import AdeDgpConfig, SwitchbackDgpConfig

from helpers import ade_traj


def test_regime_constructors():
    g = geometric_ergodic()
    assert g.kind == "geometric-ergodic" and g.m is None
    md = m_dependent(3)
    assert md.kind == "m-dependent" and md.m == 3
    assert m_dependent(0).m == 0


def test_regime_validation():
    with pytest.raises(ValueError):
        m_dependent(-1)
    with pytest.raises(ValueError):
        Regime("geometric-ergodic", m=2)
    with pytest.raises(ValueError):
        Regime("banana")


def test_switchback_design_defaults_and_validation():
    d = SwitchbackDesign()
    assert (d.m, d.block_len, d.treat_prob) == (5, 10, 0.5)
    with pytest.raises(ValueError):
        SwitchbackDesign(m=-1)
    with pytest.raises(ValueError):
        SwitchbackDesign(m=5, block_len=5)
    with pytest.raises(ValueError):
        SwitchbackDesign(treat_prob=1.0)
    with pytest.raises(ValueError):
        SwitchbackDesign(treat_prob=0.0)


def test_minimal_trajectory_is_valid():
    traj = ade_traj(d=[1], y=[4.0])
    assert validate_trajectory(traj) == []


def test_nonbinary_treatment_reported_with_time_index():
    traj = ade_traj(d=[1, 0, 2, 1], y=[0.0, 0.0, 0.0, 0.0])
    problems = validate_trajectory(traj)
    assert problems == ["treatment not binary at t=3"]


def test_nonfinite_shared_state_reported_with_time_index():
    traj = ade_traj(d=[0, 1], y=[0.0, 0.0], h1=[np.nan, 1.0])
    problems = validate_trajectory(traj)
    assert problems == ["non-finite shared state at t=1"]


def test_multiple_violations_all_enumerated():
    traj = ade_traj(
        d=[2, 1, 0], y=[0.0, np.inf, 0.0], x1=[0.0, 0.0, np.nan]
    )
    problems = validate_trajectory(traj)
    assert "treatment not binary at t=1" in problems
    assert "non-finite covariates at t=3" in problems
    assert "non-finite outcome at t=2" in problems
    assert len(problems) == 3


def test_shape_mismatch_reported():
    traj = Trajectory(
        h0=np.array([1.0]),
        x=np.zeros((3, 1)),
        d=np.array([1, 0]),
        h=np.ones((3, 1)),
        y=np.zeros(3),
        regime=geometric_ergodic(),
    )
    problems = validate_trajectory(traj)
    assert any("treatment array shape" in p for p in problems)


def test_design_regime_disagreement_reported():
    d = SwitchbackDesign(m=2, block_len=4)
    traj = Trajectory(
        h0=np.zeros(4),
        x=np.full((3, 1), 0.5),
        d=np.array([1, 0, 1]),
        h=np.tile(np.array([1.0, 0.0, 0.5, 0.5]), (3, 1)),
        y=np.zeros(3),
        regime=m_dependent(5),
        design=d,
    )
    problems = validate_trajectory(traj)
    assert any("disagrees with regime" in p for p in problems)


def test_validation_is_pure():
    traj = ade_traj(d=[1, 0], y=[1.0, 2.0])
    before = (traj.x.copy(), traj.d.copy(), traj.h.copy(), traj.y.copy())
    validate_trajectory(traj)
    validate_trajectory(traj)
    np.testing.assert_array_equal(before[0], traj.x)
    np.testing.assert_array_equal(before[1], traj.d)
    np.testing.assert_array_equal(before[2], traj.h)
    np.testing.assert_array_equal(before[3], traj.y)


def test_obs_view_matches_arrays():
    traj = ade_traj(d=[1, 0, 1], y=[1.0, 2.0, 3.0], x1=[0.1, 0.2, 0.3])
    assert len(traj.obs) == 3
    o = traj.obs[1]
    assert o.d == 0 and o.y == 2.0 and o.x[0] == 0.2
    assert [ob.y for ob in traj.obs] == [1.0, 2.0, 3.0]
    with pytest.raises(IndexError):
        traj.obs[3]


def test_estimate_report_fields():
    r = EstimateReport(
        estimator="dml4ssi",
        psi_hat=4.0,
        sigma2_hat=2.0,
        ci_low=3.0,
        ci_high=5.0,
        alpha=0.05,
        T=100,
    )
    assert r.ci_low <= r.psi_hat <= r.ci_high
    assert not r.degenerate


def _roundtrip(traj, tmp_path):
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path)
    back = read_trajectory_csv(path, traj.regime, traj.design)
    np.testing.assert_array_equal(back.h0, traj.h0)
    np.testing.assert_array_equal(back.x, traj.x)
    np.testing.assert_array_equal(back.d, traj.d)
    np.testing.assert_array_equal(back.h, traj.h)
    np.testing.assert_array_equal(back.y, traj.y)
    return path


def test_csv_roundtrip_ade_bit_exact(tmp_path):
    traj = simulate_ade_dgp(AdeDgpConfig(), 25, RngStream(4))
    path = _roundtrip(traj, tmp_path)
    header = path.read_text().splitlines()[0]
    assert header == "t," + ",".join(f"x_{j}" for j in range(1, 11)) + ",d,h_1,y"


def test_csv_roundtrip_switchback_bit_exact(tmp_path):
    traj = simulate_switchback_dgp(SwitchbackDgpConfig(), 30, RngStream(4))
    _roundtrip(traj, tmp_path)


def test_csv_initial_state_row(tmp_path):
    traj = ade_traj(d=[1, 0], y=[1.5, -2.0], h1=[0.25, 4.0])
    path = tmp_path / "t.csv"
    write_trajectory_csv(traj, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 4  # header + t=0 + two steps
    assert lines[1].split(",") == ["0", "", "", "1", ""]


def test_csv_reader_missing_y_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,x_1,d,h_1,z\n0,,,1.0,\n1,0.0,1,1.0,2.0\n")
    with pytest.raises(TrajectoryFormatError) as err:
        read_trajectory_csv(path, geometric_ergodic())
    assert "missing d or y" in str(err.value)


def test_csv_reader_reports_row_numbers(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(
        "t,x_1,d,h_1,y\n"
        "0,,,1.0,\n"
        "1,0.0,1,1.0,2.0\n"
        "2,0.0,maybe,1.0,2.0\n"
        "3,0.0,1,oops,2.0\n"
    )
    with pytest.raises(TrajectoryFormatError) as err:
        read_trajectory_csv(path, geometric_ergodic())
    problems = err.value.problems
    assert any(p.startswith("row 4") and "treatment" in p for p in problems)
    assert any(p.startswith("row 5") and "shared-state" in p for p in problems)


def test_csv_reader_empty_and_truncated(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(TrajectoryFormatError):
        read_trajectory_csv(empty, geometric_ergodic())
    only_header = tmp_path / "hdr.csv"
    only_header.write_text("t,x_1,d,h_1,y\n")
    with pytest.raises(TrajectoryFormatError) as err:
        read_trajectory_csv(only_header, geometric_ergodic())
    assert "t=0" in str(err.value)


def test_csv_reader_time_index_mismatch(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,x_1,d,h_1,y\n0,,,1.0,\n7,0.0,1,1.0,2.0\n")
    with pytest.raises(TrajectoryFormatError) as err:
        read_trajectory_csv(path, geometric_ergodic())
    assert any("expected t=1" in p for p in err.value.problems)


finite = st.floats(
    min_value=-1e12, max_value=1e12, allow_nan=False, allow_infinity=False
)


@settings(max_examples=30, deadline=None)
@given(
    ys=st.lists(finite, min_size=1, max_size=6),
    ds=st.lists(st.integers(0, 1), min_size=6, max_size=6),
)
def test_csv_roundtrip_random_values(tmp_path_factory, ys, ds):
    T = len(ys)
    traj = ade_traj(d=ds[:T], y=ys, x1=ys, h1=ys)
    path = tmp_path_factory.mktemp("rt") / "t.csv"
    write_trajectory_csv(traj, path)
    back = read_trajectory_csv(path, geometric_ergodic())
    np.testing.assert_array_equal(back.y, traj.y)
    np.testing.assert_array_equal(back.x, traj.x)
    np.testing.assert_array_equal(back.d, traj.d)
