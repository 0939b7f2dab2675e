"""File loading, filtering, event detection, and cycle segmentation."""

import numpy as np
import pytest

from scomo.errors import (
    EventDetectionError,
    FilterError,
    IngestError,
    SegmentationError,
)
from scomo.ingest import (
    CANONICAL_JOINTS,
    N_COLUMNS,
    ForcePlateRecord,
    GaitEvents,
    JointTrajectory,
    detect_gait_events,
    joint_columns,
    load_grf,
    load_trajectory,
    lowpass_filter,
    remove_grf_offset,
    segment_cycles,
)


def write_traj(path, data, rate_hz=100.0, units="m", header=None):
    lines = [header if header is not None else f"# rate_hz={rate_hz}, units={units}"]
    for row in np.atleast_2d(data):
        lines.append(",".join(f"{v}" for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_grf(path, force, rate_hz=1000.0, side="robotic", header=None):
    lines = [header if header is not None else f"# rate_hz={rate_hz}, side={side}"]
    lines += [f"{v}" for v in np.asarray(force).ravel()]
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# trajectory loading


def test_joint_columns_cover_all_45_columns():
    seen = []
    for joint in CANONICAL_JOINTS:
        s = joint_columns(joint)
        seen.extend(range(s.start, s.stop))
    assert seen == list(range(N_COLUMNS))


def test_load_trajectory_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.normal(0.0, 0.3, (20, N_COLUMNS))
    p = tmp_path / "walk.csv"
    write_traj(p, data)
    traj = load_trajectory(p)
    assert traj.rate_hz == 100.0
    assert traj.n_samples == 20
    # text round trip via repr(float) is exact
    assert np.array_equal(traj.samples, data)


def test_load_trajectory_converts_mm(tmp_path):
    data = np.full((5, N_COLUMNS), 1250.0)
    p = tmp_path / "walk_mm.csv"
    write_traj(p, data, units="mm")
    traj = load_trajectory(p)
    assert np.allclose(traj.samples, 1.25, atol=0)


def test_load_trajectory_header_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("")
    with pytest.raises(IngestError, match="empty"):
        load_trajectory(p)
    write_traj(p, np.zeros((3, N_COLUMNS)), header="# rate=100")
    with pytest.raises(IngestError, match="malformed header"):
        load_trajectory(p)
    write_traj(p, np.zeros((3, N_COLUMNS)), header="# rate_hz=100, units=ft")
    with pytest.raises(IngestError, match="malformed header"):
        load_trajectory(p)
    with pytest.raises(IngestError, match="not found"):
        load_trajectory(tmp_path / "missing.csv")


def test_load_trajectory_wrong_column_count(tmp_path):
    p = tmp_path / "short.csv"
    write_traj(p, np.zeros((3, N_COLUMNS - 1)))
    with pytest.raises(IngestError, match="column count"):
        load_trajectory(p)


def test_load_trajectory_no_data_rows(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("# rate_hz=100, units=m\n")
    with pytest.raises(IngestError, match="no data rows"):
        load_trajectory(p)


def test_load_trajectory_bad_token_points_at_line(tmp_path):
    p = tmp_path / "tok.csv"
    rows = [",".join(["0.0"] * N_COLUMNS) for _ in range(4)]
    rows[2] = rows[2].replace("0.0", "oops", 1)
    p.write_text("# rate_hz=100, units=m\n" + "\n".join(rows) + "\n")
    with pytest.raises(IngestError, match="line 4"):
        load_trajectory(p)


def test_nan_gap_interpolated(tmp_path):
    data = np.tile(np.linspace(0.0, 1.0, 12)[:, None], (1, N_COLUMNS))
    data[4:7, 0] = np.nan  # 3-sample gap in one column
    p = tmp_path / "gap.csv"
    write_traj(p, data)
    traj = load_trajectory(p)
    # linear interpolation across the gap restores the line exactly
    assert np.allclose(traj.samples[:, 0], np.linspace(0.0, 1.0, 12), atol=1e-12)


def test_nan_gap_too_long_rejected(tmp_path):
    data = np.zeros((30, N_COLUMNS))
    data[5:17, 3] = np.nan  # 12 > 10 samples
    p = tmp_path / "toolong.csv"
    write_traj(p, data)
    with pytest.raises(IngestError, match="exceeds"):
        load_trajectory(p)


def test_nan_at_boundary_rejected(tmp_path):
    data = np.zeros((10, N_COLUMNS))
    data[0, 0] = np.nan
    p = tmp_path / "edge.csv"
    write_traj(p, data)
    with pytest.raises(IngestError, match="boundary"):
        load_trajectory(p)


def test_trajectory_validation():
    with pytest.raises(IngestError, match="45 columns"):
        JointTrajectory(samples=np.zeros((5, 44)), rate_hz=100.0)
    with pytest.raises(IngestError, match="rate_hz"):
        JointTrajectory(samples=np.zeros((5, 45)), rate_hz=0.0)
    with pytest.raises(IngestError, match="NaN"):
        JointTrajectory(samples=np.full((5, 45), np.nan), rate_hz=100.0)


# ---------------------------------------------------------------------------
# GRF loading and conditioning


def test_load_grf_round_trip(tmp_path):
    force = np.array([3.0, 3.0, 100.0, 700.0, 100.0, 3.0])
    p = tmp_path / "grf.csv"
    write_grf(p, force, side="contralateral")
    grf = load_grf(p)
    assert grf.side == "contralateral"
    assert grf.rate_hz == 1000.0
    assert np.array_equal(grf.vertical_grf, force)


def test_load_grf_rejects_bad_side(tmp_path):
    p = tmp_path / "grf.csv"
    write_grf(p, [1.0, 2.0], header="# rate_hz=1000, side=left")
    with pytest.raises(IngestError):
        load_grf(p)


def test_load_grf_rejects_nan(tmp_path):
    p = tmp_path / "grf.csv"
    p.write_text("# rate_hz=1000, side=robotic\n1.0\nnan\n2.0\n")
    with pytest.raises(IngestError, match="NaN"):
        load_grf(p)


def test_remove_grf_offset_subtracts_baseline_and_clips():
    force = np.concatenate([np.full(200, 5.0), np.full(100, 800.0), np.full(200, 5.0)])
    grf = ForcePlateRecord(force, 1000.0, "robotic")
    cleaned = remove_grf_offset(grf)
    assert cleaned.vertical_grf.min() == 0.0
    assert np.isclose(cleaned.vertical_grf.max(), 795.0)


# ---------------------------------------------------------------------------
# filtering


def test_filter_preserves_dc_and_length():
    t = np.arange(400)
    data = np.tile((0.7 + 0.0 * t)[:, None], (1, N_COLUMNS))
    traj = JointTrajectory(data, 100.0)
    out = lowpass_filter(traj, cutoff_hz=6.0)
    assert out.n_samples == 400
    assert np.allclose(out.samples, 0.7, atol=1e-9)


def test_filter_attenuates_high_frequency():
    t = np.arange(1000) / 100.0
    sig = np.sin(2 * np.pi * 30.0 * t)
    data = np.tile(sig[:, None], (1, N_COLUMNS))
    out = lowpass_filter(JointTrajectory(data, 100.0), cutoff_hz=6.0)
    mid = out.samples[300:700, 0]
    # effective 4th-order magnitude at 5x cutoff: ~ -28 dB
    assert np.abs(mid).max() < 10 ** (-20 / 20)


def test_filter_cutoff_bounds():
    traj = JointTrajectory(np.zeros((100, N_COLUMNS)), 100.0)
    with pytest.raises(FilterError):
        lowpass_filter(traj, cutoff_hz=0.0)
    with pytest.raises(FilterError):
        lowpass_filter(traj, cutoff_hz=50.0)
    with pytest.raises(FilterError, match="too short"):
        lowpass_filter(JointTrajectory(np.zeros((8, N_COLUMNS)), 100.0), 6.0)


# ---------------------------------------------------------------------------
# event detection


def bump_grf(onsets, stance, n, peak=800.0, rate=1000.0, side="robotic"):
    force = np.zeros(n)
    shape = peak * np.sin(np.pi * (np.arange(stance) + 0.5) / stance)
    for s in onsets:
        force[s : s + stance] += shape
    return ForcePlateRecord(force, rate, side)


def test_detect_events_known_onsets():
    stance = 600
    onsets = [1000, 2100, 3200, 4300]
    grf = bump_grf(onsets, stance, 6000)
    events = detect_gait_events(grf, threshold_n=20.0, kinematics_rate_hz=100.0)
    hs = events.heel_strikes["robotic"]
    to = events.toe_offs["robotic"]
    assert len(hs) == 4 and len(to) == 4
    # crossing of 20 N on an 800 N half-sine over 600 samples: first
    # sample with 800*sin(pi*(j+0.5)/600) >= 20 is j = 4
    shape = 800.0 * np.sin(np.pi * (np.arange(stance) + 0.5) / stance)
    j_up = int(np.argmax(shape >= 20.0))
    expected_hs = [round((s + j_up) / 10.0) for s in onsets]
    assert list(hs) == expected_hs
    # toe-offs fall between consecutive heel strikes
    assert all(hs[i] < to[i] < hs[i + 1] for i in range(3))


def test_detect_events_requires_crossings():
    flat = ForcePlateRecord(np.full(1000, 5.0), 1000.0, "robotic")
    with pytest.raises(EventDetectionError, match="no threshold crossings"):
        detect_gait_events(flat, threshold_n=20.0)
    with pytest.raises(EventDetectionError, match="positive"):
        detect_gait_events(flat, threshold_n=0.0)


def test_detect_events_ignores_transients_below_sustain():
    # a 5-sample spike at 1000 Hz is under the 20 ms sustain window
    force = np.zeros(5000)
    force[1000:1600] = 500.0  # real contact
    force[3000:3005] = 500.0  # spike
    grf = ForcePlateRecord(force, 1000.0, "robotic")
    events = detect_gait_events(grf, threshold_n=20.0, kinematics_rate_hz=100.0)
    assert len(events.heel_strikes["robotic"]) == 1
    assert len(events.toe_offs["robotic"]) == 1


def test_detect_events_chatter_warning():
    force = np.zeros(5000)
    force[1000:1500] = 500.0
    force[1550:2200] = 500.0  # 50 ms gap: kept but flagged
    grf = ForcePlateRecord(force, 1000.0, "robotic")
    events = detect_gait_events(grf, threshold_n=20.0, kinematics_rate_hz=100.0)
    assert len(events.warnings) >= 1
    assert "ms apart" in events.warnings[0]


def test_events_validate_ordering():
    with pytest.raises(EventDetectionError, match="strictly increasing"):
        GaitEvents({"robotic": np.array([10, 10, 30])}, {"robotic": np.array([])}).validate()
    with pytest.raises(EventDetectionError, match="alternate"):
        GaitEvents(
            {"robotic": np.array([10, 30, 50])},
            {"robotic": np.array([12, 14])},
        ).validate()


def test_events_merge_disjoint_sides():
    a = GaitEvents({"robotic": np.array([10])}, {"robotic": np.array([15])})
    b = GaitEvents({"contralateral": np.array([5])}, {"contralateral": np.array([8])})
    merged = a.merged_with(b)
    assert set(merged.heel_strikes) == {"robotic", "contralateral"}
    with pytest.raises(EventDetectionError, match="duplicate side"):
        a.merged_with(a)


# ---------------------------------------------------------------------------
# segmentation


def test_segment_cycles_takes_last_n(symmetric_recording):
    filtered, events, _ = symmetric_recording
    cycles = segment_cycles(filtered, events, n=4, side="robotic")
    hs = events.heel_strikes["robotic"]
    assert cycles.n_cycles == 4
    assert cycles.source_start == hs[-5]
    assert cycles.trajectory.n_samples == hs[-1] - hs[-5]
    # bounds tile the restricted trajectory exactly
    assert cycles.cycle_bounds[0][0] == 0
    assert cycles.cycle_bounds[-1][1] == cycles.trajectory.n_samples
    widths = [e - s for s, e in cycles.cycle_bounds]
    assert all(w == widths[0] for w in widths)  # synthetic gait is periodic


def test_segment_cycles_insufficient(symmetric_recording):
    filtered, events, _ = symmetric_recording
    with pytest.raises(SegmentationError, match="insufficient cycles"):
        segment_cycles(filtered, events, n=len(events.heel_strikes["robotic"]), side="robotic")
    with pytest.raises(SegmentationError, match="no heel strikes"):
        segment_cycles(filtered, GaitEvents(), n=2, side="robotic")
