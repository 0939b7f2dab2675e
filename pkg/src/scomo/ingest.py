"""Motion-capture and force-plate ingestion.

Loads joint-center trajectory files, zero-phase low-pass filters them,
detects heel strikes / toe-offs from vertical ground reaction force, and
cuts heel-strike-to-heel-strike gait cycles.

File formats
------------
Trajectory: CSV whose first line is ``# rate_hz=<f>, units=<m|mm>``
followed by 45 numeric columns, X,Y,Z per joint in the canonical order
(X medio-lateral, Y anterior-posterior, Z vertical).

GRF: CSV whose first line is ``# rate_hz=<f>, side=<robotic|contralateral>``
followed by one column of newtons.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import butter, sosfiltfilt

from .errors import (
    EventDetectionError,
    FilterError,
    IngestError,
    SegmentationError,
)

# 15 joint centers, 3 coordinates each: 45 columns total.
CANONICAL_JOINTS = (
    "l_ankle", "r_ankle",
    "l_knee", "r_knee",
    "l_hip", "r_hip",
    "l_wrist", "r_wrist",
    "l_elbow", "r_elbow",
    "l_shoulder", "r_shoulder",
    "pelvis", "sternum", "head",
)

N_JOINTS = len(CANONICAL_JOINTS)
N_COLUMNS = 3 * N_JOINTS

AXIS_ML, AXIS_AP, AXIS_VERT = 0, 1, 2

SIDES = ("robotic", "contralateral")

MAX_NAN_GAP = 10  # samples; longer runs are load errors, not repairs


def joint_columns(joint: str) -> slice:
    """Column slice (X, Y, Z) of one canonical joint."""
    i = CANONICAL_JOINTS.index(joint)
    return slice(3 * i, 3 * i + 3)


@dataclass(frozen=True)
class JointTrajectory:
    """Time-indexed 15-joint trajectory, meters, shape (t, 45)."""

    samples: np.ndarray
    rate_hz: float
    joint_order: tuple = CANONICAL_JOINTS

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 2 or samples.shape[1] != N_COLUMNS:
            raise IngestError(
                f"trajectory must have {N_COLUMNS} columns, got shape {samples.shape}"
            )
        if np.isnan(samples).any():
            raise IngestError("trajectory contains NaN after ingestion")
        if self.rate_hz <= 0:
            raise IngestError(f"rate_hz must be positive, got {self.rate_hz}")
        if tuple(self.joint_order) != CANONICAL_JOINTS:
            raise IngestError("joint_order must match the canonical 15-joint list")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    def joint(self, name: str) -> np.ndarray:
        """(t, 3) view of one joint's XYZ trajectory."""
        return self.samples[:, joint_columns(name)]


@dataclass(frozen=True)
class ForcePlateRecord:
    """Single-belt vertical GRF time series, newtons."""

    vertical_grf: np.ndarray
    rate_hz: float
    side: str

    def __post_init__(self):
        grf = np.asarray(self.vertical_grf, dtype=float).ravel()
        object.__setattr__(self, "vertical_grf", grf)
        if self.side not in SIDES:
            raise IngestError(f"side must be one of {SIDES}, got {self.side!r}")
        if self.rate_hz <= 0:
            raise IngestError("rate_hz must be positive")
        if np.isnan(grf).any():
            raise IngestError("GRF contains NaN")


@dataclass
class GaitEvents:
    """Heel-strike and toe-off sample indices per side, kinematics rate."""

    heel_strikes: dict = field(default_factory=dict)
    toe_offs: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def validate(self):
        for side in self.heel_strikes:
            hs = np.asarray(self.heel_strikes[side])
            to = np.asarray(self.toe_offs.get(side, []))
            for arr, name in ((hs, "heel_strikes"), (to, "toe_offs")):
                if arr.size > 1 and not np.all(np.diff(arr) > 0):
                    raise EventDetectionError(f"{name} not strictly increasing on {side}")
            # alternation: every toe-off falls strictly between its heel
            # strike and the next one, and no two share an interval
            for t in to:
                k = np.searchsorted(hs, t)
                if k < hs.size and hs[k] == t:
                    raise EventDetectionError(f"events do not alternate on {side}")
                if k == 0 or k == hs.size:
                    continue  # outside the recorded strikes is fine
                if not (hs[k - 1] < t < hs[k]):
                    raise EventDetectionError(f"events do not alternate on {side}")
            if to.size > 1 and hs.size:
                bins = np.searchsorted(hs, to)
                interior = bins[(bins > 0) & (bins < hs.size)]
                if np.unique(interior).size != interior.size:
                    raise EventDetectionError(f"events do not alternate on {side}")
        return self

    def merged_with(self, other: "GaitEvents") -> "GaitEvents":
        """Combine per-side events from two records (disjoint sides)."""
        hs = dict(self.heel_strikes)
        to = dict(self.toe_offs)
        for side in other.heel_strikes:
            if side in hs:
                raise EventDetectionError(f"duplicate side {side!r} when merging events")
            hs[side] = other.heel_strikes[side]
            to[side] = other.toe_offs[side]
        return GaitEvents(hs, to, self.warnings + other.warnings)


@dataclass(frozen=True)
class GaitCycleSet:
    """Trajectory restricted to N consecutive heel-strike cycles."""

    trajectory: JointTrajectory
    cycle_bounds: tuple  # ((start, end), ...) half-open, contiguous
    n_cycles: int
    side: str = "robotic"
    source_start: int = 0  # index of cycle 0 in the source trajectory

    def __post_init__(self):
        if self.n_cycles < 2:
            raise SegmentationError("need at least 2 cycles")
        bounds = tuple((int(s), int(e)) for s, e in self.cycle_bounds)
        object.__setattr__(self, "cycle_bounds", bounds)
        for (s0, e0), (s1, _) in zip(bounds, bounds[1:]):
            if e0 != s1:
                raise SegmentationError("cycle bounds must be contiguous")
        if bounds[0][0] != 0 or bounds[-1][1] != self.trajectory.n_samples:
            raise SegmentationError("cycle bounds must tile the trajectory exactly")


_TRAJ_HEADER = re.compile(r"#\s*rate_hz\s*=\s*([\d.eE+-]+)\s*,\s*units\s*=\s*(m|mm)\s*$")
_GRF_HEADER = re.compile(r"#\s*rate_hz\s*=\s*([\d.eE+-]+)\s*,\s*side\s*=\s*(\w+)\s*$")


def _read_numeric_rows(lines, path, n_cols):
    rows = []
    for lineno, line in enumerate(lines, start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != n_cols:
            raise IngestError(
                f"{path}: column count {len(parts)} != {n_cols} at line {lineno}"
            )
        try:
            rows.append([float(p) if p.strip().lower() != "nan" else np.nan for p in parts])
        except ValueError as exc:
            raise IngestError(f"{path}: bad numeric value at line {lineno}: {exc}") from exc
    if not rows:
        raise IngestError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def _read_table(path: Path, n_cols: int) -> np.ndarray:
    """Numeric body of a headered CSV.

    Fast path is numpy's C parser; on any parse failure the slow
    row-by-row reader runs to produce a precise line-numbered error.
    """
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # empty input warns; handled below
            data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError:
        lines = path.read_text().splitlines()
        return _read_numeric_rows(lines[1:], path, n_cols)
    if data.size == 0:
        raise IngestError(f"{path}: no data rows")
    if data.shape[1] != n_cols:
        raise IngestError(
            f"{path}: column count {data.shape[1]} != {n_cols} at line 2"
        )
    return data


def _interp_nan_gaps(column: np.ndarray, max_gap: int, label: str) -> np.ndarray:
    """Linearly fill NaN runs up to max_gap samples; longer runs are errors."""
    mask = np.isnan(column)
    if not mask.any():
        return column
    # locate runs of consecutive NaNs
    idx = np.flatnonzero(mask)
    run_starts = idx[np.r_[True, np.diff(idx) > 1]]
    run_ends = idx[np.r_[np.diff(idx) > 1, True]]
    for s, e in zip(run_starts, run_ends):
        length = e - s + 1
        if length > max_gap:
            raise IngestError(f"{label}: NaN run of {length} samples exceeds {max_gap}")
        if s == 0 or e == len(column) - 1:
            raise IngestError(f"{label}: NaN run touches the record boundary")
    out = column.copy()
    valid = ~mask
    out[mask] = np.interp(np.flatnonzero(mask), np.flatnonzero(valid), column[valid])
    return out


def load_trajectory(path) -> JointTrajectory:
    """Load and validate a joint-center trajectory file.

    Unit conversion to meters is applied per the file header. NaN gaps of
    up to 10 samples are linearly interpolated; longer gaps (or gaps at
    the boundary) raise IngestError.
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"trajectory file not found: {path}")
    with path.open() as fh:
        header = fh.readline()
    if not header:
        raise IngestError(f"{path}: empty file")
    m = _TRAJ_HEADER.match(header.strip())
    if not m:
        raise IngestError(
            f"{path}: malformed header, expected '# rate_hz=<f>, units=<m|mm>'"
        )
    rate_hz = float(m.group(1))
    units = m.group(2)
    data = _read_table(path, N_COLUMNS)
    if np.isnan(data).any():
        for j in range(N_COLUMNS):
            data[:, j] = _interp_nan_gaps(data[:, j], MAX_NAN_GAP, f"{path} column {j}")
    if units == "mm":
        data /= 1000.0
    return JointTrajectory(samples=data, rate_hz=rate_hz)


def load_grf(path) -> ForcePlateRecord:
    """Load a single-column vertical GRF file (newtons)."""
    path = Path(path)
    if not path.exists():
        raise IngestError(f"GRF file not found: {path}")
    with path.open() as fh:
        header = fh.readline()
    if not header:
        raise IngestError(f"{path}: empty file")
    m = _GRF_HEADER.match(header.strip())
    if not m:
        raise IngestError(
            f"{path}: malformed header, expected '# rate_hz=<f>, side=<robotic|contralateral>'"
        )
    rate_hz = float(m.group(1))
    side = m.group(2)
    data = _read_table(path, 1).ravel()
    if np.isnan(data).any():
        raise IngestError(f"{path}: NaN in GRF record")
    return ForcePlateRecord(vertical_grf=data, rate_hz=rate_hz, side=side)


def remove_grf_offset(grf: ForcePlateRecord, quiet_fraction: float = 0.01) -> ForcePlateRecord:
    """Subtract the baseline (lowest percentile) and clip negatives to zero."""
    baseline = np.percentile(grf.vertical_grf, 100 * quiet_fraction)
    cleaned = np.clip(grf.vertical_grf - baseline, 0.0, None)
    return ForcePlateRecord(cleaned, grf.rate_hz, grf.side)


def lowpass_filter(traj: JointTrajectory, cutoff_hz: float = 6.0) -> JointTrajectory:
    """Zero-phase Butterworth low-pass, 2nd order applied forward-backward.

    The forward-backward pass gives an effective 4th-order magnitude
    response with no phase shift. Length is preserved.
    """
    nyquist = traj.rate_hz / 2.0
    if cutoff_hz <= 0 or cutoff_hz >= nyquist:
        raise FilterError(f"cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) Hz")
    if traj.n_samples < 12:  # 3 x effective order
        raise FilterError(f"trajectory too short to filter ({traj.n_samples} samples)")
    sos = butter(2, cutoff_hz, btype="low", fs=traj.rate_hz, output="sos")
    filtered = sosfiltfilt(sos, traj.samples, axis=0)
    return JointTrajectory(samples=filtered, rate_hz=traj.rate_hz)


def _sustained_edges(above: np.ndarray, n_sustain: int):
    """State-machine scan: confirmed rising/falling edges of a boolean signal.

    An edge counts only when the new state holds for n_sustain samples,
    which also guarantees strict rise/fall alternation.
    """
    rising, falling = [], []
    state = bool(above[0])
    changes = np.flatnonzero(np.diff(above.astype(np.int8))) + 1
    for i in changes:
        new = bool(above[i])
        if new == state:
            continue
        window = above[i : i + n_sustain]
        if window.size < n_sustain or not (window == new).all():
            continue
        (rising if new else falling).append(i)
        state = new
    return np.array(rising, dtype=int), np.array(falling, dtype=int)


def detect_gait_events(
    grf: ForcePlateRecord,
    threshold_n: float = 20.0,
    kinematics_rate_hz: float = 100.0,
    min_contact_ms: float = 20.0,
    chatter_ms: float = 100.0,
) -> GaitEvents:
    """Heel strikes / toe-offs from threshold crossings of vertical GRF.

    Heel strike: upward crossing of threshold_n sustained >= min_contact_ms.
    Toe-off: downward crossing sustained the same way. Indices are returned
    at the kinematics rate (rounded). Events closer than chatter_ms produce
    warnings but are kept.
    """
    if threshold_n <= 0:
        raise EventDetectionError("threshold must be positive")
    force = grf.vertical_grf
    if force.size < 2:
        raise EventDetectionError("GRF record too short")
    above = force >= threshold_n
    if above.all() or not above.any():
        raise EventDetectionError("no threshold crossings in GRF record")
    n_sustain = max(1, int(round(min_contact_ms / 1000.0 * grf.rate_hz)))
    rising, falling = _sustained_edges(above, n_sustain)
    if rising.size == 0 and falling.size == 0:
        raise EventDetectionError("no sustained threshold crossings in GRF record")

    warnings = []
    merged = np.sort(np.concatenate([rising, falling]))
    min_gap = chatter_ms / 1000.0 * grf.rate_hz
    for a, b in zip(merged, merged[1:]):
        if b - a < min_gap:
            warnings.append(
                f"{grf.side}: events {a} and {b} are {(b - a) / grf.rate_hz * 1000:.1f} ms apart"
            )

    scale = kinematics_rate_hz / grf.rate_hz
    hs = np.unique(np.round(rising * scale).astype(int))
    to = np.unique(np.round(falling * scale).astype(int))
    return GaitEvents(
        heel_strikes={grf.side: hs},
        toe_offs={grf.side: to},
        warnings=warnings,
    ).validate()


def segment_cycles(
    traj: JointTrajectory,
    events: GaitEvents,
    n: int = 8,
    side: str = "robotic",
) -> GaitCycleSet:
    """Cut the last n consecutive heel-strike-to-heel-strike cycles.

    Cycles come from the end of the trial. Bounds are half-open sample
    ranges relative to the returned (restricted) trajectory.
    """
    if side not in events.heel_strikes:
        raise SegmentationError(f"no heel strikes recorded for side {side!r}")
    hs = np.asarray(events.heel_strikes[side])
    hs = hs[(hs >= 0) & (hs <= traj.n_samples)]
    if hs.size < n + 1:
        raise SegmentationError(
            f"insufficient cycles: need {n + 1} heel strikes on {side}, have {hs.size}"
        )
    anchors = hs[-(n + 1):]
    start, end = int(anchors[0]), int(anchors[-1])
    restricted = JointTrajectory(
        samples=traj.samples[start:end], rate_hz=traj.rate_hz
    )
    bounds = tuple(
        (int(a - start), int(b - start)) for a, b in zip(anchors, anchors[1:])
    )
    return GaitCycleSet(
        trajectory=restricted,
        cycle_bounds=bounds,
        n_cycles=n,
        side=side,
        source_start=start,
    )
