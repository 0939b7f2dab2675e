"""Session-level gait parameters and their relation to selected gaits.

Eight parameters per session: trunk medio-lateral range of motion,
maximum forward trunk lean, step time and step length for the robotic
and contralateral legs, and a symmetry index for step time and step
length. The symmetry index uses the Robinson form

    SI = 100 * (X_robot - X_ctl) / (0.5 * (X_robot + X_ctl))

which is bounded to [-200, 200] and zero for perfect symmetry.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GaitParamError
from .ingest import AXIS_AP, AXIS_ML, AXIS_VERT, GaitEvents, JointTrajectory

PARAM_NAMES = (
    "trunk_ml",
    "trunk_lean",
    "robot_st",
    "ctl_st",
    "robot_sl",
    "ctl_sl",
    "st_si",
    "sl_si",
)

SALIENCE_R2 = 0.5

# Fig-text vs body-text naming differs upstream; we compute step time.
STEP_TIME_NOTE = "step time (contralateral heel strike to ipsilateral heel strike)"
SI_FORMULA_NOTE = "SI = 100*(robot - ctl)/(0.5*(robot + ctl))"


@dataclass(frozen=True)
class GaitParameterSet:
    """One session's gait parameters; lengths in meters, times in seconds."""

    trunk_ml: float
    trunk_lean: float  # degrees forward of vertical
    robot_st: float
    ctl_st: float
    robot_sl: float
    ctl_sl: float
    st_si: float
    sl_si: float

    def __post_init__(self):
        if self.robot_st <= 0 or self.ctl_st <= 0:
            raise GaitParamError("step times must be positive")
        if not (0.0 <= self.trunk_lean < 90.0):
            raise GaitParamError("trunk lean must lie in [0, 90) degrees")
        for name in ("st_si", "sl_si"):
            if abs(getattr(self, name)) > 200.0 + 1e-9:
                raise GaitParamError(f"{name} outside the formula bound of 200%")

    def as_dict(self) -> dict:
        return {name: float(getattr(self, name)) for name in PARAM_NAMES}


def symmetry_index(x_robot: float, x_ctl: float) -> float:
    denom = 0.5 * (x_robot + x_ctl)
    if denom == 0.0:
        raise GaitParamError("symmetry index undefined: both values are zero")
    return 100.0 * (x_robot - x_ctl) / denom


def _mean_step_interval(own_hs: np.ndarray, other_hs: np.ndarray, rate_hz: float) -> float:
    """Mean time from the preceding other-side heel strike to each own-side one."""
    intervals = []
    for h in own_hs:
        j = np.searchsorted(other_hs, h) - 1
        if j >= 0:
            intervals.append((h - other_hs[j]) / rate_hz)
    if not intervals:
        raise GaitParamError("no step intervals: sides do not alternate")
    return float(np.mean(intervals))


def _mean_step_length(
    traj: JointTrajectory,
    own_hs: np.ndarray,
    own_ankle: str,
    other_ankle: str,
    belt_speed_mps: float | None,
    step_time: float,
) -> float:
    """Mean anterior-posterior ankle separation at this side's heel strikes."""
    own = traj.joint(own_ankle)[own_hs, AXIS_AP]
    other = traj.joint(other_ankle)[own_hs, AXIS_AP]
    sl = float(np.mean(np.abs(own - other)))
    if belt_speed_mps is not None:
        # treadmill frame: add belt travel over the step so lengths are
        # comparable to overground walking
        sl += belt_speed_mps * step_time
    return sl


def compute_gait_params(
    traj: JointTrajectory,
    events: GaitEvents,
    robotic_side: str = "r",
    belt_speed_mps: float | None = None,
) -> GaitParameterSet:
    """Gait parameters for one session's filtered trajectory and events.

    robotic_side names the anatomical side ("l" or "r") carrying the
    robotic leg so event sides can be matched to ankle joints. Passing
    belt_speed_mps adds belt travel to the step lengths.
    """
    if robotic_side not in ("l", "r"):
        raise GaitParamError("robotic_side must be 'l' or 'r'")
    for side in ("robotic", "contralateral"):
        hs = events.heel_strikes.get(side)
        if hs is None or len(hs) < 2:
            raise GaitParamError(f"need at least 2 {side} heel strikes")

    robot_hs = np.asarray(events.heel_strikes["robotic"], dtype=int)
    ctl_hs = np.asarray(events.heel_strikes["contralateral"], dtype=int)
    n = traj.samples.shape[0]
    if robot_hs.max() >= n or ctl_hs.max() >= n:
        raise GaitParamError("event index beyond trajectory length")

    ctl_side = "l" if robotic_side == "r" else "r"
    robot_ankle, ctl_ankle = f"{robotic_side}_ankle", f"{ctl_side}_ankle"

    robot_st = _mean_step_interval(robot_hs, ctl_hs, traj.rate_hz)
    ctl_st = _mean_step_interval(ctl_hs, robot_hs, traj.rate_hz)
    robot_sl = _mean_step_length(traj, robot_hs, robot_ankle, ctl_ankle, belt_speed_mps, robot_st)
    ctl_sl = _mean_step_length(traj, ctl_hs, ctl_ankle, robot_ankle, belt_speed_mps, ctl_st)

    sternum = traj.joint("sternum")
    pelvis = traj.joint("pelvis")
    trunk_ml = float(sternum[:, AXIS_ML].max() - sternum[:, AXIS_ML].min())

    # sagittal-plane trunk vector: forward lean is a positive AP component
    d_ap = sternum[:, AXIS_AP] - pelvis[:, AXIS_AP]
    d_vert = sternum[:, AXIS_VERT] - pelvis[:, AXIS_VERT]
    if np.any(d_vert <= 0):
        raise GaitParamError("trunk vector not upward: sternum below pelvis")
    lean = np.degrees(np.arctan2(d_ap, d_vert))
    trunk_lean = max(0.0, float(lean.max()))
    if trunk_lean >= 90.0:
        raise GaitParamError("trunk lean at or beyond horizontal")

    return GaitParameterSet(
        trunk_ml=trunk_ml,
        trunk_lean=trunk_lean,
        robot_st=robot_st,
        ctl_st=ctl_st,
        robot_sl=robot_sl,
        ctl_sl=ctl_sl,
        st_si=symmetry_index(robot_st, ctl_st),
        sl_si=symmetry_index(robot_sl, ctl_sl),
    )


@dataclass(frozen=True)
class ParameterCorrelation:
    """Pearson correlation of one gait parameter with the selected gaits."""

    pearson_r: float | None
    r_squared: float | None
    n_points: int
    salient: bool
    undefined: bool = False

    def __post_init__(self):
        if self.undefined:
            if self.pearson_r is not None or self.salient:
                raise GaitParamError("undefined correlation cannot carry r or salience")
        else:
            if self.pearson_r is None or self.r_squared is None:
                raise GaitParamError("defined correlation requires r and r_squared")
            if abs(self.r_squared - self.pearson_r**2) > 1e-12:
                raise GaitParamError("r_squared must equal pearson_r squared")
            if self.salient != (self.r_squared > SALIENCE_R2):
                raise GaitParamError("salient flag inconsistent with r_squared")


@dataclass(frozen=True)
class CorrelationReport:
    """Per-parameter correlations for one viewing angle."""

    view: str
    correlations: dict  # param name -> ParameterCorrelation
    metadata: dict = field(default_factory=dict)

    def salient_parameters(self) -> tuple:
        return tuple(
            name for name in PARAM_NAMES if self.correlations[name].salient
        )


def _pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    xd = x - x.mean()
    yd = y - y.mean()
    sx = np.sqrt(np.sum(xd * xd))
    sy = np.sqrt(np.sum(yd * yd))
    if sx == 0.0 or sy == 0.0:
        return None
    return float(np.sum(xd * yd) / (sx * sy))


def correlate_with_scomo(
    params_by_session,
    scomo_by_session,
    view: str,
) -> CorrelationReport:
    """Pearson correlation of each gait parameter with per-session gait values.

    Sessions must be aligned across the two sequences. A constant series
    on either side makes r undefined; such parameters are flagged rather
    than given a number.
    """
    params = list(params_by_session)
    scomo = np.asarray(list(scomo_by_session), dtype=float)
    if len(params) != scomo.shape[0]:
        raise GaitParamError(
            f"length mismatch: {len(params)} parameter sets vs {scomo.shape[0]} gait values"
        )
    if len(params) < 3:
        raise GaitParamError("need at least 3 sessions to correlate")

    correlations = {}
    for name in PARAM_NAMES:
        series = np.array([getattr(p, name) for p in params], dtype=float)
        r = _pearson(series, scomo)
        if r is None:
            correlations[name] = ParameterCorrelation(
                pearson_r=None,
                r_squared=None,
                n_points=len(params),
                salient=False,
                undefined=True,
            )
        else:
            r2 = r * r
            correlations[name] = ParameterCorrelation(
                pearson_r=r,
                r_squared=r2,
                n_points=len(params),
                salient=r2 > SALIENCE_R2,
            )
    return CorrelationReport(
        view=view,
        correlations=correlations,
        metadata={"si_formula": SI_FORMULA_NOTE, "step_time": STEP_TIME_NOTE},
    )


def write_params_csv(rows, path):
    """Parameter table, one line per session: session_id plus 8 columns."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("session_id",) + PARAM_NAMES)
        for session_id, pset in rows:
            writer.writerow(
                [session_id] + [f"{getattr(pset, name):.9g}" for name in PARAM_NAMES]
            )


def write_correlation_csv(report: CorrelationReport, path):
    """Correlation table for one view; undefined correlations left blank."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# view={report.view}\n")
        writer = csv.writer(fh)
        writer.writerow(("parameter", "pearson_r", "r_squared", "n_points", "salient"))
        for name in PARAM_NAMES:
            c = report.correlations[name]
            writer.writerow(
                (
                    name,
                    "" if c.pearson_r is None else f"{c.pearson_r:.9g}",
                    "" if c.r_squared is None else f"{c.r_squared:.9g}",
                    c.n_points,
                    str(c.salient).lower(),
                )
            )
