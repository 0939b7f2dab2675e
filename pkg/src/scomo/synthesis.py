"""Gait blending and point-light display geometry.

The blend mixes the participant's reconstructed motion with the
normative motion on the participant's own body structure:

    S = C + (1/5) * (5 - a1) * P + (a/5) * N,   a = max(a1, 0)

so a1 = 0 replays the participant's own gait, a1 = 5 the normative
gait, and a1 = -5 doubles the participant's motion variation. The
blended 3-D joints are then yaw-rotated to one of three viewing angles
and orthographically projected to normalized screen coordinates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BlendRangeError, ProjectionError, SynthesisError
from .ingest import AXIS_ML, AXIS_VERT, N_JOINTS
from .model import (
    NormativeModel,
    ParticipantModel,
    reconstruct_normative,
    reconstruct_participant,
)

ALPHA_MIN, ALPHA_MAX = -5.0, 5.0

SCREEN_MARGIN = 0.05  # fraction of the unit square kept clear on each side

DISPLAY_FPS = 50.0  # display rate; source data are resampled to this

VIEW_YAWS = {"frontal": 0.0, "robotic_45": 45.0, "contralateral_45": -45.0}


@dataclass(frozen=True)
class CoefficientOfMotion:
    """Blend weight a1 in [-5, 5]; the clamped weight a drops below zero."""

    alpha1: float

    def __post_init__(self):
        if not (ALPHA_MIN <= self.alpha1 <= ALPHA_MAX):
            raise BlendRangeError(
                f"alpha1 must lie in [{ALPHA_MIN}, {ALPHA_MAX}], got {self.alpha1}"
            )

    @property
    def alpha(self) -> float:
        return max(self.alpha1, 0.0)


@dataclass(frozen=True)
class ViewingAngle:
    """One of the three display rotations about the vertical axis."""

    kind: str
    yaw_deg: float

    def __post_init__(self):
        if self.kind not in VIEW_YAWS:
            raise SynthesisError(f"unknown view kind {self.kind!r}")
        if self.yaw_deg != VIEW_YAWS[self.kind]:
            raise SynthesisError(
                f"yaw {self.yaw_deg} does not match view {self.kind!r}"
            )

    @classmethod
    def of(cls, kind: str) -> "ViewingAngle":
        return cls(kind=kind, yaw_deg=VIEW_YAWS[kind])


VIEWS = tuple(ViewingAngle.of(k) for k in ("frontal", "robotic_45", "contralateral_45"))


@dataclass(frozen=True)
class SynthesizedGait:
    """Blended joint trajectory, shape (t, 45), meters."""

    samples: np.ndarray
    alpha1: CoefficientOfMotion
    rate_hz: float
    provenance: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class PointLightFrame:
    """15 screen-plane dots for one sample; u right, v up, unit square."""

    points: np.ndarray  # (15, 2)
    frame_index: int

    def __post_init__(self):
        if self.points.shape != (N_JOINTS, 2):
            raise ProjectionError(f"frame must have {N_JOINTS} points")


def blend(
    pm: ParticipantModel,
    nm: NormativeModel,
    alpha1,
) -> SynthesizedGait:
    """Mix participant and normative motion at coefficient alpha1.

    The normative component is evaluated at the participant's sample
    count so both terms align; the mean posture C comes from the
    participant and is broadcast over time.
    """
    coeff = alpha1 if isinstance(alpha1, CoefficientOfMotion) else CoefficientOfMotion(float(alpha1))
    p = reconstruct_participant(pm)
    n = reconstruct_normative(nm, pm.t_length)
    s = (
        pm.mean_posture[None, :]
        + (5.0 - coeff.alpha1) / 5.0 * p
        + coeff.alpha / 5.0 * n
    )
    return SynthesizedGait(
        samples=s,
        alpha1=coeff,
        rate_hz=pm.rate_hz,
        provenance={
            "participant_t_length": pm.t_length,
            "participant_components": pm.n_components,
            "normative": dict(nm.metadata),
        },
    )


def _rotate_yaw(samples: np.ndarray, yaw_deg: float) -> np.ndarray:
    """Rotate (t, 45) joints about the vertical axis; returns (t, 15, 3)."""
    joints = samples.reshape(samples.shape[0], N_JOINTS, 3)
    psi = np.deg2rad(yaw_deg)
    c, si = np.cos(psi), np.sin(psi)
    x, y, z = joints[..., 0], joints[..., 1], joints[..., 2]
    return np.stack([c * x - si * y, si * x + c * y, z], axis=-1)


@dataclass(frozen=True)
class ScreenMapping:
    """Affine map from rotated scene coordinates to the unit square.

    Computed once per gait and view so the walker never rescales
    between frames (or, when shared across blends, between slider
    positions).
    """

    center_u: float
    center_v: float
    scale: float

    def apply(self, u_raw: np.ndarray, v_raw: np.ndarray):
        return (
            0.5 + (u_raw - self.center_u) * self.scale,
            0.5 + (v_raw - self.center_v) * self.scale,
        )


def screen_mapping(gait: SynthesizedGait, view: ViewingAngle) -> ScreenMapping:
    """Fit the unit-square mapping to the gait's rotated bounding box."""
    rotated = _rotate_yaw(gait.samples, view.yaw_deg)
    u_raw, v_raw = rotated[..., AXIS_ML], rotated[..., AXIS_VERT]
    u_lo, u_hi = float(u_raw.min()), float(u_raw.max())
    v_lo, v_hi = float(v_raw.min()), float(v_raw.max())
    extent = max(u_hi - u_lo, v_hi - v_lo)
    if extent <= 1e-12:
        raise ProjectionError("degenerate bounding box: all points coincident")
    scale = (1.0 - 2.0 * SCREEN_MARGIN) / extent
    return ScreenMapping(
        center_u=(u_lo + u_hi) / 2.0,
        center_v=(v_lo + v_hi) / 2.0,
        scale=scale,
    )


def reference_mapping(pm: ParticipantModel, nm: NormativeModel, view: ViewingAngle) -> ScreenMapping:
    """Screen mapping fitted to the participant's own gait (alpha1 = 0).

    Sharing this mapping across all blend coefficients keeps the walker
    the same size at every slider position, so size never becomes a cue.
    """
    return screen_mapping(blend(pm, nm, 0.0), view)


def project(
    gait: SynthesizedGait,
    view: ViewingAngle,
    mapping: ScreenMapping | None = None,
) -> list:
    """Orthographic point-light projection of a gait at one viewing angle.

    Rotates about the vertical axis, drops the depth (anterior-posterior
    after rotation) axis, and maps into the unit square with a 5%
    margin. Pass a mapping fitted to a reference blend to keep the
    walker size constant across slider positions.
    """
    if mapping is None:
        mapping = screen_mapping(gait, view)
    rotated = _rotate_yaw(gait.samples, view.yaw_deg)
    u, v = mapping.apply(rotated[..., AXIS_ML], rotated[..., AXIS_VERT])
    points = np.stack([u, v], axis=-1)
    return [
        PointLightFrame(points=points[i], frame_index=i)
        for i in range(points.shape[0])
    ]


def loop_indices(n_frames: int, fps: float, source_rate_hz: float, count: int) -> np.ndarray:
    """Source frame indices for a seamless loop resampled to fps."""
    if n_frames < 1:
        raise SynthesisError("empty frame sequence")
    if fps <= 0 or source_rate_hz <= 0:
        raise SynthesisError("fps and source rate must be positive")
    k = np.arange(count)
    return np.round(k * source_rate_hz / fps).astype(int) % n_frames


def animate(frames: list, fps: float, source_rate_hz: float):
    """Endless timed frame stream at fps, nearest-sample resampled.

    Yields (time_seconds, PointLightFrame) tuples and wraps around after
    the last frame so the walker loops seamlessly.
    """
    if not frames:
        raise SynthesisError("empty frame sequence")
    if fps <= 0 or source_rate_hz <= 0:
        raise SynthesisError("fps and source rate must be positive")
    n = len(frames)
    k = 0
    while True:
        idx = int(round(k * source_rate_hz / fps)) % n
        yield (k / fps, frames[idx])
        k += 1


def export_frames_jsonl(frames: list, path):
    """One PointLightFrame per line: {"frame_index": i, "points": [[u, v], ...]}."""
    path = Path(path)
    with path.open("w") as fh:
        for f in frames:
            fh.write(
                json.dumps(
                    {"frame_index": f.frame_index, "points": np.round(f.points, 9).tolist()}
                )
            )
            fh.write("\n")


def export_frames_csv(frames: list, path):
    """Flat (frame, joint, u, v) table for spreadsheet inspection."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write("frame,joint,u,v\n")
        for f in frames:
            for j in range(N_JOINTS):
                fh.write(f"{f.frame_index},{j},{f.points[j, 0]:.9f},{f.points[j, 1]:.9f}\n")
