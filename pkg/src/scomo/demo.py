"""Deterministic synthetic gait cohort for desk-scale end-to-end runs.

Walkers are built from per-cycle lookup tables: each left-side or
midline joint axis is a short table of harmonic content over one gait
cycle of P samples (P even), tiled over the record. Right-side joints
reuse the left tables rolled by half a cycle, so a walker with zero
asymmetry parameters is symmetric down to float identity: robotic-side
and contralateral-side step metrics agree exactly, not just
approximately. Force plates are bump trains placed at exact sample
offsets with contact-free margins at both ends, keeping detected events
far from filter edge transients.

The cohort covers 9 pseudo-participants x 12 sessions plus a separate
pool of normative walkers. Participant P01 is the exactly symmetric
reference; the others carry parameterized step-timing and step-length
asymmetry, trunk lean, pattern perturbations, and noise, all of which
shrink across sessions to imitate practice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ScomoError
from .ingest import (
    AXIS_AP,
    AXIS_ML,
    AXIS_VERT,
    CANONICAL_JOINTS,
    ForcePlateRecord,
    JointTrajectory,
)
from .session import VIEW_ORDER

N_PARTICIPANTS = 9
SESSIONS_PER_PARTICIPANT = 12
N_NORMATIVE_SUBJECTS = 25

# standing joint centers, meters: (medio-lateral, anterior-posterior, vertical)
BASE_POSTURE = {
    "l_ankle": (-0.11, 0.01, 0.12),
    "r_ankle": (0.11, 0.01, 0.12),
    "l_knee": (-0.11, 0.02, 0.52),
    "r_knee": (0.11, 0.02, 0.52),
    "l_hip": (-0.11, 0.00, 0.95),
    "r_hip": (0.11, 0.00, 0.95),
    "l_wrist": (-0.24, 0.02, 0.86),
    "r_wrist": (0.24, 0.02, 0.86),
    "l_elbow": (-0.22, 0.01, 1.12),
    "r_elbow": (0.22, 0.01, 1.12),
    "l_shoulder": (-0.19, 0.01, 1.42),
    "r_shoulder": (0.19, 0.01, 1.42),
    "pelvis": (0.0, 0.0, 1.00),
    "sternum": (0.0, 0.02, 1.35),
    "head": (0.0, 0.03, 1.65),
}

# (harmonic, amplitude m, phase rad) per left/midline joint axis; harmonic 1
# is stride frequency, harmonic 2 the double-support bounce
LEFT_WAVES = {
    ("l_ankle", AXIS_AP): ((1, 0.260, 0.00), (2, 0.050, 0.90)),
    ("l_ankle", AXIS_VERT): ((1, 0.035, 1.57), (2, 0.030, 0.40)),
    ("l_ankle", AXIS_ML): ((1, 0.012, -0.60),),
    ("l_knee", AXIS_AP): ((1, 0.170, 0.25), (2, 0.045, 1.10)),
    ("l_knee", AXIS_VERT): ((1, 0.030, 1.30), (2, 0.018, 0.20)),
    ("l_knee", AXIS_ML): ((1, 0.010, -0.40),),
    ("l_hip", AXIS_AP): ((1, 0.075, 0.50), (2, 0.020, 1.30)),
    ("l_hip", AXIS_VERT): ((2, 0.016, 0.60),),
    ("l_hip", AXIS_ML): ((1, 0.016, -1.57),),
    ("l_wrist", AXIS_AP): ((1, 0.150, 3.30), (2, 0.030, 2.20)),
    ("l_wrist", AXIS_VERT): ((1, 0.030, 3.60), (2, 0.012, 1.90)),
    ("l_wrist", AXIS_ML): ((1, 0.012, 2.60),),
    ("l_elbow", AXIS_AP): ((1, 0.095, 3.35), (2, 0.020, 2.40)),
    ("l_elbow", AXIS_VERT): ((1, 0.018, 3.70),),
    ("l_elbow", AXIS_ML): ((1, 0.009, 2.70),),
    ("l_shoulder", AXIS_AP): ((1, 0.050, 3.40), (2, 0.012, 2.60)),
    ("l_shoulder", AXIS_VERT): ((2, 0.012, 0.80),),
    ("l_shoulder", AXIS_ML): ((1, 0.010, -1.30),),
    ("pelvis", AXIS_ML): ((1, 0.024, -1.57),),
    ("pelvis", AXIS_VERT): ((2, 0.020, 0.70),),
    ("pelvis", AXIS_AP): ((2, 0.008, 1.60),),
    ("sternum", AXIS_ML): ((1, 0.030, -1.35),),
    ("sternum", AXIS_VERT): ((2, 0.018, 0.75),),
    ("sternum", AXIS_AP): ((2, 0.010, 1.70),),
    ("head", AXIS_ML): ((1, 0.020, -1.20),),
    ("head", AXIS_VERT): ((2, 0.019, 0.80),),
    ("head", AXIS_AP): ((2, 0.011, 1.80),),
}

_LEAN_WAVE_PHASE = 0.30  # trunk sway rides the stride frequency


@dataclass(frozen=True)
class WalkerConfig:
    """Parameterized synthetic walker; defaults give a plain symmetric gait."""

    cycle_samples: int = 112  # kinematic samples per gait cycle, must be even
    contact_cycles: int = 10  # cycles with foot contacts
    margin_cycles: int = 2  # contact-free lead-in/out on each side
    rate_hz: float = 100.0
    grf_rate_hz: float = 1000.0
    amplitude_scale: float = 1.0  # overall limb-motion scale (speed proxy)
    h1_scale: float = 1.0  # stride-frequency content scale
    h2_scale: float = 1.0  # double-bounce content scale
    right_ap_gain: float = 1.0  # > 1 lengthens robotic-side steps
    right_delay: int = 0  # kin samples; robotic-side timing offset
    trunk_lean_m: float = 0.02  # forward trunk offset and sway amplitude
    noise_m: float = 0.0  # white kinematic noise sd, meters
    pattern_jitter: float = 0.0  # per-channel amp/phase perturbation scale
    jitter_key: int = 0  # selects the perturbation pattern (per walker)
    noise_seed: tuple = (0,)
    baseline_n: float = 3.0  # force-plate DC offset, removed at ingest
    peak_n: float = 750.0
    stance_fraction: float = 0.62

    def __post_init__(self):
        if self.cycle_samples < 40 or self.cycle_samples % 2 != 0:
            raise ScomoError("cycle_samples must be even and >= 40")
        if self.contact_cycles < 2 or self.margin_cycles < 1:
            raise ScomoError("need >= 2 contact cycles and >= 1 margin cycle")
        if abs(self.right_delay) > self.cycle_samples // 8:
            raise ScomoError("right_delay too large for clean event alternation")
        ratio = self.grf_rate_hz / self.rate_hz
        if abs(ratio - round(ratio)) > 1e-9:
            raise ScomoError("grf rate must be an integer multiple of the kin rate")

    @property
    def n_samples(self) -> int:
        return (self.contact_cycles + 2 * self.margin_cycles) * self.cycle_samples


def _channel_tables(config: WalkerConfig) -> dict:
    """One zero-mean table (P,) per left/midline joint axis."""
    rng = np.random.default_rng(np.random.SeedSequence(config.jitter_key))
    p = config.cycle_samples
    phase = 2.0 * np.pi * np.arange(p) / p
    tables = {}
    for key in sorted(LEFT_WAVES):
        t = np.zeros(p)
        for harmonic, amp, ph in LEFT_WAVES[key]:
            z_amp, z_ph = rng.standard_normal(2)
            a = amp * (1.0 + 0.18 * config.pattern_jitter * z_amp)
            shifted = ph + 0.30 * config.pattern_jitter * z_ph
            h_scale = config.h1_scale if harmonic == 1 else config.h2_scale
            t += config.amplitude_scale * h_scale * a * np.sin(harmonic * phase + shifted)
        tables[key] = t
    # forward trunk sway rides harmonic 1 so its scale tracks h1_scale
    sway = config.trunk_lean_m * 0.5 * config.h1_scale * np.sin(phase + _LEAN_WAVE_PHASE)
    tables[("sternum", AXIS_AP)] = tables[("sternum", AXIS_AP)] + sway
    tables[("head", AXIS_AP)] = tables[("head", AXIS_AP)] + 1.2 * sway
    return tables


def synth_walker(config: WalkerConfig):
    """Build one walker: (trajectory, robotic GRF, contralateral GRF).

    The robotic side is the right leg. With right_ap_gain = 1,
    right_delay = 0, pattern_jitter = 0 and noise_m = 0 the right-leg
    columns are sample-exact half-cycle copies of the left ones.
    """
    p = config.cycle_samples
    half = p // 2
    n = config.n_samples
    idx = np.arange(n) % p
    tables = _channel_tables(config)

    data = np.empty((n, 3 * len(CANONICAL_JOINTS)))
    for j, joint in enumerate(CANONICAL_JOINTS):
        base = BASE_POSTURE[joint]
        for axis in (AXIS_ML, AXIS_AP, AXIS_VERT):
            col = 3 * j + axis
            if joint.startswith("r_"):
                left_dev = tables.get(("l_" + joint[2:], axis))
                if left_dev is None:
                    data[:, col] = base[axis]
                    continue
                rolled = np.roll(left_dev, -(half + config.right_delay))
                if axis == AXIS_AP:
                    dev = config.right_ap_gain * rolled
                elif axis == AXIS_VERT:
                    dev = rolled
                else:
                    dev = -rolled  # lateral motion mirrors across the midline
                data[:, col] = base[axis] + dev[idx]
            else:
                dev = tables.get((joint, axis))
                offset = base[axis]
                if joint in ("sternum", "head") and axis == AXIS_AP:
                    offset = offset + config.trunk_lean_m * (
                        0.6 if joint == "sternum" else 1.0
                    )
                if dev is None:
                    data[:, col] = offset
                else:
                    data[:, col] = offset + dev[idx]

    if config.noise_m > 0:
        noise_rng = np.random.default_rng(
            np.random.SeedSequence(list(config.noise_seed))
        )
        data = data + noise_rng.normal(0.0, config.noise_m, data.shape)

    traj = JointTrajectory(samples=data, rate_hz=config.rate_hz)

    ratio = int(round(config.grf_rate_hz / config.rate_hz))
    n_grf = n * ratio
    stance = int(round(config.stance_fraction * p * ratio))
    bump = config.peak_n * np.sin(
        np.pi * (np.arange(stance) + 0.5) / stance
    )
    grf_l = np.full(n_grf, config.baseline_n)
    grf_r = np.full(n_grf, config.baseline_n)
    margin_g = config.margin_cycles * p * ratio
    for c in range(config.contact_cycles):
        s_left = margin_g + c * p * ratio
        grf_l[s_left : s_left + stance] += bump
        s_right = s_left + (half + config.right_delay) * ratio
        grf_r[s_right : s_right + stance] += bump

    return (
        traj,
        ForcePlateRecord(vertical_grf=grf_r, rate_hz=config.grf_rate_hz, side="robotic"),
        ForcePlateRecord(
            vertical_grf=grf_l, rate_hz=config.grf_rate_hz, side="contralateral"
        ),
    )


def write_trajectory_csv(traj: JointTrajectory, path):
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"# rate_hz={traj.rate_hz}, units=m\n")
        np.savetxt(fh, traj.samples, fmt="%.6f", delimiter=",")


def write_grf_csv(grf: ForcePlateRecord, path):
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"# rate_hz={grf.rate_hz}, side={grf.side}\n")
        np.savetxt(fh, grf.vertical_grf[:, None], fmt="%.3f", delimiter=",")


# ---------------------------------------------------------------------------
# cohort planning

SPEED_STEP = 0.05
DAY1_CAP_STEPS = 10

_VIEW_OFFSET = {"frontal": 0.0, "robotic_45": 0.15, "contralateral_45": -0.10}

_CUE_POOL = (
    "step length",
    "arm swing",
    "trunk sway",
    "step timing",
    "hip motion",
)


def participant_label(index: int) -> str:
    return f"P{index + 1:02d}"


def _cycle_samples_for(speed_steps: int) -> int:
    return int(np.clip(136 - 4 * speed_steps, 96, 132))


def plan_participant(p_index: int, seed: int) -> dict:
    """Scripted protocol behavior for one participant.

    Participant 0 is the symmetric reference: always handrail-free,
    always requesting faster, zero asymmetry and zero noise. The plan
    duplicates only the speed arithmetic; the authoritative rules run in
    the session store when the plan is executed.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 101, p_index]))
    deviance = 0.0 if p_index == 0 else 0.35 + 0.08 * p_index
    cap_steps = 10 + (p_index % 3)
    alpha_base = -1.8 + 0.25 * (p_index % 5)
    steps = 6  # 0.30 m/s
    sessions = []
    for day in range(1, 5):
        for index in range(1, 4):
            session_number = (day - 1) * 3 + index
            trend = (session_number - 1) / 11.0
            trials = []
            requests = []
            for t in range(1, 7):
                if p_index == 0:
                    free = True
                else:
                    free = bool(
                        rng.random() < min(0.95, 0.30 + 0.5 * trend + 0.06 * day)
                    )
                trials.append({"handrail_free": free, "speed_steps": steps})
                if day == 1:
                    if (6 * (index - 1) + t) % 3 == 0 and steps < DAY1_CAP_STEPS:
                        steps += 1
                elif t % 3 == 0:
                    direction = 1 if steps < cap_steps else 0
                    requests.append({"after_trial": t, "direction": direction})
                    if direction == 1 and sum(
                        tr["handrail_free"] for tr in trials[-3:]
                    ) >= 2:
                        steps += 1
            selections = []
            for view in VIEW_ORDER:
                for repeat in range(1, 7):
                    target = (
                        alpha_base
                        + 2.4 * trend
                        + _VIEW_OFFSET[view]
                        + rng.normal(0.0, 0.22)
                    )
                    selections.append(
                        {
                            "view": view,
                            "repeat_index": repeat,
                            "target_alpha": float(np.clip(target, -4.4, 4.4)),
                        }
                    )
            final_steps = trials[-1]["speed_steps"]
            sessions.append(
                {
                    "day": day,
                    "session_index": index,
                    "session_number": session_number,
                    "trials": trials,
                    "requests": requests,
                    "selections": selections,
                    "final_speed_steps": final_steps,
                    "walker": _session_walker_config(
                        p_index, session_number, trend, deviance, final_steps, seed
                    ),
                }
            )
    confidence = [
        {
            "day": day,
            "rating": int(np.clip(3 + day + (p_index % 3), 1, 10)),
            "free_text_cues": [
                _CUE_POOL[(p_index + day) % len(_CUE_POOL)],
                _CUE_POOL[(p_index + day + 2) % len(_CUE_POOL)],
            ],
        }
        for day in range(1, 5)
    ]
    return {
        "participant_id": participant_label(p_index),
        "deviance": deviance,
        "sessions": sessions,
        "confidence": confidence,
    }


def _session_walker_config(p_index, session_number, trend, deviance, speed_steps, seed):
    """Walker parameters for the final trial of one session (as a dict)."""
    ease = 1.0 - 0.6 * trend  # practice shrinks asymmetry
    speed = speed_steps * SPEED_STEP
    return {
        "cycle_samples": _cycle_samples_for(speed_steps),
        "amplitude_scale": float(0.75 + 0.6 * min(speed, 0.6) / 0.6),
        "right_ap_gain": float(1.0 + 0.16 * deviance * ease),
        "right_delay": int(round(3.2 * deviance * ease)),
        "trunk_lean_m": float(0.015 + 0.05 * deviance * (1.0 - 0.5 * trend)),
        "noise_m": 0.0 if p_index == 0 else float(0.0012 * (1.0 + 0.8 * (1.0 - trend))),
        "pattern_jitter": float(deviance * (1.0 - 0.45 * trend)),
        "jitter_key": 1000 + p_index,
        "noise_seed": [seed, 7, p_index, session_number],
    }


def generate_normative_files(root, seed: int, n_subjects: int = N_NORMATIVE_SUBJECTS):
    """Write the normative walker pool; returns the list of stems."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 55]))
    stems = []
    for s in range(n_subjects):
        # per-frequency scalar amplitudes keep the pooled pattern space
        # exactly 4-dimensional across subjects
        h1 = float(np.clip(rng.normal(1.0, 0.07), 0.85, 1.15))
        h2 = float(np.clip(rng.normal(1.0, 0.07), 0.85, 1.15))
        config = WalkerConfig(
            cycle_samples=96 + 2 * (s % 11),
            h1_scale=h1,
            h2_scale=h2,
            noise_m=0.0008,
            noise_seed=(seed, 55, s),
            trunk_lean_m=0.02,
        )
        traj, grf_r, grf_l = synth_walker(config)
        stem = f"sub{s + 1:02d}"
        write_trajectory_csv(traj, root / f"{stem}.traj.csv")
        write_grf_csv(grf_r, root / f"{stem}.grf_robotic.csv")
        write_grf_csv(grf_l, root / f"{stem}.grf_contralateral.csv")
        stems.append(stem)
    return stems


def generate_demo_cohort(root, seed: int = 0) -> dict:
    """Write the full demo dataset and its manifest; returns the manifest.

    Layout:
        root/normative/subNN.{traj,grf_robotic,grf_contralateral}.csv
        root/participants/<id>/dDsS.{traj,grf_robotic,grf_contralateral}.csv
        root/manifest.json
    """
    root = Path(root)
    (root / "participants").mkdir(parents=True, exist_ok=True)
    normative_stems = generate_normative_files(root / "normative", seed)
    manifest = {
        "seed": seed,
        "robotic_side": "r",
        "normative_dir": "normative",
        "normative_stems": normative_stems,
        "participants": [],
    }
    for p_index in range(N_PARTICIPANTS):
        plan = plan_participant(p_index, seed)
        pid = plan["participant_id"]
        pdir = root / "participants" / pid
        pdir.mkdir(parents=True, exist_ok=True)
        for sess in plan["sessions"]:
            config = WalkerConfig(**{
                **sess["walker"],
                "noise_seed": tuple(sess["walker"]["noise_seed"]),
            })
            traj, grf_r, grf_l = synth_walker(config)
            stem = f"d{sess['day']}s{sess['session_index']}"
            write_trajectory_csv(traj, pdir / f"{stem}.traj.csv")
            write_grf_csv(grf_r, pdir / f"{stem}.grf_robotic.csv")
            write_grf_csv(grf_l, pdir / f"{stem}.grf_contralateral.csv")
            sess["files"] = {
                "traj": f"participants/{pid}/{stem}.traj.csv",
                "grf_robotic": f"participants/{pid}/{stem}.grf_robotic.csv",
                "grf_contralateral": f"participants/{pid}/{stem}.grf_contralateral.csv",
            }
        manifest["participants"].append(plan)
    (root / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1))
    return manifest
