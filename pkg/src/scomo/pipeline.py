"""Batch pipeline: ingest -> fit -> synth -> deviation -> params -> correlate -> report.

Single-recording runs process one trajectory with its two force-plate
records against a normative pool and leave one report file per stage in
the output directory. The demo runner generates a synthetic cohort,
drives the full 4-day protocol through a SessionStore for every
pseudo-participant, and exports the per-participant report archives.

All outputs are deterministic functions of the config and seed. The
first hard error stops the run and is written to error.json with the
name of the failing stage.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .demo import generate_demo_cohort
from .errors import ScomoError, StageError
from .ingest import (
    detect_gait_events,
    load_grf,
    load_trajectory,
    lowpass_filter,
    remove_grf_offset,
    segment_cycles,
)
from .model import (
    fit_normative_model,
    fit_participant_model,
    save_model,
)
from .params import compute_gait_params, write_params_csv
from .session import SessionStore
from .similarity import (
    DEVIATION_MEASURES,
    deviation_between,
    write_deviation_csv,
)
from .synthesis import (
    VIEWS,
    blend,
    export_frames_jsonl,
    project,
    reference_mapping,
)

CONFIG_VERSION = 1
PIPELINE_STAGES = (
    "ingest",
    "fit",
    "synth",
    "deviation",
    "params",
    "correlate",
    "report",
)
DEMO_STAGES = ("generate", "fit", "protocol", "report")
DEFAULT_ALPHAS = (-5.0, 0.0, 5.0)


@dataclass
class PipelineConfig:
    """Everything a batch run needs; loadable from a flat TOML file."""

    trajectory: str = ""
    grf_robotic: str = ""
    grf_contralateral: str = ""
    normative_dir: str = ""
    output_dir: str = "out"
    filter_cutoff_hz: float = 6.0
    event_threshold_n: float = 20.0
    min_contact_ms: float = 20.0
    n_cycles: int = 8
    deviation_mode: str = "sum_angles"
    robotic_side: str = "r"
    belt_speed_mps: float | None = None
    seed: int = 0
    config_version: int = CONFIG_VERSION

    def validate(self) -> "PipelineConfig":
        if self.config_version != CONFIG_VERSION:
            raise ScomoError(
                f"unsupported config_version {self.config_version}; this build reads {CONFIG_VERSION}"
            )
        if self.deviation_mode not in DEVIATION_MEASURES:
            raise ScomoError(
                f"deviation_mode must be one of {DEVIATION_MEASURES}, got {self.deviation_mode!r}"
            )
        if self.filter_cutoff_hz <= 0:
            raise ScomoError("filter_cutoff_hz must be positive")
        if self.event_threshold_n <= 0:
            raise ScomoError("event_threshold_n must be positive")
        if self.n_cycles < 2:
            raise ScomoError("n_cycles must be >= 2")
        if self.robotic_side not in ("l", "r"):
            raise ScomoError("robotic_side must be 'l' or 'r'")
        if self.belt_speed_mps is not None and self.belt_speed_mps < 0:
            raise ScomoError("belt_speed_mps must be >= 0")
        return self

    @classmethod
    def from_mapping(cls, mapping: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ScomoError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**mapping).validate()

    @classmethod
    def from_toml(cls, path) -> "PipelineConfig":
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
        return cls.from_mapping(doc)

    def as_dict(self) -> dict:
        return asdict(self)


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _load_recording(config: PipelineConfig, traj_path, grf_r_path, grf_c_path):
    """Shared ingest: load, condition, detect events, cut cycles."""
    traj = load_trajectory(traj_path)
    grf_r = remove_grf_offset(load_grf(grf_r_path))
    grf_c = remove_grf_offset(load_grf(grf_c_path))
    if grf_r.side != "robotic":
        raise ScomoError(f"{grf_r_path}: expected side=robotic, got {grf_r.side}")
    if grf_c.side != "contralateral":
        raise ScomoError(
            f"{grf_c_path}: expected side=contralateral, got {grf_c.side}"
        )
    filtered = lowpass_filter(traj, cutoff_hz=config.filter_cutoff_hz)
    events_r = detect_gait_events(
        grf_r,
        threshold_n=config.event_threshold_n,
        kinematics_rate_hz=traj.rate_hz,
        min_contact_ms=config.min_contact_ms,
    )
    events_c = detect_gait_events(
        grf_c,
        threshold_n=config.event_threshold_n,
        kinematics_rate_hz=traj.rate_hz,
        min_contact_ms=config.min_contact_ms,
    )
    events = events_r.merged_with(events_c)
    cycles = segment_cycles(filtered, events, n=config.n_cycles, side="robotic")
    return filtered, events, cycles


def fit_normative_from_dir(config: PipelineConfig, directory) -> tuple:
    """Fit the normative model from a directory of walker recordings.

    Expects <stem>.traj.csv with <stem>.grf_robotic.csv and
    <stem>.grf_contralateral.csv siblings. Returns (model, stems).
    """
    directory = Path(directory)
    stems = sorted(p.name[: -len(".traj.csv")] for p in directory.glob("*.traj.csv"))
    if not stems:
        raise ScomoError(f"no normative recordings (*.traj.csv) in {directory}")
    subjects = []
    for stem in stems:
        _, _, cycles = _load_recording(
            config,
            directory / f"{stem}.traj.csv",
            directory / f"{stem}.grf_robotic.csv",
            directory / f"{stem}.grf_contralateral.csv",
        )
        subjects.append(cycles)
    return fit_normative_model(subjects), stems


# ---------------------------------------------------------------------------
# single-recording pipeline


def stage_ingest(ctx: dict) -> None:
    config = ctx["config"]
    for label, path in (
        ("trajectory", config.trajectory),
        ("grf_robotic", config.grf_robotic),
        ("grf_contralateral", config.grf_contralateral),
    ):
        if not path:
            raise ScomoError(f"config is missing the {label} path")
        if not Path(path).exists():
            raise ScomoError(f"{label} path does not exist: {path}")
    filtered, events, cycles = _load_recording(
        config, config.trajectory, config.grf_robotic, config.grf_contralateral
    )
    ctx.update(filtered=filtered, events=events, cycles=cycles)
    _write_json(
        ctx["out"] / "ingest.json",
        {
            "trajectory": str(config.trajectory),
            "rate_hz": filtered.rate_hz,
            "n_samples": filtered.n_samples,
            "filter_cutoff_hz": config.filter_cutoff_hz,
            "heel_strikes": {
                side: len(idx) for side, idx in sorted(events.heel_strikes.items())
            },
            "toe_offs": {
                side: len(idx) for side, idx in sorted(events.toe_offs.items())
            },
            "warnings": list(events.warnings),
            "n_cycles": cycles.n_cycles,
        },
    )


def stage_fit(ctx: dict) -> None:
    config = ctx["config"]
    if not config.normative_dir:
        raise ScomoError("config is missing the normative_dir path")
    pm = fit_participant_model(ctx["cycles"])
    nm, stems = fit_normative_from_dir(config, config.normative_dir)
    ctx.update(participant_model=pm, normative_model=nm)
    save_model(pm, ctx["out"] / "participant_model.json")
    save_model(nm, ctx["out"] / "normative_model.json")
    _write_json(
        ctx["out"] / "fit.json",
        {
            "participant_components": pm.n_components,
            "participant_evr": [float(v) for v in pm.explained_variance_ratio[: pm.n_components]],
            "normative_subjects": stems,
            "normative_evr": nm.metadata["explained_variance_ratio_4"],
            "normative_r2": [s.r2 for s in nm.sinusoids],
        },
    )


def stage_synth(ctx: dict) -> None:
    pm, nm = ctx["participant_model"], ctx["normative_model"]
    frames_dir = ctx["out"] / "frames"
    frames_dir.mkdir(exist_ok=True)
    written = []
    for view in VIEWS:
        mapping = reference_mapping(pm, nm, view)
        for alpha1 in DEFAULT_ALPHAS:
            gait = blend(pm, nm, alpha1)
            frames = project(gait, view, mapping)
            name = f"{view.kind}_alpha{alpha1:+.1f}.jsonl"
            export_frames_jsonl(frames, frames_dir / name)
            written.append(f"frames/{name}")
    _write_json(
        ctx["out"] / "synth.json",
        {"alphas": list(DEFAULT_ALPHAS), "views": [v.kind for v in VIEWS], "files": written},
    )


def stage_deviation(ctx: dict) -> None:
    config = ctx["config"]
    value, m = deviation_between(
        ctx["participant_model"], ctx["normative_model"], mode=config.deviation_mode
    )
    label = Path(config.trajectory).stem
    ctx["deviation"] = {"mode": config.deviation_mode, "value": value, "m": m}
    write_deviation_csv(
        [(label, config.deviation_mode, value, m)], ctx["out"] / "deviation.csv"
    )
    _write_json(ctx["out"] / "deviation.json", ctx["deviation"])


def stage_params(ctx: dict) -> None:
    config = ctx["config"]
    params = compute_gait_params(
        ctx["filtered"],
        ctx["events"],
        robotic_side=config.robotic_side,
        belt_speed_mps=config.belt_speed_mps,
    )
    ctx["params"] = params
    label = Path(config.trajectory).stem
    write_params_csv([(label, params)], ctx["out"] / "params.csv")
    _write_json(ctx["out"] / "params.json", params.as_dict())


def stage_correlate(ctx: dict) -> None:
    # correlation needs a series of sessions; a single recording cannot
    # produce one, so the stage documents that instead of failing the run
    _write_json(
        ctx["out"] / "correlate.json",
        {
            "status": "insufficient sessions",
            "reason": "correlation requires >= 3 sessions with SCoMo summaries; "
            "single-recording runs have 1",
        },
    )


def stage_report(ctx: dict) -> None:
    config = ctx["config"]
    _write_json(
        ctx["out"] / "report.json",
        {
            "config": config.as_dict(),
            "stages": list(PIPELINE_STAGES),
            "deviation": ctx["deviation"],
            "gait_params": ctx["params"].as_dict(),
        },
    )


_STAGE_FUNCS = (
    ("ingest", stage_ingest),
    ("fit", stage_fit),
    ("synth", stage_synth),
    ("deviation", stage_deviation),
    ("params", stage_params),
    ("correlate", stage_correlate),
    ("report", stage_report),
)

# which earlier stages each stage needs in the same run
STAGE_REQUIRES = {
    "ingest": (),
    "fit": ("ingest",),
    "synth": ("fit",),
    "deviation": ("fit",),
    "params": ("ingest",),
    "correlate": (),
    "report": ("synth", "deviation", "params", "correlate"),
}


def _stage_closure(target: str) -> list:
    if target not in STAGE_REQUIRES:
        raise ScomoError(f"unknown stage {target!r}")
    needed = set()

    def add(name):
        if name not in needed:
            for req in STAGE_REQUIRES[name]:
                add(req)
            needed.add(name)

    add(target)
    return [name for name, _ in _STAGE_FUNCS if name in needed]


def _fail(out: Path, err: StageError) -> int:
    _write_json(
        out / "error.json",
        {"status": "error", "stage": err.stage, "message": err.message},
    )
    return 2


def run_stages(config: PipelineConfig, target: str = "report") -> int:
    """Run the target stage plus its prerequisites, in pipeline order.

    Returns a process exit status: 0 on success, 2 on the first hard
    error (written to error.json in the output directory).
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx = {"config": config, "out": out}
    try:
        config.validate()
        plan = _stage_closure(target)
    except ScomoError as exc:
        return _fail(out, StageError("config", str(exc)))
    funcs = dict(_STAGE_FUNCS)
    for name in plan:
        try:
            funcs[name](ctx)
        except StageError as exc:
            return _fail(out, exc)
        except (ScomoError, OSError) as exc:
            return _fail(out, StageError(name, str(exc)))
    return 0


def run_pipeline(config: PipelineConfig) -> int:
    """Run every stage; returns a process exit status (0 ok, 2 failed)."""
    return run_stages(config, "report")


# ---------------------------------------------------------------------------
# demo cohort runner


def _run_session_protocol(store, config, pid, sess_plan, normative, data_dir):
    """Drive one planned session through the store and attach analysis."""
    session = store.create_session(pid, sess_plan["day"], sess_plan["session_index"])
    pending = list(sess_plan["requests"])
    for t, trial_plan in enumerate(sess_plan["trials"], start=1):
        want = trial_plan["speed_steps"]
        if session.speed_steps != want:
            raise ScomoError(
                f"{session.session_id}: planned speed {want} steps, "
                f"store says {session.speed_steps}"
            )
        store.record_trial(session, handrail_free=trial_plan["handrail_free"])
        for req in [r for r in pending if r["after_trial"] == t]:
            store.request_speed_change(session, req["direction"])
            pending.remove(req)

    files = sess_plan["files"]
    filtered, events, cycles = _load_recording(
        config,
        data_dir / files["traj"],
        data_dir / files["grf_robotic"],
        data_dir / files["grf_contralateral"],
    )
    pm = fit_participant_model(cycles)
    store.begin_evaluation(session, pm, normative)
    for sel in sess_plan["selections"]:
        slot = next(
            s
            for s in session.slots
            if s.view == sel["view"] and s.repeat_index == sel["repeat_index"]
        )
        alpha1 = min(max(sel["target_alpha"], slot.slider.min_alpha), slot.slider.max_alpha)
        store.record_selection_at(slot.slot_id, slot.slider.pos_from_alpha(alpha1))

    value, m = deviation_between(pm, normative, mode=config.deviation_mode)
    belt = sess_plan["final_speed_steps"] * 0.05
    params = compute_gait_params(
        filtered, events, robotic_side=config.robotic_side, belt_speed_mps=belt
    )
    store.record_analysis(
        session,
        deviation_mode=config.deviation_mode,
        deviation_value=value,
        deviation_m=m,
        params=params,
    )
    return session


def run_demo(output_dir, seed: int = 0) -> int:
    """Generate the demo cohort, run the protocol, export every report.

    Writes data/ (recordings + manifest), store/ (event logs), reports/
    (one archive per participant) and demo_summary.json under
    output_dir. Returns a process exit status like run_pipeline.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = PipelineConfig(output_dir=str(out), seed=seed)
    stage = "generate"
    try:
        data_dir = out / "data"
        manifest = generate_demo_cohort(data_dir, seed=seed)

        stage = "fit"
        normative, stems = fit_normative_from_dir(
            config, data_dir / manifest["normative_dir"]
        )

        stage = "protocol"
        store = SessionStore(root=out / "store")
        report_dir = out / "reports"
        report_dir.mkdir(exist_ok=True)
        summary = {
            "seed": seed,
            "normative_subjects": len(stems),
            "participants": [],
        }
        for plan in manifest["participants"]:
            pid = plan["participant_id"]
            for sess_plan in plan["sessions"]:
                _run_session_protocol(
                    store, config, pid, sess_plan, normative, data_dir
                )
            for conf in plan["confidence"]:
                store.record_confidence(
                    pid, conf["day"], conf["rating"], conf["free_text_cues"]
                )
            store.snapshot(pid)

        # export after every participant finished so each archive's
        # cohort-level trend model covers the whole cohort
        stage = "report"
        for plan in manifest["participants"]:
            pid = plan["participant_id"]
            archive = store.export_report(pid)
            (report_dir / f"{pid}.zip").write_bytes(archive)
            summary["participants"].append(
                {
                    "participant_id": pid,
                    "sessions": len(plan["sessions"]),
                    "report": f"reports/{pid}.zip",
                }
            )
        _write_json(out / "demo_summary.json", summary)
    except (ScomoError, OSError) as exc:
        if isinstance(exc, StageError):
            return _fail(out, exc)
        return _fail(out, StageError(stage, str(exc)))
    return 0
