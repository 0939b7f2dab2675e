"""Four-day selection-session protocol and its persistence.

State is event-sourced: every mutation appends one JSON event to a
per-participant log and is applied through the same reducer that replay
uses, so reloading a store from disk reconstructs identical state.
Sessions move training -> evaluation -> complete; training holds six
walking trials with the speed-progression rules (fixed day-1 schedule,
two-of-three handrail rule from day 2), evaluation holds 18 selection
slots (3 views x 6 repeats) with randomized slider bounds.

Display-channel payload builders live here too. They carry only
point-light frames and slider positions normalized to [0, 1]; the
mapping from position to blend coefficient stays on the service side,
so the coefficient is never shown to the participant.
"""

from __future__ import annotations

import io
import json
import re
import threading
import zipfile
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SessionError
from .model import NormativeModel, ParticipantModel, model_from_dict, model_to_dict
from .params import PARAM_NAMES, GaitParameterSet, correlate_with_scomo
from .stats import fit_random_intercept, summarize_selections
from .synthesis import DISPLAY_FPS, ViewingAngle, blend, loop_indices, project, reference_mapping

SPEED_STEP_MPS = 0.05
DAY1_START_STEPS = 6  # 0.30 m/s
DAY1_CAP_STEPS = 10  # 0.50 m/s

N_DAYS = 4
SESSIONS_PER_DAY = 3
TRIALS_PER_SESSION = 6
TRIAL_BLOCK = 3  # speed rules operate on blocks of three trials

VIEW_ORDER = ("frontal", "robotic_45", "contralateral_45")
N_REPEATS = 6
SLOTS_PER_EVALUATION = len(VIEW_ORDER) * N_REPEATS

SLIDER_MIN_RANGE = (-5.0, -4.5)
SLIDER_MAX_RANGE = (4.5, 5.0)

CONFIDENCE_SCALE = (1, 10)

PHASES = ("training", "evaluation", "complete")

_ID_RE = re.compile(r"^[A-Za-z0-9_-]+$")

_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)  # fixed so re-exports are byte-identical


def _speed_of(steps: int) -> float:
    # round away binary dust (6 * 0.05 -> 0.30000000000000004)
    return round(steps * SPEED_STEP_MPS, 9)


def _steps_of(speed: float) -> int:
    steps = round(speed / SPEED_STEP_MPS)
    if abs(speed - steps * SPEED_STEP_MPS) > 1e-9 or steps < 0:
        raise SessionError(
            f"speed {speed} is not a nonnegative multiple of {SPEED_STEP_MPS} m/s"
        )
    return steps


@dataclass(frozen=True)
class Trial:
    """One 2-minute walking trial within a training block."""

    index: int
    speed: float
    handrail_free: bool
    duration_s: float = 120.0

    def __post_init__(self):
        if not (1 <= self.index <= TRIALS_PER_SESSION):
            raise SessionError(f"trial index must be 1..{TRIALS_PER_SESSION}")
        _steps_of(self.speed)
        if self.duration_s <= 0:
            raise SessionError("trial duration must be positive")


@dataclass(frozen=True)
class SliderConfig:
    """Randomized slider bounds for one selection slot.

    The participant always sees a full-width slider; only the hidden
    endpoints vary, so endpoint position carries no information about
    the blend coefficient.
    """

    min_alpha: float
    max_alpha: float
    initial_alpha: float
    seed: int

    def __post_init__(self):
        lo, hi = SLIDER_MIN_RANGE
        if not (lo <= self.min_alpha <= hi):
            raise SessionError(f"min_alpha must lie in [{lo}, {hi}]")
        lo, hi = SLIDER_MAX_RANGE
        if not (lo <= self.max_alpha <= hi):
            raise SessionError(f"max_alpha must lie in [{lo}, {hi}]")
        if not (self.min_alpha < 0.0 < self.max_alpha):
            raise SessionError("slider bounds must straddle zero")
        if not (self.min_alpha <= self.initial_alpha <= self.max_alpha):
            raise SessionError("initial_alpha outside slider bounds")

    def alpha_from_pos(self, pos: float) -> float:
        if not (0.0 <= pos <= 1.0):
            raise SessionError("slider position must lie in [0, 1]")
        return self.min_alpha + pos * (self.max_alpha - self.min_alpha)

    def pos_from_alpha(self, alpha1: float) -> float:
        return (alpha1 - self.min_alpha) / (self.max_alpha - self.min_alpha)

    @property
    def initial_pos(self) -> float:
        return self.pos_from_alpha(self.initial_alpha)


@dataclass(frozen=True)
class ScomoSelection:
    """One recorded selection: the slider's coefficient at confirm time."""

    alpha1: float
    view: str
    repeat_index: int
    slider: SliderConfig
    timestamp: float

    def __post_init__(self):
        if self.view not in VIEW_ORDER:
            raise SessionError(f"unknown view {self.view!r}")
        if not (1 <= self.repeat_index <= N_REPEATS):
            raise SessionError(f"repeat_index must be 1..{N_REPEATS}")
        if not (
            self.slider.min_alpha - 1e-12
            <= self.alpha1
            <= self.slider.max_alpha + 1e-12
        ):
            raise SessionError("selection out of slider range")


@dataclass
class EvaluationSlot:
    """One of the 18 selection slots of an evaluation block."""

    slot_id: str
    view: str
    repeat_index: int
    slider: SliderConfig
    selection: ScomoSelection | None = None

    @property
    def open(self) -> bool:
        return self.selection is None


@dataclass(frozen=True)
class ConfidenceReport:
    """Participant's end-of-day confidence in selecting their own gait."""

    participant_id: str
    day: int
    rating: int
    free_text_cues: tuple = ()

    def __post_init__(self):
        lo, hi = CONFIDENCE_SCALE
        if not (isinstance(self.rating, int) and lo <= self.rating <= hi):
            raise SessionError(f"confidence rating must be an integer in {lo}..{hi}")
        if not (1 <= self.day <= N_DAYS):
            raise SessionError(f"day must be 1..{N_DAYS}")


@dataclass(frozen=True)
class SpeedDecision:
    """Outcome of a speed-change request."""

    direction: int
    granted: bool
    new_speed: float
    reason: str


@dataclass
class ExperimentSession:
    """Protocol state for one (participant, day, session) triple."""

    participant_id: str
    day: int
    session_index: int
    speed_steps: int
    trials: list = field(default_factory=list)
    phase: str = "training"
    slots: list = field(default_factory=list)
    summaries: dict = field(default_factory=dict)  # view -> SelectionSummary
    evaluation_seed: int | None = None
    analysis: dict = field(default_factory=dict)

    @property
    def treadmill_speed(self) -> float:
        return _speed_of(self.speed_steps)

    @property
    def key(self) -> tuple:
        return (self.day, self.session_index)

    @property
    def session_id(self) -> str:
        return f"{self.participant_id}.d{self.day}.s{self.session_index}"

    @property
    def session_number(self) -> int:
        """1..12 position in the 4-day protocol."""
        return (self.day - 1) * SESSIONS_PER_DAY + self.session_index


class _ParticipantState:
    def __init__(self):
        self.sessions = {}  # (day, session_index) -> ExperimentSession
        self.confidence = []  # ConfidenceReport, in recording order
        self.models = {}  # (day, session_index) -> (ParticipantModel, NormativeModel)
        self.mappings = {}  # ((day, idx), view kind) -> ScreenMapping, lazy
        self.events = []
        self.next_seq = 0


class SessionStore:
    """Event-sourced store of all sessions, keyed by participant.

    Mutations are serialized through one lock; every mutation appends an
    event and routes through the same reducer used for replay.
    """

    def __init__(self, root=None):
        self._lock = threading.RLock()
        self._participants = {}
        self._slots = {}  # slot_id -> (participant_id, (day, session_index))
        self.root = Path(root) if root is not None else None
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
            for path in sorted(self.root.glob("events-*.jsonl")):
                self._replay_file(path)

    # -- event plumbing ----------------------------------------------------

    def _state(self, participant_id: str) -> _ParticipantState:
        if not _ID_RE.match(participant_id):
            raise SessionError(
                "participant id must contain only letters, digits, '-', '_'"
            )
        return self._participants.setdefault(participant_id, _ParticipantState())

    def _append(self, participant_id: str, event: dict) -> dict:
        state = self._state(participant_id)
        event = {"seq": state.next_seq, **event}
        state.next_seq += 1
        state.events.append(event)
        if self.root is not None:
            log = self.root / f"events-{participant_id}.jsonl"
            with log.open("a") as fh:
                fh.write(json.dumps(event, sort_keys=True))
                fh.write("\n")
        self._apply(participant_id, event)
        return event

    def _replay_file(self, path: Path):
        participant_id = path.stem[len("events-"):]
        state = self._state(participant_id)
        with path.open() as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                event = json.loads(line)
                state.events.append(event)
                state.next_seq = event["seq"] + 1
                self._apply(participant_id, event)

    def _apply(self, participant_id: str, event: dict):
        """Reducer: the only code that mutates protocol state."""
        state = self._participants[participant_id]
        kind = event["type"]
        if kind == "session_created":
            session = ExperimentSession(
                participant_id=participant_id,
                day=event["day"],
                session_index=event["session_index"],
                speed_steps=event["speed_steps"],
            )
            state.sessions[session.key] = session
        elif kind == "trial_recorded":
            session = state.sessions[(event["day"], event["session_index"])]
            session.trials.append(
                Trial(
                    index=event["index"],
                    speed=_speed_of(event["speed_steps"]),
                    handrail_free=event["handrail_free"],
                    duration_s=event["duration_s"],
                )
            )
            if session.day == 1:
                day_position = (
                    TRIALS_PER_SESSION * (session.session_index - 1) + event["index"]
                )
                if day_position % TRIAL_BLOCK == 0 and session.speed_steps < DAY1_CAP_STEPS:
                    session.speed_steps += 1
            if len(session.trials) == TRIALS_PER_SESSION:
                session.phase = "evaluation"
        elif kind == "speed_decision":
            session = state.sessions[(event["day"], event["session_index"])]
            session.speed_steps = event["new_speed_steps"]
        elif kind == "evaluation_started":
            session = state.sessions[(event["day"], event["session_index"])]
            session.evaluation_seed = event["seed"]
            session.slots = [
                EvaluationSlot(
                    slot_id=s["slot_id"],
                    view=s["view"],
                    repeat_index=s["repeat_index"],
                    slider=SliderConfig(**s["slider"]),
                )
                for s in event["slots"]
            ]
            for slot in session.slots:
                self._slots[slot.slot_id] = (participant_id, session.key)
            state.models[session.key] = (
                model_from_dict(event["models"]["participant"]),
                model_from_dict(event["models"]["normative"]),
            )
        elif kind == "selection_recorded":
            _, key = self._slots[event["slot_id"]]
            session = state.sessions[key]
            slot = next(s for s in session.slots if s.slot_id == event["slot_id"])
            slot.selection = ScomoSelection(
                alpha1=event["alpha1"],
                view=slot.view,
                repeat_index=slot.repeat_index,
                slider=slot.slider,
                timestamp=event["timestamp"],
            )
            if all(not s.open for s in session.slots):
                session.phase = "complete"
                session.summaries = {
                    view: summarize_selections(
                        [
                            s.selection.alpha1
                            for s in session.slots
                            if s.view == view
                        ],
                        view,
                    )
                    for view in VIEW_ORDER
                }
        elif kind == "confidence_recorded":
            state.confidence.append(
                ConfidenceReport(
                    participant_id=participant_id,
                    day=event["day"],
                    rating=event["rating"],
                    free_text_cues=tuple(event["free_text_cues"]),
                )
            )
        elif kind == "analysis_recorded":
            session = state.sessions[(event["day"], event["session_index"])]
            analysis = {}
            if event.get("deviation") is not None:
                analysis["deviation"] = dict(event["deviation"])
            if event.get("params") is not None:
                analysis["params"] = GaitParameterSet(**event["params"])
            session.analysis.update(analysis)
        else:
            raise SessionError(f"unknown event type {kind!r}")

    # -- lookups -------------------------------------------------------------

    def participants(self) -> list:
        return sorted(self._participants)

    def sessions_for(self, participant_id: str) -> list:
        state = self._participants.get(participant_id)
        if state is None:
            return []
        return [state.sessions[k] for k in sorted(state.sessions)]

    def get_session(self, session_id: str) -> ExperimentSession:
        for pid, state in self._participants.items():
            for session in state.sessions.values():
                if session.session_id == session_id:
                    return session
        raise SessionError(f"unknown session {session_id!r}")

    def get_slot(self, slot_id: str):
        entry = self._slots.get(slot_id)
        if entry is None:
            raise SessionError(f"unknown slot {slot_id!r}")
        pid, key = entry
        session = self._participants[pid].sessions[key]
        slot = next(s for s in session.slots if s.slot_id == slot_id)
        return session, slot

    def confidence_for(self, participant_id: str) -> list:
        state = self._participants.get(participant_id)
        return list(state.confidence) if state else []

    def _resolve(self, session: ExperimentSession) -> ExperimentSession:
        state = self._participants.get(session.participant_id)
        if state is None or session.key not in state.sessions:
            raise SessionError(f"session {session.session_id} not in this store")
        return state.sessions[session.key]

    # -- protocol operations ---------------------------------------------------

    def create_session(
        self, participant_id: str, day: int, session_index: int
    ) -> ExperimentSession:
        with self._lock:
            if not (1 <= day <= N_DAYS):
                raise SessionError(f"day must be 1..{N_DAYS}")
            if not (1 <= session_index <= SESSIONS_PER_DAY):
                raise SessionError(f"session_index must be 1..{SESSIONS_PER_DAY}")
            state = self._state(participant_id)
            key = (day, session_index)
            if key in state.sessions:
                raise SessionError(f"duplicate session key d{day}s{session_index}")
            for earlier_index in range(1, session_index):
                earlier = state.sessions.get((day, earlier_index))
                if earlier is not None and earlier.phase != "complete":
                    raise SessionError("previous session incomplete")
            prior_keys = [k for k in state.sessions if k < key]
            if prior_keys:
                speed_steps = state.sessions[max(prior_keys)].speed_steps
            else:
                speed_steps = DAY1_START_STEPS
            self._append(
                participant_id,
                {
                    "type": "session_created",
                    "day": day,
                    "session_index": session_index,
                    "speed_steps": speed_steps,
                },
            )
            return state.sessions[key]

    def record_trial(
        self,
        session: ExperimentSession,
        trial: Trial | None = None,
        handrail_free: bool = False,
        duration_s: float = 120.0,
    ) -> ExperimentSession:
        with self._lock:
            session = self._resolve(session)
            if session.phase != "training":
                if len(session.trials) >= TRIALS_PER_SESSION:
                    raise SessionError("session full: 6 trials already recorded")
                raise SessionError(f"wrong phase {session.phase!r} for trials")
            next_index = len(session.trials) + 1
            if trial is not None:
                if trial.index != next_index:
                    raise SessionError(
                        f"out-of-order trial index {trial.index}, expected {next_index}"
                    )
                if abs(trial.speed - session.treadmill_speed) > 1e-9:
                    raise SessionError(
                        "trial speed must match the session's treadmill speed"
                    )
                handrail_free = trial.handrail_free
                duration_s = trial.duration_s
            self._append(
                session.participant_id,
                {
                    "type": "trial_recorded",
                    "day": session.day,
                    "session_index": session.session_index,
                    "index": next_index,
                    "speed_steps": session.speed_steps,
                    "handrail_free": bool(handrail_free),
                    "duration_s": float(duration_s),
                },
            )
            return session

    def request_speed_change(
        self,
        session: ExperimentSession,
        direction: int,
        last_block=None,
    ) -> SpeedDecision:
        with self._lock:
            session = self._resolve(session)
            if direction not in (-1, 0, 1):
                raise SessionError("direction must be +1, 0, or -1")
            if session.day == 1:
                raise SessionError(
                    "speed requests start on day 2; day 1 follows the fixed schedule"
                )
            if last_block is None:
                if len(session.trials) < TRIAL_BLOCK or (
                    len(session.trials) % TRIAL_BLOCK != 0
                ):
                    raise SessionError(
                        "speed may change only after a complete block of three trials"
                    )
                last_block = tuple(session.trials[-TRIAL_BLOCK:])
            block = tuple(last_block)
            if len(block) != TRIAL_BLOCK:
                raise SessionError("need a complete block of three trials")

            if direction == 1:
                free = sum(1 for t in block if t.handrail_free)
                granted = free >= 2
                reason = (
                    "two of three trials handrail-free"
                    if granted
                    else "fewer than two of three trials handrail-free"
                )
            else:
                granted = True
                reason = "decrease or maintenance always granted"

            new_steps = session.speed_steps
            if granted and direction == 1:
                new_steps += 1
            elif granted and direction == -1:
                new_steps = max(0, new_steps - 1)
            self._append(
                session.participant_id,
                {
                    "type": "speed_decision",
                    "day": session.day,
                    "session_index": session.session_index,
                    "direction": direction,
                    "granted": granted,
                    "new_speed_steps": new_steps,
                },
            )
            return SpeedDecision(
                direction=direction,
                granted=granted,
                new_speed=_speed_of(new_steps),
                reason=reason,
            )

    def begin_evaluation(
        self,
        session: ExperimentSession,
        participant_model: ParticipantModel,
        normative_model: NormativeModel,
        seed: int | None = None,
    ) -> list:
        """Generate the 18 selection slots with fresh randomized sliders.

        The RNG seed defaults to a stable hash of the session id so
        repeated protocol runs are reproducible; the seed used is always
        recorded in the event log and in every SliderConfig.
        """
        with self._lock:
            session = self._resolve(session)
            if session.phase != "evaluation":
                raise SessionError(
                    f"wrong phase {session.phase!r}: evaluation requires 6 recorded trials"
                )
            if session.slots:
                raise SessionError("evaluation already started")
            if not isinstance(participant_model, ParticipantModel) or not isinstance(
                normative_model, NormativeModel
            ):
                raise SessionError("models missing or of the wrong type")
            if seed is None:
                seed = zlib.crc32(session.session_id.encode())
            seed = int(seed)
            rng = np.random.default_rng(seed)
            pairs = [
                (view, repeat)
                for view in VIEW_ORDER
                for repeat in range(1, N_REPEATS + 1)
            ]
            order = rng.permutation(len(pairs))
            slots = []
            for position in order:
                view, repeat = pairs[int(position)]
                min_alpha = float(rng.uniform(*SLIDER_MIN_RANGE))
                max_alpha = float(rng.uniform(*SLIDER_MAX_RANGE))
                initial_alpha = float(rng.uniform(min_alpha, max_alpha))
                slots.append(
                    {
                        "slot_id": f"{session.session_id}.{view}.r{repeat}",
                        "view": view,
                        "repeat_index": repeat,
                        "slider": {
                            "min_alpha": min_alpha,
                            "max_alpha": max_alpha,
                            "initial_alpha": initial_alpha,
                            "seed": seed,
                        },
                    }
                )
            self._append(
                session.participant_id,
                {
                    "type": "evaluation_started",
                    "day": session.day,
                    "session_index": session.session_index,
                    "seed": seed,
                    "slots": slots,
                    "models": {
                        "participant": model_to_dict(participant_model),
                        "normative": model_to_dict(normative_model),
                    },
                },
            )
            return list(session.slots)

    def record_selection(
        self, session: ExperimentSession, selection: ScomoSelection
    ) -> ExperimentSession:
        with self._lock:
            session = self._resolve(session)
            slot = next(
                (
                    s
                    for s in session.slots
                    if s.view == selection.view
                    and s.repeat_index == selection.repeat_index
                ),
                None,
            )
            if slot is None:
                raise SessionError(
                    f"no slot for view {selection.view!r} repeat {selection.repeat_index}"
                )
            return self._record_selection_on(
                session, slot, selection.alpha1, selection.timestamp
            )

    def record_selection_at(
        self, slot_id: str, pos: float, timestamp: float | None = None
    ) -> ExperimentSession:
        """Record a selection from a normalized slider position in [0, 1]."""
        with self._lock:
            session, slot = self.get_slot(slot_id)
            alpha1 = slot.slider.alpha_from_pos(float(pos))
            return self._record_selection_on(session, slot, alpha1, timestamp)

    def _record_selection_on(self, session, slot, alpha1, timestamp):
        if session.phase != "evaluation":
            raise SessionError(f"wrong phase {session.phase!r} for selections")
        if not slot.open:
            raise SessionError(f"slot {slot.slot_id} already selected")
        if not (
            slot.slider.min_alpha - 1e-12 <= alpha1 <= slot.slider.max_alpha + 1e-12
        ):
            raise SessionError("selection out of slider range")
        state = self._state(session.participant_id)
        if timestamp is None:
            timestamp = float(state.next_seq)  # logical clock: the event's seq
        self._append(
            session.participant_id,
            {
                "type": "selection_recorded",
                "slot_id": slot.slot_id,
                "alpha1": float(alpha1),
                "timestamp": float(timestamp),
            },
        )
        return session

    def record_confidence(
        self,
        participant_id: str,
        day: int,
        rating: int,
        free_text_cues=(),
    ) -> ConfidenceReport:
        with self._lock:
            # validate before logging
            report = ConfidenceReport(
                participant_id=participant_id,
                day=day,
                rating=rating,
                free_text_cues=tuple(str(c) for c in free_text_cues),
            )
            self._append(
                participant_id,
                {
                    "type": "confidence_recorded",
                    "day": report.day,
                    "rating": report.rating,
                    "free_text_cues": list(report.free_text_cues),
                },
            )
            return report

    def record_analysis(
        self,
        session: ExperimentSession,
        deviation_mode: str | None = None,
        deviation_value: float | None = None,
        deviation_m: int | None = None,
        params: GaitParameterSet | None = None,
    ) -> ExperimentSession:
        """Attach derived per-session analysis (deviation, gait parameters)."""
        with self._lock:
            session = self._resolve(session)
            deviation = None
            if deviation_value is not None:
                deviation = {
                    "mode": deviation_mode or "sum_angles",
                    "value": float(deviation_value),
                    "m": int(deviation_m) if deviation_m is not None else None,
                }
            self._append(
                session.participant_id,
                {
                    "type": "analysis_recorded",
                    "day": session.day,
                    "session_index": session.session_index,
                    "deviation": deviation,
                    "params": params.as_dict() if params is not None else None,
                },
            )
            return session

    # -- display-channel payloads ---------------------------------------------

    def display_slots_payload(self, session: ExperimentSession) -> dict:
        """Slot list for the display; positions normalized, no coefficients."""
        with self._lock:
            session = self._resolve(session)
            return {
                "session_id": session.session_id,
                "phase": session.phase,
                "slots": [
                    {
                        "slot_id": s.slot_id,
                        "view": s.view,
                        "repeat_index": s.repeat_index,
                        "initial_pos": s.slider.initial_pos,
                        "pos_min": 0.0,
                        "pos_max": 1.0,
                        "status": "open" if s.open else "selected",
                    }
                    for s in session.slots
                ],
            }

    def frames_for_slot(
        self,
        slot_id: str,
        pos: float,
        view: str | None = None,
        fps: float = DISPLAY_FPS,
    ) -> dict:
        """Point-light frames at a normalized slider position.

        One full gait loop resampled to fps. The screen mapping is fitted
        once per session and view from the participant's own gait so the
        walker never rescales as the slider moves.
        """
        with self._lock:
            session, slot = self.get_slot(slot_id)
            if view is not None and view != slot.view:
                raise SessionError(
                    f"slot {slot_id} shows view {slot.view!r}, not {view!r}"
                )
            models = self._state(session.participant_id).models.get(session.key)
            if models is None:
                raise SessionError("models not attached; begin the evaluation first")
            pm, nm = models
            alpha1 = slot.slider.alpha_from_pos(float(pos))
            gait = blend(pm, nm, alpha1)
            state = self._state(session.participant_id)
            mkey = (session.key, slot.view)
            mapping = state.mappings.get(mkey)
            view_angle = ViewingAngle.of(slot.view)
            if mapping is None:
                mapping = reference_mapping(pm, nm, view_angle)
                state.mappings[mkey] = mapping
            source = project(gait, view_angle, mapping)
            count = max(1, int(round(len(source) * fps / pm.rate_hz)))
            indices = loop_indices(len(source), fps, pm.rate_hz, count)
            return {
                "slot_id": slot.slot_id,
                "view": slot.view,
                "pos": float(pos),
                "fps": float(fps),
                "n_frames": int(count),
                "frames": [
                    {
                        "frame_index": int(k),
                        "points": np.round(source[i].points, 9).tolist(),
                    }
                    for k, i in enumerate(indices)
                ],
            }

    # -- reporting -------------------------------------------------------------

    def snapshot(self, participant_id: str) -> dict:
        """Derived-state summary (regenerable from the event log)."""
        with self._lock:
            state = self._participants.get(participant_id)
            if state is None:
                raise SessionError(f"unknown participant {participant_id!r}")
            doc = {"participant_id": participant_id, "sessions": []}
            for key in sorted(state.sessions):
                s = state.sessions[key]
                doc["sessions"].append(
                    {
                        "day": s.day,
                        "session_index": s.session_index,
                        "phase": s.phase,
                        "treadmill_speed": s.treadmill_speed,
                        "n_trials": len(s.trials),
                        "n_selected": sum(1 for sl in s.slots if not sl.open),
                        "evaluation_seed": s.evaluation_seed,
                    }
                )
            doc["confidence"] = [
                {"day": c.day, "rating": c.rating} for c in state.confidence
            ]
            if self.root is not None:
                out = self.root / f"snapshot-{participant_id}.json"
                out.write_text(json.dumps(doc, sort_keys=True, indent=2))
            return doc

    def export_report(self, participant_id: str) -> bytes:
        """Single deterministic archive of every derived table for one participant."""
        with self._lock:
            state = self._participants.get(participant_id)
            if state is None:
                raise SessionError(f"no data for participant {participant_id!r}")
            sessions = [state.sessions[k] for k in sorted(state.sessions)]
            completed = [s for s in sessions if s.phase == "complete"]
            if not completed:
                raise SessionError("no data: no completed sessions")
            files = {}
            files["scomo.csv"] = self._scomo_csv(completed)
            files["sessions.csv"] = self._sessions_csv(sessions)
            files["trials.csv"] = self._trials_csv(sessions)
            files["deviation.csv"] = self._deviation_csv(sessions)
            files["gait_params.csv"] = self._params_csv(sessions)
            for view in VIEW_ORDER:
                files[f"correlations_{view}.csv"] = self._correlation_csv(
                    completed, view
                )
            files["mixed_model.json"] = self._mixed_model_json()
            files["confidence.csv"] = self._confidence_csv(state.confidence)
            files["metadata.json"] = json.dumps(
                {
                    "format_version": 1,
                    "participant_id": participant_id,
                    "views": list(VIEW_ORDER),
                    "confidence_scale": list(CONFIDENCE_SCALE),
                    "si_formula": "SI = 100*(robot - ctl)/(0.5*(robot + ctl))",
                    "trend_model": "Gaussian random-intercept mixed model, ML",
                    "speed_step_mps": SPEED_STEP_MPS,
                },
                sort_keys=True,
                indent=2,
            )
            return _deterministic_zip(files)

    def _scomo_csv(self, completed) -> str:
        lines = ["participant_id,day,session_index,view,mean_scomo,sd_scomo,n_repeats"]
        for s in completed:
            for view in VIEW_ORDER:
                summary = s.summaries[view]
                lines.append(
                    f"{s.participant_id},{s.day},{s.session_index},{view},"
                    f"{summary.mean_scomo:.9g},{summary.sd_scomo:.9g},{summary.n_repeats}"
                )
        return "\n".join(lines) + "\n"

    def _sessions_csv(self, sessions) -> str:
        lines = [
            "participant_id,day,session_index,session_number,phase,"
            "treadmill_speed,n_trials,evaluation_seed"
        ]
        for s in sessions:
            seed = "" if s.evaluation_seed is None else s.evaluation_seed
            lines.append(
                f"{s.participant_id},{s.day},{s.session_index},{s.session_number},"
                f"{s.phase},{s.treadmill_speed:.2f},{len(s.trials)},{seed}"
            )
        return "\n".join(lines) + "\n"

    def _trials_csv(self, sessions) -> str:
        lines = ["day,session_index,trial_index,speed_mps,handrail_free,duration_s"]
        for s in sessions:
            for t in s.trials:
                lines.append(
                    f"{s.day},{s.session_index},{t.index},{t.speed:.2f},"
                    f"{str(t.handrail_free).lower()},{t.duration_s:.9g}"
                )
        return "\n".join(lines) + "\n"

    def _deviation_csv(self, sessions) -> str:
        lines = ["session_id,mode,value,m"]
        for s in sessions:
            dev = s.analysis.get("deviation")
            if dev is not None:
                m = "" if dev.get("m") is None else dev["m"]
                lines.append(f"{s.session_id},{dev['mode']},{dev['value']:.9g},{m}")
        return "\n".join(lines) + "\n"

    def _params_csv(self, sessions) -> str:
        lines = ["session_id," + ",".join(PARAM_NAMES)]
        for s in sessions:
            pset = s.analysis.get("params")
            if pset is not None:
                values = ",".join(f"{getattr(pset, n):.9g}" for n in PARAM_NAMES)
                lines.append(f"{s.session_id},{values}")
        return "\n".join(lines) + "\n"

    def _correlation_csv(self, completed, view: str) -> str:
        usable = [
            s
            for s in completed
            if s.analysis.get("params") is not None and view in s.summaries
        ]
        if len(usable) < 3:
            return (
                f"# view={view}\n"
                "# insufficient sessions for correlation (need >= 3 with parameters)\n"
            )
        report = correlate_with_scomo(
            [s.analysis["params"] for s in usable],
            [s.summaries[view].mean_scomo for s in usable],
            view,
        )
        lines = [f"# view={view}", "parameter,pearson_r,r_squared,n_points,salient"]
        for name in PARAM_NAMES:
            c = report.correlations[name]
            r = "" if c.pearson_r is None else f"{c.pearson_r:.9g}"
            r2 = "" if c.r_squared is None else f"{c.r_squared:.9g}"
            lines.append(f"{name},{r},{r2},{c.n_points},{str(c.salient).lower()}")
        return "\n".join(lines) + "\n"

    def _mixed_model_json(self) -> str:
        """Cohort practice-trend fits: mean selection vs session number.

        Uses every participant in the store so a single-participant
        export still reports the surrounding cohort context; sections
        without enough data are marked rather than fabricated.
        """
        doc = {"model": "mean_scomo ~ session_number + (1 | participant)", "per_view": {}}
        for view in VIEW_ORDER:
            y, xs, labels = [], [], []
            for pid in sorted(self._participants):
                rows = [
                    s
                    for s in self.sessions_for(pid)
                    if s.phase == "complete" and view in s.summaries
                ]
                if len(rows) < 3:
                    continue  # mixed model needs >= 3 observations per group
                for s in rows:
                    y.append(s.summaries[view].mean_scomo)
                    xs.append(s.session_number)
                    labels.append(pid)
            if len(set(labels)) < 2:
                doc["per_view"][view] = {
                    "status": "insufficient sessions",
                    "reason": "need >= 2 participants with >= 3 completed sessions",
                }
                continue
            fit = fit_random_intercept(y, xs, labels)
            doc["per_view"][view] = json.loads(fit.report_json())
        return json.dumps(doc, sort_keys=True, indent=2)

    def _confidence_csv(self, confidence) -> str:
        lines = ["day,rating,free_text_cues"]
        for c in confidence:
            cues = ";".join(c.free_text_cues).replace(",", ";")
            lines.append(f"{c.day},{c.rating},{cues}")
        return "\n".join(lines) + "\n"


def _deterministic_zip(files: dict) -> bytes:
    """Archive with fixed timestamps and sorted entries: same state, same bytes."""
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as zf:
        for name in sorted(files):
            info = zipfile.ZipInfo(name, date_time=_ZIP_EPOCH)
            info.external_attr = 0o644 << 16
            zf.writestr(info, files[name])
    return buf.getvalue()
