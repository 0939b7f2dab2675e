"""HTTP/JSON API over the session store.

Two payload channels with different rules:

* operator channel (sessions, trials, speed requests, evaluation,
  confidence, report): may carry speeds, seeds and summaries;
* display channel (slot lists, frames, selection acknowledgements):
  carries only normalized slider positions in [0, 1] and screen
  coordinates. Raw blend coefficients never appear in any payload; the
  store resolves positions to coefficients internally.

Errors map to JSON bodies: protocol violations are 400, unknown ids are
404, each as {"error": {"type", "message"}}.
"""

from __future__ import annotations

from fastapi import Body, FastAPI
from fastapi.responses import JSONResponse, Response

from .errors import ScomoError, SessionError
from .model import model_from_dict
from .session import DISPLAY_FPS, SessionStore


def _error_response(exc: Exception) -> JSONResponse:
    message = str(exc)
    status = 404 if message.startswith(("unknown", "no data")) else 400
    return JSONResponse(
        status_code=status,
        content={"error": {"type": type(exc).__name__, "message": message}},
    )


def _session_doc(session) -> dict:
    """Operator-channel view of one session."""
    return {
        "session_id": session.session_id,
        "participant_id": session.participant_id,
        "day": session.day,
        "session_index": session.session_index,
        "session_number": session.session_number,
        "phase": session.phase,
        "treadmill_speed": session.treadmill_speed,
        "trials": [
            {
                "index": t.index,
                "speed": t.speed,
                "handrail_free": t.handrail_free,
                "duration_s": t.duration_s,
            }
            for t in session.trials
        ],
        "n_slots": len(session.slots),
        "n_selected": sum(1 for s in session.slots if not s.open),
        "evaluation_seed": session.evaluation_seed,
    }


def _selection_ack(session, slot_id: str) -> dict:
    """Display-channel acknowledgement: progress only, no coefficients."""
    return {
        "slot_id": slot_id,
        "status": "selected",
        "session_id": session.session_id,
        "phase": session.phase,
        "n_selected": sum(1 for s in session.slots if not s.open),
        "n_slots": len(session.slots),
    }


def create_app(store: SessionStore | None = None, root=None) -> FastAPI:
    """Build the API; a fresh in-memory store is used when none is given."""
    if store is None:
        store = SessionStore(root=root)
    app = FastAPI(title="gait body-image service", version="1.0")
    app.state.store = store

    @app.exception_handler(ScomoError)
    async def _scomo_error(_request, exc):
        return _error_response(exc)

    @app.post("/sessions")
    def create_session(payload: dict = Body(...)):
        for field in ("participant_id", "day", "session_index"):
            if field not in payload:
                raise SessionError(f"missing field {field!r}")
        session = store.create_session(
            str(payload["participant_id"]),
            int(payload["day"]),
            int(payload["session_index"]),
        )
        return _session_doc(session)

    @app.post("/sessions/{session_id}/trials")
    def record_trial(session_id: str, payload: dict = Body(...)):
        session = store.get_session(session_id)
        if "handrail_free" not in payload:
            raise SessionError("missing field 'handrail_free'")
        session = store.record_trial(
            session,
            handrail_free=bool(payload["handrail_free"]),
            duration_s=float(payload.get("duration_s", 120.0)),
        )
        return _session_doc(session)

    @app.post("/sessions/{session_id}/speed-request")
    def speed_request(session_id: str, payload: dict = Body(...)):
        session = store.get_session(session_id)
        if "direction" not in payload:
            raise SessionError("missing field 'direction'")
        decision = store.request_speed_change(session, int(payload["direction"]))
        return {
            "session_id": session.session_id,
            "direction": decision.direction,
            "granted": decision.granted,
            "new_speed": decision.new_speed,
            "reason": decision.reason,
        }

    @app.post("/sessions/{session_id}/evaluation")
    def begin_evaluation(session_id: str, payload: dict = Body(...)):
        session = store.get_session(session_id)
        doc_p = payload.get("participant_model")
        doc_n = payload.get("normative_model")
        if not isinstance(doc_p, dict) or not isinstance(doc_n, dict):
            raise SessionError(
                "models missing: body needs participant_model and normative_model documents"
            )
        try:
            pm = model_from_dict(doc_p)
            nm = model_from_dict(doc_n)
        except (KeyError, TypeError, ValueError) as exc:
            raise SessionError(f"malformed model document: {exc}") from exc
        seed = payload.get("seed")
        store.begin_evaluation(
            session, pm, nm, seed=None if seed is None else int(seed)
        )
        return store.display_slots_payload(session)

    @app.get("/sessions/{session_id}/slots")
    def list_slots(session_id: str):
        session = store.get_session(session_id)
        return store.display_slots_payload(session)

    @app.get("/slots/{slot_id}/frames")
    def slot_frames(
        slot_id: str,
        pos: float,
        view: str | None = None,
        fps: float = DISPLAY_FPS,
    ):
        if not (0.0 <= pos <= 1.0):
            raise SessionError(f"pos must lie in [0, 1], got {pos}")
        return store.frames_for_slot(slot_id, pos, view=view, fps=fps)

    @app.post("/slots/{slot_id}/selection")
    def record_selection(slot_id: str, payload: dict = Body(...)):
        if "pos" not in payload:
            raise SessionError("missing field 'pos'")
        pos = float(payload["pos"])
        if not (0.0 <= pos <= 1.0):
            raise SessionError(f"pos must lie in [0, 1], got {pos}")
        timestamp = payload.get("timestamp")
        session = store.record_selection_at(
            slot_id, pos, timestamp=None if timestamp is None else float(timestamp)
        )
        return _selection_ack(session, slot_id)

    @app.post("/participants/{participant_id}/confidence")
    def record_confidence(participant_id: str, payload: dict = Body(...)):
        for field in ("day", "rating"):
            if field not in payload:
                raise SessionError(f"missing field {field!r}")
        report = store.record_confidence(
            participant_id,
            int(payload["day"]),
            int(payload["rating"]),
            payload.get("free_text_cues", ()),
        )
        return {
            "participant_id": report.participant_id,
            "day": report.day,
            "rating": report.rating,
            "free_text_cues": list(report.free_text_cues),
        }

    @app.get("/participants/{participant_id}/report")
    def participant_report(participant_id: str):
        archive = store.export_report(participant_id)
        return Response(
            content=archive,
            media_type="application/zip",
            headers={
                "Content-Disposition": f'attachment; filename="{participant_id}.zip"'
            },
        )

    return app
