/**
 * Shared test fixtures: deterministic frame synthesis and an in-memory
 * fake of the session service speaking the same HTTP/JSON shapes.
 */

import type { HttpFetch, HttpRequestInit, HttpResponse } from "../src/api.js";
import { N_DOTS, N_REPEATS, VIEW_NAMES } from "../src/schemas.js";
import type { FramesPayload, ViewName } from "../src/schemas.js";

export function clamp01(x: number): number {
  return Math.min(1, Math.max(0, x));
}

/**
 * Frames that vary smoothly with the slider position so endpoint
 * sequences are visibly distinct, like the real renderer output.
 */
export function makeFrames(
  slotId: string,
  view: ViewName,
  pos: number,
  opts: { nFrames?: number; fps?: number } = {},
): FramesPayload {
  const nFrames = opts.nFrames ?? 100;
  const fps = opts.fps ?? 50;
  const frames = [];
  for (let k = 0; k < nFrames; k++) {
    const phase = (2 * Math.PI * k) / nFrames;
    const points: [number, number][] = [];
    for (let j = 0; j < N_DOTS; j++) {
      const swing = 0.15 + 0.2 * pos;
      const u = clamp01(0.5 + swing * Math.sin(phase + j));
      const v = clamp01(0.1 + (0.8 * j) / (N_DOTS - 1) + 0.05 * Math.cos(phase + j) * (1 - pos));
      points.push([u, v]);
    }
    frames.push({ frame_index: k, points });
  }
  return { slot_id: slotId, view, pos, fps, n_frames: nFrames, frames };
}

function jsonResponse(status: number, body: unknown): HttpResponse {
  return { status, json: () => Promise.resolve(body) };
}

function errorResponse(status: number, type: string, message: string): HttpResponse {
  return jsonResponse(status, { error: { type, message } });
}

interface FakeSlot {
  slot_id: string;
  view: ViewName;
  repeat_index: number;
  initial_pos: number;
}

/**
 * Minimal service double: one session, 18 slots in a shuffled but
 * fixed order (the real service randomizes per session), selections
 * recorded once each, frames synthesized per position. Set `offline`
 * to make every call reject the way a dead network would.
 */
export class FakeService {
  readonly sessionId: string;
  readonly slots: FakeSlot[] = [];
  readonly selected = new Set<string>();
  readonly selectionOrder: string[] = [];
  readonly confidence: { participant: string; day: number; rating: number }[] = [];
  readonly calls: string[] = [];
  readonly responses: unknown[] = [];
  offline = false;
  frameOpts: { nFrames?: number; fps?: number } = {};

  constructor(sessionId = "P01.d1.s1") {
    this.sessionId = sessionId;
    const pairs: [ViewName, number][] = [];
    for (const view of VIEW_NAMES) {
      for (let repeat = 1; repeat <= N_REPEATS; repeat++) pairs.push([view, repeat]);
    }
    // fixed shuffle, stands in for the service's seeded permutation
    const order = [7, 2, 16, 0, 11, 5, 13, 9, 4, 17, 1, 8, 15, 3, 10, 6, 14, 12];
    for (const idx of order) {
      const [view, repeat] = pairs[idx]!;
      this.slots.push({
        slot_id: `${sessionId}.${view}.r${repeat}`,
        view,
        repeat_index: repeat,
        initial_pos: ((idx * 37) % 19) / 18,
      });
    }
  }

  get fetch(): HttpFetch {
    return (url, init) => this.handle(url, init);
  }

  slotsPayload(): unknown {
    return {
      session_id: this.sessionId,
      phase: this.selected.size === this.slots.length ? "complete" : "evaluation",
      slots: this.slots.map((s) => ({
        slot_id: s.slot_id,
        view: s.view,
        repeat_index: s.repeat_index,
        initial_pos: s.initial_pos,
        pos_min: 0,
        pos_max: 1,
        status: this.selected.has(s.slot_id) ? "selected" : "open",
      })),
    };
  }

  protected framesBody(slot: FakeSlot, pos: number): unknown {
    return makeFrames(slot.slot_id, slot.view, pos, this.frameOpts);
  }

  private respond(url: string, init?: HttpRequestInit): HttpResponse {
    const method = init?.method ?? "GET";
    const [path, query = ""] = url.split("?", 2) as [string, string?];
    const params = new URLSearchParams(query);
    this.calls.push(`${method} ${path}`);

    let m = path.match(/^\/sessions\/([^/]+)\/slots$/);
    if (m && method === "GET") {
      if (decodeURIComponent(m[1]!) !== this.sessionId) {
        return errorResponse(404, "SessionError", `unknown session ${m[1]!}`);
      }
      return jsonResponse(200, this.slotsPayload());
    }

    m = path.match(/^\/slots\/([^/]+)\/frames$/);
    if (m && method === "GET") {
      const slotId = decodeURIComponent(m[1]!);
      const slot = this.slots.find((s) => s.slot_id === slotId);
      if (!slot) return errorResponse(404, "SessionError", `unknown slot ${slotId}`);
      const pos = Number(params.get("pos"));
      if (!(pos >= 0 && pos <= 1)) {
        return errorResponse(400, "SessionError", `pos must lie in [0, 1], got ${pos}`);
      }
      const view = params.get("view");
      if (view !== null && view !== slot.view) {
        return errorResponse(
          400,
          "SessionError",
          `slot ${slotId} shows view '${slot.view}', not '${view}'`,
        );
      }
      return jsonResponse(200, this.framesBody(slot, pos));
    }

    m = path.match(/^\/slots\/([^/]+)\/selection$/);
    if (m && method === "POST") {
      const slotId = decodeURIComponent(m[1]!);
      const slot = this.slots.find((s) => s.slot_id === slotId);
      if (!slot) return errorResponse(404, "SessionError", `unknown slot ${slotId}`);
      const body = JSON.parse(init?.body ?? "{}") as { pos?: number };
      const pos = Number(body.pos);
      if (!(pos >= 0 && pos <= 1)) {
        return errorResponse(400, "SessionError", `pos must lie in [0, 1], got ${pos}`);
      }
      if (this.selected.has(slotId)) {
        return errorResponse(400, "SessionError", `slot ${slotId} already selected`);
      }
      this.selected.add(slotId);
      this.selectionOrder.push(slotId);
      return jsonResponse(200, {
        slot_id: slotId,
        status: "selected",
        session_id: this.sessionId,
        phase: this.selected.size === this.slots.length ? "complete" : "evaluation",
        n_selected: this.selected.size,
        n_slots: this.slots.length,
      });
    }

    m = path.match(/^\/participants\/([^/]+)\/confidence$/);
    if (m && method === "POST") {
      const participant = decodeURIComponent(m[1]!);
      const body = JSON.parse(init?.body ?? "{}") as {
        day?: number;
        rating?: number;
        free_text_cues?: string[];
      };
      const day = Number(body.day);
      const rating = Number(body.rating);
      if (!Number.isInteger(rating) || rating < 1 || rating > 10) {
        return errorResponse(400, "SessionError", `rating must be 1..10, got ${rating}`);
      }
      this.confidence.push({ participant, day, rating });
      return jsonResponse(200, {
        participant_id: participant,
        day,
        rating,
        free_text_cues: body.free_text_cues ?? [],
      });
    }

    return errorResponse(404, "SessionError", `no route for ${method} ${path}`);
  }

  private async handle(url: string, init?: HttpRequestInit): Promise<HttpResponse> {
    if (this.offline) throw new TypeError("fetch failed");
    const res = this.respond(url, init);
    const body = await res.json();
    this.responses.push(body);
    return { status: res.status, json: () => Promise.resolve(body) };
  }
}

/** A service whose frame payloads leak the coefficient, for negative tests. */
export class LeakyFakeService extends FakeService {
  protected override framesBody(slot: FakeSlot, pos: number): unknown {
    const body = makeFrames(slot.slot_id, slot.view, pos, this.frameOpts) as unknown as Record<
      string,
      unknown
    >;
    return { ...body, alpha1: pos * 10 - 5 };
  }
}

/** Waits for pending macrotasks (0 ms timers) and promise chains. */
export function flush(ms = 5): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
