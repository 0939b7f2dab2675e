/**
 * Thin typed client for the session service.
 *
 * The display consumes the HTTP/JSON API exclusively: slot lists,
 * frame sequences at a slider position, selection submissions and the
 * end-of-day confidence rating. Every response body is screened for
 * coefficient leakage and then parsed against a strict schema before
 * any caller sees it.
 */

import {
  assertNoCoefficientKeys,
  confidenceAckSchema,
  errorBodySchema,
  framesPayloadSchema,
  selectionAckSchema,
  slotsPayloadSchema,
  type ConfidenceAck,
  type FramesPayload,
  type SelectionAck,
  type SlotsPayload,
  type ViewName,
} from "./schemas.js";

export interface HttpResponse {
  status: number;
  json(): Promise<unknown>;
}

export interface HttpRequestInit {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}

export type HttpFetch = (url: string, init?: HttpRequestInit) => Promise<HttpResponse>;

/** The service refused the request (4xx/5xx with a JSON error body). */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly errorType: string,
    message: string,
  ) {
    super(message);
  }
}

/** A precondition failed client-side; nothing was sent over the wire. */
export class ValidationError extends Error {}

const defaultFetch: HttpFetch = (url, init) => {
  const f = (globalThis as { fetch?: HttpFetch }).fetch;
  if (!f) {
    return Promise.reject(new Error("no fetch implementation available"));
  }
  return f(url, init);
};

export class DisplayApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: HttpFetch = defaultFetch,
  ) {}

  async listSlots(sessionId: string): Promise<SlotsPayload> {
    const body = await this.request(`/sessions/${encodeURIComponent(sessionId)}/slots`);
    return slotsPayloadSchema.parse(body);
  }

  async framesForSlot(
    slotId: string,
    pos: number,
    opts: { view?: ViewName; fps?: number } = {},
  ): Promise<FramesPayload> {
    requireUnitInterval(pos, "pos");
    let query = `pos=${encodeURIComponent(String(pos))}`;
    if (opts.view !== undefined) query += `&view=${encodeURIComponent(opts.view)}`;
    if (opts.fps !== undefined) query += `&fps=${encodeURIComponent(String(opts.fps))}`;
    const body = await this.request(
      `/slots/${encodeURIComponent(slotId)}/frames?${query}`,
    );
    return framesPayloadSchema.parse(body);
  }

  async submitSelection(slotId: string, pos: number): Promise<SelectionAck> {
    requireUnitInterval(pos, "pos");
    const body = await this.request(`/slots/${encodeURIComponent(slotId)}/selection`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ pos }),
    });
    return selectionAckSchema.parse(body);
  }

  async submitConfidence(
    participantId: string,
    day: number,
    rating: number,
    freeTextCues: string[] = [],
  ): Promise<ConfidenceAck> {
    if (!Number.isInteger(rating) || rating < 1 || rating > 10) {
      throw new ValidationError(`rating must be an integer in 1..10, got ${rating}`);
    }
    if (!Number.isInteger(day) || day < 1) {
      throw new ValidationError(`day must be a positive integer, got ${day}`);
    }
    const body = await this.request(
      `/participants/${encodeURIComponent(participantId)}/confidence`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ day, rating, free_text_cues: freeTextCues }),
      },
    );
    return confidenceAckSchema.parse(body);
  }

  /**
   * One round trip: fetch, decode, screen for coefficient keys, map
   * service errors to ApiError. Network failures reject as-is so the
   * caller can distinguish offline from refusal.
   */
  private async request(path: string, init?: HttpRequestInit): Promise<unknown> {
    const res = await this.fetchFn(this.baseUrl + path, init);
    const body: unknown = await res.json();
    assertNoCoefficientKeys(body);
    if (res.status >= 400) {
      const parsed = errorBodySchema.safeParse(body);
      if (parsed.success) {
        throw new ApiError(res.status, parsed.data.error.type, parsed.data.error.message);
      }
      throw new ApiError(res.status, "unknown", `unexpected error body (status ${res.status})`);
    }
    return body;
  }
}

function requireUnitInterval(value: number, name: string): void {
  if (!(Number.isFinite(value) && value >= 0 && value <= 1)) {
    throw new ValidationError(`${name} must lie in [0, 1], got ${value}`);
  }
}
