/**
 * Debounced frame fetching for the slider.
 *
 * Contract: however fast the participant scrubs, at most one frames
 * request is in flight at any time. Positions arriving while a request
 * is out are coalesced into a single follow-up for the newest value;
 * responses for positions the slider has already left are discarded.
 */

import type { FramesPayload } from "./schemas.js";

export const DEFAULT_DEBOUNCE_MS = 150;

type FetchFrames = (pos: number) => Promise<FramesPayload>;

export class FrameRequester {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inFlightPos: number | null = null;
  private latestPos: number | null = null;
  private disposed = false;

  constructor(
    private readonly fetchFrames: FetchFrames,
    private readonly onFrames: (payload: FramesPayload) => void,
    private readonly onError: (err: unknown) => void,
    private readonly debounceMs: number = DEFAULT_DEBOUNCE_MS,
  ) {}

  get inFlight(): boolean {
    return this.inFlightPos !== null;
  }

  /** Debounced: issues a request only after the slider rests. */
  request(pos: number): void {
    if (this.disposed) return;
    this.latestPos = pos;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.issueIfIdle();
    }, this.debounceMs);
  }

  /** Immediate: used for the first load of a slot and for retries. */
  requestNow(pos: number): void {
    if (this.disposed) return;
    this.latestPos = pos;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.issueIfIdle();
  }

  dispose(): void {
    this.disposed = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
  }

  private issueIfIdle(): void {
    if (this.inFlightPos !== null || this.latestPos === null || this.disposed) {
      return;
    }
    const pos = this.latestPos;
    this.inFlightPos = pos;
    this.fetchFrames(pos).then(
      (payload) => {
        this.inFlightPos = null;
        this.settle(pos, payload);
      },
      (err) => {
        this.inFlightPos = null;
        if (!this.disposed) this.onError(err);
      },
    );
  }

  private settle(pos: number, payload: FramesPayload): void {
    if (this.disposed) return;
    if (this.latestPos !== null && this.latestPos !== pos) {
      // The slider moved on while this request was out: the response
      // is stale, so drop it and chase the newest position instead.
      this.issueIfIdle();
      return;
    }
    this.onFrames(payload);
  }
}
