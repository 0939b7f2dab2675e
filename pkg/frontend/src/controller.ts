/**
 * Evaluation flow: walks the participant through the service-scheduled
 * slots (3 views x 6 repeats), keeps the display state consistent, and
 * serializes submissions.
 *
 * The client holds no persistent state beyond an in-progress slot
 * cursor; the service's slot list is the source of truth for ordering,
 * so slots can be neither skipped nor repeated. Views are scheduled by
 * the service (each slot carries its view); the participant only moves
 * the slider and confirms.
 */

import { ApiError, DisplayApi, ValidationError } from "./api.js";
import { FrameRequester } from "./slider.js";
import { WalkerRenderer } from "./renderer.js";
import type { ConfidenceAck, FramesPayload, SlotInfo, ViewName } from "./schemas.js";

export type Phase = "idle" | "evaluating" | "complete";

export interface DisplayState {
  currentView: ViewName | null;
  sliderPos: number;
  frames: FramesPayload | null;
  repeatIndex: number;
  pendingSlots: SlotInfo[];
  phase: Phase;
  banner: string | null;
  submitEnabled: boolean;
}

export interface SlotCursorStore {
  load(sessionId: string): string | null;
  save(sessionId: string, slotId: string | null): void;
}

export class MemoryCursorStore implements SlotCursorStore {
  private cursors = new Map<string, string>();

  load(sessionId: string): string | null {
    return this.cursors.get(sessionId) ?? null;
  }

  save(sessionId: string, slotId: string | null): void {
    if (slotId === null) this.cursors.delete(sessionId);
    else this.cursors.set(sessionId, slotId);
  }
}

export interface ControllerOptions {
  cursor?: SlotCursorStore;
  debounceMs?: number;
  onChange?: (state: DisplayState) => void;
}

export const OFFLINE_BANNER = "Connection lost. Showing the last loaded walker.";
export const SUBMIT_FAILED_BANNER =
  "Could not save the selection. Check the connection and retry.";

export class EvaluationController {
  readonly state: DisplayState = {
    currentView: null,
    sliderPos: 0,
    frames: null,
    repeatIndex: 0,
    pendingSlots: [],
    phase: "idle",
    banner: null,
    submitEnabled: false,
  };

  private sessionId: string | null = null;
  private current: SlotInfo | null = null;
  private submitting = false;
  private readonly requester: FrameRequester;
  private readonly cursor: SlotCursorStore;
  private readonly onChange: (state: DisplayState) => void;
  private readonly confidenceDays = new Set<number>();

  constructor(
    private readonly api: DisplayApi,
    private readonly renderer: WalkerRenderer,
    opts: ControllerOptions = {},
  ) {
    this.cursor = opts.cursor ?? new MemoryCursorStore();
    this.onChange = opts.onChange ?? (() => {});
    this.requester = new FrameRequester(
      (pos) => this.fetchFrames(pos),
      (payload) => this.acceptFrames(payload),
      (err) => this.frameError(err),
      opts.debounceMs,
    );
  }

  get currentSlot(): SlotInfo | null {
    return this.current;
  }

  /** Load the slot plan and activate the first open slot. */
  async start(sessionId: string): Promise<void> {
    const payload = await this.api.listSlots(sessionId);
    this.sessionId = sessionId;
    const open = payload.slots.filter((s) => s.status === "open");
    this.state.pendingSlots = open;
    if (open.length === 0) {
      this.finish();
      return;
    }
    // The saved cursor is a resume hint only; the service plan decides.
    const saved = this.cursor.load(sessionId);
    const first = open[0]!;
    if (saved !== null && saved !== first.slot_id) {
      this.cursor.save(sessionId, first.slot_id);
    }
    this.state.phase = "evaluating";
    this.activateSlot(first);
  }

  /** Slider input: clamp-free, the control itself is bounded to [0, 1]. */
  onSliderChange(pos: number): void {
    if (this.current === null) return;
    if (!(Number.isFinite(pos) && pos >= 0 && pos <= 1)) {
      throw new ValidationError(`slider position must lie in [0, 1], got ${pos}`);
    }
    this.state.sliderPos = pos;
    this.requester.request(pos);
    this.emit();
  }

  /** Re-request frames at the current position (banner retry button). */
  retry(): void {
    if (this.current === null) return;
    this.requester.requestNow(this.state.sliderPos);
  }

  /**
   * Confirm the current slot at the current slider position, then
   * advance to the next slot in the service plan. Guarded by slot id:
   * a second call while one is pending, or after the slot closed, is a
   * no-op.
   */
  async submitSelection(): Promise<void> {
    if (this.current === null || this.submitting || !this.state.submitEnabled) {
      return;
    }
    const slot = this.current;
    this.submitting = true;
    try {
      const ack = await this.api.submitSelection(slot.slot_id, this.state.sliderPos);
      if (ack.slot_id === slot.slot_id) {
        this.advancePast(slot);
      }
    } catch (err) {
      if (err instanceof ApiError) {
        // Refused by the protocol (for example a retried submit whose
        // first ack was lost): the service state wins, so resync.
        await this.resync();
      } else {
        this.state.banner = SUBMIT_FAILED_BANNER;
        this.state.submitEnabled = false;
      }
    } finally {
      this.submitting = false;
      this.emit();
    }
  }

  /** End-of-day confidence rating; validated client-side, once per day. */
  async submitConfidence(
    participantId: string,
    day: number,
    rating: number,
    freeTextCues: string[] = [],
  ): Promise<ConfidenceAck> {
    if (this.confidenceDays.has(day)) {
      throw new ValidationError(`confidence for day ${day} already submitted`);
    }
    const ack = await this.api.submitConfidence(participantId, day, rating, freeTextCues);
    this.confidenceDays.add(day);
    return ack;
  }

  dispose(): void {
    this.requester.dispose();
  }

  private fetchFrames(pos: number): Promise<FramesPayload> {
    const slot = this.current;
    if (slot === null) {
      return Promise.reject(new ValidationError("no active slot"));
    }
    return this.api.framesForSlot(slot.slot_id, pos, { view: slot.view });
  }

  private activateSlot(slot: SlotInfo): void {
    this.current = slot;
    this.state.currentView = slot.view;
    this.state.repeatIndex = slot.repeat_index;
    this.state.sliderPos = slot.initial_pos;
    this.state.frames = null;
    this.state.submitEnabled = false;
    if (this.sessionId !== null) this.cursor.save(this.sessionId, slot.slot_id);
    this.requester.requestNow(slot.initial_pos);
    this.emit();
  }

  private acceptFrames(payload: FramesPayload): void {
    if (this.current === null || payload.slot_id !== this.current.slot_id) {
      return; // late response from a slot that already closed
    }
    this.state.frames = payload;
    this.state.banner = null;
    this.state.submitEnabled = true;
    this.renderer.setFrames(payload);
    this.emit();
  }

  private frameError(_err: unknown): void {
    // Keep whatever walker is on screen, flag it as stale, and block
    // submissions until a retry succeeds.
    this.state.banner = OFFLINE_BANNER;
    this.state.submitEnabled = false;
    this.emit();
  }

  private advancePast(slot: SlotInfo): void {
    this.state.pendingSlots = this.state.pendingSlots.filter(
      (s) => s.slot_id !== slot.slot_id,
    );
    const next = this.state.pendingSlots[0];
    if (next === undefined) {
      this.finish();
    } else {
      this.activateSlot(next);
    }
  }

  private async resync(): Promise<void> {
    if (this.sessionId === null) return;
    const payload = await this.api.listSlots(this.sessionId);
    const open = payload.slots.filter((s) => s.status === "open");
    this.state.pendingSlots = open;
    const next = open[0];
    if (next === undefined) this.finish();
    else this.activateSlot(next);
  }

  private finish(): void {
    this.current = null;
    this.state.phase = "complete";
    this.state.currentView = null;
    this.state.frames = null;
    this.state.submitEnabled = false;
    this.state.banner = null;
    if (this.sessionId !== null) this.cursor.save(this.sessionId, null);
    this.renderer.clear();
    this.emit();
  }

  private emit(): void {
    this.onChange(this.state);
  }
}
