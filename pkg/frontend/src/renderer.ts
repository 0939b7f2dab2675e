/**
 * Point-light walker rendering.
 *
 * Classic biological-motion presentation: 15 high-contrast dots on a
 * uniform background, no skeleton lines, constant dot size (radius 1%
 * of the viewport height). Frame payloads use a unit square with the
 * vertical axis pointing up; canvas y grows downward, so v is flipped
 * at draw time.
 *
 * The drawing target is the small Canvas2D interface below rather than
 * the full browser context: it has fills and arcs but no line
 * primitives, so a skeleton cannot be drawn by construction, and tests
 * can substitute a recording fake.
 */

import type { FramesPayload } from "./schemas.js";

export interface Canvas2D {
  fillStyle: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, radius: number, startAngle: number, endAngle: number): void;
  fill(): void;
}

export interface DrawSurface {
  width: number;
  height: number;
  ctx: Canvas2D;
}

export const BACKGROUND_COLOR = "#202020";
export const DOT_COLOR = "#f2f2f2";
export const DOT_RADIUS_FRACTION = 0.01; // of viewport height

export type RendererMode = "placeholder" | "animating";

interface Sequence {
  frames: [number, number][][];
  fps: number;
}

export class WalkerRenderer {
  private seq: Sequence | null = null;
  private pendingSeq: Sequence | null = null;
  private originMs: number | null = null;
  private lastIndex = 0;

  constructor(private readonly surface: DrawSurface) {}

  get mode(): RendererMode {
    return this.seq === null ? "placeholder" : "animating";
  }

  get frameCount(): number {
    return this.seq === null ? 0 : this.seq.frames.length;
  }

  get currentFrameIndex(): number {
    return this.lastIndex;
  }

  /**
   * Adopt a new frame sequence. While animating, a sequence of the
   * same length replaces the current one in place (the loop phase is
   * preserved, so scrubbing the slider never restarts the walk); a
   * sequence of a different length is held until the loop wraps.
   */
  setFrames(payload: FramesPayload): void {
    const next: Sequence = {
      frames: payload.frames.map((f) => f.points),
      fps: payload.fps,
    };
    if (next.frames.length === 0) return; // schema forbids this; keep animating
    if (this.seq === null) {
      this.seq = next;
      this.pendingSeq = null;
      this.originMs = null;
      this.lastIndex = 0;
      return;
    }
    if (next.frames.length === this.seq.frames.length) {
      this.seq = next;
      this.pendingSeq = null;
    } else {
      this.pendingSeq = next;
    }
  }

  /** Drop all frames and fall back to the placeholder background. */
  clear(): void {
    this.seq = null;
    this.pendingSeq = null;
    this.originMs = null;
    this.lastIndex = 0;
  }

  /**
   * Draw the frame for the given clock reading (milliseconds, as from
   * performance.now()). Returns the frame index drawn, or -1 when only
   * the placeholder background was painted.
   */
  tick(nowMs: number): number {
    if (this.seq === null) {
      this.drawBackground();
      return -1;
    }
    if (this.originMs === null) this.originMs = nowMs;
    const frameDur = 1000 / this.seq.fps;
    const n = this.seq.frames.length;
    let index = Math.floor((nowMs - this.originMs) / frameDur) % n;
    if (this.pendingSeq !== null && index < this.lastIndex) {
      // Loop boundary: adopt the deferred sequence from its first frame.
      this.seq = this.pendingSeq;
      this.pendingSeq = null;
      this.originMs = nowMs;
      index = 0;
    }
    this.lastIndex = index;
    this.drawFrame(this.seq.frames[index]!);
    return index;
  }

  private drawBackground(): void {
    const { width, height, ctx } = this.surface;
    ctx.fillStyle = BACKGROUND_COLOR;
    ctx.fillRect(0, 0, width, height);
  }

  private drawFrame(points: [number, number][]): void {
    this.drawBackground();
    const { width, height, ctx } = this.surface;
    const radius = DOT_RADIUS_FRACTION * height;
    ctx.fillStyle = DOT_COLOR;
    for (const [u, v] of points) {
      ctx.beginPath();
      ctx.arc(u * width, (1 - v) * height, radius, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}
