/**
 * Shapes of everything the display is allowed to receive.
 *
 * The service keeps the raw blend coefficient server-side; the display
 * works in normalized slider positions in [0, 1] only. Every payload
 * entering the client passes two gates:
 *
 *   1. assertNoCoefficientKeys: a recursive walk over the decoded JSON
 *      that rejects any object key mentioning the coefficient, at any
 *      depth, before the body is even parsed;
 *   2. a strict schema: unknown fields are errors, so a server that
 *      started leaking extra data fails loudly instead of silently.
 */

import { z } from "zod";

export const VIEW_NAMES = ["frontal", "robotic_45", "contralateral_45"] as const;
export type ViewName = (typeof VIEW_NAMES)[number];

export const N_DOTS = 15;
export const N_REPEATS = 6;

/** Raised when a client-bound payload mentions the blend coefficient. */
export class HiddenCoefficientViolation extends Error {
  constructor(
    readonly path: string,
    readonly key: string,
  ) {
    super(`payload key '${key}' at ${path} would expose the blend coefficient`);
  }
}

export function assertNoCoefficientKeys(value: unknown, path = "$"): void {
  if (Array.isArray(value)) {
    value.forEach((item, i) => assertNoCoefficientKeys(item, `${path}[${i}]`));
    return;
  }
  if (value !== null && typeof value === "object") {
    for (const [key, item] of Object.entries(value as Record<string, unknown>)) {
      if (key.toLowerCase().includes("alpha")) {
        throw new HiddenCoefficientViolation(`${path}.${key}`, key);
      }
      assertNoCoefficientKeys(item, `${path}.${key}`);
    }
  }
}

const unitInterval = z.number().min(0).max(1);

export const slotInfoSchema = z
  .object({
    slot_id: z.string().min(1),
    view: z.enum(VIEW_NAMES),
    repeat_index: z.number().int().min(1).max(N_REPEATS),
    initial_pos: unitInterval,
    pos_min: z.literal(0),
    pos_max: z.literal(1),
    status: z.enum(["open", "selected"]),
  })
  .strict();
export type SlotInfo = z.infer<typeof slotInfoSchema>;

export const slotsPayloadSchema = z
  .object({
    session_id: z.string().min(1),
    phase: z.string().min(1),
    slots: z.array(slotInfoSchema),
  })
  .strict();
export type SlotsPayload = z.infer<typeof slotsPayloadSchema>;

export const pointSchema = z.tuple([z.number(), z.number()]);

export const frameSchema = z
  .object({
    frame_index: z.number().int().min(0),
    points: z.array(pointSchema).length(N_DOTS),
  })
  .strict();
export type PointLightFrame = z.infer<typeof frameSchema>;

export const framesPayloadSchema = z
  .object({
    slot_id: z.string().min(1),
    view: z.enum(VIEW_NAMES),
    pos: unitInterval,
    fps: z.number().positive(),
    n_frames: z.number().int().positive(),
    frames: z.array(frameSchema).min(1),
  })
  .strict()
  .superRefine((val, ctx) => {
    if (val.frames.length !== val.n_frames) {
      ctx.addIssue({
        code: z.ZodIssueCode.custom,
        message: `frames length ${val.frames.length} != n_frames ${val.n_frames}`,
      });
    }
  });
export type FramesPayload = z.infer<typeof framesPayloadSchema>;

export const selectionAckSchema = z
  .object({
    slot_id: z.string().min(1),
    status: z.literal("selected"),
    session_id: z.string().min(1),
    phase: z.string().min(1),
    n_selected: z.number().int().min(0),
    n_slots: z.number().int().positive(),
  })
  .strict();
export type SelectionAck = z.infer<typeof selectionAckSchema>;

export const confidenceAckSchema = z
  .object({
    participant_id: z.string().min(1),
    day: z.number().int().min(1),
    rating: z.number().int().min(1).max(10),
    free_text_cues: z.array(z.string()),
  })
  .strict();
export type ConfidenceAck = z.infer<typeof confidenceAckSchema>;

export const errorBodySchema = z
  .object({
    error: z.object({ type: z.string(), message: z.string() }).strict(),
  })
  .strict();
export type ErrorBody = z.infer<typeof errorBodySchema>;
