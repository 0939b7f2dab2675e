/**
 * Browser entry point. Everything interesting lives in the controller,
 * renderer and API client; this file only builds DOM, wires events and
 * runs the animation loop.
 *
 * Viewport assumption: the protocol was designed for a desktop monitor
 * (roughly 27 inch) at arm's length. The canvas fills the window and
 * the dot radius is 1% of its height, so smaller screens shrink the
 * stimulus proportionally rather than reflowing it.
 *
 * Query parameters:
 *   session      session id whose evaluation is in progress (required)
 *   participant  participant id, enables the confidence form
 *   day          protocol day for the confidence rating
 *   api          service base URL (default: same origin)
 */

import { DisplayApi } from "./api.js";
import { EvaluationController, type DisplayState, type SlotCursorStore } from "./controller.js";
import { WalkerRenderer, type DrawSurface } from "./renderer.js";
import { N_REPEATS, VIEW_NAMES } from "./schemas.js";

const SLIDER_STEPS = 1000;

class LocalStorageCursor implements SlotCursorStore {
  load(sessionId: string): string | null {
    try {
      return window.localStorage.getItem(`slot-cursor:${sessionId}`);
    } catch {
      return null;
    }
  }

  save(sessionId: string, slotId: string | null): void {
    try {
      if (slotId === null) window.localStorage.removeItem(`slot-cursor:${sessionId}`);
      else window.localStorage.setItem(`slot-cursor:${sessionId}`, slotId);
    } catch {
      // private-mode storage failures degrade to no resume hint
    }
  }
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  style: Partial<CSSStyleDeclaration> = {},
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  Object.assign(node.style, style);
  return node;
}

function buildPage() {
  document.body.style.margin = "0";
  document.body.style.background = "#101010";
  document.body.style.color = "#e8e8e8";
  document.body.style.fontFamily = "system-ui, sans-serif";

  const stage = el("div", {
    display: "flex",
    flexDirection: "column",
    alignItems: "center",
    gap: "12px",
    padding: "12px",
  });
  const banner = el("div", {
    minHeight: "1.4em",
    color: "#ffb347",
    display: "flex",
    gap: "12px",
    alignItems: "center",
  });
  const bannerText = el("span");
  const retryBtn = el("button");
  retryBtn.textContent = "Retry";
  retryBtn.style.display = "none";
  banner.append(bannerText, retryBtn);

  const canvas = el("canvas", { background: "#202020" });
  canvas.width = Math.floor(window.innerWidth * 0.9);
  canvas.height = Math.floor(window.innerHeight * 0.72);

  const progress = el("div", { fontSize: "0.9em", opacity: "0.8" });

  const slider = el("input", { width: "60%" }) as HTMLInputElement;
  slider.type = "range";
  slider.min = "0";
  slider.max = String(SLIDER_STEPS);
  slider.step = "1";

  const confirm = el("button", { fontSize: "1.1em", padding: "6px 24px" });
  confirm.textContent = "This walk feels like me";

  const done = el("div", { display: "none", textAlign: "center", marginTop: "20vh" });
  const doneHead = el("h1");
  doneHead.textContent = "Evaluation complete";
  const doneText = el("p");
  doneText.textContent = "All selections are saved. Thank you.";
  done.append(doneHead, doneText);

  stage.append(banner, canvas, progress, slider, confirm);
  document.body.append(stage, done);
  return { stage, banner, bannerText, retryBtn, canvas, progress, slider, confirm, done };
}

function buildConfidenceForm(
  controller: EvaluationController,
  participantId: string,
  day: number,
  host: HTMLElement,
) {
  const form = el("div", { marginTop: "24px" });
  const label = el("div");
  label.textContent =
    "How confident are you that the walker you selected shows your own walk? (1 = not at all, 10 = completely)";
  const row = el("div", { display: "flex", gap: "6px", justifyContent: "center", marginTop: "8px" });
  const status = el("div", { marginTop: "8px", opacity: "0.8" });
  for (let rating = 1; rating <= 10; rating++) {
    const btn = el("button", { padding: "6px 10px" });
    btn.textContent = String(rating);
    btn.addEventListener("click", () => {
      controller
        .submitConfidence(participantId, day, rating)
        .then(() => {
          status.textContent = `Saved: ${rating}/10.`;
          row.querySelectorAll("button").forEach((b) => (b.disabled = true));
        })
        .catch((err: unknown) => {
          status.textContent = err instanceof Error ? err.message : String(err);
        });
    });
    row.append(btn);
  }
  form.append(label, row, status);
  host.append(form);
}

function main(): void {
  const params = new URLSearchParams(window.location.search);
  const sessionId = params.get("session");
  const participantId = params.get("participant");
  const day = Number(params.get("day") ?? "1");
  const base = params.get("api") ?? "";

  const ui = buildPage();
  if (sessionId === null) {
    ui.bannerText.textContent = "Missing ?session= query parameter.";
    return;
  }

  const surface: DrawSurface = {
    get width() {
      return ui.canvas.width;
    },
    get height() {
      return ui.canvas.height;
    },
    ctx: ui.canvas.getContext("2d") as unknown as DrawSurface["ctx"],
  };
  const renderer = new WalkerRenderer(surface);
  const api = new DisplayApi(base);

  const render = (state: DisplayState) => {
    ui.bannerText.textContent = state.banner ?? "";
    ui.retryBtn.style.display = state.banner === null ? "none" : "inline-block";
    ui.confirm.disabled = !state.submitEnabled;
    ui.slider.disabled = state.phase !== "evaluating";
    if (state.phase === "evaluating") {
      const total = VIEW_NAMES.length * N_REPEATS;
      const doneCount = total - state.pendingSlots.length;
      ui.progress.textContent = `Selection ${doneCount + 1} of ${total}`;
      ui.slider.value = String(Math.round(state.sliderPos * SLIDER_STEPS));
    }
    if (state.phase === "complete") {
      ui.stage.style.display = "none";
      ui.done.style.display = "block";
      if (participantId !== null && ui.done.childElementCount <= 2) {
        buildConfidenceForm(controller, participantId, day, ui.done);
      }
    }
  };

  const controller = new EvaluationController(api, renderer, {
    cursor: new LocalStorageCursor(),
    onChange: render,
  });

  ui.slider.addEventListener("input", () => {
    controller.onSliderChange(Number(ui.slider.value) / SLIDER_STEPS);
  });
  ui.confirm.addEventListener("click", () => {
    void controller.submitSelection();
  });
  ui.retryBtn.addEventListener("click", () => controller.retry());

  const loop = (t: number) => {
    renderer.tick(t);
    window.requestAnimationFrame(loop);
  };
  window.requestAnimationFrame(loop);

  controller.start(sessionId).catch((err: unknown) => {
    ui.bannerText.textContent = `Could not load the session: ${
      err instanceof Error ? err.message : String(err)
    }`;
    ui.retryBtn.style.display = "inline-block";
    ui.retryBtn.onclick = () => window.location.reload();
  });
}

main();
