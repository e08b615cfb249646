/** Bootstrap: wire the API client, judge flow, keyboard, and renderer. */

import { AnnotationApi } from "./api.js";
import { JudgeFlow } from "./flow.js";
import { bindJudgeKeys } from "./keyboard.js";
import type { FeedbackEvent } from "./types.js";
import { render } from "./view.js";

function raterId(): string {
  const params = new URLSearchParams(window.location.search);
  const fromQuery = params.get("rater");
  if (fromQuery) {
    window.localStorage.setItem("webcurate-rater", fromQuery);
    return fromQuery;
  }
  const stored = window.localStorage.getItem("webcurate-rater");
  if (stored) return stored;
  const entered = window.prompt("Rater id:") || `rater-${Date.now()}`;
  window.localStorage.setItem("webcurate-rater", entered);
  return entered;
}

export function boot(root: HTMLElement, baseUrl = ""): JudgeFlow {
  const api = new AnnotationApi(baseUrl || window.location.origin);
  const flow = new JudgeFlow(api, raterId());
  let feedback: FeedbackEvent | null = null;

  const repaint = (): void => render(root, { snapshot: flow.snapshot(), feedback });

  flow.on((event) => {
    if (event.kind === "feedback") feedback = event.feedback;
    repaint();
  });

  const guarded = (action: () => void) => (): void => {
    if (feedback) {
      feedback = null; // any key dismisses the modal first
      repaint();
      return;
    }
    action();
  };
  bindJudgeKeys(window, {
    onYes: guarded(() => void flow.judge(true)),
    onNo: guarded(() => void flow.judge(false)),
    onUndo: guarded(() => flow.undo()),
  });

  window.setInterval(() => {
    if (flow.snapshot().queueLength > 0) void flow.retryPending();
  }, 3000);

  void flow.start();
  return flow;
}

declare global {
  interface Window {
    webcurateBoot?: typeof boot;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  window.webcurateBoot = boot;
  const root = document.getElementById("app");
  if (root) boot(root);
}
