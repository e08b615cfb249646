/** DOM rendering: a pure projection of the flow snapshot plus any open
 *  feedback modal. Golden status never reaches the client, so nothing
 *  here can leak it; the modal appears only after the server's own
 *  feedback response. */

import type { FlowSnapshot } from "./flow.js";
import type { BatchView, FeedbackEvent, RaterSummary } from "./types.js";

export const DEFAULT_SEARCH_TEMPLATE = "https://www.google.com/search?tbm=isch&q={query}";

export function researchUrl(className: string, template = DEFAULT_SEARCH_TEMPLATE): string {
  return template.replace("{query}", encodeURIComponent(className));
}

export interface ViewState {
  snapshot: FlowSnapshot;
  feedback: FeedbackEvent | null;
  searchTemplate?: string;
}

function el(
  doc: Document,
  tag: string,
  className: string,
  text?: string,
): HTMLElement {
  const node = doc.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function thumb(doc: Document, url: string, imageId: string, label?: string): HTMLElement {
  const cell = el(doc, "figure", "thumb");
  const img = doc.createElement("img");
  img.src = url || "";
  img.alt = imageId;
  img.loading = "lazy";
  cell.appendChild(img);
  if (label) cell.appendChild(el(doc, "figcaption", "thumb-label", label));
  return cell;
}

function renderInstructionPanels(doc: Document, batch: BatchView, template?: string): HTMLElement {
  const aside = el(doc, "aside", "instructions");
  const positives = el(doc, "section", "panel positives");
  positives.appendChild(el(doc, "h2", "panel-title", `Examples of ${batch.class_name}`));
  for (const p of batch.positives) positives.appendChild(thumb(doc, p.url, p.image_id));
  aside.appendChild(positives);

  const negatives = el(doc, "section", "panel negatives");
  negatives.appendChild(el(doc, "h2", "panel-title", "Easily confused (NOT this class)"));
  for (const n of batch.negatives) {
    negatives.appendChild(thumb(doc, n.url, n.image_id, n.class_name));
  }
  aside.appendChild(negatives);

  const link = doc.createElement("a");
  link.className = "research-link";
  link.href = researchUrl(batch.class_name, template);
  link.target = "_blank";
  link.rel = "noopener";
  link.textContent = `Research "${batch.class_name}"`;
  aside.appendChild(link);
  return aside;
}

function renderGrid(doc: Document, state: ViewState): HTMLElement {
  const { snapshot } = state;
  const batch = snapshot.batch as BatchView;
  const grid = el(doc, "section", "grid");
  batch.tasks.forEach((task, index) => {
    const cell = thumb(doc, task.url, task.image_id);
    cell.classList.add("task");
    cell.dataset["taskId"] = task.task_id;
    if (index === snapshot.focusIndex) cell.classList.add("focused");
    const answer = snapshot.answers.get(task.task_id);
    if (answer !== undefined) {
      cell.classList.add(answer ? "judged-yes" : "judged-no");
      cell.appendChild(el(doc, "span", "badge", answer ? "yes" : "no"));
    }
    grid.appendChild(cell);
  });
  return grid;
}

function renderFeedbackModal(doc: Document, feedback: FeedbackEvent): HTMLElement {
  const overlay = el(doc, "div", "modal-overlay");
  const modal = el(doc, "div", feedback.correct ? "modal correct" : "modal incorrect");
  modal.appendChild(el(doc, "h2", "modal-title",
    feedback.correct ? "Correct" : "Incorrect"));
  modal.appendChild(el(doc, "p", "modal-body",
    feedback.correct
      ? "That judgment matched the known answer."
      : `The known answer for that image is "${feedback.revealed_answer ? "yes" : "no"}".`));
  modal.appendChild(el(doc, "p", "modal-hint", "Press any key to continue."));
  overlay.appendChild(modal);
  return overlay;
}

function renderSummary(doc: Document, summary: RaterSummary | null): HTMLElement {
  const section = el(doc, "section", "summary");
  section.appendChild(el(doc, "h2", "panel-title", "All batches complete"));
  if (summary) {
    const rate = summary.error_rate === null ? "n/a" : `${(summary.error_rate * 100).toFixed(1)}%`;
    const speed = summary.mean_seconds_per_image === null
      ? "n/a"
      : `${summary.mean_seconds_per_image.toFixed(2)}s`;
    section.appendChild(el(doc, "p", "summary-line",
      `${summary.judgments} judgments, golden error rate ${rate}, ${speed} per image.`));
  } else {
    section.appendChild(el(doc, "p", "summary-line", "No judgments recorded."));
  }
  return section;
}

export function render(root: HTMLElement, state: ViewState): void {
  const doc = root.ownerDocument;
  root.textContent = "";
  const { snapshot } = state;

  if (snapshot.done || !snapshot.batch) {
    root.appendChild(renderSummary(doc, snapshot.summary));
    return;
  }

  const header = el(doc, "header", "header");
  header.appendChild(el(doc, "h1", "class-title",
    `Is each image a ${snapshot.batch.class_name}?`));
  header.appendChild(el(doc, "p", "key-hint",
    "y = yes, n = no, u = back. Answers submit immediately."));
  if (snapshot.queueLength > 0) {
    header.appendChild(el(doc, "p", "queue-warning",
      `${snapshot.queueLength} judgment(s) waiting to resend...`));
  }
  root.appendChild(header);

  const layout = el(doc, "main", "layout");
  layout.appendChild(renderInstructionPanels(doc, snapshot.batch, state.searchTemplate));
  layout.appendChild(renderGrid(doc, state));
  root.appendChild(layout);

  if (state.feedback) {
    root.appendChild(renderFeedbackModal(doc, state.feedback));
  }
}
