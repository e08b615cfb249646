/** The judging session: fetch a batch, submit answers one keystroke at a
 *  time, surface golden feedback instantly, advance to the next batch.
 *
 *  Submission is optimistic: a judgment that fails to send is queued and
 *  retried; the server's per-(task, rater) idempotence makes resends
 *  harmless, so no acknowledged judgment can be double-counted and no
 *  answered image is lost to a flaky connection.
 */

import type { AnnotationApi } from "./api.js";
import type {
  BatchView,
  FeedbackEvent,
  JudgmentPayload,
  RaterSummary,
} from "./types.js";

export type FlowEvent =
  | { kind: "batch"; batch: BatchView }
  | { kind: "focus"; index: number }
  | { kind: "submitted"; taskId: string; answer: boolean }
  | { kind: "feedback"; feedback: FeedbackEvent }
  | { kind: "queued"; taskId: string; queueLength: number }
  | { kind: "done"; summary: RaterSummary | null };

export interface FlowSnapshot {
  batch: BatchView | null;
  focusIndex: number;
  answers: ReadonlyMap<string, boolean>;
  queueLength: number;
  done: boolean;
  summary: RaterSummary | null;
}

export class JudgeFlow {
  private batch: BatchView | null = null;
  private focusIndex = 0;
  private focusedAt = 0;
  private answers = new Map<string, boolean>();
  private retryQueue: JudgmentPayload[] = [];
  private listeners: Array<(event: FlowEvent) => void> = [];
  private finished = false;
  private summary: RaterSummary | null = null;

  constructor(
    private readonly api: AnnotationApi,
    private readonly raterId: string,
    private readonly now: () => number = () => Date.now(),
  ) {}

  on(listener: (event: FlowEvent) => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(event: FlowEvent): void {
    for (const listener of this.listeners) listener(event);
  }

  snapshot(): FlowSnapshot {
    return {
      batch: this.batch,
      focusIndex: this.focusIndex,
      answers: this.answers,
      queueLength: this.retryQueue.length,
      done: this.finished,
      summary: this.summary,
    };
  }

  focusedTaskId(): string | null {
    const task = this.batch?.tasks[this.focusIndex];
    return task ? task.task_id : null;
  }

  async start(): Promise<void> {
    await this.advanceBatch();
  }

  private async advanceBatch(): Promise<void> {
    const next = await this.api.nextBatch(this.raterId);
    if (next.batch === null) {
      this.batch = null;
      this.finished = true;
      this.summary = await this.api.raterSummary(this.raterId);
      this.emit({ kind: "done", summary: this.summary });
      return;
    }
    this.batch = next.batch;
    this.answers = new Map();
    this.setFocus(this.firstUnjudged(0));
    this.emit({ kind: "batch", batch: next.batch });
  }

  private firstUnjudged(from: number): number {
    const tasks = this.batch?.tasks ?? [];
    for (let i = from; i < tasks.length; i += 1) {
      const task = tasks[i];
      if (task && !this.answers.has(task.task_id)) return i;
    }
    return tasks.length;
  }

  private setFocus(index: number): void {
    this.focusIndex = index;
    this.focusedAt = this.now();
    this.emit({ kind: "focus", index });
  }

  /** Answer the focused image. Resolves once the judgment is either
   *  acknowledged by the server or parked on the retry queue. */
  async judge(answer: boolean): Promise<void> {
    const batch = this.batch;
    const task = batch?.tasks[this.focusIndex];
    if (!batch || !task || this.answers.has(task.task_id)) return;
    const payload: JudgmentPayload = {
      task_id: task.task_id,
      rater_id: this.raterId,
      answer,
      elapsed_seconds: Math.max(0, (this.now() - this.focusedAt) / 1000),
    };
    this.answers.set(task.task_id, answer);
    await this.send(payload);
    this.emit({ kind: "submitted", taskId: task.task_id, answer });
    const next = this.firstUnjudged(this.focusIndex + 1);
    if (next < batch.tasks.length) {
      this.setFocus(next);
      return;
    }
    if (this.retryQueue.length === 0) {
      await this.advanceBatch();
    }
  }

  private async send(payload: JudgmentPayload): Promise<void> {
    try {
      const outcome = await this.api.submitJudgment(payload);
      if (!outcome.duplicate && outcome.response?.golden_feedback) {
        this.emit({
          kind: "feedback",
          feedback: {
            task_id: payload.task_id,
            correct: outcome.response.correct === true,
            revealed_answer: outcome.response.expected_answer === true,
          },
        });
      }
    } catch {
      this.retryQueue.push(payload);
      this.emit({ kind: "queued", taskId: payload.task_id, queueLength: this.retryQueue.length });
    }
  }

  /** Resend everything parked by network failures; returns what's left. */
  async retryPending(): Promise<number> {
    const queued = this.retryQueue;
    this.retryQueue = [];
    for (const payload of queued) {
      await this.send(payload);
    }
    if (
      this.retryQueue.length === 0 &&
      this.batch !== null &&
      this.firstUnjudged(0) >= this.batch.tasks.length
    ) {
      await this.advanceBatch();
    }
    return this.retryQueue.length;
  }

  /** Step focus back to the previous image for review. Acknowledged
   *  judgments are final (the server enforces one per task and rater),
   *  so undo re-focuses without re-opening the answer. */
  undo(): boolean {
    if (!this.batch || this.focusIndex === 0) return false;
    this.setFocus(this.focusIndex - 1);
    return true;
  }

  /** Step focus forward again past already-judged images. */
  redo(): void {
    if (!this.batch) return;
    this.setFocus(this.firstUnjudged(this.focusIndex + 1));
  }
}
