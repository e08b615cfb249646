/** Shapes of the annotation API payloads (see docs/api.md in the repo root). */

export interface TaskView {
  task_id: string;
  image_id: string;
  url: string;
}

export interface ThumbView {
  image_id: string;
  url: string;
}

export interface NegativeView extends ThumbView {
  class_id: string;
  class_name: string;
}

export interface BatchView {
  batch_id: number;
  class_id: string;
  class_name: string;
  tasks: TaskView[];
  positives: ThumbView[];
  negatives: NegativeView[];
}

export interface NextBatchResponse {
  batch: BatchView | null;
  done: boolean;
}

export interface JudgmentPayload {
  task_id: string;
  rater_id: string;
  answer: boolean;
  elapsed_seconds: number;
}

export interface SubmitResponse {
  recorded: boolean;
  task_id: string;
  rater_id: string;
  golden_feedback: boolean;
  correct: boolean | null;
  expected_answer: boolean | null;
}

export interface RaterSummary {
  rater_id: string;
  golden_seen: number;
  golden_correct: number;
  error_rate: number | null;
  mean_seconds_per_image: number | null;
  judgments: number;
}

/** Shown the instant a golden task comes back marked wrong (or right). */
export interface FeedbackEvent {
  task_id: string;
  correct: boolean;
  revealed_answer: boolean;
}
