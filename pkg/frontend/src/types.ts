export type SessionStatus = "running" | "converged" | "exhausted" | "failed";

export interface BestSoFar {
  artifact_id: string;
  score: number;
}

export interface IterationSummary {
  index: number;
  scores: number[];
  selected: number;
  best_so_far: BestSoFar;
}

export interface SessionSummary {
  id: string;
  created_at: string;
  status: SessionStatus;
  query: string;
  iterations: IterationSummary[];
  final_artifact: string | null;
  error: string | null;
  event_count: number;
}

export interface SessionConfig {
  candidates_per_iteration?: number;
  max_iterations?: number;
  score_threshold?: number;
  reward_origin?: "adaptive" | "static";
  generation_mode?: "iterative" | "one_shot";
  representation_mode?: "structured" | "natural_language";
}

export const DIMENSIONS = [
  "QIC",
  "TaskEff",
  "Usability",
  "Learnability",
  "IC",
  "ASA",
  "IES",
  "Overall",
] as const;

export type Dimension = (typeof DIMENSIONS)[number];
export type Choice = "Left" | "Right" | "Tie";
export const CHOICES: Choice[] = ["Left", "Right", "Tie"];

export interface AnnotationInstance {
  instanceId: string;
  queryId: string;
  left: string;
  right: string;
  leftArtifactUrl: string;
  rightArtifactUrl: string;
  annotatorId: string;
  /** Trap instances replace the panes with a verbatim instruction. */
  trapText?: string;
}

export interface JudgmentPayload {
  instance_id: string;
  query_id: string;
  left: string;
  right: string;
  annotator_id: string;
  choices: Record<Dimension, Choice>;
  comment: string;
}
