/**
 * Wire types mirroring the joke service's JSON exactly. The UI performs no
 * joke logic of its own: everything rendered is a field of these documents.
 */

export interface StageTraceRecord {
  stage: string;
  prompt_text: string;
  raw_completion: string;
  parsed_summary: string;
  attempts: number;
  elapsed_ms: number;
}

export interface AssociationListDoc {
  handle: string;
  items: string[];
}

export interface JokeResponseDoc {
  topic: string;
  handles: { first: string; second: string };
  associations: AssociationListDoc[];
  punchline: { text: string; chosen_a: string; chosen_b: string };
  joke_text: string;
  punchline_intact: boolean;
  trace?: StageTraceRecord[];
}

export interface HealthDoc {
  status: string;
  backend_kind: string;
  model_name: string;
}

export interface ErrorDoc {
  error: string;
  stage: string | null;
  message: string;
}
