/**
 * Shared wire contract with the rating service.
 *
 * This file is the single description of the JSON the service speaks; the
 * client builds nothing beyond what these shapes carry. All optimization
 * state (scores, batches, means, best item) originates server-side.
 */

export type Mode = "mental-match" | "emotion";

/** Loop knobs forwarded verbatim to the service at session creation. */
export interface EngineConfig {
  batch_size?: number;
  max_iterations?: number;
  alpha?: number;
  beta?: number;
  top_k?: number;
  temperature?: number;
  normalize_rewards?: boolean;
  stop_threshold?: number | null;
}

/** One catalog item as presented for rating; payload is an asset URI. */
export interface BatchItem {
  item_id: string;
  payload: string | null;
}

export interface BestItem {
  item_id: string;
  payload: string | null;
  reward: number;
}

/** POST /sessions */
export interface CreateRequest {
  mode: Mode;
  corpus: string;
  seed: number;
  engine: EngineConfig;
}

export interface CreateResponse {
  session_id: string;
  mode: Mode;
  batch: BatchItem[];
  iteration: number;
  max_iterations: number;
}

/** POST /sessions/{id}/ratings — one value in [0, 1] per batch item. */
export interface RatingsRequest {
  ratings: Record<string, number>;
}

export interface RatingsResponse {
  done: boolean;
  iteration: number;
  mean_ratings: number[];
  batch?: BatchItem[];
  best_item?: BestItem;
}

/** GET /sessions/{id}/batch */
export interface BatchResponse {
  done: boolean;
  iteration: number;
  batch?: BatchItem[];
  best_item?: BestItem;
}

/** GET /sessions/{id}/state — enough to restore a reloaded client. */
export interface StateResponse {
  iteration: number;
  max_iterations: number;
  mean_ratings: number[];
  best_item: BestItem | null;
  entropy: number;
  done: boolean;
  mode: Mode;
}

/** Error body: {code, message} with stable codes. */
export interface ErrorBody {
  code: string;
  message: string;
}
