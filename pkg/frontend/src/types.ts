/**
 * Wire types for the query service plus the UI-side layer model.
 *
 * The wire shapes mirror the JSON bodies of /api/query and /api/steps/{id}
 * field for field; nothing here is invented on the client.
 */

// ---------------------------------------------------------------------------
// Wire types
// ---------------------------------------------------------------------------

export interface LayerFeature {
  /** Encoded entity key, e.g. "buildings_building_Krone-Villa_153292452". */
  key: string;
  /** Geometry in WKT, longitude first. */
  wkt: string;
  /** Name shown on hover. */
  display_name: string;
}

export interface WireLayer {
  layer_name: string;
  features: LayerFeature[];
}

export interface StepRef {
  index: number;
  description: string;
  step_id: string;
}

export interface ChartSpec {
  version: number;
  kind: string;
  bin_edges: number[];
  counts: number[];
  title: string;
  x_label: string;
  /** Optional declared sample size; when present the client recounts. */
  sample_size?: number;
}

export interface TokenUsage {
  input_tokens: number;
  output_tokens: number;
}

export type AnswerKind = "layers" | "text" | "chart" | "error";

export interface QueryResponse {
  kind: AnswerKind;
  message: string;
  steps: StepRef[];
  layers: WireLayer[];
  chart: ChartSpec | null;
  usage: TokenUsage;
}

export interface StepResponse {
  step_id: string;
  description: string;
  layers: WireLayer[];
}

// ---------------------------------------------------------------------------
// UI-side model
// ---------------------------------------------------------------------------

/** A wire layer plus the client state the map needs to draw it. */
export interface MapLayer {
  layer_name: string;
  features: LayerFeature[];
  visible: boolean;
  /** Legend swatch color, a deterministic hash of the layer name. */
  color: string;
}

/** One bubble in the chat column. */
export interface ChatEntry {
  author: "user" | "system";
  text: string;
  steps?: StepRef[];
  chart?: ChartSpec;
  /** Styling hint for failures; never affects layer or step state. */
  tone?: "error";
}
