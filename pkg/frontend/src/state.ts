/**
 * UI state and the pure transitions that drive it.
 *
 * Every transition returns a fresh state; feature arrays are shared, never
 * copied, so toggling a layer cannot mutate feature data. Replaying the
 * same sequence of API responses and toggles reproduces the same state.
 */

import { DEFAULT_OPACITY, hashColor } from "./colors";
import type {
  ChatEntry,
  MapLayer,
  QueryResponse,
  StepResponse,
  WireLayer,
} from "./types";

export interface AppState {
  sessionId: string;
  entries: ChatEntry[];
  layers: MapLayer[];
  /** True while a request is in flight; the input stays locked. */
  pending: boolean;
}

export function initialState(sessionId: string): AppState {
  return { sessionId, entries: [], layers: [], pending: false };
}

/** Wrap wire layers for display: visible, with a stable legend color. */
export function layersFromWire(wire: WireLayer[]): MapLayer[] {
  return wire.map((layer) => ({
    layer_name: layer.layer_name,
    features: layer.features,
    visible: true,
    color: hashColor(layer.layer_name),
  }));
}

export function applyUserPrompt(state: AppState, prompt: string): AppState {
  const entry: ChatEntry = { author: "user", text: prompt };
  return { ...state, entries: [...state.entries, entry], pending: true };
}

export function applyQueryResponse(
  state: AppState,
  response: QueryResponse,
): AppState {
  const entry: ChatEntry = { author: "system", text: response.message };
  if (response.steps.length > 0) {
    entry.steps = response.steps;
  }
  if (response.kind === "chart" && response.chart) {
    entry.chart = response.chart;
  }
  if (response.kind === "error") {
    entry.tone = "error";
  }
  const layers =
    response.kind === "layers" ? layersFromWire(response.layers) : state.layers;
  return {
    ...state,
    entries: [...state.entries, entry],
    layers,
    pending: false,
  };
}

/** A step snapshot replaces whatever the map currently shows. */
export function applyStepResponse(
  state: AppState,
  response: StepResponse,
): AppState {
  const entry: ChatEntry = {
    author: "system",
    text: `Showing step: ${response.description}`,
  };
  return {
    ...state,
    entries: [...state.entries, entry],
    layers: layersFromWire(response.layers),
    pending: false,
  };
}

/** Inline failure bubble; layers stay put and the input unlocks. */
export function applyFailure(state: AppState, message: string): AppState {
  const entry: ChatEntry = { author: "system", text: message, tone: "error" };
  return { ...state, entries: [...state.entries, entry], pending: false };
}

/** Plain system bubble, e.g. an ingest report. */
export function applyNotice(state: AppState, message: string): AppState {
  const entry: ChatEntry = { author: "system", text: message };
  return { ...state, entries: [...state.entries, entry] };
}

/**
 * Flip one layer's visibility.
 *
 * Unknown names are a no-op, and so is an empty layer list. Other layers
 * are untouched; applying the same toggle twice restores the input state.
 */
export function toggleLayer(state: AppState, layerName: string): AppState {
  if (!state.layers.some((layer) => layer.layer_name === layerName)) {
    return state;
  }
  return {
    ...state,
    layers: state.layers.map((layer) =>
      layer.layer_name === layerName
        ? { ...layer, visible: !layer.visible }
        : layer,
    ),
  };
}

// ---------------------------------------------------------------------------
// Render plan
// ---------------------------------------------------------------------------

export interface RenderFeature {
  key: string;
  wkt: string;
  display_name: string;
  /** Per-entity color, a deterministic hash of the key. */
  color: string;
}

export interface RenderLayer {
  layer_name: string;
  color: string;
  visible: boolean;
  opacity: number;
  features: RenderFeature[];
}

/**
 * Project the layer state into exactly what gets drawn.
 *
 * The map adapter and the legend both consume this, and tests snapshot
 * it: two equal plans must render identically.
 */
export function renderPlan(layers: MapLayer[]): RenderLayer[] {
  return layers.map((layer) => ({
    layer_name: layer.layer_name,
    color: layer.color,
    visible: layer.visible,
    opacity: DEFAULT_OPACITY,
    features: layer.features.map((feature) => ({
      key: feature.key,
      wkt: feature.wkt,
      display_name: feature.display_name,
      color: hashColor(feature.key),
    })),
  }));
}
