/**
 * Application core: owns the state, talks to the API, and pushes
 * render plans to the chat, legend, and map.
 */

import { ApiClient, ApiError } from "./api";
import { ChatPanel } from "./chat";
import { LegendPanel } from "./legend";
import type { MapView } from "./map";
import {
  applyFailure,
  applyNotice,
  applyQueryResponse,
  applyStepResponse,
  applyUserPrompt,
  initialState,
  renderPlan,
  toggleLayer,
  type AppState,
  type RenderLayer,
} from "./state";

export interface AppOptions {
  api: ApiClient;
  map: MapView;
  chatRoot: HTMLElement;
  legendRoot: HTMLElement;
  sessionId?: string;
}

function failureText(error: unknown): string {
  if (error instanceof ApiError) {
    return `The server answered ${error.status}: ${error.message}`;
  }
  if (error instanceof Error) {
    return `Could not reach the server: ${error.message}`;
  }
  return "Could not reach the server.";
}

export class App {
  private state: AppState;
  private readonly api: ApiClient;
  private readonly map: MapView;
  private readonly chat: ChatPanel;
  private readonly legend: LegendPanel;

  constructor(options: AppOptions) {
    this.api = options.api;
    this.map = options.map;
    this.state = initialState(options.sessionId ?? `web-${Date.now()}`);
    this.chat = new ChatPanel(options.chatRoot, {
      onSubmit: (prompt) => void this.submitQuery(prompt),
      onStep: (stepId) => void this.showStep(stepId),
    });
    this.legend = new LegendPanel(options.legendRoot, (name) =>
      this.toggleLayer(name),
    );
    this.render();
  }

  /** Put a prompt in the input without sending it. */
  suggest(prompt: string): void {
    this.chat.suggest(prompt);
  }

  /**
   * Send one prompt. At most one request is in flight: further submits
   * are dropped until the answer (or failure) lands.
   */
  async submitQuery(prompt: string): Promise<void> {
    if (this.state.pending || !prompt.trim()) return;
    this.state = applyUserPrompt(this.state, prompt);
    this.render();
    try {
      const response = await this.api.submitQuery(prompt, this.state.sessionId);
      this.state = applyQueryResponse(this.state, response);
    } catch (error) {
      this.state = applyFailure(this.state, failureText(error));
    }
    this.render();
  }

  /** Fetch a step snapshot and replace the displayed layers with it. */
  async showStep(stepId: string): Promise<void> {
    if (this.state.pending) return;
    this.state = { ...this.state, pending: true };
    this.render();
    try {
      const response = await this.api.fetchStep(stepId);
      this.state = applyStepResponse(this.state, response);
    } catch (error) {
      this.state = applyFailure(this.state, failureText(error));
    }
    this.render();
  }

  toggleLayer(layerName: string): void {
    this.state = toggleLayer(this.state, layerName);
    this.render();
  }

  /** Append a plain system message, e.g. after a dataset upload. */
  notice(text: string): void {
    this.state = applyNotice(this.state, text);
    this.render();
  }

  /** Append an inline error bubble. */
  fail(text: string): void {
    this.state = applyFailure(this.state, text);
    this.render();
  }

  /** The current render plan; equal plans draw identical maps. */
  plan(): RenderLayer[] {
    return renderPlan(this.state.layers);
  }

  /** Serialized render plan for replay comparisons. */
  snapshot(): string {
    return JSON.stringify(this.plan());
  }

  private render(): void {
    this.chat.render(this.state.entries, this.state.pending);
    const plan = this.plan();
    this.legend.render(plan);
    this.map.setLayers(plan);
  }
}
