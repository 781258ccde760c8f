/**
 * Chat column: message bubbles, per-step map buttons, inline charts,
 * and the prompt form.
 */

import { ChartError, renderChart } from "./chart";
import type { ChatEntry } from "./types";

export interface ChatHandlers {
  onSubmit(prompt: string): void;
  onStep(stepId: string): void;
}

export class ChatPanel {
  private readonly messages: HTMLDivElement;
  private readonly input: HTMLInputElement;
  private readonly send: HTMLButtonElement;

  constructor(
    root: HTMLElement,
    private readonly handlers: ChatHandlers,
  ) {
    root.classList.add("chat-panel");
    this.messages = document.createElement("div");
    this.messages.className = "chat-messages";
    root.appendChild(this.messages);

    const form = document.createElement("form");
    form.className = "chat-form";
    this.input = document.createElement("input");
    this.input.className = "chat-input";
    this.input.type = "text";
    this.input.placeholder = "Ask about the map data";
    this.send = document.createElement("button");
    this.send.className = "chat-send";
    this.send.type = "submit";
    this.send.textContent = "Ask";
    form.appendChild(this.input);
    form.appendChild(this.send);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const prompt = this.input.value.trim();
      if (!prompt) return;
      this.input.value = "";
      this.handlers.onSubmit(prompt);
    });
    root.appendChild(form);
  }

  /** Fill the input without sending; used by the tutorial cards. */
  suggest(prompt: string): void {
    this.input.value = prompt;
    this.input.focus();
  }

  /** Rebuild the message list from the entries; render is stateless. */
  render(entries: ChatEntry[], pending: boolean): void {
    this.messages.textContent = "";
    for (const entry of entries) {
      this.messages.appendChild(this.bubble(entry));
    }
    if (pending) {
      const waiting = document.createElement("div");
      waiting.className = "msg msg-system msg-waiting";
      waiting.textContent = "Working on it…";
      this.messages.appendChild(waiting);
    }
    this.input.disabled = pending;
    this.send.disabled = pending;
    this.messages.scrollTop = this.messages.scrollHeight;
  }

  private bubble(entry: ChatEntry): HTMLDivElement {
    const bubble = document.createElement("div");
    bubble.className = entry.author === "user" ? "msg msg-user" : "msg msg-system";
    if (entry.tone === "error") {
      bubble.classList.add("msg-error");
    }
    const text = document.createElement("div");
    text.className = "msg-text";
    text.textContent = entry.text;
    bubble.appendChild(text);

    if (entry.steps && entry.steps.length > 0) {
      const list = document.createElement("div");
      list.className = "step-list";
      for (const step of entry.steps) {
        const button = document.createElement("button");
        button.className = "step-btn";
        button.type = "button";
        button.dataset.stepId = step.step_id;
        button.textContent = `${step.index}. ${step.description}`;
        button.addEventListener("click", () => this.handlers.onStep(step.step_id));
        list.appendChild(button);
      }
      bubble.appendChild(list);
    }

    if (entry.chart) {
      try {
        bubble.appendChild(renderChart(entry.chart));
      } catch (error) {
        if (!(error instanceof ChartError)) throw error;
        const note = document.createElement("div");
        note.className = "msg-error chart-invalid";
        note.textContent = `Could not draw the chart: ${error.message}`;
        bubble.appendChild(note);
      }
    }
    return bubble;
  }
}
