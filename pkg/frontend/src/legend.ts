/**
 * Layer legend: one row per layer, click to toggle visibility.
 */

import type { RenderLayer } from "./state";

export class LegendPanel {
  constructor(
    private readonly root: HTMLElement,
    private readonly onToggle: (layerName: string) => void,
  ) {
    root.classList.add("legend");
  }

  render(plan: RenderLayer[]): void {
    this.root.textContent = "";
    for (const layer of plan) {
      const row = document.createElement("button");
      row.type = "button";
      row.className = layer.visible ? "legend-row" : "legend-row legend-off";
      row.dataset.layerName = layer.layer_name;
      const swatch = document.createElement("span");
      swatch.className = "legend-swatch";
      swatch.style.backgroundColor = layer.color;
      const label = document.createElement("span");
      label.className = "legend-label";
      label.textContent = `${layer.layer_name} (${layer.features.length})`;
      row.appendChild(swatch);
      row.appendChild(label);
      row.addEventListener("click", () => this.onToggle(layer.layer_name));
      this.root.appendChild(row);
    }
  }
}
