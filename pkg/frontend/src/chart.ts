/**
 * Histogram rendering for chart answers.
 *
 * The server sends a declarative spec (bin edges plus counts); the client
 * draws it as an inline SVG sized to the chat column. No code or markup
 * from the server is ever executed or injected.
 */

import type { ChartSpec } from "./types";

export class ChartError extends Error {}

/** Reject anything that cannot be drawn as a histogram. */
export function checkSpec(spec: ChartSpec): void {
  if (spec.kind !== "histogram") {
    throw new ChartError(`unsupported chart kind: ${spec.kind}`);
  }
  if (!Array.isArray(spec.bin_edges) || !Array.isArray(spec.counts)) {
    throw new ChartError("bin_edges and counts must be arrays");
  }
  if (spec.bin_edges.length < 2) {
    throw new ChartError("a histogram needs at least two bin edges");
  }
  if (spec.counts.length !== spec.bin_edges.length - 1) {
    throw new ChartError("counts length must be bin_edges length - 1");
  }
  for (let i = 1; i < spec.bin_edges.length; i++) {
    if (!(spec.bin_edges[i] > spec.bin_edges[i - 1])) {
      throw new ChartError("bin edges must ascend");
    }
  }
  if (spec.counts.some((c) => !Number.isFinite(c) || c < 0)) {
    throw new ChartError("counts must be non-negative numbers");
  }
}

function svgElement<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string>,
): SVGElementTagNameMap[K] {
  const el = document.createElementNS("http://www.w3.org/2000/svg", tag);
  for (const [name, value] of Object.entries(attrs)) {
    el.setAttribute(name, value);
  }
  return el;
}

function formatEdge(value: number): string {
  if (Number.isInteger(value)) return String(value);
  return value.toPrecision(4);
}

/**
 * Render the spec into a chart box.
 *
 * Width is clamped to `maxWidth` so the chart always fits the chat
 * column. Bars keep the bin proportions: a single-bin spec produces one
 * bar spanning the whole range. When the spec declares a sample size
 * that disagrees with the recounted bar total, the chart still renders
 * but carries a warning badge.
 */
export function renderChart(spec: ChartSpec, maxWidth = 360): HTMLElement {
  checkSpec(spec);

  const width = Math.min(maxWidth, 360);
  const height = 180;
  const margin = { top: 8, right: 8, bottom: 28, left: 8 };
  const plotWidth = width - margin.left - margin.right;
  const plotHeight = height - margin.top - margin.bottom;

  const edges = spec.bin_edges;
  const span = edges[edges.length - 1] - edges[0];
  const maxCount = Math.max(...spec.counts, 1);

  const box = document.createElement("div");
  box.className = "chart-box";

  if (spec.title) {
    const title = document.createElement("div");
    title.className = "chart-title";
    title.textContent = spec.title;
    box.appendChild(title);
  }

  const svg = svgElement("svg", {
    class: "chart-svg",
    width: String(width),
    height: String(height),
    viewBox: `0 0 ${width} ${height}`,
    role: "img",
  });

  for (let i = 0; i < spec.counts.length; i++) {
    const x0 = margin.left + ((edges[i] - edges[0]) / span) * plotWidth;
    const x1 = margin.left + ((edges[i + 1] - edges[0]) / span) * plotWidth;
    const barHeight = (spec.counts[i] / maxCount) * plotHeight;
    const bar = svgElement("rect", {
      class: "chart-bar",
      x: String(x0),
      y: String(margin.top + plotHeight - barHeight),
      width: String(Math.max(x1 - x0 - 1, 1)),
      height: String(barHeight),
    });
    const label = svgElement("title", {});
    label.textContent = `[${formatEdge(edges[i])}, ${formatEdge(edges[i + 1])}): ${spec.counts[i]}`;
    bar.appendChild(label);
    svg.appendChild(bar);
  }

  const axisY = margin.top + plotHeight;
  svg.appendChild(
    svgElement("line", {
      class: "chart-axis",
      x1: String(margin.left),
      y1: String(axisY),
      x2: String(width - margin.right),
      y2: String(axisY),
    }),
  );
  const lowTick = svgElement("text", {
    class: "chart-tick",
    x: String(margin.left),
    y: String(axisY + 12),
    "text-anchor": "start",
  });
  lowTick.textContent = formatEdge(edges[0]);
  svg.appendChild(lowTick);
  const highTick = svgElement("text", {
    class: "chart-tick",
    x: String(width - margin.right),
    y: String(axisY + 12),
    "text-anchor": "end",
  });
  highTick.textContent = formatEdge(edges[edges.length - 1]);
  svg.appendChild(highTick);
  if (spec.x_label) {
    const xLabel = svgElement("text", {
      class: "chart-xlabel",
      x: String(width / 2),
      y: String(height - 2),
      "text-anchor": "middle",
    });
    xLabel.textContent = spec.x_label;
    svg.appendChild(xLabel);
  }
  box.appendChild(svg);

  if (typeof spec.sample_size === "number") {
    const total = spec.counts.reduce((sum, c) => sum + c, 0);
    if (total !== spec.sample_size) {
      const badge = document.createElement("div");
      badge.className = "chart-warning";
      badge.textContent = `Counts sum to ${total}, but the declared sample size is ${spec.sample_size}.`;
      box.appendChild(badge);
    }
  }
  return box;
}
