/**
 * Browser entry point: reads the page config, wires the panes together,
 * and opens the walkthrough on first visit.
 */

import "leaflet/dist/leaflet.css";

import { ApiClient } from "./api";
import { App } from "./app";
import { initDivider } from "./divider";
import { LeafletMapView } from "./map";
import { Tutorial } from "./tutorial";

interface PageConfig {
  apiBase?: string;
  tileUrl?: string;
  attribution?: string;
  sessionId?: string;
}

declare global {
  interface Window {
    GEOASK_CONFIG?: PageConfig;
  }
}

const DEFAULT_TILE_URL = "https://tile.openstreetmap.org/{z}/{x}/{y}.png";
const DEFAULT_ATTRIBUTION = "&copy; OpenStreetMap contributors";
const TUTORIAL_SEEN_KEY = "geoask-tutorial-seen";

function mustFind(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function start(): void {
  const config = window.GEOASK_CONFIG ?? {};

  const mapView = new LeafletMapView(mustFind("map"), {
    tileUrl: config.tileUrl ?? DEFAULT_TILE_URL,
    attribution: config.attribution ?? DEFAULT_ATTRIBUTION,
  });

  const app = new App({
    api: new ApiClient(config.apiBase ?? ""),
    map: mapView,
    chatRoot: mustFind("chat-pane"),
    legendRoot: mustFind("legend"),
    sessionId: config.sessionId,
  });

  initDivider(
    mustFind("split"),
    mustFind("chat-pane"),
    mustFind("divider"),
    () => mapView.refreshSize(),
  );

  const tutorial = new Tutorial(document.body, (prompt) => app.suggest(prompt));
  mustFind("help-btn").addEventListener("click", () => tutorial.open());
  if (!localStorage.getItem(TUTORIAL_SEEN_KEY)) {
    localStorage.setItem(TUTORIAL_SEEN_KEY, "1");
    tutorial.open();
  }

  const fileInput = mustFind("upload-input") as HTMLInputElement;
  mustFind("upload-btn").addEventListener("click", () => fileInput.click());
  fileInput.addEventListener("change", () => {
    const file = fileInput.files?.[0];
    fileInput.value = "";
    if (!file) return;
    const name = file.name.replace(/\.(geo)?json$/i, "") || "dataset";
    const client = new ApiClient(config.apiBase ?? "");
    client
      .uploadDataset(name, file)
      .then(() => app.notice(`Dataset "${name}" ingested.`))
      .catch((error) =>
        app.fail(
          error instanceof Error
            ? `Upload failed: ${error.message}`
            : "Upload failed.",
        ),
      );
  });
}

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", start);
} else {
  start();
}
