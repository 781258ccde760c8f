/**
 * Map rendering behind a small interface.
 *
 * The app core talks to `MapView` only; Leaflet stays inside
 * `LeafletMapView` so the rest of the UI can run (and be tested)
 * without a real map pane.
 */

import * as L from "leaflet";

import type { RenderLayer } from "./state";
import { geomBounds, parseWkt, type Geom, type Position } from "./wkt";

export interface MapView {
  /** Replace everything drawn with the given plan. */
  setLayers(plan: RenderLayer[]): void;
}

export interface LeafletOptions {
  tileUrl: string;
  attribution?: string;
  center?: Position;
  zoom?: number;
}

const toLatLng = ([lon, lat]: Position): L.LatLngTuple => [lat, lon];

function pathFor(geom: Geom, options: L.PathOptions): L.Layer {
  switch (geom.kind) {
    case "point":
      return L.circleMarker(toLatLng(geom.coordinates), {
        radius: 6,
        ...options,
      });
    case "linestring":
      return L.polyline(geom.coordinates.map(toLatLng), options);
    case "polygon":
      return L.polygon(
        geom.rings.map((ring) => ring.map(toLatLng)),
        options,
      );
    case "multipolygon":
      return L.polygon(
        geom.polygons.map((poly) => poly.map((ring) => ring.map(toLatLng))),
        options,
      );
  }
}

export class LeafletMapView implements MapView {
  private readonly map: L.Map;
  private readonly drawn: L.LayerGroup;

  constructor(container: HTMLElement, options: LeafletOptions) {
    this.map = L.map(container, {
      center: options.center ? toLatLng(options.center) : [48.148, 11.56],
      zoom: options.zoom ?? 13,
    });
    L.tileLayer(options.tileUrl, {
      attribution: options.attribution ?? "",
      maxZoom: 19,
    }).addTo(this.map);
    this.drawn = L.layerGroup().addTo(this.map);
  }

  setLayers(plan: RenderLayer[]): void {
    this.drawn.clearLayers();
    let bounds: L.LatLngBounds | null = null;
    for (const layer of plan) {
      if (!layer.visible) continue;
      for (const feature of layer.features) {
        let geom: Geom;
        try {
          geom = parseWkt(feature.wkt);
        } catch {
          // A bad geometry should not take down the whole render.
          continue;
        }
        const path = pathFor(geom, {
          color: feature.color,
          fillColor: feature.color,
          weight: 2,
          fillOpacity: layer.opacity,
          opacity: Math.min(layer.opacity + 0.3, 1),
        });
        path.bindTooltip(feature.display_name, { sticky: true });
        this.drawn.addLayer(path);
        const [[minLon, minLat], [maxLon, maxLat]] = geomBounds(geom);
        const featureBounds = L.latLngBounds([minLat, minLon], [maxLat, maxLon]);
        bounds = bounds ? bounds.extend(featureBounds) : featureBounds;
      }
    }
    if (bounds) {
      this.map.fitBounds(bounds.pad(0.2), { maxZoom: 17 });
    }
  }

  /** Let Leaflet pick up pane size changes after the divider moves. */
  refreshSize(): void {
    this.map.invalidateSize();
  }
}
