/**
 * Marker model and plain SVG scatter rendering.
 *
 * No tile layer: the board only needs relative positions, selection, and
 * labels, so an equirectangular projection into a fixed viewBox is enough.
 */

import type { Esc, RequestRow } from "./api.js";

export type MarkerKind = "request" | "esc";

export interface Marker {
  key: string;
  kind: MarkerKind;
  lat: number;
  lon: number;
  label: string;
  color: string;
}

export interface MarkerSet {
  markers: Marker[];
  selectedKey: string | null;
}

export interface Bounds {
  minLat: number;
  maxLat: number;
  minLon: number;
  maxLon: number;
}

export interface Viewport {
  width: number;
  height: number;
}

const ESC_COLORS: Record<Esc["status"], string> = {
  FREE: "#2e7d32",
  RESERVED: "#ef6c00",
};

/**
 * Build the marker set for the map pane.
 *
 * With no selection: every board row plus every fleet unit ("multiple
 * markers" mode). With a selected request: just that request's single
 * marker, so the map centers on it.
 */
export function buildMarkers(
  rows: RequestRow[],
  fleet: Esc[],
  selectedKey: string | null = null,
): MarkerSet {
  if (selectedKey !== null) {
    const row = rows.find((r) => r.request_key === selectedKey);
    if (row) {
      return { markers: [requestMarker(row)], selectedKey };
    }
  }
  const markers: Marker[] = rows.map(requestMarker);
  for (const esc of fleet) {
    markers.push({
      key: `esc:${esc.id}`,
      kind: "esc",
      lat: esc.latitude,
      lon: esc.longitude,
      label: `${esc.id} (${esc.status})`,
      color: ESC_COLORS[esc.status],
    });
  }
  return { markers, selectedKey: null };
}

function requestMarker(row: RequestRow): Marker {
  return {
    key: row.request_key,
    kind: "request",
    lat: row.latitude,
    lon: row.longitude,
    label: row.patient_name ?? row.patient_id,
    color: row.color,
  };
}

export function computeBounds(markers: Marker[], padDeg = 0.004): Bounds {
  if (markers.length === 0) {
    return { minLat: -90, maxLat: 90, minLon: -180, maxLon: 180 };
  }
  let minLat = Infinity;
  let maxLat = -Infinity;
  let minLon = Infinity;
  let maxLon = -Infinity;
  for (const m of markers) {
    minLat = Math.min(minLat, m.lat);
    maxLat = Math.max(maxLat, m.lat);
    minLon = Math.min(minLon, m.lon);
    maxLon = Math.max(maxLon, m.lon);
  }
  // pad so single markers and collinear sets still get a nonzero box
  return {
    minLat: minLat - padDeg,
    maxLat: maxLat + padDeg,
    minLon: minLon - padDeg,
    maxLon: maxLon + padDeg,
  };
}

export function center(bounds: Bounds): { lat: number; lon: number } {
  return {
    lat: (bounds.minLat + bounds.maxLat) / 2,
    lon: (bounds.minLon + bounds.maxLon) / 2,
  };
}

/** Project into viewport pixels, north up, longitude scaled by cos(mid lat). */
export function project(
  lat: number,
  lon: number,
  bounds: Bounds,
  vp: Viewport,
): { x: number; y: number } {
  const midLat = (bounds.minLat + bounds.maxLat) / 2;
  const lonScale = Math.max(Math.cos((midLat * Math.PI) / 180), 0.01);
  const spanLat = bounds.maxLat - bounds.minLat;
  const spanLon = (bounds.maxLon - bounds.minLon) * lonScale;
  const span = Math.max(spanLat, spanLon, 1e-9);
  // one degree of latitude maps to the same pixel length everywhere
  const scale = Math.min(vp.width, vp.height) / span;
  const cx = vp.width / 2;
  const cy = vp.height / 2;
  const mid = center(bounds);
  return {
    x: cx + (lon - mid.lon) * lonScale * scale,
    y: cy - (lat - mid.lat) * scale,
  };
}

/** Render the scatter as a standalone SVG string. */
export function renderSvg(set: MarkerSet, vp: Viewport = { width: 640, height: 420 }): string {
  const bounds = computeBounds(set.markers);
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${vp.width} ${vp.height}">`,
    `<rect width="${vp.width}" height="${vp.height}" fill="#f2f4f5"/>`,
  ];
  for (const m of set.markers) {
    const { x, y } = project(m.lat, m.lon, bounds, vp);
    const selected = m.key === set.selectedKey;
    if (m.kind === "esc") {
      parts.push(
        `<rect class="marker esc" data-key="${escapeXml(m.key)}" x="${fmt(x - 5)}" y="${fmt(y - 5)}" ` +
          `width="10" height="10" fill="${m.color}"><title>${escapeXml(m.label)}</title></rect>`,
      );
    } else {
      const r = selected ? 9 : 6;
      parts.push(
        `<circle class="marker request${selected ? " selected" : ""}" data-key="${escapeXml(m.key)}" ` +
          `cx="${fmt(x)}" cy="${fmt(y)}" r="${r}" fill="${m.color}"` +
          `${selected ? ' stroke="#1565c0" stroke-width="3"' : ""}>` +
          `<title>${escapeXml(m.label)}</title></circle>`,
      );
    }
  }
  parts.push("</svg>");
  return parts.join("");
}

function fmt(v: number): string {
  return v.toFixed(1);
}

function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
