import { describe, expect, it } from "vitest";
import { buildMarkers, center, computeBounds, project, renderSvg } from "../src/map.js";
import { esc, row } from "./helpers.js";

const ROWS = [
  row({ request_key: "a", latitude: 36.85126, longitude: 42.99551 }),
  row({ request_key: "b", latitude: 36.865665, longitude: 42.99374, state: "HANDLED", color: "black" }),
];
const FLEET = [esc({ id: "Amb1", status: "RESERVED" }), esc({ id: "Amb5", status: "FREE" })];

describe("buildMarkers", () => {
  it("shows all requests and units when nothing is selected", () => {
    const set = buildMarkers(ROWS, FLEET);
    expect(set.markers).toHaveLength(4);
    expect(set.markers.filter((m) => m.kind === "esc")).toHaveLength(2);
    expect(set.selectedKey).toBeNull();
  });

  it("collapses to a single marker when a request is selected", () => {
    const set = buildMarkers(ROWS, FLEET, "a");
    expect(set.markers).toHaveLength(1);
    expect(set.markers[0]?.key).toBe("a");
    expect(set.selectedKey).toBe("a");
  });

  it("centers the single-marker view on the request location", () => {
    const set = buildMarkers(ROWS, FLEET, "a");
    const mid = center(computeBounds(set.markers));
    expect(mid.lat).toBeCloseTo(36.85126, 9);
    expect(mid.lon).toBeCloseTo(42.99551, 9);
  });

  it("falls back to the full view for an unknown selection", () => {
    const set = buildMarkers(ROWS, FLEET, "nope");
    expect(set.markers).toHaveLength(4);
  });

  it("renders a new FREE unit as an esc marker", () => {
    const set = buildMarkers([], [esc({ id: "Amb9", status: "FREE" })]);
    expect(set.markers).toEqual([
      expect.objectContaining({ kind: "esc", key: "esc:Amb9", label: "Amb9 (FREE)" }),
    ]);
  });
});

describe("project", () => {
  const bounds = computeBounds(buildMarkers(ROWS, FLEET).markers);
  const vp = { width: 640, height: 420 };

  it("keeps every marker inside the viewport", () => {
    for (const m of buildMarkers(ROWS, FLEET).markers) {
      const { x, y } = project(m.lat, m.lon, bounds, vp);
      expect(x).toBeGreaterThanOrEqual(0);
      expect(x).toBeLessThanOrEqual(vp.width);
      expect(y).toBeGreaterThanOrEqual(0);
      expect(y).toBeLessThanOrEqual(vp.height);
    }
  });

  it("puts north above south", () => {
    const north = project(36.9, 43.0, bounds, vp);
    const south = project(36.8, 43.0, bounds, vp);
    expect(north.y).toBeLessThan(south.y);
  });
});

describe("renderSvg", () => {
  it("emits one element per marker with labels", () => {
    const svg = renderSvg(buildMarkers(ROWS, FLEET));
    expect(svg.match(/class="marker request/g)).toHaveLength(2);
    expect(svg.match(/class="marker esc"/g)).toHaveLength(2);
    expect(svg).toContain("<title>Amb1 (RESERVED)</title>");
  });

  it("rings the selected marker", () => {
    const svg = renderSvg(buildMarkers(ROWS, FLEET, "a"));
    expect(svg).toContain("selected");
    expect(svg).toContain('stroke="#1565c0"');
  });

  it("escapes labels", () => {
    const set = buildMarkers([row({ request_key: "x", patient_name: "A <B> & \"C\"" })], []);
    const svg = renderSvg(set);
    expect(svg).toContain("A &lt;B&gt; &amp; &quot;C&quot;");
  });

  it("handles an empty board", () => {
    const svg = renderSvg(buildMarkers([], []));
    expect(svg).toContain("<svg");
    expect(svg).not.toContain("marker");
  });
});
