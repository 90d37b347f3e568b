/** Cluster map rendering: a plain equirectangular scatter as an SVG string.
 *
 * Patients are dots colored by cluster; caregivers are cross markers. The
 * output is deterministic for a fixed baseline, so it snapshot-tests cleanly
 * and needs no tile server.
 */

import { escapeHtml } from "./format.js";
import type { BaselineWire } from "./types.js";

export interface MapOptions {
  width?: number;
  height?: number;
  padding?: number;
  pointRadius?: number;
  crossSize?: number;
  palette?: ReadonlyArray<string>;
  caregiverColor?: string;
}

export const DEFAULT_PALETTE: ReadonlyArray<string> = [
  "#1f77b4",
  "#ff7f0e",
  "#2ca02c",
  "#9467bd",
  "#8c564b",
  "#e377c2",
  "#7f7f7f",
  "#bcbd22",
  "#17becf",
  "#aec7e8",
  "#ffbb78",
  "#98df8a",
];

const CAREGIVER_COLOR = "#d62728";

interface Extent {
  latMin: number;
  latMax: number;
  lonMin: number;
  lonMax: number;
}

function extentOf(points: ReadonlyArray<{ lat: number; lon: number }>): Extent {
  let latMin = Infinity;
  let latMax = -Infinity;
  let lonMin = Infinity;
  let lonMax = -Infinity;
  for (const p of points) {
    if (p.lat < latMin) latMin = p.lat;
    if (p.lat > latMax) latMax = p.lat;
    if (p.lon < lonMin) lonMin = p.lon;
    if (p.lon > lonMax) lonMax = p.lon;
  }
  // A degenerate extent (single location) still needs a nonzero span.
  if (latMax - latMin < 1e-9) {
    latMin -= 0.01;
    latMax += 0.01;
  }
  if (lonMax - lonMin < 1e-9) {
    lonMin -= 0.01;
    lonMax += 0.01;
  }
  return { latMin, latMax, lonMin, lonMax };
}

/** Render a baseline's clusters to SVG markup; empty-state div when there are
 * no training patients. */
export function renderClusterMap(baseline: BaselineWire, options: MapOptions = {}): string {
  const width = options.width ?? 640;
  const height = options.height ?? 480;
  const padding = options.padding ?? 24;
  const pointRadius = options.pointRadius ?? 3.5;
  const crossSize = options.crossSize ?? 6;
  const palette = options.palette ?? DEFAULT_PALETTE;
  const caregiverColor = options.caregiverColor ?? CAREGIVER_COLOR;

  if (baseline.training.length === 0) {
    return `<div class="empty-state">No patients in the ${escapeHtml(
      baseline.discipline,
    )} baseline yet — ingest a visit log and rebuild.</div>`;
  }

  const extent = extentOf([...baseline.training, ...baseline.caregivers]);
  const innerW = width - 2 * padding;
  const innerH = height - 2 * padding;
  const x = (lon: number): string =>
    (padding + ((lon - extent.lonMin) / (extent.lonMax - extent.lonMin)) * innerW).toFixed(2);
  const y = (lat: number): string =>
    (padding + ((extent.latMax - lat) / (extent.latMax - extent.latMin)) * innerH).toFixed(2);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
      `role="img" aria-label="${escapeHtml(baseline.discipline)} cluster map">`,
  );
  parts.push(`<rect x="0" y="0" width="${width}" height="${height}" fill="#ffffff"/>`);

  for (const p of baseline.training) {
    const fill = palette[((p.cluster % palette.length) + palette.length) % palette.length]!;
    parts.push(
      `<circle class="patient cluster-${p.cluster}" cx="${x(p.lon)}" cy="${y(p.lat)}" ` +
        `r="${pointRadius}" fill="${fill}">` +
        `<title>${escapeHtml(p.id)} · cluster ${p.cluster}</title></circle>`,
    );
  }

  for (const c of baseline.caregivers) {
    const cx = Number(x(c.lon));
    const cy = Number(y(c.lat));
    const s = crossSize;
    const d =
      `M ${(cx - s).toFixed(2)} ${(cy - s).toFixed(2)} L ${(cx + s).toFixed(2)} ${(cy + s).toFixed(2)} ` +
      `M ${(cx - s).toFixed(2)} ${(cy + s).toFixed(2)} L ${(cx + s).toFixed(2)} ${(cy - s).toFixed(2)}`;
    parts.push(
      `<path class="caregiver" d="${d}" stroke="${caregiverColor}" stroke-width="2" ` +
        `stroke-linecap="round" fill="none"><title>${escapeHtml(c.id)}</title></path>`,
    );
  }

  parts.push("</svg>");
  return parts.join("");
}
