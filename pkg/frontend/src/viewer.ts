/**
 * Pure logic for the focal-stack viewer: service metadata parsing, pointer
 * math, URL building, and request sequencing. Deliberately DOM-free so the
 * whole module runs under node for testing; `main.ts` does the wiring.
 */

export interface ViewerMeta {
  width: number;
  height: number;
  numLabels: number;
  referenceLabel: number;
  uMin: number;
  uMax: number;
  /** Label -> depth in meters. */
  depths: Map<number, number>;
  /** Label -> parallax slope in pixels per viewpoint step. */
  slopes: Map<number, number>;
}

function numberField(obj: Record<string, unknown>, key: string): number {
  const value = obj[key];
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new Error(`meta: ${key} must be a finite number`);
  }
  return value;
}

function labelMap(
  obj: Record<string, unknown>,
  key: string,
  numLabels: number,
): Map<number, number> {
  const raw = obj[key];
  if (typeof raw !== "object" || raw === null) {
    throw new Error(`meta: ${key} must be an object keyed by label`);
  }
  const entries = raw as Record<string, unknown>;
  const map = new Map<number, number>();
  for (let label = 1; label <= numLabels; label++) {
    const value = entries[String(label)];
    if (typeof value !== "number" || !Number.isFinite(value)) {
      throw new Error(`meta: ${key} is missing label ${label}`);
    }
    map.set(label, value);
  }
  return map;
}

/** Validate the service's /meta JSON into a typed structure. */
export function parseMeta(raw: unknown): ViewerMeta {
  if (typeof raw !== "object" || raw === null) {
    throw new Error("meta: expected a JSON object");
  }
  const obj = raw as Record<string, unknown>;
  const width = numberField(obj, "width");
  const height = numberField(obj, "height");
  const numLabels = numberField(obj, "num_labels");
  const referenceLabel = numberField(obj, "reference_label");
  const uMin = numberField(obj, "u_min");
  const uMax = numberField(obj, "u_max");
  if (!Number.isInteger(width) || width < 1
      || !Number.isInteger(height) || height < 1) {
    throw new Error(`meta: bad image size ${width}x${height}`);
  }
  if (!Number.isInteger(numLabels) || numLabels < 1) {
    throw new Error(`meta: bad label count ${numLabels}`);
  }
  if (!Number.isInteger(uMin) || !Number.isInteger(uMax)
      || uMin > 0 || uMax < 0) {
    throw new Error(`meta: viewpoint range [${uMin}, ${uMax}] must contain 0`);
  }
  if (!Number.isInteger(referenceLabel)
      || referenceLabel < 1 || referenceLabel > numLabels) {
    throw new Error(`meta: reference label ${referenceLabel} out of range`);
  }
  return {
    width,
    height,
    numLabels,
    referenceLabel,
    uMin,
    uMax,
    depths: labelMap(obj, "depths_m", numLabels),
    slopes: labelMap(obj, "slopes", numLabels),
  };
}

export interface LayerInfo {
  label: number;
  depthM: number;
  slope: number;
}

/** Layers sorted far to near for the sidebar. */
export function layerList(meta: ViewerMeta): LayerInfo[] {
  const layers = [...meta.depths.entries()].map(([label, depthM]) => ({
    label,
    depthM,
    slope: meta.slopes.get(label) ?? 0,
  }));
  layers.sort((a, b) => b.depthM - a.depthM || a.label - b.label);
  return layers;
}

export function viewUrl(base: string, u: number): string {
  return `${base}/view/${u}`;
}

export function refocusUrl(base: string, x: number, y: number): string {
  return `${base}/refocus?x=${x}&y=${y}`;
}

/** Round to the nearest available viewpoint. */
export function clampU(meta: ViewerMeta, u: number): number {
  return Math.min(meta.uMax, Math.max(meta.uMin, Math.round(u)));
}

/** Viewpoint implied by a horizontal drag of dx CSS pixels. */
export function uFromDrag(
  startU: number,
  dx: number,
  pxPerStep: number,
): number {
  if (!(pxPerStep > 0)) {
    throw new Error(`pxPerStep must be positive, got ${pxPerStep}`);
  }
  return startU + Math.round(dx / pxPerStep);
}

export interface Box {
  left: number;
  top: number;
  width: number;
  height: number;
}

/**
 * Map a client-space point on the displayed element to image pixel
 * coordinates; null when it falls outside the image.
 */
export function clickToPixel(
  meta: ViewerMeta,
  box: Box,
  clientX: number,
  clientY: number,
): { x: number; y: number } | null {
  if (!(box.width > 0) || !(box.height > 0)) {
    return null;
  }
  const x = Math.floor((clientX - box.left) * (meta.width / box.width));
  const y = Math.floor((clientY - box.top) * (meta.height / box.height));
  if (x < 0 || y < 0 || x >= meta.width || y >= meta.height) {
    return null;
  }
  return { x, y };
}

/** Human-readable depth, e.g. "0.667 m". */
export function depthLabel(depthM: number | null): string {
  return depthM === null ? "—" : `${depthM.toFixed(3)} m`;
}

/** Signed viewpoint readout, e.g. "u = +4". */
export function uLabel(u: number): string {
  return `u = ${u > 0 ? "+" : ""}${u}`;
}

/** First row-major pixel of each label in a decoded label image. */
export function representativePixels(
  labels: ArrayLike<number>,
  width: number,
  height: number,
): Map<number, { x: number; y: number }> {
  const reps = new Map<number, { x: number; y: number }>();
  const total = width * height;
  if (labels.length !== total) {
    throw new Error(
      `label buffer has ${labels.length} entries for ${width}x${height}`,
    );
  }
  for (let i = 0; i < total; i++) {
    const label = labels[i] as number;
    if (!reps.has(label)) {
      reps.set(label, { x: i % width, y: Math.floor(i / width) });
    }
  }
  return reps;
}

/**
 * Monotone ticket counter so that only the most recently started request
 * commits its result (stale fetches resolve but are dropped).
 */
export class LatestWins {
  private current = 0;

  begin(): number {
    this.current += 1;
    return this.current;
  }

  isCurrent(ticket: number): boolean {
    return ticket === this.current;
  }
}
