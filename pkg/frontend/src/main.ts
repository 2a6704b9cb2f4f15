/**
 * Browser entry point: wires the pure viewer logic to the DOM and the
 * reconstruction service (same origin). Drag horizontally for parallax,
 * click to refocus at a pixel, or pick a whole layer from the sidebar.
 */

import {
  clampU,
  clickToPixel,
  depthLabel,
  LatestWins,
  layerList,
  parseMeta,
  refocusUrl,
  representativePixels,
  uFromDrag,
  uLabel,
  viewUrl,
  ViewerMeta,
} from "./viewer.js";

const DRAG_THRESHOLD_PX = 4;

interface Shot {
  blob: Blob;
  depthM: string | null;
  objectUrl?: string;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing #${id}`);
  }
  return node as T;
}

/** Memoized fetch of rendered PNGs; failed fetches are retried. */
function makeLoader(): (url: string) => Promise<Shot> {
  const cache = new Map<string, Promise<Shot>>();
  return (url) => {
    let pending = cache.get(url);
    if (!pending) {
      pending = fetch(url).then(async (resp) => {
        if (!resp.ok) {
          throw new Error(`${url}: HTTP ${resp.status}`);
        }
        return {
          blob: await resp.blob(),
          depthM: resp.headers.get("X-Chosen-Depth-M"),
        };
      });
      pending.catch(() => cache.delete(url));
      cache.set(url, pending);
    }
    return pending;
  };
}

async function fetchLabels(meta: ViewerMeta): Promise<Uint8Array> {
  const resp = await fetch("focus.png");
  if (!resp.ok) {
    throw new Error(`focus.png: HTTP ${resp.status}`);
  }
  const bitmap = await createImageBitmap(await resp.blob());
  const canvas = document.createElement("canvas");
  canvas.width = bitmap.width;
  canvas.height = bitmap.height;
  const ctx = canvas.getContext("2d", { willReadFrequently: true });
  if (!ctx) {
    throw new Error("canvas 2d context unavailable");
  }
  ctx.drawImage(bitmap, 0, 0);
  const rgba = ctx.getImageData(0, 0, bitmap.width, bitmap.height).data;
  const labels = new Uint8Array(bitmap.width * bitmap.height);
  for (let i = 0; i < labels.length; i++) {
    labels[i] = rgba[4 * i]; // grayscale: label value in the red channel
  }
  if (bitmap.width !== meta.width || bitmap.height !== meta.height) {
    throw new Error("focus map size does not match meta");
  }
  return labels;
}

async function boot(): Promise<void> {
  const stage = el<HTMLImageElement>("stage");
  const status = el<HTMLElement>("status");
  const layersNav = el<HTMLElement>("layers");
  const load = makeLoader();
  const latest = new LatestWins();

  const metaResp = await fetch("meta");
  if (!metaResp.ok) {
    throw new Error(`meta: HTTP ${metaResp.status}`);
  }
  const meta = parseMeta(await metaResp.json());
  stage.width = meta.width;
  stage.height = meta.height;

  let currentU = 0;

  async function show(url: string, note: string): Promise<void> {
    const ticket = latest.begin();
    try {
      const shot = await load(url);
      if (!latest.isCurrent(ticket)) {
        return;
      }
      if (!shot.objectUrl) {
        shot.objectUrl = URL.createObjectURL(shot.blob);
      }
      stage.src = shot.objectUrl;
      status.textContent = shot.depthM !== null
        ? `${note} — depth ${depthLabel(Number(shot.depthM))}`
        : note;
    } catch (err) {
      if (latest.isCurrent(ticket)) {
        status.textContent = String(err);
      }
    }
  }

  function showView(u: number): void {
    currentU = u;
    void show(viewUrl("", u), uLabel(u));
  }

  function refocusAt(x: number, y: number, what: string): void {
    void show(refocusUrl("", x, y), what);
  }

  // Sidebar: one button per layer, far to near, refocusing at a pixel
  // known to carry that label.
  try {
    const reps = representativePixels(
      await fetchLabels(meta), meta.width, meta.height);
    for (const layer of layerList(meta)) {
      const button = document.createElement("button");
      button.textContent =
        `layer ${layer.label} — ${depthLabel(layer.depthM)}`;
      const rep = reps.get(layer.label);
      if (rep) {
        button.addEventListener(
          "click", () => refocusAt(rep.x, rep.y, `layer ${layer.label}`));
      } else {
        button.disabled = true;
        button.title = "label absent from the focus map";
      }
      layersNav.append(button);
    }
  } catch (err) {
    status.textContent = String(err);
  }

  // Pointer handling: small movements are clicks (refocus), larger
  // horizontal drags scrub the viewpoint.
  let drag: {
    startX: number;
    startY: number;
    startU: number;
    moved: boolean;
  } | null = null;

  const pxPerStep = (): number => Math.max(
    12,
    stage.getBoundingClientRect().width / (meta.uMax - meta.uMin + 2));

  stage.addEventListener("pointerdown", (ev) => {
    drag = {
      startX: ev.clientX,
      startY: ev.clientY,
      startU: currentU,
      moved: false,
    };
    stage.setPointerCapture(ev.pointerId);
    ev.preventDefault();
  });

  stage.addEventListener("pointermove", (ev) => {
    if (!drag) {
      return;
    }
    const dx = ev.clientX - drag.startX;
    if (Math.abs(dx) + Math.abs(ev.clientY - drag.startY)
        > DRAG_THRESHOLD_PX) {
      drag.moved = true;
    }
    if (!drag.moved) {
      return;
    }
    const u = clampU(meta, uFromDrag(drag.startU, dx, pxPerStep()));
    if (u !== currentU) {
      showView(u);
    }
  });

  stage.addEventListener("pointerup", (ev) => {
    const wasDrag = drag?.moved ?? false;
    drag = null;
    if (wasDrag) {
      return;
    }
    const pixel = clickToPixel(
      meta, stage.getBoundingClientRect(), ev.clientX, ev.clientY);
    if (pixel) {
      refocusAt(pixel.x, pixel.y, `click (${pixel.x}, ${pixel.y})`);
    }
  });

  showView(0);
}

boot().catch((err) => {
  el<HTMLElement>("status").textContent = String(err);
});
