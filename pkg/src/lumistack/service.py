"""Read-only HTTP render service over a loaded slab.

Serves the interactive click-to-refocus viewer: metadata, per-u views,
refocused images, and the focus/depth maps. The slab never changes for the
lifetime of the process, so every response carries ``Cache-Control:
immutable`` and repeated requests are byte-identical. Views are memoized
per u and refocus responses per label (all clicks on one label produce the
same image by construction); rendering happens outside the cache lock and
insertion uses single-writer ``setdefault``.
"""

import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

import numpy as np

from . import pngio, render
from .core import FocusMap, InvalidInputError
from .tomography import load_slab

_CONTENT_TYPES = {
    ".css": "text/css; charset=utf-8",
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".json": "application/json; charset=utf-8",
    ".map": "application/json; charset=utf-8",
    ".png": "image/png",
    ".svg": "image/svg+xml",
}

_FALLBACK_PAGE = b"""<!doctype html>
<meta charset="utf-8"><title>lumistack viewer</title>
<style>body{font:14px sans-serif;margin:1em}img{display:block;margin:.5em 0;
image-rendering:pixelated;cursor:crosshair}</style>
<h1>lumistack viewer</h1>
<p>Click the image to refocus on that point; use the slider to shift the
viewpoint.</p>
<input id="u" type="range" value="0"> <span id="ulab">u=0</span>
<span id="depth"></span>
<img id="im" alt="view">
<script>
const im=document.getElementById('im'),u=document.getElementById('u'),
ulab=document.getElementById('ulab'),depth=document.getElementById('depth');
fetch('/meta').then(r=>r.json()).then(m=>{
  u.min=m.u_min;u.max=m.u_max;im.src='/view/0';
  u.oninput=()=>{ulab.textContent='u='+u.value;im.src='/view/'+u.value;
    depth.textContent='';};
  im.onclick=e=>{const r=im.getBoundingClientRect();
    const x=Math.floor((e.clientX-r.left)*im.naturalWidth/r.width);
    const y=Math.floor((e.clientY-r.top)*im.naturalHeight/r.height);
    fetch(`/refocus?x=${x}&y=${y}`).then(rs=>{
      depth.textContent=' focused at '+rs.headers.get('X-Chosen-Depth-M')+' m';
      return rs.blob();}).then(b=>{im.src=URL.createObjectURL(b);});};
});
</script>
"""


@dataclass
class ServiceState:
    """Immutable inputs plus the render memo caches."""

    slab: object
    fm: FocusMap
    meta_json: bytes
    focus_png: bytes
    depth_png: bytes
    static_dir: Path | None = None
    _lock: threading.Lock = field(default_factory=threading.Lock)
    _views: dict = field(default_factory=dict)
    _refocus: dict = field(default_factory=dict)

    def view_png(self, u0):
        with self._lock:
            hit = self._views.get(u0)
        if hit is not None:
            return hit
        data = pngio.image_to_png_bytes(render.view_at(self.slab, u0))
        with self._lock:
            return self._views.setdefault(u0, data)

    def refocus_png(self, x, y):
        label = int(self.fm.labels[y, x])
        with self._lock:
            hit = self._refocus.get(label)
        if hit is not None:
            return hit
        plan = self.slab.plan
        img = render.refocus(self.slab, plan.slope_for(label))
        value = (pngio.image_to_png_bytes(img), plan.depth_for(label))
        with self._lock:
            return self._refocus.setdefault(label, value)


def build_state(slab_path, focus_map_path, depth_map_path=None,
                static_dir=None):
    slab = load_slab(slab_path)
    labels = pngio.read_labels_png(focus_map_path)
    if labels.shape != (slab.height, slab.width):
        raise InvalidInputError(
            f"focus map {labels.shape} does not match slab "
            f"{(slab.height, slab.width)}")
    plan_labels = set(slab.plan.labels)
    present = set(np.unique(labels).tolist())
    if not present <= plan_labels:
        raise InvalidInputError(
            f"focus map labels {sorted(present - plan_labels)} missing from "
            "the slab's plan")
    fm = FocusMap(labels, max(plan_labels))

    focus_png = Path(focus_map_path).read_bytes()
    if depth_map_path is not None:
        depth_png = Path(depth_map_path).read_bytes()
    else:
        depth_by_label = {l: slab.plan.depth_for(l) for l in plan_labels}
        lut = np.zeros(max(plan_labels) + 1)
        for l, d in depth_by_label.items():
            lut[l] = d
        depth_png = pngio.depth_to_png_bytes(lut[labels])

    meta = {
        "depths_m": {str(l): slab.plan.depth_for(l) for l in
                     sorted(plan_labels)},
        "height": slab.height,
        "num_labels": max(plan_labels),
        "reference_label": slab.plan.reference_label,
        "slopes": {str(l): slab.plan.slope_for(l) for l in
                   sorted(plan_labels)},
        "u_max": slab.u_max,
        "u_min": slab.u_min,
        "width": slab.width,
    }
    meta_json = json.dumps(meta, sort_keys=True).encode("utf-8")
    return ServiceState(slab, fm, meta_json, focus_png, depth_png,
                        None if static_dir is None else Path(static_dir))


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, *args):
        pass

    def _send(self, status, body, ctype, extra=()):
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Cache-Control", "immutable")
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Expose-Headers", "X-Chosen-Depth-M")
        for key, value in extra:
            self.send_header(key, value)
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status, message):
        self._send(status, message.encode("utf-8") + b"\n",
                   "text/plain; charset=utf-8")

    def do_GET(self):
        try:
            self._route(self.server.state)
        except BrokenPipeError:
            pass
        except Exception as exc:    # pragma: no cover - defensive
            try:
                self._error(500, f"internal error: {type(exc).__name__}")
            except OSError:
                pass

    def _route(self, state):
        parts = urlsplit(self.path)
        route = parts.path
        if route == "/meta":
            self._send(200, state.meta_json,
                       "application/json; charset=utf-8")
        elif route.startswith("/view/"):
            try:
                u0 = int(route[len("/view/"):])
            except ValueError:
                return self._error(404, "views are /view/<integer u>")
            if not state.slab.u_min <= u0 <= state.slab.u_max:
                return self._error(
                    404, f"u={u0} outside [{state.slab.u_min}, "
                         f"{state.slab.u_max}]")
            self._send(200, state.view_png(u0), "image/png")
        elif route == "/refocus":
            query = parse_qs(parts.query)
            try:
                x = int(query["x"][0])
                y = int(query["y"][0])
            except (KeyError, ValueError, IndexError):
                return self._error(400, "refocus needs integer x= and y=")
            if not (0 <= x < state.slab.width
                    and 0 <= y < state.slab.height):
                return self._error(
                    400, f"click ({x}, {y}) outside image "
                         f"{state.slab.width}x{state.slab.height}")
            body, depth = state.refocus_png(x, y)
            self._send(200, body, "image/png",
                       extra=[("X-Chosen-Depth-M", repr(depth))])
        elif route == "/depth.png":
            self._send(200, state.depth_png, "image/png")
        elif route == "/focus.png":
            self._send(200, state.focus_png, "image/png")
        elif route == "/extended.png":
            self._send(200, state.view_png(0), "image/png")
        else:
            self._static(state, route)

    def _static(self, state, route):
        if state.static_dir is None:
            if route in ("/", "/index.html"):
                return self._send(200, _FALLBACK_PAGE,
                                  "text/html; charset=utf-8")
            return self._error(404, "not found")
        rel = "index.html" if route == "/" else route.lstrip("/")
        root = state.static_dir.resolve()
        target = (root / rel).resolve()
        if not target.is_relative_to(root) or not target.is_file():
            return self._error(404, "not found")
        ctype = _CONTENT_TYPES.get(target.suffix,
                                   "application/octet-stream")
        self._send(200, target.read_bytes(), ctype)


def make_server(state, host="127.0.0.1", port=0):
    server = ThreadingHTTPServer((host, port), _Handler)
    server.daemon_threads = True
    server.state = state
    return server


def run(state, host, port):
    server = make_server(state, host, port)
    shown_host, shown_port = server.server_address[:2]
    print(f"serving on http://{shown_host}:{shown_port}/", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0
