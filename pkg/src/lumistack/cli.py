"""Command-line pipeline driver and file formats.

A *manifest* is a JSON file describing a focal stack::

    {
      "focal_length_mm": 50.0,
      "images": [
        {"path": "shot_01.png", "focus_param": 7.0},
        {"path": "shot_02.png", "focus_distance_m": 1.25}
      ],
      "calibration": "table.csv",
      "params": {"smoothness_weight": 1.0, "median_radius": 2,
                 "u_samples": 33, "score_steps": 5,
                 "aperture_scale": 4.0, "max_parallax": 8.0}
    }

Relative paths resolve against the manifest's directory. Every image needs
``focus_param`` (arbitrary monotone units, converted through the calibration
model) and/or ``focus_distance_m`` (meters, used directly). ``calibration``
points at a CSV of ``param,near_m,far_m`` rows. All ``params`` are optional.

When ``aperture_scale`` is absent it is derived so that the largest pixel
shift at the aperture edge equals ``max_parallax`` (default 8 px); a
single-depth scene falls back to scale 1.

Commands exit 0 on success, 1 on input errors, 2 on internal errors, and
never leave partially written output files.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import pngio, render, service
from .core import (FocalStack, CaptureMeta, FocusMap, InvalidInputError,
                   LumistackError)
from .focusmap import compute_focus_map, median_filter_labels
from .optics import (CalibrationModel, CalibrationTable, fit_focus_curve,
                     focus_map_to_depth_map, resolve_depths)
from .sharpness import ScoreConfig, score_stack
from .tomography import (load_slab, reconstruct_slab, save_slab,
                         u_offset_range)

_PARAM_DEFAULTS = {
    "score_steps": 5,
    "smoothness_weight": 1.0,
    "median_radius": 2,
    "u_samples": 33,
    "aperture_scale": None,
    "max_parallax": 8.0,
}


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    focus_param: float | None
    focus_distance_m: float | None


@dataclass(frozen=True)
class Manifest:
    focal_length_m: float
    entries: tuple[ManifestEntry, ...]
    calibration_path: Path | None
    params: dict


def load_manifest(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidInputError(f"{path}: manifest must be a JSON object")
    unknown = set(doc) - {"focal_length_mm", "images", "calibration",
                          "params"}
    if unknown:
        raise InvalidInputError(
            f"{path}: unknown manifest keys {sorted(unknown)}")
    try:
        focal_mm = float(doc["focal_length_mm"])
        images = doc["images"]
    except KeyError as exc:
        raise InvalidInputError(f"{path}: missing manifest key {exc}") from exc
    if not isinstance(images, list) or not images:
        raise InvalidInputError(f"{path}: 'images' must be a non-empty list")

    base = path.parent
    entries = []
    for i, item in enumerate(images):
        if not isinstance(item, dict) or "path" not in item:
            raise InvalidInputError(
                f"{path}: images[{i}] needs at least a 'path'")
        bad = set(item) - {"path", "focus_param", "focus_distance_m"}
        if bad:
            raise InvalidInputError(
                f"{path}: images[{i}] has unknown keys {sorted(bad)}")
        fp = item.get("focus_param")
        fd = item.get("focus_distance_m")
        if fp is None and fd is None:
            raise InvalidInputError(
                f"{path}: images[{i}] needs focus_param or focus_distance_m")
        entries.append(ManifestEntry(base / item["path"],
                                     None if fp is None else float(fp),
                                     None if fd is None else float(fd)))

    params = dict(_PARAM_DEFAULTS)
    given = doc.get("params", {})
    if not isinstance(given, dict):
        raise InvalidInputError(f"{path}: 'params' must be a JSON object")
    bad = set(given) - set(_PARAM_DEFAULTS)
    if bad:
        raise InvalidInputError(f"{path}: unknown params {sorted(bad)}")
    params.update(given)

    calib = doc.get("calibration")
    return Manifest(focal_mm / 1000.0, tuple(entries),
                    None if calib is None else base / calib, params)


def load_stack(manifest):
    images = []
    metas = []
    for entry in manifest.entries:
        if not entry.path.exists():
            raise InvalidInputError(f"image not found: {entry.path}")
        img = pngio.read_image_png(entry.path)
        if images and img.shape != images[0].shape:
            raise InvalidInputError(
                f"{entry.path}: size {img.shape} differs from first image "
                f"{images[0].shape}")
        images.append(img)
        metas.append(CaptureMeta(manifest.focal_length_m,
                                 focus_param=entry.focus_param,
                                 focus_distance_m=entry.focus_distance_m))
    return FocalStack(np.ascontiguousarray(np.stack(images)), tuple(metas))


def load_calibration_model(manifest):
    if manifest.calibration_path is None:
        return None
    table = CalibrationTable.from_text(
        manifest.calibration_path.read_text("utf-8"))
    return fit_focus_curve(table)


def _atomic_write(path, data: bytes):
    path = Path(path)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    try:
        tmp.write_bytes(data)
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def _json_record(obj):
    return (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode("utf-8")


def _merge_params(manifest, args):
    """Flag values override manifest params."""
    p = dict(manifest.params)
    for flag, key in (("u_samples", "u_samples"),
                      ("smoothness_weight", "smoothness_weight"),
                      ("median_radius", "median_radius"),
                      ("max_parallax", "max_parallax")):
        val = getattr(args, flag, None)
        if val is not None:
            p[key] = val
    u_offset_range(int(p["u_samples"]))
    if p["median_radius"] < 0 or p["score_steps"] < 1 \
            or p["smoothness_weight"] < 0 or p["max_parallax"] <= 0:
        raise InvalidInputError(f"implausible parameters: {p}")
    return p


def _compute_focus_map(stack, params):
    cfg = ScoreConfig(alphas=(1.0,) * int(params["score_steps"]))
    scores = score_stack(stack, cfg)
    fm = compute_focus_map(stack, cfg, float(params["smoothness_weight"]),
                           scores=scores)
    return median_filter_labels(fm, int(params["median_radius"])), scores


def _aperture_scale(params, depths, focal_length_m):
    if params["aperture_scale"] is not None:
        scale = float(params["aperture_scale"])
        if not (np.isfinite(scale) and scale > 0):
            raise InvalidInputError(f"bad aperture_scale {scale}")
        return scale
    d_ref = max(depths)
    den = 1.0 / focal_length_m - 1.0 / d_ref
    steepest = max(abs((1.0 / d_ref - 1.0 / d) / den) for d in depths)
    half = (int(params["u_samples"]) - 1) // 2
    if steepest == 0.0 or half == 0:
        return 1.0
    return float(params["max_parallax"]) / (steepest * half)


def _reconstruct(manifest, args):
    """Shared pipeline: stack -> focus map -> depths -> slab."""
    stack = load_stack(manifest)
    params = _merge_params(manifest, args)
    fm, _ = _compute_focus_map(stack, params)
    model = load_calibration_model(manifest)
    depths = resolve_depths(stack.meta, model)
    scale = _aperture_scale(params, depths, manifest.focal_length_m)
    slab = reconstruct_slab(stack, fm,
                            {k + 1: d for k, d in enumerate(depths)},
                            scale, int(params["u_samples"]),
                            workers=args.threads)
    return stack, fm, slab


def cmd_calibrate(args):
    if args.table is not None:
        table_path = Path(args.table)
    else:
        if args.manifest is None:
            raise InvalidInputError("calibrate needs --table or a manifest "
                                    "with a 'calibration' entry")
        manifest = load_manifest(args.manifest)
        if manifest.calibration_path is None:
            raise InvalidInputError(
                f"{args.manifest}: manifest has no 'calibration' entry")
        table_path = manifest.calibration_path
    table = CalibrationTable.from_text(table_path.read_text("utf-8"))
    model = fit_focus_curve(table)
    for (param, _, _), mid in zip(table.rows, table.midpoints()):
        fitted = 1.0 / (model.a * param + model.b)
        err = abs(fitted - mid) / mid
        print(f"param={param:g} measured_m={mid:.6f} "
              f"fitted_m={fitted:.6f} err={100 * err:.2f}%")
    print(f"a={model.a!r} b={model.b!r} r_squared={model.r_squared:.6f}")
    _atomic_write(args.out, _json_record({
        "a": model.a,
        "b": model.b,
        "param_range": list(model.param_range),
        "r_squared": model.r_squared,
    }))
    return 0


def _sidecar_path(out):
    return Path(out).with_suffix(".json")


def cmd_focusmap(args):
    manifest = load_manifest(args.manifest)
    stack = load_stack(manifest)
    if stack.num_images > 255:
        raise InvalidInputError(
            f"{stack.num_images} images exceed the 255-label limit of the "
            "8-bit focus-map format")
    params = _merge_params(manifest, args)
    fm, scores = _compute_focus_map(stack, params)
    png = pngio.labels_to_png_bytes(fm.labels)
    sidecar = _json_record({
        "deltas_by_image": {str(k + 1): d for k, d in
                            enumerate(scores.deltas)},
        "median_radius": int(params["median_radius"]),
        "num_labels": fm.num_labels,
        "score_steps": int(params["score_steps"]),
        "smoothness_weight": float(params["smoothness_weight"]),
        "textureless": list(scores.textureless),
    })
    _atomic_write(args.out, png)
    _atomic_write(_sidecar_path(args.out), sidecar)
    return 0


def _focus_map_for(args, stack, params):
    if getattr(args, "focus_map", None) is not None:
        labels = pngio.read_labels_png(args.focus_map)
        if labels.shape != (stack.height, stack.width):
            raise InvalidInputError(
                f"{args.focus_map}: focus map {labels.shape} does not match "
                f"stack {(stack.height, stack.width)}")
        if labels.max() > stack.num_images:
            raise InvalidInputError(
                f"{args.focus_map}: label {labels.max()} exceeds image "
                f"count {stack.num_images}")
        return FocusMap(labels, stack.num_images)
    fm, _ = _compute_focus_map(stack, params)
    return fm


def cmd_depthmap(args):
    manifest = load_manifest(args.manifest)
    stack = load_stack(manifest)
    params = _merge_params(manifest, args)
    fm = _focus_map_for(args, stack, params)
    model = load_calibration_model(manifest)
    dm = focus_map_to_depth_map(fm, stack.meta, model)
    depths = resolve_depths(stack.meta, model)
    png = pngio.depth_to_png_bytes(dm.depth_m)
    sidecar = _json_record({
        "depth_m_by_label": {str(k + 1): d for k, d in enumerate(depths)},
        "millimeter_png_clamp_m": pngio.DEPTH_MM_MAX / 1000.0,
    })
    _atomic_write(args.out, png)
    _atomic_write(_sidecar_path(args.out), sidecar)
    return 0


def cmd_extended(args):
    manifest = load_manifest(args.manifest)
    _, _, slab = _reconstruct(manifest, args)
    _atomic_write(args.out, pngio.image_to_png_bytes(
        render.extended_focus(slab)))
    return 0


def cmd_reconstruct(args):
    manifest = load_manifest(args.manifest)
    _, _, slab = _reconstruct(manifest, args)
    out = Path(args.out)
    tmp = out.with_name(out.name + f".tmp{os.getpid()}")
    try:
        save_slab(slab, tmp)
        os.replace(tmp, out)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise
    return 0


def cmd_sweep(args):
    slab = load_slab(args.slab)
    frames = render.perspective_sweep(slab, args.frames, args.u_min,
                                      args.u_max)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = []
    payloads = []
    for u0, frame in frames:
        name = f"view_u{u0:+03d}.png"
        payloads.append((out_dir / name, pngio.image_to_png_bytes(frame)))
        index.append({"file": name, "u": u0})
    for path, data in payloads:
        _atomic_write(path, data)
    _atomic_write(out_dir / "sweep.json", _json_record({"frames": index}))
    return 0


def cmd_refocus(args):
    slab = load_slab(args.slab)
    if (args.depth is None) == (args.click is None):
        raise InvalidInputError(
            "refocus needs exactly one of --depth or --click")
    if args.depth is not None:
        img, _ = render.refocus_at_depth(slab, args.depth,
                                         workers=args.threads)
        chosen = args.depth
    else:
        if args.focus_map is None:
            raise InvalidInputError("--click needs --focus-map")
        labels = pngio.read_labels_png(args.focus_map)
        fm = FocusMap(labels, int(labels.max()))
        img, chosen = render.refocus_at_point(slab, fm, args.click,
                                              workers=args.threads)
    print(f"chosen_depth_m={chosen!r}")
    _atomic_write(args.out, pngio.image_to_png_bytes(img))
    return 0


def cmd_serve(args):
    state = service.build_state(args.slab, args.focus_map,
                                depth_map_path=args.depth_map,
                                static_dir=args.static)
    return service.run(state, args.host, args.port)


def _parse_click(text):
    try:
        x, y = text.split(",")
        return int(x), int(y)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected x,y integers, got {text!r}") from None


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; those are input errors here."""

    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_pipeline_flags(p, manifest_required=True):
    p.add_argument("--manifest", required=manifest_required,
                   help="stack manifest JSON")
    p.add_argument("--u-samples", type=int, dest="u_samples",
                   help="aperture samples U (odd)")
    p.add_argument("--lambda", type=float, dest="smoothness_weight",
                   help="smoothness weight for the focus map")
    p.add_argument("--median-radius", type=int, dest="median_radius",
                   help="label median-filter radius")
    p.add_argument("--max-parallax", type=float, dest="max_parallax",
                   help="target edge-of-aperture shift in pixels")


def build_parser():
    parser = _Parser(prog="lumistack",
                     description="Light-field reconstruction from a "
                                 "fixed-camera focal stack.")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=fn)
        p.add_argument("--threads", type=int,
                       default=max(1, min(4, os.cpu_count() or 1)),
                       help="worker thread cap")
        return p

    p = add("calibrate", cmd_calibrate, "fit the focus-param/depth model")
    p.add_argument("--table", help="calibration CSV (param,near_m,far_m)")
    p.add_argument("--manifest", help="manifest whose calibration to use")
    p.add_argument("--out", required=True, help="model JSON path")

    p = add("focusmap", cmd_focusmap, "estimate the per-pixel focus labels")
    _add_pipeline_flags(p)
    p.add_argument("--out", required=True, help="label PNG path")

    p = add("depthmap", cmd_depthmap, "convert focus labels to depths")
    _add_pipeline_flags(p)
    p.add_argument("--focus-map", help="reuse an existing label PNG")
    p.add_argument("--out", required=True, help="16-bit mm PNG path")

    p = add("extended", cmd_extended, "render the all-in-focus image")
    _add_pipeline_flags(p)
    p.add_argument("--out", required=True, help="PNG path")

    p = add("reconstruct", cmd_reconstruct, "build the light-field slab")
    _add_pipeline_flags(p)
    p.add_argument("--out", required=True, help="slab file path")

    p = add("sweep", cmd_sweep, "render a perspective sweep from a slab")
    p.add_argument("--slab", required=True)
    p.add_argument("--u-min", type=int, dest="u_min")
    p.add_argument("--u-max", type=int, dest="u_max")
    p.add_argument("--frames", type=int, default=9)
    p.add_argument("--out", required=True, help="output directory")

    p = add("refocus", cmd_refocus, "render a refocused image from a slab")
    p.add_argument("--slab", required=True)
    p.add_argument("--depth", type=float, help="focus depth in meters")
    p.add_argument("--click", type=_parse_click, help="x,y pixel to focus")
    p.add_argument("--focus-map", help="label PNG (needed with --click)")
    p.add_argument("--out", required=True, help="PNG path")

    p = add("serve", cmd_serve, "serve the interactive viewer endpoints")
    p.add_argument("--slab", required=True)
    p.add_argument("--focus-map", required=True, help="label PNG")
    p.add_argument("--depth-map", help="16-bit mm PNG to serve as-is")
    p.add_argument("--static", help="directory with the viewer page")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8763)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (LumistackError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1
    except Exception as exc:     # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
