#!/usr/bin/env python3
"""Head-to-head timing of the compiled kernels against the pure reference.

Covers the three hot loops — Dinic max-flow, painter back-projection, and
sloped integration — on workloads sized like a real reconstruction. Run
from a checkout with the package installed:

    python3 benchmarks/bench_kernels.py [--repeats N] [--scale S]
"""

import argparse
import math
import time

import numpy as np

from lumistack._kernels import pure

try:
    from lumistack._kernels import _native as native
except ImportError:  # pure-only build
    native = None


def build_csr(num_nodes, arcs):
    """Interleaved forward/reverse CSR arc arrays, as the solver builds."""
    tails = np.array([a[0] for a in arcs], dtype=np.int32)
    heads = np.array([a[1] for a in arcs], dtype=np.int32)
    caps = np.array([a[2] for a in arcs], dtype=np.float64)
    arc_head = np.ravel(np.column_stack((heads, tails))).astype(np.int32)
    arc_cap = np.ravel(np.column_stack((caps, np.zeros_like(caps))))
    arc_tail = np.ravel(np.column_stack((tails, heads)))
    order = np.argsort(arc_tail, kind="stable").astype(np.int32)
    counts = np.bincount(arc_tail, minlength=num_nodes)
    adj_start = np.concatenate(([0], np.cumsum(counts))).astype(np.int32)
    return arc_head, arc_cap, adj_start, order


def best_of(repeats, fn):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_max_flow(impl, repeats, rng, scale):
    """Expansion-move-sized network: a grid with terminal arcs."""
    side = int(96 * scale)
    num_pix = side * side
    arcs = []
    for p in range(num_pix):
        arcs.append((0, p + 2, float(rng.uniform(0.0, 2.0))))
        arcs.append((p + 2, 1, float(rng.uniform(0.0, 2.0))))
        y, x = divmod(p, side)
        if x + 1 < side:
            arcs.append((p + 2, p + 3, float(rng.uniform(0.0, 1.0))))
        if y + 1 < side:
            arcs.append((p + 2, p + 2 + side, float(rng.uniform(0.0, 1.0))))
    arc_head, arc_cap, adj_start, adj_list = build_csr(num_pix + 2, arcs)

    def run():
        impl.max_flow(arc_head, arc_cap.copy(), adj_start, adj_list, 0, 1)

    return best_of(repeats, run)


def make_paint_inputs(rng, scale):
    num, height, width, chans, n_u = 8, int(256 * scale), int(256 * scale), 3, 33
    images = rng.random((num, height, width, chans))
    masks = (rng.random((num, height, width)) < 0.2).astype(np.uint8)
    op_src = np.arange(num, dtype=np.int32)
    op_masked = np.ones(num, dtype=np.uint8)
    op_masked[0] = 0
    offsets = np.arange(n_u) - n_u // 2
    slopes = -np.arange(num, dtype=np.float64) / 3.5
    op_shift = np.floor(slopes[:, None] * offsets[None, :]
                        + 0.5).astype(np.int32)
    return images, masks, op_src, op_masked, op_shift


def bench_paint_rows(impl, repeats, rng, scale):
    images, masks, op_src, op_masked, op_shift = make_paint_inputs(rng, scale)
    _, height, width, chans = images.shape
    n_u = op_shift.shape[1]

    def run():
        slab = np.zeros((height, n_u, width, chans))
        written = np.zeros((height, n_u, width), dtype=np.uint8)
        prov = np.full((height, n_u, width), -1, dtype=np.int16)
        impl.paint_rows(images, masks, op_src, op_masked, op_shift,
                        slab, written, prov, 0, height)

    return best_of(repeats, run)


def bench_integrate_rows(impl, repeats, rng, scale):
    images, masks, op_src, op_masked, op_shift = make_paint_inputs(rng, scale)
    _, height, width, chans = images.shape
    n_u = op_shift.shape[1]
    slab = np.zeros((height, n_u, width, chans))
    written = np.zeros((height, n_u, width), dtype=np.uint8)
    prov = np.full((height, n_u, width), -1, dtype=np.int16)
    pure.paint_rows(images, masks, op_src, op_masked, op_shift,
                    slab, written, prov, 0, height)
    u_off = (np.arange(n_u) - n_u // 2).astype(np.int32)

    def run():
        out = np.empty((height, width, chans))
        impl.integrate_rows(slab, u_off, -1.7, out, 0, height)

    return best_of(repeats, run)


BENCHES = (
    ("max-flow", bench_max_flow),
    ("paint-rows", bench_paint_rows),
    ("integrate-rows", bench_integrate_rows),
)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=3,
                        help="take the best of this many runs (default 3)")
    parser.add_argument("--scale", type=float, default=1.0,
                        help="linear workload scale factor (default 1.0)")
    args = parser.parse_args(argv)

    if native is None:
        print("compiled backend unavailable; timing the pure reference only")
    print(f"{'kernel':<16}{'pure':>10}{'native':>10}{'speedup':>10}")
    for name, bench in BENCHES:
        t_pure = bench(pure, args.repeats, np.random.default_rng(7), args.scale)
        if native is None:
            print(f"{name:<16}{t_pure:>9.4f}s{'-':>10}{'-':>10}")
            continue
        t_nat = bench(native, args.repeats, np.random.default_rng(7),
                      args.scale)
        print(f"{name:<16}{t_pure:>9.4f}s{t_nat:>9.4f}s"
              f"{t_pure / t_nat:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
