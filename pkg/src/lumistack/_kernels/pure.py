"""Reference kernels, NumPy/Python only.

Call signatures match ``_native`` exactly; the backend chosen in
``__init__`` is interchangeable. The painting kernel is bit-identical to the
compiled one (both only copy values). The integration kernel may differ from
the compiled one in the last ulp because NumPy sums pairwise.
"""

import numpy as np


def max_flow(arc_head, arc_cap, adj_start, adj_list, source, sink):
    """Dinic's algorithm on a CSR adjacency structure.

    Arcs come in pairs: arc ``i ^ 1`` is the reverse of arc ``i``.
    ``arc_cap`` holds residual capacities and is updated in place.

    Parameters
    ----------
    arc_head : int32 array (2E,)
        Head (target node) of each arc.
    arc_cap : float64 array (2E,)
        Arc capacities, overwritten with the final residual capacities.
    adj_start : int32 array (N + 1,)
        CSR row pointer into ``adj_list``.
    adj_list : int32 array (2E,)
        Arc ids leaving each node.
    source, sink : int

    Returns
    -------
    flow : float
    reachable : uint8 array (N,)
        1 for nodes on the source side of the minimum cut.
    """
    n = len(adj_start) - 1
    head = arc_head.tolist()
    cap = arc_cap.tolist()
    start = adj_start.tolist()
    arcs = adj_list.tolist()

    level = [0] * n
    it = [0] * n
    queue = [0] * n
    path = [0] * (n + 1)
    nodes = [0] * (n + 1)
    flow = 0.0

    def bfs():
        for i in range(n):
            level[i] = -1
        level[source] = 0
        queue[0] = source
        qhead, qtail = 0, 1
        while qhead < qtail:
            v = queue[qhead]
            qhead += 1
            for k in range(start[v], start[v + 1]):
                a = arcs[k]
                w = head[a]
                if cap[a] > 0.0 and level[w] < 0:
                    level[w] = level[v] + 1
                    queue[qtail] = w
                    qtail += 1
        return level[sink] >= 0

    while bfs():
        for i in range(n):
            it[i] = start[i]
        v = source
        depth = 0
        nodes[0] = source
        while True:
            if v == sink:
                bottleneck = min(cap[path[i]] for i in range(depth))
                for i in range(depth):
                    a = path[i]
                    cap[a] -= bottleneck
                    cap[a ^ 1] += bottleneck
                flow += bottleneck
                d = 0
                while d < depth and cap[path[d]] > 0.0:
                    d += 1
                depth = d
                v = nodes[depth]
                continue
            # advance along the level graph from v, remembering progress
            k = it[v]
            end = start[v + 1]
            a = -1
            while k < end:
                a = arcs[k]
                w = head[a]
                if cap[a] > 0.0 and level[w] == level[v] + 1:
                    break
                k += 1
            it[v] = k
            if k < end:
                path[depth] = a
                depth += 1
                nodes[depth] = w
                v = w
            else:
                if depth == 0:
                    break
                level[v] = -1
                depth -= 1
                v = nodes[depth]
                it[v] += 1

    reachable = np.zeros(n, dtype=np.uint8)
    reach = reachable.tolist()
    reach[source] = 1
    queue[0] = source
    qhead, qtail = 0, 1
    while qhead < qtail:
        v = queue[qhead]
        qhead += 1
        for k in range(start[v], start[v + 1]):
            a = arcs[k]
            w = head[a]
            if cap[a] > 0.0 and not reach[w]:
                reach[w] = 1
                queue[qtail] = w
                qtail += 1
    reachable[:] = reach
    arc_cap[:] = cap
    return flow, reachable


def paint_rows(images, masks, op_src, op_masked, op_shift, slab, written,
               prov, y0, y1):
    """Run the painter's-algorithm ops over rows [y0, y1).

    Ops execute in order; later ops overwrite earlier ones. Op ``o`` copies
    pixels of ``images[op_src[o]]`` (all of them when ``op_masked[o]`` is 0,
    else those where ``masks[o]`` is set) into every u-layer of the slab,
    translated by the integer ``op_shift[o, u]``. Translations falling
    outside the x range are dropped. ``written`` and ``prov`` record
    coverage and the writing op per cell.
    """
    n_ops, n_u = op_shift.shape
    x_len = slab.shape[2]
    for o in range(n_ops):
        src = images[op_src[o], y0:y1]
        sel_rows = masks[o, y0:y1].view(bool) if op_masked[o] else None
        for j in range(n_u):
            d = int(op_shift[o, j])
            xlo = max(0, -d)
            xhi = min(x_len, x_len - d)
            if xhi <= xlo:
                continue
            src_sl = slice(xlo, xhi)
            tgt_sl = slice(xlo + d, xhi + d)
            if sel_rows is None:
                slab[y0:y1, j, tgt_sl] = src[:, src_sl]
                written[y0:y1, j, tgt_sl] = 1
                prov[y0:y1, j, tgt_sl] = o
            else:
                sel = sel_rows[:, src_sl]
                slab[y0:y1, j, tgt_sl][sel] = src[:, src_sl][sel]
                written[y0:y1, j, tgt_sl][sel] = 1
                prov[y0:y1, j, tgt_sl][sel] = o


def integrate_rows(slab, u_off, slope, out, y0, y1):
    """Average the slab along lines of the given slope, rows [y0, y1).

    For output pixel (y, x) the samples are ``slab[y, u, x + slope * u]``,
    linearly interpolated in x; samples outside [0, X-1] are dropped and the
    mean renormalizes over the rest. Accumulation is relative to the first
    valid sample so that identical samples reproduce their value exactly.
    Columns with no valid sample (possible only when u=0 is absent) come out
    NaN for the caller to patch.
    """
    n_u, x_len = slab.shape[1], slab.shape[2]
    pos = np.arange(x_len)[None, :] + slope * u_off[:, None].astype(np.float64)
    valid = (pos >= 0.0) & (pos <= x_len - 1)
    i0 = np.clip(np.floor(pos).astype(np.int64), 0, x_len - 1)
    i1 = np.clip(i0 + 1, 0, x_len - 1)
    w1 = (pos - i0)[:, :, None]
    w0 = 1.0 - w1
    cnt = valid.sum(axis=0)
    first = np.argmax(valid, axis=0)
    empty = cnt == 0
    ju = np.arange(n_u)[:, None]
    vmask = valid[None, :, :, None]

    for ya in range(y0, y1, 64):
        yb = min(ya + 64, y1)
        rows = slab[ya:yb]
        samples = rows[:, ju, i0, :] * w0 + rows[:, ju, i1, :] * w1
        samples = samples * vmask
        base = np.take_along_axis(samples, first.reshape(1, 1, -1, 1), axis=1)
        acc = ((samples - base) * vmask).sum(axis=1)
        res = base[:, 0] + acc / np.maximum(cnt, 1)[None, :, None]
        if empty.any():
            res[:, empty] = np.nan
        out[ya:yb] = res
