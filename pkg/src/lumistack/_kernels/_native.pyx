# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. See ``pure`` for the reference semantics."""

from libc.math cimport NAN, floor

import numpy as np

cimport numpy as cnp


def max_flow(cnp.int32_t[::1] arc_head not None,
             double[::1] arc_cap not None,
             cnp.int32_t[::1] adj_start not None,
             cnp.int32_t[::1] adj_list not None,
             int source, int sink):
    """Dinic max-flow; same contract as ``pure.max_flow``."""
    cdef int n = adj_start.shape[0] - 1
    cdef cnp.int32_t[::1] level = np.empty(n, dtype=np.int32)
    cdef cnp.int32_t[::1] it = np.empty(n, dtype=np.int32)
    cdef cnp.int32_t[::1] queue = np.empty(n, dtype=np.int32)
    cdef cnp.int32_t[::1] path = np.empty(n + 1, dtype=np.int32)
    cdef cnp.int32_t[::1] nodes = np.empty(n + 1, dtype=np.int32)
    reachable = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] reach = reachable
    cdef double flow = 0.0, bottleneck
    cdef int i, v, w, k, a, d, depth, qhead, qtail, end
    cdef bint advanced

    with nogil:
        while True:
            for i in range(n):
                level[i] = -1
            level[source] = 0
            queue[0] = source
            qhead = 0
            qtail = 1
            while qhead < qtail:
                v = queue[qhead]
                qhead += 1
                for k in range(adj_start[v], adj_start[v + 1]):
                    a = adj_list[k]
                    w = arc_head[a]
                    if arc_cap[a] > 0.0 and level[w] < 0:
                        level[w] = level[v] + 1
                        queue[qtail] = w
                        qtail += 1
            if level[sink] < 0:
                break

            for i in range(n):
                it[i] = adj_start[i]
            v = source
            depth = 0
            nodes[0] = source
            while True:
                if v == sink:
                    bottleneck = arc_cap[path[0]]
                    for i in range(1, depth):
                        if arc_cap[path[i]] < bottleneck:
                            bottleneck = arc_cap[path[i]]
                    for i in range(depth):
                        a = path[i]
                        arc_cap[a] -= bottleneck
                        arc_cap[a ^ 1] += bottleneck
                    flow += bottleneck
                    d = 0
                    while d < depth and arc_cap[path[d]] > 0.0:
                        d += 1
                    depth = d
                    v = nodes[depth]
                    continue
                k = it[v]
                end = adj_start[v + 1]
                advanced = False
                while k < end:
                    a = adj_list[k]
                    w = arc_head[a]
                    if arc_cap[a] > 0.0 and level[w] == level[v] + 1:
                        advanced = True
                        break
                    k += 1
                it[v] = k
                if advanced:
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

        reach[source] = 1
        queue[0] = source
        qhead = 0
        qtail = 1
        while qhead < qtail:
            v = queue[qhead]
            qhead += 1
            for k in range(adj_start[v], adj_start[v + 1]):
                a = adj_list[k]
                w = arc_head[a]
                if arc_cap[a] > 0.0 and reach[w] == 0:
                    reach[w] = 1
                    queue[qtail] = w
                    qtail += 1

    return flow, reachable


def paint_rows(double[:, :, :, ::1] images not None,
               cnp.uint8_t[:, :, ::1] masks not None,
               cnp.int32_t[::1] op_src not None,
               cnp.uint8_t[::1] op_masked not None,
               cnp.int32_t[:, ::1] op_shift not None,
               double[:, :, :, ::1] slab not None,
               cnp.uint8_t[:, :, ::1] written not None,
               cnp.int16_t[:, :, ::1] prov not None,
               int y0, int y1):
    """Painter ops over rows [y0, y1); see ``pure.paint_rows``."""
    cdef int n_ops = op_shift.shape[0]
    cdef int n_u = op_shift.shape[1]
    cdef int x_len = slab.shape[2]
    cdef int n_ch = slab.shape[3]
    cdef int o, s, y, j, x, c, d, xlo, xhi

    with nogil:
        for o in range(n_ops):
            s = op_src[o]
            for y in range(y0, y1):
                for j in range(n_u):
                    d = op_shift[o, j]
                    xlo = -d if d < 0 else 0
                    xhi = x_len - d if d > 0 else x_len
                    if op_masked[o]:
                        for x in range(xlo, xhi):
                            if masks[o, y, x]:
                                for c in range(n_ch):
                                    slab[y, j, x + d, c] = images[s, y, x, c]
                                written[y, j, x + d] = 1
                                prov[y, j, x + d] = <cnp.int16_t> o
                    else:
                        for x in range(xlo, xhi):
                            for c in range(n_ch):
                                slab[y, j, x + d, c] = images[s, y, x, c]
                            written[y, j, x + d] = 1
                            prov[y, j, x + d] = <cnp.int16_t> o


def integrate_rows(double[:, :, :, ::1] slab not None,
                   cnp.int32_t[::1] u_off not None,
                   double slope,
                   double[:, :, ::1] out not None,
                   int y0, int y1):
    """Sloped-line averaging over rows [y0, y1); see ``pure.integrate_rows``."""
    cdef int n_u = slab.shape[1]
    cdef int x_len = slab.shape[2]
    cdef int n_ch = slab.shape[3]

    pos_np = (np.arange(x_len)[None, :]
              + slope * np.asarray(u_off)[:, None].astype(np.float64))
    valid_np = ((pos_np >= 0.0) & (pos_np <= x_len - 1)).astype(np.uint8)
    i0_np = np.clip(np.floor(pos_np).astype(np.int32), 0, x_len - 1)
    i1_np = np.clip(i0_np + 1, 0, x_len - 1)
    w1_np = pos_np - i0_np
    cnt_np = valid_np.sum(axis=0, dtype=np.int32)
    first_np = np.where(cnt_np > 0,
                        np.argmax(valid_np, axis=0), -1).astype(np.int32)

    cdef cnp.uint8_t[:, ::1] valid = valid_np
    cdef cnp.int32_t[:, ::1] i0 = i0_np
    cdef cnp.int32_t[:, ::1] i1 = i1_np
    cdef double[:, ::1] w1 = w1_np
    cdef cnp.int32_t[::1] cnt = cnt_np
    cdef cnp.int32_t[::1] first = first_np
    cdef int y, x, c, j, fj
    cdef double base, acc, v

    with nogil:
        for y in range(y0, y1):
            for x in range(x_len):
                fj = first[x]
                if fj < 0:
                    for c in range(n_ch):
                        out[y, x, c] = NAN
                    continue
                for c in range(n_ch):
                    base = (slab[y, fj, i0[fj, x], c] * (1.0 - w1[fj, x])
                            + slab[y, fj, i1[fj, x], c] * w1[fj, x])
                    acc = 0.0
                    for j in range(n_u):
                        if valid[j, x]:
                            v = (slab[y, j, i0[j, x], c] * (1.0 - w1[j, x])
                                 + slab[y, j, i1[j, x], c] * w1[j, x])
                            acc += v - base
                    out[y, x, c] = base + acc / cnt[x]
