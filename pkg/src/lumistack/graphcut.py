"""Multi-label energy minimization on the pixel grid via alpha-expansion.

The energy is a sum of per-pixel data costs and a pairwise smoothness term
over 4-connected neighbors. Each expansion move ("every pixel may switch to
label alpha or keep its label") is solved exactly as a binary min-cut using
the auxiliary-node construction: a pair with differing current labels gets
an extra node carrying the pair's current cost on its sink link. For label
counts where the smoothness term violates the triangle inequality (K = 2,
3) the min-cut implicitly truncates the offending term, so moves remain
valid; acceptance is decided on the re-evaluated true energy either way.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import InvalidInputError


def smoothness_cost(label_a, label_b, num_labels):
    """Jump penalty between neighbor labels: 0 for equal labels, else
    0.5 + log|a - b| / log K, which grows with jump size but stays < 1.5."""
    k = num_labels
    if label_a == label_b:
        return 0.0
    if k < 2:
        raise InvalidInputError("distinct labels require at least 2 labels")
    if not (1 <= label_a <= k and 1 <= label_b <= k):
        raise InvalidInputError(
            f"labels ({label_a}, {label_b}) outside [1, {k}]")
    return 0.5 + np.log(abs(label_a - label_b)) / np.log(k)


def smoothness_table(num_labels):
    """(K+1, K+1) lookup of smoothness_cost; row/col 0 unused."""
    k = num_labels
    table = np.zeros((k + 1, k + 1))
    if k >= 2:
        idx = np.arange(1, k + 1)
        diff = np.abs(idx[:, None] - idx[None, :]).astype(np.float64)
        with np.errstate(divide="ignore"):
            vals = 0.5 + np.log(diff) / np.log(k)
        table[1:, 1:] = np.where(diff == 0, 0.0, vals)
    return table


class FlowNetwork:
    """Directed flow network; arcs are added in forward/backward pairs."""

    def __init__(self, num_nodes, source, sink):
        if num_nodes < 2:
            raise InvalidInputError("network needs at least source and sink")
        if not (0 <= source < num_nodes and 0 <= sink < num_nodes):
            raise InvalidInputError("terminal ids out of range")
        if source == sink:
            raise InvalidInputError("source and sink must differ")
        self.num_nodes = num_nodes
        self.source = source
        self.sink = sink
        self._tails = []
        self._heads = []
        self._caps = []
        self._rev_caps = []

    def add_arc(self, tail, head, cap, rev_cap=0.0):
        self.add_arcs(np.array([tail]), np.array([head]),
                      np.array([float(cap)]), np.array([float(rev_cap)]))

    def add_arcs(self, tails, heads, caps, rev_caps=None):
        tails = np.asarray(tails, dtype=np.int32)
        heads = np.asarray(heads, dtype=np.int32)
        caps = np.asarray(caps, dtype=np.float64)
        if rev_caps is None:
            rev_caps = np.zeros_like(caps)
        else:
            rev_caps = np.asarray(rev_caps, dtype=np.float64)
        if not (len(tails) == len(heads) == len(caps) == len(rev_caps)):
            raise InvalidInputError("arc array lengths differ")
        if len(tails) == 0:
            return
        if tails.min() < 0 or tails.max() >= self.num_nodes \
                or heads.min() < 0 or heads.max() >= self.num_nodes:
            raise InvalidInputError("arc endpoint out of range")
        for c in (caps, rev_caps):
            if not np.all(np.isfinite(c)) or c.min() < 0:
                raise InvalidInputError(
                    "capacities must be finite and non-negative")
        self._tails.append(tails)
        self._heads.append(heads)
        self._caps.append(caps)
        self._rev_caps.append(rev_caps)

    def solve(self):
        """Max flow from source to sink.

        Returns (flow, source_side) where source_side marks the nodes still
        reachable from the source in the residual network; arcs crossing out
        of that set form a minimum cut whose capacity equals the flow.
        """
        n = self.num_nodes
        if not self._tails:
            side = np.zeros(n, dtype=bool)
            side[self.source] = True
            return 0.0, side
        tails = np.concatenate(self._tails)
        heads = np.concatenate(self._heads)
        caps = np.concatenate(self._caps)
        rev_caps = np.concatenate(self._rev_caps)

        # interleave so arc 2i goes tail->head and 2i+1 is its reverse
        arc_head = np.ravel(np.column_stack((heads, tails))).astype(np.int32)
        arc_cap = np.ravel(np.column_stack((caps, rev_caps)))
        arc_tail = np.ravel(np.column_stack((tails, heads)))
        order = np.argsort(arc_tail, kind="stable").astype(np.int32)
        counts = np.bincount(arc_tail, minlength=n)
        adj_start = np.concatenate(([0], np.cumsum(counts))).astype(np.int32)

        flow, reachable = _kernels.max_flow(
            arc_head, arc_cap, adj_start, order, self.source, self.sink)
        return float(flow), reachable.astype(bool)


def max_flow(net):
    """Maximum flow and min-cut source side of a FlowNetwork."""
    return net.solve()


@dataclass(frozen=True)
class EnergyProblem:
    """Grid labeling problem: data_cost is (H, W, K), labels are 1-based,
    smoothness_weight scales the pairwise term."""

    width: int
    height: int
    num_labels: int
    data_cost: np.ndarray
    smoothness_weight: float = 1.0

    def __post_init__(self):
        expected = (self.height, self.width, self.num_labels)
        if self.data_cost.shape != expected:
            raise InvalidInputError(
                f"data_cost shape {self.data_cost.shape}, expected "
                f"{expected}")
        if self.num_labels < 1:
            raise InvalidInputError("need at least one label")
        if not np.all(np.isfinite(self.data_cost)) or self.data_cost.min() < 0:
            raise InvalidInputError(
                "data costs must be finite and non-negative")
        if not (np.isfinite(self.smoothness_weight)
                and self.smoothness_weight >= 0):
            raise InvalidInputError(
                f"smoothness weight must be >= 0, got "
                f"{self.smoothness_weight}")


def _check_labels(prob, labels):
    labels = np.asarray(labels)
    if labels.shape != (prob.height, prob.width):
        raise InvalidInputError(
            f"labeling shape {labels.shape}, expected "
            f"{(prob.height, prob.width)}")
    if labels.min() < 1 or labels.max() > prob.num_labels:
        raise InvalidInputError("labeling has out-of-range labels")
    return labels.astype(np.int32)


def energy(prob, labels):
    """Total energy of a labeling: data plus weighted smoothness, each
    4-neighbor pair counted once."""
    labels = _check_labels(prob, labels)
    d = np.take_along_axis(prob.data_cost, labels[:, :, None] - 1,
                           axis=2)[:, :, 0]
    total = float(d.sum())
    if prob.smoothness_weight > 0 and prob.num_labels >= 1:
        table = smoothness_table(prob.num_labels)
        h = table[labels[:, :-1], labels[:, 1:]].sum()
        v = table[labels[:-1, :], labels[1:, :]].sum()
        total += prob.smoothness_weight * float(h + v)
    return total


def _grid_pairs(height, width):
    """Flat pixel index pairs for the 4-connected grid, each pair once."""
    idx = np.arange(height * width, dtype=np.int32).reshape(height, width)
    hp = np.stack((idx[:, :-1].ravel(), idx[:, 1:].ravel()))
    vp = np.stack((idx[:-1, :].ravel(), idx[1:, :].ravel()))
    return np.concatenate((hp, vp), axis=1)


def _expansion_move(prob, flat_labels, alpha, data, pairs, table):
    """Solve one binary move exactly; returns the proposed flat labeling."""
    n = flat_labels.size
    lam = prob.smoothness_weight
    lp = flat_labels[pairs[0]]
    lq = flat_labels[pairs[1]]

    same = lp == lq
    diff = ~same
    n_aux = int(diff.sum())
    source = n + n_aux
    sink = source + 1
    net = FlowNetwork(n + n_aux + 2, source, sink)

    keep_cost = data[np.arange(n), flat_labels - 1]
    move_cost = data[:, alpha - 1]
    # pixels already at alpha must stay there: blocking cost on the keep side
    big = float(keep_cost.sum() + move_cost.sum()
                + lam * 1.5 * pairs.shape[1] + 1.0)
    keep_cost = np.where(flat_labels == alpha, big, keep_cost)

    nodes = np.arange(n, dtype=np.int32)
    net.add_arcs(np.full(n, source, np.int32), nodes, move_cost)
    net.add_arcs(nodes, np.full(n, sink, np.int32), keep_cost)

    if lam > 0 and same.any():
        p = pairs[0, same]
        q = pairs[1, same]
        cap = lam * table[lp[same], alpha]
        net.add_arcs(p, q, cap, cap)
    if lam > 0 and n_aux:
        p = pairs[0, diff]
        q = pairs[1, diff]
        aux = np.arange(n, n + n_aux, dtype=np.int32)
        cap_pa = lam * table[lp[diff], alpha]
        cap_aq = lam * table[alpha, lq[diff]]
        cap_at = lam * table[lp[diff], lq[diff]]
        net.add_arcs(p, aux, cap_pa, cap_pa)
        net.add_arcs(aux, q, cap_aq, cap_aq)
        net.add_arcs(aux, np.full(n_aux, sink, np.int32), cap_at)

    _, source_side = net.solve()
    return np.where(source_side[:n], flat_labels, alpha).astype(np.int32)


def alpha_expansion(prob, init=None, sweep_energies=None):
    """Iterated expansion moves until a full sweep over labels improves
    nothing.

    ``init`` defaults to the pointwise argmin of the data cost. A move is
    accepted only if it strictly lowers the true energy, so the result never
    exceeds E(init) and the label sweep (ascending, repeated) is fully
    deterministic. ``sweep_energies``, if given a list, receives the energy
    after initialization and after each sweep.
    """
    if init is None:
        init = np.argmax(-prob.data_cost, axis=2).astype(np.int32) + 1
    labels = _check_labels(prob, init)
    if sweep_energies is None:
        sweep_energies = []

    best = energy(prob, labels)
    sweep_energies.append(best)
    if prob.num_labels == 1:
        return labels

    data = prob.data_cost.reshape(-1, prob.num_labels)
    pairs = _grid_pairs(prob.height, prob.width)
    table = smoothness_table(prob.num_labels)
    flat = labels.ravel()

    improved = True
    while improved:
        improved = False
        for alpha in range(1, prob.num_labels + 1):
            proposal = _expansion_move(prob, flat, alpha, data, pairs, table)
            cand = energy(prob, proposal.reshape(labels.shape))
            if cand < best:
                best = cand
                flat = proposal
                improved = True
        sweep_energies.append(best)
    return flat.reshape(labels.shape)
