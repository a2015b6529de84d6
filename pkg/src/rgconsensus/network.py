"""Switching weighted digraphs and the projected consensus update.

Edges are stored as ``(receiver, sender) -> weight``: agent ``i`` listens to
agent ``j`` with weight ``a_ij``.  Nodes are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInterval, NegativeDiagonal, NotConverged

DEFAULT_WEIGHT_FLOOR = 0.1


@dataclass(frozen=True)
class WeightedDigraph:
    n_nodes: int
    edges: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (i, j), w in dict(self.edges).items():
            i, j = int(i), int(j)
            if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
                raise ValueError(f"edge ({i}, {j}) outside 0..{self.n_nodes - 1}")
            if i == j:
                raise ValueError("self loops are implied by the row sums; do not list them")
            clean[(i, j)] = float(w)
        object.__setattr__(self, "edges", clean)

    def validate(self, weight_floor: float = DEFAULT_WEIGHT_FLOOR) -> None:
        for (i, j), w in self.edges.items():
            if not weight_floor < w <= 1.0:
                raise ValueError(f"weight {w} of edge ({i}, {j}) outside ({weight_floor}, 1]")
        perron(self)


def perron(g: WeightedDigraph) -> np.ndarray:
    """Row-stochastic weight matrix; the diagonal takes up the remainder of each row."""
    P = np.zeros((g.n_nodes, g.n_nodes))
    for (i, j), w in g.edges.items():
        P[i, j] = w
    off = P.sum(axis=1)
    if np.any(off > 1.0 + 1e-12):
        bad = int(np.argmax(off))
        raise NegativeDiagonal(f"row {bad} weights sum to {off[bad]} > 1")
    P[np.diag_indices(g.n_nodes)] = 1.0 - off
    return P


@dataclass(frozen=True)
class GraphSchedule:
    """Which graph is active at each step.

    ``kind="cyclic"``: graphs are visited in order, each held for ``period``
    steps.  ``kind="timeline"``: ``timeline[t]`` is the graph index at step
    ``t`` and the timeline repeats.  ``window`` is the horizon ``T`` over which
    the union graph must be strongly connected.
    """

    graphs: tuple
    kind: str = "cyclic"
    period: int = 1
    timeline: tuple = ()
    window: int = 0
    weight_floor: float = DEFAULT_WEIGHT_FLOOR

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        object.__setattr__(self, "timeline", tuple(int(k) for k in self.timeline))
        if not self.graphs:
            raise ValueError("schedule needs at least one graph")
        sizes = {g.n_nodes for g in self.graphs}
        if len(sizes) != 1:
            raise ValueError(f"graphs disagree on node count: {sorted(sizes)}")
        if self.kind not in ("cyclic", "timeline"):
            raise ValueError(f"unknown switching kind {self.kind!r}")
        if self.kind == "cyclic" and self.period < 1:
            raise ValueError("period must be >= 1")
        if self.kind == "timeline":
            if not self.timeline:
                raise ValueError("timeline schedule needs a nonempty timeline")
            if min(self.timeline) < 0 or max(self.timeline) >= len(self.graphs):
                raise ValueError("timeline refers to a missing graph")
        for g in self.graphs:
            g.validate(self.weight_floor)

    @property
    def n_nodes(self) -> int:
        return self.graphs[0].n_nodes

    @property
    def cycle_length(self) -> int:
        if self.kind == "cyclic":
            return self.period * len(self.graphs)
        return len(self.timeline)

    def index_at(self, t: int) -> int:
        if self.kind == "cyclic":
            return (t // self.period) % len(self.graphs)
        return self.timeline[t % len(self.timeline)]

    def graph_at(self, t: int) -> WeightedDigraph:
        return self.graphs[self.index_at(t)]

    def perron_at(self, t: int) -> np.ndarray:
        return perron(self.graph_at(t))


def strongly_connected_components(n: int, edges) -> list[list[int]]:
    """Tarjan's algorithm (iterative) on nodes ``0..n-1`` with arcs ``u -> v``."""
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pos = work.pop()
            if pos == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            recurse = False
            for k in range(pos, len(adj[v])):
                w = adj[v][k]
                if index[w] == -1:
                    work.append((v, k + 1))
                    work.append((w, 0))
                    recurse = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if recurse:
                continue
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    return comps


@dataclass
class ConnectivityReport:
    ok: bool
    windows: list = field(default_factory=list)  # (start, sorted union edges, n_components)

    def witness(self):
        """First window whose union graph is not strongly connected, else the first window."""
        for w in self.windows:
            if w[2] != 1:
                return w
        return self.windows[0] if self.windows else None


def check_uniform_connectivity(sched: GraphSchedule) -> ConnectivityReport:
    """Check that the union over every window ``[t, t + T]`` is strongly connected.

    Arcs point from sender to receiver (information flow).
    """
    windows = []
    ok = True
    for t in range(sched.cycle_length):
        union = set()
        for s in range(t, t + sched.window + 1):
            union.update(sched.graph_at(s).edges)
        arcs = [(j, i) for (i, j) in union]
        ncomp = len(strongly_connected_components(sched.n_nodes, arcs))
        windows.append((t, sorted(union), ncomp))
        ok &= ncomp == 1
    return ConnectivityReport(ok=ok, windows=windows)


def intervals_intersection(intervals) -> tuple[float, float]:
    lo = max(a for a, _ in intervals)
    hi = min(b for _, b in intervals)
    return lo, hi


def consensus_step(cloud, P, S, intervals) -> np.ndarray:
    """Mix, propagate by ``S``, then clamp each rate into its own interval.

    ``cloud`` is ``(N, 2)``; ``P`` a Perron matrix; ``intervals[i] = (lo, hi)``.
    Clamping the second component is the exact Euclidean projection onto
    ``R x [lo, hi]``.
    """
    W = np.asarray(cloud, dtype=float)
    iv = np.asarray(intervals, dtype=float)
    if np.any(iv[:, 0] >= iv[:, 1]):
        raise EmptyInterval("some agent has an empty rate interval")
    nxt = (P @ W) @ np.asarray(S, dtype=float).T
    nxt[:, 1] = np.clip(nxt[:, 1], iv[:, 0], iv[:, 1])
    return nxt


def spread(points) -> float:
    """Largest pairwise Euclidean distance between rows."""
    X = np.asarray(points, dtype=float)
    d = X[:, None, :] - X[None, :, :]
    return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", d, d))))


def consensus_value_estimate(z_trace, tol: float = 1e-6) -> np.ndarray:
    """Common time-0-frame reference once the agents agree to within ``tol``.

    ``z_trace`` is ``(T, N, 2)`` holding ``S^-t w_i(t)``.
    """
    Z = np.asarray(z_trace, dtype=float)
    final = Z[-1]
    s = spread(final)
    if not s <= tol:
        raise NotConverged(f"agents still disagree by {s:.3e} (> {tol:.1e})")
    return final.mean(axis=0)
