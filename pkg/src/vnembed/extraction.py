"""Extraction orders: rooted acyclic reorientations of request graphs.

An extraction order reorients every request edge so that the result is a
DAG in which all nodes are reachable from a chosen root. Its *labels* mark,
per edge, the targets of confluences (node pairs joined by two internally
node-disjoint paths) whose path edges include that edge. Outgoing edges of
a node are grouped into *bags* by transitive label overlap; the width of an
order is one plus the size of the largest bag label set. Width drives the
size of the decomposable LP relaxation, so finding low-width orders matters.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Protocol, Sequence


class RequestShaped(Protocol):
    """Anything with string node ids and directed string edge pairs."""

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]


class ExtractionError(Exception):
    pass


@dataclass(frozen=True)
class Digraph:
    """Minimal directed graph used by generators and width analyses."""

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]

    @classmethod
    def build(cls, nodes: Iterable[str], edges: Iterable[tuple[str, str]]) -> "Digraph":
        node_tuple = tuple(sorted(set(nodes)))
        edge_tuple = tuple(sorted(set(edges)))
        for (a, b) in edge_tuple:
            if a == b:
                raise ExtractionError(f"self-loop on {a!r}")
        return cls(nodes=node_tuple, edges=edge_tuple)


@dataclass(frozen=True)
class OrientedEdge:
    """One request edge as used inside an order; ``original`` keeps identity."""

    tail: str
    head: str
    original: tuple[str, str]
    reversed: bool


@dataclass(frozen=True)
class ExtractionOrder:
    """A rooted acyclic orientation. ``edges[k]`` reorients ``graph.edges[k]``."""

    nodes: tuple[str, ...]
    root: str
    edges: tuple[OrientedEdge, ...]

    @cached_property
    def node_index(self) -> dict[str, int]:
        return {i: k for k, i in enumerate(self.nodes)}

    @cached_property
    def out_edges(self) -> dict[str, tuple[int, ...]]:
        adj: dict[str, list[int]] = {i: [] for i in self.nodes}
        for k, e in enumerate(self.edges):
            adj[e.tail].append(k)
        return {i: tuple(v) for i, v in adj.items()}

    @cached_property
    def in_edges(self) -> dict[str, tuple[int, ...]]:
        adj: dict[str, list[int]] = {i: [] for i in self.nodes}
        for k, e in enumerate(self.edges):
            adj[e.head].append(k)
        return {i: tuple(v) for i, v in adj.items()}


def build_extraction_order(graph: RequestShaped, root: str) -> ExtractionOrder:
    """Orient all edges along BFS layers from ``root``.

    The undirected interpretation is traversed breadth first with neighbors
    visited in index order; each edge then points from its endpoint with the
    smaller ``(layer, index)`` key to the larger one. This always yields a
    valid order and keeps results reproducible.
    """
    nodes = tuple(graph.nodes)
    if root not in nodes:
        raise ExtractionError(f"root {root!r} is not a request node")
    index = {i: k for k, i in enumerate(nodes)}
    neighbors: dict[str, set[str]] = {i: set() for i in nodes}
    for (a, b) in graph.edges:
        neighbors[a].add(b)
        neighbors[b].add(a)
    layer = {root: 0}
    frontier = [root]
    while frontier:
        nxt: list[str] = []
        for u in sorted(frontier, key=index.__getitem__):
            for v in sorted(neighbors[u], key=index.__getitem__):
                if v not in layer:
                    layer[v] = layer[u] + 1
                    nxt.append(v)
        frontier = nxt
    if len(layer) != len(nodes):
        missing = sorted(set(nodes) - set(layer))
        raise ExtractionError(f"nodes unreachable from root: {missing}")
    oriented = []
    for (a, b) in graph.edges:
        flip = (layer[a], index[a]) > (layer[b], index[b])
        tail, head = (b, a) if flip else (a, b)
        oriented.append(OrientedEdge(tail=tail, head=head, original=(a, b), reversed=flip))
    return ExtractionOrder(nodes=nodes, root=root, edges=tuple(oriented))


def orientation_from_flags(
    graph: RequestShaped, root: str, reversed_flags: Sequence[bool]
) -> ExtractionOrder:
    """Build an order from explicit per-edge reversal flags (aligned with
    ``graph.edges``). Raises if the result is cyclic or not root-covering."""
    if len(reversed_flags) != len(graph.edges):
        raise ExtractionError("one reversal flag per edge required")
    oriented = tuple(
        OrientedEdge(tail=b, head=a, original=(a, b), reversed=True)
        if flip
        else OrientedEdge(tail=a, head=b, original=(a, b), reversed=False)
        for (a, b), flip in zip(graph.edges, reversed_flags)
    )
    order = ExtractionOrder(nodes=tuple(graph.nodes), root=root, edges=oriented)
    problem = _orientation_defect(order)
    if problem:
        raise ExtractionError(problem)
    return order


def _orientation_defect(order: ExtractionOrder) -> str | None:
    """Return a description of why the orientation is invalid, or None."""
    if order.root not in order.nodes:
        return f"root {order.root!r} is not a request node"
    index = order.node_index
    n = len(order.nodes)
    out_adj: list[list[int]] = [[] for _ in range(n)]
    indeg = [0] * n
    for e in order.edges:
        out_adj[index[e.tail]].append(index[e.head])
        indeg[index[e.head]] += 1
    stack = [k for k in range(n) if indeg[k] == 0]
    seen = 0
    indeg = list(indeg)
    while stack:
        u = stack.pop()
        seen += 1
        for v in out_adj[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                stack.append(v)
    if seen != n:
        return "orientation is not acyclic"
    reach = {index[order.root]}
    stack = [index[order.root]]
    while stack:
        u = stack.pop()
        for v in out_adj[u]:
            if v not in reach:
                reach.add(v)
                stack.append(v)
    if len(reach) != n:
        missing = sorted(order.nodes[k] for k in range(n) if k not in reach)
        return f"nodes unreachable from root: {missing}"
    return None


@dataclass(frozen=True)
class EdgeBag:
    """A group of outgoing edges of one node, merged by label overlap."""

    node: str
    edges: tuple[int, ...]
    labels: tuple[str, ...]


@dataclass(frozen=True)
class LabeledExtractionOrder:
    order: ExtractionOrder
    labels: tuple[tuple[str, ...], ...]
    bags: Mapping[str, tuple[EdgeBag, ...]]
    label_roots: Mapping[str, str]
    width: int

    def labels_of_original(self, edge: tuple[str, str]) -> tuple[str, ...]:
        for k, oe in enumerate(self.order.edges):
            if oe.original == edge:
                return self.labels[k]
        raise KeyError(edge)


class _OrderView:
    """Index-level scratch view of an order, shared by the label routines."""

    def __init__(self, order: ExtractionOrder):
        self.order = order
        self.index = order.node_index
        self.n = len(order.nodes)
        self.tails = [self.index[e.tail] for e in order.edges]
        self.heads = [self.index[e.head] for e in order.edges]
        self.out_adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for k in range(len(order.edges)):
            self.out_adj[self.tails[k]].append((self.heads[k], k))
        self.indeg = [0] * self.n
        for h in self.heads:
            self.indeg[h] += 1
        self.desc = self._descendant_masks()

    def _descendant_masks(self) -> list[int]:
        indeg = list(self.indeg)
        stack = [v for v in range(self.n) if indeg[v] == 0]
        topo: list[int] = []
        while stack:
            u = stack.pop()
            topo.append(u)
            for (v, _) in self.out_adj[u]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    stack.append(v)
        if len(topo) != self.n:
            raise ExtractionError("orientation is not acyclic")
        desc = [0] * self.n
        for u in reversed(topo):
            mask = 1 << u
            for (v, _) in self.out_adj[u]:
                mask |= desc[v]
            desc[u] = mask
        return desc

    def path_edges(self, i: int, j: int) -> list[int]:
        """Edges lying on some i -> j path."""
        di = self.desc[i]
        return [
            k
            for k in range(len(self.tails))
            if (di >> self.tails[k]) & 1 and (self.desc[self.heads[k]] >> j) & 1
        ]

    def reaches(self, i: int, j: int, edge_ids: Iterable[int], skip: int = -1) -> bool:
        if i == skip or j == skip:
            return False
        adj: dict[int, list[int]] = {}
        for k in edge_ids:
            adj.setdefault(self.tails[k], []).append(self.heads[k])
        seen = {i}
        stack = [i]
        while stack:
            u = stack.pop()
            if u == j:
                return True
            for v in adj.get(u, ()):
                if v != skip and v not in seen:
                    seen.add(v)
                    stack.append(v)
        return False

    def two_disjoint_paths(self, i: int, j: int) -> bool:
        """True iff two internally node-disjoint i -> j paths exist."""
        if i == j or not (self.desc[i] >> j) & 1:
            return False
        eij = self.path_edges(i, j)
        direct = [k for k in eij if self.tails[k] == i and self.heads[k] == j]
        if len(direct) >= 2:
            return True
        if direct:
            rest = [k for k in eij if k not in direct]
            return self.reaches(i, j, rest)
        inner = {self.tails[k] for k in eij} | {self.heads[k] for k in eij}
        inner -= {i, j}
        if not inner:
            return False
        return all(self.reaches(i, j, eij, skip=k) for k in sorted(inner))


def compute_edge_labels(order: ExtractionOrder) -> tuple[tuple[str, ...], ...]:
    """Per-edge confluence target labels.

    A node ``j`` labels edge ``e`` iff some node ``i`` reaches ``j`` via two
    internally node-disjoint paths and ``e`` lies on any i -> j path.
    """
    view = _OrderView(order)
    label_sets: list[set[int]] = [set() for _ in order.edges]
    for j in range(view.n):
        if view.indeg[j] < 2:
            continue
        for i in range(view.n):
            if view.two_disjoint_paths(i, j):
                for k in view.path_edges(i, j):
                    label_sets[k].add(j)
    return tuple(
        tuple(order.nodes[j] for j in sorted(s)) for s in label_sets
    )


def compute_edge_bags(
    order: ExtractionOrder, labels: Sequence[tuple[str, ...]]
) -> dict[str, tuple[EdgeBag, ...]]:
    """Partition each node's outgoing edges by transitive label overlap.

    Unlabeled edges form singleton bags with an empty label set.
    """
    bags: dict[str, tuple[EdgeBag, ...]] = {}
    for node in order.nodes:
        groups: list[tuple[list[int], set[str]]] = []
        for k in order.out_edges[node]:
            lab = set(labels[k])
            if not lab:
                groups.append(([k], lab))
                continue
            merged_edges = [k]
            keep: list[tuple[list[int], set[str]]] = []
            for g_edges, g_labels in groups:
                if g_labels & lab:
                    merged_edges.extend(g_edges)
                    lab |= g_labels
                else:
                    keep.append((g_edges, g_labels))
            keep.append((merged_edges, lab))
            groups = keep
        node_bags = [
            EdgeBag(node=node, edges=tuple(sorted(ge)), labels=tuple(sorted(gl)))
            for ge, gl in groups
        ]
        node_bags.sort(key=lambda b: b.edges[0])
        bags[node] = tuple(node_bags)
    return bags


def _label_root(
    view: _OrderView, j: int, sources: list[int], labeled_edges: set[int]
) -> int:
    """The unique source whose path sets cover all ``j``-labeled edges and
    through which every root-to-``j`` route passes."""
    root = view.index[view.order.root]
    all_edges = range(len(view.tails))
    winners = []
    for s in sources:
        if not labeled_edges <= set(view.path_edges(s, j)):
            continue
        if s != root and view.reaches(root, j, all_edges, skip=s):
            continue
        winners.append(s)
    if len(winners) != 1:
        raise ExtractionError(
            f"label root for {view.order.nodes[j]!r} is not unique: "
            f"{[view.order.nodes[w] for w in winners]}"
        )
    return winners[0]


def label_order(order: ExtractionOrder) -> LabeledExtractionOrder:
    """Compute labels, bags, per-label roots and the width of an order."""
    view = _OrderView(order)
    label_sets: list[set[int]] = [set() for _ in order.edges]
    label_roots: dict[str, str] = {}
    for j in range(view.n):
        if view.indeg[j] < 2:
            continue
        sources = [i for i in range(view.n) if view.two_disjoint_paths(i, j)]
        if not sources:
            continue
        covered: set[int] = set()
        for i in sources:
            covered.update(view.path_edges(i, j))
        for k in covered:
            label_sets[k].add(j)
        s = _label_root(view, j, sources, covered)
        label_roots[order.nodes[j]] = order.nodes[s]
    labels = tuple(tuple(order.nodes[j] for j in sorted(s)) for s in label_sets)
    bags = compute_edge_bags(order, labels)
    width = 1 + max(
        (len(b.labels) for node_bags in bags.values() for b in node_bags),
        default=0,
    )
    return LabeledExtractionOrder(
        order=order, labels=labels, bags=bags, label_roots=label_roots, width=width
    )


def min_width_order_search(
    graph: RequestShaped,
    strategy: str = "per-root-bfs",
    roots: Sequence[str] | None = None,
) -> LabeledExtractionOrder:
    """Search for a low-width order.

    ``per-root-bfs`` labels the BFS orientation for each candidate root and
    keeps the best; it is a heuristic. ``exhaustive`` enumerates every valid
    orientation per candidate root and returns a true minimum; it is only
    meant for small graphs and refuses oversized searches.
    """
    candidates = tuple(roots) if roots is not None else tuple(graph.nodes)
    if not candidates:
        raise ValueError("at least one candidate root required")
    if strategy == "per-root-bfs":
        best: LabeledExtractionOrder | None = None
        for root in candidates:
            labeled = label_order(build_extraction_order(graph, root))
            if best is None or labeled.width < best.width:
                best = labeled
        assert best is not None
        return best
    if strategy == "exhaustive":
        return _exhaustive_search(graph, candidates)
    raise ValueError(f"unknown strategy {strategy!r}")


_EXHAUSTIVE_LIMIT = 1 << 20


def _exhaustive_search(
    graph: RequestShaped, roots: Sequence[str]
) -> LabeledExtractionOrder:
    total = 0
    edge_list = list(graph.edges)
    for root in roots:
        free = sum(1 for (a, b) in edge_list if root not in (a, b))
        total += 1 << free
    if total > _EXHAUSTIVE_LIMIT:
        raise ValueError(
            f"exhaustive search would try {total} orientations "
            f"(limit {_EXHAUSTIVE_LIMIT}); use per-root-bfs"
        )
    best: LabeledExtractionOrder | None = None
    for root in roots:
        # Edges at the root must point away from it: an edge into the root
        # would close a cycle with any path back out.
        forced: list[bool | None] = []
        free_ids = []
        for k, (a, b) in enumerate(edge_list):
            if a == root:
                forced.append(False)
            elif b == root:
                forced.append(True)
            else:
                forced.append(None)
                free_ids.append(k)
        for combo in itertools.product((False, True), repeat=len(free_ids)):
            flags = list(forced)
            for k, flip in zip(free_ids, combo):
                flags[k] = flip
            try:
                order = orientation_from_flags(graph, root, flags)
            except ExtractionError:
                continue
            labeled = label_order(order)
            if best is None or labeled.width < best.width:
                best = labeled
    if best is None:
        raise ExtractionError("no valid orientation for any candidate root")
    return best


def is_cactus(graph: RequestShaped) -> bool:
    """True iff every biconnected block of the undirected multigraph view is
    a single edge or a simple cycle. Antiparallel edge pairs count as
    two-edge cycles."""
    nodes = list(graph.nodes)
    index = {u: k for k, u in enumerate(nodes)}
    adj: list[list[tuple[int, int]]] = [[] for _ in nodes]
    for eid, (a, b) in enumerate(graph.edges):
        adj[index[a]].append((index[b], eid))
        adj[index[b]].append((index[a], eid))
    disc = [-1] * len(nodes)
    low = [0] * len(nodes)
    timer = 0
    edge_stack: list[int] = []
    blocks: list[list[int]] = []

    for start in range(len(nodes)):
        if disc[start] != -1:
            continue
        # Iterative DFS; each frame is (node, parent edge id, adjacency pos).
        stack = [(start, -1, 0)]
        disc[start] = low[start] = timer
        timer += 1
        while stack:
            u, pe, pos = stack.pop()
            if pos < len(adj[u]):
                stack.append((u, pe, pos + 1))
                v, eid = adj[u][pos]
                if eid == pe:
                    continue
                if disc[v] == -1:
                    edge_stack.append(eid)
                    disc[v] = low[v] = timer
                    timer += 1
                    stack.append((v, eid, 0))
                elif disc[v] < disc[u]:
                    edge_stack.append(eid)
                    low[u] = min(low[u], disc[v])
            else:
                if pe != -1:
                    tail = next(
                        w for w, eid2 in adj[u] if eid2 == pe
                    )
                    low[tail] = min(low[tail], low[u])
                    if low[u] >= disc[tail]:
                        block = []
                        while True:
                            eid2 = edge_stack.pop()
                            block.append(eid2)
                            if eid2 == pe:
                                break
                        blocks.append(block)
    for block in blocks:
        if len(block) == 1:
            continue
        members = set()
        for eid in block:
            a, b = graph.edges[eid]
            members.add(a)
            members.add(b)
        if len(block) != len(members):
            return False
    return True


def generate_half_wheel(n: int) -> Digraph:
    """Half wheel: center ``c`` with spokes to ``w01`` .. ``wNN`` plus the
    outer path ``w01 - w02 - ... - wNN``. Initial directions run from the
    center outward and along increasing outer index."""
    if n < 2:
        raise ValueError("half wheel needs at least two outer nodes")
    outer = [f"w{k:02d}" for k in range(1, n + 1)]
    edges = [("c", w) for w in outer]
    edges += [(outer[k], outer[k + 1]) for k in range(n - 1)]
    return Digraph.build(["c"] + outer, edges)


def half_wheel_center_order(n: int) -> ExtractionOrder:
    """The width-2 order of the half wheel: rooted at the middle outer node,
    outer edges pointing away from it, spokes pointing into the center."""
    graph = generate_half_wheel(n)
    root = f"w{(n // 2):02d}"
    flags = []
    for (a, b) in graph.edges:
        if a == "c":
            flags.append(True)  # spoke now points into the center
        else:
            left_index = int(a[1:])
            flags.append(left_index + 1 <= n // 2)
    return orientation_from_flags(graph, root, flags)


def generate_vc_gadget(
    base_nodes: Iterable[str], base_edges: Iterable[tuple[str, str]], super_node: str = "r"
) -> Digraph:
    """Orient an undirected base graph low-to-high and add a super node with
    an edge to every base node. Rooted at the super node, minimal extraction
    width equals the base graph's minimum vertex cover size plus one."""
    base = sorted(set(base_nodes))
    if super_node in base:
        raise ValueError(f"super node id {super_node!r} collides with base node")
    edges = [tuple(sorted(e)) for e in base_edges]
    for (a, b) in edges:
        if a == b:
            raise ValueError(f"self-loop on {a!r}")
    edges = sorted(set(edges)) + [(super_node, v) for v in base]
    return Digraph.build(base + [super_node], edges)
