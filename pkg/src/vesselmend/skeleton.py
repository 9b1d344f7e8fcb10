"""Skeleton masks -> classified graphs and vessel trees.

Each 26-connected component of a unit-width skeleton becomes one
component: voxels are classified by their skeleton-neighbor count
(1 endpoint, 2 regular, >=3 bifurcation), and branch chains are traced
between non-regular nodes.  The component with the largest total length
in mm becomes the directed main tree; all others stay undirected and are
sorted by decreasing length.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .volume import Volume3D

_STRUCT26 = np.ones((3, 3, 3), dtype=int)

ENDPOINT = "endpoint"
REGULAR = "regular"
BIFURCATION = "bifurcation"


@dataclass(frozen=True)
class SkeletonNode:
    voxel: tuple[int, int, int]
    kind: str
    radius_mm: float


@dataclass
class Branch:
    chain: list[tuple[int, int, int]]  # ordered voxels, both terminals included
    length_mm: float


@dataclass
class Component:
    id: int
    voxels: list[tuple[int, int, int]]
    nodes: dict[tuple[int, int, int], SkeletonNode]
    branches: list[Branch]
    total_length_mm: float
    cycle_count: int


@dataclass
class SkeletonGraph:
    spacing: tuple[float, float, float]
    components: list[Component]
    diagnostics: dict = field(default_factory=dict)


@dataclass
class VesselTree:
    id: int
    nodes: dict[tuple[int, int, int], SkeletonNode]
    branches: list[Branch]
    directed: bool
    root: tuple[int, int, int] | None
    total_length_mm: float
    spacing: tuple[float, float, float]
    cycle_count: int = 0

    def endpoints(self) -> list[tuple[int, int, int]]:
        return sorted(v for v, n in self.nodes.items() if n.kind == ENDPOINT)


@dataclass
class EndpointInfo:
    tree_id: int
    endpoint: tuple[int, int, int]
    chain_mm: np.ndarray  # (k, 3), ordered endpoint -> interior
    chain_voxels: list[tuple[int, int, int]]
    radius_mm: float
    degenerate: bool


def _step_length(a, b, spacing) -> float:
    return float(np.sqrt(sum(((a[i] - b[i]) * spacing[i]) ** 2 for i in range(3))))


def _neighbor_offsets():
    offs = [(dx, dy, dz)
            for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)
            if (dx, dy, dz) != (0, 0, 0)]
    return offs

_OFFSETS = _neighbor_offsets()


def _adjacency(voxel_set):
    adj = {}
    for v in voxel_set:
        nbrs = []
        for dx, dy, dz in _OFFSETS:
            w = (v[0] + dx, v[1] + dy, v[2] + dz)
            if w in voxel_set:
                nbrs.append(w)
        adj[v] = sorted(nbrs)
    return adj


def _prune_thick(voxel_set, adj):
    """Remove voxels participating in 2x2 unit squares when removal keeps the
    local neighborhood connected.  Returns the number removed."""
    removed = 0
    for v in sorted(voxel_set):
        if v not in voxel_set:
            continue
        in_block = False
        for axes in ((0, 1), (0, 2), (1, 2)):
            for s0 in (-1, 1):
                for s1 in (-1, 1):
                    a = list(v)
                    b = list(v)
                    c = list(v)
                    a[axes[0]] += s0
                    b[axes[1]] += s1
                    c[axes[0]] += s0
                    c[axes[1]] += s1
                    if tuple(a) in voxel_set and tuple(b) in voxel_set and tuple(c) in voxel_set:
                        in_block = True
        if not in_block:
            continue
        nbrs = [w for w in adj[v] if w in voxel_set]
        if len(nbrs) < 3:
            continue
        # removal is safe if the remaining neighbors stay mutually 26-connected
        if _locally_connected(nbrs):
            voxel_set.discard(v)
            removed += 1
    if removed:
        # rebuild adjacency in place
        new_adj = _adjacency(voxel_set)
        adj.clear()
        adj.update(new_adj)
    return removed


def _locally_connected(nbrs) -> bool:
    if not nbrs:
        return True
    seen = {nbrs[0]}
    stack = [nbrs[0]]
    nbr_set = set(nbrs)
    while stack:
        cur = stack.pop()
        for dx, dy, dz in _OFFSETS:
            w = (cur[0] + dx, cur[1] + dy, cur[2] + dz)
            if w in nbr_set and w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(nbrs)


def build_graph(skel: Volume3D, dt: Volume3D) -> SkeletonGraph:
    """Classify skeleton voxels and trace branch chains per 26-component.

    ``dt`` is the distance transform of the original (unthinned) mask; its
    values become per-node radii in mm.
    """
    spacing = skel.spacing
    mask = skel.mask()
    labels, ncomp = ndimage.label(mask, structure=_STRUCT26)
    dt_data = dt.data

    diagnostics = {"pruned_thick_voxels": 0}
    components = []
    for comp_id in range(1, ncomp + 1):
        coords = np.argwhere(labels == comp_id)
        voxel_set = {tuple(int(c) for c in row) for row in coords}
        adj = _adjacency(voxel_set)
        pruned = _prune_thick(voxel_set, adj)
        diagnostics["pruned_thick_voxels"] += pruned

        nodes = {}
        for v in sorted(voxel_set):
            deg = len(adj[v])
            kind = ENDPOINT if deg <= 1 else (REGULAR if deg == 2 else BIFURCATION)
            nodes[v] = SkeletonNode(v, kind, float(dt_data[v]))

        branches = _trace_branches(voxel_set, adj, nodes, spacing)
        total = sum(b.length_mm for b in branches)
        # cycles of the voxel graph: E - V + 1 per connected component
        n_edges = sum(len(adj[v]) for v in voxel_set) // 2
        cycles = max(0, n_edges - len(voxel_set) + 1)
        components.append(Component(
            id=comp_id - 1, voxels=sorted(voxel_set), nodes=nodes,
            branches=branches, total_length_mm=total, cycle_count=cycles))

    return SkeletonGraph(spacing=spacing, components=components, diagnostics=diagnostics)


def _trace_branches(voxel_set, adj, nodes, spacing):
    """Walk chains of regular voxels between non-regular nodes."""
    branches = []
    visited_edges = set()
    terminals = sorted(v for v in voxel_set if nodes[v].kind != REGULAR)

    def walk(start, first):
        chain = [start, first]
        length = _step_length(start, first, spacing)
        prev, cur = start, first
        while nodes[cur].kind == REGULAR:
            nxt = [w for w in adj[cur] if w != prev]
            if not nxt:
                break  # dangling regular voxel (should not happen on clean input)
            nxt = nxt[0] if len(nxt) == 1 else sorted(nxt)[0]
            chain.append(nxt)
            length += _step_length(cur, nxt, spacing)
            prev, cur = cur, nxt
            if cur == start:
                break  # closed loop back to the terminal
        return chain, length

    for t in terminals:
        for first in adj[t]:
            key = (t, first)
            if key in visited_edges:
                continue
            chain, length = walk(t, first)
            for a, b in zip(chain, chain[1:]):
                visited_edges.add((a, b))
                visited_edges.add((b, a))
            branches.append(Branch(chain=chain, length_mm=length))

    # pure cycles: all-regular components never touched above
    remaining = {v for v in voxel_set
                 if nodes[v].kind == REGULAR
                 and not any((v, w) in visited_edges for w in adj[v])}
    while remaining:
        start = sorted(remaining)[0]
        first = adj[start][0]
        chain, length = walk(start, first)
        if chain[-1] != start:  # close the loop explicitly
            length += _step_length(chain[-1], start, spacing)
            chain.append(start)
        for a, b in zip(chain, chain[1:]):
            visited_edges.add((a, b))
            visited_edges.add((b, a))
        branches.append(Branch(chain=chain, length_mm=length))
        remaining -= set(chain)

    return branches


def build_trees(graph: SkeletonGraph) -> tuple[VesselTree, list[VesselTree]]:
    """Largest component (by length in mm) -> directed main tree; the rest
    stay undirected, sorted by decreasing length."""
    if not graph.components:
        raise ValueError("empty skeleton: no components to build trees from")

    def sort_key(c: Component):
        return (-c.total_length_mm, c.voxels[0])

    ordered = sorted(graph.components, key=sort_key)
    main_comp, rest = ordered[0], ordered[1:]

    root = _pick_root(main_comp)
    main = VesselTree(
        id=main_comp.id, nodes=dict(main_comp.nodes),
        branches=_orient_branches(main_comp, root, graph.spacing),
        directed=True, root=root, total_length_mm=main_comp.total_length_mm,
        spacing=graph.spacing, cycle_count=main_comp.cycle_count)

    subtrees = [VesselTree(
        id=c.id, nodes=dict(c.nodes), branches=list(c.branches),
        directed=False, root=None, total_length_mm=c.total_length_mm,
        spacing=graph.spacing, cycle_count=c.cycle_count) for c in rest]
    return main, subtrees


def _pick_root(comp: Component):
    eps = [v for v, n in comp.nodes.items() if n.kind == ENDPOINT]
    pool = eps if eps else list(comp.nodes)
    return max(sorted(pool), key=lambda v: (comp.nodes[v].radius_mm, tuple(-c for c in v)))


def _orient_branches(comp: Component, root, spacing):
    """Reorder branch chains so every branch points away from the root."""
    # terminal-level adjacency: branch index per terminal voxel
    by_terminal = {}
    for i, b in enumerate(comp.branches):
        by_terminal.setdefault(b.chain[0], []).append(i)
        by_terminal.setdefault(b.chain[-1], []).append(i)

    oriented = [None] * len(comp.branches)
    seen_nodes = {root}
    frontier = [root]
    placed = set()
    while frontier:
        nxt = []
        for node in frontier:
            for bi in by_terminal.get(node, []):
                if bi in placed:
                    continue
                b = comp.branches[bi]
                chain = b.chain if b.chain[0] == node else list(reversed(b.chain))
                oriented[bi] = Branch(chain=chain, length_mm=b.length_mm)
                placed.add(bi)
                far = chain[-1]
                if far not in seen_nodes:
                    seen_nodes.add(far)
                    nxt.append(far)
        frontier = nxt
    # branches unreachable from the root (cycles) keep their stored order
    for i, b in enumerate(comp.branches):
        if oriented[i] is None:
            oriented[i] = b
    return oriented


def endpoint_curve(tree: VesselTree, endpoint, window: int = 7) -> EndpointInfo:
    """Inward chain of up to ``window`` skeleton voxels from an endpoint.

    The walk follows the unique branch and stops early at a bifurcation.
    Chains shorter than 2 voxels are flagged degenerate.
    """
    node = tree.nodes.get(tuple(endpoint))
    if node is None or node.kind != ENDPOINT:
        raise ValueError(f"{endpoint} is not an endpoint of tree {tree.id}")

    branch = None
    for b in tree.branches:
        if b.chain[0] == node.voxel or b.chain[-1] == node.voxel:
            branch = b
            break
    chain_voxels = [node.voxel]
    if branch is not None:
        chain = branch.chain if branch.chain[0] == node.voxel else list(reversed(branch.chain))
        chain_voxels = chain[:window]

    spacing = np.asarray(tree.spacing)
    chain_mm = np.asarray(chain_voxels, dtype=float) * spacing
    return EndpointInfo(
        tree_id=tree.id, endpoint=node.voxel, chain_mm=chain_mm,
        chain_voxels=list(chain_voxels), radius_mm=node.radius_mm,
        degenerate=len(chain_voxels) < 2)


def graph_to_json_dict(graph: SkeletonGraph) -> dict:
    """JSON-serializable dump of nodes, kinds, and branch polylines."""
    return {
        "spacing": list(graph.spacing),
        "diagnostics": graph.diagnostics,
        "components": [
            {
                "id": c.id,
                "total_length_mm": c.total_length_mm,
                "cycle_count": c.cycle_count,
                "nodes": [
                    {"voxel": list(n.voxel), "kind": n.kind, "radius_mm": n.radius_mm}
                    for n in c.nodes.values()
                ],
                "branches": [
                    {"chain": [list(v) for v in b.chain], "length_mm": b.length_mm}
                    for b in c.branches
                ],
            }
            for c in graph.components
        ],
    }
