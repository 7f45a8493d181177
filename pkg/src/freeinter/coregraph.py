"""Quotient graphs of the Bass-Serre tree for finite-index subgroups, and their cores.

Vertex ids are tuples: ``("v0", point)`` for a point of the acted-on set and
``("v", i, k)`` for the k-th orbit of factor i. Points may be any hashable,
so pullback graphs reuse the same code with pairs as points.
"""

from __future__ import annotations

import random
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence


@dataclass(frozen=True)
class Edge:
    kind: str        # "factor" or "free"
    index: int       # factor i or free letter j
    source: tuple
    target: tuple


@dataclass(frozen=True)
class OrbitVertex:
    factor: int
    oid: int
    members: tuple

    @property
    def vid(self) -> tuple:
        return ("v", self.factor, self.oid)


def _degrees(vertices: Iterable[tuple], edges: Iterable[Edge]) -> dict[tuple, int]:
    deg = {v: 0 for v in vertices}
    for e in edges:
        deg[e.source] += 1
        deg[e.target] += 1
    return deg


@dataclass
class QuotientGraph:
    points: list
    orbit_vertices: dict[int, list[OrbitVertex]]
    edges: list[Edge]
    factor_names: list[str] = field(default_factory=list)

    @property
    def vertices(self) -> list[tuple]:
        vs = [("v0", w) for w in self.points]
        for i in sorted(self.orbit_vertices):
            vs.extend(ov.vid for ov in self.orbit_vertices[i])
        return vs

    @property
    def degree(self) -> dict[tuple, int]:
        return _degrees(self.vertices, self.edges)


@dataclass(frozen=True)
class CoreGraph:
    vertices: frozenset
    edges: tuple
    components: tuple  # tuple of frozensets of vertex ids

    @property
    def degree(self) -> dict[tuple, int]:
        return _degrees(self.vertices, self.edges)

    def is_empty(self) -> bool:
        return not self.vertices


def build_from_maps(points: Sequence[Hashable], factor_orbits: Sequence[Sequence[Sequence[Hashable]]],
                    free_maps: Sequence[dict], factor_names: Sequence[str] = ()) -> QuotientGraph:
    """Quotient graph from explicit data.

    ``factor_orbits[i]`` partitions ``points`` into the orbits of the i-th
    factor image; ``free_maps[j]`` sends each point to its image under x_j.
    """
    pts = list(points)
    ptset = set(pts)
    orbit_vertices: dict[int, list[OrbitVertex]] = {}
    edges: list[Edge] = []
    for i, orbs in enumerate(factor_orbits):
        owner = {}
        ovs = []
        for k, orb in enumerate(orbs):
            ov = OrbitVertex(i, k, tuple(orb))
            ovs.append(ov)
            for w in orb:
                if w in owner:
                    raise ValueError(f"point {w!r} lies in two orbits of factor {i}")
                owner[w] = ov
        if set(owner) != ptset:
            raise ValueError(f"orbits of factor {i} do not partition the point set")
        orbit_vertices[i] = ovs
        edges.extend(Edge("factor", i, ("v0", w), owner[w].vid) for w in pts)
    for j, fmap in enumerate(free_maps):
        if set(fmap) != ptset or set(fmap.values()) != ptset:
            raise ValueError(f"free letter {j} is not a permutation of the point set")
        edges.extend(Edge("free", j, ("v0", w), ("v0", fmap[w])) for w in pts)
    return QuotientGraph(pts, orbit_vertices, edges, list(factor_names))


def build_quotient_graph(spec, action) -> QuotientGraph:
    """Quotient graph of H\\T for the point stabilizers of a validated action."""
    if not getattr(action, "validated", False):
        raise ValueError("action must come from intersector.validate_action")
    if action.spec is not spec and action.spec != spec:
        raise ValueError("action belongs to a different spec")
    pts = list(range(1, action.degree + 1))
    factor_orbits = [action.factor_orbits(i) for i in range(len(spec.factors))]
    free_maps = [{w: perm(w) for w in pts} for perm in action.free]
    return build_from_maps(pts, factor_orbits, free_maps, [f.name for f in spec.factors])


def core(g: QuotientGraph | CoreGraph, rng: random.Random | None = None) -> CoreGraph:
    """Delete valence <= 1 vertices until none remain.

    ``rng`` shuffles the deletion order; the result does not depend on it.
    """
    vertices = set(g.vertices)
    edges = list(g.edges)
    incident: dict[tuple, list[int]] = defaultdict(list)
    for k, e in enumerate(edges):
        incident[e.source].append(k)
        if e.target != e.source:
            incident[e.target].append(k)
    deg = _degrees(vertices, edges)
    alive_edge = [True] * len(edges)
    start = [v for v in vertices if deg[v] <= 1]
    if rng is not None:
        rng.shuffle(start)
    queue = deque(start)
    while queue:
        v = queue.popleft() if rng is None or rng.random() < 0.5 else queue.pop()
        if v not in vertices or deg[v] > 1:
            continue
        vertices.discard(v)
        for k in incident[v]:
            if not alive_edge[k]:
                continue
            alive_edge[k] = False
            e = edges[k]
            other = e.target if e.source == v else e.source
            deg[other] -= 1
            if other in vertices and deg[other] <= 1:
                queue.append(other)
    kept = tuple(e for k, e in enumerate(edges) if alive_edge[k])
    return CoreGraph(frozenset(vertices), kept, _components(vertices, kept))


def _components(vertices: Iterable[tuple], edges: Iterable[Edge]) -> tuple:
    parent = {v: v for v in vertices}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for e in edges:
        a, b = find(e.source), find(e.target)
        if a != b:
            parent[a] = b
    groups: dict[tuple, set] = defaultdict(set)
    for v in parent:
        groups[find(v)].add(v)
    return tuple(sorted((frozenset(s) for s in groups.values()), key=lambda s: min(map(repr, s))))


def reduced_rank(c: CoreGraph) -> int:
    """Half the sum of (deg - 2) over all vertices, which equals |E| - |V|."""
    twice = sum(d - 2 for d in c.degree.values())
    assert twice % 2 == 0 and twice // 2 == len(c.edges) - len(c.vertices)
    return twice // 2


def component_ranks(c: CoreGraph) -> list[int]:
    out = []
    for comp in c.components:
        ne = sum(1 for e in c.edges if e.source in comp)
        out.append(ne - len(comp))
    return out


def _vertex_label(v: tuple, names: Sequence[str]) -> str:
    if v[0] == "v0":
        w = v[1]
        return "p" + ("_".join(map(str, w)) if isinstance(w, tuple) else str(w))
    i, k = v[1], v[2]
    name = names[i] if i < len(names) else str(i)
    return f"{name}#{k}"


def dump_graph(g: QuotientGraph | CoreGraph, factor_names: Sequence[str] = ()) -> str:
    """Adjacency listing, one line per vertex: ``vertex-id : kind : neighbor-ids``.

    Point vertices are ``p<point>`` (pairs joined by ``_``) with kind ``v0``;
    orbit vertices are ``<factor>#<k>`` with kind ``v:<factor>``. Neighbors
    repeat once per incident edge end, so a loop lists its vertex twice.
    """
    names = list(factor_names) or list(getattr(g, "factor_names", []))
    adj: dict[tuple, list[tuple]] = defaultdict(list)
    for e in g.edges:
        adj[e.source].append(e.target)
        adj[e.target].append(e.source)
    lines = []
    for v in sorted(g.vertices, key=lambda v: (v[0] != "v0", repr(v))):
        kind = "v0" if v[0] == "v0" else "v:" + (names[v[1]] if v[1] < len(names) else str(v[1]))
        nbrs = " ".join(_vertex_label(u, names) for u in sorted(adj[v], key=repr))
        lines.append(f"{_vertex_label(v, names)} : {kind} : {nbrs}")
    return "\n".join(lines) + ("\n" if lines else "")
