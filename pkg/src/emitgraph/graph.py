"""Labelled graphs with roles, their stabilizers, preparation circuits and partitions.

Adjacency rows are Python ints used as bitsets: bit ``j`` of ``rows[i]`` is
set iff vertices at positions ``i`` and ``j`` share an edge.  Positions
follow the vertex order; ids are arbitrary non-negative ints.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .pauli import PauliString
from .schedule import GateStep, Schedule

GRAPH_ROLES = ("photon", "emitter", "nuclear")


def _bits(mask: int) -> Iterable[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class Graph:
    """Simple undirected graph on labelled vertices.

    Parameters
    ----------
    ids : sequence of int
    edges : iterable of (id, id)
    roles : sequence of str, optional
        Defaults to ``"photon"`` for every vertex.
    """

    __slots__ = ("ids", "roles", "rows", "_pos")

    def __init__(self, ids: Sequence[int], edges: Iterable[tuple[int, int]] = (), roles: Sequence[str] | None = None):
        self.ids = tuple(int(v) for v in ids)
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError("vertex ids must be unique")
        self._pos = {v: i for i, v in enumerate(self.ids)}
        self.roles = tuple(roles) if roles is not None else ("photon",) * len(self.ids)
        if len(self.roles) != len(self.ids):
            raise ValidationError("one role per vertex required")
        for r in self.roles:
            if r not in GRAPH_ROLES:
                raise ValidationError(f"unknown role {r!r}")
        rows = [0] * len(self.ids)
        for a, b in edges:
            ia, ib = self.pos(a), self.pos(b)
            if ia == ib:
                raise ValidationError(f"self edge on {a}")
            rows[ia] |= 1 << ib
            rows[ib] |= 1 << ia
        self.rows = rows

    @classmethod
    def _from_rows(cls, ids, roles, rows) -> "Graph":
        g = cls.__new__(cls)
        g.ids = tuple(ids)
        g.roles = tuple(roles)
        g._pos = {v: i for i, v in enumerate(g.ids)}
        g.rows = list(rows)
        return g

    @classmethod
    def from_adjacency(cls, adj: np.ndarray, ids: Sequence[int] | None = None, roles=None) -> "Graph":
        adj = np.asarray(adj).astype(bool)
        if adj.shape[0] != adj.shape[1] or not np.array_equal(adj, adj.T) or adj.diagonal().any():
            raise ValidationError("adjacency must be symmetric with zero diagonal")
        n = adj.shape[0]
        ids = list(range(n)) if ids is None else list(ids)
        edges = [(ids[i], ids[j]) for i, j in zip(*np.nonzero(np.triu(adj)))]
        return cls(ids, edges, roles)

    # basic queries ---------------------------------------------------------
    def pos(self, v: int) -> int:
        try:
            return self._pos[v]
        except KeyError:
            raise ValidationError(f"unknown vertex {v}") from None

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, v) -> bool:
        return v in self._pos

    def role(self, v: int) -> str:
        return self.roles[self.pos(v)]

    def neighbors(self, v: int) -> list[int]:
        return [self.ids[j] for j in _bits(self.rows[self.pos(v)])]

    def degree(self, v: int) -> int:
        return bin(self.rows[self.pos(v)]).count("1")

    def has_edge(self, a: int, b: int) -> bool:
        return bool(self.rows[self.pos(a)] >> self.pos(b) & 1)

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for i, row in enumerate(self.rows):
            for j in _bits(row >> (i + 1) << (i + 1)):
                a, b = self.ids[i], self.ids[j]
                out.append((a, b) if a < b else (b, a))
        return sorted(out)

    def num_edges(self) -> int:
        return sum(bin(r).count("1") for r in self.rows) // 2

    def adjacency(self) -> np.ndarray:
        n = len(self.ids)
        adj = np.zeros((n, n), dtype=np.uint8)
        for i, row in enumerate(self.rows):
            for j in _bits(row):
                adj[i, j] = 1
        return adj

    def key(self) -> int:
        """Row-major packed adjacency bits (labelled, no isomorphism quotient)."""
        n = len(self.ids)
        out = 0
        for i, row in enumerate(self.rows):
            out |= row << (i * n)
        return out

    @classmethod
    def from_key(cls, key: int, ids: Sequence[int], roles=None) -> "Graph":
        n = len(ids)
        mask = (1 << n) - 1
        rows = [(key >> (i * n)) & mask for i in range(n)]
        return cls._from_rows(ids, roles if roles is not None else ("photon",) * n, rows)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.ids == other.ids and self.roles == other.roles and self.rows == other.rows

    def __hash__(self) -> int:
        return hash((self.ids, self.key()))

    def same_edges(self, other: "Graph") -> bool:
        return set(self.ids) == set(other.ids) and self.edges() == other.edges()

    def __repr__(self) -> str:
        return f"Graph(ids={list(self.ids)}, edges={self.edges()})"

    def copy(self) -> "Graph":
        return Graph._from_rows(self.ids, self.roles, self.rows)

    # edits -------------------------------------------------------------------
    def toggle_edge(self, a: int, b: int) -> "Graph":
        ia, ib = self.pos(a), self.pos(b)
        if ia == ib:
            raise ValidationError("self edge")
        rows = list(self.rows)
        rows[ia] ^= 1 << ib
        rows[ib] ^= 1 << ia
        return Graph._from_rows(self.ids, self.roles, rows)

    def swap_labels(self, a: int, b: int) -> "Graph":
        """Exchange the neighbourhoods of ``a`` and ``b`` (a relabelling)."""
        ia, ib = self.pos(a), self.pos(b)
        return Graph._from_rows(self.ids, self.roles, swap_rows(self.rows, ia, ib))

    def subgraph(self, keep: Sequence[int]) -> "Graph":
        keep = list(keep)
        kept = set(keep)
        edges = [(a, b) for a, b in self.edges() if a in kept and b in kept]
        return Graph(keep, edges, [self.role(v) for v in keep])

    def relabel(self, mapping: dict[int, int]) -> "Graph":
        return Graph([mapping[v] for v in self.ids], [(mapping[a], mapping[b]) for a, b in self.edges()], self.roles)

    def with_roles(self, roles: Sequence[str]) -> "Graph":
        return Graph._from_rows(self.ids, tuple(roles), self.rows)

    # serialization -----------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "vertices": [{"id": v, "role": r} for v, r in zip(self.ids, self.roles)],
            "edges": [list(e) for e in self.edges()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Graph":
        try:
            ids = [int(v["id"]) for v in d["vertices"]]
            roles = [str(v.get("role", "photon")) for v in d["vertices"]]
            edges = [(int(a), int(b)) for a, b in d["edges"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed graph document: {exc}") from exc
        seen = set()
        for a, b in edges:
            if a >= b:
                raise ValidationError(f"edge {[a, b]} must be listed with a < b")
            if (a, b) in seen:
                raise ValidationError(f"duplicate edge {[a, b]}")
            seen.add((a, b))
        return cls(ids, edges, roles)

    @classmethod
    def from_json(cls, text: str) -> "Graph":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"graph is not valid JSON: {exc}") from exc

    def to_dot(self, name: str = "G") -> str:
        shape = {"photon": "circle", "emitter": "doublecircle", "nuclear": "box"}
        lines = [f"graph {name} {{"]
        for v, r in zip(self.ids, self.roles):
            lines.append(f'  {v} [shape={shape[r]}, label="{v}"];')
        for a, b in self.edges():
            lines.append(f"  {a} -- {b};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def swap_rows(rows: list[int], ia: int, ib: int) -> list[int]:
    """Adjacency rows after exchanging positions ``ia`` and ``ib``."""
    rows = list(rows)
    rows[ia], rows[ib] = rows[ib], rows[ia]
    for k, row in enumerate(rows):
        ba, bb = row >> ia & 1, row >> ib & 1
        if ba != bb:
            rows[k] = row ^ (1 << ia) ^ (1 << ib)
    return rows


def local_complement_rows(rows: list[int], i: int) -> list[int]:
    """Toggle every edge among the neighbours of position ``i``."""
    nb = rows[i]
    out = list(rows)
    for a in _bits(nb):
        out[a] ^= nb & ~(1 << a)
    return out


def local_complement(g: Graph, v: int) -> Graph:
    """Return the graph with all edges among the neighbours of ``v`` toggled."""
    return Graph._from_rows(g.ids, g.roles, local_complement_rows(g.rows, g.pos(v)))


def stabilizer_generators(g: Graph) -> list[PauliString]:
    """One generator per vertex: X on it, Z on each neighbour (positions = vertex order)."""
    n = len(g)
    out = []
    for i, row in enumerate(g.rows):
        x = np.zeros(n, bool)
        z = np.zeros(n, bool)
        x[i] = True
        for j in _bits(row):
            z[j] = True
        out.append(PauliString(x, z, 0))
    return out


def preparation_circuit(g: Graph) -> Schedule:
    """|+⟩ on every vertex then one CZ per edge.

    Qubit ``k`` carries vertex ``g.ids[k]``; edges are applied in sorted order.
    Qubits are allocated with the neutral ``ancilla`` role because a photon
    may not take part in a CZ inside an emitter schedule.
    """
    steps = [GateStep.new_qubit(k, "+", role="ancilla") for k in range(len(g))]
    for a, b in g.edges():
        steps.append(GateStep.cz(g.pos(a), g.pos(b)))
    return Schedule(steps=steps, outputs={v: k for k, v in enumerate(g.ids)}, target=g)


@dataclass(frozen=True)
class AdjacencyPartition:
    """Split of a graph's adjacency into two parts and the cross block."""

    part0: tuple[int, ...]
    part1: tuple[int, ...]
    n0: np.ndarray
    n1: np.ndarray
    n01: np.ndarray

    def cross_edges(self) -> list[tuple[int, int]]:
        out = []
        for i, j in zip(*np.nonzero(self.n01)):
            a, b = self.part0[i], self.part1[j]
            out.append((min(a, b), max(a, b)))
        return sorted(out)

    def reassemble(self) -> np.ndarray:
        """Adjacency in the order ``part0 + part1``."""
        return np.block([[self.n0, self.n01], [self.n01.T, self.n1]])


def partition_adjacency(g: Graph, part0: Iterable[int]) -> AdjacencyPartition:
    part0 = set(part0)
    unknown = part0 - set(g.ids)
    if unknown:
        raise ValidationError(f"vertices {sorted(unknown)} are not in the graph")
    p0 = tuple(v for v in g.ids if v in part0)
    p1 = tuple(v for v in g.ids if v not in part0)
    adj = g.adjacency()
    i0 = [g.pos(v) for v in p0]
    i1 = [g.pos(v) for v in p1]
    return AdjacencyPartition(p0, p1, adj[np.ix_(i0, i0)], adj[np.ix_(i1, i1)], adj[np.ix_(i0, i1)])


# ---------------------------------------------------------------------------
# graph families
# ---------------------------------------------------------------------------


def path_graph(n: int, start: int = 0) -> Graph:
    ids = list(range(start, start + n))
    return Graph(ids, zip(ids, ids[1:]))


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise ValidationError("a cycle needs at least 3 vertices")
    return Graph(range(n), [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> Graph:
    return Graph(range(n), [(i, j) for i in range(n) for j in range(i + 1, n)])


def star_graph(leaves: int) -> Graph:
    return Graph(range(leaves + 1), [(0, j) for j in range(1, leaves + 1)])


def grid_graph(extents: Sequence[int]) -> Graph:
    """Nearest-neighbour lattice; vertex id is the C-order flat index of its coordinates."""
    extents = tuple(int(e) for e in extents)
    if any(e < 1 for e in extents):
        raise ValidationError("grid extents must be >= 1")
    total = int(np.prod(extents))
    edges = []
    for flat in range(total):
        coord = np.unravel_index(flat, extents)
        for axis in range(len(extents)):
            if coord[axis] + 1 < extents[axis]:
                nxt = list(coord)
                nxt[axis] += 1
                edges.append((flat, int(np.ravel_multi_index(nxt, extents))))
    return Graph(range(total), edges)


def random_graph(n: int, p: float, rng: np.random.Generator, connected: bool = False) -> Graph:
    while True:
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
        g = Graph(range(n), edges)
        if not connected or is_connected(g):
            return g


def is_connected(g: Graph) -> bool:
    if len(g) == 0:
        return True
    seen = 1
    frontier = 1
    while frontier:
        nxt = 0
        for i in _bits(frontier):
            nxt |= g.rows[i]
        frontier = nxt & ~seen
        seen |= nxt
    return seen == (1 << len(g)) - 1


def two_chains(rung: tuple[int, int] | None = None) -> Graph:
    """Two 4-vertex chains 1-3-5-7 and 2-4-6-8 with an optional rung between them.

    Vertices 1 and 2 are the chain heads (the natural emitter pair).
    """
    edges = [(1, 3), (3, 5), (5, 7), (2, 4), (4, 6), (6, 8)]
    if rung is not None:
        edges.append(tuple(sorted(rung)))
    return Graph(range(1, 9), edges)


def seven_photon_target() -> Graph:
    """The 7-photon graph built photon by photon with three emitters.

    Emission order is the vertex order a, b, c, d, e, f, g (ids 0..6).
    """
    a, b, c, d, e, f, g = range(7)
    edges = [(a, b), (a, c), (b, d), (c, d), (c, e), (e, f), (f, d), (f, g), (g, d), (e, g)]
    return Graph(range(7), edges)
