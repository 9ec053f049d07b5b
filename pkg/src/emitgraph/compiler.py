"""Compile target photon graphs into emitter schedules.

The :class:`ScheduleBuilder` keeps an exact description of the state it has
produced so far: a graph over every allocated qubit plus a deferred local
Clifford on each photon.  The physical state always equals
``prod_p D_p^{-1} |G⟩`` where ``D_p`` is the deferred Clifford of photon
``p``; deferred Cliffords are emitted once, at the end of the schedule.
Emitters and nuclear spins are always kept in graph form.
"""

from __future__ import annotations

import contextlib
import dataclasses
import functools
import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import pauli as pl
from .errors import CapacityError, LayoutError, RoleError, ValidationError
from .graph import Graph, grid_graph, path_graph
from .schedule import GateStep, Schedule

HALF_PI = math.pi / 2
# rotations of a local complementation: X rotation on the centre, -Z rotation on neighbours
CENTRE_ROTATION = pl.CLIFFORD_SQRT_X
NEIGHBOUR_ROTATION = pl.CLIFFORD_SQRT_Z_DAG


@dataclass(frozen=True)
class HPrimeParams:
    """Phases of the generalized Hadamard; all zero gives the proper Hadamard."""

    theta1: float = 0.0
    theta2: float = 0.0
    phi: float = 0.0

    @property
    def is_hadamard(self) -> bool:
        return self.theta1 == 0 and self.theta2 == 0 and self.phi == 0

    @property
    def is_clifford(self) -> bool:
        return GateStep.hprime(0, self.theta1, self.theta2, self.phi).is_clifford()


def compile_hprime(e: int, p: HPrimeParams = HPrimeParams()) -> GateStep:
    """Single generalized-Hadamard step; non-Clifford phases are flagged dense-only."""
    return GateStep.hprime(e, p.theta1, p.theta2, p.phi, note="" if p.is_clifford else "dense-only")


@dataclass(frozen=True)
class EmitterLayout:
    """Emitter slots and the pairs that admit an entangling operation.

    ``roles`` defaults to ``"emitter"`` for every slot.
    """

    size: int
    couplings: frozenset
    topology: str = "explicit"
    roles: tuple = ()

    def __post_init__(self):
        pairs = frozenset(tuple(sorted(p)) for p in self.couplings)
        for a, b in pairs:
            if a == b or not (0 <= a < self.size and 0 <= b < self.size):
                raise LayoutError(f"bad coupling {(a, b)}")
        object.__setattr__(self, "couplings", pairs)
        if not self.roles:
            object.__setattr__(self, "roles", ("emitter",) * self.size)

    @classmethod
    def line(cls, n: int) -> "EmitterLayout":
        return cls(n, frozenset((i, i + 1) for i in range(n - 1)), f"line({n})")

    @classmethod
    def grid(cls, w: int, h: int) -> "EmitterLayout":
        pairs = set()
        for i in range(w):
            for j in range(h):
                if i + 1 < w:
                    pairs.add((i * h + j, (i + 1) * h + j))
                if j + 1 < h:
                    pairs.add((i * h + j, i * h + j + 1))
        return cls(w * h, frozenset(pairs), f"grid({w},{h})")

    @classmethod
    def complete(cls, n: int) -> "EmitterLayout":
        return cls(n, frozenset(itertools.combinations(range(n), 2)), "explicit")

    @classmethod
    def parse(cls, text: str) -> "EmitterLayout":
        """``line:4``, ``grid:3x3`` or ``complete:5``."""
        kind, _, arg = text.partition(":")
        try:
            dims = [int(v) for v in arg.lower().split("x")] if arg else []
        except ValueError:
            raise ValidationError(f"bad layout {text!r}") from None
        if kind == "line" and len(dims) == 1:
            return cls.line(dims[0])
        if kind == "grid" and len(dims) == 2:
            return cls.grid(*dims)
        if kind == "complete" and len(dims) == 1:
            return cls.complete(dims[0])
        raise ValidationError(f"bad layout {text!r}")

    def coupled(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.couplings

    def neighbors(self, a: int) -> list[int]:
        return sorted({b for p in self.couplings if a in p for b in p if b != a})

    def path(self, a: int, b: int) -> list[int] | None:
        prev = {a: None}
        queue = deque([a])
        while queue:
            cur = queue.popleft()
            if cur == b:
                out = [b]
                while prev[out[-1]] is not None:
                    out.append(prev[out[-1]])
                return out[::-1]
            for nxt in self.neighbors(cur):
                if nxt not in prev:
                    prev[nxt] = cur
                    queue.append(nxt)
        return None

    def is_connected(self) -> bool:
        return self.size <= 1 or all(self.path(0, b) is not None for b in range(1, self.size))

    def to_dict(self) -> dict:
        return {"size": self.size, "couplings": sorted(list(p) for p in self.couplings), "topology": self.topology}

    @classmethod
    def from_dict(cls, d: dict) -> "EmitterLayout":
        try:
            return cls(int(d["size"]), frozenset(tuple(p) for p in d["couplings"]), d.get("topology", "explicit"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed layout: {exc}") from exc


@dataclass(frozen=True)
class ClusterDims:
    """Lattice extents; the last extent is the emission (time) direction."""

    extents: tuple

    def __post_init__(self):
        ext = tuple(int(e) for e in self.extents)
        if not ext or any(e < 1 for e in ext):
            raise ValidationError("cluster extents must all be >= 1")
        object.__setattr__(self, "extents", ext)

    @property
    def d(self) -> int:
        return len(self.extents)

    @property
    def sheet(self) -> tuple:
        return self.extents[:-1]

    @property
    def m(self) -> int:
        return self.extents[-1]


@dataclass
class CompilationReport:
    emitters_used: int = 0
    layout_size: int = 0
    g_count: int = 0
    pump_count: int = 0
    measurement_count: int = 0
    swap_count: int = 0
    depth: int = 0
    total_layers: int = 0
    layer_kinds: list = field(default_factory=list)
    active_trace: list = field(default_factory=list)
    peak_active: int = 0
    pump_edges: int = 0
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# builder
# ---------------------------------------------------------------------------


class ScheduleBuilder:
    """Emit steps while tracking the exact graph-plus-deferred-frame state.

    Parameters
    ----------
    input_roles : sequence of str
        Roles of pre-existing qubits ``0..k-1``; they start in graph form.
    input_edges : iterable of (int, int)
        Edges among the pre-existing qubits.
    """

    def __init__(self, input_roles: Sequence[str] = (), input_edges: Iterable[tuple[int, int]] = ()):
        self.num_inputs = len(input_roles)
        self.input_roles = list(input_roles)
        self.roles: list[str] = list(input_roles)
        self.adj: list[set[int]] = [set() for _ in input_roles]
        for a, b in input_edges:
            self.adj[a].add(b)
            self.adj[b].add(a)
        self.deferred: dict[int, pl.SingleQubitClifford] = {}
        self.measured: set[int] = set()
        self.steps: list[GateStep] = []
        self.blocks: list[dict] = []
        self.active_trace: list[int] = []
        self._open: dict | None = None
        self._ready: dict[int, int] = {}
        # explicit layer for synchronous protocols; None means as-soon-as-possible
        self.sync_layer: int | None = None
        self.counts = {"g": 0, "pump": 0, "measure": 0, "swap": 0, "pump_edges": 0}

    # bookkeeping ---------------------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.roles)

    def _emit(self, step: GateStep) -> int:
        if self._open is not None:
            step = dataclasses.replace(step, block=self._open["id"])
        self.steps.append(step)
        return len(self.steps) - 1

    @contextlib.contextmanager
    def block(self, kind: str, qubits: Sequence[int]):
        """Group the steps of one macro; nested blocks merge into the outer one."""
        if self._open is not None:
            yield self._open
            return
        qubits = list(qubits)
        layer = 1 + max((self._ready.get(q, -1) for q in qubits), default=-1)
        if self.sync_layer is not None:
            layer = self.sync_layer
        elif kind == "local":
            layer = 1 + max(self._ready.values(), default=-1)
        rec = {"id": len(self.blocks), "kind": kind, "qubits": list(qubits), "start": len(self.steps), "layer": layer}
        self._open = rec
        try:
            yield rec
        finally:
            self._open = None
            rec["stop"] = len(self.steps)
            for i in range(rec["start"], rec["stop"]):
                self.steps[i] = dataclasses.replace(self.steps[i], layer=layer)
            for q in rec["qubits"]:
                self._ready[q] = layer
            self.blocks.append(rec)
            self.active_trace.append(self.active_size())

    def active_size(self) -> int:
        """Photons still attached to a non-photon qubit."""
        return sum(
            1
            for q in range(self.n)
            if self.roles[q] == "photon" and q not in self.measured and any(self.roles[u] != "photon" for u in self.adj[q])
        )

    def graph(self, qubits: Sequence[int] | None = None) -> Graph:
        """Tracked graph over ``qubits`` (default: all unmeasured qubits)."""
        qubits = [q for q in range(self.n) if q not in self.measured] if qubits is None else list(qubits)
        keep = set(qubits)
        edges = [(a, b) for a in qubits for b in self.adj[a] if b in keep and a < b]
        roles = [r if r in ("photon", "emitter", "nuclear") else "emitter" for r in (self.roles[q] for q in qubits)]
        return Graph(qubits, edges, roles)

    def _require_live(self, *qubits: int) -> None:
        for q in qubits:
            if not 0 <= q < self.n:
                raise ValidationError(f"qubit {q} is not allocated")
            if q in self.measured:
                raise ValidationError(f"qubit {q} was measured")

    def _toggle(self, a: int, b: int) -> None:
        if b in self.adj[a]:
            self.adj[a].discard(b)
            self.adj[b].discard(a)
        else:
            self.adj[a].add(b)
            self.adj[b].add(a)

    # primitive operations ---------------------------------------------------------
    def new_qubit(self, role: str = "emitter") -> int:
        """Fresh qubit in |+⟩ (an isolated graph vertex)."""
        q = self.n
        with self.block("init", [q]):
            self._emit(GateStep.new_qubit(q, "+", role=role))
            self.roles.append(role)
            self.adj.append(set())
        return q

    def pump_h(self, e: int) -> int:
        """Pump then Hadamard: the new photon takes over the emitter's neighbours."""
        self._require_live(e)
        if self.roles[e] == "photon":
            raise RoleError("photons cannot pump")
        p = self.n
        with self.block("pump", [e]):
            self._emit(GateStep.pump(e, p))
            self._emit(GateStep.hprime(e))
            self.roles.append("photon")
            self.adj.append(set())
            for u in list(self.adj[e]):
                self._toggle(e, u)
                self._toggle(p, u)
            self._toggle(e, p)
            self.counts["pump"] += 1
            self.counts["pump_edges"] += len(self.adj[p]) - 1
        return p

    def cz(self, a: int, b: int) -> None:
        self._require_live(a, b)
        if "photon" in (self.roles[a], self.roles[b]):
            raise RoleError("CZ between photons is not available")
        with self.block("cz", [a, b]):
            self._emit(GateStep.cz(a, b))
            self._toggle(a, b)

    def local(self, q: int, c: pl.SingleQubitClifford, step: GateStep | None = None) -> None:
        """Apply a local Clifford: deferred on photons, emitted otherwise.

        Only valid for Cliffords that keep an emitter in graph form, which the
        caller guarantees (it is used for local-complementation rotations).
        """
        if self.roles[q] == "photon":
            self.deferred[q] = self.deferred.get(q, pl.CLIFFORD_IDENTITY).then(c)
        else:
            self._emit(step if step is not None else GateStep.clifford1(q, c))

    def lc(self, v: int, emit: bool = True) -> None:
        """Local complementation realized by rotations.

        With ``emit=False`` only photon frames and the graph are updated; the
        caller is responsible for the physical non-photon rotations.
        """
        self._require_live(v)
        with self.block("lc", [v] + sorted(u for u in self.adj[v] if self.roles[u] != "photon")):
            nb = sorted(self.adj[v])
            for q, c, step in [(v, CENTRE_ROTATION, GateStep.rx(v, HALF_PI))] + [
                (u, NEIGHBOUR_ROTATION, GateStep.rz(u, -HALF_PI)) for u in nb
            ]:
                if emit or self.roles[q] == "photon":
                    self.local(q, c, step)
            for a, b in itertools.combinations(nb, 2):
                self._toggle(a, b)

    def _fix_letter(self, q: int, letter: str) -> str:
        d = self.deferred.get(q)
        if d is None or d.is_identity():
            return letter
        return d.inverse().conjugate_letter(letter)[1]

    def flush(self, q: int) -> None:
        """Emit a photon's deferred Clifford now."""
        d = self.deferred.pop(q, None)
        if d is not None and not d.is_identity():
            self._emit(GateStep.clifford1(q, d))

    def measure_z(self, v: int) -> int:
        """Z measurement plus conditional fix that resets ``v`` to |0⟩ and removes it."""
        self._require_live(v)
        with self.block("measure", [v] + sorted(u for u in self.adj[v] if self.roles[u] != "photon")):
            self.flush(v)
            idx = self._emit(GateStep.measure(v, "Z"))
            letters = {v: "X"}
            for u in self.adj[v]:
                letters[u] = self._fix_letter(u, "Z")
            self._emit(GateStep.frame_fix(letters, (idx,)))
            for u in list(self.adj[v]):
                self._toggle(u, v)
            self.measured.add(v)
            self.counts["measure"] += 1
        return idx

    def measure_y(self, v: int) -> int:
        """Y measurement; the remaining graph is locally complemented at ``v``.

        Outcome +1 leaves Z-quarter rotations on the neighbours, undone here;
        outcome -1 additionally needs Z on ``v`` and its neighbours.
        """
        self._require_live(v)
        with self.block("measure", [v] + sorted(u for u in self.adj[v] if self.roles[u] != "photon")):
            self.flush(v)
            idx = self._emit(GateStep.measure(v, "Y"))
            nb = sorted(self.adj[v])
            letters = {v: "Z"}
            for u in nb:
                letters[u] = self._fix_letter(u, "Z")
            self._emit(GateStep.frame_fix(letters, (idx,)))
            for a, b in itertools.combinations(nb, 2):
                self._toggle(a, b)
            for u in nb:
                self._toggle(u, v)
                self.local(u, NEIGHBOUR_ROTATION, GateStep.rz(u, -HALF_PI))
            self.measured.add(v)
            self.counts["measure"] += 1
        return idx

    # macros ---------------------------------------------------------------------------
    def attached_photon(self, e: int) -> int:
        nb = list(self.adj[e])
        if len(nb) != 1 or self.roles[nb[0]] != "photon":
            raise ValidationError(f"qubit {e} must be attached to exactly one photon (has {sorted(nb)})")
        return nb[0]

    def g(self, e1: int, e2: int, emit: bool = True) -> None:
        """Entangling macro between two emitters; toggles the edge between their photons.

        Emitter steps, in time order: CZ, LC(e1), CZ, LC(e2), CZ, LC(e1), CZ.
        """
        self._require_live(e1, e2)
        if e1 == e2:
            raise ValidationError("the entangling macro needs two distinct emitters")
        p1, p2 = self.attached_photon(e1), self.attached_photon(e2)
        if p1 == p2:
            raise ValidationError("both emitters hold the same photon")
        with self.block("g", [e1, e2]) as rec:
            rec["photons"] = [p1, p2]
            for centre in (None, e1, None, e2, None, e1, None):
                if centre is None:
                    if emit:
                        self._emit(GateStep.cz(e1, e2))
                    self._toggle(e1, e2)
                else:
                    self.lc(centre, emit=emit)
            self.counts["g"] += 1

    def swap(self, a: int, b: int) -> None:
        """Exchange two emitters' states with three CNOTs and relabel the graph."""
        self._require_live(a, b)
        with self.block("swap", [a, b]):
            for c, t in ((a, b), (b, a), (a, b)):
                self._emit(GateStep.cnot(c, t))
            na, nb = self.adj[a] - {b}, self.adj[b] - {a}
            for u in na:
                self._toggle(a, u)
            for u in nb:
                self._toggle(b, u)
            for u in na:
                self._toggle(b, u)
            for u in nb:
                self._toggle(a, u)
            self.counts["swap"] += 1

    def free_emitter(self, e: int) -> int:
        """Pump once more and measure the fresh photon in Z, leaving ``e`` isolated."""
        with self.block("free", [e]):
            p = self.pump_h(e)
            self.measure_z(p)
        return p

    def detach(self, e: int) -> None:
        """Measure an emitter in Z, disconnecting it from the photons."""
        with self.block("detach", [e]):
            self.measure_z(e)

    def nv_pump(self, spin: int, centre: int) -> int:
        """Emit a photon through a spin-assisted centre.

        The new photon takes the spin's place in the graph and the spin ends
        attached only to the new photon.
        """
        self._require_live(spin, centre)
        if self.roles[spin] != "nuclear" or self.roles[centre] != "emitter":
            raise RoleError("nv_pump needs a nuclear spin and an emitter centre")
        if self.adj[centre]:
            raise ValidationError("the centre must be detached before pumping")
        with self.block("nv_pump", [spin, centre]) as rec:
            self.cz(spin, centre)
            p1 = self.pump_h(centre)
            p2 = self.pump_h(centre)
            self.measure_z(p2)
            self.lc(spin)
            self.lc(p1)
            rec["photons"] = [p1]
        return p1

    def nv_cz_round(self, s1: int, s2: int, c1: int, c2: int) -> None:
        """Remote CZ between two spins through their centres.

        Centres are linked (standing in for heralded entanglement), each is
        CZ-coupled to its spin and pumped twice; the first photons are measured
        in Y and the second photons in Z.
        """
        self._require_live(s1, s2, c1, c2)
        with self.block("nv_cz", [s1, s2, c1, c2]):
            self.cz(c1, c2)
            self.cz(s1, c1)
            self.cz(s2, c2)
            a1, b1 = self.pump_h(c1), self.pump_h(c1)
            a2, b2 = self.pump_h(c2), self.pump_h(c2)
            self.measure_z(b1)
            self.measure_z(b2)
            self.measure_y(a1)
            self.measure_y(a2)

    def nv_g(self, s1: int, s2: int, c1: int, c2: int) -> None:
        """The entangling macro on two spins, built from one remote-CZ round.

        The macro's two-qubit unitary equals ``A · CZ · B`` for single-qubit
        Cliffords ``A`` and ``B`` on the spins, so one round suffices.
        """
        for s in (s1, s2):
            self._require_live(s)
            if self.roles[s] != "nuclear":
                raise RoleError("nv_g acts on nuclear spins")
        for c in (c1, c2):
            self._require_live(c)
            if self.roles[c] != "emitter" or self.adj[c]:
                raise RoleError("nv_g needs two detached emitter centres")
        before, after = g_local_decomposition()
        with self.block("nv_g", [s1, s2, c1, c2]):
            gadget = _nv_cz_gadget()
            for q, c in zip((s1, s2), before):
                if not c.is_identity():
                    self._emit(GateStep.clifford1(q, c))
            self._splice(gadget, {0: s1, 1: s2, 2: c1, 3: c2})
            for q, c in zip((s1, s2), after):
                if not c.is_identity():
                    self._emit(GateStep.clifford1(q, c))
            self.g(s1, s2, emit=False)

    def _splice(self, frag: Schedule, mapping: dict[int, int]) -> None:
        """Append a fragment's steps; its fresh qubits become fresh qubits here.

        The fragment's effect on the tracked graph must be accounted for by
        the caller.
        """
        mapping = dict(mapping)
        offset = len(self.steps)
        for s in frag.steps:
            alloc = s.allocates
            if alloc is not None:
                mapping[alloc] = self.n
                self.roles.append(s.role or "ancilla")
                self.adj.append(set())
            d = s.to_dict()
            d["qubits"] = [mapping[q] for q in s.qubits]
            d["condition"] = [c + offset for c in s.condition]
            if s.kind == "frame_fix":
                letters = s.fix_letters()
                d["pauli"] = GateStep.frame_fix({mapping[q]: c for q, c in letters.items()}).pauli
                d["qubits"] = sorted(d["qubits"])
            d.pop("block", None)
            d.pop("layer", None)
            self._emit(GateStep.from_dict(d))
            if s.basis:
                self.measured.add(mapping[s.qubits[0]])
                self.counts["measure"] += 1
            if s.kind == "pump":
                self.counts["pump"] += 1

    # finishing ------------------------------------------------------------------------
    def finalize(self, outputs: dict[int, int] | None = None, target: Graph | None = None, meta: dict | None = None) -> Schedule:
        """Emit every pending photon Clifford and return the schedule."""
        pending = sorted(q for q, d in self.deferred.items() if not d.is_identity())
        if pending:
            with self.block("local", pending):
                for q in pending:
                    self.flush(q)
        self.deferred = {}
        return Schedule(
            steps=list(self.steps),
            num_inputs=self.num_inputs,
            input_roles=list(self.input_roles),
            outputs=dict(outputs or {}),
            target=target,
            blocks=[dict(b) for b in self.blocks],
            meta=dict(meta or {}),
        )

    def report(self, layout_size: int, emitters_used: int) -> CompilationReport:
        layers: dict[int, set[str]] = {}
        for b in self.blocks:
            layers.setdefault(b["layer"], set()).add(b["kind"])
        kinds = ["+".join(sorted(layers[k])) for k in sorted(layers)]
        return CompilationReport(
            emitters_used=emitters_used,
            layout_size=layout_size,
            g_count=self.counts["g"],
            pump_count=self.counts["pump"],
            measurement_count=self.counts["measure"],
            swap_count=self.counts["swap"],
            depth=sum(1 for k in sorted(layers) if "g" in layers[k]),
            total_layers=len(layers),
            layer_kinds=kinds,
            active_trace=list(self.active_trace),
            peak_active=max(self.active_trace, default=0),
            pump_edges=self.counts["pump_edges"],
        )


# ---------------------------------------------------------------------------
# helpers for the spin-assisted variant
# ---------------------------------------------------------------------------


def g_matrix() -> np.ndarray:
    """Dense two-emitter unitary of the entangling macro (first operand = most significant)."""
    sched = compile_g(0, 1)
    from .sim import schedule_unitary

    return schedule_unitary(sched, [0, 1])


@functools.lru_cache(maxsize=None)
def g_local_decomposition() -> tuple[tuple[pl.SingleQubitClifford, ...], tuple[pl.SingleQubitClifford, ...]]:
    """Single-qubit Cliffords ``B`` (before) and ``A`` (after) with macro ∝ A · CZ · B."""
    g = g_matrix()
    group = pl.SingleQubitClifford.all()
    for b1, b2 in itertools.product(group, repeat=2):
        before = np.kron(b1.matrix, b2.matrix)
        m = g @ before.conj().T @ pl.CZ_MAT
        # realign to test for a product operator
        r = m.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
        u, sv, vh = np.linalg.svd(r)
        if sv[1] > 1e-9:
            continue
        a1 = u[:, 0].reshape(2, 2) * np.sqrt(sv[0])
        a2 = vh[0].reshape(2, 2) * np.sqrt(sv[0])
        a1 = a1 / np.sqrt(abs(np.linalg.det(a1)))
        a2 = a2 / np.sqrt(abs(np.linalg.det(a2)))
        return (b1, b2), (pl.SingleQubitClifford.from_matrix(a1), pl.SingleQubitClifford.from_matrix(a2))
    raise RuntimeError("no local decomposition found")  # pragma: no cover


@functools.lru_cache(maxsize=None)
def _nv_cz_gadget() -> Schedule:
    """Standalone remote-CZ round on spins 0, 1 with centres 2, 3.

    Built with each spin attached to a reference photon (qubits 4, 5) so the
    spins are maximally entangled with the rest; the resulting steps never
    touch the references, hence act on any input.
    """
    b = ScheduleBuilder(["nuclear", "nuclear", "emitter", "emitter", "photon", "photon"], [(0, 4), (1, 5)])
    b.nv_cz_round(0, 1, 2, 3)
    if b.adj[0] != {4, 1} or b.adj[1] != {5, 0} or b.deferred:
        raise RuntimeError("remote CZ round did not produce a spin-spin edge")  # pragma: no cover
    sched = b.finalize()
    sched.num_inputs = 6
    return sched


# ---------------------------------------------------------------------------
# protocol front ends
# ---------------------------------------------------------------------------


def compile_g(e1: int = 0, e2: int = 1, layout: EmitterLayout | None = None, photons: tuple[int, int] | None = None) -> Schedule:
    """Standalone entangling macro on emitters ``e1``, ``e2``.

    Without ``photons`` the fragment contains emitter steps only.  With
    ``photons=(p1, p2)`` (the photons attached to ``e1`` and ``e2``) it also
    carries the photon frame fixes as one Clifford step per photon.  The
    register size is the largest operand plus one.
    """
    if e1 == e2:
        raise ValidationError("the entangling macro needs two distinct emitters")
    if layout is not None and not layout.coupled(e1, e2):
        raise LayoutError(f"emitters {e1} and {e2} are not coupled in {layout.topology}")
    ids = [e1, e2] + (list(photons) if photons else [])
    size = max(ids) + 1
    roles = ["ancilla"] * size
    roles[e1] = roles[e2] = "emitter"
    if photons:
        roles[photons[0]] = roles[photons[1]] = "photon"
        edges = [(e1, photons[0]), (e2, photons[1])]
    else:
        # stand-in photons so the tracked local complementations see leaves
        edges = []
    b = ScheduleBuilder(roles, edges)
    if photons:
        b.g(e1, e2)
        return b.finalize(meta={"macro": "g"})
    b.roles += ["photon", "photon"]
    b.adj += [set(), set()]
    b._toggle(e1, size)
    b._toggle(e2, size + 1)
    b.g(e1, e2)
    b.deferred = {}
    sched = b.finalize(meta={"macro": "g"})
    return sched


def compile_lr_chain(n: int, hprime: HPrimeParams | None = None) -> Schedule:
    """One emitter, ``n`` pump-Hadamard cycles, then a Z measurement of the emitter.

    With a non-default ``hprime`` the raw alternating sequence is returned
    instead (emitter starts in |0⟩, no detachment), which is dense-only when
    the phases are not quarter turns.
    """
    if n < 1:
        raise ValidationError("a chain needs at least one photon")
    if hprime is not None and not hprime.is_hadamard:
        step = compile_hprime(0, hprime)
        steps = [GateStep.new_qubit(0, "0", role="emitter"), step]
        for k in range(n):
            steps += [GateStep.pump(0, k + 1), dataclasses.replace(step, qubits=(0,))]
        return Schedule(steps=steps, meta={"protocol": "lr_chain", "dense_only": not hprime.is_clifford})
    b = ScheduleBuilder()
    e = b.new_qubit("emitter")
    photons = [b.pump_h(e) for _ in range(n)]
    b.detach(e)
    target = path_graph(n)
    return b.finalize({v: photons[v] for v in target.ids}, target, {"protocol": "lr_chain"})


def _sheet_pairs(sheet: tuple, axis: int, parity: int) -> list[tuple[int, int]]:
    pairs = []
    for flat in range(int(np.prod(sheet))):
        coord = list(np.unravel_index(flat, sheet))
        if coord[axis] % 2 == parity and coord[axis] + 1 < sheet[axis]:
            nxt = list(coord)
            nxt[axis] += 1
            pairs.append((flat, int(np.ravel_multi_index(nxt, sheet))))
    return pairs


def compile_parallel_cluster(dims: ClusterDims, layout: EmitterLayout) -> tuple[Schedule, CompilationReport]:
    """k-dimensional cluster from a (k-1)-dimensional emitter array.

    Each of the ``m`` rounds pumps every emitter once, then runs two
    entangling layers (pairs starting at even, then odd coordinates) per
    sheet direction.  Emitter slot ``s`` holds sheet position ``s`` in C order.
    """
    if not isinstance(dims, ClusterDims):
        dims = ClusterDims(tuple(dims))
    sheet = dims.sheet or (1,)
    width = int(np.prod(sheet))
    if layout.size < width:
        raise LayoutError(f"{width} emitters needed, layout has {layout.size}")
    layers = [pairs for axis in range(len(sheet)) for parity in (0, 1) if (pairs := _sheet_pairs(sheet, axis, parity))]
    for pairs in layers:
        for a, b_ in pairs:
            if not layout.coupled(a, b_):
                raise LayoutError(f"emitters {a} and {b_} must be coupled for this cluster")
    b = ScheduleBuilder()
    b.sync_layer = 0
    emitters = [b.new_qubit("emitter") for _ in range(width)]
    photon = {}
    for row in range(dims.m):
        b.sync_layer += 1
        for s in range(width):
            photon[(s, row)] = b.pump_h(emitters[s])
        for pairs in layers:
            b.sync_layer += 1
            for s1, s2 in pairs:
                b.g(emitters[s1], emitters[s2])
    b.sync_layer += 1
    for e in emitters:
        b.detach(e)
    b.sync_layer += 1
    full = tuple(sheet) + (dims.m,) if dims.sheet else (dims.m,)
    target = grid_graph(full)
    outputs = {}
    for (s, row), p in photon.items():
        coord = tuple(np.unravel_index(s, sheet)) + (row,) if dims.sheet else (row,)
        outputs[int(np.ravel_multi_index(coord, full))] = p
    sched = b.finalize(outputs, target, {"protocol": "parallel_cluster", "extents": list(dims.extents)})
    rep = b.report(layout.size, width)
    return sched, rep


# ---------------------------------------------------------------------------
# photon-by-photon protocol
# ---------------------------------------------------------------------------


def greedy_order(target: Graph) -> list[int]:
    """Repeatedly pick the vertex with the most already-emitted neighbours (lowest id on ties)."""
    remaining = list(target.ids)
    order: list[int] = []
    done: set[int] = set()
    while remaining:
        best = max(remaining, key=lambda v: (sum(u in done for u in target.neighbors(v)), -v))
        order.append(best)
        done.add(best)
        remaining.remove(best)
    return order


@dataclass
class _PlanState:
    attached: dict  # slot -> photon or None
    pending: dict  # photon -> set of neighbours whose edge is not built yet
    where: dict  # photon -> slot

    def copy(self) -> "_PlanState":
        return _PlanState(dict(self.attached), {k: set(v) for k, v in self.pending.items()}, dict(self.where))


class _Planner:
    """Search emitter assignments for a photon order.

    Each action is one of ``("free", slot)``, ``("emit", v, slot)``,
    ``("g", slot_a, slot_b)``, ``("swap", slot_a, slot_b)`` or ``("detach", slot)``.
    """

    def __init__(self, target: Graph, layout: EmitterLayout, order: list[int], budget: int, lr_reuse: bool = True):
        self.target = target
        self.lr_reuse = lr_reuse
        self.layout = layout
        self.order = order
        self.budget = budget
        self.nodes = 0
        self.rank = {v: i for i, v in enumerate(order)}
        self.peak_needed = 0

    def initial(self) -> _PlanState:
        return _PlanState(
            {s: None for s in range(self.layout.size)},
            {v: set(self.target.neighbors(v)) for v in self.target.ids},
            {},
        )

    def options(self, st: _PlanState, v: int) -> list[tuple[str, int, int | None]]:
        earlier = [u for u in self.target.neighbors(v) if u in st.where]
        lr = [("lr", st.where[u], u) for u in sorted(earlier, key=self.rank.get) if self.lr_reuse and st.pending[u] == {v}]
        free = [("free", s, None) for s in sorted(st.attached) if st.attached[s] is None]
        done = [("reuse", s, st.attached[s]) for s in sorted(st.attached) if st.attached[s] is not None and not st.pending[st.attached[s]]]
        # prefer free slots coupled to the slots of earlier neighbours
        slots = [st.where[u] for u in earlier]
        key = lambda o: (-sum(self.layout.coupled(o[1], s) for s in slots), o[1])
        return lr + sorted(free, key=key) + sorted(done, key=key)

    def apply(self, st: _PlanState, v: int, opt, route: bool) -> list | None:
        kind, slot, u = opt
        st_actions = []
        if kind == "reuse":
            st_actions.append(("free", slot))
            del st.where[st.attached[slot]]
            st.attached[slot] = None
        if kind == "lr":
            del st.where[u]
            st.pending[u].discard(v)
            st.pending[v].discard(u)
        st_actions.append(("emit", v, slot))
        st.attached[slot] = v
        st.where[v] = slot
        for w in sorted((w for w in self.target.neighbors(v) if w in st.where and w != v), key=self.rank.get):
            if v not in st.pending[w]:
                continue
            a, b = st.where[v], st.where[w]
            if not self.layout.coupled(a, b):
                if not route:
                    return None
                path = self.layout.path(a, b)
                if path is None:
                    raise LayoutError(f"emitters {a} and {b} cannot be connected in {self.layout.topology}")
                for x, y in zip(path, path[1:-1]):
                    st_actions.append(("swap", x, y))
                    px, py = st.attached[x], st.attached[y]
                    st.attached[x], st.attached[y] = py, px
                    if px is not None:
                        st.where[px] = y
                    if py is not None:
                        st.where[py] = x
                a = st.where[v]
            st_actions.append(("g", a, b))
            st.pending[w].discard(v)
            st.pending[v].discard(w)
        return st_actions

    def attached_count(self, st: _PlanState) -> int:
        return sum(p is not None for p in st.attached.values())

    def search(self) -> list | None:
        """Branch-and-bound without routing, minimizing pumps plus macros.

        Returns the cheapest plan found within the node budget, or ``None``.
        """
        plan: list = []
        best: list = [None, math.inf]

        def cost(acts) -> int:
            return sum(a[0] in ("emit", "free", "g") for a in acts)

        def rec(k: int, st: _PlanState, spent: int) -> None:
            if spent >= best[1]:
                return
            if k == len(self.order):
                best[0], best[1] = [a for acts in plan for a in acts], spent
                return
            self.nodes += 1
            if self.nodes > self.budget:
                return
            v = self.order[k]
            for opt in self.options(st, v):
                nst = st.copy()
                acts = self.apply(nst, v, opt, route=False)
                if acts is None:
                    continue
                plan.append(acts)
                rec(k + 1, nst, spent + cost(acts))
                plan.pop()

        rec(0, self.initial(), 0)
        return best[0]

    def greedy(self) -> list:
        """First-preference assignment with SWAP routing along layout paths."""
        st = self.initial()
        out = []
        for k, v in enumerate(self.order):
            opts = self.options(st, v)
            if not opts:
                raise CapacityError(
                    f"emitting photon {v} (step {k} of the order) needs a free emitter: "
                    f"active layer already holds {self.attached_count(st)} photons, layout has {self.layout.size}"
                )
            out.extend(self.apply(st, v, opts[0], route=True))
        return out


def compile_general_graph(
    target: Graph,
    layout: EmitterLayout,
    ordering: Sequence[int] | None = None,
    *,
    allow_routing: bool = True,
    lr_reuse: bool = True,
    search_budget: int = 20_000,
) -> tuple[Schedule, CompilationReport]:
    """Photon-by-photon compilation of an arbitrary target graph.

    Photons are emitted in ``ordering`` (default :func:`greedy_order`).  Each
    photon is emitted either from the emitter of an earlier neighbour whose
    only missing edge is to it, or from a free emitter; emitters holding
    finished photons are freed by one extra pump whose photon is measured
    in Z.  Missing edges are made with the entangling macro.  When no
    assignment on the layout's couplings exists, emitter states are routed
    with SWAPs.  ``lr_reuse=False`` always emits from a free emitter, so
    finished photons stay in the active layer until their emitter is freed.
    """
    if any(r != "photon" for r in target.roles):
        raise RoleError("target vertices must all be photons")
    order = list(ordering) if ordering is not None else greedy_order(target)
    if sorted(order) != sorted(target.ids):
        raise ValidationError("ordering must be a permutation of the target vertices")
    planner = _Planner(target, layout, order, search_budget, lr_reuse)
    plan = planner.search()
    notes = []
    if plan is None:
        if not allow_routing:
            raise LayoutError("no emitter assignment fits the layout couplings without routing")
        if not layout.is_connected():
            raise LayoutError(f"layout {layout.topology} is disconnected and no direct assignment exists")
        plan = planner.greedy()
        notes.append("swap routing used")
    b = ScheduleBuilder()
    slot_qubit: dict[int, int] = {}

    def emitter(slot: int) -> int:
        if slot not in slot_qubit:
            slot_qubit[slot] = b.new_qubit("emitter")
        return slot_qubit[slot]

    photon: dict[int, int] = {}
    for act in plan:
        if act[0] == "emit":
            photon[act[1]] = b.pump_h(emitter(act[2]))
        elif act[0] == "g":
            b.g(emitter(act[1]), emitter(act[2]))
        elif act[0] == "swap":
            ea, eb = emitter(act[1]), emitter(act[2])
            b.swap(ea, eb)
        elif act[0] == "free":
            b.free_emitter(emitter(act[1]))
    for slot in sorted(slot_qubit):
        e = slot_qubit[slot]
        if b.adj[e]:
            b.detach(e)
    produced = b.graph([photon[v] for v in target.ids]).relabel({photon[v]: v for v in target.ids})
    if not produced.same_edges(target):
        raise RuntimeError("internal error: tracked graph differs from the target")  # pragma: no cover
    sched = b.finalize(photon, target, {"protocol": "general", "order": order})
    rep = b.report(layout.size, len(slot_qubit))
    rep.notes = notes
    return sched, rep


def compile_nv_pump(spin: int = 0, centre: int = 1, spin_neighbors: Sequence[int] = ()) -> Schedule:
    """Standalone spin-assisted pump fragment.

    Inputs are the spin, the detached centre and the photons the spin is
    currently attached to (``spin_neighbors``); the register size is the
    largest id plus one.
    """
    size = max([spin, centre, *spin_neighbors]) + 1
    roles = ["photon"] * size
    roles[spin], roles[centre] = "nuclear", "emitter"
    b = ScheduleBuilder(roles, [(spin, u) for u in spin_neighbors])
    b.nv_pump(spin, centre)
    return b.finalize(meta={"macro": "nv_pump"})


def compile_nv_g(spin1: int = 0, spin2: int = 1, centre1: int = 2, centre2: int = 3, photons: tuple[int, int] = (4, 5)) -> Schedule:
    """Standalone spin-assisted entangling fragment on spins attached to ``photons``."""
    size = max(spin1, spin2, centre1, centre2, *photons) + 1
    roles = ["photon"] * size
    roles[spin1] = roles[spin2] = "nuclear"
    roles[centre1] = roles[centre2] = "emitter"
    b = ScheduleBuilder(roles, [(spin1, photons[0]), (spin2, photons[1])])
    b.nv_g(spin1, spin2, centre1, centre2)
    return b.finalize(meta={"macro": "nv_g"})
