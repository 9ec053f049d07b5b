"""Schedule execution on the two backends, graph-frame extraction and verification."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from . import pauli as pl
from .dense import DEFAULT_CAP, DenseState, apply_pauli_to_vector, equal_up_to_global_phase
from .errors import DimensionError, ValidationError
from .graph import Graph, preparation_circuit, stabilizer_generators
from .schedule import GateStep, Schedule
from .tableau import Tableau

DEFAULT_SEED = 20240601


@dataclass
class RunReport:
    """Outcome record of one schedule execution."""

    backend: str
    seed: int | None
    measurements: list[dict] = field(default_factory=list)
    roles: list[str] = field(default_factory=list)
    final: object = None

    @property
    def outcomes(self) -> dict[int, int]:
        return {m["step"]: m["outcome"] for m in self.measurements}

    def to_dict(self) -> dict:
        return {
            "backend": self.backend,
            "seed": self.seed,
            "measurements": self.measurements,
            "qubits": [{"id": q, "role": r} for q, r in enumerate(self.roles)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def condition_holds(step: GateStep, outcomes: Mapping[int, int]) -> bool:
    if not step.condition:
        return True
    return sum(outcomes[c] == -1 for c in step.condition) % 2 == 1


def _initial_roles(s: Schedule) -> list[str]:
    return list(s.input_roles) or ["ancilla"] * s.num_inputs


def run_stabilizer(
    s: Schedule,
    seed: int | None = DEFAULT_SEED,
    forced: Mapping[int, int] | None = None,
    initial: Tableau | None = None,
    check: bool = False,
) -> tuple[Tableau, RunReport]:
    """Execute a Clifford schedule on the tableau backend.

    Parameters
    ----------
    forced : mapping step index -> outcome, optional
        Outcomes to use for random measurements.  Deterministic outcomes
        always win over forced ones.
    initial : Tableau, optional
        State of the schedule's input qubits (defaults to all |0⟩).
    check : bool
        Verify tableau invariants after every step (debug mode).
    """
    s.validate()
    for i, st in enumerate(s.steps):
        if not st.is_clifford():
            from .errors import UnsupportedGateError

            raise UnsupportedGateError(f"step {i} ({st.kind} {st.angles}) is not Clifford")
    t = initial.copy() if initial is not None else Tableau.zero(s.num_inputs)
    if t.n != s.num_inputs:
        raise DimensionError("initial tableau size differs from the schedule's inputs")
    rng = np.random.default_rng(seed)
    forced = forced or {}
    report = RunReport("stabilizer", seed, roles=s.roles)
    outcomes: dict[int, int] = {}
    for i, st in enumerate(s.steps):
        if not condition_holds(st, outcomes):
            continue
        out = t.apply_step(st, rng, forced.get(i))
        if out is not None:
            outcomes[i] = out
            report.measurements.append({"step": i, "qubit": st.qubits[0], "basis": st.basis, "outcome": out})
        if check:
            t.check_invariants()
    report.final = t
    return t, report


def run_dense(
    s: Schedule,
    seed: int | None = DEFAULT_SEED,
    forced: Mapping[int, int] | None = None,
    initial: DenseState | None = None,
    cap: int = DEFAULT_CAP,
) -> tuple[DenseState, RunReport]:
    """Execute any schedule (including non-Clifford H′) on the dense backend."""
    s.validate()
    st_ = initial.copy() if initial is not None else DenseState(cap)
    if initial is None:
        for _ in range(s.num_inputs):
            st_.add_qubit("0")
    if st_.n != s.num_inputs:
        raise DimensionError("initial state size differs from the schedule's inputs")
    st_.cap = cap
    rng = np.random.default_rng(seed)
    forced = forced or {}
    report = RunReport("dense", seed, roles=s.roles)
    outcomes: dict[int, int] = {}
    for i, step in enumerate(s.steps):
        if not condition_holds(step, outcomes):
            continue
        out = apply_dense_step(st_, step, rng, forced.get(i))
        if out is not None:
            outcomes[i] = out
            report.measurements.append({"step": i, "qubit": step.qubits[0], "basis": step.basis, "outcome": out})
        if abs(st_.norm() - 1) > 1e-12:
            raise ValidationError(f"norm drift after step {i}")
    report.final = st_
    return st_, report


def apply_dense_step(st: DenseState, step: GateStep, rng=None, forced=None) -> int | None:
    kind = step.kind
    if kind == "new_qubit":
        if step.qubits[0] != st.n:
            raise ValidationError("allocation out of order")
        st.add_qubit(step.state or "0")
    elif kind == "pump":
        e, p = step.qubits
        if p != st.n:
            raise ValidationError("allocation out of order")
        st.add_qubit("0")
        st.apply_2q(pl.CNOT_MAT, e, p)
    elif kind == "frame_fix":
        st.apply_pauli(step.fix_pauli(st.n))
    elif step.basis:
        return st.measure(step.qubits[0], step.basis, rng, forced)
    elif len(step.qubits) == 1:
        st.apply_1q(step.unitary(), step.qubits[0])
    else:
        st.apply_2q(step.unitary(), *step.qubits)
    return None


def measurement_branches(s: Schedule) -> Iterator[dict[int, int]]:
    """Every assignment of ±1 to the schedule's measurement steps."""
    steps = s.measurement_steps()
    for bits in itertools.product((1, -1), repeat=len(steps)):
        yield dict(zip(steps, bits))


# ---------------------------------------------------------------------------
# tableau -> amplitudes
# ---------------------------------------------------------------------------


def tableau_to_statevector(t: Tableau, seed: int = 7) -> np.ndarray:
    """Project a fixed random vector onto the stabilized line and normalize.

    Independent of the gate code: only Pauli actions on vectors are used.
    """
    n = t.n
    rng = np.random.default_rng(seed)
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    for s in t.stabilizers():
        v = 0.5 * (v + apply_pauli_to_vector(v, s))
    norm = np.linalg.norm(v)
    if norm < 1e-8:
        raise ValidationError("projection vanished; stabilizer set is inconsistent")  # pragma: no cover
    return v / norm


# ---------------------------------------------------------------------------
# graph-plus-local-Clifford form
# ---------------------------------------------------------------------------

_S_DAG = pl.SingleQubitClifford.from_matrix(pl.S_MAT.conj().T)
_PAULI_Z = pl.SingleQubitClifford.from_matrix(pl.Z_MAT)


@dataclass
class GraphFrame:
    """A graph state followed by one single-qubit Clifford per qubit.

    ``frame[q]`` is applied to qubit ``q`` of the graph state; qubit ``q``
    is the vertex at position ``q`` of ``graph``.
    """

    graph: Graph
    frame: list[pl.SingleQubitClifford]

    def to_schedule(self) -> Schedule:
        sched = preparation_circuit(self.graph)
        for q, c in enumerate(self.frame):
            if not c.is_identity():
                sched.steps.append(GateStep.clifford1(q, c))
        return sched

    def to_tableau(self) -> Tableau:
        t, _ = run_stabilizer(self.to_schedule(), seed=0)
        return t


class _Rows:
    """Mutable Hermitian Pauli rows with exact sign tracking."""

    def __init__(self, x, z, r):
        self.x = x.copy()
        self.z = z.copy()
        self.r = r.copy()

    def mul_into(self, dst: int, src: int) -> None:
        ge = int(pl.g_exponent(self.x[src], self.z[src], self.x[dst], self.z[dst]).sum())
        total = 2 * int(self.r[dst]) + 2 * int(self.r[src]) + ge
        self.r[dst] = (total % 4) == 2
        self.x[dst] ^= self.x[src]
        self.z[dst] ^= self.z[src]

    def swap(self, a: int, b: int) -> None:
        for arr in (self.x, self.z, self.r):
            arr[[a, b]] = arr[[b, a]]

    def local(self, c: pl.SingleQubitClifford, q: int) -> None:
        self.r ^= pl.apply_table_rows(c.table, (q,), self.x, self.z)


def extract_graph_frame(t: Tableau, roles: Sequence[str] | None = None) -> GraphFrame:
    """Write a stabilizer state as local Cliffords applied to a graph state.

    Gaussian elimination of the X block with lowest-index pivots, Hadamards on
    the non-pivot columns, Gauss-Jordan to ``[I | Γ]``, then diagonal and sign
    clean-up.  Deterministic for a given stabilizer group.
    """
    n = t.n
    rows = _Rows(t.x[n:], t.z[n:], t.r[n:])
    applied = [pl.CLIFFORD_IDENTITY] * n

    def do_local(c: pl.SingleQubitClifford, q: int) -> None:
        rows.local(c, q)
        applied[q] = applied[q].then(c)

    def eliminate(block_x: bool) -> list[int]:
        pivots = []
        r0 = 0
        for col in range(n):
            arr = rows.x if block_x else rows.z
            hit = np.flatnonzero(arr[r0:, col])
            if hit.size == 0:
                continue
            piv = r0 + int(hit[0])
            rows.swap(r0, piv)
            for other in np.flatnonzero(arr[:, col]):
                if other != r0:
                    rows.mul_into(int(other), r0)
            pivots.append(col)
            r0 += 1
            if r0 == n:
                break
        return pivots

    pivots = eliminate(True)
    for col in sorted(set(range(n)) - set(pivots)):
        do_local(pl.CLIFFORD_H, col)
    pivots = eliminate(True)
    if pivots != list(range(n)):
        raise ValidationError("X block did not become invertible")  # pragma: no cover
    for q in range(n):
        if rows.z[q, q]:
            do_local(_S_DAG, q)
    for q in range(n):
        if rows.r[q]:
            do_local(_PAULI_Z, q)
    gamma = rows.z.astype(np.uint8)
    if not np.array_equal(rows.x, np.eye(n, dtype=bool)) or not np.array_equal(gamma, gamma.T):
        raise ValidationError("reduction did not reach graph form")  # pragma: no cover
    roles = list(roles) if roles is not None else ["photon"] * n
    graph_roles = [r if r in ("photon", "emitter", "nuclear") else "emitter" for r in roles]
    graph = Graph.from_adjacency(gamma, roles=graph_roles)
    return GraphFrame(graph, [c.inverse() for c in applied])


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------


@dataclass
class Verdict:
    ok: bool
    failed_vertices: list[int] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def _keep_map(g: Graph, keep) -> dict[int, int]:
    if keep is None:
        return {v: i for i, v in enumerate(g.ids)}
    if isinstance(keep, Mapping):
        return {int(v): int(q) for v, q in keep.items()}
    keep = list(keep)
    if len(keep) != len(g):
        raise ValidationError("keep must list one qubit per vertex")
    return dict(zip(g.ids, keep))


def verify_graph_state(t: Tableau, g: Graph, keep=None, measured: set[int] | None = None) -> Verdict:
    """True iff every graph stabilizer, mapped through ``keep``, has outcome +1.

    ``keep`` maps vertex id -> qubit (a mapping, or a list in vertex order).
    """
    mapping = _keep_map(g, keep)
    if set(mapping) != set(g.ids):
        raise ValidationError("keep must cover exactly the graph's vertices")
    qubits = list(mapping.values())
    if len(set(qubits)) != len(qubits) or any(not 0 <= q < t.n for q in qubits):
        raise ValidationError("keep must map injectively into the register")
    if measured and set(qubits) & set(measured):
        raise ValidationError("keep maps onto measured qubits")
    failed = []
    for v in g.ids:
        letters = {mapping[v]: "X"}
        for u in g.neighbors(v):
            letters[mapping[u]] = "Z"
        if t.expectation(pl.PauliString.from_letters(letters, t.n)) != 1:
            failed.append(v)
    return Verdict(not failed, failed)


def verify_all_branches(s: Schedule, target: Graph | None = None, keep=None, limit: int = 14) -> Verdict:
    """Run every measurement branch on the tableau backend and verify each.

    Schedules with more than ``limit`` measurements are checked on a seeded
    sample of branches plus the all-+1 and all--1 branches.
    """
    target = target if target is not None else s.target
    keep = keep if keep is not None else s.outputs
    steps = s.measurement_steps()
    if len(steps) <= limit:
        branches = list(measurement_branches(s))
    else:
        rng = np.random.default_rng(len(steps))
        branches = [dict.fromkeys(steps, 1), dict.fromkeys(steps, -1)]
        branches += [dict(zip(steps, rng.choice([1, -1], size=len(steps)).tolist())) for _ in range(2**limit - 2)]
    for forced in branches:
        t, _ = run_stabilizer(s, forced=forced)
        v = verify_graph_state(t, target, keep)
        if not v:
            return v
    return Verdict(True)


def states_agree(s: Schedule, seed: int = DEFAULT_SEED, cap: int = DEFAULT_CAP) -> bool:
    """Stabilizer run versus dense replay of the same outcomes, up to global phase."""
    t, rep = run_stabilizer(s, seed=seed)
    d, _ = run_dense(s, forced=rep.outcomes, cap=cap)
    return equal_up_to_global_phase(d.vector(), tableau_to_statevector(t))


def stabilizer_state_of_graph(g: Graph) -> Tableau:
    return Tableau.from_stabilizers(stabilizer_generators(g))


def schedule_unitary(s: Schedule, qubits: Sequence[int] | None = None) -> np.ndarray:
    """Matrix of a measurement-free, allocation-free schedule on ``qubits``.

    The remaining input qubits must be untouched; ``qubits[0]`` is the most
    significant bit.
    """
    qubits = list(range(s.num_inputs)) if qubits is None else list(qubits)
    if any(st.allocates is not None or st.basis or st.condition for st in s.steps):
        raise ValidationError("schedule_unitary needs a fixed register without measurements")
    touched = {q for st in s.steps for q in st.qubits}
    if not touched <= set(qubits):
        raise ValidationError("schedule acts outside the requested qubits")
    k = len(qubits)
    sub = Schedule([st for st in s.steps], num_inputs=s.num_inputs)
    cols = []
    for col in range(2**k):
        vec = np.zeros(2**k, dtype=complex)
        vec[col] = 1
        st = DenseState.from_vector(vec)
        mapped = Schedule(
            [GateStep.from_dict({**x.to_dict(), "qubits": [qubits.index(q) for q in x.qubits]}) if x.kind != "frame_fix"
             else _remap_fix(x, qubits) for x in sub.steps],
            num_inputs=k,
        )
        out, _ = run_dense(mapped, initial=st, cap=max(k, DEFAULT_CAP))
        cols.append(out.vector())
    return np.array(cols).T


def _remap_fix(step: GateStep, qubits: list[int]) -> GateStep:
    letters = {qubits.index(q): c for q, c in step.fix_letters().items()}
    return GateStep.frame_fix(letters)
