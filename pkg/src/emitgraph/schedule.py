"""Gate steps, schedules, validation and deterministic JSON serialization."""

from __future__ import annotations

import functools
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from . import pauli as pl
from .errors import UnsupportedGateError, ValidationError

ROLES = ("photon", "emitter", "nuclear", "ancilla")

ONE_QUBIT_GATES = {"hprime", "rx", "rz", "clifford"}
TWO_QUBIT_GATES = {"cz", "cnot"}
MEASUREMENTS = {"measure_z": "Z", "measure_y": "Y"}
KINDS = ONE_QUBIT_GATES | TWO_QUBIT_GATES | set(MEASUREMENTS) | {"pump", "new_qubit", "frame_fix"}

_ANGLE_COUNT = {"hprime": 3, "rx": 1, "rz": 1}


def _is_quarter_turn(theta: float) -> bool:
    k = theta / (math.pi / 2)
    return abs(k - round(k)) < 1e-12


@dataclass(frozen=True)
class GateStep:
    """One primitive of a schedule.

    ``qubits`` lists operands in gate order (control first for ``cnot``,
    emitter first for ``pump``).  A step with a non-empty ``condition`` is
    applied only when an odd number of the referenced measurement steps
    returned -1.
    """

    kind: str
    qubits: tuple[int, ...]
    angles: tuple[float, ...] = ()
    state: str | None = None
    role: str | None = None
    pauli: str | None = None
    clifford: str | None = None
    condition: tuple[int, ...] = ()
    block: int | None = None
    layer: int | None = None
    note: str = ""

    # constructors -------------------------------------------------------
    @classmethod
    def new_qubit(cls, q: int, state: str = "+", role: str = "ancilla", **kw) -> "GateStep":
        return cls("new_qubit", (q,), state=state, role=role, **kw)

    @classmethod
    def pump(cls, emitter: int, photon: int, **kw) -> "GateStep":
        return cls("pump", (emitter, photon), role="photon", **kw)

    @classmethod
    def hprime(cls, q: int, theta1: float = 0.0, theta2: float = 0.0, phi: float = 0.0, **kw) -> "GateStep":
        return cls("hprime", (q,), angles=(float(theta1), float(theta2), float(phi)), **kw)

    @classmethod
    def rx(cls, q: int, theta: float, **kw) -> "GateStep":
        return cls("rx", (q,), angles=(float(theta),), **kw)

    @classmethod
    def rz(cls, q: int, theta: float, **kw) -> "GateStep":
        return cls("rz", (q,), angles=(float(theta),), **kw)

    @classmethod
    def cz(cls, a: int, b: int, **kw) -> "GateStep":
        return cls("cz", (a, b), **kw)

    @classmethod
    def cnot(cls, control: int, target: int, **kw) -> "GateStep":
        return cls("cnot", (control, target), **kw)

    @classmethod
    def measure(cls, q: int, basis: str = "Z", **kw) -> "GateStep":
        return cls("measure_" + basis.lower(), (q,), **kw)

    @classmethod
    def clifford1(cls, q: int, c: pl.SingleQubitClifford, **kw) -> "GateStep":
        return cls("clifford", (q,), clifford=str(c), **kw)

    @classmethod
    def frame_fix(cls, letters: dict[int, str], condition: Sequence[int] = (), negative: bool = False, **kw) -> "GateStep":
        qubits = tuple(sorted(q for q, c in letters.items() if c != "I"))
        text = ("-" if negative else "+") + (" ".join(f"{letters[q]}{q}" for q in qubits) or "I")
        return cls("frame_fix", qubits, pauli=text, condition=tuple(condition), **kw)

    # derived ----------------------------------------------------------------
    @property
    def allocates(self) -> int | None:
        if self.kind == "new_qubit":
            return self.qubits[0]
        if self.kind == "pump":
            return self.qubits[1]
        return None

    @property
    def basis(self) -> str | None:
        return MEASUREMENTS.get(self.kind)

    def fix_letters(self) -> dict[int, str]:
        """Qubit -> letter map of a frame fix."""
        p = pl.PauliString.from_str(self.pauli, max(self.qubits, default=-1) + 1)
        return {q: p.letter(q) for q in p.support()}

    def fix_pauli(self, n: int) -> pl.PauliString:
        return pl.PauliString.from_str(self.pauli, n)

    def is_clifford(self) -> bool:
        if self.kind in ("rx", "rz", "hprime"):
            return all(_is_quarter_turn(a) for a in self.angles)
        return True

    def unitary(self) -> np.ndarray:
        """Dense unitary of a gate step (one or two qubits)."""
        return _unitary(self.kind, self.angles, self.clifford)

    def table(self) -> pl.ConjugationTable:
        """Conjugation table; raises for non-Clifford rotations."""
        if not self.is_clifford():
            raise UnsupportedGateError(f"{self.kind}{self.angles} is not Clifford")
        return _table(self.kind, tuple(round(a / (math.pi / 2)) for a in self.angles), self.clifford)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["qubits"] = list(self.qubits)
        d["angles"] = list(self.angles)
        d["condition"] = list(self.condition)
        return {k: v for k, v in d.items() if v not in (None, [], "")}

    @classmethod
    def from_dict(cls, d: dict) -> "GateStep":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown step fields {sorted(unknown)}")
        try:
            d["qubits"] = tuple(int(q) for q in d["qubits"])
            d["kind"] = str(d["kind"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed step {d!r}") from exc
        d["angles"] = tuple(float(a) for a in d.get("angles", ()))
        d["condition"] = tuple(int(c) for c in d.get("condition", ()))
        return cls(**d)


@functools.lru_cache(maxsize=None)
def _unitary(kind: str, angles: tuple[float, ...], clifford: str | None) -> np.ndarray:
    if kind == "hprime":
        return pl.hprime_matrix(*angles)
    if kind == "rx":
        return pl.rot_x(angles[0])
    if kind == "rz":
        return pl.rot_z(angles[0])
    if kind == "clifford":
        return pl.SingleQubitClifford.from_text(clifford).matrix
    if kind == "cz":
        return pl.CZ_MAT
    if kind == "cnot":
        return pl.CNOT_MAT
    raise ValidationError(f"step kind {kind!r} has no unitary")


@functools.lru_cache(maxsize=None)
def _table(kind: str, quarter_turns: tuple[int, ...], clifford: str | None) -> pl.ConjugationTable:
    angles = tuple(k * math.pi / 2 for k in quarter_turns)
    return pl.conjugation_table(_unitary(kind, angles, clifford))


@dataclass
class Schedule:
    """Ordered steps plus allocation records and optional target metadata.

    Attributes
    ----------
    steps : list of GateStep
    num_inputs : int
        Qubits assumed to exist before the first step (ids ``0..num_inputs-1``).
    input_roles : list of str
    outputs : dict
        Target vertex id -> qubit id carrying it at the end.
    target : Graph or None
    blocks : list of dict
        Macro records ``{"id", "kind", "qubits", "start", "stop", "layer"}``;
        ``start``/``stop`` delimit the half-open step range.
    meta : dict
    """

    steps: list[GateStep] = field(default_factory=list)
    num_inputs: int = 0
    input_roles: list[str] = field(default_factory=list)
    outputs: dict[int, int] = field(default_factory=dict)
    target: Any = None
    blocks: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def roles(self) -> list[str]:
        roles = list(self.input_roles) or ["ancilla"] * self.num_inputs
        for s in self.steps:
            if s.allocates is not None:
                roles.append(s.role or "ancilla")
        return roles

    @property
    def num_qubits(self) -> int:
        return self.num_inputs + sum(1 for s in self.steps if s.allocates is not None)

    def allocated_before(self, index: int) -> int:
        """Number of qubits that exist just before step ``index``."""
        return self.num_inputs + sum(1 for s in self.steps[:index] if s.allocates is not None)

    def photon_births(self) -> dict[int, int]:
        return {s.qubits[1]: i for i, s in enumerate(self.steps) if s.kind == "pump"}

    def measured_qubits(self) -> set[int]:
        return {s.qubits[0] for s in self.steps if s.basis}

    def measurement_steps(self) -> list[int]:
        return [i for i, s in enumerate(self.steps) if s.basis]

    def is_clifford(self) -> bool:
        return all(s.is_clifford() for s in self.steps)

    def validate(self) -> None:
        """Check allocation order, operand sanity, conditions and photon locality."""
        if self.input_roles and len(self.input_roles) != self.num_inputs:
            raise ValidationError("input_roles length differs from num_inputs")
        roles = list(self.input_roles) or ["ancilla"] * self.num_inputs
        measured_steps: set[int] = set()
        for i, s in enumerate(self.steps):
            where = f"step {i} ({s.kind})"
            if s.kind not in KINDS:
                raise ValidationError(f"{where}: unknown kind")
            if len(set(s.qubits)) != len(s.qubits):
                raise ValidationError(f"{where}: repeated operand")
            arity = {"pump": 2, "cz": 2, "cnot": 2}.get(s.kind, 1)
            if s.kind != "frame_fix" and len(s.qubits) != arity:
                raise ValidationError(f"{where}: expected {arity} operands")
            if s.kind in _ANGLE_COUNT and len(s.angles) != _ANGLE_COUNT[s.kind]:
                raise ValidationError(f"{where}: expected {_ANGLE_COUNT[s.kind]} angles")
            alloc = s.allocates
            existing = [q for q in s.qubits if q != alloc]
            for q in existing:
                if not 0 <= q < len(roles):
                    raise ValidationError(f"{where}: qubit {q} is not allocated")
            if alloc is not None:
                if alloc != len(roles):
                    raise ValidationError(f"{where}: allocates id {alloc}, expected {len(roles)}")
                role = s.role or "ancilla"
                if role not in ROLES:
                    raise ValidationError(f"{where}: unknown role {role!r}")
                if s.kind == "new_qubit" and s.state not in ("0", "+"):
                    raise ValidationError(f"{where}: state must be '0' or '+'")
                if s.kind == "pump" and roles[s.qubits[0]] == "photon":
                    raise ValidationError(f"{where}: a photon cannot pump")
                roles.append(role)
            if s.kind in TWO_QUBIT_GATES and any(roles[q] == "photon" for q in s.qubits):
                raise ValidationError(f"{where}: photons only take local operations")
            if s.kind == "clifford":
                try:
                    pl.SingleQubitClifford.from_text(s.clifford or "")
                except Exception as exc:
                    raise ValidationError(f"{where}: bad clifford {s.clifford!r}") from exc
            if s.kind == "frame_fix":
                try:
                    p = pl.PauliString.from_str(s.pauli or "", len(roles))
                except Exception as exc:
                    raise ValidationError(f"{where}: bad Pauli text {s.pauli!r}") from exc
                if not p.is_hermitian() or p.support() != sorted(s.qubits):
                    raise ValidationError(f"{where}: Pauli text disagrees with operands")
            for c in s.condition:
                if c not in measured_steps:
                    raise ValidationError(f"{where}: condition {c} is not an earlier measurement")
            if s.basis:
                measured_steps.add(i)
        for v, q in self.outputs.items():
            if not 0 <= q < len(roles):
                raise ValidationError(f"output {v} maps to unallocated qubit {q}")

    # serialization ---------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": "emitgraph.schedule/1",
            "num_inputs": self.num_inputs,
            "input_roles": list(self.input_roles),
            "steps": [s.to_dict() for s in self.steps],
            "outputs": {str(k): v for k, v in sorted(self.outputs.items())},
            "target": None if self.target is None else self.target.to_dict(),
            "blocks": self.blocks,
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "Schedule":
        from .graph import Graph

        if d.get("format") != "emitgraph.schedule/1":
            raise ValidationError("not a schedule document")
        try:
            return cls(
                steps=[GateStep.from_dict(s) for s in d["steps"]],
                num_inputs=int(d.get("num_inputs", 0)),
                input_roles=list(d.get("input_roles", [])),
                outputs={int(k): int(v) for k, v in d.get("outputs", {}).items()},
                target=None if d.get("target") is None else Graph.from_dict(d["target"]),
                blocks=list(d.get("blocks", [])),
                meta=dict(d.get("meta", {})),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed schedule: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "Schedule":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"schedule is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def concat(self, other: "Schedule") -> "Schedule":
        """Append ``other`` (whose inputs must be this schedule's qubits)."""
        if other.num_inputs != self.num_qubits:
            raise ValidationError("fragment inputs do not match the register size")
        shift = len(self.steps)
        steps = list(self.steps)
        for s in other.steps:
            steps.append(_shift_condition(s, shift))
        return Schedule(steps, self.num_inputs, list(self.input_roles), dict(other.outputs or self.outputs),
                        other.target or self.target, self.blocks + _shift_blocks(other.blocks, shift), dict(self.meta))


def _shift_condition(s: GateStep, shift: int) -> GateStep:
    if not s.condition:
        return s
    d = s.to_dict()
    d["condition"] = [c + shift for c in s.condition]
    return GateStep.from_dict(d)


def _shift_blocks(blocks: Iterable[dict], shift: int) -> list[dict]:
    out = []
    for b in blocks:
        b = dict(b)
        b["start"] += shift
        b["stop"] += shift
        out.append(b)
    return out
