"""Single Pauli fault injection and exact propagation through Clifford schedules.

A fault ``P`` inserted before step ``k`` is carried forward as a residual
``R`` with ``faulty state = R · clean state``.  At a measurement the faulty
run is paired with the clean branch whose outcome differs exactly where
``R`` anticommutes with the measured observable; the residual on the
measured qubit is then reduced to the identity or to a single outcome-flip
letter (a global phase at most).  Conditional fixes whose condition parity
differs between the paired branches multiply the residual.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import pauli as pl
from .errors import UnsupportedGateError, ValidationError
from .schedule import GateStep, Schedule

_FLIP_LETTER = {"Z": "X", "X": "Z", "Y": "Z"}


@dataclass(frozen=True)
class FaultSpec:
    """Pauli ``pauli`` on ``qubit`` inserted just before step ``step``.

    ``step == len(schedule)`` places the fault after the last step.
    """

    step: int
    qubit: int
    pauli: str

    def validate(self, s: Schedule) -> None:
        if self.pauli not in ("X", "Y", "Z"):
            raise ValidationError(f"fault Pauli must be X, Y or Z, not {self.pauli!r}")
        if not 0 <= self.step <= len(s.steps):
            raise ValidationError(f"fault step {self.step} outside 0..{len(s.steps)}")
        if not 0 <= self.qubit < s.allocated_before(self.step):
            raise ValidationError(f"qubit {self.qubit} is not allocated before step {self.step}")

    def to_dict(self) -> dict:
        return {"step": self.step, "qubit": self.qubit, "pauli": self.pauli}


@dataclass
class ErrorTrace:
    """Result of propagating one fault.

    Attributes
    ----------
    residuals : list of PauliString
        ``residuals[i]`` is the residual just after step ``fault.step + i``.
    final : PauliString
        Residual at the end of the schedule over every qubit.
    flips : list of int
        Measurement steps whose recorded outcome the fault flips.
    support : list of int
        Unmeasured qubits the final residual acts on.
    canonical : PauliString
        Lowest-support residual (unsigned) equivalent to ``final`` modulo the
        clean final state's stabilizers, restricted to unmeasured qubits.
    corrupted : dict
        Photon id -> whether ``canonical`` touches it.
    phase_exact : bool
        False once a measurement reduction may have dropped a global phase.
    """

    fault: FaultSpec
    residuals: list = field(default_factory=list)
    final: pl.PauliString | None = None
    flips: list = field(default_factory=list)
    support: list = field(default_factory=list)
    canonical: pl.PauliString | None = None
    corrupted: dict = field(default_factory=dict)
    phase_exact: bool = True

    @property
    def photon_support(self) -> list[int]:
        return sorted(p for p, hit in self.corrupted.items() if hit)

    def residual_after(self, step: int) -> pl.PauliString:
        """Residual just after ``step`` (which must not precede the fault)."""
        return self.residuals[step - self.fault.step]

    def to_dict(self) -> dict:
        return {
            "fault": self.fault.to_dict(),
            "residual": self.final.sparse_str(),
            "support": self.support,
            "canonical": self.canonical.sparse_str() if self.canonical is not None else None,
            "photon_support": self.photon_support,
            "flips": self.flips,
        }


def _require_clifford(s: Schedule) -> None:
    for i, st in enumerate(s.steps):
        if not st.is_clifford():
            raise UnsupportedGateError(f"step {i} ({st.kind}) is not Clifford; faults need a Clifford schedule")


def propagate_fault(s: Schedule, f: FaultSpec, record: bool = True, basis: "StabilizerBasis | None" = None) -> ErrorTrace:
    """Conjugate a fault through every later step, tracking outcome flips.

    ``basis`` describes the clean final state (computed from a seeded clean
    run when omitted) and is only used for :attr:`ErrorTrace.canonical`.
    """
    s.validate()
    f.validate(s)
    _require_clifford(s)
    n = s.allocated_before(f.step)
    r = pl.PauliString.single(n, f.qubit, f.pauli)
    trace = ErrorTrace(f)
    flipped: set[int] = set()
    measured: set[int] = set(s.steps[i].qubits[0] for i in range(f.step) if s.steps[i].basis)
    for i in range(f.step, len(s.steps)):
        st = s.steps[i]
        alloc = st.allocates
        if alloc is not None:
            r = r.padded(alloc + 1)
        if st.kind == "pump":
            r = pl.conjugate_pauli(GateStep.cnot(*st.qubits).table(), st.qubits, r)
        elif st.kind == "new_qubit":
            pass
        elif st.kind == "frame_fix":
            fix = st.fix_pauli(r.n)
            if st.condition and sum(c in flipped for c in st.condition) % 2:
                r = pl.pauli_product(fix, r)
            elif not r.commutes(fix):
                r = -r
        elif st.basis:
            q = st.qubits[0]
            obs = pl.PauliString.single(r.n, q, st.basis)
            letter = r.letter(q)
            anti = not r.commutes(obs)
            if anti:
                flipped.add(i)
            new = _FLIP_LETTER[st.basis] if anti else "I"
            if letter != new:
                x, z = r.x.copy(), r.z.copy()
                x[q], z[q] = new in "XY", new in "ZY"
                r = pl.PauliString(x, z, r.phase)  # phase is relative to the Hermitian letters
                trace.phase_exact = False
            measured.add(q)
        else:
            r = pl.conjugate_pauli(st.table(), st.qubits, r)
        if record:
            trace.residuals.append(r)
    trace.final = r
    trace.flips = sorted(flipped)
    roles = s.roles
    trace.support = [q for q in r.support() if q not in measured]
    basis = basis if basis is not None else StabilizerBasis.of_schedule(s)
    live = np.zeros(r.n, dtype=bool)
    live[trace.support] = True
    xc, zc = basis.minimize((r.x & live)[None, :], (r.z & live)[None, :])
    trace.canonical = pl.PauliString(xc[0], zc[0], 0)
    hit = set(trace.canonical.support())
    trace.corrupted = {q: q in hit for q in range(len(roles)) if roles[q] == "photon" and q not in measured}
    return trace


def inject_fault(s: Schedule, f: FaultSpec) -> Schedule:
    """Copy of ``s`` with the fault inserted as an unconditional Pauli step."""
    f.validate(s)
    fix = GateStep.frame_fix({f.qubit: f.pauli}, note="fault")
    steps = list(s.steps[: f.step]) + [fix]
    for st in s.steps[f.step :]:
        if st.condition:
            d = st.to_dict()
            d["condition"] = [c + (c >= f.step) for c in st.condition]
            st = GateStep.from_dict(d)
        steps.append(st)
    return Schedule(steps, s.num_inputs, list(s.input_roles), dict(s.outputs), s.target, [], dict(s.meta))


# ---------------------------------------------------------------------------
# batched sweep
# ---------------------------------------------------------------------------


def all_faults(s: Schedule, qubits: Iterable[int] | None = None, roles: Sequence[str] = ("emitter", "nuclear")) -> list[FaultSpec]:
    """Every (step, qubit, Pauli) with the qubit live and of one of ``roles``.

    Qubits already measured are skipped.
    """
    all_roles = s.roles
    wanted = None if qubits is None else set(qubits)
    measured: set[int] = set()
    out = []
    for k in range(len(s.steps) + 1):
        for q in range(s.allocated_before(k)):
            if q in measured or all_roles[q] not in roles or (wanted is not None and q not in wanted):
                continue
            out.extend(FaultSpec(k, q, p) for p in "XYZ")
        if k < len(s.steps) and s.steps[k].basis:
            measured.add(s.steps[k].qubits[0])
    return out


def sweep(s: Schedule, faults: Sequence[FaultSpec], basis: "StabilizerBasis | None" = None) -> list[dict]:
    """Propagate many faults at once (signs are not tracked).

    Returns one record per fault with the final residual on unmeasured
    qubits (``raw``), its lowest-support equivalent modulo the clean final
    state's stabilizers (``residual``) and the photons that one touches.
    """
    s.validate()
    _require_clifford(s)
    for f in faults:
        f.validate(s)
    n = s.num_qubits
    m = len(faults)
    x = np.zeros((m, n), dtype=bool)
    z = np.zeros((m, n), dtype=bool)
    flips = np.zeros((m, len(s.steps)), dtype=bool)
    by_step: dict[int, list[int]] = {}
    for i, f in enumerate(faults):
        by_step.setdefault(f.step, []).append(i)
    active = np.zeros(m, dtype=bool)
    measured: set[int] = set()

    def insert(k: int) -> None:
        for i in by_step.get(k, []):
            letter = faults[i].pauli
            x[i, faults[i].qubit] = letter in "XY"
            z[i, faults[i].qubit] = letter in "ZY"
            active[i] = True

    for k, st in enumerate(s.steps):
        insert(k)
        if st.kind == "pump":
            pl.apply_table_rows(GateStep.cnot(*st.qubits).table(), st.qubits, x, z)
        elif st.kind in ("new_qubit",):
            pass
        elif st.kind == "frame_fix":
            if st.condition:
                odd = flips[:, list(st.condition)].sum(axis=1) % 2 == 1
                fix = st.fix_letters()
                for q, c in fix.items():
                    x[odd, q] ^= c in "XY"
                    z[odd, q] ^= c in "ZY"
        elif st.basis:
            q = st.qubits[0]
            anti = {"Z": x[:, q], "X": z[:, q], "Y": x[:, q] ^ z[:, q]}[st.basis].copy()
            flips[:, k] = anti & active
            new = _FLIP_LETTER[st.basis]
            x[:, q] = anti & (new in "XY")
            z[:, q] = anti & (new in "ZY")
            measured.add(q)
        else:
            pl.apply_table_rows(st.table(), st.qubits, x, z)
    insert(len(s.steps))
    roles = s.roles
    live = np.array([q not in measured for q in range(n)])
    photon = np.array([r == "photon" for r in roles]) & live
    x &= live
    z &= live
    basis = basis if basis is not None else StabilizerBasis.of_schedule(s)
    xc, zc = basis.minimize(x, z)
    out = []
    for i, f in enumerate(faults):
        out.append(
            {
                "fault": f,
                "raw": _text(x[i], z[i]),
                "residual": _text(xc[i], zc[i]),
                "support": [int(q) for q in np.flatnonzero(xc[i] | zc[i])],
                "photons": [int(q) for q in np.flatnonzero((xc[i] | zc[i]) & photon)],
            }
        )
    return out


def _text(x: np.ndarray, z: np.ndarray) -> str:
    sup = np.flatnonzero(x | z)
    if sup.size == 0:
        return "I"
    letters = {int(q): "IXZY"[int(x[q]) + 2 * int(z[q])] for q in sup}
    return pl.PauliString.from_letters(letters, x.size).sparse_str()


# ---------------------------------------------------------------------------
# localization bound
# ---------------------------------------------------------------------------


@dataclass
class LocalizationReport:
    """Per-fault photon support against the ``n + 2`` bound.

    ``n`` is the number of distinct emitters sharing an entangling macro
    with the faulty emitter after the fault (light cone).  ``degree`` is the
    whole-schedule count, reported for comparison only.
    """

    entries: list = field(default_factory=list)
    per_emitter: dict = field(default_factory=dict)

    @property
    def counterexamples(self) -> list[dict]:
        return [e for e in self.entries if e["photon_count"] > e["bound"]]

    @property
    def whole_schedule_violations(self) -> list[dict]:
        return [e for e in self.entries if e["photon_count"] > e["degree"] + 2]

    @property
    def ok(self) -> bool:
        return not self.counterexamples

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "faults": len(self.entries),
            "counterexamples": len(self.counterexamples),
            "whole_schedule_violations": len(self.whole_schedule_violations),
            "per_emitter": {str(k): v for k, v in sorted(self.per_emitter.items())},
            "entries": self.entries,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _macro_partners(s: Schedule) -> list[tuple[int, int, int]]:
    """``(stop, a, b)`` for every two-emitter entangling macro."""
    out = []
    for b in s.blocks:
        if b["kind"] in ("g", "nv_g") and len(b["qubits"]) >= 2:
            out.append((b["stop"], b["qubits"][0], b["qubits"][1]))
    return out


def localization_bound_check(s: Schedule, faults: Sequence[FaultSpec] | None = None, layout=None) -> LocalizationReport:
    """Sweep single emitter faults and compare photon supports with ``n + 2``.

    ``layout`` is accepted for symmetry with the compiler; the coupling
    actually exercised is read from the schedule's macro records.
    """
    faults = list(faults) if faults is not None else all_faults(s)
    partners = _macro_partners(s)
    results = sweep(s, faults)  # photon counts use the canonical residual
    rep = LocalizationReport()
    degree: dict[int, set[int]] = {}
    for _, a, b in partners:
        degree.setdefault(a, set()).add(b)
        degree.setdefault(b, set()).add(a)
    for res in results:
        f = res["fault"]
        cone = {b if a == f.qubit else a for stop, a, b in partners if stop > f.step and f.qubit in (a, b)}
        entry = {
            "step": f.step,
            "qubit": f.qubit,
            "pauli": f.pauli,
            "residual": res["residual"],
            "photons": res["photons"],
            "photon_count": len(res["photons"]),
            "light_cone": len(cone),
            "bound": len(cone) + 2,
            "degree": len(degree.get(f.qubit, ())),
        }
        entry["verdict"] = "within-bound" if entry["photon_count"] <= entry["bound"] else "counterexample"
        rep.entries.append(entry)
        pe = rep.per_emitter.setdefault(f.qubit, {"max_support": 0, "degree": entry["degree"], "max_bound": 0})
        pe["max_support"] = max(pe["max_support"], entry["photon_count"])
        pe["max_bound"] = max(pe["max_bound"], entry["bound"])
    return rep


# ---------------------------------------------------------------------------
# canonical residuals
# ---------------------------------------------------------------------------


@dataclass
class StabilizerBasis:
    """Clean final state of a schedule as local Cliffords on a graph state.

    Used to pick, among all residuals equivalent modulo the state's
    stabilizers, one with the fewest unmeasured qubits.
    """

    gamma: np.ndarray
    frame: list
    live: np.ndarray

    @classmethod
    def of_schedule(cls, s: Schedule) -> "StabilizerBasis":
        from .sim import extract_graph_frame, run_stabilizer

        t, _ = run_stabilizer(s)
        gf = extract_graph_frame(t)
        live = np.ones(t.n, dtype=bool)
        live[list(s.measured_qubits())] = False
        return cls(gf.graph.adjacency().astype(bool), gf.frame, live)

    def to_graph_basis(self, x: np.ndarray, z: np.ndarray) -> None:
        for q, c in enumerate(self.frame):
            if not c.is_identity():
                pl.apply_table_rows(c.inverse().table, (q,), x, z)

    def from_graph_basis(self, x: np.ndarray, z: np.ndarray) -> None:
        for q, c in enumerate(self.frame):
            if not c.is_identity():
                pl.apply_table_rows(c.table, (q,), x, z)

    def minimize(self, x: np.ndarray, z: np.ndarray, max_extra: int = 3) -> tuple[np.ndarray, np.ndarray]:
        """Lowest-support representatives of each residual row (signs dropped).

        Starts from the representative that is pure Z in the graph basis and
        tries every additional stabilizer product over up to ``max_extra``
        live vertices, stopping early once no lighter candidate can exist.
        """
        x = x.copy()
        z = z.copy()
        self.to_graph_basis(x, z)
        g8 = self.gamma.astype(np.uint8)
        c = (z ^ ((x.astype(np.uint8) @ g8) % 2).astype(bool)) & self.live
        best_t = x.copy()  # multiplier: X^a cancels the X part
        best_w = c.sum(axis=1)
        best_u = np.zeros_like(x)
        live_idx = np.flatnonzero(self.live)
        from itertools import combinations

        for w in range(1, max_extra + 1):
            if not np.any(best_w > w):
                break
            for combo in combinations(live_idx, w):
                u = np.zeros(x.shape[1], dtype=bool)
                u[list(combo)] = True
                gu = (g8[list(combo)].sum(axis=0) % 2).astype(bool)
                cand = ((c ^ gu) | u) & self.live
                wt = cand.sum(axis=1)
                better = wt < best_w
                if np.any(better):
                    best_w = np.where(better, wt, best_w)
                    best_u[better] = u
        t = best_t ^ best_u
        xr = (x ^ t) & self.live
        zr = (z ^ ((t.astype(np.uint8) @ g8) % 2).astype(bool)) & self.live
        self.from_graph_basis(xr, zr)
        return xr, zr
