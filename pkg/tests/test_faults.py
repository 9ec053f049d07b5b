import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle as O
from emitgraph import pauli as pl
from emitgraph.compiler import ClusterDims, EmitterLayout, compile_g, compile_lr_chain, compile_parallel_cluster
from emitgraph.errors import UnsupportedGateError, ValidationError
from emitgraph.faults import (
    FaultSpec,
    all_faults,
    inject_fault,
    localization_bound_check,
    propagate_fault,
    sweep,
)
from emitgraph.randomized import random_clifford_schedule
from emitgraph.schedule import GateStep, Schedule
from emitgraph.sim import run_dense, run_stabilizer


def through_g(qubit, letter):
    return propagate_fault(compile_g(0, 1), FaultSpec(0, qubit, letter)).final


def oracle_case(rng, max_qubits=8, length=30):
    """Random schedule and fault; True when the residual reproduces the faulty run."""
    s = random_clifford_schedule(rng, max_qubits, length)
    k = int(rng.integers(1, len(s.steps) + 1))
    q = int(rng.integers(s.allocated_before(k)))
    f = FaultSpec(k, q, str(rng.choice(list("XYZ"))))
    trace = propagate_fault(s, f)
    seed = int(rng.integers(1 << 30))
    _, rep = run_stabilizer(s, seed=seed)
    clean, _ = run_dense(s, forced=rep.outcomes)
    faulty_forced = {i + (i >= k): (-o if i in trace.flips else o) for i, o in rep.outcomes.items()}
    bad, bad_rep = run_dense(inject_fault(s, f), forced=faulty_forced)
    got = {i - (i > k): o for i, o in bad_rep.outcomes.items()}
    want = {i: (-o if i in trace.flips else o) for i, o in rep.outcomes.items()}
    r = trace.final
    expect = O.pauli(r.letters, O.PHASE[r.phase]) @ clean.vector()
    return got == want and O.equal_up_to_phase(bad.vector(), expect)


class TestEntanglingMacroRelations:
    @pytest.mark.parametrize("qubit", [0, 1])
    def test_x_commutes(self, qubit):
        assert through_g(qubit, "X") == pl.PauliString.single(2, qubit, "X")

    def test_second_operand_relations(self):
        # labelling "1" = second operand, "2" = first operand
        assert through_g(1, "Z") == pl.PauliString.from_str("-XY")
        assert through_g(1, "Y") == pl.PauliString.from_str("+XZ")

    def test_first_operand_relations(self):
        assert through_g(0, "Z") == pl.PauliString.from_str("+YX")
        assert through_g(0, "Y") == pl.PauliString.from_str("-ZX")

    @pytest.mark.parametrize("letters", ["XI", "YI", "ZI", "IX", "IY", "IZ"])
    def test_matches_ideal_operator(self, letters):
        u = (1j * O.kron(O.X, O.I2) + O.kron(O.I2, O.X)) / np.sqrt(2)
        q = letters.index(letters.strip("I"))
        r = through_g(q, letters[q])
        assert np.allclose(O.pauli(r.letters, O.PHASE[r.phase]), u @ O.pauli(letters) @ u.conj().T)

    def test_x_stable_through_cluster_blocks(self):
        s, _ = compile_parallel_cluster(ClusterDims((3, 2)), EmitterLayout.line(3))
        for b in s.blocks:
            if b["kind"] != "g":
                continue
            for e in b["qubits"]:
                trace = propagate_fault(s, FaultSpec(b["start"], e, "X"))
                assert trace.residual_after(b["stop"] - 1) == pl.PauliString.single(trace.residual_after(b["stop"] - 1).n, e, "X")


class TestPumpRules:
    def equivalent(self, s, fault, letters):
        """The propagated residual acts on the clean state like ``letters``."""
        t, _ = run_stabilizer(s)
        trace = propagate_fault(s, fault)
        live = [q for q in trace.support]
        r = pl.PauliString.from_letters({q: trace.final.letter(q) for q in live}, t.n)
        rule = pl.PauliString.from_letters(letters, t.n)
        prod = r * rule
        prod = prod.with_phase(0)
        return t.expectation(prod) != 0

    @pytest.mark.parametrize("cycle", [2, 3])
    def test_interior_cycles(self, cycle):
        s = compile_lr_chain(5)
        pump = [b for b in s.blocks if b["kind"] == "pump"][cycle]
        new = s.steps[pump["start"]].qubits[1]
        prev = new - 1
        assert self.equivalent(s, FaultSpec(pump["start"], 0, "X"), {prev: "Z"})
        assert self.equivalent(s, FaultSpec(pump["start"], 0, "Z"), {new: "Z"})
        assert self.equivalent(s, FaultSpec(pump["start"], 0, "Y"), {new: "Z", prev: "Z"})
        assert not self.equivalent(s, FaultSpec(pump["start"], 0, "Z"), {new: "X"})

    def test_fault_right_after_pump_hits_one_photon(self):
        s, _ = compile_parallel_cluster(ClusterDims((5, 4)), EmitterLayout.line(5))
        faults = [FaultSpec(b["stop"], b["qubits"][0], "X") for b in s.blocks if b["kind"] == "pump"]
        for res in sweep(s, faults):
            assert len(res["photons"]) == 1


class TestPropagation:
    def test_validation(self):
        s = compile_lr_chain(2)
        with pytest.raises(ValidationError):
            propagate_fault(s, FaultSpec(0, 0, "X"))  # nothing allocated yet
        with pytest.raises(ValidationError):
            propagate_fault(s, FaultSpec(1, 0, "W"))
        with pytest.raises(ValidationError):
            propagate_fault(s, FaultSpec(len(s.steps) + 1, 0, "X"))

    def test_non_clifford(self):
        s = Schedule([GateStep.new_qubit(0, "0"), GateStep.hprime(0, 0.4, 0, 0)])
        with pytest.raises(UnsupportedGateError):
            propagate_fault(s, FaultSpec(1, 0, "X"))

    def test_inject_shifts_conditions(self):
        s = compile_lr_chain(2)
        f = FaultSpec(1, 0, "Z")
        out = inject_fault(s, f)
        assert len(out.steps) == len(s.steps) + 1 and out.steps[1].kind == "frame_fix"
        for a, b in zip(s.steps[1:], out.steps[2:]):
            assert list(b.condition) == [c + (c >= 1) for c in a.condition]
        out.validate()

    def test_measured_qubits_never_in_support(self):
        s, _ = compile_parallel_cluster(ClusterDims((3, 3)), EmitterLayout.line(3))
        measured = s.measured_qubits()
        for res in sweep(s, all_faults(s)):
            assert not set(res["support"]) & measured

    @settings(max_examples=30)
    @given(st.integers(0, 10_000))
    def test_sweep_matches_single_propagation(self, seed):
        rng = np.random.default_rng(seed)
        s, _ = compile_parallel_cluster(ClusterDims((3, 2)), EmitterLayout.line(3))
        faults = all_faults(s)
        pick = [faults[int(i)] for i in rng.choice(len(faults), size=5, replace=False)]
        for f, res in zip(pick, sweep(s, pick)):
            trace = propagate_fault(s, f)
            raw = {q: trace.final.letter(q) for q in trace.support}
            assert res["raw"] == ("I" if not raw else pl.PauliString.from_letters(raw, s.num_qubits).sparse_str())
            assert res["residual"] == ("I" if trace.canonical.weight() == 0 else trace.canonical.sparse_str())

    @pytest.mark.parametrize("seed", range(40))
    def test_oracle(self, seed):
        assert oracle_case(np.random.default_rng(seed))


class TestLocalization:
    def test_lr_chain(self):
        rep = localization_bound_check(compile_lr_chain(6))
        assert rep.ok
        assert max(e["photon_count"] for e in rep.entries) == 2

    def test_cluster_interior_emitter(self):
        s, _ = compile_parallel_cluster(ClusterDims((5, 3)), EmitterLayout.line(5))
        rep = localization_bound_check(s)
        assert rep.ok and not rep.whole_schedule_violations
        assert rep.per_emitter[2]["degree"] == 2
        assert rep.per_emitter[2]["max_support"] <= 4

    def test_report_json(self):
        rep = localization_bound_check(compile_lr_chain(2))
        import json

        d = json.loads(rep.to_json())
        assert d["counterexamples"] == 0 and d["faults"] == len(rep.entries)
        assert {"residual", "photons", "bound", "verdict"} <= set(d["entries"][0])
