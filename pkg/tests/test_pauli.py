import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracle as O
from emitgraph import pauli as pl
from emitgraph.errors import DimensionError, UnsupportedGateError, ValidationError
from emitgraph.schedule import GateStep
from emitgraph.sim import run_stabilizer
from emitgraph.schedule import Schedule
from emitgraph.tableau import Tableau


def paulis(n):
    return st.tuples(st.text("IXYZ", min_size=n, max_size=n), st.integers(0, 3)).map(
        lambda t: pl.PauliString.from_str(t[0]).with_phase(t[1])
    )


def dense(p: pl.PauliString) -> np.ndarray:
    return O.pauli(p.letters, O.PHASE[p.phase])


class TestPauliString:
    def test_letter_encoding(self):
        p = pl.PauliString.from_str("XZYI")
        assert list(p.x) == [1, 0, 1, 0]
        assert list(p.z) == [0, 1, 1, 0]
        assert p.support() == [0, 1, 2]

    def test_x_times_z_is_minus_i_y(self):
        assert pl.pauli_product(pl.PauliString.from_str("X"), pl.PauliString.from_str("Z")) == pl.PauliString.from_str("-iY")

    @pytest.mark.parametrize("letter", "XYZ")
    def test_involution(self, letter):
        p = pl.PauliString.from_str(letter * 3)
        assert p * p == pl.PauliString.identity(3)

    def test_two_qubit_product_against_matrices(self):
        p, q = pl.PauliString.from_str("XZ"), pl.PauliString.from_str("ZZ")
        got = p * q
        ph, letters = O.decompose(O.pauli("XZ") @ O.pauli("ZZ"), 2)
        assert got.letters == letters
        assert O.PHASE[got.phase] == pytest.approx(ph)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            pl.pauli_product(pl.PauliString.identity(2), pl.PauliString.identity(3))

    def test_text_round_trip(self):
        for text in ["+XYZ", "-iZZI", "+iIII", "-YXY"]:
            p = pl.PauliString.from_str(text)
            assert pl.PauliString.from_str(str(p)) == p
        sparse = pl.PauliString.from_str("-Y3 X4", 6)
        assert sparse.letters == "IIIYXI" and sparse.phase == 2

    def test_bad_text(self):
        with pytest.raises(ValidationError):
            pl.PauliString.from_str("Q1 X2")

    @given(paulis(3), paulis(3))
    def test_product_matches_matrices(self, p, q):
        assert np.allclose(dense(p * q), dense(p) @ dense(q))

    @given(paulis(4), paulis(4))
    def test_swapped_product_differs_by_commutation_sign(self, p, q):
        sign = 1 if p.commutes(q) else -1
        assert (q * p) == ((p * q) if sign == 1 else -(p * q))
        m = dense(p) @ dense(q) - dense(q) @ dense(p)
        assert np.allclose(m, 0) == p.commutes(q)


class TestSingleQubitClifford:
    def test_exactly_24(self):
        group = pl.SingleQubitClifford.all()
        assert len(group) == 24 == len({c.key for c in group})

    def test_images_anticommute(self):
        for c in pl.SingleQubitClifford.all():
            a = pl.PauliString.from_str(c.image_of_x)
            b = pl.PauliString.from_str(c.image_of_z)
            assert not a.commutes(b)

    def test_hadamard(self):
        assert pl.CLIFFORD_H.key == ("+Z", "+X")
        assert pl.CLIFFORD_H.conjugate_letter("X") == (1, "Z")

    def test_rot_x_image_of_z_matches_matrix(self):
        u = pl.rot_x(math.pi / 2)
        m = u @ O.Z @ u.conj().T
        ph, letter = O.decompose(m, 1)
        sign, got = pl.CLIFFORD_SQRT_X.conjugate_letter("Z")
        assert got == letter == "Y"
        assert sign == pytest.approx(ph.real)

    def test_group_closure_inverse_identity(self):
        group = pl.SingleQubitClifford.all()
        ident = pl.SingleQubitClifford.identity()
        for a in group:
            assert a.then(a.inverse()) == ident
            assert a.then(ident) == a
            for b in group[:6]:
                assert a.then(b) in group

    @given(st.integers(0, 23), st.integers(0, 23), st.integers(0, 23))
    def test_then_is_associative_and_matches_matrices(self, i, j, k):
        g = pl.SingleQubitClifford.all()
        a, b, c = g[i], g[j], g[k]
        assert a.then(b).then(c) == a.then(b.then(c))
        expect = b.matrix @ a.matrix
        assert O.equal_up_to_phase(a.then(b).matrix, expect)

    def test_tables_match_matrix_conjugation(self):
        for c in pl.SingleQubitClifford.all():
            for letter in "XYZ":
                sign, img = c.conjugate_letter(letter)
                ph, ref = O.decompose(c.matrix @ O.LETTER[letter] @ c.matrix.conj().T, 1)
                assert img == ref and sign == pytest.approx(ph.real)


TWO_QUBIT_STEPS = [
    GateStep.cz(0, 1),
    GateStep.cnot(0, 1),
    GateStep.cnot(1, 0),
]
ONE_QUBIT_STEPS = [
    GateStep.rx(0, math.pi / 2),
    GateStep.rx(0, -math.pi / 2),
    GateStep.rz(0, math.pi / 2),
    GateStep.rz(0, -math.pi / 2),
    GateStep.hprime(0),
    GateStep.hprime(0, math.pi / 2, 0, -math.pi / 2),
]


class TestConjugation:
    def test_cz_on_x(self):
        img = pl.conjugate_pauli(GateStep.cz(0, 1).table(), (0, 1), pl.PauliString.from_str("XI"))
        assert img == pl.PauliString.from_str("XZ")

    def test_h_on_x(self):
        img = pl.conjugate_pauli(pl.CLIFFORD_H.table, (0,), pl.PauliString.from_str("X"))
        assert img == pl.PauliString.from_str("Z")

    @pytest.mark.parametrize("step", TWO_QUBIT_STEPS, ids=lambda s: s.kind + str(s.qubits))
    def test_two_qubit_exhaustive(self, step):
        a, b = step.qubits
        u = O.cz(2, 0, 1) if step.kind == "cz" else None
        if step.kind == "cnot":
            u = np.zeros((4, 4), dtype=complex)
            for k in range(4):
                bits = [(k >> 1) & 1, k & 1]
                bits[b] ^= bits[a]
                u[bits[0] * 2 + bits[1], k] = 1
        for letters in itertools.product("IXYZ", repeat=2):
            p = pl.PauliString.from_str("".join(letters))
            img = pl.conjugate_pauli(step.table(), step.qubits, p)
            assert np.allclose(dense(img), u @ dense(p) @ u.conj().T)

    @pytest.mark.parametrize("step", ONE_QUBIT_STEPS, ids=lambda s: f"{s.kind}{s.angles}")
    def test_one_qubit_exhaustive(self, step):
        u = step.unitary()
        for letter in "XYZ":
            img = pl.conjugate_pauli(step.table(), (0,), pl.PauliString.from_str(letter))
            assert np.allclose(dense(img), u @ O.LETTER[letter] @ u.conj().T)

    def test_non_clifford_rejected(self):
        with pytest.raises(UnsupportedGateError):
            GateStep.hprime(0, 0.3, 0, 0).table()

    @given(paulis(3), paulis(3), st.integers(0, 23), st.sampled_from([(0, 1), (1, 2), (2, 0)]))
    def test_commutation_preserved(self, p, q, ci, pair):
        c = pl.SingleQubitClifford.all()[ci]
        p1 = pl.conjugate_pauli(c.table, (pair[0],), p)
        q1 = pl.conjugate_pauli(c.table, (pair[0],), q)
        p2 = pl.conjugate_pauli(GateStep.cz(*pair).table(), pair, p1)
        q2 = pl.conjugate_pauli(GateStep.cz(*pair).table(), pair, q1)
        assert p2.commutes(q2) == p.commutes(q)


class TestTableau:
    def run(self, steps, n=0, **kw):
        return run_stabilizer(Schedule(steps, num_inputs=n), **kw)[0]

    def test_pump_makes_bell_pair(self):
        t = self.run([GateStep.new_qubit(0, "+"), GateStep.pump(0, 1)])
        assert t.expectation(pl.PauliString.from_str("XX")) == 1
        assert t.expectation(pl.PauliString.from_str("ZZ")) == 1

    def test_stabilizer_fix_leaves_state(self):
        t = self.run([GateStep.new_qubit(0, "+"), GateStep.pump(0, 1)])
        t2 = t.copy()
        t2.apply_pauli(pl.PauliString.from_str("XX"))
        assert t2.same_state(t)
        t2.apply_pauli(pl.PauliString.from_str("ZI"))
        assert not t2.same_state(t)

    def test_h_cz_h_is_one_edge(self):
        t = self.run([GateStep.new_qubit(0, "0"), GateStep.new_qubit(1, "0"), GateStep.hprime(0),
                      GateStep.hprime(1), GateStep.cz(0, 1)])
        assert t.expectation(pl.PauliString.from_str("XZ")) == 1
        assert t.expectation(pl.PauliString.from_str("ZX")) == 1

    def test_invariants_hold_on_random_schedules(self):
        from emitgraph.randomized import random_clifford_schedule

        rng = np.random.default_rng(5)
        for _ in range(20):
            s = random_clifford_schedule(rng, 5, 25)
            run_stabilizer(s, seed=1, check=True)

    def test_bell_measurement_collapses(self):
        t = self.run([GateStep.new_qubit(0, "+"), GateStep.pump(0, 1)])
        out = t.measure(1, "Z", np.random.default_rng(3))
        assert out in (1, -1)
        assert t.expectation(pl.PauliString.from_str("IZ")) == out
        assert t.expectation(pl.PauliString.from_str("ZI")) == out

    def test_repeat_measurement_is_deterministic(self):
        rng = np.random.default_rng(11)
        for basis in "ZY":
            t = self.run([GateStep.new_qubit(0, "+"), GateStep.pump(0, 1)])
            first = t.measure(0, basis, rng)
            for forced in (1, -1):
                assert t.copy().measure(0, basis, rng, forced) == first

    def test_end_of_cluster_measurement(self):
        # path 0-1-2, measure Z on 2: for outcome -1 the neighbour needs a Z fix
        for forced in (1, -1):
            t = Tableau.from_stabilizers([pl.PauliString.from_str(s) for s in ("XZI", "ZXZ", "IZX")])
            out = t.measure(2, "Z", forced=forced)
            assert out == forced
            if out == -1:
                t.apply_pauli(pl.PauliString.from_str("IZI"))
            assert t.expectation(pl.PauliString.from_str("XZI")) == 1
            assert t.expectation(pl.PauliString.from_str("ZXI")) == 1

    def test_from_stabilizers_rejects_bad_input(self):
        with pytest.raises(DimensionError):
            Tableau.from_stabilizers([pl.PauliString.from_str("XX")])
        with pytest.raises(ValidationError):
            Tableau.from_stabilizers([pl.PauliString.from_str("iXX"), pl.PauliString.from_str("ZZ")])
