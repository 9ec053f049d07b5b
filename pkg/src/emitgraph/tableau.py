"""Stabilizer tableau with destabilizers (CHP-style), growable register."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import pauli as pl
from .errors import DimensionError, UnsupportedGateError, ValidationError
from .schedule import GateStep

# Clifford taking Y to +Z, used to measure in the Y basis
_Y_TO_Z = next(c for c in pl.SingleQubitClifford.all() if c.conjugate_letter("Y") == (1, "Z"))
_Y_TO_Z_TABLE = _Y_TO_Z.table
_Y_TO_Z_INV_TABLE = _Y_TO_Z.inverse().table
_H_TABLE = pl.CLIFFORD_H.table


class Tableau:
    """Rows ``0..n-1`` are destabilizers, rows ``n..2n-1`` stabilizers.

    Row ``i`` is ``(-1)**r[i] σ(x[i], z[i])``.  Destabilizer signs carry no
    meaning and are kept only for bookkeeping.
    """

    __slots__ = ("x", "z", "r")

    def __init__(self, x: np.ndarray, z: np.ndarray, r: np.ndarray):
        self.x = x
        self.z = z
        self.r = r

    @classmethod
    def zero(cls, n: int) -> "Tableau":
        """The all-|0⟩ state."""
        eye = np.eye(n, dtype=bool)
        zer = np.zeros((n, n), dtype=bool)
        return cls(np.vstack([eye, zer]), np.vstack([zer, eye]), np.zeros(2 * n, dtype=bool))

    @classmethod
    def from_stabilizers(cls, stabs: Sequence[pl.PauliString]) -> "Tableau":
        """Build a tableau whose stabilizer group is generated by ``stabs``.

        The generators must commute, be Hermitian and independent; destabilizers
        are found by symplectic Gram-Schmidt.
        """
        n = len(stabs)
        if any(s.n != n for s in stabs):
            raise DimensionError("need n independent generators on n qubits")
        t = cls.zero(n)
        sx = np.array([s.x for s in stabs], dtype=bool).reshape(n, n)
        sz = np.array([s.z for s in stabs], dtype=bool).reshape(n, n)
        sr = np.array([s.phase == 2 for s in stabs], dtype=bool)
        if any(not s.is_hermitian() for s in stabs):
            raise ValidationError("stabilizer generators must be Hermitian")
        destab = _find_destabilizers(sx, sz)
        t.x = np.vstack([destab[0], sx])
        t.z = np.vstack([destab[1], sz])
        t.r = np.concatenate([np.zeros(n, bool), sr])
        t.check_invariants()
        return t

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def copy(self) -> "Tableau":
        return Tableau(self.x.copy(), self.z.copy(), self.r.copy())

    def stabilizers(self) -> list[pl.PauliString]:
        n = self.n
        return pl.paulis_from_rows(self.x[n:], self.z[n:], self.r[n:])

    def destabilizers(self) -> list[pl.PauliString]:
        n = self.n
        return pl.paulis_from_rows(self.x[:n], self.z[:n], self.r[:n])

    # invariants ------------------------------------------------------------
    def check_invariants(self) -> None:
        """Raise ``ValidationError`` unless the symplectic form is standard."""
        n = self.n
        xi = self.x.astype(np.uint8)
        zi = self.z.astype(np.uint8)
        omega = (xi @ zi.T + zi @ xi.T) % 2
        want = np.zeros((2 * n, 2 * n), dtype=np.uint8)
        want[:n, n:] = np.eye(n, dtype=np.uint8)
        want[n:, :n] = np.eye(n, dtype=np.uint8)
        # destabilizers may anticommute among themselves only through sign-free bookkeeping;
        # the standard CHP form keeps them mutually commuting
        if not np.array_equal(omega, want):
            raise ValidationError("tableau rows violate the symplectic invariants")

    # growth --------------------------------------------------------------
    def add_qubit(self, state: str = "0") -> int:
        """Append a fresh qubit in |0⟩ or |+⟩; returns its index."""
        n = self.n
        x = np.zeros((2 * n + 2, n + 1), dtype=bool)
        z = np.zeros((2 * n + 2, n + 1), dtype=bool)
        r = np.zeros(2 * n + 2, dtype=bool)
        x[:n, :n] = self.x[:n]
        z[:n, :n] = self.z[:n]
        r[:n] = self.r[:n]
        x[n + 1 : 2 * n + 1, :n] = self.x[n:]
        z[n + 1 : 2 * n + 1, :n] = self.z[n:]
        r[n + 1 : 2 * n + 1] = self.r[n:]
        x[n, n] = True  # destabilizer X
        z[2 * n + 1, n] = True  # stabilizer Z
        self.x, self.z, self.r = x, z, r
        if state == "+":
            self.apply_table(_H_TABLE, (n,))
        elif state != "0":
            raise ValidationError(f"unknown initial state {state!r}")
        return n

    # gates -----------------------------------------------------------------
    def apply_table(self, table: pl.ConjugationTable, qubits: Sequence[int]) -> None:
        for q in qubits:
            if not 0 <= q < self.n:
                raise DimensionError(f"qubit {q} out of range for {self.n}-qubit tableau")
        flips = pl.apply_table_rows(table, qubits, self.x, self.z)
        self.r ^= flips

    def apply_pauli(self, p: pl.PauliString) -> None:
        """Apply a Pauli operator: flips the sign of every anticommuting row."""
        if p.n != self.n:
            p = p.padded(self.n) if p.n < self.n else _fail_dim(p, self.n)
        anti = ((self.x & p.z).sum(axis=1) + (self.z & p.x).sum(axis=1)) % 2 == 1
        self.r ^= anti

    def apply_step(self, step: GateStep, rng: np.random.Generator | None = None, forced: int | None = None) -> int | None:
        """Apply one gate step in place; measurement steps return their outcome."""
        kind = step.kind
        if kind == "new_qubit":
            self._check_alloc(step.qubits[0])
            self.add_qubit(step.state or "0")
        elif kind == "pump":
            e, p = step.qubits
            self._check_alloc(p)
            self.add_qubit("0")
            self.apply_table(GateStep.cnot(e, p).table(), (e, p))
        elif kind == "frame_fix":
            self.apply_pauli(step.fix_pauli(self.n))
        elif step.basis:
            return self.measure(step.qubits[0], step.basis, rng, forced)
        else:
            if not step.is_clifford():
                raise UnsupportedGateError(f"{kind} with angles {step.angles} is not Clifford")
            self.apply_table(step.table(), step.qubits)
        return None

    def _check_alloc(self, q: int) -> None:
        if q != self.n:
            raise ValidationError(f"allocation of qubit {q} but register has {self.n}")

    # measurement -------------------------------------------------------------
    def _rowsum_into(self, targets: np.ndarray, src: int) -> None:
        """rows[targets] <- rows[src] * rows[targets], with exact phase."""
        if targets.size == 0:
            return
        ge = pl.g_exponent(self.x[src][None, :], self.z[src][None, :], self.x[targets], self.z[targets])
        total = 2 * self.r[targets].astype(np.int64) + 2 * int(self.r[src]) + ge.sum(axis=1)
        self.r[targets] = (total % 4) == 2
        self.x[targets] ^= self.x[src]
        self.z[targets] ^= self.z[src]

    def _product_of_stabilizers(self, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
        """Product (in index order) of stabilizer rows selected by mask -> (x, z, phase)."""
        n = self.n
        x = np.zeros(n, dtype=bool)
        z = np.zeros(n, dtype=bool)
        phase = 0
        for i in np.flatnonzero(mask):
            row = n + i
            phase += 2 * int(self.r[row]) + int(pl.g_exponent(x, z, self.x[row], self.z[row]).sum())
            x ^= self.x[row]
            z ^= self.z[row]
        return x, z, phase % 4

    def measure_z(self, q: int, rng: np.random.Generator | None = None, forced: int | None = None) -> int:
        n = self.n
        if not 0 <= q < n:
            raise DimensionError(f"qubit {q} out of range")
        hits = np.flatnonzero(self.x[n:, q])
        if hits.size:
            p = n + int(hits[0])
            others = np.flatnonzero(self.x[:, q])
            others = others[others != p]
            self._rowsum_into(others, p)
            self.x[p - n] = self.x[p]
            self.z[p - n] = self.z[p]
            self.r[p - n] = self.r[p]
            self.x[p] = False
            self.z[p] = False
            self.z[p, q] = True
            if forced is None:
                rng = rng if rng is not None else np.random.default_rng()
                outcome = 1 if rng.integers(2) == 0 else -1
            else:
                outcome = int(forced)
            self.r[p] = outcome == -1
            return outcome
        # deterministic: Z_q is ± the product of stabilizers paired with destabilizers that anticommute
        x, zz, phase = self._product_of_stabilizers(self.x[:n, q])
        return 1 if phase == 0 else -1

    def measure(self, q: int, basis: str = "Z", rng: np.random.Generator | None = None, forced: int | None = None) -> int:
        """Measure qubit ``q`` in the Z or Y basis; returns ±1.

        A deterministic outcome always wins over ``forced``.
        """
        if basis == "Z":
            return self._measure_checked(q, rng, forced)
        if basis == "Y":
            self.apply_table(_Y_TO_Z_TABLE, (q,))
            out = self._measure_checked(q, rng, forced)
            self.apply_table(_Y_TO_Z_INV_TABLE, (q,))
            return out
        if basis == "X":
            self.apply_table(_H_TABLE, (q,))
            out = self._measure_checked(q, rng, forced)
            self.apply_table(_H_TABLE, (q,))
            return out
        raise ValidationError(f"unknown basis {basis!r}")

    def _measure_checked(self, q: int, rng, forced) -> int:
        return self.measure_z(q, rng, forced)

    # queries -----------------------------------------------------------------
    def expectation(self, p: pl.PauliString) -> int:
        """Return +1/-1 if ±p is in the stabilizer group, 0 otherwise."""
        n = self.n
        if p.n != n:
            raise DimensionError(f"Pauli on {p.n} qubits vs tableau on {n}")
        if not p.is_hermitian():
            raise ValidationError("expectation of a non-Hermitian Pauli")
        stab_anti = ((self.x[n:] & p.z).sum(axis=1) + (self.z[n:] & p.x).sum(axis=1)) % 2
        if stab_anti.any():
            return 0
        destab_anti = ((self.x[:n] & p.z).sum(axis=1) + (self.z[:n] & p.x).sum(axis=1)) % 2 == 1
        x, z, phase = self._product_of_stabilizers(destab_anti)
        if not (np.array_equal(x, p.x) and np.array_equal(z, p.z)):
            raise ValidationError("inconsistent tableau")  # pragma: no cover
        return 1 if phase == p.phase else -1

    def is_product_qubit(self, q: int) -> bool:
        """True when qubit ``q`` is unentangled with the rest."""
        for letter in "XYZ":
            if self.expectation(pl.PauliString.single(self.n, q, letter)) != 0:
                return True
        return False

    def same_state(self, other: "Tableau") -> bool:
        """Stabilizer groups (with signs) coincide."""
        if other.n != self.n:
            return False
        return all(self.expectation(s) == 1 for s in other.stabilizers())


def _fail_dim(p: pl.PauliString, n: int):
    raise DimensionError(f"Pauli on {p.n} qubits vs tableau on {n}")


def _find_destabilizers(sx: np.ndarray, sz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symplectic partners for independent commuting generators (GF(2) solve)."""
    n = sx.shape[0]
    # want D with omega(D_i, S_j) = delta_ij and D mutually commuting.
    # Solve D = [dx | dz] from  dx S_z^T + dz S_x^T = I ; pick a particular solution.
    a = np.hstack([sz, sx]).astype(np.uint8)  # omega(d, s) = d_x·s_z + d_z·s_x
    sol = _gf2_solve_rows(a, np.eye(n, dtype=np.uint8))
    dx, dz = sol[:, :n].astype(bool), sol[:, n:].astype(bool)
    # make destabilizers mutually commuting: D_i <- D_i + sum_j c_ij S_j
    for i in range(n):
        for j in range(i + 1, n):
            om = (np.count_nonzero(dx[i] & dz[j]) + np.count_nonzero(dz[i] & dx[j])) % 2
            if om:
                dx[j] ^= sx[i]
                dz[j] ^= sz[i]
    return dx, dz


def _gf2_solve_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Find X (rows x) with a @ x_i = b[:, i]... returned as rows: X[i] solves a @ X[i] = e_i."""
    m, k = a.shape
    aug = np.hstack([a.copy(), b.copy()]) % 2
    pivots = []
    row = 0
    for col in range(k):
        hit = np.flatnonzero(aug[row:, col])
        if hit.size == 0:
            continue
        piv = row + hit[0]
        aug[[row, piv]] = aug[[piv, row]]
        for r2 in np.flatnonzero(aug[:, col]):
            if r2 != row:
                aug[r2] ^= aug[row]
        pivots.append(col)
        row += 1
        if row == m:
            break
    if row < m:
        raise ValidationError("stabilizer generators are not independent")
    sol = np.zeros((b.shape[1], k), dtype=np.uint8)
    for r, col in enumerate(pivots):
        sol[:, col] = aug[r, k:]
    return sol
