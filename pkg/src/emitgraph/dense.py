"""Dense amplitude backend used as an independent oracle for small registers.

Measured or never-entangled qubits are kept as detached 2-vectors, so the
live tensor only holds qubits that actually share entanglement.  The cap
applies to that live tensor.
"""

from __future__ import annotations

import numpy as np

from . import pauli as pl
from .errors import DimensionError, ResourceError, ValidationError

DEFAULT_CAP = 14

_EIGEN = {
    ("Z", 1): np.array([1, 0], dtype=complex),
    ("Z", -1): np.array([0, 1], dtype=complex),
    ("X", 1): np.array([1, 1], dtype=complex) / np.sqrt(2),
    ("X", -1): np.array([1, -1], dtype=complex) / np.sqrt(2),
    ("Y", 1): np.array([1, 1j], dtype=complex) / np.sqrt(2),
    ("Y", -1): np.array([1, -1j], dtype=complex) / np.sqrt(2),
}


class DenseState:
    """Pure state over a growing register of qubits.

    Parameters
    ----------
    cap : int
        Largest number of simultaneously entangled (live) qubits allowed.
    """

    def __init__(self, cap: int = DEFAULT_CAP):
        self.cap = cap
        self.psi = np.ones((), dtype=complex)
        self.live: list[int] = []
        self.detached: dict[int, np.ndarray] = {}
        self.n = 0

    @classmethod
    def from_vector(cls, vec: np.ndarray, cap: int = DEFAULT_CAP) -> "DenseState":
        vec = np.asarray(vec, dtype=complex)
        n = int(round(np.log2(vec.size)))
        if 2**n != vec.size:
            raise DimensionError("vector length is not a power of two")
        st = cls(cap=max(cap, n))
        st.psi = vec.reshape((2,) * n) / np.linalg.norm(vec)
        st.live = list(range(n))
        st.n = n
        return st

    def copy(self) -> "DenseState":
        out = DenseState(self.cap)
        out.psi = self.psi.copy()
        out.live = list(self.live)
        out.detached = {q: v.copy() for q, v in self.detached.items()}
        out.n = self.n
        return out

    # register management -------------------------------------------------------
    def add_qubit(self, state: str = "0") -> int:
        vec = {"0": _EIGEN[("Z", 1)], "+": _EIGEN[("X", 1)]}.get(state)
        if vec is None:
            raise ValidationError(f"unknown initial state {state!r}")
        q = self.n
        self.detached[q] = vec.copy()
        self.n += 1
        return q

    def _attach(self, q: int) -> int:
        if q in self.detached:
            if len(self.live) + 1 > self.cap:
                raise ResourceError(f"dense engine cap of {self.cap} live qubits exceeded")
            vec = self.detached.pop(q)
            self.psi = np.multiply.outer(self.psi, vec)
            self.live.append(q)
        elif q not in self.live:
            raise DimensionError(f"qubit {q} is not allocated")
        return self.live.index(q)

    # gates ---------------------------------------------------------------------
    def apply_1q(self, u: np.ndarray, q: int) -> None:
        if q in self.detached:
            self.detached[q] = u @ self.detached[q]
            return
        ax = self._attach(q)
        self.psi = np.moveaxis(np.tensordot(u, self.psi, axes=([1], [ax])), 0, ax)

    def apply_2q(self, u: np.ndarray, a: int, b: int) -> None:
        ia = self._attach(a)
        ib = self._attach(b)
        u4 = u.reshape(2, 2, 2, 2)
        out = np.tensordot(u4, self.psi, axes=([2, 3], [ia, ib]))
        self.psi = np.moveaxis(out, [0, 1], [ia, ib])

    def apply_pauli(self, p: pl.PauliString) -> None:
        for q in p.support():
            self.apply_1q(pl.letter_matrix(p.letter(q)), q)
        self.psi = self.psi * (1j**p.phase)

    # measurement -------------------------------------------------------------
    def probability(self, q: int, basis: str, outcome: int) -> float:
        e = _EIGEN[(basis, outcome)]
        if q in self.detached:
            return float(abs(np.vdot(e, self.detached[q])) ** 2)
        ax = self.live.index(q)
        red = np.tensordot(e.conj(), self.psi, axes=([0], [ax]))
        return float(np.vdot(red, red).real)

    def measure(self, q: int, basis: str = "Z", rng: np.random.Generator | None = None, forced: int | None = None) -> int:
        """Projective measurement; the measured qubit is left detached in its eigenstate.

        A forced outcome of (numerically) zero probability is replaced by the
        only possible one, matching the stabilizer backend.
        """
        if q >= self.n:
            raise DimensionError(f"qubit {q} is not allocated")
        p_plus = self.probability(q, basis, 1)
        if forced is not None:
            outcome = int(forced)
            if (p_plus if outcome == 1 else 1 - p_plus) < 1e-9:
                outcome = -outcome
        else:
            rng = rng if rng is not None else np.random.default_rng()
            outcome = 1 if rng.random() < p_plus else -1
        e = _EIGEN[(basis, outcome)]
        if q in self.detached:
            amp = np.vdot(e, self.detached[q])
            self.detached[q] = e * amp / abs(amp)
            return outcome
        ax = self.live.index(q)
        red = np.tensordot(e.conj(), self.psi, axes=([0], [ax]))
        self.psi = red / np.linalg.norm(red)
        self.live.pop(ax)
        self.detached[q] = e.copy()
        return outcome

    # views ---------------------------------------------------------------------
    def norm(self) -> float:
        total = np.linalg.norm(self.psi)
        for v in self.detached.values():
            total *= np.linalg.norm(v)
        return float(total)

    def vector(self, order: list[int] | None = None) -> np.ndarray:
        """Full amplitude vector; qubit ``order[0]`` is the most significant bit."""
        order = list(range(self.n)) if order is None else list(order)
        if sorted(order) != list(range(self.n)):
            raise DimensionError("order must be a permutation of all qubits")
        tensor = self.psi
        axes = list(self.live)
        for q, v in sorted(self.detached.items()):
            tensor = np.multiply.outer(tensor, v)
            axes.append(q)
        perm = [axes.index(q) for q in order]
        return np.transpose(tensor, perm).reshape(-1) if self.n else tensor.reshape(1)

    @property
    def amplitudes(self) -> np.ndarray:
        return self.vector()


def apply_pauli_to_vector(vec: np.ndarray, p: pl.PauliString) -> np.ndarray:
    """Apply an n-qubit Pauli string to a big-endian amplitude vector."""
    n = p.n
    if vec.size != 2**n:
        raise DimensionError("vector length does not match the Pauli string")
    xm = sum(1 << (n - 1 - q) for q in range(n) if p.x[q])
    zm = sum(1 << (n - 1 - q) for q in range(n) if p.z[q])
    ny = int(np.count_nonzero(p.x & p.z))
    idx = np.arange(vec.size)
    src = idx ^ xm
    signs = 1 - 2 * (np.bitwise_count(src & zm).astype(np.int64) & 1)
    return (1j ** (p.phase + ny)) * signs * vec[src]


def equal_up_to_global_phase(a, b, atol: float = 1e-10) -> bool:
    """Compare two states after aligning the phase on the largest amplitude of ``a``."""
    va = a.vector() if isinstance(a, DenseState) else np.asarray(a, dtype=complex)
    vb = b.vector() if isinstance(b, DenseState) else np.asarray(b, dtype=complex)
    if va.shape != vb.shape:
        raise DimensionError(f"state sizes differ: {va.size} vs {vb.size}")
    k = int(np.argmax(np.abs(va)))
    if abs(vb[k]) < 1e-14:
        return False
    lam = va[k] / vb[k]
    lam /= abs(lam)
    return bool(np.max(np.abs(va - lam * vb)) <= atol)
