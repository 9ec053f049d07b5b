"""Pauli strings, the single-qubit Clifford group and matrix-derived conjugation tables.

Conventions
-----------
A Pauli string is ``i**phase * P_0 ⊗ P_1 ⊗ ...`` where qubit ``q`` carries
``X`` for (x=1, z=0), ``Z`` for (0, 1) and ``Y`` for (1, 1), with ``Y = iXZ``.
Dense matrices use big-endian ordering: qubit 0 is the most significant bit.

Every sign that shows up in a conjugation table is computed from an explicit
unitary, never typed in by hand.
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, UnsupportedGateError, ValidationError

I2 = np.eye(2, dtype=complex)
X_MAT = np.array([[0, 1], [1, 0]], dtype=complex)
Z_MAT = np.array([[1, 0], [0, -1]], dtype=complex)
Y_MAT = 1j * X_MAT @ Z_MAT
H_MAT = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S_MAT = np.diag([1, 1j]).astype(complex)

LETTERS = "IXZY"  # indexed by x + 2*z
_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_PHASE_TEXT = {0: "+", 1: "+i", 2: "-", 3: "-i"}


def letter_matrix(letter: str) -> np.ndarray:
    return {"I": I2, "X": X_MAT, "Y": Y_MAT, "Z": Z_MAT}[letter]


def g_exponent(x1, z1, x2, z2):
    """Exponent of ``i`` picked up by sigma(x1,z1) @ sigma(x2,z2).

    Works elementwise on integer or boolean numpy arrays.
    """
    x1 = np.asarray(x1, dtype=np.int8)
    z1 = np.asarray(z1, dtype=np.int8)
    x2 = np.asarray(x2, dtype=np.int8)
    z2 = np.asarray(z2, dtype=np.int8)
    y_term = z2 - x2
    x_term = z2 * (2 * x2 - 1)
    z_term = x2 * (1 - 2 * z2)
    return np.where(x1 & z1, y_term, np.where(x1, x_term, np.where(z1, z_term, 0)))


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=bool).reshape(-1)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class PauliString:
    """An n-qubit Pauli operator ``i**phase * σ(x, z)``."""

    x: np.ndarray
    z: np.ndarray
    phase: int = 0

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen(self.x))
        object.__setattr__(self, "z", _frozen(self.z))
        object.__setattr__(self, "phase", int(self.phase) % 4)
        if self.x.shape != self.z.shape:
            raise DimensionError("x and z bit vectors differ in length")

    # construction -------------------------------------------------------
    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(np.zeros(n, bool), np.zeros(n, bool), 0)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str, phase: int = 0) -> "PauliString":
        return cls.from_letters({qubit: letter}, n, phase)

    @classmethod
    def from_letters(cls, letters: dict[int, str], n: int, phase: int = 0) -> "PauliString":
        x = np.zeros(n, bool)
        z = np.zeros(n, bool)
        for q, letter in letters.items():
            if not 0 <= q < n:
                raise DimensionError(f"qubit {q} outside register of size {n}")
            x[q], z[q] = _LETTER_BITS[letter]
        return cls(x, z, phase)

    @classmethod
    def from_str(cls, text: str, n: int | None = None) -> "PauliString":
        """Parse dense text such as ``"-iXIZ"`` or sparse text such as ``"-Y3 X4"``.

        Sparse text needs ``n`` unless the register size can be taken as the
        largest index plus one.
        """
        text = text.strip()
        m = re.fullmatch(r"([+-]?)(i?)\s*(.*)", text)
        sign, imag, body = m.groups()
        phase = (2 if sign == "-" else 0) + (1 if imag else 0)
        body = body.strip()
        if re.fullmatch(r"[IXYZ_]*", body):
            letters = body.replace("_", "I")
            if n is not None and len(letters) != n:
                raise DimensionError(f"dense Pauli text has {len(letters)} letters, expected {n}")
            return cls.from_letters({q: c for q, c in enumerate(letters) if c != "I"}, len(letters), phase)
        tokens = re.findall(r"([IXYZ])(\d+)", body)
        if " ".join(a + b for a, b in tokens) != " ".join(body.split()):
            raise ValidationError(f"cannot parse Pauli text {text!r}")
        letters = {int(q): c for c, q in tokens}
        size = n if n is not None else (max(letters) + 1 if letters else 0)
        return cls.from_letters({q: c for q, c in letters.items() if c != "I"}, size, phase)

    # basic properties -----------------------------------------------------
    @property
    def n(self) -> int:
        return self.x.shape[0]

    def letter(self, q: int) -> str:
        return LETTERS[int(self.x[q]) + 2 * int(self.z[q])]

    @property
    def letters(self) -> str:
        return "".join(LETTERS[v] for v in (self.x.astype(int) + 2 * self.z.astype(int)))

    def support(self) -> list[int]:
        return [int(q) for q in np.flatnonzero(self.x | self.z)]

    def weight(self) -> int:
        return int(np.count_nonzero(self.x | self.z))

    def is_hermitian(self) -> bool:
        # i^phase * σ is Hermitian iff phase is even (σ itself is Hermitian)
        return self.phase % 2 == 0

    @property
    def sign(self) -> int:
        if not self.is_hermitian():
            raise ValueError("non-Hermitian Pauli has no real sign")
        return 1 if self.phase == 0 else -1

    def __str__(self) -> str:
        return _PHASE_TEXT[self.phase] + self.letters

    def sparse_str(self) -> str:
        body = " ".join(f"{self.letter(q)}{q}" for q in self.support())
        return _PHASE_TEXT[self.phase] + (body or "I")

    def __repr__(self) -> str:
        return f"PauliString({str(self)!r})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliString):
            return NotImplemented
        return (
            self.phase == other.phase
            and self.n == other.n
            and bool(np.array_equal(self.x, other.x))
            and bool(np.array_equal(self.z, other.z))
        )

    def __hash__(self) -> int:
        return hash((self.phase, self.x.tobytes(), self.z.tobytes()))

    def equal_up_to_sign(self, other: "PauliString") -> bool:
        return bool(np.array_equal(self.x, other.x) and np.array_equal(self.z, other.z))

    # algebra ------------------------------------------------------------
    def __mul__(self, other: "PauliString") -> "PauliString":
        return pauli_product(self, other)

    def __neg__(self) -> "PauliString":
        return PauliString(self.x, self.z, self.phase + 2)

    def with_phase(self, phase: int) -> "PauliString":
        return PauliString(self.x, self.z, phase)

    def commutes(self, other: "PauliString") -> bool:
        if self.n != other.n:
            raise DimensionError("length mismatch")
        return int(np.count_nonzero(self.x & other.z) + np.count_nonzero(self.z & other.x)) % 2 == 0

    def restrict(self, qubits: Sequence[int]) -> "PauliString":
        idx = list(qubits)
        return PauliString(self.x[idx], self.z[idx], self.phase)

    def embed(self, n: int, qubits: Sequence[int]) -> "PauliString":
        """Place this string on ``qubits`` of an ``n``-qubit register."""
        x = np.zeros(n, bool)
        z = np.zeros(n, bool)
        x[list(qubits)] = self.x
        z[list(qubits)] = self.z
        return PauliString(x, z, self.phase)

    def padded(self, n: int) -> "PauliString":
        if n < self.n:
            raise DimensionError("cannot shrink a Pauli string")
        return self.embed(n, range(self.n))

    def to_matrix(self) -> np.ndarray:
        out = np.array([[1.0 + 0j]])
        for q in range(self.n):
            out = np.kron(out, letter_matrix(self.letter(q)))
        return (1j ** self.phase) * out


def pauli_product(p: PauliString, q: PauliString) -> PauliString:
    """Return ``p @ q`` with the exact phase."""
    if p.n != q.n:
        raise DimensionError(f"length mismatch: {p.n} vs {q.n}")
    extra = int(np.sum(g_exponent(p.x, p.z, q.x, q.z)))
    return PauliString(p.x ^ q.x, p.z ^ q.z, p.phase + q.phase + extra)


# ---------------------------------------------------------------------------
# conjugation tables derived from matrices
# ---------------------------------------------------------------------------


def local_index_bits(k: int) -> np.ndarray:
    """Rows of (x_0, z_0, x_1, z_1, ...) for local index 0..4**k-1.

    The index is ``sum_j (2*x_j + z_j) * 4**(k-1-j)``.
    """
    idx = np.arange(4**k)
    bits = np.zeros((4**k, 2 * k), dtype=bool)
    for j in range(k):
        code = (idx >> (2 * (k - 1 - j))) & 3
        bits[:, 2 * j] = code >> 1
        bits[:, 2 * j + 1] = code & 1
    return bits


def _bits_pauli(bits: np.ndarray) -> PauliString:
    return PauliString(bits[0::2], bits[1::2], 0)


def decompose_pauli_matrix(m: np.ndarray, atol: float = 1e-9) -> PauliString | None:
    """Write ``m`` as ``i**k σ`` if it is a phased Pauli string, else ``None``."""
    dim = m.shape[0]
    k = int(round(np.log2(dim)))
    for bits in local_index_bits(k):
        p = _bits_pauli(bits)
        coef = np.trace(p.to_matrix().conj().T @ m) / dim
        if abs(coef) > 0.5:
            for phase in range(4):
                if abs(coef - 1j**phase) < atol:
                    cand = p.with_phase(phase)
                    if np.allclose(cand.to_matrix(), m, atol=atol):
                        return cand
            return None
    return None


@dataclass(frozen=True)
class ConjugationTable:
    """Images of the Hermitian Paulis on ``k`` qubits under ``U · U†``.

    ``out_bits[idx]`` holds the (x_0, z_0, ...) bits of the image of local
    Pauli ``idx`` and ``neg[idx]`` is true when the image carries sign -1.
    """

    k: int
    out_bits: np.ndarray
    neg: np.ndarray

    def image(self, p: PauliString) -> PauliString:
        """Conjugate a Hermitian ``k``-qubit Pauli string."""
        idx = 0
        for q in range(self.k):
            idx = idx * 4 + 2 * int(p.x[q]) + int(p.z[q])
        out = _bits_pauli(self.out_bits[idx])
        return out.with_phase(p.phase + (2 if self.neg[idx] else 0))


def conjugation_table(u: np.ndarray) -> ConjugationTable:
    """Build the table of ``u σ u†`` from an explicit unitary.

    Raises
    ------
    UnsupportedGateError
        If some Pauli is not mapped to a signed Pauli, i.e. ``u`` is not Clifford.
    """
    u = np.asarray(u, dtype=complex)
    k = int(round(np.log2(u.shape[0])))
    bits = local_index_bits(k)
    out_bits = np.zeros_like(bits)
    neg = np.zeros(4**k, dtype=bool)
    for idx, row in enumerate(bits):
        image = u @ _bits_pauli(row).to_matrix() @ u.conj().T
        dec = decompose_pauli_matrix(image)
        if dec is None or dec.phase % 2:
            raise UnsupportedGateError("gate is not Clifford: a Pauli maps outside the Pauli group")
        out_bits[idx, 0::2] = dec.x
        out_bits[idx, 1::2] = dec.z
        neg[idx] = dec.phase == 2
    out_bits.setflags(write=False)
    neg.setflags(write=False)
    return ConjugationTable(k, out_bits, neg)


def is_clifford_matrix(u: np.ndarray) -> bool:
    try:
        conjugation_table(u)
    except UnsupportedGateError:
        return False
    return True


def rot_x(theta: float) -> np.ndarray:
    """exp(-i θ X / 2)."""
    return np.cos(theta / 2) * I2 - 1j * np.sin(theta / 2) * X_MAT


def rot_z(theta: float) -> np.ndarray:
    """exp(-i θ Z / 2)."""
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def hprime_matrix(theta1: float, theta2: float, phi: float) -> np.ndarray:
    """Generalized Hadamard; equals H when all three phases vanish."""
    return np.array(
        [
            [np.exp(1j * theta1), np.exp(1j * (theta1 + phi))],
            [np.exp(1j * (theta2 - phi)), -np.exp(1j * theta2)],
        ]
    ) / np.sqrt(2)


CZ_MAT = np.diag([1, 1, 1, -1]).astype(complex)
CNOT_MAT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
SWAP_MAT = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


# ---------------------------------------------------------------------------
# single-qubit Clifford group
# ---------------------------------------------------------------------------


def _normalize_phase(u: np.ndarray) -> np.ndarray:
    flat = u.reshape(-1)
    k = int(np.argmax(np.abs(flat) > 1e-9))
    return u * (abs(flat[k]) / flat[k])


@functools.lru_cache(maxsize=None)
def _clifford_elements() -> tuple[dict, dict]:
    """BFS over products of H and S; returns key -> matrix and key -> table."""
    matrices: dict[tuple, np.ndarray] = {}
    tables: dict[tuple, ConjugationTable] = {}
    frontier = [I2]
    while frontier:
        nxt = []
        for u in frontier:
            table = conjugation_table(u)
            key = _table_key(table)
            if key in matrices:
                continue
            matrices[key] = _normalize_phase(u)
            tables[key] = table
            nxt.extend([H_MAT @ u, S_MAT @ u])
        frontier = nxt
    return matrices, tables


def _table_key(table: ConjugationTable) -> tuple:
    # images of X (index 2) and Z (index 1) as (sign, letter)
    out = []
    for idx in (2, 1):
        x, z = table.out_bits[idx]
        out.append(("-" if table.neg[idx] else "+") + LETTERS[int(x) + 2 * int(z)])
    return tuple(out)


@dataclass(frozen=True)
class SingleQubitClifford:
    """Element of the 24-element single-qubit Clifford group (modulo phase).

    Identified by the signed images of X and Z, e.g. ``("+Z", "+X")`` for H.
    """

    image_of_x: str
    image_of_z: str

    def __post_init__(self):
        if (self.image_of_x, self.image_of_z) not in _clifford_elements()[0]:
            raise ValidationError(f"not a Clifford: X->{self.image_of_x}, Z->{self.image_of_z}")

    @classmethod
    def from_matrix(cls, u: np.ndarray) -> "SingleQubitClifford":
        return cls(*_table_key(conjugation_table(u)))

    @classmethod
    def from_text(cls, text: str) -> "SingleQubitClifford":
        ix, iz = (part.strip() for part in text.split(","))
        return cls(ix, iz)

    @classmethod
    def identity(cls) -> "SingleQubitClifford":
        return cls("+X", "+Z")

    @staticmethod
    def all() -> list["SingleQubitClifford"]:
        return [SingleQubitClifford(*key) for key in sorted(_clifford_elements()[0])]

    @property
    def key(self) -> tuple[str, str]:
        return (self.image_of_x, self.image_of_z)

    @property
    def matrix(self) -> np.ndarray:
        return _clifford_elements()[0][self.key]

    @property
    def table(self) -> ConjugationTable:
        return _clifford_elements()[1][self.key]

    def is_identity(self) -> bool:
        return self.key == ("+X", "+Z")

    def then(self, later: "SingleQubitClifford") -> "SingleQubitClifford":
        """The element that applies ``self`` first and ``later`` second."""
        return SingleQubitClifford.from_matrix(later.matrix @ self.matrix)

    def inverse(self) -> "SingleQubitClifford":
        return SingleQubitClifford.from_matrix(self.matrix.conj().T)

    def conjugate_letter(self, letter: str) -> tuple[int, str]:
        """Return (sign, letter) with ``C σ C† = sign * σ'``."""
        p = PauliString.from_letters({0: letter}, 1)
        img = self.table.image(p)
        return img.sign, img.letter(0)

    def __str__(self) -> str:
        return f"{self.image_of_x},{self.image_of_z}"


CLIFFORD_IDENTITY = SingleQubitClifford("+X", "+Z")
CLIFFORD_H = SingleQubitClifford.from_matrix(H_MAT)
CLIFFORD_S = SingleQubitClifford.from_matrix(S_MAT)
CLIFFORD_SQRT_X = SingleQubitClifford.from_matrix(rot_x(np.pi / 2))
CLIFFORD_SQRT_Z_DAG = SingleQubitClifford.from_matrix(rot_z(-np.pi / 2))


def conjugate_pauli(table: ConjugationTable, qubits: Sequence[int], p: PauliString) -> PauliString:
    """Return ``U P U†`` where ``U`` acts on ``qubits`` with the given table."""
    qubits = list(qubits)
    if len(qubits) != table.k:
        raise DimensionError("operand count does not match gate arity")
    if any(not 0 <= q < p.n for q in qubits):
        raise DimensionError("gate operand outside the Pauli register")
    local = p.restrict(qubits).with_phase(0)
    img = table.image(local)
    x = p.x.copy()
    z = p.z.copy()
    x[qubits] = img.x
    z[qubits] = img.z
    return PauliString(x, z, p.phase + img.phase)


def apply_table_rows(table: ConjugationTable, qubits: Sequence[int], x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Conjugate a batch of Hermitian rows in place; returns the sign-flip mask.

    ``x`` and ``z`` are boolean arrays of shape (rows, n).
    """
    idx = np.zeros(x.shape[0], dtype=np.intp)
    for q in qubits:
        idx = idx * 4 + 2 * x[:, q].astype(np.intp) + z[:, q].astype(np.intp)
    out = table.out_bits[idx]
    for j, q in enumerate(qubits):
        x[:, q] = out[:, 2 * j]
        z[:, q] = out[:, 2 * j + 1]
    return table.neg[idx]


def paulis_from_rows(x: np.ndarray, z: np.ndarray, neg: np.ndarray) -> list[PauliString]:
    return [PauliString(x[i], z[i], 2 if neg[i] else 0) for i in range(x.shape[0])]


def iter_hermitian_paulis(n: int) -> Iterable[PauliString]:
    for bits in local_index_bits(n):
        yield _bits_pauli(bits)
