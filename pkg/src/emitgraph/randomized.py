"""Seeded random schedules for cross-backend and fault-oracle checks."""

from __future__ import annotations

import math

import numpy as np

from .pauli import SingleQubitClifford
from .schedule import GateStep, Schedule

_QUARTERS = [k * math.pi / 2 for k in range(-2, 3)]


def random_clifford_schedule(rng: np.random.Generator, max_qubits: int = 6, length: int = 30) -> Schedule:
    """Random Clifford schedule exercising every step kind.

    Allocation uses ``new_qubit`` and ``pump`` until ``max_qubits`` exist;
    measurement steps may later condition frame fixes.  Pumped photons only
    receive local operations, as in compiled schedules.
    """
    steps: list[GateStep] = []
    roles: list[str] = []
    measured: list[int] = []
    cliffords = SingleQubitClifford.all()

    def alloc(kind: str) -> None:
        q = len(roles)
        if kind == "pump" and any(r != "photon" for r in roles):
            src = int(rng.choice([i for i, r in enumerate(roles) if r != "photon"]))
            steps.append(GateStep.pump(src, q))
            roles.append("photon")
        else:
            steps.append(GateStep.new_qubit(q, str(rng.choice(["0", "+"])), role="ancilla"))
            roles.append("ancilla")

    alloc("new")
    while len(steps) < length:
        n = len(roles)
        movers = [i for i, r in enumerate(roles) if r != "photon"]
        roll = rng.random()
        if n < max_qubits and roll < 0.15:
            alloc("pump" if rng.random() < 0.5 else "new")
            continue
        q = int(rng.integers(n))
        if roll < 0.45 and len(movers) >= 2:
            a, b = (int(v) for v in rng.choice(movers, size=2, replace=False))
            steps.append(GateStep.cz(a, b) if rng.random() < 0.5 else GateStep.cnot(a, b))
        elif roll < 0.6:
            kind = rng.integers(4)
            if kind == 0:
                steps.append(GateStep.hprime(q, *rng.choice(_QUARTERS, size=3)))
            elif kind == 1:
                steps.append(GateStep.rx(q, float(rng.choice(_QUARTERS))))
            elif kind == 2:
                steps.append(GateStep.rz(q, float(rng.choice(_QUARTERS))))
            else:
                steps.append(GateStep.clifford1(q, cliffords[int(rng.integers(24))]))
        elif roll < 0.75:
            steps.append(GateStep.measure(q, "Z" if rng.random() < 0.5 else "Y"))
            measured.append(len(steps) - 1)
        else:
            support = rng.choice(n, size=int(rng.integers(1, min(n, 3) + 1)), replace=False)
            letters = {int(v): str(rng.choice(list("XYZ"))) for v in support}
            cond = ()
            if measured and rng.random() < 0.7:
                cond = tuple(sorted(set(int(c) for c in rng.choice(measured, size=int(rng.integers(1, 3))))))
            steps.append(GateStep.frame_fix(letters, cond))
    return Schedule(steps)
