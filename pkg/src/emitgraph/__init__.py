"""Compile photonic graph states into emitter schedules and certify them."""

from .errors import (
    CapacityError,
    DimensionError,
    EmitGraphError,
    LayoutError,
    ResourceError,
    RoleError,
    UnsupportedGateError,
    ValidationError,
)
from .graph import AdjacencyPartition, Graph, local_complement, partition_adjacency, preparation_circuit, stabilizer_generators
from .pauli import PauliString, SingleQubitClifford, conjugate_pauli, pauli_product
from .schedule import GateStep, Schedule
from .tableau import Tableau

__version__ = "0.1.0"
