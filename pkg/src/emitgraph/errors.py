"""Exception hierarchy shared by every module.

Each class carries a short machine-readable ``code`` so the command line
front end can turn it into a structured error record.
"""

from __future__ import annotations


class EmitGraphError(Exception):
    code = "error"

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self)}


class DimensionError(EmitGraphError, ValueError):
    code = "dimension"


class UnsupportedGateError(EmitGraphError, ValueError):
    code = "unsupported_gate"


class ValidationError(EmitGraphError, ValueError):
    code = "validation"


class LayoutError(EmitGraphError, ValueError):
    code = "layout"


class CapacityError(EmitGraphError, ValueError):
    code = "capacity"


class RoleError(EmitGraphError, ValueError):
    code = "role"


class ResourceError(EmitGraphError, RuntimeError):
    code = "resource"
