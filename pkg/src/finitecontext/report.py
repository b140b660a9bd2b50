"""Check reports and their JSON form."""
import json
from dataclasses import dataclass, field

import numpy as np

SCHEMA_VERSION = 1

_REAL = {"anyOf": [{"type": ["number", "null"]}, {"enum": ["inf", "-inf", "nan"]}]}

CHECK_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "check report",
    "type": "object",
    "required": ["check", "parameters", "max_residual", "tolerance", "pass", "samples"],
    "properties": {
        "check": {"type": "string"},
        "parameters": {"type": "object"},
        "max_residual": _REAL,
        "tolerance": _REAL,
        "pass": {"type": "boolean"},
        "samples": {"type": "integer", "minimum": 0},
        "details": {"type": "object"},
        "metadata": {"type": "object"},
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "run report",
    "type": "object",
    "required": ["schema_version", "command", "config", "checks", "pass", "timings", "digest"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "command": {"type": "string"},
        "config": {"type": "object", "required": ["seed", "workers"]},
        "checks": {"type": "array", "items": CHECK_SCHEMA},
        "results": {"type": "object"},
        "pass": {"type": "boolean"},
        "timings": {"type": "object"},
        "digest": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
    },
}


def jsonable(obj):
    """Convert numpy scalars/arrays and complex numbers into JSON-compatible values.

    Complex arrays become ``{"re": [...], "im": [...]}``; non-finite floats
    become strings so the output stays strict JSON.
    """
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"re": jsonable(obj.real.tolist()), "im": jsonable(obj.imag.tolist())}
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": jsonable(obj.real), "im": jsonable(obj.imag)}
    return obj


@dataclass
class CheckReport:
    """Outcome of one verification check.

    ``max_residual`` is compared against ``tolerance``; ``details`` holds
    check-specific quantities and ``metadata`` free-form notes.
    """

    check: str
    parameters: dict
    max_residual: float
    tolerance: float
    passed: bool
    samples: int
    details: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        return jsonable({
            "check": self.check,
            "parameters": self.parameters,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "pass": bool(self.passed),
            "samples": int(self.samples),
            "details": self.details,
            "metadata": self.metadata,
        })

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)
