"""Report containers shared by the checkers, and their JSON/CSV serialization."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

import numpy as np

from . import __version__


class Verdict(str, Enum):
    CONSISTENT = "ConsistentOnGrid"
    VIOLATED = "ViolatedAt"
    INCONCLUSIVE = "Inconclusive"


def jsonable(x: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values.

    Non-finite numbers become the strings ``"inf"``, ``"-inf"`` and ``"nan"``
    so that the document stays strict JSON.
    """
    if isinstance(x, Enum):
        return x.value
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def from_jsonable(x: Any) -> Any:
    if isinstance(x, str) and x in ("inf", "-inf", "nan"):
        return float(x)
    return x


@dataclass
class ConditionRecord:
    """Outcome of one inequality over a grid.

    ``min_margin`` is the smallest (possibly normalized) margin, ``argmin`` the
    grid point where it occurs and ``equality_points`` the points where
    ``|margin| <= eq_tol``.
    """

    id: str
    min_margin: float
    argmin: Any
    equality_points: list = field(default_factory=list)
    satisfied: bool = True
    required: bool = True
    note: str = ""

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "min_margin": jsonable(self.min_margin),
            "argmin": jsonable(self.argmin),
            "equality_points": jsonable(self.equality_points),
        }
        if not self.required:
            out["required"] = False
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class ConvexityReport:
    """Per-condition results and an overall verdict for one energy."""

    verdict: Verdict
    conditions: list[ConditionRecord]
    energy: dict = field(default_factory=dict)
    check: str = ""
    witness: Optional[dict] = None
    grid: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    domain_errors: list = field(default_factory=list)
    # raw arrays for programmatic inspection; not serialized
    margins: dict = field(default_factory=dict, repr=False)
    points: dict = field(default_factory=dict, repr=False)
    extra: dict = field(default_factory=dict)

    def condition(self, cid: str) -> ConditionRecord:
        for c in self.conditions:
            if c.id == cid:
                return c
        raise KeyError(cid)

    @property
    def consistent(self) -> bool:
        return self.verdict == Verdict.CONSISTENT

    def to_dict(self, command: str = "") -> dict:
        doc = {
            "tool_version": __version__,
            "command": command or self.check,
            "energy": jsonable(self.energy),
            "verdict": self.verdict.value,
            "conditions": [c.to_dict() for c in self.conditions],
            "witnesses": [jsonable(self.witness)] if self.witness else [],
        }
        if self.grid:
            doc["grid"] = jsonable(self.grid)
        if self.notes:
            doc["notes"] = list(self.notes)
        if self.domain_errors:
            doc["domain_errors"] = jsonable(self.domain_errors)
        if self.extra:
            doc["extra"] = jsonable(self.extra)
        return doc

    def to_json(self, command: str = "") -> str:
        return dumps(self.to_dict(command))


def dumps(doc: dict) -> str:
    return json.dumps(jsonable(doc), indent=2, allow_nan=False) + "\n"


def _cell(v) -> str:
    v = jsonable(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return "|".join(_cell(a) for a in v)
    if v is None:
        return ""
    return str(v)


def to_csv(doc: dict) -> str:
    """CSV rendering of a report document.

    Scalar metadata goes in ``#`` comment lines; each condition is one row.
    Floats are written with ``repr`` so that values round-trip exactly.
    """
    buf = io.StringIO()
    for key in ("tool_version", "command", "verdict"):
        buf.write(f"# {key}={_cell(doc.get(key))}\n")
    for key, val in (doc.get("energy") or {}).items():
        buf.write(f"# energy.{key}={_cell(val)}\n")
    for key, val in (doc.get("extra") or {}).items():
        if not isinstance(val, (dict, list)):
            buf.write(f"# extra.{key}={_cell(val)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "min_margin", "argmin", "equality_points"])
    for c in doc.get("conditions", []):
        w.writerow([c["id"], _cell(c["min_margin"]), _cell(c["argmin"]),
                    ";".join(_cell(p) for p in c.get("equality_points", []))])
    return buf.getvalue()


def parse_csv_conditions(text: str) -> list[dict]:
    """Read back the condition rows written by :func:`to_csv`."""

    def num(s):
        if s == "":
            return None
        if "|" in s:
            return [num(a) for a in s.split("|")]
        try:
            return float(s)
        except ValueError:
            return s

    rows = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.DictReader(rows)
    out = []
    for r in reader:
        eq = [num(p) for p in r["equality_points"].split(";")] if r["equality_points"] else []
        out.append({"id": r["id"], "min_margin": num(r["min_margin"]), "argmin": num(r["argmin"]),
                    "equality_points": eq})
    return out
