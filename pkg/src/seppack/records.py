"""Inequality records shared by the quermass checks and the harness."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

EXACT = "exact"
CERTIFIED = "one-sided-certified"
HEURISTIC = "heuristic"

PASS = "pass"
FAIL = "fail"
NOT_APPLICABLE = "not-applicable"
INFORMATIONAL = "informational"

LE = "<="
GE = ">="


def _plain(value):
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in sorted(value.items())}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def digest(inputs: dict) -> str:
    blob = json.dumps(_plain(inputs), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class InequalityRecord:
    name: str
    lhs: float
    rhs: float
    direction: str
    margin: float
    semantics: str
    verdict: str
    inputs_digest: str = ""
    tolerance: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> dict:
        return _plain(asdict(self))


def compare(
    name: str,
    lhs: float,
    rhs: float,
    direction: str,
    semantics: str,
    inputs: dict | None = None,
    rtol: float = 1e-9,
    atol: float | None = None,
    details: dict | None = None,
    applicable: bool = True,
) -> InequalityRecord:
    """Build a record for ``lhs <direction> rhs``.

    The margin is signed so that a nonnegative value means the inequality
    holds; the pass threshold is ``-tolerance`` with tolerance
    ``rtol * max(1, |lhs|, |rhs|)`` unless ``atol`` is given.
    """
    lhs, rhs = float(lhs), float(rhs)
    margin = rhs - lhs if direction == LE else lhs - rhs
    tol = atol if atol is not None else rtol * max(1.0, abs(lhs), abs(rhs))
    if not applicable:
        verdict = NOT_APPLICABLE
    elif semantics == INFORMATIONAL:
        verdict = INFORMATIONAL
    else:
        verdict = PASS if margin >= -tol else FAIL
    return InequalityRecord(
        name=name,
        lhs=lhs,
        rhs=rhs,
        direction=direction,
        margin=margin,
        semantics=semantics,
        verdict=verdict,
        inputs_digest=digest(inputs or {}),
        tolerance=tol,
        details=dict(details or {}),
    )


def format_table(records) -> str:
    rows = [("name", "lhs", "dir", "rhs", "margin", "semantics", "verdict")]
    for r in records:
        rows.append(
            (r.name, f"{r.lhs:.6g}", r.direction, f"{r.rhs:.6g}", f"{r.margin:.3g}", r.semantics, r.verdict)
        )
    widths = [max(len(row[k]) for row in rows) for k in range(len(rows[0]))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows)
