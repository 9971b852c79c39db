"""
Timelines and Verdicts
Line-oriented record of a run: phase markers, applied transforms, invariant snapshots and
monotone certificates, closed by a verdict.
"""

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

sys.path.append(str(Path(__file__).parent.parent))

from config.constants import TRACE_KEYWORDS
from core.values import Value, format_vector


def format_token(value: Any) -> str:
    if value is None:
        return "inf"
    if isinstance(value, Value):
        return format_vector(value)
    return str(value)


class Timeline:
    """Accumulates trace lines while engines transform a model."""

    def __init__(self, include_snapshots: bool = True):
        self.include_snapshots = include_snapshots
        self.lines: List[str] = []
        self._seen = 0
        self.certificates = 0

    def _emit(self, keyword: str, payload: str):
        self.lines.append(f"{TRACE_KEYWORDS[keyword]}: {payload}")

    def phase(self, name: str, **info):
        extra = " ".join(f"{k}={format_token(v)}" for k, v in info.items())
        self._emit("phase", f"{name} {extra}".rstrip())

    def follow(self, model):
        """Log every record of model.history not seen yet."""
        history = model.history
        if len(history) < self._seen:
            self._seen = 0
        for record in history[self._seen:]:
            line = record.to_line()
            if not self.include_snapshots:
                line = line.split(" | inv: ")[0]
            self._emit("record", line)
        self._seen = len(history)

    def invariants(self, label: str, **values):
        body = " ".join(f"{k}={format_token(v)}" for k, v in values.items())
        self._emit("snapshot", f"{label} {body}")

    def certify(self, kind: str, subject: str, before: Any, after: Any):
        """Strict increase (or decrease, by kind) checked again on replay."""
        self.certificates += 1
        self._emit("certificate", f"{kind} {subject} {format_token(before)} {format_token(after)}")

    def conclude(self, verdict: "Verdict"):
        self._emit("verdict", verdict.summary())

    def note(self, text: str):
        self.lines.append(f"# {text}")

    def extend(self, other: "Timeline"):
        self.lines.extend(other.lines)
        self.certificates += other.certificates


@dataclass
class Verdict:
    """Outcome of a driver: the verdict kind plus the objects that justify it."""

    kind: str
    model: Any = None
    foliation: Any = None
    series: Optional[str] = None
    details: Dict[str, Any] = field(default_factory=dict)
    timeline: Optional[Timeline] = None

    def summary(self) -> str:
        parts = [self.kind]
        if self.series is not None:
            parts.append(f"series={self.series}")
        for key, value in self.details.items():
            parts.append(f"{key}={format_token(value)}")
        return " ".join(parts)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "series": self.series,
            "details": {k: format_token(v) for k, v in self.details.items()},
            "steps": len(self.model.history) if self.model is not None else 0,
        }
