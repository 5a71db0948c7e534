"""Metric inputs and results."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional


@dataclass
class LineSequence:
    """Normalized line units: API calls for scripts, CLI commands for configs."""

    lines: List[str] = field(default_factory=list)

    def __post_init__(self):
        for line in self.lines:
            if not line or not line.strip():
                raise ValueError("LineSequence units must not be blank")

    def __len__(self) -> int:
        return len(self.lines)


@dataclass
class MetricReport:
    validation_rate: Optional[float] = None
    recall: Optional[float] = None
    similarity: Optional[float] = None
    n_validated: int = 0
    n_total: int = 0
    matched_lines: int = 0
    answer_lines: int = 0
    edit_distance: int = 0
    len_ans: int = 0
    len_out: int = 0
    label: str = ""
    flags: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "validation_rate": self.validation_rate,
            "recall": self.recall,
            "similarity": self.similarity,
            "counts": {
                "n_validated": self.n_validated,
                "n_total": self.n_total,
                "matched_lines": self.matched_lines,
                "answer_lines": self.answer_lines,
                "edit_distance": self.edit_distance,
                "len_ans": self.len_ans,
                "len_out": self.len_out,
            },
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MetricReport":
        counts = data.get("counts", {})
        return cls(
            label=data.get("label", ""),
            validation_rate=data.get("validation_rate"),
            recall=data.get("recall"),
            similarity=data.get("similarity"),
            flags=data.get("flags", []),
            **{k: counts.get(k, 0) for k in (
                "n_validated", "n_total", "matched_lines", "answer_lines",
                "edit_distance", "len_ans", "len_out",
            )},
        )
