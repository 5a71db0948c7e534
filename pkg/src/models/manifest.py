"""Run manifest: per-stage status, timing and artifact checksums."""

import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

from .jsonio import file_sha256, read_json, write_json

MANIFEST_NAME = "manifest.json"


class StageStatus(Enum):
    PENDING = "pending"
    DONE = "done"
    FAILED = "failed"


@dataclass
class StageRecord:
    stage: str
    status: StageStatus = StageStatus.PENDING
    seconds: float = 0.0
    # Relative path (to the run directory) -> sha256
    artifacts: Dict[str, str] = field(default_factory=dict)
    # Fingerprint of the inputs the stage ran with (config slice + predecessor checksums)
    input_digest: str = ""
    error: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "stage": self.stage,
            "status": self.status.value,
            "seconds": round(self.seconds, 3),
            "artifacts": dict(sorted(self.artifacts.items())),
            "input_digest": self.input_digest,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "StageRecord":
        return cls(
            stage=data["stage"],
            status=StageStatus(data.get("status", "pending")),
            seconds=data.get("seconds", 0.0),
            artifacts=data.get("artifacts", {}),
            input_digest=data.get("input_digest", ""),
            error=data.get("error", ""),
        )

    def checksums_match(self, run_dir: str) -> bool:
        """True when every recorded artifact exists with the recorded checksum."""
        for rel, digest in self.artifacts.items():
            path = os.path.join(run_dir, rel)
            if not os.path.isfile(path) or file_sha256(path) != digest:
                return False
        return True


@dataclass
class RunManifest:
    run_id: str
    stages: List[StageRecord] = field(default_factory=list)

    def record(self, stage: str) -> StageRecord:
        for rec in self.stages:
            if rec.stage == stage:
                return rec
        rec = StageRecord(stage=stage)
        self.stages.append(rec)
        return rec

    def get(self, stage: str) -> Optional[StageRecord]:
        for rec in self.stages:
            if rec.stage == stage:
                return rec
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {"run_id": self.run_id, "stages": [s.to_dict() for s in self.stages]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunManifest":
        return cls(
            run_id=data.get("run_id", ""),
            stages=[StageRecord.from_dict(s) for s in data.get("stages", [])],
        )

    def save(self, run_dir: str) -> str:
        return write_json(os.path.join(run_dir, MANIFEST_NAME), self.to_dict())

    @classmethod
    def load(cls, run_dir: str) -> Optional["RunManifest"]:
        path = os.path.join(run_dir, MANIFEST_NAME)
        if not os.path.isfile(path):
            return None
        return cls.from_dict(read_json(path))
