"""Expert feedback records and the append-only label log.

Every label submission is appended, never rewritten; the effective label of an
instance is the newest entry (experts change their minds), and replaying the
log from disk reconstructs the effective state exactly.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence


@dataclass(frozen=True)
class FeedbackRecord:
    instance_id: str
    label: int                 # 0 benign, 1 anomaly
    source: str = "human"      # human | oracle
    ts: float = 0.0
    session_id: str = ""

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if self.source not in ("human", "oracle"):
            raise ValueError(f"unknown source: {self.source}")


class FeedbackLog:
    """Append-only JSONL label log with last-write-wins effective labels."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._records: list[FeedbackRecord] = []
        if self.path.exists():
            for line in self.path.read_text().splitlines():
                if line.strip():
                    self._records.append(FeedbackRecord(**json.loads(line)))

    def append(self, record: FeedbackRecord):
        self._records.append(record)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a") as fh:
            fh.write(json.dumps(asdict(record), sort_keys=True) + "\n")

    @property
    def records(self) -> list[FeedbackRecord]:
        return list(self._records)

    def effective_labels(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self._records:  # append order; the newest entry wins
            out[r.instance_id] = r.label
        return out

    def __len__(self):
        return len(self._records)


def oracle_label(hil_ids: Sequence[str], ground_truth: Mapping[str, int],
                 session_id: str = "oracle") -> list[FeedbackRecord]:
    """Simulate the expert from known ground truth, one record per id."""
    missing = [i for i in hil_ids if i not in ground_truth]
    if missing:
        raise KeyError(f"no ground truth for ids: {missing[:5]}")
    now = time.time()
    return [FeedbackRecord(instance_id=i, label=int(ground_truth[i]),
                           source="oracle", ts=now, session_id=session_id)
            for i in hil_ids]
