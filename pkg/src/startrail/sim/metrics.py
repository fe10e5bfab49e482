"""Per-run measurements, nearest-rank percentiles and CSV export."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence


def percentile(samples: Sequence[float], p: float) -> float:
    """Nearest-rank percentile: the ``ceil(p * n)``-th smallest sample."""
    if not samples:
        raise ValueError("percentile of an empty sample")
    if not 0 < p <= 1:
        raise ValueError("p must be in (0, 1]")
    ordered = sorted(samples)
    rank = math.ceil(round(p * len(ordered), 9))
    return ordered[max(rank, 1) - 1]


@dataclass(frozen=True)
class RequestRecord:
    node: int
    label: str
    start: float
    end: float
    success: bool
    local: bool = False

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class NodeSample:
    node: int
    time: float
    used_bytes: int
    bytes_sent: int
    pinned_count: int


@dataclass
class RunMetrics:
    scenario: object = None
    requests: list[RequestRecord] = field(default_factory=list)
    node_samples: list[NodeSample] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    bytes_sent_by_node: dict[int, int] = field(default_factory=dict)
    bytes_received_total: int = 0
    warmup_bytes_sent: int = 0
    budget_bytes_total: int = 0

    @property
    def completed(self) -> list[RequestRecord]:
        return [r for r in self.requests if r.success]

    @property
    def censored(self) -> list[RequestRecord]:
        return [r for r in self.requests if not r.success]

    @property
    def total_bytes_sent(self) -> int:
        return sum(self.bytes_sent_by_node.values())

    def used_bytes_series(self) -> list[tuple[float, int]]:
        totals: dict[float, int] = {}
        for s in self.node_samples:
            totals[s.time] = totals.get(s.time, 0) + s.used_bytes
        return sorted(totals.items())

    def aggregates(self) -> dict[str, float | int | None]:
        durations = [r.duration for r in self.completed]
        used = [v for _, v in self.used_bytes_series()]
        sent = list(self.bytes_sent_by_node.values())
        return {
            "requests": len(self.requests),
            "completed_requests": len(durations),
            "censored_requests": len(self.requests) - len(durations),
            "local_hits": sum(1 for r in self.requests if r.local),
            "p95_request_duration": percentile(durations, 0.95) if durations else None,
            "mean_request_duration": sum(durations) / len(durations) if durations else None,
            "p95_used_bytes": percentile(used, 0.95) if used else None,
            "p95_bytes_sent": percentile(sent, 0.95) if sent else None,
            "total_bytes_sent": self.total_bytes_sent,
            "warmup_bytes_sent": self.warmup_bytes_sent,
            "cached_events": sum(1 for e in self.events if e["event"] == "cached"),
        }

    # -- CSV ---------------------------------------------------------------

    def write_csvs(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "requests": out / "requests.csv",
            "nodes": out / "nodes.csv",
            "summary": out / "summary.csv",
        }
        with open(paths["requests"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node", "cid", "start_ms", "end_ms", "success"])
            for r in self.requests:
                w.writerow([r.node, r.label, _ms(r.start), _ms(r.end), int(r.success)])
        with open(paths["nodes"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node", "time_ms", "used_bytes", "bytes_sent", "pinned_count"])
            for s in self.node_samples:
                w.writerow([s.node, _ms(s.time), s.used_bytes, s.bytes_sent, s.pinned_count])
        with open(paths["summary"], "w", newline="") as fh:
            row = self.summary_row()
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(row))
            w.writerow([_fmt(v) for v in row.values()])
        return paths

    def summary_row(self) -> dict[str, object]:
        row: dict[str, object] = {}
        if self.scenario is not None:
            row.update(self.scenario.flat())
        row.update(self.aggregates())
        return row


def _ms(seconds: float) -> str:
    return f"{seconds * 1000:.3f}"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_summary(path: str | Path) -> dict[str, str]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path} has no summary row")
    return rows[0]
