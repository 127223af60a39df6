"""Run metrics: 6P error ratio, control overhead, end-to-end latency and
queue occupancy, derived from the engine's append-only event log.

Latency covers only packets that reached the root; drop counts are reported
alongside so the exclusion stays visible. Queue depths are sampled at each
slotframe boundary before new traffic is enqueued.
"""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass, field
from typing import Optional


@dataclass(slots=True)
class SixPRecord:
    asn: int
    initiator: int
    responder: int
    kind: str
    num_cells: int
    status: str
    overhead_bytes: int


@dataclass(slots=True)
class DeliveryRecord:
    src: int
    birth_asn: int
    delivery_asn: int


@dataclass(slots=True)
class DropRecord:
    src: int
    birth_asn: int
    asn: int
    reason: str


@dataclass(slots=True)
class FrameStats:
    """Snapshot taken at a slotframe boundary plus what the frame produced.

    The queue/counter fields describe the instant before the frame's
    traffic was generated, so generated == delivered + dropped + queued
    holds row by row. Latency and overhead fields accumulate during the
    frame that follows the snapshot.
    """

    frame: int
    queue_avg: float
    queue_max: int
    generated_cum: int
    delivered_cum: int
    dropped_cum: int
    queued: int
    overhead_bytes: int = 0
    sixp_completed: int = 0
    deliveries: int = 0
    latency_sum_ms: float = 0.0
    latency_max_ms: float = 0.0

    @property
    def latency_mean_ms(self) -> Optional[float]:
        if self.deliveries == 0:
            return None
        return self.latency_sum_ms / self.deliveries


@dataclass
class MetricsLog:
    """Complete, deterministic record of one simulation run."""

    node_count: int
    scheduling_function: str
    seed: int
    slotframe_size: int
    slot_duration_ms: float
    slotframe_count: int
    frames: list[FrameStats] = field(default_factory=list)
    sixp: list[SixPRecord] = field(default_factory=list)
    delivered: list[DeliveryRecord] = field(default_factory=list)
    drops: list[DropRecord] = field(default_factory=list)
    generated_total: int = 0
    delivered_total: int = 0
    dropped_retry_total: int = 0
    dropped_overflow_total: int = 0
    queued_final: int = 0
    queue_max_by_node: dict[int, int] = field(default_factory=dict)

    @property
    def dropped_total(self) -> int:
        return self.dropped_retry_total + self.dropped_overflow_total


def sixp_error_ratio(log: MetricsLog) -> Optional[float]:
    """Negotiation errors over all completed 6P transactions.

    None when no transaction was recorded (absent, not zero).
    """
    total = len(log.sixp)
    if total == 0:
        return None
    errors = sum(1 for r in log.sixp if r.status == "negotiation_error")
    return errors / total


def overhead_bytes(log: MetricsLog) -> tuple[int, list[int]]:
    """Total 6P bytes and the per-slotframe series."""
    per_frame = [f.overhead_bytes for f in log.frames]
    return sum(r.overhead_bytes for r in log.sixp), per_frame


def latency_stats(log: MetricsLog) -> Optional[dict[str, float]]:
    """Mean/median/p95/max end-to-end latency in milliseconds over all
    delivered packets; None when nothing was delivered."""
    if not log.delivered:
        return None
    ms = sorted(
        (d.delivery_asn - d.birth_asn) * log.slot_duration_ms
        for d in log.delivered
    )
    p95_index = max(0, -(-len(ms) * 95 // 100) - 1)  # ceil(0.95 n) - 1
    return {
        "mean": sum(ms) / len(ms),
        "median": statistics.median(ms),
        "p95": ms[p95_index],
        "max": ms[-1],
    }


def queue_stats(
    log: MetricsLog,
) -> tuple[list[tuple[int, float, int]], dict[int, int]]:
    """Per-frame (frame, network average, max) plus per-node run maxima."""
    series = [(f.frame, f.queue_avg, f.queue_max) for f in log.frames]
    return series, dict(log.queue_max_by_node)


def conservation_holds(log: MetricsLog) -> bool:
    """generated == delivered + dropped + queued at every sampled boundary
    and at the end of the run."""
    for f in log.frames:
        if f.generated_cum != f.delivered_cum + f.dropped_cum + f.queued:
            return False
    return log.generated_total == (
        log.delivered_total + log.dropped_total + log.queued_final
    )


# ----------------------------------------------------------------------
# CSV emission


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_sixp_csv(log: MetricsLog, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["asn", "initiator", "responder", "kind", "numCells",
             "status", "overheadBytes"]
        )
        for r in log.sixp:
            writer.writerow(
                [r.asn, r.initiator, r.responder, r.kind, r.num_cells,
                 r.status, r.overhead_bytes]
            )


def write_latency_csv(log: MetricsLog, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frameIndex", "meanMs", "maxMs", "deliveries"])
        for f in log.frames:
            mean = f.latency_mean_ms
            writer.writerow(
                [f.frame, _fmt(mean),
                 _fmt(f.latency_max_ms if f.deliveries else None),
                 f.deliveries]
            )


def write_queue_csv(log: MetricsLog, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frameIndex", "avgDepth", "maxDepth"])
        for f in log.frames:
            writer.writerow([f.frame, _fmt(f.queue_avg), f.queue_max])


def write_overhead_csv(log: MetricsLog, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frameIndex", "overheadBytes", "sixpCompleted"])
        for f in log.frames:
            writer.writerow([f.frame, f.overhead_bytes, f.sixp_completed])
