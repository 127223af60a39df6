"""Cell scheduling policies: threshold-driven MSF and prediction-driven EMSF.

Both policies answer the same question once per slotframe: should the node
add cells toward its parent, delete some, or keep the current allocation.

MSF watches the fraction of its recent Tx cell opportunities that actually
carried traffic and nudges the allocation by one cell when the usage leaves
a configured band.

EMSF fits a Poisson rate to the node's recent per-slotframe packet counts,
takes the distribution mode as the expected demand for the next slotframe,
and jumps straight to that allocation. During the first `beta` slotframes
(while the history window fills) it behaves like MSF.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from tschsim.traffic import TrafficHistory


class Action(Enum):
    ADD = "add"
    DELETE = "delete"
    KEEP = "keep"


@dataclass(frozen=True)
class SchedulingDecision:
    action: Action
    count: int = 0

    def __post_init__(self) -> None:
        if self.action is Action.KEEP:
            if self.count != 0:
                raise ValueError("keep carries no cell count")
        elif self.count < 1:
            raise ValueError("add/delete need a positive cell count")


KEEP = SchedulingDecision(Action.KEEP)


@dataclass
class CellUsageStats:
    """Usage counters over a window of elapsed scheduled Tx cells."""

    window_len: int = 16
    used: int = 0
    elapsed: int = 0

    def __post_init__(self) -> None:
        if self.window_len <= 0:
            raise ValueError("window length must be positive")

    def tick(self, carried_packet: bool) -> None:
        if self.elapsed >= self.window_len:
            return
        self.elapsed += 1
        if carried_packet:
            self.used += 1

    def full(self) -> bool:
        return self.elapsed >= self.window_len

    def reset(self) -> None:
        self.used = 0
        self.elapsed = 0


@dataclass(frozen=True)
class MsfConfig:
    window_len: int = 16
    high_threshold: float = 0.75
    low_threshold: float = 0.25
    min_cells: int = 1


@dataclass(frozen=True)
class PredictionState:
    """Inputs of one EMSF decision."""

    lam: float
    predicted: int
    allocated_cells: int
    queue_len: int = 0


def compute_lambda(history: TrafficHistory) -> float:
    """Mean packets per slotframe over the history window.

    While the window is still filling the mean is taken over whatever
    entries exist.
    """
    return history.mean()


def poisson_pmf(n: int, lam_t: float) -> float:
    """P{N(t) = n} for a Poisson process with expectation lam_t.

    Evaluated in log space so large n never overflows the factorial. The
    degenerate case lam_t == 0 puts all mass at n == 0.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if lam_t < 0:
        raise ValueError("expectation must be non-negative")
    if lam_t == 0:
        return 1.0 if n == 0 else 0.0
    return math.exp(n * math.log(lam_t) - math.lgamma(n + 1) - lam_t)


def predict_packet_count(lam: float) -> int:
    """Mode of the Poisson pmf with mean `lam`, the predicted demand.

    Scans n = 0, 1, 2, ... while the pmf is non-decreasing and stops at the
    first decrease; since the pmf is unimodal that is the global mode.
    pmf(n+1)/pmf(n) == lam/(n+1), so the scan reduces to comparing lam with
    n+1, which keeps integer-lam ties exact: they resolve upward to lam
    itself, over-provisioning rather than under-provisioning.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    n = 0
    while lam >= n + 1:
        n += 1
    return n


def emsf_decide(state: PredictionState) -> SchedulingDecision:
    """Move the allocation to exactly the predicted demand."""
    diff = state.predicted - state.allocated_cells
    if diff > 0:
        return SchedulingDecision(Action.ADD, diff)
    if diff < 0:
        return SchedulingDecision(Action.DELETE, -diff)
    return KEEP


def msf_decide(
    stats: CellUsageStats,
    allocated_cells: int,
    cfg: MsfConfig = MsfConfig(),
) -> SchedulingDecision:
    """Threshold rule over the usage window.

    No decision before the window is full. The caller resets the window
    after acting on a non-keep decision.
    """
    if not stats.full():
        return KEEP
    usage = stats.used / stats.elapsed
    if usage > cfg.high_threshold:
        return SchedulingDecision(Action.ADD, 1)
    if usage < cfg.low_threshold and allocated_cells > cfg.min_cells:
        return SchedulingDecision(Action.DELETE, 1)
    return KEEP


class MsfScheduler:
    """Per-node MSF state machine, invoked once per slotframe boundary.

    Bootstraps an unprovisioned node with a single cell; afterwards follows
    the usage-threshold rule. The usage window resets whenever a decision
    other than keep is taken.
    """

    name = "msf"

    def __init__(self, cfg: MsfConfig = MsfConfig()):
        self.cfg = cfg
        self.stats = CellUsageStats(window_len=cfg.window_len)

    def on_cell_elapsed(self, carried_packet: bool) -> None:
        self.stats.tick(carried_packet)

    def decide(self, local_frame: int, allocated: int,
               history: TrafficHistory, queue_len: int) -> SchedulingDecision:
        if allocated == 0:
            return SchedulingDecision(Action.ADD, 1)
        decision = msf_decide(self.stats, allocated, self.cfg)
        if decision.action is not Action.KEEP:
            self.stats.reset()
        return decision


class EmsfScheduler:
    """Per-node EMSF state machine.

    Delegates to MSF while fewer than `beta` slotframes of history exist,
    then switches to Poisson-mode prediction. A request goes out only after
    the predicted demand has held the same value for `stability_frames`
    consecutive slotframes, so a rate estimate wandering across an integer
    boundary does not ping-pong one-cell transactions.
    """

    name = "emsf"

    def __init__(self, cfg: MsfConfig = MsfConfig(), beta: int = 10,
                 stability_frames: int = 3):
        if beta <= 0:
            raise ValueError("beta must be positive")
        if stability_frames < 1:
            raise ValueError("stability window must be positive")
        self.beta = beta
        self.stability_frames = stability_frames
        self.warmup = MsfScheduler(cfg)
        self.last_state: PredictionState | None = None
        self._last_predicted: int | None = None
        self._stable_for = 0

    def on_cell_elapsed(self, carried_packet: bool) -> None:
        self.warmup.on_cell_elapsed(carried_packet)

    def _track_prediction(self, history: TrafficHistory) -> int:
        predicted = predict_packet_count(compute_lambda(history))
        if predicted == self._last_predicted:
            self._stable_for += 1
        else:
            self._last_predicted = predicted
            self._stable_for = 1
        return predicted

    def decide(self, local_frame: int, allocated: int,
               history: TrafficHistory, queue_len: int) -> SchedulingDecision:
        if len(history) == 0:
            return self.warmup.decide(
                local_frame, allocated, history, queue_len
            )
        predicted = self._track_prediction(history)
        if local_frame < self.beta:
            return self.warmup.decide(
                local_frame, allocated, history, queue_len
            )
        state = PredictionState(
            lam=compute_lambda(history),
            predicted=predicted,
            allocated_cells=allocated,
            queue_len=queue_len,
        )
        self.last_state = state
        if self._stable_for < self.stability_frames:
            return KEEP
        return emsf_decide(state)


def make_scheduler(name: str, cfg: MsfConfig, beta: int,
                   stability_frames: int = 3):
    if name == "msf":
        return MsfScheduler(cfg)
    if name == "emsf":
        return EmsfScheduler(cfg, beta, stability_frames)
    raise ValueError(f"unknown scheduling function {name!r}")
