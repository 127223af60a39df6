"""6P two-step add/delete cell negotiation between a node and its parent.

A transaction carries a candidate CellList and a NumCells count. The
responder filters the candidates against its own schedule; if it cannot
satisfy NumCells the transaction ends in a negotiation error (which is
data, not a fault). Message sizes follow a synthetic, config-overridable
cost model since only relative overhead matters.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from tschsim.core import Cell, LinkOption, Schedule, ScheduleConflictError


class SixPKind(Enum):
    ADD = "add"
    DELETE = "delete"


class SixPStatus(Enum):
    SUCCESS = "success"
    NEGOTIATION_ERROR = "negotiation_error"
    PACKET_LOSS = "packet_loss"


@dataclass(frozen=True)
class SixPCostModel:
    """Byte sizes of 6P messages: base header plus 4 bytes per listed cell."""

    base_bytes: int = 20
    per_cell_bytes: int = 4

    def request_bytes(self, cell_list_len: int) -> int:
        return self.base_bytes + self.per_cell_bytes * cell_list_len

    def response_bytes(self, num_cells: int) -> int:
        return self.base_bytes + self.per_cell_bytes * num_cells


DEFAULT_COST_MODEL = SixPCostModel()
DEFAULT_CANDIDATE_LIST_LEN = 5


class SixPError(Exception):
    """Request cannot even be built (e.g. initiator schedule too full)."""


@dataclass(frozen=True)
class SixPRequest:
    kind: SixPKind
    initiator: int
    responder: int
    num_cells: int
    cell_list: tuple[Cell, ...]
    seq_num: int = 0
    size_bytes: int = 0

    def __post_init__(self) -> None:
        if self.num_cells < 1:
            raise ValueError("num_cells must be >= 1")
        if len(self.cell_list) < self.num_cells:
            raise ValueError("cell list shorter than num_cells")
        offsets = [c.slot_offset for c in self.cell_list]
        if len(set(offsets)) != len(offsets):
            raise ValueError("cell list slot offsets must be distinct")


@dataclass(frozen=True)
class SixPOutcome:
    status: SixPStatus
    chosen: tuple[Cell, ...] = ()
    overhead_bytes: int = 0

    def __post_init__(self) -> None:
        if self.status is SixPStatus.SUCCESS and not self.chosen:
            raise ValueError("successful outcome must carry chosen cells")
        if self.status is not SixPStatus.SUCCESS and self.chosen:
            raise ValueError("failed outcome cannot carry cells")


def build_add_request(
    initiator_schedule: Schedule,
    initiator: int,
    responder: int,
    num_cells: int,
    candidate_list_len: int = DEFAULT_CANDIDATE_LIST_LEN,
    rng: Optional[random.Random] = None,
    seq_num: int = 0,
    cost_model: SixPCostModel = DEFAULT_COST_MODEL,
    n_channel_offsets: int = 16,
) -> SixPRequest:
    """Draw candidate cells uniformly from the initiator's free slot offsets.

    Each candidate gets a random channel offset; the list is at least as
    long as num_cells so the responder has room to choose.
    """
    rng = rng or random.Random()
    list_len = max(candidate_list_len, num_cells)
    free = initiator_schedule.free_slot_offsets()
    if len(free) < list_len:
        raise SixPError(
            f"only {len(free)} free slots, cannot offer {list_len} candidates"
        )
    offsets = sorted(rng.sample(free, list_len))
    cells = tuple(
        Cell(s, rng.randrange(n_channel_offsets), LinkOption.TX, responder)
        for s in offsets
    )
    return SixPRequest(
        kind=SixPKind.ADD,
        initiator=initiator,
        responder=responder,
        num_cells=num_cells,
        cell_list=cells,
        seq_num=seq_num,
        size_bytes=cost_model.request_bytes(list_len),
    )


def build_delete_request(
    initiator_schedule: Schedule,
    initiator: int,
    responder: int,
    num_cells: int,
    seq_num: int = 0,
    cost_model: SixPCostModel = DEFAULT_COST_MODEL,
) -> SixPRequest:
    """List currently allocated cells toward the peer for deletion.

    Deleting requires naming real cells, so the list is drawn from the
    initiator's own Tx cells toward the responder (most recent first).
    """
    owned = initiator_schedule.cells_toward(responder, LinkOption.TX)
    if len(owned) < num_cells:
        raise SixPError(
            f"cannot delete {num_cells} cells, only {len(owned)} allocated"
        )
    victims = tuple(owned[-num_cells:])
    return SixPRequest(
        kind=SixPKind.DELETE,
        initiator=initiator,
        responder=responder,
        num_cells=num_cells,
        cell_list=victims,
        seq_num=seq_num,
        size_bytes=cost_model.request_bytes(len(victims)),
    )


def respond_to_request(
    req: SixPRequest,
    responder_schedule: Schedule,
    cost_model: SixPCostModel = DEFAULT_COST_MODEL,
) -> SixPOutcome:
    """Responder-side decision, a pure function of request and schedule.

    Add: keep candidates whose slot offset is free here; success only if at
    least num_cells survive. Delete: all named cells must exist here as Rx
    cells from the initiator.
    """
    overhead = req.size_bytes + cost_model.response_bytes(req.num_cells)
    if req.kind is SixPKind.ADD:
        survivors = [
            c for c in req.cell_list
            if c.slot_offset not in responder_schedule
        ]
        if len(survivors) >= req.num_cells:
            return SixPOutcome(
                status=SixPStatus.SUCCESS,
                chosen=tuple(survivors[: req.num_cells]),
                overhead_bytes=overhead,
            )
        return SixPOutcome(
            status=SixPStatus.NEGOTIATION_ERROR, overhead_bytes=overhead
        )

    for cell in req.cell_list:
        mirrored = responder_schedule.get(cell.slot_offset)
        if (
            mirrored is None
            or mirrored.option is not LinkOption.RX
            or mirrored.peer != req.initiator
        ):
            return SixPOutcome(
                status=SixPStatus.NEGOTIATION_ERROR, overhead_bytes=overhead
            )
    return SixPOutcome(
        status=SixPStatus.SUCCESS,
        chosen=req.cell_list[: req.num_cells],
        overhead_bytes=overhead,
    )


def apply_outcome(
    initiator_schedule: Schedule,
    responder_schedule: Schedule,
    req: SixPRequest,
    out: SixPOutcome,
) -> None:
    """Commit a successful transaction symmetrically to both schedules.

    Adds install Tx at the initiator mirrored by Rx at the responder at the
    same (slotOffset, channelOffset); deletes remove both sides. A commit
    that would break per-node slot uniqueness aborts before mutating.
    """
    if out.status is not SixPStatus.SUCCESS:
        raise ValueError("only successful outcomes can be applied")
    if req.kind is SixPKind.ADD:
        for cell in out.chosen:
            if cell.slot_offset in initiator_schedule:
                raise ScheduleConflictError(
                    f"initiator slot {cell.slot_offset} already in use"
                )
            if cell.slot_offset in responder_schedule:
                raise ScheduleConflictError(
                    f"responder slot {cell.slot_offset} already in use"
                )
        for cell in out.chosen:
            initiator_schedule.add(
                Cell(cell.slot_offset, cell.channel_offset,
                     LinkOption.TX, req.responder)
            )
            responder_schedule.add(
                Cell(cell.slot_offset, cell.channel_offset,
                     LinkOption.RX, req.initiator)
            )
    else:
        for cell in out.chosen:
            if cell.slot_offset not in initiator_schedule:
                raise ScheduleConflictError(
                    f"initiator slot {cell.slot_offset} not scheduled"
                )
            if cell.slot_offset not in responder_schedule:
                raise ScheduleConflictError(
                    f"responder slot {cell.slot_offset} not scheduled"
                )
        for cell in out.chosen:
            initiator_schedule.remove(cell.slot_offset)
            responder_schedule.remove(cell.slot_offset)
