"""Fundamental TSCH types: cells, slotframes, ASN arithmetic, channel hopping.

ASN (absolute slot number) values are plain non-negative ints; Python ints
never wrap, so multi-day runs are safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional

# 16 channels of the 2.4 GHz IEEE 802.15.4 band.
DEFAULT_CHANNELS = tuple(range(11, 27))

DEFAULT_SLOTFRAME_SIZE = 101
DEFAULT_SLOT_DURATION_MS = 10.0

# Slot offset of the shared minimal cell present in every schedule.
MINIMAL_CELL_SLOT = 0


class LinkOption(Enum):
    TX = "tx"
    RX = "rx"
    SHARED = "shared"


@dataclass(frozen=True, slots=True)
class Cell:
    """One (slotOffset, channelOffset) unit of scheduled bandwidth.

    Tx/Rx cells are dedicated to a neighbor; a shared cell is broadcast
    (peer is None) and contended under slotted ALOHA.
    """

    slot_offset: int
    channel_offset: int
    option: LinkOption
    peer: Optional[int] = None

    def __post_init__(self) -> None:
        if self.slot_offset < 0:
            raise ValueError(f"negative slot offset {self.slot_offset}")
        if self.channel_offset < 0:
            raise ValueError(f"negative channel offset {self.channel_offset}")
        if self.option is LinkOption.SHARED:
            if self.peer is not None:
                raise ValueError("shared cell cannot name a single peer")
        elif self.peer is None:
            raise ValueError(f"{self.option.value} cell requires a peer")


@dataclass(frozen=True)
class HoppingConfig:
    """Ordered map from (channelOffset + ASN) mod n to a physical channel."""

    channel_map: tuple[int, ...] = DEFAULT_CHANNELS

    def __post_init__(self) -> None:
        if not self.channel_map:
            raise ValueError("channel map is empty")
        if len(set(self.channel_map)) != len(self.channel_map):
            raise ValueError("channel map entries must be distinct")

    @property
    def n_channels(self) -> int:
        return len(self.channel_map)


@dataclass(frozen=True)
class SlotframeParams:
    slotframe_size: int = DEFAULT_SLOTFRAME_SIZE
    slot_duration_ms: float = DEFAULT_SLOT_DURATION_MS

    def __post_init__(self) -> None:
        if self.slotframe_size <= 0:
            raise ValueError("slotframe size must be positive")
        if self.slot_duration_ms <= 0:
            raise ValueError("slot duration must be positive")


def compute_asn(cycle: int, slotframe_size: int, slot_offset: int) -> int:
    """Absolute slot number of slot `slot_offset` in slotframe cycle `cycle`."""
    if slotframe_size <= 0:
        raise ValueError("slotframe size must be positive")
    if cycle < 0:
        raise ValueError("slotframe cycle must be non-negative")
    if not 0 <= slot_offset < slotframe_size:
        raise ValueError(
            f"slot offset {slot_offset} outside [0, {slotframe_size})"
        )
    return cycle * slotframe_size + slot_offset


def slot_coordinates(asn: int, params: SlotframeParams) -> tuple[int, int]:
    """Inverse of compute_asn: (cycle, slot offset within the slotframe)."""
    if asn < 0:
        raise ValueError("ASN must be non-negative")
    return divmod(asn, params.slotframe_size)


def hop_frequency(channel_offset: int, asn: int, cfg: HoppingConfig) -> int:
    """Physical channel used by a cell at the given ASN.

    The hop sequence cycles through the whole channel map whenever the
    slotframe size and the channel count are coprime (e.g. 101 and 16).
    """
    if not 0 <= channel_offset < cfg.n_channels:
        raise ValueError(
            f"channel offset {channel_offset} outside [0, {cfg.n_channels})"
        )
    if asn < 0:
        raise ValueError("ASN must be non-negative")
    return cfg.channel_map[(channel_offset + asn) % cfg.n_channels]


class ScheduleConflictError(Exception):
    """Two cells would occupy the same slot offset in one node's schedule."""


@dataclass
class Schedule:
    """Per-node slotframe schedule: slot offset -> cell.

    A node can do only one thing per slot, so slot offsets are unique keys.
    """

    slotframe_size: int = DEFAULT_SLOTFRAME_SIZE
    cells: dict[int, Cell] = field(default_factory=dict)

    def add(self, cell: Cell) -> None:
        if cell.slot_offset >= self.slotframe_size:
            raise ValueError(
                f"slot offset {cell.slot_offset} outside slotframe"
            )
        if cell.slot_offset in self.cells:
            raise ScheduleConflictError(
                f"slot {cell.slot_offset} already scheduled"
            )
        self.cells[cell.slot_offset] = cell

    def remove(self, slot_offset: int) -> Cell:
        try:
            return self.cells.pop(slot_offset)
        except KeyError:
            raise ScheduleConflictError(
                f"no cell at slot {slot_offset}"
            ) from None

    def get(self, slot_offset: int) -> Optional[Cell]:
        return self.cells.get(slot_offset)

    def __contains__(self, slot_offset: int) -> bool:
        return slot_offset in self.cells

    def __len__(self) -> int:
        return len(self.cells)

    def __iter__(self) -> Iterator[Cell]:
        return iter(self.cells.values())

    def free_slot_offsets(self) -> list[int]:
        """Slot offsets with no scheduled cell, in increasing order."""
        return [s for s in range(self.slotframe_size) if s not in self.cells]

    def cells_toward(self, peer: int, option: LinkOption) -> list[Cell]:
        """Cells of the given direction dedicated to `peer`, insertion order."""
        return [
            c for c in self.cells.values()
            if c.option is option and c.peer == peer
        ]

    def tx_count(self, peer: int) -> int:
        return len(self.cells_toward(peer, LinkOption.TX))

    def add_minimal_cell(self) -> None:
        """Install the shared minimal cell at (slot 0, channel 0)."""
        self.add(Cell(MINIMAL_CELL_SLOT, 0, LinkOption.SHARED))
