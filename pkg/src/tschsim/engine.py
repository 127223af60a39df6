"""Discrete-event TSCH engine.

Advances the network slot by slot. Dedicated cells carry data packets with
PDR-stochastic delivery and a bounded retry budget; the shared minimal cell
(slot 0) runs slotted ALOHA for control traffic. At every slotframe
boundary nodes record traffic history, generate new packets and run their
scheduling-function hook, which may start one 6P transaction toward the
preferred parent.

6P transport is configurable: "shared" pushes every 6P message through the
minimal cell, "dedicated" lets a transaction ride the negotiating pair's
own cells (falling back to the minimal cell while the pair has none).
Transactions commit atomically on response delivery; a commit that has
become impossible (a concurrent transaction claimed a slot meanwhile)
degrades to a negotiation error.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from tschsim.core import (
    Cell,
    HoppingConfig,
    LinkOption,
    Schedule,
    ScheduleConflictError,
    SlotframeParams,
)
from tschsim.scheduling import (
    Action,
    EmsfScheduler,
    MsfConfig,
    make_scheduler,
)
from tschsim.sixp import (
    SixPCostModel,
    SixPError,
    SixPKind,
    SixPOutcome,
    SixPRequest,
    SixPStatus,
    apply_outcome,
    build_add_request,
    build_delete_request,
    respond_to_request,
)
from tschsim.telemetry import (
    DeliveryRecord,
    DropRecord,
    FrameStats,
    MetricsLog,
    SixPRecord,
)
from tschsim.topology import ROOT, RoutingTree, chain, random_tree, star
from tschsim.traffic import (
    Constant,
    TrafficHistory,
    TrafficProfile,
    generate_packets,
)

DEFAULT_PAYLOAD_BYTES = 127
DEFAULT_MAX_RETRIES = 4
DEFAULT_QUEUE_CAPACITY = 5

# TSCH-style backoff bounds for the shared slot.
MIN_BACKOFF_EXPONENT = 2
MAX_BACKOFF_EXPONENT = 7


class PacketKind(Enum):
    DATA = "data"
    SIXP = "sixp"


@dataclass(slots=True)
class Packet:
    src: int
    birth_asn: int
    size_bytes: int = DEFAULT_PAYLOAD_BYTES
    retries: int = 0
    kind: PacketKind = PacketKind.DATA


class ConfigError(Exception):
    """Simulation configuration is inconsistent."""


@dataclass(frozen=True)
class LinkModel:
    """Symmetric per-link packet delivery ratios."""

    default_pdr: float = 0.85
    overrides: tuple[tuple[tuple[int, int], float], ...] = ()

    def __post_init__(self) -> None:
        for (_, _), p in self.overrides:
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"PDR {p} outside [0, 1]")
        if not 0.0 <= self.default_pdr <= 1.0:
            raise ConfigError(f"PDR {self.default_pdr} outside [0, 1]")

    def pdr(self, a: int, b: int) -> float:
        key = (min(a, b), max(a, b))
        for pair, p in self.overrides:
            if pair == key:
                return p
        return self.default_pdr


@dataclass(frozen=True)
class SimConfig:
    """Full description of one simulation run."""

    node_count: int = 2
    slotframe_count: int = 100
    slotframe_params: SlotframeParams = SlotframeParams()
    hopping: HoppingConfig = HoppingConfig()
    # topology: "chain" | "star" | "random" | explicit edge list
    topology_kind: str = "random"
    topology_max_degree: int = 8
    topology_edges: Optional[tuple[tuple[int, int], ...]] = None
    traffic: TrafficProfile = field(
        default_factory=lambda: TrafficProfile(event_model=Constant(2))
    )
    payload_bytes: int = DEFAULT_PAYLOAD_BYTES
    max_retries: int = DEFAULT_MAX_RETRIES
    queue_capacity: int = DEFAULT_QUEUE_CAPACITY
    scheduling_function: str = "msf"
    beta: int = 10
    msf: MsfConfig = MsfConfig()
    candidate_list_len: int = 5
    cost_model: SixPCostModel = SixPCostModel()
    link: LinkModel = LinkModel()
    seed: int = 1
    # "shared": all 6P messages use the minimal cell (slotted ALOHA).
    # "dedicated": 6P messages ride the pair's own cells when any exist.
    sixp_transport: str = "shared"
    # "node": a responder mid-transaction rejects new requests;
    # "pair": only same-pair clashes reject; "off": never reject as busy.
    busy_policy: str = "node"
    # what the prediction history counts per slotframe
    lambda_counts: str = "generated+forwarded"  # or "generated"
    initial_tx_cells: int = 0
    # "uniform": every node gets initial_tx_cells toward its parent;
    # "subtree": scaled by subtree size, provisioning relays for aggregate load
    initial_provisioning: str = "uniform"
    join_jitter_frames: int = 0
    sixp_retry_wait_frames: int = 4
    sixp_lifetime_frames: int = 16
    sixp_msg_attempts: int = 2
    # minimum spacing between prediction-driven transactions of one node,
    # and how long a changed prediction must hold before it is acted on;
    # both keep a wandering rate estimate from ping-ponging cell changes
    emsf_cooldown_frames: int = 12
    emsf_stability_frames: int = 3

    def validate(self) -> None:
        if self.node_count < 1:
            raise ConfigError("need at least the root node")
        if self.slotframe_count < 0:
            raise ConfigError("slotframe count must be non-negative")
        if self.topology_kind not in ("chain", "star", "random", "edges"):
            raise ConfigError(f"unknown topology kind {self.topology_kind!r}")
        if self.topology_kind == "edges" and self.topology_edges is None:
            raise ConfigError("edge topology requires an edge list")
        if self.scheduling_function not in ("msf", "emsf"):
            raise ConfigError(
                f"unknown scheduling function {self.scheduling_function!r}"
            )
        if self.sixp_transport not in ("shared", "dedicated"):
            raise ConfigError(f"unknown transport {self.sixp_transport!r}")
        if self.busy_policy not in ("node", "pair", "off"):
            raise ConfigError(f"unknown busy policy {self.busy_policy!r}")
        if self.lambda_counts not in ("generated+forwarded", "generated"):
            raise ConfigError(f"unknown lambda mode {self.lambda_counts!r}")
        if self.max_retries < 0 or self.queue_capacity < 1:
            raise ConfigError("bad retry/queue limits")
        if self.beta < 1 or self.candidate_list_len < 1:
            raise ConfigError("bad beta or candidate list length")
        if self.initial_tx_cells < 0 or self.join_jitter_frames < 0:
            raise ConfigError("bad provisioning/jitter values")
        if self.initial_provisioning not in ("uniform", "subtree"):
            raise ConfigError(
                f"unknown provisioning mode {self.initial_provisioning!r}"
            )
        if self.sixp_msg_attempts < 1 or self.sixp_lifetime_frames < 1:
            raise ConfigError("bad 6P transport limits")
        if self.emsf_cooldown_frames < 0 or self.emsf_stability_frames < 1:
            raise ConfigError("bad EMSF damping values")

    def build_tree(self) -> RoutingTree:
        if self.topology_kind == "chain":
            return chain(self.node_count)
        if self.topology_kind == "star":
            return star(self.node_count)
        if self.topology_kind == "edges":
            from tschsim.topology import build_tree

            return build_tree(list(self.topology_edges), self.node_count)
        return random_tree(
            self.node_count, self.topology_max_degree, self.seed
        )


@dataclass(slots=True)
class SixPMessage:
    sender: int
    receiver: int
    is_request: bool
    size_bytes: int
    tx_ref: "Transaction"
    attempts: int = 0


class Transaction:
    """Lifecycle of one two-step 6P exchange."""

    __slots__ = (
        "req", "outcome", "started_frame", "frames_alive", "done",
    )

    def __init__(self, req: SixPRequest, frame: int):
        self.req = req
        self.outcome: Optional[SixPOutcome] = None
        self.started_frame = frame
        self.frames_alive = 0
        self.done = False


class NodeState:
    """Mutable per-node runtime state."""

    def __init__(self, node_id: int, parent: Optional[int],
                 cfg: SimConfig, scheduler) -> None:
        self.id = node_id
        self.parent = parent
        self.queue: deque[Packet] = deque()
        self.schedule = Schedule(cfg.slotframe_params.slotframe_size)
        self.schedule.add_minimal_cell()
        self.history = TrafficHistory(beta=cfg.beta)
        self.scheduler = scheduler
        self.rng_traffic = random.Random(f"{cfg.seed}/traffic/{node_id}")
        self.rng_sixp = random.Random(f"{cfg.seed}/sixp/{node_id}")
        self.rng_backoff = random.Random(f"{cfg.seed}/backoff/{node_id}")
        self.outbox: list[SixPMessage] = []
        self.active_tx: Optional[Transaction] = None
        self.responder_tx: Optional[Transaction] = None
        self.shared_backoff = 0
        self.backoff_exponent = MIN_BACKOFF_EXPONENT
        self.next_request_frame = 0
        self.join_frame = 0
        self.seq_num = 0
        self.gen_count = 0
        self.fwd_count = 0
        self.max_queue_seen = 0

    def allocated_toward_parent(self) -> int:
        if self.parent is None:
            return 0
        return self.schedule.tx_count(self.parent)


class Simulation:
    """Single deterministic run. Use run() or drive frame by frame."""

    def __init__(self, cfg: SimConfig):
        cfg.validate()
        self.cfg = cfg
        self.tree = cfg.build_tree()
        if self.tree.node_count != cfg.node_count:
            raise ConfigError("topology does not match node count")
        self.rng_link = random.Random(f"{cfg.seed}/link")
        rng_static = random.Random(f"{cfg.seed}/static")
        rng_jitter = random.Random(f"{cfg.seed}/jitter")

        self.nodes: list[NodeState] = []
        for nid in self.tree.nodes():
            parent = self.tree.parent.get(nid)
            scheduler = (
                make_scheduler(
                    cfg.scheduling_function, cfg.msf, cfg.beta,
                    cfg.emsf_stability_frames,
                )
                if nid != ROOT else None
            )
            node = NodeState(nid, parent, cfg, scheduler)
            if nid != ROOT and cfg.join_jitter_frames > 0:
                node.join_frame = rng_jitter.randrange(
                    cfg.join_jitter_frames
                )
            self.nodes.append(node)

        # slot offset -> transmitter ids of dedicated Tx cells
        self.slot_map: dict[int, list[int]] = {}
        self._preprovision(rng_static)

        self.asn = 0
        self.frame = 0
        self.log = MetricsLog(
            node_count=cfg.node_count,
            scheduling_function=cfg.scheduling_function,
            seed=cfg.seed,
            slotframe_size=cfg.slotframe_params.slotframe_size,
            slot_duration_ms=cfg.slotframe_params.slot_duration_ms,
            slotframe_count=cfg.slotframe_count,
        )
        self.generated_total = 0
        self.delivered_total = 0
        self.dropped_retry = 0
        self.dropped_overflow = 0

    # ------------------------------------------------------------------
    # construction helpers

    def _install_pair(self, child: int, parent: int, slot: int,
                      channel: int) -> None:
        self.nodes[child].schedule.add(
            Cell(slot, channel, LinkOption.TX, parent)
        )
        self.nodes[parent].schedule.add(
            Cell(slot, channel, LinkOption.RX, child)
        )
        self.slot_map.setdefault(slot, []).append(child)

    def _remove_pair(self, child: int, parent: int, slot: int) -> None:
        self.nodes[child].schedule.remove(slot)
        self.nodes[parent].schedule.remove(slot)
        self.slot_map[slot].remove(child)
        if not self.slot_map[slot]:
            del self.slot_map[slot]

    def _preprovision(self, rng: random.Random) -> None:
        """Static bootstrap schedule installed before the run starts,
        mirroring the pre-configured schedule a node uses while joining.

        Uniform mode gives every node the same number of cells toward its
        parent; subtree mode scales that by the node's subtree size so
        relays start with bandwidth matching the traffic they aggregate.
        """
        size = self.cfg.slotframe_params.slotframe_size
        targets = {}
        for node in self.nodes[1:]:
            target = self.cfg.initial_tx_cells
            if self.cfg.initial_provisioning == "subtree":
                target *= len(self.tree.subtree(node.id))
            targets[node.id] = target
        for round_i in range(max(targets.values(), default=0)):
            for node in self.nodes[1:]:
                if round_i >= targets[node.id]:
                    continue
                parent = self.nodes[node.parent]
                slot = next(
                    (
                        s for s in range(1, size)
                        if s not in node.schedule
                        and s not in parent.schedule
                    ),
                    None,
                )
                if slot is None:
                    continue
                self._install_pair(
                    node.id, parent.id, slot,
                    rng.randrange(self.cfg.hopping.n_channels),
                )

    # ------------------------------------------------------------------
    # run loop

    def run(self) -> MetricsLog:
        for f in range(self.cfg.slotframe_count):
            self.slotframe_boundary(f)
            for s in range(self.cfg.slotframe_params.slotframe_size):
                self.step_slot(self.asn)
                self.asn += 1
        self._finalize()
        return self.log

    def slotframe_boundary(self, frame: int) -> None:
        """Per-slotframe bookkeeping: sample queues, roll traffic history,
        generate new packets, then give every scheduling hook one shot."""
        self.frame = frame
        stats = self._sample_frame(frame)
        self.log.frames.append(stats)

        for node in self.nodes[1:]:
            if frame > 0:
                counted = node.gen_count
                if self.cfg.lambda_counts == "generated+forwarded":
                    counted += node.fwd_count
                node.history.record(counted)
            node.gen_count = 0
            node.fwd_count = 0

        for node in self.nodes[1:]:
            count = generate_packets(
                self.cfg.traffic, frame, node.rng_traffic
            )
            node.gen_count = count
            self.generated_total += count
            birth = frame * self.cfg.slotframe_params.slotframe_size
            for _ in range(count):
                if len(node.queue) < self.cfg.queue_capacity:
                    node.queue.append(
                        Packet(node.id, birth, self.cfg.payload_bytes)
                    )
                else:
                    self.dropped_overflow += 1
                    self.log.drops.append(
                        DropRecord(node.id, birth, birth, "overflow")
                    )
            node.max_queue_seen = max(node.max_queue_seen, len(node.queue))

        self._age_transactions(frame)

        for node in self.nodes[1:]:
            self._scheduling_hook(node, frame)

    def step_slot(self, asn: int) -> None:
        """Execute one timeslot: the shared minimal cell at slot offset 0,
        dedicated cells elsewhere."""
        size = self.cfg.slotframe_params.slotframe_size
        slot = asn % size
        if slot == 0:
            self._shared_slot(asn)
            return
        transmitters = self.slot_map.get(slot)
        if not transmitters:
            return
        for tx_id in sorted(transmitters):
            node = self.nodes[tx_id]
            cell = node.schedule.get(slot)
            if cell is None or cell.option is not LinkOption.TX:
                continue  # removed by a commit earlier in this slot pass
            self._run_dedicated_cell(node, cell, asn)

    # ------------------------------------------------------------------
    # slot mechanics

    def _shared_slot(self, asn: int) -> None:
        contenders: list[tuple[NodeState, SixPMessage]] = []
        for node in self.nodes:
            if node.shared_backoff > 0:
                node.shared_backoff -= 1
                continue
            msg = self._shared_sendable(node)
            if msg is not None:
                contenders.append((node, msg))
        if not contenders:
            return
        if len(contenders) == 1:
            node, msg = contenders[0]
            node.backoff_exponent = MIN_BACKOFF_EXPONENT
            self._transmit_control(msg, asn)
            return
        # slotted ALOHA: simultaneous contenders all fail, then back off
        for node, _ in contenders:
            node.shared_backoff = node.rng_backoff.randrange(
                1, 2 ** node.backoff_exponent
            )
            node.backoff_exponent = min(
                node.backoff_exponent + 1, MAX_BACKOFF_EXPONENT
            )

    def _shared_sendable(self, node: NodeState) -> Optional[SixPMessage]:
        for msg in node.outbox:
            if self.cfg.sixp_transport == "shared":
                return msg
            if not self._pair_has_cells(msg.sender, msg.receiver):
                return msg
        return None

    def _pair_has_cells(self, a: int, b: int) -> bool:
        sched = self.nodes[a].schedule
        return any(
            c.peer == b and c.option is not LinkOption.SHARED
            for c in sched
        )

    def _run_dedicated_cell(self, node: NodeState, cell: Cell,
                            asn: int) -> None:
        peer = self.nodes[cell.peer]
        if self.cfg.sixp_transport == "dedicated":
            msg = self._pair_message(node, peer)
            if msg is not None:
                self._transmit_control(msg, asn)
                return
        self._transmit_data(node, peer, asn)

    def _pair_message(self, tx_side: NodeState,
                      rx_side: NodeState) -> Optional[SixPMessage]:
        """A control message queued on either side of this pair; the cell
        owner's traffic wins over a reverse-direction ride."""
        for owner, other in ((tx_side, rx_side), (rx_side, tx_side)):
            for msg in owner.outbox:
                if msg.receiver == other.id:
                    return msg
        return None

    def _transmit_data(self, node: NodeState, peer: NodeState,
                       asn: int) -> None:
        toward_parent = node.parent == peer.id
        if not node.queue:
            if toward_parent and node.scheduler is not None:
                node.scheduler.on_cell_elapsed(False)
            return
        if toward_parent and node.scheduler is not None:
            node.scheduler.on_cell_elapsed(True)
        packet = node.queue[0]
        if self.rng_link.random() < self.cfg.link.pdr(node.id, peer.id):
            node.queue.popleft()
            if peer.id == ROOT:
                self.delivered_total += 1
                self.log.delivered.append(
                    DeliveryRecord(packet.src, packet.birth_asn, asn)
                )
                self._frame_delivery(asn, packet.birth_asn)
            else:
                # offered load counts even when the queue is full: the
                # packet was received (and acked) before being dropped
                peer.fwd_count += 1
                if len(peer.queue) < self.cfg.queue_capacity:
                    peer.queue.append(packet)
                    peer.max_queue_seen = max(
                        peer.max_queue_seen, len(peer.queue)
                    )
                else:
                    self.dropped_overflow += 1
                    self.log.drops.append(
                        DropRecord(
                            packet.src, packet.birth_asn, asn, "overflow"
                        )
                    )
        else:
            packet.retries += 1
            if packet.retries > self.cfg.max_retries:
                node.queue.popleft()
                self.dropped_retry += 1
                self.log.drops.append(
                    DropRecord(packet.src, packet.birth_asn, asn, "retries")
                )

    # ------------------------------------------------------------------
    # 6P machinery

    def _scheduling_hook(self, node: NodeState, frame: int) -> None:
        if frame < node.join_frame or node.scheduler is None:
            return
        decision = node.scheduler.decide(
            frame - node.join_frame,
            node.allocated_toward_parent(),
            node.history,
            len(node.queue),
        )
        if decision.action is Action.KEEP:
            return
        if node.active_tx is not None or frame < node.next_request_frame:
            return
        req = self._build_request(node, decision.action, decision.count)
        if req is None:
            return
        tx = Transaction(req, frame)
        node.active_tx = tx
        node.seq_num += 1
        node.outbox.append(
            SixPMessage(node.id, node.parent, True, req.size_bytes, tx)
        )

    def _build_request(self, node: NodeState, action: Action,
                       count: int) -> Optional[SixPRequest]:
        parent = node.parent
        if action is Action.ADD:
            free = len(node.schedule.free_slot_offsets())
            num = min(count, free)
            if num < 1:
                return None
            list_len = min(
                max(self.cfg.candidate_list_len, num), free
            )
            try:
                return build_add_request(
                    node.schedule, node.id, parent, num,
                    candidate_list_len=list_len,
                    rng=node.rng_sixp,
                    seq_num=node.seq_num,
                    cost_model=self.cfg.cost_model,
                    n_channel_offsets=self.cfg.hopping.n_channels,
                )
            except SixPError:
                return None
        num = min(count, node.allocated_toward_parent())
        if num < 1:
            return None
        return build_delete_request(
            node.schedule, node.id, parent, num,
            seq_num=node.seq_num,
            cost_model=self.cfg.cost_model,
        )

    def _transmit_control(self, msg: SixPMessage, asn: int) -> None:
        sender = self.nodes[msg.sender]
        if self.rng_link.random() < self.cfg.link.pdr(
            msg.sender, msg.receiver
        ):
            sender.outbox.remove(msg)
            self._deliver_control(msg, asn)
        else:
            msg.attempts += 1
            if msg.attempts >= self.cfg.sixp_msg_attempts:
                sender.outbox.remove(msg)
                self._abort_transaction(
                    msg.tx_ref, SixPStatus.PACKET_LOSS, asn
                )

    def _deliver_control(self, msg: SixPMessage, asn: int) -> None:
        tx = msg.tx_ref
        if tx.done:
            return
        if msg.is_request:
            responder = self.nodes[msg.receiver]
            if self._responder_busy(responder, tx.req.initiator):
                outcome = SixPOutcome(
                    status=SixPStatus.NEGOTIATION_ERROR,
                    overhead_bytes=tx.req.size_bytes
                    + self.cfg.cost_model.response_bytes(tx.req.num_cells),
                )
            else:
                outcome = respond_to_request(
                    tx.req, responder.schedule, self.cfg.cost_model
                )
                if outcome.status is SixPStatus.SUCCESS:
                    # hold the responder until the response is delivered so
                    # competing children cannot claim the promised slots
                    responder.responder_tx = tx
            tx.outcome = outcome
            responder.outbox.append(
                SixPMessage(
                    responder.id,
                    tx.req.initiator,
                    False,
                    self.cfg.cost_model.response_bytes(tx.req.num_cells),
                    tx,
                )
            )
        else:
            self._complete_transaction(tx, asn)

    def _responder_busy(self, responder: NodeState, requester: int) -> bool:
        policy = self.cfg.busy_policy
        if policy == "off":
            return False
        if (
            responder.active_tx is not None
            and responder.active_tx.req.responder == requester
        ):
            return True  # same pair already negotiating in the other role
        if policy == "node":
            return responder.responder_tx is not None
        return (
            responder.responder_tx is not None
            and responder.responder_tx.req.initiator == requester
        )

    def _complete_transaction(self, tx: Transaction, asn: int) -> None:
        status = tx.outcome.status
        if status is SixPStatus.SUCCESS:
            status = self._commit(tx)
        self._record_transaction(tx, status, asn)
        self._release_locks(tx)
        initiator = self.nodes[tx.req.initiator]
        if status is not SixPStatus.SUCCESS:
            initiator.next_request_frame = (
                self.frame
                + self.cfg.sixp_retry_wait_frames
                + initiator.rng_backoff.randrange(2)
            )
        elif self._in_prediction_mode(initiator):
            # jittered so independent nodes do not re-evaluate in lockstep
            cooldown = self.cfg.emsf_cooldown_frames
            if cooldown:
                cooldown += initiator.rng_backoff.randrange(
                    max(1, cooldown // 2)
                )
            initiator.next_request_frame = max(
                initiator.next_request_frame, self.frame + cooldown
            )

    def _in_prediction_mode(self, node: NodeState) -> bool:
        return (
            isinstance(node.scheduler, EmsfScheduler)
            and self.frame - node.join_frame >= node.scheduler.beta
        )

    def _commit(self, tx: Transaction) -> SixPStatus:
        """Apply a negotiated outcome to both schedules atomically. If the
        world changed since the responder answered, the commit degrades to
        a negotiation error instead of desynchronizing the pair."""
        req = tx.req
        initiator = self.nodes[req.initiator]
        responder = self.nodes[req.responder]
        try:
            apply_outcome(
                initiator.schedule, responder.schedule, req, tx.outcome
            )
        except ScheduleConflictError:
            return SixPStatus.NEGOTIATION_ERROR
        for cell in tx.outcome.chosen:
            if req.kind is SixPKind.ADD:
                self.slot_map.setdefault(cell.slot_offset, []).append(
                    req.initiator
                )
            else:
                self.slot_map[cell.slot_offset].remove(req.initiator)
                if not self.slot_map[cell.slot_offset]:
                    del self.slot_map[cell.slot_offset]
        return SixPStatus.SUCCESS

    def _abort_transaction(self, tx: Transaction, status: SixPStatus,
                           asn: int) -> None:
        if tx.done:
            return
        self._record_transaction(tx, status, asn)
        self._release_locks(tx)
        initiator = self.nodes[tx.req.initiator]
        initiator.next_request_frame = (
            self.frame
            + self.cfg.sixp_retry_wait_frames
            + initiator.rng_backoff.randrange(2)
        )

    def _release_locks(self, tx: Transaction) -> None:
        tx.done = True
        initiator = self.nodes[tx.req.initiator]
        responder = self.nodes[tx.req.responder]
        if initiator.active_tx is tx:
            initiator.active_tx = None
        if responder.responder_tx is tx:
            responder.responder_tx = None
        for node in (initiator, responder):
            node.outbox = [m for m in node.outbox if m.tx_ref is not tx]

    def _record_transaction(self, tx: Transaction, status: SixPStatus,
                            asn: int) -> None:
        overhead = tx.req.size_bytes + self.cfg.cost_model.response_bytes(
            tx.req.num_cells
        )
        self.log.sixp.append(
            SixPRecord(
                asn=asn,
                initiator=tx.req.initiator,
                responder=tx.req.responder,
                kind=tx.req.kind.value,
                num_cells=tx.req.num_cells,
                status=status.value,
                overhead_bytes=overhead,
            )
        )
        if self.log.frames:
            self.log.frames[-1].overhead_bytes += overhead
            self.log.frames[-1].sixp_completed += 1

    def _age_transactions(self, frame: int) -> None:
        asn = frame * self.cfg.slotframe_params.slotframe_size
        for node in self.nodes:
            tx = node.active_tx
            if tx is None:
                continue
            tx.frames_alive += 1
            if tx.frames_alive > self.cfg.sixp_lifetime_frames:
                self._abort_transaction(tx, SixPStatus.PACKET_LOSS, asn)

    # ------------------------------------------------------------------
    # metrics plumbing

    def _sample_frame(self, frame: int) -> FrameStats:
        depths = [len(n.queue) for n in self.nodes]
        return FrameStats(
            frame=frame,
            queue_avg=sum(depths) / len(depths),
            queue_max=max(depths),
            generated_cum=self.generated_total,
            delivered_cum=self.delivered_total,
            dropped_cum=self.dropped_retry + self.dropped_overflow,
            queued=sum(depths),
        )

    def _frame_delivery(self, asn: int, birth_asn: int) -> None:
        stats = self.log.frames[-1]
        ms = (asn - birth_asn) * self.cfg.slotframe_params.slot_duration_ms
        stats.deliveries += 1
        stats.latency_sum_ms += ms
        stats.latency_max_ms = max(stats.latency_max_ms, ms)

    def _finalize(self) -> None:
        self.log.generated_total = self.generated_total
        self.log.delivered_total = self.delivered_total
        self.log.dropped_retry_total = self.dropped_retry
        self.log.dropped_overflow_total = self.dropped_overflow
        self.log.queued_final = sum(len(n.queue) for n in self.nodes)
        self.log.queue_max_by_node = {
            n.id: n.max_queue_seen for n in self.nodes
        }

    # ------------------------------------------------------------------
    # invariants used by the tests

    def check_mirror_invariant(self) -> None:
        for node in self.nodes:
            for cell in node.schedule:
                if cell.option is LinkOption.TX:
                    peer = self.nodes[cell.peer]
                    mirror = peer.schedule.get(cell.slot_offset)
                    assert mirror is not None, (
                        f"missing mirror for {node.id}->{cell.peer} "
                        f"at slot {cell.slot_offset}"
                    )
                    assert mirror.option is LinkOption.RX
                    assert mirror.peer == node.id
                    assert mirror.channel_offset == cell.channel_offset


def run_simulation(cfg: SimConfig) -> MetricsLog:
    """Run one complete simulation; output is a pure function of cfg."""
    return Simulation(cfg).run()
