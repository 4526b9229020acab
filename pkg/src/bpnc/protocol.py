"""Per-node four-phase coordination state machine.

Each Node is a single-owner state machine driven by timestamped engine
events; nodes never share memory and interact only through transmitted
frames.  Phases: Discovery -> FlowUpdate -> Negotiation -> DataTransfer,
with RTS/CTS conflict resolution in between.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import backpressure as bp
from . import channel as ch
from . import gf, rlnc, wire


class Phase(enum.Enum):
    DISCOVERY = "discovery"
    FLOW_UPDATE = "flow_update"
    NEGOTIATION = "negotiation"
    DATA_TRANSFER = "data_transfer"


@dataclass
class NeighborRecord:
    node_id: int
    gains_db: dict[int, float] = field(default_factory=dict)  # channel -> dB
    next_channel: int = 0
    last_heard_us: int = 0
    # (flow source, flow dsts) -> {dest: backlog} from the last SYN
    backlogs: dict[tuple[int, tuple[int, ...]], dict[int, int]] = field(default_factory=dict)

    def best_gain_db(self) -> float:
        return max(self.gains_db.values()) if self.gains_db else float("-inf")


@dataclass
class Schedule:
    neighbor: int
    channel: int
    flow_index: int
    utility: float
    covered_dests: tuple[int, ...]


@dataclass
class SourceGen:
    gen: rlnc.Generation
    extra: int
    sent: int = 0
    finalized: bool = False
    real_count: int = 0
    opened_us: int = 0
    # coded packets are generated the moment source data arrives — a
    # combination can only cover packets that exist yet, which is what makes
    # received tag matrices tend lower-triangular — and sent later in order
    queue: list[rlnc.CodedPacket] = field(default_factory=list)

    def credit(self) -> int:
        return max(0, len(self.queue) - self.sent)


@dataclass
class RelayGen:
    block_size: int
    pkts: list[rlnc.CodedPacket] = field(default_factory=list)
    rcvd: int = 0
    sent: int = 0
    fwd_idx: int = 0
    origins: set[int] = field(default_factory=set)

    def credit(self) -> int:
        return max(0, self.rcvd - self.sent)

    def sendable_to(self, peer: int | None) -> bool:
        """Split horizon: never hand a generation back to a node it came
        from."""
        if self.credit() <= 0 or not self.pkts:
            return False
        return peer is None or peer not in self.origins


class Node:
    """One cognitive radio: identical code at every node."""

    def __init__(self, node_id: int, scn: ch.Scenario, engine, rng):
        self.id = node_id
        self.scn = scn
        self.engine = engine
        self.rng = rng
        self.ctx = engine.ctx
        self.phase = Phase.DISCOVERY
        self.phase_entry_us = 0
        self.phase_log: list[tuple[int, Phase]] = []
        self.tick_token = 0
        self.channel = 0
        self.neighbors: dict[int, NeighborRecord] = {}
        self.queues = bp.VirtualQueueSet(node_id)
        self.penalty = bp.PenaltyTracker()
        self.power_dbm = scn.power.init_dbm
        self.overhead = 0
        self.malformed = 0
        self.tx_airtime_us = 0
        self.tx_energy_mj = 0.0
        self.tx_until_us = 0
        # negotiation state
        self.pending: Schedule | None = None
        self.pending_since_us = 0
        self.rts_inbox: list[tuple[int, wire.RtsFrame]] = []   # (t, frame)
        self.overheard_rts: list[tuple[int, wire.RtsFrame]] = []
        self.resolve_scheduled = False
        # data-phase state
        self.data_role: str | None = None  # "tx" | "rx"
        self.data_peer = 0
        self.data_deadline_us = 0
        self.data_flow_index = 0
        self.last_data_rx_us = 0
        # coding state
        self.flows = [bp.FlowId(f.src, tuple(f.dsts)) for f in scn.flows]
        self.source_gens: dict[int, list[SourceGen]] = {
            i: [] for i, f in enumerate(self.flows) if f.source == node_id
        }
        self.next_gen_id: dict[int, int] = {i: 0 for i in self.source_gens}
        self.relay_gens: dict[tuple[int, int], RelayGen] = {}
        self.decoders: dict[tuple[int, int], rlnc.DecoderState] = {}

    # -- helpers ------------------------------------------------------------

    def now(self) -> int:
        return self.engine.now_us

    def us(self, seconds: float) -> int:
        return int(round(seconds * 1e6))

    def enter_phase(self, phase: Phase) -> None:
        self.phase = phase
        self.phase_entry_us = self.now()
        self.phase_log.append((self.now(), phase))

    def block_size(self) -> int:
        return self.scn.coding.block_size if self.scn.coding.enabled else 1

    def extra_packets(self) -> int:
        if not self.scn.coding.enabled:
            return 0
        h = self.scn.coding.block_size
        return max(1, math.ceil(self.scn.coding.redundancy * h))

    def packet_symbols(self) -> int:
        return self.scn.coding.packet_len * gf.symbols_per_byte(self.scn.coding.field_bits)

    # -- phase drivers (called by engine timers) ----------------------------

    def schedule_tick(self, delay_us: int) -> None:
        """At most one live tick chain: older scheduled ticks become no-ops.

        Unsynchronized clocks are what lets half-duplex radios hear each
        other at all, so every tick carries random per-node jitter.
        """
        self.tick_token += 1
        token = self.tick_token
        jitter = int(self.rng.integers(0, 200_000))
        self.engine.schedule(delay_us + jitter, lambda: self.on_tick(token))

    def start(self) -> None:
        self.enter_phase(Phase.DISCOVERY)
        self.hop_next_channel()
        self.engine.schedule(int(self.rng.integers(0, 200_000)), self.send_dis)
        self.schedule_tick(self.us(self.scn.timing.channel_dwell_s))

    def on_tick(self, token: int) -> None:
        if token != self.tick_token:
            return
        t = self.scn.timing
        if self.phase is Phase.DISCOVERY:
            if self.now() - self.phase_entry_us >= self.us(t.discovery_s):
                self.enter_phase(Phase.FLOW_UPDATE)
                self.flow_update_tick()
                return
            self.hop_next_channel()
            self.send_dis()
            self.schedule_tick(self.us(t.channel_dwell_s))
        elif self.phase is Phase.FLOW_UPDATE:
            self.flow_update_tick()
        # negotiation and data phases run on their own timers

    def flow_update_tick(self) -> None:
        t = self.scn.timing
        self.hop_next_channel()
        self.expire_stale_neighbors()
        if not self.neighbors and self.now() - self.phase_entry_us >= self.us(t.flow_update_s):
            # nothing heard for a whole update period: rediscover
            self.enter_phase(Phase.DISCOVERY)
            self.send_dis()
            self.schedule_tick(self.us(t.channel_dwell_s))
            return
        self.send_syn()
        self.update_power()
        sched = self.compute_schedule()
        if sched is not None:
            self.pending = sched
            self.pending_since_us = self.now()
            self.enter_phase(Phase.NEGOTIATION)
            self.channel = sched.channel
            self.negotiation_tick()
            return
        self.schedule_tick(self.us(t.syn_interval_s))

    def negotiation_tick(self) -> None:
        if self.phase is not Phase.NEGOTIATION:
            return
        t = self.scn.timing
        if self.now() - self.phase_entry_us >= self.us(t.negotiation_s):
            # TDT expiry: fall back, but keep pending so a late CTS still wins
            self.enter_phase(Phase.FLOW_UPDATE)
            self.schedule_tick(self.us(t.syn_interval_s))
            return
        if self.pending is None:
            self.enter_phase(Phase.FLOW_UPDATE)
            self.schedule_tick(self.us(t.syn_interval_s))
            return
        busy = self.scn.sensing_enabled and self.channel_busy(self.pending.channel)
        if not busy:
            self.send_rts()
        jitter = int(self.rng.integers(0, 50_000))
        self.engine.schedule(self.us(t.rts_interval_s) + jitter, self.negotiation_tick)

    # -- channel / sensing --------------------------------------------------

    def hop_next_channel(self) -> int:
        """Uniform hop to a different channel; degenerate 1-channel config
        stays put."""
        n = len(self.scn.channels)
        if n > 1:
            step = int(self.rng.integers(1, n))
            self.channel = (self.channel + step) % n
        return self.channel

    def channel_busy(self, chan: int) -> bool:
        reading_mw = self.engine.sense(self.id, chan)
        floor_mw = ch.dbm_to_mw(self.scn.phy.noise_floor_dbm)
        return reading_mw > floor_mw * ch.db_to_linear(self.scn.phy.busy_threshold_db)

    # -- outbound frames ----------------------------------------------------

    def send_dis(self) -> None:
        nbrs = tuple(
            (nid, max(rec.gains_db, key=rec.gains_db.get), rec.best_gain_db())
            for nid, rec in sorted(self.neighbors.items())
            if rec.gains_db
        )[:255]
        frame = wire.DisFrame(self.id, self.channel, nbrs)
        self.overhead += 1
        self.engine.transmit(self, self.channel, frame.pack())

    def send_syn(self) -> None:
        entries = []
        for flow, dest, backlog in self.queues.entries():
            dsts = (dest,) + tuple(d for d in flow.destinations if d != dest)
            entries.append((flow.source, dsts, backlog))
        frame = wire.SynFrame(self.id, tuple(entries))
        self.overhead += 1
        self.engine.transmit(self, self.channel, frame.pack())

    def send_rts(self) -> None:
        s = self.pending
        frame = wire.RtsFrame(self.id, s.neighbor, s.channel, s.flow_index, s.utility)
        self.overhead += 1
        self.engine.transmit(self, s.channel, frame.pack())

    def send_cts(self, tx: int, chan: int) -> None:
        frame = wire.CtsFrame(self.id, tx, chan)
        self.overhead += 1
        self.engine.transmit(self, chan, frame.pack())

    # -- backpressure decision ----------------------------------------------

    def link_rate_to(self, rec: NeighborRecord, chan: int) -> float:
        g = rec.gains_db.get(chan)
        if g is None:
            g = rec.best_gain_db()
        if g == float("-inf"):
            return 0.0
        snr = ch.db_to_linear(self.power_dbm + g - self.scn.phy.noise_floor_dbm)
        frame_len = self.scn.coding.packet_len
        return ch.link_rate(self.scn, snr, frame_len)[0]

    def compute_schedule(self) -> Schedule | None:
        cands = []
        for nid in sorted(self.neighbors):
            rec = self.neighbors[nid]
            flow_cands = []
            for fi, flow in enumerate(self.flows):
                if nid == flow.source or not self.has_sendable(fi, nid):
                    continue
                local = self.queues.flow_backlogs(flow)
                if not local:
                    continue
                remote = rec.backlogs.get((flow.source, flow.destinations), {})
                alpha = self.penalty.alpha(flow, nid)
                flow_cands.append((flow, local, remote, alpha))
            got = bp.select_flow(flow_cands)
            if got is None:
                continue
            flow, score = got
            for chan in range(len(self.scn.channels)):
                c = self.link_rate_to(rec, chan)
                cands.append((nid, chan, c, flow, score))
        pick = bp.select_next_hop(cands)
        if pick is None:
            return None
        nid, chan, flow, utility = pick
        fi = self.flows.index(flow)
        remote = self.neighbors[nid].backlogs.get((flow.source, flow.destinations), {})
        covered = tuple(
            d for d, qi in self.queues.flow_backlogs(flow).items()
            if qi - remote.get(d, 0) > 0
        )
        return Schedule(nid, chan, fi, utility, covered)

    def expire_stale_neighbors(self) -> None:
        horizon = 3 * self.us(self.scn.timing.discovery_s)
        cutoff = self.now() - horizon
        for nid in [n for n, rec in self.neighbors.items() if rec.last_heard_us < cutoff]:
            del self.neighbors[nid]

    # -- power control ------------------------------------------------------

    def update_power(self) -> None:
        rec = None
        for cand in self.neighbors.values():
            if cand.gains_db and (rec is None or cand.best_gain_db() > rec.best_gain_db()):
                rec = cand
        if rec is None:
            return
        gamma_hat = ch.db_to_linear(
            self.power_dbm + rec.best_gain_db() - self.scn.phy.noise_floor_dbm
        )
        gamma_t = ch.db_to_linear(self.scn.power.target_snr_db)
        self.power_dbm = apply_power_update(
            self.power_dbm, gamma_t, gamma_hat,
            self.scn.power.min_dbm, self.scn.power.max_dbm,
        )

    # -- inbound frames -----------------------------------------------------

    def handle_frame(self, src: int, chan: int, raw: bytes,
                     rx_power_dbm: float, tx_power_dbm: float) -> None:
        try:
            frame = wire.unpack(raw, field_bits=self.scn.coding.field_bits)
        except wire.MalformedFrame:
            self.malformed += 1
            return
        self.note_neighbor(src, chan, rx_power_dbm, tx_power_dbm)
        if src not in self.neighbors:
            return  # below sensitivity: no table entry, nothing to act on
        if isinstance(frame, wire.DisFrame):
            self.neighbors[src].next_channel = frame.next_channel
        elif isinstance(frame, wire.SynFrame):
            rec = self.neighbors[src]
            for fsrc, dsts, backlog in frame.entries:
                flow_key = (fsrc, self._canonical_dsts(fsrc, dsts))
                rec.backlogs.setdefault(flow_key, {})[dsts[0]] = backlog
        elif isinstance(frame, wire.RtsFrame):
            self.on_rts(frame)
        elif isinstance(frame, wire.CtsFrame):
            self.on_cts(frame)
        elif isinstance(frame, wire.DataFrame):
            self.on_data(src, frame)

    def _canonical_dsts(self, fsrc: int, dsts: tuple[int, ...]) -> tuple[int, ...]:
        for flow in self.flows:
            if flow.source == fsrc and set(flow.destinations) == set(dsts):
                return flow.destinations
        return tuple(sorted(dsts))

    def note_neighbor(self, src: int, chan: int,
                      rx_power_dbm: float, tx_power_dbm: float) -> None:
        if rx_power_dbm < self.scn.phy.sensitivity_dbm:
            return
        rec = self.neighbors.get(src)
        if rec is None:
            rec = self.neighbors[src] = NeighborRecord(src)
        rec.gains_db[chan] = rx_power_dbm - tx_power_dbm
        rec.last_heard_us = self.now()

    # -- negotiation --------------------------------------------------------

    def on_rts(self, frame: wire.RtsFrame) -> None:
        if self.data_role is not None:
            return  # half-duplex: busy in a data phase
        t = self.now()
        if frame.rx == self.id:
            self.rts_inbox.append((t, frame))
            if not self.resolve_scheduled:
                self.resolve_scheduled = True
                self.engine.schedule(self.us(self.scn.timing.cts_wait_s), self.resolve_rts)
        else:
            self.overheard_rts.append((t, frame))

    def resolve_rts(self) -> None:
        self.resolve_scheduled = False
        window = self.us(2 * self.scn.timing.cts_wait_s)
        horizon = self.now() - window
        inbox = [f for t, f in self.rts_inbox if t >= horizon]
        overheard = [f for t, f in self.overheard_rts if t >= horizon]
        self.rts_inbox.clear()
        self.overheard_rts = [(t, f) for t, f in self.overheard_rts if t >= horizon]
        if not inbox or self.data_role is not None:
            return
        own_sched = self.pending
        if own_sched is None and self.phase is Phase.FLOW_UPDATE:
            # receive, or insist on our own (would-be) transmission?
            own_sched = self.compute_schedule()
        own = (own_sched.utility, self.id) if own_sched is not None else None
        decision = resolve_conflicts(self.id, inbox, overheard, own)
        if decision is None:
            if self.pending is None and own_sched is not None:
                # our utility won: start negotiating it right away
                self.pending = own_sched
                self.pending_since_us = self.now()
                self.enter_phase(Phase.NEGOTIATION)
                self.channel = own_sched.channel
                self.negotiation_tick()
            return
        winner = decision
        # abandon own transmission: the winner's utility beat ours
        self.pending = None
        self.send_cts(winner.tx, winner.channel)
        self.begin_data_rx(winner.tx, winner.channel)

    def on_cts(self, frame: wire.CtsFrame) -> None:
        if frame.tx != self.id or self.pending is None:
            return
        if self.data_role is not None:
            return
        s = self.pending
        if frame.rx != s.neighbor or frame.channel != s.channel:
            return
        # a CTS after fallback to flow update still starts the data phase
        flow = self.flows[s.flow_index]
        self.penalty.record_visit(flow, s.neighbor)
        self.begin_data_tx()

    # -- data phase ---------------------------------------------------------

    def begin_data_rx(self, peer: int, chan: int) -> None:
        self.data_role = "rx"
        self.data_peer = peer
        self.channel = chan
        self.data_deadline_us = self.now() + self.us(self.scn.timing.data_s)
        self.last_data_rx_us = self.now()
        self.enter_phase(Phase.DATA_TRANSFER)
        self.engine.schedule(self.us(self.scn.timing.data_s), self.end_data_phase)

    def begin_data_tx(self) -> None:
        s = self.pending
        self.data_role = "tx"
        self.data_peer = s.neighbor
        self.data_flow_index = s.flow_index
        self.channel = s.channel
        self.data_deadline_us = self.now() + self.us(self.scn.timing.data_s)
        self.enter_phase(Phase.DATA_TRANSFER)
        self.send_next_data()

    def end_data_phase(self) -> None:
        if self.phase is not Phase.DATA_TRANSFER:
            return
        if self.data_role == "rx" and self.now() < self.data_deadline_us:
            return
        self.data_role = None
        self.pending = None
        self.enter_phase(Phase.FLOW_UPDATE)
        # prompt tick: a SYN right after a burst keeps neighbor backlog
        # views from going a whole dwell stale
        self.schedule_tick(0)

    def send_next_data(self) -> None:
        if self.phase is not Phase.DATA_TRANSFER or self.data_role != "tx":
            return
        s = self.pending
        if s is None or self.now() >= self.data_deadline_us:
            self.end_data_phase()
            return
        if self.scn.sensing_enabled and self.channel_busy(s.channel):
            # carrier sense: another live transmission owns the channel;
            # retry after a random hold-off
            self.engine.schedule(int(self.rng.integers(2_000, 10_000)),
                                 self.send_next_data)
            return
        pkt = self.next_coded_packet(s.flow_index, self.data_peer)
        if pkt is None:
            self.end_data_phase()
            return
        flow = self.flows[s.flow_index]
        payload = gf.symbols_to_bytes(pkt.payload, self.scn.coding.field_bits)
        frame = wire.DataFrame(
            s.flow_index, pkt.gen_id % 0x10000, self.block_size(),
            pkt.perm or tuple(range(self.block_size())),
            tuple(int(x) for x in pkt.tag), payload, self.scn.coding.field_bits,
        )
        airtime = self.engine.transmit(self, s.channel, frame.pack())
        for d in s.covered_dests:
            self.queues.decrement(flow, d)
        self.engine.schedule(airtime, self.send_next_data)

    def next_coded_packet(self, flow_index: int,
                          peer: int | None = None) -> rlnc.CodedPacket | None:
        """Oldest generation with send credit; source encodes over its filled
        prefix, relay recodes its buffer."""
        if flow_index in self.source_gens:
            for sg in self.source_gens[flow_index]:
                if sg.credit() > 0:
                    pkt = sg.queue[sg.sent]
                    sg.sent += 1
                    self.prune_source_gens(flow_index)
                    return pkt
            return None
        for key in sorted(self.relay_gens):
            if key[0] != flow_index:
                continue
            rg = self.relay_gens[key]
            if rg.sendable_to(peer):
                rg.sent += 1
                # forward each received packet once in arrival order (keeps
                # the tag staircase intact); recode only for surplus credit
                if rg.fwd_idx < len(rg.pkts):
                    pkt = rg.pkts[rg.fwd_idx]
                    rg.fwd_idx += 1
                    return pkt
                return rlnc.recode(self.ctx, rg.pkts, self.rng)
        return None

    def prune_source_gens(self, flow_index: int) -> None:
        gens = self.source_gens[flow_index]
        self.source_gens[flow_index] = [
            sg for sg in gens if not (sg.finalized and sg.credit() == 0)
        ]

    def has_sendable(self, flow_index: int, peer: int | None = None) -> bool:
        if flow_index in self.source_gens:
            return any(sg.credit() > 0 for sg in self.source_gens[flow_index])
        return any(
            key[0] == flow_index and rg.sendable_to(peer)
            for key, rg in self.relay_gens.items()
        )

    def on_data(self, src: int, frame: wire.DataFrame) -> None:
        if self.data_role != "rx" or src != self.data_peer:
            return
        self.last_data_rx_us = self.now()
        flow = self.flows[frame.flow_index]
        h = frame.block_size
        tag = np.array(frame.tag, dtype=np.uint8)
        payload = gf.bytes_to_symbols(frame.payload, self.scn.coding.field_bits)
        pkt = rlnc.CodedPacket(frame.flow_index, frame.gen_id, tag, payload,
                               perm=frame.perm)
        key = (frame.flow_index, frame.gen_id)
        if self.id in flow.destinations:
            dec = self.decoders.get(key)
            if dec is None:
                dec = self.decoders[key] = rlnc.DecoderState(
                    self.ctx, h, len(payload),
                    mode=self.scn.coding.decoder,
                    min_weight_limit=self.scn.coding.min_weight_limit,
                )
            was_full = dec.full_rank
            dec.ingest(pkt)
            self.engine.on_destination_ingest(self.id, frame.flow_index,
                                              frame.gen_id, dec, was_full)
        relay_dests = tuple(d for d in flow.destinations if d != self.id)
        if relay_dests and (self.id not in flow.destinations or len(flow.destinations) > 1):
            rg = self.relay_gens.get(key)
            if rg is None:
                rg = self.relay_gens[key] = RelayGen(h)
            if len(rg.pkts) < 4 * h:
                rg.pkts.append(pkt)
            rg.rcvd += 1
            rg.origins.add(src)
            for d in relay_dests:
                self.queues.increment(flow, d)

    # -- application layer (source only) ------------------------------------

    def app_arrival(self, flow_index: int) -> None:
        flow = self.flows[flow_index]
        n_sym = self.packet_symbols()
        data = self.rng.integers(0, self.ctx.size, size=n_sym, dtype=np.uint8)
        gens = self.source_gens[flow_index]
        if not gens or gens[-1].finalized or gens[-1].gen.full:
            gens.append(self.open_generation(flow_index))
        sg = gens[-1]
        sg.gen.add_source_packet(data)
        sg.real_count += 1
        # Systematic emission: the packet carries the newly arrived block
        # directly, so a destination decodes it even when earlier packets of
        # the same generation were dropped.
        tag = np.zeros(sg.gen.block_size, dtype=np.uint8)
        tag[sg.gen.filled - 1] = 1
        sg.queue.append(rlnc.CodedPacket(flow_index, sg.gen.gen_id, tag, data))
        for d in flow.destinations:
            self.queues.increment(flow, d)
        self.engine.count_injected(flow_index)
        if sg.gen.full:
            self.finalize_generation(flow_index, sg)

    def open_generation(self, flow_index: int) -> SourceGen:
        gid = self.next_gen_id[flow_index]
        self.next_gen_id[flow_index] = gid + 1
        h = self.block_size()
        sg = SourceGen(
            rlnc.Generation(gid, h, self.packet_symbols()),
            extra=self.extra_packets(), opened_us=self.now(),
        )
        if self.scn.coding.enabled and self.scn.coding.gen_timeout_s > 0:
            self.engine.schedule(
                self.us(self.scn.coding.gen_timeout_s),
                lambda: self.generation_timeout(flow_index, sg),
            )
        return sg

    def generation_timeout(self, flow_index: int, sg: SourceGen) -> None:
        if sg.finalized or sg.gen.filled == 0:
            return
        self.close_partial_generation(flow_index, sg)

    def close_partial_generation(self, flow_index: int, sg: SourceGen) -> None:
        """Fill the short block with padding rows (0x80 marker then zeros)."""
        n_sym = self.packet_symbols()
        m = self.scn.coding.field_bits
        marker = gf.bytes_to_symbols(
            b"\x80" + b"\x00" * (self.scn.coding.packet_len - 1), m
        )
        first = True
        while not sg.gen.full:
            row = marker if first else np.zeros(n_sym, dtype=np.uint8)
            sg.gen.add_source_packet(row)
            first = False
            # padding rows get coded coverage like any other arrival, or the
            # block could never reach full rank
            sg.queue.extend(rlnc.encode_generation(
                self.ctx, sg.gen, 1, self.rng,
                mode=self.scn.coding.tag_mode, flow_id=flow_index,
            ))
        self.finalize_generation(flow_index, sg)

    def finalize_generation(self, flow_index: int, sg: SourceGen) -> None:
        sg.finalized = True
        if sg.extra > 0:
            sg.queue.extend(rlnc.encode_generation(
                self.ctx, sg.gen, sg.extra, self.rng,
                mode=self.scn.coding.tag_mode, flow_id=flow_index,
            ))
        self.engine.register_truth(flow_index, sg.gen.gen_id, sg.gen.matrix(),
                                   sg.real_count)


# -- pure decision functions (replayable in tests) --------------------------

def resolve_conflicts(
    me: int,
    inbox: list[wire.RtsFrame],
    overheard: list[wire.RtsFrame],
    own: tuple[float, int] | None,
) -> wire.RtsFrame | None:
    """Choose at most one RTS to answer with a CTS.

    Winner has the highest quantized utility; ties go to the lower node id.
    The decision uses only frames this node heard: a competing transmission
    we overhear (hidden from the contenders) suppresses the CTS, and our own
    pending transmission competes on equal terms.
    """
    if not inbox:
        return None
    def key(f: wire.RtsFrame):
        return (-wire.encode_utility(f.utility), f.tx)
    winner = min(inbox, key=key)
    wq = wire.encode_utility(winner.utility)
    if own is not None:
        oq = wire.encode_utility(own[0])
        if oq > wq or (oq == wq and own[1] < winner.tx):
            return None  # insist on our own transmission
    for f in overheard:
        if f.channel != winner.channel:
            continue
        fq = wire.encode_utility(f.utility)
        if fq > wq or (fq == wq and f.tx < winner.tx):
            return None  # a stronger transmission we can hear would collide
    return winner


def apply_power_update(
    power_dbm: float, gamma_t: float, gamma_hat: float,
    min_dbm: float, max_dbm: float,
) -> float:
    """Multiplicative power-control step, clamped to the configured range.

    gamma values are linear SNR; a dead measurement pins power at max.
    """
    if gamma_hat <= 0:
        return max_dbm
    p_mw = ch.dbm_to_mw(power_dbm) * gamma_t / gamma_hat
    p_dbm = 10 * math.log10(p_mw)
    return min(max_dbm, max(min_dbm, p_dbm))
