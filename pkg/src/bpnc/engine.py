"""Deterministic discrete-event core: clock, frame delivery, metrics.

Time is integer microseconds.  Events with equal timestamps run in
scheduling order, so a run is a pure function of (scenario, seed); logging
never consumes randomness.
"""

from __future__ import annotations

import copy
import heapq
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import channel as ch
from . import gf, wire
from .protocol import Node

US = 1_000_000


@dataclass
class Transmission:
    start_us: int
    end_us: int
    src: int
    chan: int
    power_dbm: float
    raw: bytes
    is_data: bool


@dataclass
class MetricsLog:
    samples: list[dict] = field(default_factory=list)
    # (time_us, flow, gen, dest, received, decoded_fraction)
    accuracy: list[tuple] = field(default_factory=list)
    early_recovery: list[float] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def write_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("# bpnc-metrics v1\n")
            f.write("time_s,kind,node,flow,value\n")
            for row in self.samples:
                f.write("{time_s},{kind},{node},{flow},{value}\n".format(**row))

    def write_summary(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.summary, f, indent=2, sort_keys=True)
            f.write("\n")

    def series(self, kind: str, node: int | None = None, flow: int | None = None):
        out = []
        for r in self.samples:
            if r["kind"] != kind:
                continue
            if node is not None and r["node"] != node:
                continue
            if flow is not None and r["flow"] != flow:
                continue
            out.append((r["time_s"], r["value"]))
        return out


class Engine:
    """One simulation run; owns the clock, the medium, and all nodes."""

    def __init__(self, scn: ch.Scenario, seed: int, duration_s: float | None = None):
        scn.validate()
        self.scn = scn
        self.seed = seed
        self.duration_us = int(round((duration_s if duration_s is not None
                                      else scn.duration_s) * US))
        self.ctx = gf.FieldContext(scn.coding.field_bits)
        self.now_us = 0
        self._seq = 0
        self._heap: list[tuple[int, int, object]] = []
        self.chan_rng = np.random.default_rng(
            np.random.SeedSequence([seed & 0xFFFFFFFF, 0x5EED])
        )
        self.nodes: dict[int, Node] = {}
        for nid in range(1, scn.num_nodes + 1):
            rng = np.random.default_rng(
                np.random.SeedSequence([seed & 0xFFFFFFFF, nid])
            )
            self.nodes[nid] = Node(nid, scn, self, rng)
        self.active: list[Transmission] = []
        self.packet_log: list[str] = []
        self.log = MetricsLog()
        # ground truth and delivery accounting
        self.truth: dict[tuple[int, int], tuple[np.ndarray, int]] = {}
        self.injected: dict[int, int] = {i: 0 for i in range(len(scn.flows))}
        self.delivered: dict[int, int] = {i: 0 for i in range(len(scn.flows))}
        self.dest_done: dict[tuple[int, int], set[int]] = {}
        self.best_pre_full: dict[tuple[int, int, int], int] = {}
        self.data_frames: dict[int, int] = {n: 0 for n in self.nodes}
        self.dest_decoded: dict[int, int] = {}
        self.collision_losses = 0
        self.decode_errors = 0

    # -- event loop ---------------------------------------------------------

    def schedule(self, delay_us: int, fn) -> None:
        self.schedule_at(self.now_us + max(0, int(delay_us)), fn)

    def schedule_at(self, t_us: int, fn) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (t_us, self._seq, fn))

    def run(self) -> MetricsLog:
        for flow_index, fc in enumerate(self.scn.flows):
            rng = np.random.default_rng(
                np.random.SeedSequence([self.seed & 0xFFFFFFFF, 0xA44, flow_index])
            )
            self._schedule_arrival(flow_index, fc, rng)
        for nid in sorted(self.nodes):
            self.nodes[nid].start()
        self._sample_metrics()
        while self._heap and self.duration_us > 0:
            t, _, fn = heapq.heappop(self._heap)
            if t > self.duration_us:
                break
            self.now_us = t
            fn()
        self.now_us = self.duration_us
        self._sample_metrics()
        self._finalize_summary()
        return self.log

    def _schedule_arrival(self, flow_index: int, fc: ch.FlowConfig, rng) -> None:
        gap = rng.exponential(1.0 / fc.arrival_rate)
        def fire():
            self.nodes[fc.src].app_arrival(flow_index)
            self._schedule_arrival(flow_index, fc, rng)
        self.schedule(int(round(gap * US)), fire)

    # -- the medium ---------------------------------------------------------

    def airtime_us(self, raw: bytes) -> int:
        return int(math.ceil(len(raw) * 8 / self.scn.phy.bit_rate() * US))

    def transmit(self, node: Node, chan: int, raw: bytes) -> int:
        air = self.airtime_us(raw)
        end = self.now_us + air
        tx = Transmission(self.now_us, end, node.id, chan, node.power_dbm,
                          raw, raw[0] == wire.TYPE_DATA)
        self.active = [a for a in self.active if a.end_us > self.now_us]
        self.active.append(tx)
        node.tx_until_us = max(node.tx_until_us, end)
        node.tx_airtime_us += air
        node.tx_energy_mj += ch.dbm_to_mw(node.power_dbm) * air / US
        if tx.is_data:
            self.data_frames[node.id] += 1
        self.packet_log.append(
            f"{self.now_us} {chan} {node.id} {wire.TYPE_NAMES[raw[0]]} {raw.hex()}"
        )
        self.schedule_at(end, lambda: self._deliver(tx))
        return air

    def _deliver(self, tx: Transmission) -> None:
        concurrent = [
            (a.src, a.power_dbm) for a in self.active
            if a is not tx and a.chan == tx.chan
            and a.start_us < tx.end_us and a.end_us > tx.start_us
        ]
        for nid in sorted(self.nodes):
            if nid == tx.src:
                continue
            g = self.scn.gain_db(tx.src, nid, tx.chan)
            if g == float("-inf"):
                continue
            rxp = tx.power_dbm + g
            if rxp < self.scn.phy.sensitivity_dbm:
                continue
            # every in-range node gets its own draw from this transmission,
            # whether or not it is tuned here, so logging can't shift draws
            sinr = ch.link_snr(self.scn, tx.power_dbm, (tx.src, nid), tx.chan,
                               concurrent)
            p_ok = ch.frame_success_prob(self.scn, sinr, len(tx.raw))
            ok = self.chan_rng.random() < p_ok
            if ok and tx.is_data and self.scn.frame_loss > 0:
                ok = self.chan_rng.random() >= self.scn.frame_loss
            node = self.nodes[nid]
            tuned = node.channel == tx.chan and node.tx_until_us <= tx.start_us
            if not ok:
                if concurrent and tuned:
                    self.collision_losses += 1
                continue
            if tuned:
                node.handle_frame(tx.src, tx.chan, tx.raw, rxp, tx.power_dbm)

    def sense(self, node_id: int, chan: int) -> float:
        """Received power in mW at a node from all live co-channel carriers."""
        total = ch.dbm_to_mw(self.scn.phy.noise_floor_dbm)
        for a in self.active:
            if a.chan != chan or a.src == node_id or a.end_us <= self.now_us:
                continue
            g = self.scn.gain_db(a.src, node_id, chan)
            if g > float("-inf"):
                total += ch.dbm_to_mw(a.power_dbm + g)
        return total

    # -- coding bookkeeping -------------------------------------------------

    def register_truth(self, flow_index: int, gen_id: int,
                       matrix: np.ndarray, real_count: int) -> None:
        self.truth[(flow_index, gen_id)] = (matrix, real_count)

    def count_injected(self, flow_index: int) -> None:
        self.injected[flow_index] += 1

    def on_destination_ingest(self, dest: int, flow_index: int, gen_id: int,
                              dec, was_full: bool) -> None:
        h = dec.block_size
        self.log.accuracy.append(
            (self.now_us, flow_index, gen_id, dest, dec.received,
             dec.decoded_count() / h)
        )
        key = (flow_index, gen_id)
        truth = self.truth.get(key)
        if (dec.mode == "rank_deficient" and not dec.full_rank
                and truth is not None and truth[0].shape[0] == h):
            est, conf = dec.solve_rank_deficient()
            perm = dec.perm or tuple(range(h))
            correct = 0
            for c in range(h):
                mask = conf[c] > 0
                correct += int(np.count_nonzero(est[c][mask] == truth[0][perm[c]][mask]))
            k = (flow_index, gen_id, dest)
            self.best_pre_full[k] = max(self.best_pre_full.get(k, 0), correct)
        if dec.full_rank and not was_full:
            self._on_generation_decoded(dest, flow_index, gen_id, dec, truth)

    def _on_generation_decoded(self, dest, flow_index, gen_id, dec, truth) -> None:
        h = dec.block_size
        if truth is not None and truth[0].shape[0] == h:
            perm = dec.perm or tuple(range(h))
            for src_idx, payload in dec.delivered.items():
                if not np.array_equal(payload, truth[0][src_idx]):
                    self.decode_errors += 1
            k = (flow_index, gen_id, dest)
            if k in self.best_pre_full:
                self.log.early_recovery.append(
                    self.best_pre_full.pop(k) / (h * dec.packet_len)
                )
        done = self.dest_done.setdefault((flow_index, gen_id), set())
        if dest not in done:
            self.dest_decoded[dest] = self.dest_decoded.get(dest, 0) + 1
        done.add(dest)
        flow_dests = set(self.scn.flows[flow_index].dsts)
        if done == flow_dests:
            real = truth[1] if truth is not None else h
            self.delivered[flow_index] += real

    # -- metrics ------------------------------------------------------------

    def _sample_metrics(self) -> None:
        t_s = self.now_us / US
        listen_mw = self.scn.phy.listen_power_frac * ch.dbm_to_mw(self.scn.power.max_dbm)
        for nid in sorted(self.nodes):
            n = self.nodes[nid]
            listen_s = max(0, self.now_us - n.tx_airtime_us) / US
            energy = n.tx_energy_mj + listen_mw * listen_s
            for kind, value in (
                ("backlog", n.queues.total()),
                ("energy_mj", round(energy, 6)),
                ("overhead", n.overhead),
                ("data_frames", self.data_frames[nid]),
            ):
                self.log.samples.append(
                    {"time_s": t_s, "kind": kind, "node": nid, "flow": "", "value": value}
                )
        for fi in self.delivered:
            self.log.samples.append(
                {"time_s": t_s, "kind": "delivered", "node": "", "flow": fi,
                 "value": self.delivered[fi]}
            )
            self.log.samples.append(
                {"time_s": t_s, "kind": "injected", "node": "", "flow": fi,
                 "value": self.injected[fi]}
            )
        if self.now_us < self.duration_us:
            self.schedule(int(round(self.scn.timing.sample_interval_s * US)),
                          self._sample_metrics)

    def _finalize_summary(self) -> None:
        listen_mw = self.scn.phy.listen_power_frac * ch.dbm_to_mw(self.scn.power.max_dbm)
        per_node = {}
        for nid in sorted(self.nodes):
            n = self.nodes[nid]
            backlogs = [v for (t, v) in self.log.series("backlog", node=nid)]
            per_node[str(nid)] = {
                "energy_mj": round(
                    n.tx_energy_mj
                    + listen_mw * max(0, self.duration_us - n.tx_airtime_us) / US, 6
                ),
                "overhead_frames": n.overhead,
                "data_frames": self.data_frames[nid],
                "final_backlog": n.queues.total(),
                "median_backlog": float(np.median(backlogs)) if backlogs else 0.0,
                "power_dbm": round(n.power_dbm, 3),
            }
        er = self.log.early_recovery
        self.log.summary = {
            "scenario": self.scn.name,
            "seed": self.seed,
            "duration_s": self.duration_us / US,
            "injected": {str(k): v for k, v in self.injected.items()},
            "delivered": {str(k): v for k, v in self.delivered.items()},
            "per_node": per_node,
            "decoded_generations_per_destination": {
                str(k): v for k, v in sorted(self.dest_decoded.items())
            },
            "collision_losses": self.collision_losses,
            "decode_errors": self.decode_errors,
            "early_recovery_mean": float(np.mean(er)) if er else None,
            "early_recovery_count": len(er),
        }


def accuracy_curve(log: MetricsLog) -> list[tuple[int, float]]:
    """Mean decoded fraction as a function of packets received, pooled over
    all (flow, generation, destination) decode traces."""
    buckets: dict[int, list[float]] = {}
    for _, _, _, _, received, frac in log.accuracy:
        buckets.setdefault(received, []).append(frac)
    return [(r, float(np.mean(buckets[r]))) for r in sorted(buckets)]


def run(scn: ch.Scenario, seed: int, duration_s: float | None = None) -> Engine:
    eng = Engine(scn, seed, duration_s)
    eng.run()
    return eng


# -- parameter sweeps -------------------------------------------------------

SWEEP_ALIASES = {
    "block_size": "coding.block_size",
    "decoder": "coding.decoder",
    "field_bits": "coding.field_bits",
    "redundancy": "coding.redundancy",
    "duration": "duration_s",
    "sensing": "sensing_enabled",
}


def apply_override(scn: ch.Scenario, key: str, value) -> ch.Scenario:
    """Deep-copied scenario with one dotted-path (or aliased) field changed."""
    scn = copy.deepcopy(scn)
    key = SWEEP_ALIASES.get(key, key)
    if key == "arrival_rate":
        for f in scn.flows:
            f.arrival_rate = float(value)
        scn.validate()
        return scn
    obj = scn
    parts = key.split(".")
    for p in parts[:-1]:
        if not hasattr(obj, p):
            raise ch.ScenarioError(f"unknown sweep parameter {key!r}")
        obj = getattr(obj, p)
    leaf = parts[-1]
    if not hasattr(obj, leaf):
        raise ch.ScenarioError(f"unknown sweep parameter {key!r}")
    old = getattr(obj, leaf)
    if isinstance(old, bool):
        value = str(value).lower() in ("1", "true", "yes", "on")
    elif isinstance(old, int):
        value = int(value)
    elif isinstance(old, float):
        value = float(value)
    setattr(obj, leaf, value)
    scn.validate()
    return scn


def _run_one(args) -> dict:
    scn, seed = args
    eng = Engine(scn, seed)
    eng.run()
    out = dict(eng.log.summary)
    out["packet_log_digest"] = packet_log_digest(eng.packet_log)
    out["accuracy_curve"] = accuracy_curve(eng.log)
    return out


def packet_log_digest(lines: list[str]) -> str:
    import hashlib
    h = hashlib.sha256()
    for line in lines:
        h.update(line.encode())
        h.update(b"\n")
    return h.hexdigest()


def sweep(scn: ch.Scenario, param: str, values, seeds, parallel: bool = False) -> list[dict]:
    """One run per (value, seed); rows aggregate delivered-packet stats.

    Parallel execution farms runs to worker processes; each run is seeded
    independently, so the schedule of workers cannot change any result.
    """
    jobs = [(apply_override(scn, param, v), seed) for v in values for seed in seeds]
    if parallel:
        with ProcessPoolExecutor() as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    rows = []
    for i, v in enumerate(values):
        chunk = results[i * len(seeds) : (i + 1) * len(seeds)]
        delivered = [sum(r["delivered"].values()) for r in chunk]
        pooled: dict[int, list[float]] = {}
        for r in chunk:
            for received, frac in r["accuracy_curve"]:
                pooled.setdefault(received, []).append(frac)
        rows.append({
            "param": param,
            "value": v,
            "runs": len(chunk),
            "delivered_mean": float(np.mean(delivered)),
            "delivered_std": float(np.std(delivered)),
            "digests": [r["packet_log_digest"] for r in chunk],
            "accuracy_curve": [(k, float(np.mean(pooled[k]))) for k in sorted(pooled)],
        })
    return rows


def write_sweep_csv(rows: list[dict], path) -> None:
    with open(path, "w") as f:
        f.write("# bpnc-sweep v1\n")
        f.write("param,value,runs,delivered_mean,delivered_std\n")
        for r in rows:
            f.write(f"{r['param']},{r['value']},{r['runs']},"
                    f"{r['delivered_mean']},{r['delivered_std']}\n")


def write_outputs(eng: Engine, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    eng.log.write_csv(out / "metrics.csv")
    eng.log.write_summary(out / "summary.json")
    with open(out / "packets.log", "w") as f:
        for line in eng.packet_log:
            f.write(line + "\n")
