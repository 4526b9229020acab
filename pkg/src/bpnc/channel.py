"""Software stand-in for the RF emulator and PHY: per-link gains, SINR, the
BER/link-rate model, and the four canonical topologies.

All functions are pure over the scenario config; the engine owns time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import yaml


class ScenarioError(ValueError):
    """Config validation failure; message names the offending field."""


def dbm_to_mw(dbm: float) -> float:
    return 10 ** (dbm / 10)


def db_to_linear(db: float) -> float:
    return 10 ** (db / 10)


@dataclass
class LinkConfig:
    src: int
    dst: int
    gain_db: float
    channel: int | None = None  # None = every channel


@dataclass
class FlowConfig:
    src: int
    dsts: tuple[int, ...]
    arrival_rate: float  # packets per second (Poisson)

    def __post_init__(self):
        self.dsts = tuple(self.dsts)


@dataclass
class TimingConfig:
    channel_dwell_s: float = 2.0
    discovery_s: float = 6.0       # TTR = channels x dwell
    flow_update_s: float = 20.0
    negotiation_s: float = 60.0    # TDT
    data_s: float = 30.0
    syn_interval_s: float = 2.0
    rts_interval_s: float = 0.5
    cts_wait_s: float = 0.25
    sample_interval_s: float = 5.0


@dataclass
class CodingConfig:
    enabled: bool = False
    block_size: int = 4
    field_bits: int = 4
    decoder: str = "earliest"      # or "rank_deficient"
    packet_len: int = 500          # bytes
    redundancy: float = 0.25       # extra coded packets per generation
    gen_timeout_s: float = 10.0    # close a partial generation after this
    tag_mode: str = "uniform"
    min_weight_limit: int = 2

    def validate(self):
        if not 1 <= self.field_bits <= 8:
            raise ScenarioError(f"coding.field_bits: must be 1..8, got {self.field_bits}")
        if self.block_size < 1 or self.block_size > 255:
            raise ScenarioError("coding.block_size: must be 1..255")
        if self.decoder not in ("earliest", "rank_deficient"):
            raise ScenarioError(f"coding.decoder: unknown mode {self.decoder!r}")
        if not 1 <= self.packet_len <= 500:
            raise ScenarioError("coding.packet_len: must be 1..500 bytes")


@dataclass
class PowerConfig:
    min_dbm: float = -15.0
    max_dbm: float = -5.0
    init_dbm: float = -10.0
    target_snr_db: float = 15.0


@dataclass
class PhyConfig:
    sample_rate: float = 250e3
    fft_len: int = 512
    cp_len: int = 128
    occupied: int = 200
    modulation: str = "bpsk"
    noise_floor_dbm: float = -90.0
    sensitivity_dbm: float = -88.0
    busy_threshold_db: float = 6.0
    listen_power_frac: float = 0.1

    def bit_rate(self) -> float:
        """OFDM goodput in bits/s: symbol rate x occupied fraction x CP
        efficiency x bits per carrier (BPSK = 1)."""
        occ = self.occupied / self.fft_len
        cp_eff = self.fft_len / (self.fft_len + self.cp_len)
        return self.sample_rate * occ * cp_eff


@dataclass
class Scenario:
    name: str
    num_nodes: int
    channels: list[float]
    links: list[LinkConfig]
    flows: list[FlowConfig]
    timing: TimingConfig = field(default_factory=TimingConfig)
    coding: CodingConfig = field(default_factory=CodingConfig)
    power: PowerConfig = field(default_factory=PowerConfig)
    phy: PhyConfig = field(default_factory=PhyConfig)
    frame_loss: float = 0.0
    sensing_enabled: bool = True
    seed: int = 0
    duration_s: float = 600.0

    def __post_init__(self):
        self._gain_map: dict[tuple[int, int, int | None], float] = {}
        for l in self.links:
            self._gain_map[(l.src, l.dst, l.channel)] = l.gain_db

    def validate(self):
        nodes = set(range(1, self.num_nodes + 1))
        if not self.channels:
            raise ScenarioError("channels: need at least one channel")
        for l in self.links:
            if l.src not in nodes or l.dst not in nodes:
                raise ScenarioError(f"links: node {l.src}-{l.dst} outside 1..{self.num_nodes}")
            if l.channel is not None and not 0 <= l.channel < len(self.channels):
                raise ScenarioError(f"links: channel index {l.channel} out of range")
        if not self.flows:
            raise ScenarioError("flows: need at least one flow")
        for f in self.flows:
            if f.src not in nodes or not set(f.dsts) <= nodes:
                raise ScenarioError(f"flows: flow {f.src}->{f.dsts} references unknown node")
            if f.src in f.dsts:
                raise ScenarioError("flows: source cannot be a destination")
            if f.arrival_rate < 0:
                raise ScenarioError("flows: arrival_rate must be >= 0")
        if not 0 <= self.frame_loss < 1:
            raise ScenarioError("frame_loss: must be in [0, 1)")
        if self.duration_s < 0:
            raise ScenarioError("duration_s: must be >= 0")
        self.coding.validate()
        return self

    def gain_db(self, i: int, j: int, chan: int) -> float:
        """Directional lookup with symmetric fallback; -inf if disconnected."""
        for key in ((i, j, chan), (j, i, chan), (i, j, None), (j, i, None)):
            if key in self._gain_map:
                return self._gain_map[key]
        return float("-inf")

    def connected(self, i: int, j: int) -> bool:
        return any(self.gain_db(i, j, c) > float("-inf") for c in range(len(self.channels)))


# -- SNR / BER / rate -------------------------------------------------------

def link_snr(
    scn: Scenario,
    tx_power_dbm: float,
    link: tuple[int, int],
    chan: int,
    concurrent: list[tuple[int, float]] = (),
) -> float:
    """Linear SINR at the receiver; concurrent is [(other tx node, power dbm)]."""
    i, j = link
    g = scn.gain_db(i, j, chan)
    if g == float("-inf"):
        return 0.0
    signal = dbm_to_mw(tx_power_dbm + g)
    noise = dbm_to_mw(scn.phy.noise_floor_dbm)
    interference = 0.0
    for k, p in concurrent:
        if k in (i, j):
            continue
        gk = scn.gain_db(k, j, chan)
        if gk > float("-inf"):
            interference += dbm_to_mw(p + gk)
    return signal / (noise + interference)


def ber(modulation: str, sinr: float) -> float:
    """Bit-error probability; BPSK uses Q(sqrt(2*SINR)) via erfc."""
    if modulation != "bpsk":
        raise ScenarioError(f"modulation: unsupported {modulation!r}")
    if sinr <= 0:
        return 0.5
    return 0.5 * math.erfc(math.sqrt(sinr))


def frame_success_prob(scn: Scenario, sinr: float, frame_len_bytes: int) -> float:
    p_bit = ber(scn.phy.modulation, sinr)
    return (1.0 - p_bit) ** (8 * frame_len_bytes)


def link_rate(scn: Scenario, sinr: float, frame_len_bytes: int) -> tuple[float, float]:
    """(c_ij in packets/s, frame success probability)."""
    p = frame_success_prob(scn, sinr, frame_len_bytes)
    bits = 8 * frame_len_bytes
    return scn.phy.bit_rate() * p / bits, p


def rx_power_dbm(scn: Scenario, tx_power_dbm: float, i: int, j: int, chan: int) -> float:
    g = scn.gain_db(i, j, chan)
    return tx_power_dbm + g if g > float("-inf") else float("-inf")


# -- canonical topologies ---------------------------------------------------

STRONG_GAIN_DB = -55.0  # 25 dB SNR at -10 dBm over a -90 dBm floor
WEAK_GAIN_DB = -70.0    # 10 dB SNR

CHANNELS_GHZ = [2410.0, 2430.0, 2460.0]  # MHz labels per the radio config


def _links(pairs, strong=True):
    g = STRONG_GAIN_DB if strong else WEAK_GAIN_DB
    return [LinkConfig(a, b, g) for a, b in pairs]


def line7(seed: int = 0) -> Scenario:
    """Seven nodes in a line; single unicast flow 1 -> 7, no coding."""
    return Scenario(
        name="line7",
        num_nodes=7,
        channels=list(CHANNELS_GHZ),
        links=_links([(i, i + 1) for i in range(1, 7)]),
        flows=[FlowConfig(1, (7,), arrival_rate=1.2)],
        coding=CodingConfig(enabled=False, block_size=1),
        seed=seed,
    )


def ring7(seed: int = 0) -> Scenario:
    """Seven-node ring: two node-disjoint routes 1-2-6-7 and 1-3-4-5-7.

    The short route's first hop (1,2) is strong and (1,3) weak, so node 2 is
    scheduled more, as in the reference layout.
    """
    links = _links([(1, 2), (2, 6), (6, 7), (3, 4), (4, 5), (5, 7)])
    links.append(LinkConfig(1, 3, WEAK_GAIN_DB))
    return Scenario(
        name="ring7",
        num_nodes=7,
        channels=list(CHANNELS_GHZ),
        links=links,
        flows=[FlowConfig(1, (7,), arrival_rate=1.2)],
        coding=CodingConfig(enabled=False, block_size=1),
        seed=seed,
    )


def grid6(seed: int = 0) -> Scenario:
    """2x3 grid, source 1 (corner) to destination 6 (opposite corner)."""
    return Scenario(
        name="grid6",
        num_nodes=6,
        channels=list(CHANNELS_GHZ),
        links=_links([(1, 2), (2, 3), (4, 5), (5, 6), (1, 4), (2, 5), (3, 6)]),
        flows=[FlowConfig(1, (6,), arrival_rate=1.2)],
        coding=CodingConfig(enabled=False, block_size=1),
        seed=seed,
    )


def butterfly7(seed: int = 0) -> Scenario:
    """Butterfly: source 1 multicasts to 6 and 7 through relays 2-5; a packet
    counts toward throughput only when both destinations decode it."""
    return Scenario(
        name="butterfly7",
        num_nodes=7,
        channels=list(CHANNELS_GHZ),
        links=_links(
            [(1, 2), (1, 3), (2, 4), (3, 4), (4, 5), (2, 6), (3, 7), (5, 6), (5, 7)]
        ),
        flows=[FlowConfig(1, (6, 7), arrival_rate=1.0)],
        coding=CodingConfig(enabled=True, block_size=4, decoder="earliest",
                            redundancy=0.5),
        seed=seed,
    )


BUILTINS = {"line7": line7, "ring7": ring7, "grid6": grid6, "butterfly7": butterfly7}


def builtin_scenarios() -> dict[str, Scenario]:
    return {name: fn() for name, fn in BUILTINS.items()}


# -- scenario files ---------------------------------------------------------

def scenario_to_dict(scn: Scenario) -> dict:
    d = asdict(scn)
    d.pop("_gain_map", None)
    return d


def save_scenario(scn: Scenario, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(scenario_to_dict(scn), fh, sort_keys=False)


def scenario_from_dict(d: dict) -> Scenario:
    try:
        scn = Scenario(
            name=d.get("name", "unnamed"),
            num_nodes=int(d["num_nodes"]),
            channels=[float(c) for c in d["channels"]],
            links=[LinkConfig(**l) for l in d["links"]],
            flows=[FlowConfig(f["src"], tuple(f["dsts"]), float(f["arrival_rate"]))
                   for f in d["flows"]],
            timing=TimingConfig(**d.get("timing", {})),
            coding=CodingConfig(**d.get("coding", {})),
            power=PowerConfig(**d.get("power", {})),
            phy=PhyConfig(**d.get("phy", {})),
            frame_loss=float(d.get("frame_loss", 0.0)),
            sensing_enabled=bool(d.get("sensing_enabled", True)),
            seed=int(d.get("seed", 0)),
            duration_s=float(d.get("duration_s", 600.0)),
        )
    except (KeyError, TypeError) as e:
        raise ScenarioError(f"scenario file: {e}") from e
    return scn.validate()


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        d = yaml.safe_load(fh)
    if not isinstance(d, dict):
        raise ScenarioError("scenario file: top level must be a mapping")
    return scenario_from_dict(d)
