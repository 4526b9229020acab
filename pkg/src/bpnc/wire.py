"""The five wire formats of the coordination protocol.

All multi-byte integers are little-endian with a 1-byte type tag first.
Link gains travel as q8.8 fixed point of (gain_db + 128); utilities as
q16.16 so receivers compare bit-exact values instead of floats.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from . import gf

TYPE_DIS = 0x01
TYPE_SYN = 0x02
TYPE_RTS = 0x03
TYPE_CTS = 0x04
TYPE_DATA = 0x05

TYPE_NAMES = {
    TYPE_DIS: "DIS",
    TYPE_SYN: "SYN",
    TYPE_RTS: "RTS",
    TYPE_CTS: "CTS",
    TYPE_DATA: "DATA",
}

MAX_PAYLOAD_BYTES = 500
GAIN_DB_BIAS = 128.0


class MalformedFrame(ValueError):
    pass


def encode_gain_db(gain_db: float) -> int:
    v = int(round((gain_db + GAIN_DB_BIAS) * 256))
    return max(0, min(0xFFFF, v))


def decode_gain_db(raw: int) -> float:
    return raw / 256.0 - GAIN_DB_BIAS


def encode_utility(u: float) -> int:
    v = int(round(u * 65536))
    return max(0, min(0xFFFFFFFF, v))


def decode_utility(raw: int) -> float:
    return raw / 65536.0


def pack_tag(tag, m: int) -> bytes:
    """Tag symbols on the wire: nibble-packed when m divides a byte, else one
    byte per symbol."""
    tag = list(int(t) for t in tag)
    if 8 % m:
        return bytes(tag)
    spb = 8 // m
    while len(tag) % spb:
        tag.append(0)
    return gf.symbols_to_bytes(tag, m)


def tag_wire_len(h: int, m: int) -> int:
    if 8 % m:
        return h
    spb = 8 // m
    return (h + spb - 1) // spb


def unpack_tag(raw: bytes, h: int, m: int) -> list[int]:
    if 8 % m:
        return list(raw[:h])
    return list(gf.bytes_to_symbols(raw, m))[:h]


@dataclass(frozen=True)
class DisFrame:
    sender: int
    next_channel: int
    neighbors: tuple[tuple[int, int, float], ...]  # (nbr id, channel, gain_db)

    def pack(self) -> bytes:
        out = bytearray([TYPE_DIS, self.sender, self.next_channel, len(self.neighbors)])
        for nbr, chan, gain_db in self.neighbors:
            out += struct.pack("<BBH", nbr, chan, encode_gain_db(gain_db))
        return bytes(out)


@dataclass(frozen=True)
class SynFrame:
    sender: int
    # one entry per virtual queue: (flow src, flow dst set with the entry's
    # destination listed first, backlog)
    entries: tuple[tuple[int, tuple[int, ...], int], ...]

    def pack(self) -> bytes:
        out = bytearray([TYPE_SYN, self.sender, len(self.entries)])
        for src, dsts, backlog in self.entries:
            out += bytes([src, len(dsts), *dsts])
            out += struct.pack("<H", min(backlog, 0xFFFF))
        return bytes(out)


@dataclass(frozen=True)
class RtsFrame:
    tx: int
    rx: int
    channel: int
    flow_index: int
    utility: float

    def pack(self) -> bytes:
        return struct.pack(
            "<BBBBBI", TYPE_RTS, self.tx, self.rx, self.channel, self.flow_index,
            encode_utility(self.utility),
        )

    def quantized_utility(self) -> float:
        return decode_utility(encode_utility(self.utility))


@dataclass(frozen=True)
class CtsFrame:
    rx: int
    tx: int
    channel: int

    def pack(self) -> bytes:
        return bytes([TYPE_CTS, self.rx, self.tx, self.channel])


@dataclass(frozen=True)
class DataFrame:
    flow_index: int
    gen_id: int
    block_size: int
    perm: tuple[int, ...]
    tag: tuple[int, ...]
    payload: bytes
    field_bits: int = 4

    def pack(self) -> bytes:
        if len(self.payload) > MAX_PAYLOAD_BYTES:
            raise MalformedFrame("payload exceeds 500 bytes")
        if len(self.perm) != self.block_size or len(self.tag) != self.block_size:
            raise MalformedFrame("perm/tag length must equal block size")
        out = bytearray([TYPE_DATA, self.flow_index])
        out += struct.pack("<H", self.gen_id)
        out.append(self.block_size)
        out += bytes(self.perm)
        out += pack_tag(self.tag, self.field_bits)
        out += self.payload
        return bytes(out)


def unpack(raw: bytes, field_bits: int = 4):
    """Decode any frame; raises MalformedFrame on garbage."""
    if not raw:
        raise MalformedFrame("empty frame")
    t = raw[0]
    try:
        if t == TYPE_DIS:
            sender, next_chan, n = raw[1], raw[2], raw[3]
            nbrs = []
            off = 4
            for _ in range(n):
                nbr, chan, g = struct.unpack_from("<BBH", raw, off)
                nbrs.append((nbr, chan, decode_gain_db(g)))
                off += 4
            if off != len(raw):
                raise MalformedFrame("trailing bytes in DIS")
            return DisFrame(sender, next_chan, tuple(nbrs))
        if t == TYPE_SYN:
            sender, n = raw[1], raw[2]
            off = 3
            entries = []
            for _ in range(n):
                src, ndst = raw[off], raw[off + 1]
                off += 2
                dsts = tuple(raw[off : off + ndst])
                if len(dsts) != ndst:
                    raise MalformedFrame("short SYN entry")
                off += ndst
                (backlog,) = struct.unpack_from("<H", raw, off)
                off += 2
                entries.append((src, dsts, backlog))
            if off != len(raw):
                raise MalformedFrame("trailing bytes in SYN")
            return SynFrame(sender, tuple(entries))
        if t == TYPE_RTS:
            _, tx, rx, chan, fidx, u = struct.unpack("<BBBBBI", raw)
            return RtsFrame(tx, rx, chan, fidx, decode_utility(u))
        if t == TYPE_CTS:
            if len(raw) != 4:
                raise MalformedFrame("bad CTS length")
            return CtsFrame(raw[1], raw[2], raw[3])
        if t == TYPE_DATA:
            fidx = raw[1]
            (gen_id,) = struct.unpack_from("<H", raw, 2)
            h = raw[4]
            off = 5
            perm = tuple(raw[off : off + h])
            off += h
            tl = tag_wire_len(h, field_bits)
            tag = tuple(unpack_tag(raw[off : off + tl], h, field_bits))
            off += tl
            if len(perm) != h or len(tag) != h:
                raise MalformedFrame("short DATA header")
            return DataFrame(fidx, gen_id, h, perm, tag, bytes(raw[off:]), field_bits)
    except struct.error as e:
        raise MalformedFrame(str(e)) from e
    raise MalformedFrame(f"unknown frame type 0x{t:02x}")
