import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bpnc import wire
from bpnc.wire import (
    CtsFrame,
    DataFrame,
    DisFrame,
    MalformedFrame,
    RtsFrame,
    SynFrame,
    unpack,
)


def test_dis_roundtrip():
    f = DisFrame(3, 1, ((2, 0, -55.0), (5, 2, -70.0)))
    raw = f.pack()
    assert raw[0] == 0x01
    assert len(raw) == 4 + 2 * 4
    g = unpack(raw)
    assert g.sender == 3 and g.next_channel == 1
    assert len(g.neighbors) == 2
    assert g.neighbors[0][2] == pytest.approx(-55.0, abs=1 / 256)


def test_syn_roundtrip_multicast_entries():
    f = SynFrame(4, ((1, (6, 7), 12), (1, (7, 6), 3)))
    g = unpack(f.pack())
    assert g == f


def test_syn_empty_still_packs():
    f = SynFrame(2, ())
    raw = f.pack()
    assert len(raw) == 3
    assert unpack(raw) == f


def test_rts_utility_quantized_roundtrip():
    f = RtsFrame(3, 4, 1, 0, 6.125)
    g = unpack(f.pack())
    assert g.utility == 6.125
    assert g.tx == 3 and g.rx == 4 and g.channel == 1


def test_cts_roundtrip():
    f = CtsFrame(4, 3, 2)
    raw = f.pack()
    assert len(raw) == 4
    assert unpack(raw) == f


def test_data_roundtrip_nibble_tag():
    f = DataFrame(0, 7, 4, (0, 1, 2, 3), (0xA, 0, 0x3, 0x1), b"hello", 4)
    raw = f.pack()
    g = unpack(raw, field_bits=4)
    assert g.gen_id == 7
    assert g.tag == (0xA, 0, 0x3, 0x1)
    assert g.perm == (0, 1, 2, 3)
    assert g.payload == b"hello"


def test_data_odd_block_size_tag_padding():
    f = DataFrame(1, 0, 3, (2, 0, 1), (1, 2, 3), b"\x00" * 10, 4)
    g = unpack(f.pack(), field_bits=4)
    assert g.tag == (1, 2, 3)
    assert g.perm == (2, 0, 1)


def test_data_byte_tag_for_m8():
    f = DataFrame(0, 1, 2, (0, 1), (200, 3), b"xy", 8)
    g = unpack(f.pack(), field_bits=8)
    assert g.tag == (200, 3)


def test_data_payload_limit():
    with pytest.raises(MalformedFrame):
        DataFrame(0, 0, 1, (0,), (1,), b"\x00" * 501, 4).pack()


def test_unknown_type_rejected():
    with pytest.raises(MalformedFrame):
        unpack(b"\x09\x01")
    with pytest.raises(MalformedFrame):
        unpack(b"")


def test_truncated_frames_rejected():
    raw = SynFrame(4, ((1, (7,), 5),)).pack()
    with pytest.raises(MalformedFrame):
        unpack(raw[:-1])
    with pytest.raises(MalformedFrame):
        unpack(DisFrame(1, 0, ((2, 0, -50.0),)).pack() + b"\x00")


@given(
    st.integers(0, 255),
    st.integers(0, 65535),
    st.lists(st.integers(0, 15), min_size=1, max_size=8),
    st.binary(max_size=64),
)
@settings(max_examples=200)
def test_data_roundtrip_property(fidx, gen, tag, payload):
    h = len(tag)
    perm = tuple(range(h))
    f = DataFrame(fidx, gen, h, perm, tuple(tag), payload, 4)
    g = unpack(f.pack(), field_bits=4)
    assert (g.flow_index, g.gen_id, g.tag, g.payload) == (fidx, gen, tuple(tag), payload)


def test_gain_encoding_monotone_and_clamped():
    assert wire.encode_gain_db(-200.0) == 0
    assert wire.encode_gain_db(200.0) == 0xFFFF
    assert wire.decode_gain_db(wire.encode_gain_db(-55.0)) == pytest.approx(-55.0, abs=1 / 256)
