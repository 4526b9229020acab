"""Random linear network coding: padding, generations, encoding, recoding,
earliest (Gaussian) decoding, and rank-deficient decoding with the
precondition/column-reorder step.

Payloads live as numpy symbol arrays; byte conversion happens at the block
padding boundary (``gf.bytes_to_symbols``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gf
from .gf import FieldContext, gaussian_eliminate


class PaddingError(ValueError):
    pass


class TagLengthMismatch(ValueError):
    pass


# -- block padding ----------------------------------------------------------

def pad_block(data: bytes, packet_len: int, block_size: int) -> list[list[bytes]]:
    """Split data into groups of block_size packets of packet_len bytes.

    The byte stream is padded with a single 0x80 marker byte and then zeros
    up to the next group boundary.  The marker is always appended, so a data
    stream that exactly fills its final packet gains one extra packet that
    starts with 0x80; the rest of that group is zero fill.  This keeps
    unpadding unambiguous for every input length.
    """
    if packet_len <= 0:
        raise ValueError("packet_len must be positive")
    if block_size <= 0:
        raise ValueError("block_size must be positive")
    group_bytes = packet_len * block_size
    padded = bytearray(data)
    padded.append(0x80)
    rem = len(padded) % group_bytes
    if rem:
        padded.extend(b"\x00" * (group_bytes - rem))
    groups = []
    for g in range(0, len(padded), group_bytes):
        chunk = padded[g : g + group_bytes]
        groups.append(
            [bytes(chunk[i : i + packet_len]) for i in range(0, group_bytes, packet_len)]
        )
    return groups


def unpad_block(packets: list[bytes]) -> bytes:
    """Inverse of pad_block over the flattened packet list."""
    stream = b"".join(packets)
    end = len(stream)
    while end > 0 and stream[end - 1] == 0:
        end -= 1
    if end == 0 or stream[end - 1] != 0x80:
        raise PaddingError("missing 0x80 padding marker")
    return stream[: end - 1]


# -- domain types -----------------------------------------------------------

@dataclass
class CodedPacket:
    flow_id: object
    gen_id: int
    tag: np.ndarray        # h symbols
    payload: np.ndarray    # N symbols
    perm: tuple[int, ...] | None = None  # encoder-side column permutation

    def __post_init__(self):
        self.tag = np.asarray(self.tag, dtype=np.uint8)
        self.payload = np.asarray(self.payload, dtype=np.uint8)


@dataclass
class Generation:
    """Source-side packet block: up to block_size rows of packet_len symbols."""

    gen_id: int
    block_size: int
    packet_len: int
    source_rows: list[np.ndarray] = field(default_factory=list)

    def add_source_packet(self, row) -> None:
        row = np.asarray(row, dtype=np.uint8)
        if len(row) != self.packet_len:
            raise ValueError("source packet length mismatch")
        if len(self.source_rows) >= self.block_size:
            raise ValueError("generation already full")
        self.source_rows.append(row)

    @property
    def filled(self) -> int:
        return len(self.source_rows)

    @property
    def full(self) -> bool:
        return self.filled == self.block_size

    def matrix(self) -> np.ndarray:
        return np.array(self.source_rows, dtype=np.uint8).reshape(
            self.filled, self.packet_len
        )


# -- tag sampling -----------------------------------------------------------

def _sample_nonzero_tag(ctx: FieldContext, width: int, rng) -> np.ndarray:
    while True:
        tag = rng.integers(0, ctx.size, size=width, dtype=np.uint8)
        if tag.any():
            return tag


def sample_tag_matrix(ctx: FieldContext, h: int, rng, mode: str = "uniform") -> np.ndarray:
    """h x h random tag matrix.

    mode 'uniform' rejects all-zero rows only; 'rank_increasing' rejects any
    row dependent on the rows so far, so every new packet raises the rank.
    """
    rows: list[np.ndarray] = []
    while len(rows) < h:
        tag = _sample_nonzero_tag(ctx, h, rng)
        if mode == "rank_increasing" and rows:
            cand = np.array(rows + [tag], dtype=np.uint8)
            if gaussian_eliminate(ctx, cand)[1] <= len(rows):
                continue
        elif mode not in ("uniform", "rank_increasing"):
            raise ValueError(f"unknown tag mode {mode!r}")
        rows.append(tag)
    return np.array(rows, dtype=np.uint8)


def encode_generation(
    ctx: FieldContext,
    gen: Generation,
    count: int,
    rng,
    mode: str = "uniform",
    systematic_first: bool = False,
    flow_id=None,
    perm: tuple[int, ...] | None = None,
) -> list[CodedPacket]:
    """Emit coded packets whose tags cover the filled prefix of the block.

    A partially filled generation is encodable: tags are zero beyond the
    filled rows, which is what makes received coding matrices tend toward a
    lower-triangular staircase.
    """
    if gen.filled == 0:
        raise ValueError("generation holds no source rows")
    h = gen.block_size
    j = gen.filled
    X = gen.matrix()
    if mode not in ("uniform", "rank_increasing"):
        raise ValueError(f"unknown tag mode {mode!r}")
    out = []
    prev_tags: list[np.ndarray] = []
    prev_rank = 0
    for i in range(count):
        tag = np.zeros(h, dtype=np.uint8)
        if systematic_first and i < j:
            tag[i] = 1
        else:
            while True:
                t = _sample_nonzero_tag(ctx, j, rng)
                if mode == "rank_increasing" and prev_rank < j:
                    cand = np.array([p[:j] for p in prev_tags] + [t], dtype=np.uint8)
                    if gaussian_eliminate(ctx, cand)[1] <= prev_rank:
                        continue
                break
            tag[:j] = t
        prev_tags.append(tag)
        prev_rank = gaussian_eliminate(
            ctx, np.array([p[:j] for p in prev_tags], dtype=np.uint8)
        )[1]
        payload = ctx.matmul(tag[None, :j], X)[0]
        out.append(CodedPacket(flow_id, gen.gen_id, tag, payload, perm=perm))
    return out


def recode(ctx: FieldContext, buffered: list[CodedPacket], rng) -> CodedPacket:
    """Random GF recombination of buffered packets of one (flow, generation)."""
    if not buffered:
        raise ValueError("nothing to recode")
    first = buffered[0]
    for p in buffered[1:]:
        if p.flow_id != first.flow_id or p.gen_id != first.gen_id:
            raise ValueError("recode inputs must share flow and generation")
    tags = np.array([p.tag for p in buffered], dtype=np.uint8)
    payloads = np.array([p.payload for p in buffered], dtype=np.uint8)
    for _ in range(16):
        coeffs = rng.integers(0, ctx.size, size=len(buffered), dtype=np.uint8)
        tag = ctx.matmul(coeffs[None, :], tags)[0]
        if tag.any():
            payload = ctx.matmul(coeffs[None, :], payloads)[0]
            return CodedPacket(first.flow_id, first.gen_id, tag, payload, perm=first.perm)
    return CodedPacket(
        first.flow_id, first.gen_id, first.tag.copy(), first.payload.copy(), perm=first.perm
    )


# -- column reordering (precondition step) ---------------------------------

def precondition_reorder(ctx: FieldContext, G) -> tuple[np.ndarray, tuple[int, ...]]:
    """Greedy encoder-side column permutation.

    For each row r (after eliminating the contribution of earlier pivots),
    the earliest column with a nonzero entry is swapped into position r.  The
    returned permutation maps position -> original column so the decoder can
    un-permute recovered packets.
    """
    G = gf.validate_symbols(ctx, G)
    if G.ndim != 2 or G.size == 0:
        raise ValueError("matrix must be non-empty and 2-D")
    rows, cols = G.shape
    W = G.astype(np.uint8).copy()   # working copy, gets eliminated
    out = G.astype(np.uint8).copy()  # original values, columns permuted only
    perm = list(range(cols))
    pivot_rows: list[int] = []
    r = 0
    for row_idx in range(rows):
        if r >= cols:
            break
        # forward-eliminate prior pivots (pivot k lives at column k)
        for k, pr in enumerate(pivot_rows):
            f = int(W[row_idx, k])
            if f:
                W[row_idx] ^= ctx.scale_row(f, W[pr])
        nz = np.nonzero(W[row_idx, r:])[0]
        if len(nz) == 0:
            continue
        c = r + int(nz[0])
        if c != r:
            W[:, [r, c]] = W[:, [c, r]]
            out[:, [r, c]] = out[:, [c, r]]
            perm[r], perm[c] = perm[c], perm[r]
        W[row_idx] = ctx.scale_row(ctx.inv(int(W[row_idx, r])), W[row_idx])
        pivot_rows.append(row_idx)
        r += 1
    return out, tuple(perm)


# -- decoding ---------------------------------------------------------------

@dataclass
class DecoderState:
    """Per-generation accumulator for earliest or rank-deficient decoding.

    Single-owner mutable; distinct generations decode independently.
    """

    ctx: FieldContext
    block_size: int
    packet_len: int
    mode: str = "earliest"  # or "rank_deficient"
    min_weight_limit: int = 2

    def __post_init__(self):
        h, n = self.block_size, self.packet_len
        self.rows = np.zeros((0, h + n), dtype=np.uint8)
        self.rref = self.rows
        self.pivot_cols: list[int] = []
        self.rank = 0
        self.decoded_mask = np.zeros(h, dtype=bool)
        self.delivered: dict[int, np.ndarray] = {}
        self.perm: tuple[int, ...] | None = None
        self.received = 0

    @property
    def full_rank(self) -> bool:
        return self.rank == self.block_size

    def ingest(self, pkt: CodedPacket) -> list[tuple[int, np.ndarray]]:
        """Add one packet; return newly decoded (source_index, payload) pairs.

        Dependent (duplicate) rows change nothing.  Source indices are
        un-permuted through the encoder's column permutation.
        """
        if len(pkt.tag) != self.block_size:
            raise TagLengthMismatch(
                f"tag length {len(pkt.tag)} != block size {self.block_size}"
            )
        if len(pkt.payload) != self.packet_len:
            raise ValueError("payload length mismatch")
        if self.perm is None:
            self.perm = pkt.perm or tuple(range(self.block_size))
        self.received += 1
        row = np.concatenate([pkt.tag, pkt.payload])[None, :]
        stacked = np.concatenate([self.rref, row], axis=0)
        rref, rank, pivots = gaussian_eliminate(self.ctx, stacked)
        self.rref = rref[:rank]
        self.rank = rank
        self.pivot_cols = pivots
        self.rows = stacked  # rref of previous rows + new row; history equivalent
        h = self.block_size
        fresh = []
        for r, c in enumerate(pivots):
            if c >= h:
                continue
            tag_part = self.rref[r, :h]
            if tag_part.sum() == 1 and tag_part[c] == 1 and not self.decoded_mask[c]:
                src = self.perm[c]
                payload = self.rref[r, h:].copy()
                self.decoded_mask[c] = True
                self.delivered[src] = payload
                fresh.append((src, payload))
        return fresh

    def decoded_count(self) -> int:
        return int(self.decoded_mask.sum())

    def solve_rank_deficient(self) -> tuple[np.ndarray, np.ndarray]:
        return rank_deficient_solve(self, self.min_weight_limit)


def rank_deficient_solve(
    state: DecoderState, free_var_limit: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Per-symbol estimates and confidence from a possibly rank-deficient state.

    Returns (estimates (h, N) uint8, confidence (h, N) uint8) with confidence
    2 = certain (unique under current rank), 1 = heuristic (minimum-weight
    pick over the affine solution set), 0 = undecoded.  Rows are indexed by
    true source position (un-permuted).  Certain symbols always agree with
    earliest decoding; the heuristic is a stand-in for an LP lowest-weight
    decoder and is bounded to q^T candidate assignments per column.
    """
    if state.received == 0:
        raise ValueError("decoder state holds no rows")
    ctx = state.ctx
    h, n = state.block_size, state.packet_len
    T = state.min_weight_limit if free_var_limit is None else free_var_limit
    perm = state.perm or tuple(range(h))
    est = np.zeros((h, n), dtype=np.uint8)
    conf = np.zeros((h, n), dtype=np.uint8)
    tag_pivots = [c for c in state.pivot_cols if c < h]
    R = state.rref
    free_cols = [c for c in range(h) if c not in tag_pivots]
    # certain rows: pivot rows with no dependence on free columns
    heuristic_rows = []
    for r, c in enumerate(state.pivot_cols):
        if c >= h:
            continue
        if len(free_cols) == 0 or not R[r, free_cols].any():
            est[perm[c]] = R[r, h:]
            conf[perm[c]] = 2
        else:
            heuristic_rows.append((r, c))
    if free_cols and len(free_cols) <= T:
        q = ctx.size
        n_free = len(free_cols)
        # all q^n_free assignments of the free variables, lexicographic
        grids = np.meshgrid(*[np.arange(q, dtype=np.uint8)] * n_free, indexing="ij")
        A = np.stack([g.ravel() for g in grids], axis=1)  # (q^n_free, n_free)
        n_assign = A.shape[0]
        # candidate solutions W[a, j, l] for every column l
        W = np.zeros((n_assign, h, n), dtype=np.uint8)
        for fi, c in enumerate(free_cols):
            W[:, c, :] = A[:, fi][:, None]
        for r, c in zip(range(len(state.pivot_cols)), state.pivot_cols):
            if c >= h:
                continue
            contrib = np.zeros((n_assign, n), dtype=np.uint8)
            for fi, fc in enumerate(free_cols):
                g = int(R[r, fc])
                if g:
                    contrib ^= ctx.mul_table[g, A[:, fi]][:, None]
            W[:, c, :] = R[r, h:][None, :] ^ contrib
        weights = (W != 0).sum(axis=1)  # (n_assign, n)
        best = np.argmin(weights, axis=0)  # first minimal index, deterministic
        chosen = W[best, :, np.arange(n)].T  # (h, n)
        for r, c in heuristic_rows:
            est[perm[c]] = chosen[c]
            conf[perm[c]] = 1
        for c in free_cols:
            est[perm[c]] = chosen[c]
            conf[perm[c]] = 1
    return est, conf


# -- preconditioning experiment (Table III analog) --------------------------

def _prefix_pivot_ok(ctx: FieldContext, G: np.ndarray, p: int) -> bool:
    """Does column p-1 obtain a pivot from the first p rows, scanning columns
    left to right?  This is the condition for the p-th packet's reduced form
    to match the ideal (data-side) reduction."""
    sub = G[:p, :p]
    r_full = gaussian_eliminate(ctx, sub)[1] if p else 0
    if p == 1:
        return bool(G[0, 0])
    r_prev = gaussian_eliminate(ctx, G[:p, : p - 1])[1]
    return r_full - r_prev == 1


def prefix_equivalence_report(
    ctx: FieldContext,
    h: int,
    num_blocks: int,
    rng,
    reorder: bool,
    payload_len: int = 8,
    verify_payload_blocks: int = 0,
) -> np.ndarray:
    """Fraction of blocks, per packet position, whose preconditioned form is
    equivalent to the ideal reduced input.  Tags are sampled rank-increasing
    (each new packet raises the rank); data is uniform."""
    hits = np.zeros(h, dtype=np.int64)
    for b in range(num_blocks):
        G = sample_tag_matrix(ctx, h, rng, mode="rank_increasing")
        if reorder:
            G, _ = precondition_reorder(ctx, G)
        for p in range(1, h + 1):
            ok = _prefix_pivot_ok(ctx, G, p)
            if ok and b < verify_payload_blocks:
                X = rng.integers(0, ctx.size, size=(h, payload_len), dtype=np.uint8)
                Y = ctx.matmul(G, X)
                rref, _, pivots = gaussian_eliminate(
                    ctx, np.concatenate([G[:p], Y[:p]], axis=1)
                )
                ideal_rref, _, _ = gaussian_eliminate(ctx, G[:p])
                ideal = np.concatenate([ideal_rref, ctx.matmul(ideal_rref, X)], axis=1)
                assert np.array_equal(rref, ideal)
            hits[p - 1] += ok
    return hits / num_blocks
