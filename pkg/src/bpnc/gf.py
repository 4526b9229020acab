"""GF(2^m) arithmetic and matrix algebra over field symbols.

Symbols are plain ints (or numpy uint8 arrays) in [0, 2^m).  Matrices are
2-D numpy uint8 arrays, row-major.  All decoding paths build on the
table-driven multiply here; ``mul_slow`` is the independent shift-reduce
reference kept for cross-checking.
"""

from __future__ import annotations

import numpy as np

# Reduction polynomials (primitive for each width), as integer bitmasks
# including the leading term.  m=4 uses x^4 + x + 1 = 0x13.
DEFAULT_POLYS = {
    1: 0x3,
    2: 0x7,
    3: 0xB,
    4: 0x13,
    5: 0x25,
    6: 0x43,
    7: 0x89,
    8: 0x11D,
}


class SingularMatrixError(ValueError):
    """Matrix has rank below its dimension; inversion impossible."""


def mul_slow(a: int, b: int, m: int, poly: int) -> int:
    """Carry-less multiply then reduce mod poly.  Reference implementation."""
    prod = 0
    aa = a
    bb = b
    while bb:
        if bb & 1:
            prod ^= aa
        bb >>= 1
        aa <<= 1
    # reduce
    for bit in range(2 * m - 2, m - 1, -1):
        if prod & (1 << bit):
            prod ^= poly << (bit - m)
    return prod


class FieldContext:
    """Immutable GF(2^m) context with precomputed exp/log tables.

    Safe to share across threads; every operation is a pure function.
    """

    def __init__(self, m: int = 4, primitive_poly: int | None = None):
        if not 1 <= m <= 8:
            raise ValueError(f"field bit-width must be in 1..8, got {m}")
        self.m = m
        self.size = 1 << m
        self.poly = primitive_poly if primitive_poly is not None else DEFAULT_POLYS[m]
        order = self.size - 1
        exp = np.zeros(2 * order if order else 1, dtype=np.uint8)
        log = np.zeros(self.size, dtype=np.int32)
        x = 1
        for i in range(order):
            exp[i] = x
            log[x] = i
            x <<= 1
            if x & self.size:
                x ^= self.poly
        if x != 1:
            raise ValueError(f"0x{self.poly:x} is not primitive for m={m}")
        for i in range(order, len(exp)):
            exp[i] = exp[i - order]
        self.exp_table = exp
        self.log_table = log
        self.order = order
        # full multiplication table; at most 256x256, cheap and fast to index
        a = np.arange(self.size, dtype=np.int32)
        la = log[a]
        tbl = exp[(la[:, None] + la[None, :]) % max(order, 1)].astype(np.uint8)
        tbl[0, :] = 0
        tbl[:, 0] = 0
        self.mul_table = tbl
        inv = np.zeros(self.size, dtype=np.uint8)
        for v in range(1, self.size):
            inv[v] = exp[(order - log[v]) % max(order, 1)]
        self.inv_table = inv

    # -- scalar ops ---------------------------------------------------------

    @staticmethod
    def add(a: int, b: int) -> int:
        return a ^ b

    def mul(self, a: int, b: int) -> int:
        return int(self.mul_table[a, b])

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("no inverse of 0")
        return int(self.inv_table[a])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def exp(self, k: int) -> int:
        return int(self.exp_table[k % max(self.order, 1)])

    def log(self, a: int) -> int:
        if a == 0:
            raise ValueError("log of 0 undefined")
        return int(self.log_table[a])

    # -- vector ops ---------------------------------------------------------

    def mul_arr(self, a, b):
        """Elementwise product; a and b broadcast against each other."""
        a = np.asarray(a, dtype=np.uint8)
        b = np.asarray(b, dtype=np.uint8)
        return self.mul_table[a, b]

    def scale_row(self, c: int, row):
        return self.mul_table[c, np.asarray(row, dtype=np.uint8)]

    def matmul(self, A, B):
        """Matrix product over GF(2^m).  A is (r,k), B is (k,c)."""
        A = np.asarray(A, dtype=np.uint8)
        B = np.asarray(B, dtype=np.uint8)
        out = np.zeros((A.shape[0], B.shape[1]), dtype=np.uint8)
        for k in range(A.shape[1]):
            # outer product of column k of A with row k of B, accumulated by xor
            col = A[:, k]
            nz = col != 0
            if not nz.any():
                continue
            out[nz] ^= self.mul_table[col[nz][:, None], B[k][None, :]]
        return out


def validate_symbols(ctx: FieldContext, M) -> np.ndarray:
    M = np.asarray(M, dtype=np.uint8)
    if M.size and M.max() >= ctx.size:
        raise ValueError(f"symbol out of range for GF(2^{ctx.m})")
    return M


def gaussian_eliminate(ctx: FieldContext, M) -> tuple[np.ndarray, int, list[int]]:
    """Reduced row-echelon form over GF(2^m).

    Returns (rref, rank, pivot_cols).  Pivot columns identify the
    coordinates recoverable from the rows so far.
    """
    R = validate_symbols(ctx, M).copy()
    if R.ndim != 2 or R.size == 0:
        raise ValueError("matrix must be non-empty and 2-D")
    rows, cols = R.shape
    pivot_cols: list[int] = []
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        pivot = None
        for rr in range(r, rows):
            if R[rr, c]:
                pivot = rr
                break
        if pivot is None:
            continue
        if pivot != r:
            R[[r, pivot]] = R[[pivot, r]]
        if R[r, c] != 1:
            R[r] = ctx.scale_row(ctx.inv(int(R[r, c])), R[r])
        # eliminate the column everywhere else
        col = R[:, c].copy()
        col[r] = 0
        nz = col != 0
        if nz.any():
            R[nz] ^= ctx.mul_table[col[nz][:, None], R[r][None, :]]
        pivot_cols.append(c)
        r += 1
    return R, len(pivot_cols), pivot_cols


def rank(ctx: FieldContext, M) -> int:
    return gaussian_eliminate(ctx, M)[1]


def invert(ctx: FieldContext, M) -> np.ndarray:
    """Inverse over GF(2^m); raises SingularMatrixError if rank < n."""
    M = validate_symbols(ctx, M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    n = M.shape[0]
    aug = np.concatenate([M, np.eye(n, dtype=np.uint8)], axis=1)
    rref, rk, pivots = gaussian_eliminate(ctx, aug)
    if rk < n or pivots[:n] != list(range(n)):
        raise SingularMatrixError(f"rank {rank(ctx, M)} < {n}")
    return rref[:, n:]


# -- symbol <-> byte packing -----------------------------------------------

def symbols_per_byte(m: int) -> int:
    if 8 % m != 0:
        raise ValueError(f"m={m} does not divide a byte; no byte packing defined")
    return 8 // m


def bytes_to_symbols(data: bytes, m: int) -> np.ndarray:
    """Split bytes into GF(2^m) symbols, most-significant group first."""
    spb = symbols_per_byte(m)
    arr = np.frombuffer(bytes(data), dtype=np.uint8)
    if spb == 1:
        return arr.copy()
    mask = (1 << m) - 1
    shifts = [(spb - 1 - i) * m for i in range(spb)]
    out = np.empty(len(arr) * spb, dtype=np.uint8)
    for i, sh in enumerate(shifts):
        out[i::spb] = (arr >> sh) & mask
    return out


def symbols_to_bytes(symbols, m: int) -> bytes:
    spb = symbols_per_byte(m)
    arr = np.asarray(symbols, dtype=np.uint8)
    if spb == 1:
        return arr.tobytes()
    if len(arr) % spb:
        raise ValueError("symbol count not a multiple of symbols-per-byte")
    out = np.zeros(len(arr) // spb, dtype=np.uint8)
    for i in range(spb):
        out |= (arr[i::spb] & ((1 << m) - 1)) << ((spb - 1 - i) * m)
    return out.tobytes()
