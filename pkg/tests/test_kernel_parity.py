"""Compiled backend vs pure backend: results must be bit-identical.

The compiled engine works in 128-bit registers with a bounded alignment
window, where the pure engine uses exact big integers. Parity is exhaustive
at width 8, sampled at the wider widths, and targeted at the window
boundary (operand pairs with exponent gaps around the 120-bit alignment
cutoff, where the sticky shortcut takes over from exact arithmetic).
"""

import random

import numpy as np
import pytest

from taperbench import formats as F
from taperbench import kernels as K
from taperbench import _pykernels as P

C = pytest.importorskip("taperbench._ckernels")

ALL_OPS = [P.OP_ADD, P.OP_SUB, P.OP_MUL, P.OP_DIV]
UN_OPS = [P.OP_SQRT, P.OP_NEG, P.OP_ABS]
FMT8 = [F.FLOAT8_E4M3, F.POSIT8, F.TAKUM8]
FMT16 = [F.FLOAT16, F.BFLOAT16, F.POSIT16, F.TAKUM16]
FMTWIDE = [F.FLOAT32, F.FLOAT64, F.POSIT32, F.POSIT64, F.TAKUM32, F.TAKUM64]


@pytest.mark.parametrize("fid", FMT8, ids=lambda f: f.name)
def test_exhaustive_8bit_binary(fid):
    fmt = fid.fmt
    for op in ALL_OPS:
        for a in range(256):
            for b in range(256):
                assert C.arith(fmt, op, a, b) == P.arith(fmt, op, a, b), \
                    (fid.name, op, hex(a), hex(b))


@pytest.mark.parametrize("fid", FMT8, ids=lambda f: f.name)
def test_exhaustive_8bit_unary_decode_compare(fid):
    fmt = fid.fmt
    for a in range(256):
        assert C.decode(fmt, a) == P.decode(fmt, a)
        assert C.classify(fmt, a) == P.classify(fmt, a)
        for op in UN_OPS:
            assert C.arith(fmt, op, a, 0) == P.arith(fmt, op, a, 0)
    for a in range(0, 256, 3):
        for b in range(256):
            assert C.compare(fmt, a, b) == P.compare(fmt, a, b)


@pytest.mark.parametrize("fid", FMT16, ids=lambda f: f.name)
def test_16bit_decode_exhaustive_arith_sampled(fid):
    fmt = fid.fmt
    for a in range(1 << 16):
        assert C.decode(fmt, a) == P.decode(fmt, a)
    rng = random.Random(fid.fmt)
    for i in range(20000):
        a = rng.getrandbits(16)
        b = rng.getrandbits(16)
        op = ALL_OPS[i & 3]
        assert C.arith(fmt, op, a, b) == P.arith(fmt, op, a, b), \
            (fid.name, op, hex(a), hex(b))
        if i % 8 == 0:
            op = UN_OPS[(i >> 3) % 3]
            assert C.arith(fmt, op, a, 0) == P.arith(fmt, op, a, 0)


@pytest.mark.parametrize("fid", FMTWIDE, ids=lambda f: f.name)
def test_wide_sampled_parity(fid):
    fmt, w = fid.fmt, fid.width
    rng = random.Random(fid.fmt * 7)
    for i in range(8000):
        a = rng.getrandbits(w)
        b = rng.getrandbits(w)
        if i % 5 == 0:
            b = (a + rng.randrange(-3, 4)) & ((1 << w) - 1)  # cancellation
        op = ALL_OPS[i & 3]
        assert C.arith(fmt, op, a, b) == P.arith(fmt, op, a, b), \
            (fid.name, op, hex(a), hex(b))
        if i % 10 == 0:
            assert C.decode(fmt, a) == P.decode(fmt, a)
            assert C.compare(fmt, a, b) == P.compare(fmt, a, b)
            for op in UN_OPS:
                assert C.arith(fmt, op, a, 0) == P.arith(fmt, op, a, 0)


@pytest.mark.parametrize("fid", [F.FLOAT32, F.FLOAT64, F.POSIT64, F.TAKUM64],
                         ids=lambda f: f.name)
def test_alignment_window_boundary(fid):
    """a +/- b with exponent gaps straddling the 120-bit window, where the
    compiled engine switches from exact alignment to the sticky shortcut."""
    fmt = fid.fmt
    from taperbench.xreal import XReal

    one = F.encode(fid, 1)
    neg = lambda c: P.arith(fmt, P.OP_NEG, c, 0)
    small = []
    for gap in range(40, 150):
        c = F.encode(fid, XReal.from_parts(0, 1, -gap))
        if P.classify(fmt, c)[0] == P.CLS_REAL:
            small.append(c)
    tops = [one, F.encode(fid, XReal.from_parts(0, 1, 1)),
            F.encode(fid, XReal.from_parts(0, (1 << 52) + 1, -52))]
    for a in tops:
        for b in small:
            for x, y in [(a, b), (b, a), (a, neg(b)), (neg(a), b)]:
                for op in (P.OP_ADD, P.OP_SUB):
                    assert C.arith(fmt, op, x, y) == P.arith(fmt, op, x, y), \
                        (fid.name, op, hex(x), hex(y))


def test_float64_subnormal_region_parity():
    fmt = F.FLOAT64.fmt
    rng = random.Random(7)
    for _ in range(4000):
        a = rng.getrandbits(52) | (rng.getrandbits(1) << 63)  # subnormals
        b = rng.getrandbits(52) | (rng.getrandbits(1) << 63)
        for op in ALL_OPS:
            assert C.arith(fmt, op, a, b) == P.arith(fmt, op, a, b)


def test_encode_parts_parity_random():
    rng = random.Random(0xE11C0DE)
    for fid in F.ALL_FORMATS:
        fmt = fid.fmt
        for _ in range(4000):
            bl = rng.randint(1, 120)
            sig = (1 << (bl - 1)) | rng.getrandbits(bl - 1)
            exp = rng.randint(-1300, 1300)
            sign = rng.getrandbits(1)
            sticky = rng.getrandbits(1) if bl >= 66 else 0
            got = C.encode_parts(fmt, P.CLS_REAL, sign, sig, exp, sticky)
            want = P.encode_parts(fmt, P.CLS_REAL, sign, sig, exp, sticky)
            assert got == want, (fid.name, sign, sig, exp, sticky)
        for cls in (P.CLS_ZERO, P.CLS_NAR, P.CLS_INF):
            for sign in (0, 1):
                assert C.encode_parts(fmt, cls, sign, 0, 0, 0) == \
                    P.encode_parts(fmt, cls, sign, 0, 0, 0)


def test_convert_parity_all_pairs_sampled():
    rng = random.Random(0xC0)
    for src in F.ALL_FORMATS:
        codes = [0, 1, 1 << (src.width - 1), (1 << src.width) - 1]
        codes += [rng.getrandbits(src.width) for _ in range(40)]
        for dst in F.ALL_FORMATS:
            for c in codes:
                assert C.convert(src.fmt, dst.fmt, c) == \
                    P.convert(src.fmt, dst.fmt, c), (src.name, dst.name, hex(c))


def test_rejects_bad_ids():
    with pytest.raises(ValueError):
        C.decode(0x0707, 0)
    with pytest.raises(ValueError):
        C.arith(F.FLOAT64.fmt, 9, 0, 0)


def test_oversized_significand_parity():
    # > 128-bit significands are folded into sticky, matching the pure path
    for sig in ((1 << 130) + 1, (1 << 159) - 1, 687979333755864660780290763621662720 << 40):
        for fmt in (F.FLOAT64.fmt, F.BFLOAT16.fmt, F.TAKUM16.fmt):
            assert C.encode_parts(fmt, P.CLS_REAL, 0, sig, -100, 0) == \
                P.encode_parts(fmt, P.CLS_REAL, 0, sig, -100, 0)


# --- vector kernels ----------------------------------------------------------

def _rand_codes(rng, w, n):
    return np.array([rng.getrandbits(w) for _ in range(n)], dtype=np.uint64)


@pytest.mark.parametrize("fid", [F.FLOAT64, F.POSIT32, F.TAKUM16],
                         ids=lambda f: f.name)
def test_vector_elementwise_parity(fid):
    fmt, w = fid.fmt, fid.width
    rng = random.Random(fid.fmt + 1)
    n = 257
    a = _rand_codes(rng, w, n)
    b = _rand_codes(rng, w, n)
    for op in ALL_OPS + UN_OPS:
        o1 = np.zeros(n, dtype=np.uint64)
        o2 = np.zeros(n, dtype=np.uint64)
        K.pure.v_ew(fmt, op, a, b, o1)
        K.ext.v_ew(fmt, op, a, b, o2)
        assert np.array_equal(o1, o2)
    o1 = np.zeros(n, dtype=np.uint64)
    o2 = np.zeros(n, dtype=np.uint64)
    alpha = a[0]
    K.pure.v_scalar(fmt, P.OP_MUL, a, alpha, o1)
    K.ext.v_scalar(fmt, P.OP_MUL, a, alpha, o2)
    assert np.array_equal(o1, o2)
    y1, y2 = b.copy(), b.copy()
    K.pure.v_axpy(fmt, alpha, a, y1)
    K.ext.v_axpy(fmt, alpha, a, y2)
    assert np.array_equal(y1, y2)
    assert K.pure.v_dot(fmt, a, b) == K.ext.v_dot(fmt, a, b)
    assert K.pure.v_sum_sq(fmt, a) == K.ext.v_sum_sq(fmt, a)
    assert K.pure.v_sum_abs(fmt, a) == K.ext.v_sum_abs(fmt, a)
    assert K.pure.v_count_nonreal(fmt, a) == K.ext.v_count_nonreal(fmt, a)
    c1 = np.zeros(n, dtype=np.uint8)
    c2 = np.zeros(n, dtype=np.uint8)
    K.pure.v_classify(fmt, a, c1)
    K.ext.v_classify(fmt, a, c2)
    assert np.array_equal(c1, c2)


def test_vector_convert_and_range_flags_parity():
    rng = random.Random(3)
    vals = np.concatenate([
        np.array([0.0, -0.0, np.inf, -np.inf, np.nan, 1e300, -1e300,
                  1e-300, 448.0, 449.0, 464.0, 465.0, 2.0 ** -25]),
        np.frombuffer(np.random.default_rng(0).bytes(8 * 200), dtype=np.float64),
    ])
    src = np.ascontiguousarray(vals, dtype=np.float64).view(np.uint64)
    for dst in (F.FLOAT8_E4M3, F.POSIT16, F.TAKUM8, F.FLOAT16):
        o1 = np.zeros(len(src), dtype=np.uint64)
        o2 = np.zeros(len(src), dtype=np.uint64)
        K.pure.v_convert(P.FLOAT64, dst.fmt, src, o1)
        K.ext.v_convert(P.FLOAT64, dst.fmt, src, o2)
        assert np.array_equal(o1, o2)
        f1 = np.zeros(len(src), dtype=np.uint8)
        f2 = np.zeros(len(src), dtype=np.uint8)
        K.pure.v_range_flags(dst.fmt, src, f1)
        K.ext.v_range_flags(dst.fmt, src, f2)
        assert np.array_equal(f1, f2)


def _rand_unit_lower(rng, n, w):
    """Random unit lower-triangular CSC with diagonal implicit."""
    cp = [0]
    ri, vs = [], []
    for j in range(n):
        rows = sorted(rng.sample(range(j + 1, n), k=min(n - j - 1, rng.randint(0, 3))))
        for r in rows:
            ri.append(r)
            vs.append(rng.getrandbits(w))
        cp.append(len(ri))
    return (np.array(cp, dtype=np.int64), np.array(ri, dtype=np.int32),
            np.array(vs, dtype=np.uint64))


def _rand_upper(rng, n, w, fid):
    """Random upper-triangular CSC, diagonal last in each column, nonzero."""
    one = F.encode(fid, 1)
    cp = [0]
    ri, vs = [], []
    for j in range(n):
        rows = sorted(rng.sample(range(0, j), k=min(j, rng.randint(0, 3))))
        for r in rows:
            ri.append(r)
            vs.append(rng.getrandbits(w))
        ri.append(j)
        d = rng.getrandbits(w)
        if P.classify(fid.fmt, d)[0] != P.CLS_REAL:
            d = one
        vs.append(d)
        cp.append(len(ri))
    return (np.array(cp, dtype=np.int64), np.array(ri, dtype=np.int32),
            np.array(vs, dtype=np.uint64))


@pytest.mark.parametrize("fid", [F.FLOAT64, F.POSIT16], ids=lambda f: f.name)
def test_sparse_kernel_parity(fid):
    fmt, w = fid.fmt, fid.width
    rng = random.Random(fid.fmt + 99)
    n = 40
    cp, ri, vs = _rand_unit_lower(rng, n, w)
    b = _rand_codes(rng, w, n)
    b1, b2 = b.copy(), b.copy()
    K.pure.v_lower_solve_unit(fmt, n, cp, ri, vs, b1)
    K.ext.v_lower_solve_unit(fmt, n, cp, ri, vs, b2)
    assert np.array_equal(b1, b2)

    cp, ri, vs = _rand_upper(rng, n, w, fid)
    b1, b2 = b.copy(), b.copy()
    K.pure.v_upper_solve(fmt, n, cp, ri, vs, b1)
    K.ext.v_upper_solve(fmt, n, cp, ri, vs, b2)
    assert np.array_equal(b1, b2)

    # general rectangular-ish matvec
    cp, ri, vs = _rand_upper(rng, n, w, fid)
    x = _rand_codes(rng, w, n)
    y1 = np.zeros(n, dtype=np.uint64)
    y2 = np.ones(n, dtype=np.uint64)  # must be overwritten
    K.pure.v_csc_matvec(fmt, n, cp, ri, vs, x, y1)
    K.ext.v_csc_matvec(fmt, n, cp, ri, vs, x, y2)
    assert np.array_equal(y1, y2)

    idx = np.array(sorted(rng.sample(range(n), 12)), dtype=np.int32)
    vals = _rand_codes(rng, w, 12)
    alpha = int(_rand_codes(rng, w, 1)[0])
    y1, y2 = b.copy(), b.copy()
    K.pure.v_scatter_axpy(fmt, alpha, vals, idx, y1)
    K.ext.v_scatter_axpy(fmt, alpha, vals, idx, y2)
    assert np.array_equal(y1, y2)
    mask = np.zeros(n, dtype=np.uint8)
    mask[::2] = 1
    y1, y2 = b.copy(), b.copy()
    K.pure.v_scatter_axpy_masked(fmt, alpha, vals, idx, y1, mask)
    K.ext.v_scatter_axpy_masked(fmt, alpha, vals, idx, y2, mask)
    assert np.array_equal(y1, y2)
