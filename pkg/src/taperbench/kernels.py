"""Kernel backend selection.

The compiled extension (_ckernels) provides the hot scalar codec ops plus
vector kernels over numpy uint64 code arrays. When it is missing, or when
TAPERBENCH_PURE is set in the environment, a pure-Python twin takes over
with identical semantics. Exhaustive parity tests keep the two aligned.

Array conventions: codes are uint64, column pointers int64, row indices
int32, masks uint8. The zero code is 0 in every format, so zeroed arrays
are valid vectors.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels as P
from ._pykernels import (  # re-exported identifiers shared by both backends
    ALL_FORMATS, CLS_INF, CLS_NAR, CLS_REAL, CLS_ZERO,
    FAM_BF16, FAM_E4M3, FAM_IEEE, FAM_POSIT, FAM_TAKUM,
    BFLOAT16, FLOAT16, FLOAT32, FLOAT64, FLOAT8_E4M3,
    OP_ABS, OP_ADD, OP_DIV, OP_MUL, OP_NEG, OP_SQRT, OP_SUB,
    POSIT16, POSIT32, POSIT64, POSIT8,
    TAKUM16, TAKUM32, TAKUM64, TAKUM8,
    family, width,
)

try:
    from . import _ckernels as _ext
except ImportError:
    _ext = None


class _PureVector:
    """Vector kernels as plain loops over the pure scalar engine."""

    decode = staticmethod(P.decode)
    encode_parts = staticmethod(P.encode_parts)
    arith = staticmethod(P.arith)
    convert = staticmethod(P.convert)
    compare = staticmethod(P.compare)
    classify = staticmethod(P.classify)

    @staticmethod
    def v_convert(src_fmt, dst_fmt, src, out):
        for i in range(len(src)):
            out[i] = P.convert(src_fmt, dst_fmt, int(src[i]))

    @staticmethod
    def v_classify(fmt, a, out):
        for i in range(len(a)):
            out[i] = P.classify(fmt, int(a[i]))[0]

    @staticmethod
    def v_ew(fmt, op, a, b, out):
        for i in range(len(a)):
            out[i] = P.arith(fmt, op, int(a[i]), int(b[i]))

    @staticmethod
    def v_scalar(fmt, op, a, code_b, out):
        cb = int(code_b)
        for i in range(len(a)):
            out[i] = P.arith(fmt, op, int(a[i]), cb)

    @staticmethod
    def v_axpy(fmt, alpha, x, y):
        al = int(alpha)
        for i in range(len(x)):
            t = P.arith(fmt, P.OP_MUL, al, int(x[i]))
            y[i] = P.arith(fmt, P.OP_ADD, int(y[i]), t)

    @staticmethod
    def v_scatter_axpy(fmt, alpha, vals, idx, y):
        al = int(alpha)
        for t in range(len(idx)):
            r = idx[t]
            u = P.arith(fmt, P.OP_MUL, al, int(vals[t]))
            y[r] = P.arith(fmt, P.OP_ADD, int(y[r]), u)

    @staticmethod
    def v_scatter_axpy_masked(fmt, alpha, vals, idx, y, mask):
        al = int(alpha)
        for t in range(len(idx)):
            r = idx[t]
            if mask[r]:
                u = P.arith(fmt, P.OP_MUL, al, int(vals[t]))
                y[r] = P.arith(fmt, P.OP_ADD, int(y[r]), u)

    @staticmethod
    def v_dot(fmt, a, b):
        acc = 0
        for i in range(len(a)):
            t = P.arith(fmt, P.OP_MUL, int(a[i]), int(b[i]))
            acc = P.arith(fmt, P.OP_ADD, acc, t)
        return acc

    @staticmethod
    def v_sum_sq(fmt, a):
        acc = 0
        for i in range(len(a)):
            t = P.arith(fmt, P.OP_MUL, int(a[i]), int(a[i]))
            acc = P.arith(fmt, P.OP_ADD, acc, t)
        return acc

    @staticmethod
    def v_sum_abs(fmt, a):
        acc = 0
        for i in range(len(a)):
            t = P.arith(fmt, P.OP_ABS, int(a[i]), 0)
            acc = P.arith(fmt, P.OP_ADD, acc, t)
        return acc

    @staticmethod
    def v_csc_matvec(fmt, n_cols, col_ptr, row_idx, vals, x, y):
        y[:] = 0
        for j in range(n_cols):
            xj = int(x[j])
            if xj == 0:
                continue
            for t in range(col_ptr[j], col_ptr[j + 1]):
                r = row_idx[t]
                u = P.arith(fmt, P.OP_MUL, int(vals[t]), xj)
                y[r] = P.arith(fmt, P.OP_ADD, int(y[r]), u)

    @staticmethod
    def v_lower_solve_unit(fmt, n, col_ptr, row_idx, vals, b):
        """In-place solve L x = b for unit lower-triangular CSC L with the
        diagonal not stored."""
        for j in range(n):
            xj = int(b[j])
            if xj == 0:
                continue
            nxj = P.arith(fmt, P.OP_NEG, xj, 0)
            for t in range(col_ptr[j], col_ptr[j + 1]):
                r = row_idx[t]
                u = P.arith(fmt, P.OP_MUL, nxj, int(vals[t]))
                b[r] = P.arith(fmt, P.OP_ADD, int(b[r]), u)

    @staticmethod
    def v_upper_solve(fmt, n, col_ptr, row_idx, vals, b):
        """In-place solve U x = b for upper-triangular CSC U whose diagonal
        entry is the last one stored in each column."""
        for j in range(n - 1, -1, -1):
            t_hi = col_ptr[j + 1] - 1
            xj = P.arith(fmt, P.OP_DIV, int(b[j]), int(vals[t_hi]))
            b[j] = xj
            if xj == 0:
                continue
            nxj = P.arith(fmt, P.OP_NEG, xj, 0)
            for t in range(col_ptr[j], t_hi):
                r = row_idx[t]
                u = P.arith(fmt, P.OP_MUL, nxj, int(vals[t]))
                b[r] = P.arith(fmt, P.OP_ADD, int(b[r]), u)

    @staticmethod
    def v_count_nonreal(fmt, a):
        """Number of NaR/NaN/Inf entries."""
        bad = 0
        for i in range(len(a)):
            cls = P.classify(fmt, int(a[i]))[0]
            if cls == P.CLS_NAR or cls == P.CLS_INF:
                bad += 1
        return bad

    @staticmethod
    def v_range_flags(dst_fmt, src_f64_codes, out):
        """Conversion range check against binary64 inputs.

        out[i] = 0 ok, 1 overflow (|v| strictly above dst max-finite),
        2 underflow (nonzero v encodes to the zero code), 3 non-finite input.
        """
        hi_code = _max_code(dst_fmt)
        _, _, msig, mexp = P.decode(dst_fmt, hi_code)
        for i in range(len(src_f64_codes)):
            cls, s, sig, exp = P.decode(P.FLOAT64, int(src_f64_codes[i]))
            if cls == P.CLS_NAR or cls == P.CLS_INF:
                out[i] = 3
            elif cls == P.CLS_ZERO:
                out[i] = 0
            elif P._value_gt(sig, exp, 0, msig, mexp):
                out[i] = 1
            elif P.encode_parts(dst_fmt, cls, s, sig, exp, 0) == 0:
                out[i] = 2
            else:
                out[i] = 0


def _max_code(fmt: int) -> int:
    w = fmt & 0xFF
    fam = fmt >> 8
    if fam in (P.FAM_POSIT, P.FAM_TAKUM):
        return (1 << (w - 1)) - 1
    if fam == P.FAM_E4M3:
        return 0x7E
    eb = {P.FLOAT16: 5, P.FLOAT32: 8, P.FLOAT64: 11, P.BFLOAT16: 8}[fmt]
    fbits = w - 1 - eb
    return (((1 << eb) - 2) << fbits) | ((1 << fbits) - 1)


pure = _PureVector
ext = _ext

if _ext is not None and not os.environ.get("TAPERBENCH_PURE"):
    _active = _ext
    BACKEND = "compiled"
else:
    _active = _PureVector
    BACKEND = "pure"

decode = _active.decode
encode_parts = _active.encode_parts
arith = _active.arith
convert = _active.convert
compare = _active.compare
classify = _active.classify
v_convert = _active.v_convert
v_classify = _active.v_classify
v_ew = _active.v_ew
v_scalar = _active.v_scalar
v_axpy = _active.v_axpy
v_scatter_axpy = _active.v_scatter_axpy
v_scatter_axpy_masked = _active.v_scatter_axpy_masked
v_dot = _active.v_dot
v_sum_sq = _active.v_sum_sq
v_sum_abs = _active.v_sum_abs
v_csc_matvec = _active.v_csc_matvec
v_lower_solve_unit = _active.v_lower_solve_unit
v_upper_solve = _active.v_upper_solve
v_count_nonreal = _active.v_count_nonreal
v_range_flags = _active.v_range_flags


def codes_from_f64(dst_fmt: int, arr: np.ndarray) -> np.ndarray:
    """Convert a float64 array to codes of dst_fmt."""
    src = np.ascontiguousarray(arr, dtype=np.float64).view(np.uint64)
    out = np.zeros(len(src), dtype=np.uint64)
    v_convert(FLOAT64, dst_fmt, src, out)
    return out


def f64_from_codes(src_fmt: int, codes: np.ndarray) -> np.ndarray:
    """Convert codes to float64 values (nearest; specials map across)."""
    out = np.zeros(len(codes), dtype=np.uint64)
    v_convert(src_fmt, FLOAT64, np.ascontiguousarray(codes, dtype=np.uint64), out)
    return out.view(np.float64)
