"""Arithmetic contexts the solvers are generic over.

A "field" bundles scalar ops, vector ops and conversions for one kind of
element. Two implementations share the (duck-typed) protocol:

* CodeField: elements are machine codes (plain ints), vectors are numpy
  uint64 arrays, every op routes through the kernel backend and rounds
  correctly in the chosen format.
* XRealField: elements are 113-bit XReal scalars, vectors are lists. Used
  for reference solutions and oracle checks; far too slow for sweeps.

Solvers written against this protocol produce bit-identical results no
matter which backend executes the codes, and run unchanged at reference
precision.
"""

from __future__ import annotations

import numpy as np

from . import kernels as K
from .formats import FormatId, decode as f_decode, encode as f_encode
from .xreal import XReal


class SolveFailure(Exception):
    """A solve attempt hit a failure mode instead of producing x."""

    kind = "failure"


class SingularFailure(SolveFailure):
    """Zero pivot, zero row, or otherwise numerically singular system."""

    kind = "singular"


class NonRealFailure(SolveFailure):
    """A non-real value (NaR, NaN, or an infinity) appeared mid-solve."""

    kind = "nonreal"


class CodeField:
    """Machine-format arithmetic over integer codes."""

    def __init__(self, fid: FormatId):
        self.fid = fid
        self.fmt = fid.fmt
        self.name = fid.name
        self.zero = 0  # the zero code in every format
        self.one = f_encode(fid, 1)
        self.nonreal = K.encode_parts(self.fmt, K.CLS_NAR, 0, 0, 0, 0)

    # -- scalars ------------------------------------------------------------
    def from_f64(self, x: float) -> int:
        return K.convert(K.FLOAT64, self.fmt, int(np.float64(x).view(np.uint64)))

    def to_f64(self, e: int) -> float:
        return float(np.uint64(K.convert(self.fmt, K.FLOAT64, e)).view(np.float64))

    def add(self, a, b):
        return K.arith(self.fmt, K.OP_ADD, a, b)

    def sub(self, a, b):
        return K.arith(self.fmt, K.OP_SUB, a, b)

    def mul(self, a, b):
        return K.arith(self.fmt, K.OP_MUL, a, b)

    def div(self, a, b):
        return K.arith(self.fmt, K.OP_DIV, a, b)

    def sqrt(self, a):
        return K.arith(self.fmt, K.OP_SQRT, a, 0)

    def neg(self, a):
        return K.arith(self.fmt, K.OP_NEG, a, 0)

    def abs(self, a):
        return K.arith(self.fmt, K.OP_ABS, a, 0)

    def is_zero(self, e) -> bool:
        return K.classify(self.fmt, e)[0] == K.CLS_ZERO

    def is_nonreal(self, e) -> bool:
        cls = K.classify(self.fmt, e)[0]
        return cls == K.CLS_NAR or cls == K.CLS_INF

    def cmp(self, a, b) -> int:
        """-1/0/1 by value, 2 unordered."""
        return K.compare(self.fmt, a, b)

    def le(self, a, b) -> bool:
        return K.compare(self.fmt, a, b) in (-1, 0)

    # -- vectors ------------------------------------------------------------
    def vec(self, n: int) -> np.ndarray:
        return np.zeros(n, dtype=np.uint64)

    def copy(self, v: np.ndarray) -> np.ndarray:
        return v.copy()

    def get(self, v, i) -> int:
        return int(v[i])

    def set(self, v, i, e) -> None:
        v[i] = e

    def vec_from_f64(self, arr) -> np.ndarray:
        return K.codes_from_f64(self.fmt, np.asarray(arr, dtype=np.float64))

    def vec_to_f64(self, v) -> np.ndarray:
        return K.f64_from_codes(self.fmt, v)

    def convert_vec(self, other: "CodeField", v: np.ndarray) -> np.ndarray:
        out = np.zeros(len(v), dtype=np.uint64)
        K.v_convert(self.fmt, other.fmt, np.ascontiguousarray(v), out)
        return out

    def decode_vec(self, v) -> list:
        return [f_decode(self.fid, int(c)) for c in v]

    def encode_vec(self, xs) -> np.ndarray:
        return np.array([f_encode(self.fid, x) for x in xs], dtype=np.uint64)

    def ew(self, op: int, a, b, out) -> None:
        K.v_ew(self.fmt, op, a, b, out)

    def scale(self, alpha, v) -> None:
        K.v_scalar(self.fmt, K.OP_MUL, v, alpha, v)

    def axpy(self, alpha, x, y) -> None:
        K.v_axpy(self.fmt, alpha, x, y)

    def scatter_axpy(self, alpha, vals, idx, y) -> None:
        K.v_scatter_axpy(self.fmt, alpha, vals, idx, y)

    def scatter_axpy_masked(self, alpha, vals, idx, y, mask) -> None:
        K.v_scatter_axpy_masked(self.fmt, alpha, vals, idx, y, mask)

    def dot(self, a, b):
        return K.v_dot(self.fmt, a, b)

    def sum_sq(self, a):
        return K.v_sum_sq(self.fmt, a)

    def sum_abs(self, a):
        return K.v_sum_abs(self.fmt, a)

    def count_nonreal(self, v) -> int:
        return K.v_count_nonreal(self.fmt, v)

    def norm_inf(self, v):
        """Largest |v_i| as an element; caller screens non-real entries.

        Positive codes sort by value in every format here, so the max of
        the absolute codes is the max magnitude."""
        if len(v) == 0:
            return 0
        out = np.zeros(len(v), dtype=np.uint64)
        K.v_scalar(self.fmt, K.OP_ABS, np.ascontiguousarray(v), 0, out)
        return int(out.max())

    def csc_matvec(self, n_cols, col_ptr, row_idx, vals, x) -> np.ndarray:
        y = np.zeros(len(x), dtype=np.uint64)
        K.v_csc_matvec(self.fmt, n_cols, col_ptr, row_idx, vals, x, y)
        return y

    def lower_solve_unit(self, n, col_ptr, row_idx, vals, b) -> None:
        K.v_lower_solve_unit(self.fmt, n, col_ptr, row_idx, vals, b)

    def upper_solve(self, n, col_ptr, row_idx, vals, b) -> None:
        K.v_upper_solve(self.fmt, n, col_ptr, row_idx, vals, b)


class XRealField:
    """Reference arithmetic: same protocol over 113-bit scalars."""

    def __init__(self):
        self.fid = None
        self.name = "xreal"
        self.zero = XReal(0)
        self.one = XReal(1)
        self.nonreal = XReal.nan

    def from_f64(self, x: float):
        return XReal(float(x))

    def to_f64(self, e) -> float:
        return float(e)

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def div(self, a, b):
        if b.is_zero():
            return XReal.nan if a.is_zero() else (a / b)
        return a / b

    def sqrt(self, a):
        return a.sqrt()

    def neg(self, a):
        return -a

    def abs(self, a):
        return abs(a)

    def is_zero(self, e) -> bool:
        return e.is_zero()

    def is_nonreal(self, e) -> bool:
        return not e.is_finite()

    def cmp(self, a, b) -> int:
        if a.is_nan() or b.is_nan():
            return 2
        if a < b:
            return -1
        return 1 if a > b else 0

    def le(self, a, b) -> bool:
        return self.cmp(a, b) in (-1, 0)

    def vec(self, n: int) -> list:
        return [XReal(0) for _ in range(n)]

    def copy(self, v: list) -> list:
        return list(v)

    def get(self, v, i):
        return v[i]

    def set(self, v, i, e) -> None:
        v[i] = e

    def vec_from_f64(self, arr) -> list:
        return [XReal(float(x)) for x in np.asarray(arr, dtype=np.float64)]

    def vec_to_f64(self, v) -> np.ndarray:
        return np.array([float(e) for e in v], dtype=np.float64)

    def ew(self, op: int, a, b, out) -> None:
        fn = {K.OP_ADD: self.add, K.OP_SUB: self.sub, K.OP_MUL: self.mul,
              K.OP_DIV: self.div}[op]
        for i in range(len(a)):
            out[i] = fn(a[i], b[i])

    def scale(self, alpha, v) -> None:
        for i in range(len(v)):
            v[i] = v[i] * alpha

    def axpy(self, alpha, x, y) -> None:
        for i in range(len(x)):
            y[i] = y[i] + alpha * x[i]

    def scatter_axpy(self, alpha, vals, idx, y) -> None:
        for t in range(len(idx)):
            y[idx[t]] = y[idx[t]] + alpha * vals[t]

    def scatter_axpy_masked(self, alpha, vals, idx, y, mask) -> None:
        for t in range(len(idx)):
            r = idx[t]
            if mask[r]:
                y[r] = y[r] + alpha * vals[t]

    def dot(self, a, b):
        acc = XReal(0)
        for i in range(len(a)):
            acc = acc + a[i] * b[i]
        return acc

    def sum_sq(self, a):
        acc = XReal(0)
        for e in a:
            acc = acc + e * e
        return acc

    def sum_abs(self, a):
        acc = XReal(0)
        for e in a:
            acc = acc + abs(e)
        return acc

    def count_nonreal(self, v) -> int:
        return sum(1 for e in v if not e.is_finite())

    def norm_inf(self, v):
        m = XReal(0)
        for e in v:
            a = abs(e)
            if a > m:
                m = a
        return m

    def csc_matvec(self, n_cols, col_ptr, row_idx, vals, x) -> list:
        y = [XReal(0) for _ in range(len(x))]
        for j in range(n_cols):
            xj = x[j]
            if xj.is_zero():
                continue
            for t in range(col_ptr[j], col_ptr[j + 1]):
                y[row_idx[t]] = y[row_idx[t]] + vals[t] * xj
        return y

    def lower_solve_unit(self, n, col_ptr, row_idx, vals, b) -> None:
        for j in range(n):
            xj = b[j]
            if xj.is_zero():
                continue
            for t in range(col_ptr[j], col_ptr[j + 1]):
                b[row_idx[t]] = b[row_idx[t]] - xj * vals[t]

    def upper_solve(self, n, col_ptr, row_idx, vals, b) -> None:
        for j in range(n - 1, -1, -1):
            t_hi = col_ptr[j + 1] - 1
            xj = self.div(b[j], vals[t_hi])
            b[j] = xj
            if xj.is_zero():
                continue
            for t in range(col_ptr[j], t_hi):
                b[row_idx[t]] = b[row_idx[t]] - xj * vals[t]
