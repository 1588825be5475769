"""Direct solvers in target arithmetic: non-pivoting sparse LU and
Householder sparse QR.

Both run on systems whose permutations and row scaling were already
applied, and both are generic over the arithmetic field, so the identical
code path produces target-format results and reference solutions. No
pivot search and no per-format compensation happens here: formats are
exercised blind, saturation and overflow semantics included.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import NonRealFailure, SingularFailure
from .matrices import SparseMatrixCsc


@dataclass
class LuFactors:
    """L unit lower (diagonal implicit), U upper (diagonal last per column)."""

    n: int
    col_perm: np.ndarray
    l_col_ptr: np.ndarray
    l_row_idx: np.ndarray
    l_vals: object
    u_col_ptr: np.ndarray
    u_row_idx: np.ndarray
    u_vals: object


@dataclass
class QrFactors:
    """One Householder reflector per column (v raw, with the affected row
    indices), plus R upper triangular. r_diag keeps every diagonal scalar,
    including zeros from rank-deficient columns."""

    n: int
    col_perm: np.ndarray
    reflectors: list
    r_col_ptr: np.ndarray
    r_row_idx: np.ndarray
    r_vals: object
    r_diag: list


def _vec_of(field, items):
    v = field.vec(len(items))
    for i, e in enumerate(items):
        field.set(v, i, e)
    return v


def _gather(w, idx):
    if isinstance(w, np.ndarray):
        return w[idx]
    return [w[int(i)] for i in idx]


def _scatter(w, idx, vals):
    if isinstance(w, np.ndarray):
        w[idx] = vals
    else:
        for k, i in enumerate(idx):
            w[int(i)] = vals[k]


def _assemble(field, n, cols):
    """cols: per-column (row list, value list) -> kernel-ready CSC arrays."""
    col_ptr = np.zeros(n + 1, dtype=np.int64)
    rows = []
    vals = []
    for j, (r, v) in enumerate(cols):
        rows.extend(r)
        vals.extend(v)
        col_ptr[j + 1] = len(rows)
    return col_ptr, np.array(rows, dtype=np.int32), _vec_of(field, vals)


def _concat(field, row_arrays, val_containers, n):
    col_ptr = np.zeros(n + 1, dtype=np.int64)
    for j in range(n):
        col_ptr[j + 1] = col_ptr[j] + len(row_arrays[j])
    if col_ptr[-1]:
        rows = np.concatenate(row_arrays).astype(np.int32)
    else:
        rows = np.empty(0, dtype=np.int32)
    flat = []
    for j in range(n):
        c = val_containers[j]
        flat.extend(field.get(c, k) for k in range(len(row_arrays[j])))
    return col_ptr, rows, _vec_of(field, flat)


def _identity_perm(n, col_perm):
    if col_perm is None:
        return np.arange(n, dtype=np.int32)
    return np.asarray(col_perm, dtype=np.int32)


def _unpermute(field, y, col_perm):
    x = field.vec(len(col_perm))
    for k in range(len(col_perm)):
        field.set(x, int(col_perm[k]), field.get(y, k))
    return x


# ---------------------------------------------------------------------------
# LU
# ---------------------------------------------------------------------------

def lu_factor(field, A: SparseMatrixCsc, col_perm=None) -> LuFactors:
    """Left-looking column LU with no pivot search. The column's fill
    pattern is the reachable set through the L structure; nothing is
    dropped. Zero or non-real pivots abort the factorization."""
    if A.n_rows != A.n_cols:
        raise ValueError("LU requires a square matrix")
    n = A.n_cols
    l_rows = [None] * n  # per-column int32 arrays, rows > j
    l_vals = [None] * n
    u_cols = []
    work = field.vec(n)
    seen = np.full(n, -1, dtype=np.int64)
    for j in range(n):
        lo, hi = int(A.col_ptr[j]), int(A.col_ptr[j + 1])
        stack = [int(A.row_idx[t]) for t in range(lo, hi)]
        for t in range(lo, hi):
            field.set(work, int(A.row_idx[t]), field.get(A.values, t))
        reach = []
        while stack:
            i = stack.pop()
            if seen[i] == j:
                continue
            seen[i] = j
            reach.append(i)
            if i < j:
                stack.extend(int(r) for r in l_rows[i])
        reach.sort()
        # updates flow strictly from lower to higher indices
        for t in reach:
            if t >= j:
                break
            xt = field.get(work, t)
            if not field.is_zero(xt):
                field.scatter_axpy(field.neg(xt), l_vals[t], l_rows[t], work)
        pivot = field.get(work, j)
        if field.is_nonreal(pivot):
            raise NonRealFailure(f"non-real pivot in column {j}")
        if field.is_zero(pivot):
            raise SingularFailure(f"zero pivot in column {j}")
        ur, uv, lr, lv = [], [], [], []
        for i in reach:
            e = field.get(work, i)
            field.set(work, i, field.zero)
            if i < j:
                if field.is_nonreal(e):
                    raise NonRealFailure(f"non-real entry U[{i},{j}]")
                if not field.is_zero(e):
                    ur.append(i)
                    uv.append(e)
            elif i > j:
                q = field.div(e, pivot)
                if field.is_nonreal(q):
                    raise NonRealFailure(f"non-real entry L[{i},{j}]")
                if not field.is_zero(q):
                    lr.append(i)
                    lv.append(q)
        ur.append(j)
        uv.append(pivot)
        u_cols.append((ur, uv))
        l_rows[j] = np.array(lr, dtype=np.int32)
        l_vals[j] = _vec_of(field, lv)
    l_cp, l_ri, l_vv = _concat(field, l_rows, l_vals, n)
    u_cp, u_ri, u_vv = _assemble(field, n, u_cols)
    return LuFactors(n=n, col_perm=_identity_perm(n, col_perm),
                     l_col_ptr=l_cp, l_row_idx=l_ri, l_vals=l_vv,
                     u_col_ptr=u_cp, u_row_idx=u_ri, u_vals=u_vv)


def lu_solve(field, f: LuFactors, b):
    """Forward then backward substitution; x returned in original column
    order. b must already be permuted/scaled like the factored matrix."""
    y = field.copy(b)
    field.lower_solve_unit(f.n, f.l_col_ptr, f.l_row_idx, f.l_vals, y)
    field.upper_solve(f.n, f.u_col_ptr, f.u_row_idx, f.u_vals, y)
    if field.count_nonreal(y):
        raise NonRealFailure("non-real value in LU solution")
    return _unpermute(field, y, f.col_perm)


# ---------------------------------------------------------------------------
# QR
# ---------------------------------------------------------------------------

def _apply_reflector(field, idx, v, w):
    """w -= (2 v.w / v.v) v restricted to idx. v.v is recomputed here: the
    factors store only (v, idx)."""
    wg = _gather(w, idx)
    s = field.dot(v, wg)
    vtv = field.sum_sq(v)
    t = field.div(field.add(s, s), vtv)
    field.axpy(field.neg(t), v, wg)
    _scatter(w, idx, wg)


def qr_factor(field, A: SparseMatrixCsc, col_perm=None,
              allow_singular=False) -> QrFactors:
    """Householder QR, one reflector per column, sign choice
    v1 = x1 + sign(x1)*||x||_2 with sign(0) = +1. ||x||_2 is a naive
    sum of squares in target arithmetic (no rescaling). With
    allow_singular a zero column yields a zero R diagonal instead of a
    SingularFailure (used by the rank probe)."""
    m, n = A.n_rows, A.n_cols
    reflectors = []
    r_cols = []
    r_diag = []
    work = field.vec(m)
    present = np.zeros(m, dtype=bool)
    for j in range(n):
        for t in range(int(A.col_ptr[j]), int(A.col_ptr[j + 1])):
            i = int(A.row_idx[t])
            field.set(work, i, field.get(A.values, t))
            present[i] = True
        for idx, v in reflectors:
            if len(idx) and bool(np.any(present[idx])):
                _apply_reflector(field, idx, v, work)
                present[idx] = True
        pos = np.nonzero(present)[0]
        upper = [int(i) for i in pos if i < j]
        sub = [int(i) for i in pos
               if i > j and not field.is_zero(field.get(work, i))]
        ur = [i for i in upper if not field.is_zero(field.get(work, i))]
        uv = [field.get(work, i) for i in ur]
        for e in uv:
            if field.is_nonreal(e):
                raise NonRealFailure(f"non-real entry R[.,{j}]")
        if not sub:
            rjj = field.get(work, j)
            if field.is_nonreal(rjj):
                raise NonRealFailure(f"non-real diagonal R[{j},{j}]")
            if field.is_zero(rjj):
                if not allow_singular:
                    raise SingularFailure(f"zero column {j}")
                reflectors.append((np.empty(0, dtype=np.int32), field.vec(0)))
                r_diag.append(field.zero)
                r_cols.append((ur, uv))
            else:
                reflectors.append((np.empty(0, dtype=np.int32), field.vec(0)))
                r_diag.append(rjj)
                r_cols.append((ur + [j], uv + [rjj]))
        else:
            xrows = [j] + sub
            xv = [field.get(work, i) for i in xrows]
            norm = field.sqrt(field.sum_sq(_vec_of(field, xv)))
            if field.is_nonreal(norm):
                raise NonRealFailure(f"non-real column norm in column {j}")
            if field.is_zero(norm):
                if not allow_singular:
                    raise SingularFailure(f"column {j} norm underflowed")
                reflectors.append((np.empty(0, dtype=np.int32), field.vec(0)))
                r_diag.append(field.zero)
                r_cols.append((ur, uv))
            else:
                x1 = xv[0]
                negative = field.cmp(x1, field.zero) == -1
                v0 = field.sub(x1, norm) if negative else field.add(x1, norm)
                if field.is_nonreal(v0):
                    raise NonRealFailure(f"non-real reflector in column {j}")
                rjj = norm if negative else field.neg(norm)
                vv = _vec_of(field, [v0] + xv[1:])
                reflectors.append((np.array(xrows, dtype=np.int32), vv))
                r_diag.append(rjj)
                r_cols.append((ur + [j], uv + [rjj]))
        for i in pos:
            field.set(work, int(i), field.zero)
        present[:] = False
    r_cp, r_ri, r_vv = _assemble(field, n, r_cols)
    return QrFactors(n=n, col_perm=_identity_perm(n, col_perm),
                     reflectors=reflectors,
                     r_col_ptr=r_cp, r_row_idx=r_ri, r_vals=r_vv,
                     r_diag=r_diag)


def qr_solve(field, f: QrFactors, b):
    """Apply the stored reflectors to b, back-substitute R, un-permute."""
    for d in f.r_diag:
        if field.is_zero(d):
            raise SingularFailure("zero diagonal in R")
    w = field.copy(b)
    for idx, v in f.reflectors:
        if len(idx):
            _apply_reflector(field, idx, v, w)
    field.upper_solve(f.n, f.r_col_ptr, f.r_row_idx, f.r_vals, w)
    if field.count_nonreal(w):
        raise NonRealFailure("non-real value in QR solution")
    return _unpermute(field, w, f.col_perm)
