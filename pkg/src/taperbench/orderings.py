"""Structure-only permutations and per-format row scaling.

Permutations are computed once, in binary64, and reused verbatim for every
target format; only the row scaling is recomputed per format, in that
format's own arithmetic. The LU plan comes from a reference-precision
pivoted sparse factorization (fill-reducing column ordering, threshold
partial pivoting at 0.1); the QR plan from a deterministic minimum-degree
pass over the A^T A pattern with rows left in natural order.

Convention: a plan (row_perm, col_perm) describes the permuted matrix
B[i, j] = A[row_perm[i], col_perm[j]].
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .fields import NonRealFailure, SingularFailure
from .matrices import SparseMatrixCsc

PLAN_MAGIC = b"PLN1"
_PLAN_KINDS = ("lu", "qr")


class PlanFailure(Exception):
    """Reference factorization broke down; the matrix is excluded."""


class PlanError(ValueError):
    """Plan cache file is damaged or not a plan file."""


@dataclass
class StructuralPlan:
    kind: str
    row_perm: np.ndarray
    col_perm: np.ndarray

    def validate(self) -> None:
        if self.kind not in _PLAN_KINDS:
            raise ValueError(f"bad plan kind {self.kind!r}")
        for p in (self.row_perm, self.col_perm):
            n = len(p)
            if not np.array_equal(np.sort(p), np.arange(n)):
                raise ValueError("permutation is not a bijection")


@dataclass
class RowScaling:
    """Per-row 1-norms in the target format; rows are scaled by division."""

    factors: object  # field vector container


def plan_lu(A: SparseMatrixCsc) -> StructuralPlan:
    """Row/column permutations from a binary64 pivoted sparse LU."""
    import scipy.sparse as sp
    from scipy.sparse.linalg import splu

    S = sp.csc_matrix(
        (np.asarray(A.values, dtype=np.float64), A.row_idx, A.col_ptr),
        shape=(A.n_rows, A.n_cols))
    try:
        lu = splu(S, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.1,
                  options=dict(Equil=False))
    except RuntimeError as e:
        raise PlanFailure(str(e)) from None
    d = lu.U.diagonal()
    if not np.all(np.isfinite(d)) or np.any(d == 0.0):
        raise PlanFailure("reference factorization produced a bad pivot")
    # scipy: L@U == A[argsort(perm_r)][:, argsort(perm_c)]
    plan = StructuralPlan(
        kind="lu",
        row_perm=np.argsort(lu.perm_r).astype(np.int32),
        col_perm=np.argsort(lu.perm_c).astype(np.int32))
    plan.validate()
    return plan


def plan_qr(A: SparseMatrixCsc) -> StructuralPlan:
    """Minimum-degree column ordering on the A^T A pattern, natural rows.
    Rows and columns spanning half the matrix or more get the usual
    dense guards: dense rows are left out of the pattern (they would make
    A^T A structurally full and erase all ordering information) and dense
    columns are ordered last. Ties break to the lowest index."""
    n = A.n_cols
    adj = [set() for _ in range(n)]
    dense = max(3, (n + 1) // 2)
    colnnz = np.diff(A.col_ptr)
    dense_cols = [j for j in range(n) if colnnz[j] >= dense]
    # columns sharing any (non-dense) row form a clique in A^T A
    row_cols = [[] for _ in range(A.n_rows)]
    for j in range(n):
        if colnnz[j] < dense:
            for t in range(A.col_ptr[j], A.col_ptr[j + 1]):
                row_cols[A.row_idx[t]].append(j)
    for cols in row_cols:
        if len(cols) >= dense:
            continue
        for a in cols:
            for b in cols:
                if a != b:
                    adj[a].add(b)
    alive = set(range(n)) - set(dense_cols)
    order = np.empty(n, dtype=np.int32)
    for k in range(len(alive)):
        v = min(alive, key=lambda u: (len(adj[u]), u))
        order[k] = v
        nb = adj[v]
        for u in nb:
            adj[u] |= nb
            adj[u].discard(u)
            adj[u].discard(v)
        alive.remove(v)
        adj[v] = set()
    order[n - len(dense_cols):] = dense_cols
    plan = StructuralPlan(
        kind="qr",
        row_perm=np.arange(A.n_rows, dtype=np.int32),
        col_perm=order)
    plan.validate()
    return plan


def apply_plan(A: SparseMatrixCsc, plan: StructuralPlan) -> SparseMatrixCsc:
    """Permute structure and values: B[i, j] = A[row_perm[i], col_perm[j]].
    Works for any value container (codes, binary64, reference scalars)."""
    rp = np.asarray(plan.row_perm, dtype=np.int64)
    cp = np.asarray(plan.col_perm, dtype=np.int64)
    inv_rp = np.empty_like(rp)
    inv_rp[rp] = np.arange(len(rp))
    col_ptr = np.zeros(A.n_cols + 1, dtype=np.int64)
    row_idx = np.empty(A.nnz, dtype=np.int32)
    take = np.empty(A.nnz, dtype=np.int64)
    pos = 0
    for k in range(A.n_cols):
        j = cp[k]
        ts = np.arange(A.col_ptr[j], A.col_ptr[j + 1])
        new_rows = inv_rp[A.row_idx[ts]]
        srt = np.argsort(new_rows)
        cnt = len(ts)
        row_idx[pos:pos + cnt] = new_rows[srt]
        take[pos:pos + cnt] = ts[srt]
        pos += cnt
        col_ptr[k + 1] = pos
    if isinstance(A.values, np.ndarray):
        values = A.values[take]
    else:
        values = [A.values[t] for t in take]
    B = SparseMatrixCsc(A.n_rows, A.n_cols, col_ptr, row_idx, values)
    B.validate()
    return B


def row_scaling(field, A: SparseMatrixCsc) -> RowScaling:
    """Row 1-norms accumulated in target arithmetic, CSC storage order."""
    norms = field.vec(A.n_rows)
    for j in range(A.n_cols):
        for t in range(A.col_ptr[j], A.col_ptr[j + 1]):
            i = int(A.row_idx[t])
            s = field.add(field.get(norms, i),
                          field.abs(field.get(A.values, t)))
            field.set(norms, i, s)
    for i in range(A.n_rows):
        f = field.get(norms, i)
        if field.is_nonreal(f):
            raise NonRealFailure(f"row {i} 1-norm is non-real")
        if field.is_zero(f):
            raise SingularFailure(f"row {i} is zero")
    return RowScaling(factors=norms)


def apply_row_scaling(field, A: SparseMatrixCsc,
                      scaling: RowScaling) -> SparseMatrixCsc:
    """Divide every row by its norm, in target arithmetic."""
    vals = field.copy(A.values)
    for j in range(A.n_cols):
        for t in range(A.col_ptr[j], A.col_ptr[j + 1]):
            q = field.div(field.get(vals, t),
                          field.get(scaling.factors, int(A.row_idx[t])))
            field.set(vals, t, q)
    return SparseMatrixCsc(A.n_rows, A.n_cols, A.col_ptr.copy(),
                           A.row_idx.copy(), vals)


def permute_vector(field, v, perm):
    """out[i] = v[perm[i]]."""
    out = field.vec(len(perm))
    for i in range(len(perm)):
        field.set(out, i, field.get(v, int(perm[i])))
    return out


def scale_vector(field, b, scaling: RowScaling):
    """Element-wise b_i / norm_i in target arithmetic."""
    out = field.copy(b)
    n = len(scaling.factors)
    for i in range(n):
        field.set(out, i, field.div(field.get(b, i),
                                    field.get(scaling.factors, i)))
    return out


def plan_write(plan: StructuralPlan, path) -> None:
    plan.validate()
    body = (PLAN_MAGIC
            + struct.pack("<BII", _PLAN_KINDS.index(plan.kind),
                          len(plan.row_perm), len(plan.col_perm))
            + np.asarray(plan.row_perm, dtype="<i4").tobytes()
            + np.asarray(plan.col_perm, dtype="<i4").tobytes())
    with open(path, "wb") as f:
        f.write(body + hashlib.sha256(body).digest()[:8])


def plan_read(path) -> StructuralPlan:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 21 or blob[:4] != PLAN_MAGIC:
        raise PlanError("not a plan file")
    body, check = blob[:-8], blob[-8:]
    if hashlib.sha256(body).digest()[:8] != check:
        raise PlanError("plan checksum mismatch")
    kind_idx, n_r, n_c = struct.unpack("<BII", body[4:13])
    if kind_idx >= len(_PLAN_KINDS) or len(body) != 13 + 4 * (n_r + n_c):
        raise PlanError("malformed plan file")
    rp = np.frombuffer(body[13:13 + 4 * n_r], dtype="<i4").astype(np.int32)
    cp = np.frombuffer(body[13 + 4 * n_r:], dtype="<i4").astype(np.int32)
    plan = StructuralPlan(kind=_PLAN_KINDS[kind_idx], row_perm=rp, col_perm=cp)
    plan.validate()
    return plan
