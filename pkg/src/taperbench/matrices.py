"""Matrix ingestion, metadata, dataset filtering, and the bundle format.

Matrix Market files (coordinate real/integer, array real; general,
symmetric or skew-symmetric storage) are parsed into canonical CSC with
duplicates summed, triangles expanded and explicit zeros dropped. Complex
and pattern matrices are rejected: the benchmark only runs on real-valued
systems.

A filtered dataset is persisted as a single self-contained `.tsb` file:
magic ``TSB1``, a 32-bit manifest length, a sorted-key JSON manifest,
raw little-endian CSC payloads (col_ptr int64, row_idx int32, values
float64), and a trailing 64-bit checksum (low 8 bytes of the SHA-256 of
everything before it). The manifest alone is enough to list the bundle.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from .xreal import XReal

MAGIC = b"TSB1"
NNZ_LIMIT = 10_000


class MatrixMarketError(ValueError):
    """Malformed or out-of-contract Matrix Market input."""


class UnsupportedMatrixError(MatrixMarketError):
    """Well-formed but non-real content (complex or pattern field)."""


class BundleError(ValueError):
    """Bundle integrity failure: bad magic, version, or checksum."""


class SparseMatrixCsc:
    """Compressed sparse columns. Values may be float64, format codes
    (uint64), or reference scalars (a list of XReal); structure arrays are
    always int64 col_ptr / int32 row_idx."""

    __slots__ = ("n_rows", "n_cols", "col_ptr", "row_idx", "values")

    def __init__(self, n_rows, n_cols, col_ptr, row_idx, values):
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.col_ptr = np.ascontiguousarray(col_ptr, dtype=np.int64)
        self.row_idx = np.ascontiguousarray(row_idx, dtype=np.int32)
        self.values = values

    @property
    def nnz(self) -> int:
        return int(self.col_ptr[-1])

    def validate(self) -> None:
        cp, ri = self.col_ptr, self.row_idx
        if len(cp) != self.n_cols + 1 or cp[0] != 0:
            raise ValueError("bad col_ptr shape")
        if np.any(np.diff(cp) < 0) or cp[-1] != len(ri):
            raise ValueError("col_ptr not a prefix-sum of column sizes")
        if len(self.values) != len(ri):
            raise ValueError("values length mismatch")
        for j in range(self.n_cols):
            col = ri[cp[j]:cp[j + 1]]
            if len(col) and (col[0] < 0 or col[-1] >= self.n_rows):
                raise ValueError("row index out of range")
            if np.any(np.diff(col) <= 0):
                raise ValueError("row indices not strictly increasing")

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols), dtype=np.float64)
        for j in range(self.n_cols):
            for t in range(self.col_ptr[j], self.col_ptr[j + 1]):
                out[self.row_idx[t], j] = self.values[t]
        return out

    def copy(self) -> "SparseMatrixCsc":
        vals = self.values.copy() if hasattr(self.values, "copy") else list(self.values)
        return SparseMatrixCsc(self.n_rows, self.n_cols, self.col_ptr.copy(),
                               self.row_idx.copy(), vals)


@dataclass
class MatrixMetadata:
    name: str
    nnz: int
    abs_min_nonzero: XReal
    abs_max: XReal
    cond1_estimate: XReal
    is_square: bool
    is_full_rank: bool
    is_symmetric: bool
    is_posdef: bool


def csc_from_coo(n_rows, n_cols, rows, cols, vals) -> SparseMatrixCsc:
    """Canonical CSC from 0-based coordinates: duplicates summed, zeros
    dropped, rows sorted within columns."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    order = np.lexsort((rows, cols))
    rows, cols, vals = rows[order], cols[order], vals[order]
    # sum runs of equal (col, row)
    if len(rows):
        key_change = np.empty(len(rows), dtype=bool)
        key_change[0] = True
        key_change[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        group = np.cumsum(key_change) - 1
        summed = np.zeros(group[-1] + 1, dtype=np.float64)
        np.add.at(summed, group, vals)
        rows = rows[key_change]
        cols = cols[key_change]
        vals = summed
    keep = vals != 0.0
    rows, cols, vals = rows[keep], cols[keep], vals[keep]
    col_ptr = np.zeros(n_cols + 1, dtype=np.int64)
    np.add.at(col_ptr, cols + 1, 1)
    np.cumsum(col_ptr, out=col_ptr)
    A = SparseMatrixCsc(n_rows, n_cols, col_ptr, rows.astype(np.int32), vals)
    A.validate()
    return A


# ---------------------------------------------------------------------------
# Matrix Market
# ---------------------------------------------------------------------------

def _data_lines(lines):
    for ln in lines:
        s = ln.strip()
        if not s or s.startswith("%"):
            continue
        yield s


def parse_matrix_market(source):
    """Parse Matrix Market text (a string, byte string, or line iterable).

    Returns (SparseMatrixCsc, header) with header keys format/field/symmetry.
    Complex and pattern fields are rejected; symmetric and skew-symmetric
    storage is expanded to general after duplicates are summed.
    """
    if isinstance(source, bytes):
        source = source.decode("ascii", errors="replace")
    if isinstance(source, str):
        lines = iter(source.splitlines())
    else:
        lines = iter(source)
    try:
        banner = next(lines)
    except StopIteration:
        raise MatrixMarketError("empty file") from None
    if isinstance(banner, bytes):
        raise MatrixMarketError("binary stream; pass text or a whole bytes object")
    parts = banner.strip().split()
    if len(parts) != 5 or parts[0] != "%%MatrixMarket" or parts[1].lower() != "matrix":
        raise MatrixMarketError(f"bad banner: {banner.strip()!r}")
    mm_format = parts[2].lower()
    field = parts[3].lower()
    symmetry = parts[4].lower()
    header = {"format": mm_format, "field": field, "symmetry": symmetry}
    if field in ("complex", "pattern") or symmetry == "hermitian":
        raise UnsupportedMatrixError(f"unsupported field/symmetry: {field}/{symmetry}")
    if field not in ("real", "integer"):
        raise MatrixMarketError(f"unknown field {field!r}")
    if symmetry not in ("general", "symmetric", "skew-symmetric"):
        raise MatrixMarketError(f"unknown symmetry {symmetry!r}")
    if mm_format not in ("coordinate", "array"):
        raise MatrixMarketError(f"unknown format {mm_format!r}")

    data = _data_lines(lines)
    try:
        size = next(data)
    except StopIteration:
        raise MatrixMarketError("missing size line") from None

    if mm_format == "coordinate":
        A = _parse_coordinate(size, data, field, symmetry)
    else:
        A = _parse_array(size, data, symmetry)
    return A, header


def _parse_coordinate(size_line, data, field, symmetry):
    try:
        m, n, nnz = (int(x) for x in size_line.split())
    except ValueError:
        raise MatrixMarketError(f"bad size line {size_line!r}") from None
    if m < 0 or n < 0 or nnz < 0:
        raise MatrixMarketError("negative dimension")
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.float64)
    for t in range(nnz):
        try:
            line = next(data)
        except StopIteration:
            raise MatrixMarketError(f"expected {nnz} entries, got {t}") from None
        p = line.split()
        if len(p) != 3:
            raise MatrixMarketError(f"bad entry line {line!r}")
        try:
            i, j = int(p[0]), int(p[1])
            v = float(int(p[2])) if field == "integer" else float(p[2])
        except ValueError:
            raise MatrixMarketError(f"bad entry line {line!r}") from None
        if not (1 <= i <= m and 1 <= j <= n):
            raise MatrixMarketError(f"index ({i},{j}) out of bounds for {m}x{n}")
        if symmetry != "general" and i < j:
            raise MatrixMarketError("entry above the diagonal in triangular storage")
        if symmetry == "skew-symmetric" and i == j and v != 0.0:
            raise MatrixMarketError("nonzero diagonal in skew-symmetric storage")
        rows[t], cols[t], vals[t] = i - 1, j - 1, v
    return _expand(m, n, rows, cols, vals, symmetry)


def _parse_array(size_line, data, symmetry):
    try:
        m, n = (int(x) for x in size_line.split())
    except ValueError:
        raise MatrixMarketError(f"bad size line {size_line!r}") from None
    if symmetry == "general":
        want = m * n
    elif m != n:
        raise MatrixMarketError("triangular array storage requires square shape")
    elif symmetry == "symmetric":
        want = n * (n + 1) // 2
    else:
        want = n * (n - 1) // 2
    vals = np.empty(want, dtype=np.float64)
    got = 0
    for line in data:
        for tok in line.split():
            if got >= want:
                raise MatrixMarketError("surplus array entries")
            try:
                vals[got] = float(tok)
            except ValueError:
                raise MatrixMarketError(f"bad array value {tok!r}") from None
            got += 1
    if got != want:
        raise MatrixMarketError(f"expected {want} array entries, got {got}")
    rows = np.empty(want, dtype=np.int64)
    cols = np.empty(want, dtype=np.int64)
    t = 0
    for j in range(n if symmetry != "general" else n):
        if symmetry == "general":
            lo = 0
        elif symmetry == "symmetric":
            lo = j
        else:
            lo = j + 1
        for i in range(lo, m):
            rows[t], cols[t] = i, j
            t += 1
    return _expand(m, n, rows, cols, vals, symmetry)


def _expand(m, n, rows, cols, vals, symmetry):
    """Sum duplicates, then mirror the stored triangle if needed."""
    A = csc_from_coo(m, n, rows, cols, vals)
    if symmetry == "general" or A.nnz == 0:
        return A
    cp, ri, vv = A.col_ptr, A.row_idx, A.values
    er, ec, ev = [], [], []
    for j in range(n):
        for t in range(cp[j], cp[j + 1]):
            i = int(ri[t])
            v = float(vv[t])
            er.append(i); ec.append(j); ev.append(v)
            if i != j:
                er.append(j); ec.append(i)
                ev.append(-v if symmetry == "skew-symmetric" else v)
    return csc_from_coo(m, n, er, ec, ev)


def write_matrix_market(path, A: SparseMatrixCsc, comment: str = "") -> None:
    """Coordinate real general writer; full binary64 precision."""
    with open(path, "w") as f:
        f.write("%%MatrixMarket matrix coordinate real general\n")
        if comment:
            f.write(f"% {comment}\n")
        f.write(f"{A.n_rows} {A.n_cols} {A.nnz}\n")
        for j in range(A.n_cols):
            for t in range(A.col_ptr[j], A.col_ptr[j + 1]):
                f.write(f"{A.row_idx[t] + 1} {j + 1} {A.values[t]:.17g}\n")


# ---------------------------------------------------------------------------
# metadata
# ---------------------------------------------------------------------------

def _scipy_csc(A: SparseMatrixCsc):
    import scipy.sparse as sp

    return sp.csc_matrix(
        (np.asarray(A.values, dtype=np.float64), A.row_idx, A.col_ptr),
        shape=(A.n_rows, A.n_cols))


def estimate_cond1(A: SparseMatrixCsc) -> XReal:
    """kappa_1 = |A|_1 * |A^-1|_1, the inverse norm by a Hager-style power
    method on LU solves. Singular or non-square input gives infinity."""
    from scipy.sparse.linalg import splu

    if A.n_rows != A.n_cols or A.n_rows == 0:
        return XReal.inf
    n = A.n_rows
    vals = np.asarray(A.values, dtype=np.float64)
    norm1 = 0.0
    for j in range(n):
        s = float(np.abs(vals[A.col_ptr[j]:A.col_ptr[j + 1]]).sum())
        norm1 = max(norm1, s)
    if norm1 == 0.0:
        return XReal.inf
    try:
        lu = splu(_scipy_csc(A), permc_spec="COLAMD")
    except RuntimeError:
        return XReal.inf

    x = np.full(n, 1.0 / n)
    est = 0.0
    j_prev = -1
    for _ in range(5):
        y = lu.solve(x)
        if not np.all(np.isfinite(y)):
            return XReal.inf
        est = float(np.abs(y).sum())
        xi = np.where(y >= 0.0, 1.0, -1.0)
        z = lu.solve(xi, trans="T")
        if not np.all(np.isfinite(z)):
            return XReal.inf
        j = int(np.argmax(np.abs(z)))  # first index wins ties
        if abs(z[j]) <= float(z @ x) or j == j_prev:
            break
        x = np.zeros(n)
        x[j] = 1.0
        j_prev = j
    # safeguard vector (alternating ramp) against estimator blind spots
    v = np.array([(-1.0) ** i * (1.0 + i / max(n - 1, 1)) for i in range(n)])
    y2 = lu.solve(v)
    if not np.all(np.isfinite(y2)):
        return XReal.inf
    alt = 2.0 * float(np.abs(y2).sum()) / (3.0 * n)
    est = max(est, alt)
    out = XReal(norm1) * XReal(est)
    return out if out > XReal(1) else XReal(1)


def _is_symmetric(A: SparseMatrixCsc) -> bool:
    if A.n_rows != A.n_cols:
        return False
    T = _scipy_csc(A).transpose().tocsc()
    T.sort_indices()
    return (len(T.data) == A.nnz
            and np.array_equal(T.indptr.astype(np.int64), A.col_ptr)
            and np.array_equal(T.indices.astype(np.int32), A.row_idx)
            and np.array_equal(T.data, np.asarray(A.values, dtype=np.float64)))


def _posdef_scan(A: SparseMatrixCsc) -> bool:
    """Pivot scan without reordering: symmetric A is positive definite iff
    unpivoted elimination yields all-positive pivots (Sylvester)."""
    from scipy.sparse.linalg import splu

    if A.n_rows == 0:
        return True
    try:
        lu = splu(_scipy_csc(A), permc_spec="NATURAL", diag_pivot_thresh=0.0)
    except RuntimeError:
        return False
    d = lu.U.diagonal()
    if not np.all(np.isfinite(d)):
        return False
    # reject if SuperLU still row-swapped despite the zero threshold
    if np.any(lu.perm_r != np.arange(A.n_rows)):
        return False
    return bool(np.all(d > 0.0))


def _full_rank_by_qr(A: SparseMatrixCsc) -> bool:
    """Reference-precision QR rank probe: count |R_jj| above
    n * eps(binary64) * max |R_jj|."""
    from . import direct_solvers
    from . import orderings
    from .fields import XRealField

    n = A.n_cols
    if n == 0:
        return True
    field = XRealField()
    Ax = SparseMatrixCsc(A.n_rows, A.n_cols, A.col_ptr, A.row_idx,
                         field.vec_from_f64(np.asarray(A.values, np.float64)))
    plan = orderings.plan_qr(A)
    Ap = orderings.apply_plan(Ax, plan)
    fac = direct_solvers.qr_factor(field, Ap, plan.col_perm,
                                   allow_singular=True)
    diag = [abs(d) for d in fac.r_diag]
    mx = max(diag) if diag else XReal(0)
    if mx.is_zero():
        return False
    thresh = mx * XReal(n) * XReal(2.0 ** -52)
    return all(d > thresh for d in diag)


def compute_metadata(name: str, A: SparseMatrixCsc) -> MatrixMetadata:
    vals = np.asarray(A.values, dtype=np.float64)
    nnz = A.nnz
    if nnz:
        av = np.abs(vals)
        abs_min = XReal(float(av.min()))
        abs_max = XReal(float(av.max()))
    else:
        abs_min = XReal(0)
        abs_max = XReal(0)
    is_square = A.n_rows == A.n_cols
    sym = _is_symmetric(A)
    meta = MatrixMetadata(
        name=name,
        nnz=nnz,
        abs_min_nonzero=abs_min,
        abs_max=abs_max,
        cond1_estimate=estimate_cond1(A) if is_square else XReal.inf,
        is_square=is_square,
        is_full_rank=_full_rank_by_qr(A) if is_square else False,
        is_symmetric=sym,
        is_posdef=sym and _posdef_scan(A),
    )
    return meta


# ---------------------------------------------------------------------------
# bundle
# ---------------------------------------------------------------------------

class DatasetBundle:
    """An immutable filtered dataset: metadata plus CSC payloads."""

    def __init__(self, metadata, matrices, counts, errors=()):
        self.metadata = sorted(metadata, key=lambda m: m.name)
        self.matrices = dict(matrices)
        self.counts = dict(counts)
        self.errors = list(errors)

    def __len__(self):
        return len(self.metadata)


def _meta_to_json(m: MatrixMetadata, A: SparseMatrixCsc) -> dict:
    return {
        "name": m.name,
        "n_rows": A.n_rows,
        "n_cols": A.n_cols,
        "nnz": m.nnz,
        "abs_min_nonzero": float(m.abs_min_nonzero),
        "abs_max": float(m.abs_max),
        "cond1_estimate": float(m.cond1_estimate),
        "is_square": m.is_square,
        "is_full_rank": m.is_full_rank,
        "is_symmetric": m.is_symmetric,
        "is_posdef": m.is_posdef,
    }


def _meta_from_json(d: dict) -> MatrixMetadata:
    return MatrixMetadata(
        name=d["name"], nnz=d["nnz"],
        abs_min_nonzero=XReal(d["abs_min_nonzero"]),
        abs_max=XReal(d["abs_max"]),
        cond1_estimate=XReal(d["cond1_estimate"]),
        is_square=d["is_square"], is_full_rank=d["is_full_rank"],
        is_symmetric=d["is_symmetric"], is_posdef=d["is_posdef"])


def bundle_write(bundle: DatasetBundle, path) -> None:
    records = []
    payloads = []
    offset = 0
    for m in bundle.metadata:
        A = bundle.matrices[m.name]
        rec = _meta_to_json(m, A)
        raw = (A.col_ptr.astype("<i8").tobytes()
               + A.row_idx.astype("<i4").tobytes()
               + np.asarray(A.values, dtype=np.float64).astype("<f8").tobytes())
        rec["offset"] = offset
        rec["length"] = len(raw)
        offset += len(raw)
        records.append(rec)
        payloads.append(raw)
    manifest = json.dumps(
        {"version": 1, "counts": bundle.counts, "matrices": records},
        sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = MAGIC + struct.pack("<I", len(manifest)) + manifest + b"".join(payloads)
    check = hashlib.sha256(body).digest()[:8]
    with open(path, "wb") as f:
        f.write(body + check)


def _read_manifest(blob: bytes) -> dict:
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise BundleError("not a TSB1 bundle")
    (mlen,) = struct.unpack("<I", blob[4:8])
    if len(blob) < 8 + mlen:
        raise BundleError("truncated manifest")
    manifest = json.loads(blob[8:8 + mlen].decode("utf-8"))
    if manifest.get("version") != 1:
        raise BundleError(f"unsupported bundle version {manifest.get('version')!r}")
    return manifest


def bundle_manifest(path) -> list:
    """Metadata list without decoding any payload."""
    with open(path, "rb") as f:
        head = f.read(8)
        if len(head) < 8 or head[:4] != MAGIC:
            raise BundleError("not a TSB1 bundle")
        (mlen,) = struct.unpack("<I", head[4:8])
        manifest = _read_manifest(head + f.read(mlen))
    return [_meta_from_json(r) for r in manifest["matrices"]]


def bundle_load(path) -> DatasetBundle:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 16:
        raise BundleError("truncated bundle")
    body, check = blob[:-8], blob[-8:]
    if hashlib.sha256(body).digest()[:8] != check:
        raise BundleError("checksum mismatch")
    manifest = _read_manifest(body)
    (mlen,) = struct.unpack("<I", body[4:8])
    payload = body[8 + mlen:]
    metadata = []
    matrices = {}
    for rec in manifest["matrices"]:
        m = _meta_from_json(rec)
        n_rows, n_cols, nnz = rec["n_rows"], rec["n_cols"], rec["nnz"]
        off = rec["offset"]
        a = off
        b = a + (n_cols + 1) * 8
        # copies: frombuffer views are read-only, kernels take writable views
        col_ptr = np.frombuffer(payload[a:b], dtype="<i8").copy()
        a, b = b, b + nnz * 4
        row_idx = np.frombuffer(payload[a:b], dtype="<i4").copy()
        a, b = b, b + nnz * 8
        values = np.frombuffer(payload[a:b], dtype="<f8").copy()
        if b - off != rec["length"]:
            raise BundleError(f"payload length mismatch for {m.name!r}")
        A = SparseMatrixCsc(n_rows, n_cols, col_ptr, row_idx, values)
        A.validate()
        metadata.append(m)
        matrices[m.name] = A
    return DatasetBundle(metadata, matrices, manifest["counts"])


# ---------------------------------------------------------------------------
# filtering
# ---------------------------------------------------------------------------

def filter_dataset(directory, max_nnz=NNZ_LIMIT) -> DatasetBundle:
    """Scan a directory of .mtx files and keep the real matrices with
    nnz <= max_nnz that are square and full-rank. Per-file failures are
    recorded and do not abort the batch."""
    names = sorted(fn for fn in os.listdir(directory)
                   if fn.lower().endswith(".mtx"))
    counts = {"scanned": len(names), "real_nnz_ok": 0, "kept": 0}
    errors = []
    metadata = []
    matrices = {}
    for fn in names:
        stem = fn[:-4]
        try:
            with open(os.path.join(directory, fn)) as f:
                A, _ = parse_matrix_market(f.read())
        except UnsupportedMatrixError:
            continue  # non-real content is a filter outcome, not a failure
        except Exception as e:  # I/O and parse errors surface per file
            errors.append((fn, str(e)))
            continue
        if A.nnz > max_nnz:
            continue
        counts["real_nnz_ok"] += 1
        meta = compute_metadata(stem, A)
        if not (meta.is_square and meta.is_full_rank):
            continue
        counts["kept"] += 1
        metadata.append(meta)
        matrices[stem] = A
    return DatasetBundle(metadata, matrices, counts, errors)
