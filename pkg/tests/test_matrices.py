"""Matrix ingestion, metadata, filtering, and bundle round trips.

Parser results are checked against scipy.io.mmread and hand-expanded
dense oracles; the condition estimator against exact dense inversion;
bundles against byte-level determinism and deliberate corruption.
"""

import json
import struct

import numpy as np
import pytest
import scipy.io
from hypothesis import given, settings
from hypothesis import strategies as st

from taperbench import matrices as M
from taperbench.xreal import XReal


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def test_identity_coordinate():
    A, header = M.parse_matrix_market(
        "%%MatrixMarket matrix coordinate real general\n"
        "2 2 2\n1 1 1.0\n2 2 1.0\n")
    assert A.col_ptr.tolist() == [0, 1, 2]
    assert A.row_idx.tolist() == [0, 1]
    assert A.values.tolist() == [1.0, 1.0]
    assert header == {"format": "coordinate", "field": "real",
                      "symmetry": "general"}


def test_symmetric_expansion_matches_dense_oracle():
    text = ("%%MatrixMarket matrix coordinate real symmetric\n"
            "2 2 3\n1 1 2.0\n2 1 1.0\n2 2 2.0\n")
    A, _ = M.parse_matrix_market(text)
    assert A.nnz == 4
    expect = np.array([[2.0, 1.0], [1.0, 2.0]])
    assert np.array_equal(A.to_dense(), expect)
    A.validate()


def test_skew_symmetric_expansion():
    text = ("%%MatrixMarket matrix coordinate real skew-symmetric\n"
            "3 3 2\n2 1 5.0\n3 2 -2.0\n")
    A, _ = M.parse_matrix_market(text)
    d = A.to_dense()
    assert np.array_equal(d, -d.T)
    assert d[1, 0] == 5.0 and d[0, 1] == -5.0
    assert d[2, 1] == -2.0 and d[1, 2] == 2.0


def test_array_general_and_symmetric():
    text = ("%%MatrixMarket matrix array real general\n"
            "2 2\n1.0\n3.0\n2.0\n4.0\n")
    A, _ = M.parse_matrix_market(text)
    assert np.array_equal(A.to_dense(), np.array([[1.0, 2.0], [3.0, 4.0]]))
    text2 = ("%%MatrixMarket matrix array real symmetric\n"
             "2 2\n2.0\n1.0\n3.0\n")
    B, _ = M.parse_matrix_market(text2)
    assert np.array_equal(B.to_dense(), np.array([[2.0, 1.0], [1.0, 3.0]]))


def test_integer_field():
    A, h = M.parse_matrix_market(
        "%%MatrixMarket matrix coordinate integer general\n"
        "2 2 2\n1 2 -3\n2 1 7\n")
    assert h["field"] == "integer"
    assert np.array_equal(A.to_dense(), np.array([[0.0, -3.0], [7.0, 0.0]]))


def test_complex_and_pattern_rejected():
    with pytest.raises(M.UnsupportedMatrixError):
        M.parse_matrix_market(
            "%%MatrixMarket matrix coordinate complex general\n"
            "1 1 1\n1 1 1.0 0.0\n")
    with pytest.raises(M.UnsupportedMatrixError):
        M.parse_matrix_market(
            "%%MatrixMarket matrix coordinate pattern general\n"
            "1 1 1\n1 1\n")
    with pytest.raises(M.UnsupportedMatrixError):
        M.parse_matrix_market(
            "%%MatrixMarket matrix coordinate real hermitian\n"
            "1 1 1\n1 1 1.0\n")


@pytest.mark.parametrize("text", [
    "not a banner\n1 1 1\n",
    "%%MatrixMarket vector coordinate real general\n1 1 1\n",
    "%%MatrixMarket matrix coordinate real general\nxx yy zz\n",
    "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n",
    "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n",
    "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 0 1.0\n",
    "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 oops\n",
    "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1.0\n",
    "%%MatrixMarket matrix coordinate real skew-symmetric\n2 2 1\n1 1 3.0\n",
    "%%MatrixMarket matrix array real general\n2 2\n1.0\n2.0\n3.0\n",
    "",
])
def test_malformed_inputs_rejected(text):
    with pytest.raises(M.MatrixMarketError):
        M.parse_matrix_market(text)


def test_duplicates_summed_and_zeros_dropped():
    A, _ = M.parse_matrix_market(
        "%%MatrixMarket matrix coordinate real general\n"
        "2 2 4\n1 1 2.5\n1 1 1.5\n2 2 3.0\n2 2 -3.0\n")
    assert A.nnz == 1
    assert A.to_dense()[0, 0] == 4.0


def test_comments_and_blank_lines_skipped():
    A, _ = M.parse_matrix_market(
        "%%MatrixMarket matrix coordinate real general\n"
        "% a comment\n\n2 2 1\n% another\n2 1 9.0\n\n")
    assert A.to_dense()[1, 0] == 9.0


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_csc_well_formed_and_matches_scipy(data):
    m = data.draw(st.integers(1, 8))
    n = data.draw(st.integers(1, 8))
    entries = data.draw(st.lists(
        st.tuples(st.integers(0, m - 1), st.integers(0, n - 1),
                  st.floats(-1e6, 1e6, allow_nan=False)),
        max_size=30))
    rows = [e[0] for e in entries]
    cols = [e[1] for e in entries]
    vals = [e[2] for e in entries]
    A = M.csc_from_coo(m, n, rows, cols, vals)
    A.validate()
    import scipy.sparse as sp
    oracle = sp.coo_matrix((vals, (rows, cols)), shape=(m, n)).toarray()
    assert np.array_equal(A.to_dense(), oracle)


def test_writer_round_trips_through_scipy(tmp_path):
    import scipy.sparse as sp
    S = sp.random(7, 7, density=0.3, random_state=5)
    coo = S.tocoo()
    A = M.csc_from_coo(7, 7, coo.row, coo.col, coo.data)
    p = tmp_path / "w.mtx"
    M.write_matrix_market(p, A, comment="round trip")
    B, _ = M.parse_matrix_market(p.read_text())
    assert np.array_equal(A.to_dense(), B.to_dense())
    oracle = np.asarray(scipy.io.mmread(str(p)).toarray())
    assert np.array_equal(A.to_dense(), oracle)


# ---------------------------------------------------------------------------
# metadata
# ---------------------------------------------------------------------------

def _eye(n):
    return M.csc_from_coo(n, n, range(n), range(n), [1.0] * n)


def test_identity_metadata():
    meta = M.compute_metadata("eye3", _eye(3))
    assert meta.nnz == 3
    assert float(meta.cond1_estimate) == 1.0
    assert meta.is_square and meta.is_symmetric
    assert meta.is_posdef and meta.is_full_rank
    assert float(meta.abs_min_nonzero) == 1.0
    assert float(meta.abs_max) == 1.0


def test_diagonal_condition_exact():
    A = M.csc_from_coo(2, 2, [0, 1], [0, 1], [1.0, 1e-5])
    assert float(M.compute_metadata("d", A).cond1_estimate) == pytest.approx(
        1e5, rel=1e-12)
    B = M.csc_from_coo(2, 2, [0, 1], [0, 1], [2.0, 1.0])
    assert float(M.estimate_cond1(B)) == 2.0


def test_zero_column_not_full_rank():
    A = M.csc_from_coo(2, 2, [0, 1], [0, 0], [1.0, 2.0])
    meta = M.compute_metadata("z", A)
    assert not meta.is_full_rank
    assert meta.cond1_estimate == XReal.inf


def test_hilbert_cond_within_factor_three():
    n = 4
    ij = [(i, j) for i in range(n) for j in range(n)]
    A = M.csc_from_coo(n, n, [i for i, _ in ij], [j for _, j in ij],
                       [1.0 / (i + j + 1) for i, j in ij])
    est = float(M.estimate_cond1(A))
    dense = A.to_dense()
    true = (np.abs(dense).sum(axis=0).max()
            * np.abs(np.linalg.inv(dense)).sum(axis=0).max())
    assert true / 3 <= est <= 3 * true
    assert est == pytest.approx(2.8e4, rel=0.05)


def test_singular_condition_infinite():
    A = M.csc_from_coo(2, 2, [0, 1], [0, 0], [1.0, 1.0])
    assert M.estimate_cond1(A) == XReal.inf


def test_cond_estimator_bounds_on_random_suite():
    rng = np.random.default_rng(0xC0ED)
    checked = 0
    while checked < 50:
        n = int(rng.integers(3, 13))
        dense = rng.uniform(-1, 1, size=(n, n))
        if abs(np.linalg.det(dense)) < 1e-6:
            continue
        ij = [(i, j) for i in range(n) for j in range(n)]
        A = M.csc_from_coo(n, n, [i for i, _ in ij], [j for _, j in ij],
                           [dense[i, j] for i, j in ij])
        est = float(M.estimate_cond1(A))
        true = (np.abs(dense).sum(axis=0).max()
                * np.abs(np.linalg.inv(dense)).sum(axis=0).max())
        assert est >= 1.0
        assert true / 3 <= est <= 3 * true, (n, est, true)
        checked += 1


def test_metadata_deterministic():
    import scipy.sparse as sp
    S = sp.random(9, 9, density=0.4, random_state=8) + sp.eye(9) * 2
    coo = S.tocoo()
    A = M.csc_from_coo(9, 9, coo.row, coo.col, coo.data)
    a = M.compute_metadata("m", A)
    b = M.compute_metadata("m", A)
    assert a == b
    assert float(a.cond1_estimate) == float(b.cond1_estimate)


def test_posdef_flags():
    P = M.csc_from_coo(2, 2, [0, 1, 0, 1], [0, 0, 1, 1],
                       [2.0, 1.0, 1.0, 2.0])
    assert M.compute_metadata("p", P).is_posdef
    Ind = M.csc_from_coo(2, 2, [0, 1, 0, 1], [0, 0, 1, 1],
                         [1.0, 2.0, 2.0, 1.0])  # eigenvalues 3, -1
    assert not M.compute_metadata("i", Ind).is_posdef
    N = M.csc_from_coo(2, 2, [0, 0, 1], [0, 1, 1], [1.0, 1.0, 1.0])
    meta = M.compute_metadata("n", N)
    assert not meta.is_symmetric and not meta.is_posdef


# ---------------------------------------------------------------------------
# filtering
# ---------------------------------------------------------------------------

def test_filter_empty_dir(tmp_path):
    bundle = M.filter_dataset(tmp_path)
    assert len(bundle) == 0
    assert bundle.counts == {"scanned": 0, "real_nnz_ok": 0, "kept": 0}


def test_filter_single_identity(tmp_path):
    M.write_matrix_market(tmp_path / "eye.mtx", _eye(3))
    bundle = M.filter_dataset(tmp_path)
    assert len(bundle) == 1
    assert bundle.metadata[0].name == "eye"
    assert bundle.counts["kept"] == 1


def test_filter_discards_and_errors(tmp_path):
    M.write_matrix_market(tmp_path / "keep.mtx", _eye(4))
    # complex: non-real, silently filtered
    (tmp_path / "cplx.mtx").write_text(
        "%%MatrixMarket matrix coordinate complex general\n"
        "1 1 1\n1 1 1.0 0.0\n")
    # singular: fails full-rank
    (tmp_path / "sing.mtx").write_text(
        "%%MatrixMarket matrix coordinate real general\n"
        "2 2 2\n1 1 1.0\n2 1 1.0\n")
    # rectangular
    (tmp_path / "rect.mtx").write_text(
        "%%MatrixMarket matrix coordinate real general\n"
        "2 3 1\n1 1 1.0\n")
    # corrupt
    (tmp_path / "bad.mtx").write_text("garbage\n")
    # oversized nnz
    n = 101
    big = M.csc_from_coo(n, n, *zip(*[(i, j) for i in range(n)
                                      for j in range(n)]),
                         np.ones(n * n))
    M.write_matrix_market(tmp_path / "big.mtx", big)
    bundle = M.filter_dataset(tmp_path)
    assert [m.name for m in bundle.metadata] == ["keep"]
    assert bundle.counts["scanned"] == 6
    assert bundle.counts["real_nnz_ok"] == 3  # keep, sing, rect
    assert bundle.counts["kept"] == 1
    assert len(bundle.errors) == 1 and bundle.errors[0][0] == "bad.mtx"


def test_filter_idempotent(tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    import scipy.sparse as sp
    for k in range(3):
        S = sp.random(6, 6, density=0.3, random_state=k) + sp.eye(6) * 2
        coo = S.tocoo()
        A = M.csc_from_coo(6, 6, coo.row, coo.col, coo.data)
        M.write_matrix_market(src / f"m{k}.mtx", A)
    M.write_matrix_market(src / "bad_sing.mtx",
                          M.csc_from_coo(2, 2, [0, 1], [0, 0], [1.0, 1.0]))
    first = M.filter_dataset(src)
    again = tmp_path / "again"
    again.mkdir()
    for meta in first.metadata:
        M.write_matrix_market(again / f"{meta.name}.mtx",
                              first.matrices[meta.name])
    second = M.filter_dataset(again)
    assert [m.name for m in second.metadata] == [m.name for m in first.metadata]
    assert second.counts["kept"] == second.counts["scanned"]
    for meta in first.metadata:
        assert np.array_equal(first.matrices[meta.name].to_dense(),
                              second.matrices[meta.name].to_dense())


# ---------------------------------------------------------------------------
# bundle
# ---------------------------------------------------------------------------

def _small_bundle():
    mats = {}
    metas = []
    specs = [("a", _eye(3)),
             ("b", M.csc_from_coo(2, 2, [0, 1, 0], [0, 1, 1],
                                  [2.0, 4.0, -1.0])),
             ("c", M.csc_from_coo(4, 4, [0, 1, 2, 3], [0, 1, 2, 3],
                                  [1.0, 2.0, 3.0, 4.0]))]
    for name, A in specs:
        mats[name] = A
        metas.append(M.compute_metadata(name, A))
    return M.DatasetBundle(metas, mats,
                           {"scanned": 3, "real_nnz_ok": 3, "kept": 3})


def test_bundle_round_trip(tmp_path):
    bundle = _small_bundle()
    p = tmp_path / "d.tsb"
    M.bundle_write(bundle, p)
    loaded = M.bundle_load(p)
    assert [m.name for m in loaded.metadata] == ["a", "b", "c"]
    for name in "abc":
        A, B = bundle.matrices[name], loaded.matrices[name]
        assert np.array_equal(A.col_ptr, B.col_ptr)
        assert np.array_equal(A.row_idx, B.row_idx)
        assert np.array_equal(np.asarray(A.values), np.asarray(B.values))
    for a, b in zip(bundle.metadata, loaded.metadata):
        assert a == b
    assert loaded.counts == bundle.counts


def test_bundle_bytes_deterministic(tmp_path):
    bundle = _small_bundle()
    p1, p2 = tmp_path / "1.tsb", tmp_path / "2.tsb"
    M.bundle_write(bundle, p1)
    M.bundle_write(bundle, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_bundle_truncation_detected(tmp_path):
    p = tmp_path / "d.tsb"
    M.bundle_write(_small_bundle(), p)
    blob = p.read_bytes()
    p.write_bytes(blob[:-5])
    with pytest.raises(M.BundleError):
        M.bundle_load(p)
    p.write_bytes(blob[:4] + b"\x00" + blob[5:])
    with pytest.raises(M.BundleError):
        M.bundle_load(p)


def test_bundle_version_mismatch(tmp_path):
    p = tmp_path / "d.tsb"
    M.bundle_write(_small_bundle(), p)
    blob = p.read_bytes()
    (mlen,) = struct.unpack("<I", blob[4:8])
    manifest = json.loads(blob[8:8 + mlen])
    manifest["version"] = 2
    raw = json.dumps(manifest, sort_keys=True,
                     separators=(",", ":")).encode()
    body = M.MAGIC + struct.pack("<I", len(raw)) + raw + blob[8 + mlen:-8]
    import hashlib
    p.write_bytes(body + hashlib.sha256(body).digest()[:8])
    with pytest.raises(M.BundleError, match="version"):
        M.bundle_load(p)


def test_manifest_only_read(tmp_path):
    p = tmp_path / "d.tsb"
    bundle = _small_bundle()
    M.bundle_write(bundle, p)
    metas = M.bundle_manifest(p)
    assert metas == bundle.metadata
