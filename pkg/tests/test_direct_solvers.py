"""LU and QR in target arithmetic against dense oracles.

Binary64 runs are compared with numpy's dense solver; textbook 2x2
factorizations are checked entry by entry; format-generic runs are
checked for bit determinism and for the residual-sanity bound.
"""

import numpy as np
import pytest
import scipy.sparse as sp

from taperbench import direct_solvers as D
from taperbench import formats as F
from taperbench import matrices as M
from taperbench import orderings as O
from taperbench.fields import (CodeField, NonRealFailure, SingularFailure,
                               XRealField)

F64 = CodeField(F.FLOAT64)


def _codes(field, A):
    return M.SparseMatrixCsc(A.n_rows, A.n_cols, A.col_ptr, A.row_idx,
                             field.vec_from_f64(np.asarray(A.values,
                                                           dtype=np.float64)))


def _dense_csc(dense):
    n_rows, n_cols = dense.shape
    ij = [(i, j) for j in range(n_cols) for i in range(n_rows)
          if dense[i, j] != 0]
    return M.csc_from_coo(n_rows, n_cols, [i for i, _ in ij],
                          [j for _, j in ij],
                          [dense[i, j] for i, j in ij])


def _random_system(n, seed, density=0.25):
    S = sp.random(n, n, density=density, random_state=seed) + sp.eye(n) * 3
    coo = S.tocoo()
    A = M.csc_from_coo(n, n, coo.row, coo.col, coo.data)
    b = np.random.default_rng(seed + 1000).standard_normal(n)
    return A, b


def _pipeline_solve(field, A, b, kind):
    """plan -> scale -> permute -> factor -> solve, x in original order."""
    plan = O.plan_lu(A) if kind == "lu" else O.plan_qr(A)
    At = _codes(field, A) if isinstance(field, CodeField) else \
        M.SparseMatrixCsc(A.n_rows, A.n_cols, A.col_ptr, A.row_idx,
                          field.vec_from_f64(np.asarray(A.values)))
    sc = O.row_scaling(field, At)
    Asc = O.apply_row_scaling(field, At, sc)
    Ap = O.apply_plan(Asc, plan)
    bt = field.vec_from_f64(np.asarray(b, dtype=np.float64))
    bp = O.permute_vector(field, O.scale_vector(field, bt, sc),
                          plan.row_perm)
    if kind == "lu":
        fac = D.lu_factor(field, Ap, plan.col_perm)
        return D.lu_solve(field, fac, bp)
    fac = D.qr_factor(field, Ap, plan.col_perm)
    return D.qr_solve(field, fac, bp)


# ---------------------------------------------------------------------------
# LU anchors
# ---------------------------------------------------------------------------

def test_lu_textbook_2x2():
    A = _dense_csc(np.array([[4.0, 3.0], [6.0, 3.0]]))
    fac = D.lu_factor(F64, _codes(F64, A))
    assert F64.vec_to_f64(fac.l_vals).tolist() == [1.5]
    assert fac.l_row_idx.tolist() == [1]
    assert F64.vec_to_f64(fac.u_vals).tolist() == [4.0, 3.0, -1.5]
    x = D.lu_solve(F64, fac, F64.vec_from_f64(np.array([7.0, 9.0])))
    assert F64.vec_to_f64(x).tolist() == [1.0, 1.0]


def test_lu_identity():
    A = _dense_csc(np.eye(3))
    fac = D.lu_factor(F64, _codes(F64, A))
    assert fac.l_col_ptr.tolist() == [0, 0, 0, 0]
    assert F64.vec_to_f64(fac.u_vals).tolist() == [1.0, 1.0, 1.0]
    e1 = F64.vec_from_f64(np.array([1.0, 0.0, 0.0]))
    assert F64.vec_to_f64(D.lu_solve(F64, fac, e1)).tolist() == [1, 0, 0]


def test_lu_zero_pivot_singular():
    A = _dense_csc(np.array([[0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(SingularFailure):
        D.lu_factor(F64, _codes(F64, A))


def test_lu_diagonal_solve():
    A = _dense_csc(np.diag([2.0, 4.0]))
    fac = D.lu_factor(F64, _codes(F64, A))
    x = D.lu_solve(F64, fac, F64.vec_from_f64(np.array([2.0, 4.0])))
    assert F64.vec_to_f64(x).tolist() == [1.0, 1.0]


def test_lu_requires_square():
    A = M.csc_from_coo(2, 3, [0, 1], [0, 1], [1.0, 1.0])
    with pytest.raises(ValueError):
        D.lu_factor(F64, _codes(F64, A))


# ---------------------------------------------------------------------------
# QR anchors
# ---------------------------------------------------------------------------

def test_qr_column_3_4_sign_choice():
    A = _dense_csc(np.array([[3.0, 0.0], [4.0, 1.0]]))
    fac = D.qr_factor(F64, _codes(F64, A))
    assert F64.to_f64(fac.r_diag[0]) == -5.0
    idx, v = fac.reflectors[0]
    assert idx.tolist() == [0, 1]
    # v = x + sign(x1)*||x||*e1 = (3+5, 4)
    assert F64.vec_to_f64(v).tolist() == [8.0, 4.0]
    x = D.qr_solve(F64, fac, F64.vec_from_f64(np.array([3.0, 4.0])))
    assert np.allclose(F64.vec_to_f64(x), [1.0, 0.0], atol=1e-15)


def test_qr_identity():
    A = _dense_csc(np.eye(3))
    fac = D.qr_factor(F64, _codes(F64, A))
    assert all(len(idx) == 0 for idx, _ in fac.reflectors)
    assert F64.vec_to_f64(fac.r_vals).tolist() == [1.0, 1.0, 1.0]
    b = F64.vec_from_f64(np.array([5.0, -2.0, 0.5]))
    assert F64.vec_to_f64(D.qr_solve(F64, fac, b)).tolist() == [5.0, -2.0, 0.5]


def test_qr_upper_triangular_passthrough():
    dense = np.array([[2.0, 7.0], [0.0, 3.0]])
    A = _dense_csc(dense)
    fac = D.qr_factor(F64, _codes(F64, A))
    assert all(len(idx) == 0 for idx, _ in fac.reflectors)
    got = np.zeros((2, 2))
    for j in range(2):
        for t in range(fac.r_col_ptr[j], fac.r_col_ptr[j + 1]):
            got[fac.r_row_idx[t], j] = F64.to_f64(int(fac.r_vals[t]))
    assert np.array_equal(got, dense)


def test_qr_diagonal_solve():
    A = _dense_csc(np.diag([2.0, 4.0]))
    fac = D.qr_factor(F64, _codes(F64, A))
    x = D.qr_solve(F64, fac, F64.vec_from_f64(np.array([2.0, 4.0])))
    assert F64.vec_to_f64(x).tolist() == [1.0, 1.0]


def test_qr_zero_column():
    A = M.csc_from_coo(2, 2, [0, 1], [0, 0], [1.0, 1.0])
    with pytest.raises(SingularFailure):
        D.qr_factor(F64, _codes(F64, A))
    fac = D.qr_factor(F64, _codes(F64, A), allow_singular=True)
    assert F64.is_zero(int(fac.r_diag[1]))
    with pytest.raises(SingularFailure):
        D.qr_solve(F64, fac, F64.vec_from_f64(np.array([1.0, 1.0])))


# ---------------------------------------------------------------------------
# invariants
# ---------------------------------------------------------------------------

def test_oracle_equivalence_binary64():
    rng = np.random.default_rng(0xD1CE)
    for trial in range(50):
        n = int(rng.integers(5, 51))
        A, b = _random_system(n, trial)
        xref = np.linalg.solve(A.to_dense(), b)
        for kind in ("lu", "qr"):
            x = F64.vec_to_f64(_pipeline_solve(F64, A, b, kind))
            err = np.linalg.norm(x - xref) / np.linalg.norm(xref)
            assert err <= 1e-10, (kind, n, trial, err)


def test_qr_reflectors_are_involutions():
    A, _ = _random_system(20, 3)
    fac = D.qr_factor(F64, _codes(F64, A))
    rng = np.random.default_rng(9)
    w0 = rng.standard_normal(20)
    w = F64.vec_from_f64(w0)
    applied = [r for r in fac.reflectors if len(r[0])]
    for idx, v in applied:
        D._apply_reflector(F64, idx, v, w)
    for idx, v in reversed(applied):
        D._apply_reflector(F64, idx, v, w)
    assert np.max(np.abs(F64.vec_to_f64(w) - w0)) <= 1e-12


@pytest.mark.parametrize("fid", F.ALL_FORMATS, ids=lambda f: f.name)
def test_bit_deterministic_per_format(fid):
    field = CodeField(fid)
    dense = np.array([
        [4.0, 1.0, 0.0, 0.5, 0.0, 0.0],
        [1.0, 5.0, 1.0, 0.0, 0.0, 0.25],
        [0.0, 1.0, 4.5, 1.0, 0.0, 0.0],
        [0.5, 0.0, 1.0, 5.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 4.0, 1.0],
        [0.0, 0.25, 0.0, 0.0, 1.0, 3.5]])
    A = _dense_csc(dense)
    b = np.array([1.0, -0.5, 0.25, 2.0, -1.0, 0.75])
    for kind in ("lu", "qr"):
        x1 = _pipeline_solve(field, A, b, kind)
        x2 = _pipeline_solve(field, A, b, kind)
        assert np.array_equal(np.asarray(x1), np.asarray(x2))


@pytest.mark.parametrize("fid", F.ALL_FORMATS, ids=lambda f: f.name)
def test_residual_sanity_well_conditioned(fid):
    field = CodeField(fid)
    dense = np.array([
        [4.0, 1.0, 0.0, 0.5],
        [1.0, 5.0, 1.0, 0.0],
        [0.0, 1.0, 4.5, 1.0],
        [0.5, 0.0, 1.0, 5.0]])
    A = _dense_csc(dense)
    b = np.array([1.0, 0.5, -0.75, 0.25])
    kappa = (np.abs(dense).sum(axis=0).max()
             * np.abs(np.linalg.inv(dense)).sum(axis=0).max())
    assert kappa <= 1e3
    xref = np.linalg.solve(dense, b)
    eps = float(F.machine_eps_by_width(fid.width))
    for kind in ("lu", "qr"):
        x = field.vec_to_f64(_pipeline_solve(field, A, b, kind))
        err = np.linalg.norm(x - xref) / np.linalg.norm(xref)
        assert err <= 100 * kappa * eps, (kind, err, 100 * kappa * eps)


def test_reference_field_path():
    xf = XRealField()
    A, b = _random_system(15, 77)
    x = xf.vec_to_f64(_pipeline_solve(xf, A, b, "qr"))
    xref = np.linalg.solve(A.to_dense(), b)
    assert np.linalg.norm(x - xref) / np.linalg.norm(xref) <= 1e-13


def test_nonreal_propagation():
    f16 = CodeField(F.FLOAT16)
    # the elimination update 6e4 - (-1)*6e4 = 1.2e5 overflows float16
    dense = np.array([[6.0e4, 6.0e4], [-6.0e4, 6.0e4]])
    A = _dense_csc(dense)
    with pytest.raises(NonRealFailure):
        D.lu_factor(f16, _codes(f16, A))
    # a NaN in b propagates through an otherwise healthy solve
    eye = _dense_csc(np.eye(2))
    fac = D.lu_factor(f16, _codes(f16, eye))
    b = f16.vec_from_f64(np.array([1.0, np.nan]))
    with pytest.raises(NonRealFailure):
        D.lu_solve(f16, fac, b)
