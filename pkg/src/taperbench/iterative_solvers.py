"""Mixed-precision iterative refinement and ILU(0)-preconditioned GMRES.

Refinement runs over a precision triple (L, W, H): the matrix is factored
in L, the solver state lives in W, and residuals plus the convergence
test are evaluated in H.  GMRES runs entirely in one target format with
restart min(20, n), at most n total inner iterations, modified
Gram-Schmidt, and a relative tolerance of sqrt(eps) of the reference
IEEE type of the same bit width.
"""

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import formats as F
from . import kernels as K
from .direct_solvers import LuFactors, lu_factor, lu_solve
from .fields import CodeField, NonRealFailure, SingularFailure, SolveFailure
from .matrices import SparseMatrixCsc
from .orderings import (PlanFailure, RowScaling, apply_plan,
                        apply_row_scaling, permute_vector, plan_lu,
                        row_scaling, scale_vector)

CONVERGED = "converged"
SINGULAR = "singular"
MAX_ITER = "max_iter"

# error tolerance per (L, W, H) width configuration
MPIR_TOLERANCES = {
    (8, 16, 32): 1e-3,
    (16, 16, 32): 1e-3,
    (16, 32, 32): 1e-6,
    (16, 32, 64): 1e-9,
}

_FLOAT_SLOTS = {8: F.FLOAT8_E4M3, 16: F.FLOAT16, 32: F.FLOAT32,
                64: F.FLOAT64}


@dataclass(frozen=True)
class PrecisionTriple:
    """Widths (L, W, H) within one format family, L <= W <= H."""

    family: str
    low: int
    working: int
    high: int
    use_bfloat16: bool = False

    def __post_init__(self):
        if not (self.low <= self.working <= self.high):
            raise ValueError("widths must satisfy L <= W <= H")
        for w in (self.low, self.working, self.high):
            self.format_for(w)

    def format_for(self, width: int) -> F.FormatId:
        if self.family == "ieee":
            if width == 16 and self.use_bfloat16:
                return F.BFLOAT16
            try:
                return _FLOAT_SLOTS[width]
            except KeyError:
                raise ValueError(f"no float format at width {width}")
        return F.by_family_width(self.family, width)

    @property
    def low_format(self):
        return self.format_for(self.low)

    @property
    def working_format(self):
        return self.format_for(self.working)

    @property
    def high_format(self):
        return self.format_for(self.high)

    def label(self) -> str:
        return f"{self.family}_{self.low:02d}_{self.working:02d}_{self.high:02d}"


def mpir_tolerance(t: PrecisionTriple) -> float:
    key = (t.low, t.working, t.high)
    try:
        return MPIR_TOLERANCES[key]
    except KeyError:
        raise ValueError(f"no default tolerance for widths {key}") from None


def gmres_tolerance(width: int) -> float:
    """sqrt of the machine epsilon of the same-width reference IEEE type."""
    return math.sqrt(float(F.machine_eps_by_width(width)))


@dataclass
class IterationOutcome:
    status: str
    iterations: int
    x: object = None
    # backward errors seen at each convergence check (refinement only)
    etas: tuple = ()


@dataclass
class Ilu0Factors:
    """Level-0 incomplete factors; storage mirrors LuFactors, no perm."""

    n: int
    l_col_ptr: np.ndarray
    l_row_idx: np.ndarray
    l_vals: object
    u_col_ptr: np.ndarray
    u_row_idx: np.ndarray
    u_vals: object


def _vec_of(field, items):
    v = field.vec(len(items))
    for i, e in enumerate(items):
        field.set(v, i, e)
    return v


def _abs_vec(field, v):
    out = field.vec(len(v))
    for i in range(len(v)):
        field.set(out, i, field.abs(field.get(v, i)))
    return out


def mat_norm_inf(field, A: SparseMatrixCsc):
    """Max absolute row sum, accumulated in field arithmetic."""
    acc = field.vec(A.n_rows)
    av = _abs_vec(field, A.values)
    field.scatter_axpy(field.one, av, A.row_idx, acc)
    return field.norm_inf(acc)


def normwise_backward_error(field, A: SparseMatrixCsc, x, b,
                            norm_a=None, norm_b=None) -> float:
    """eta = |b - Ax|_inf / (|A|_inf |x|_inf + |b|_inf); non-real -> inf."""
    if field.count_nonreal(x):
        return math.inf
    ax = field.csc_matvec(A.n_cols, A.col_ptr, A.row_idx, A.values, x)
    r = field.vec(A.n_rows)
    field.ew(K.OP_SUB, b, ax, r)
    if field.count_nonreal(r):
        return math.inf
    if norm_a is None:
        norm_a = mat_norm_inf(field, A)
    if norm_b is None:
        norm_b = field.norm_inf(b)
    den = field.add(field.mul(norm_a, field.norm_inf(x)), norm_b)
    eta = field.div(field.norm_inf(r), den)
    if field.is_nonreal(eta):
        return math.inf
    return field.to_f64(eta)


# ---------------------------------------------------------------------------
# mixed-precision iterative refinement
# ---------------------------------------------------------------------------

def mpir(A, b, triple: PrecisionTriple, tol=None,
         max_iter=100) -> IterationOutcome:
    """Refine the solution of Ax = b given in working-precision codes.

    A.values and b hold W codes.  The factorization (and its row
    scaling) is carried out in L; the factors are then embedded into W,
    where the initial solve and every correction solve run.  Residuals
    and the backward-error test use H; the running solution accumulates
    in H so the test is not floored by W quantization, and the returned
    x is rounded to W once at the end.
    """
    if tol is None:
        tol = mpir_tolerance(triple)
    f_l = CodeField(triple.low_format)
    f_w = CodeField(triple.working_format)
    f_h = CodeField(triple.high_format)
    n = A.n_rows

    def up_to_h(v):
        return v if triple.high == triple.working else f_w.convert_vec(f_h, v)

    try:
        plan = plan_lu(SparseMatrixCsc(n, n, A.col_ptr, A.row_idx,
                                       f_w.vec_to_f64(A.values)))
        A_l = SparseMatrixCsc(n, n, A.col_ptr, A.row_idx,
                              f_w.convert_vec(f_l, A.values))
        scaling = row_scaling(f_l, A_l)
        A_lp = apply_plan(apply_row_scaling(f_l, A_l, scaling), plan)
        fac_l = lu_factor(f_l, A_lp, plan.col_perm)
    except (PlanFailure, SolveFailure):
        return IterationOutcome(SINGULAR, 0)

    # embed the L factors and scaling into W (exact: same-family widening)
    fac = LuFactors(n, fac_l.col_perm, fac_l.l_col_ptr, fac_l.l_row_idx,
                    f_l.convert_vec(f_w, fac_l.l_vals), fac_l.u_col_ptr,
                    fac_l.u_row_idx, f_l.convert_vec(f_w, fac_l.u_vals))
    scaling_w = RowScaling(f_l.convert_vec(f_w, scaling.factors))

    def correct(r_w):
        rp = permute_vector(f_w, scale_vector(f_w, r_w, scaling_w),
                            plan.row_perm)
        return lu_solve(f_w, fac, rp)

    try:
        x_w = correct(b)
    except SolveFailure:
        return IterationOutcome(SINGULAR, 0)

    A_h = SparseMatrixCsc(n, n, A.col_ptr, A.row_idx,
                          up_to_h(A.values))
    b_h = up_to_h(b)
    norm_a = mat_norm_inf(f_h, A_h)
    norm_b = f_h.norm_inf(b_h)
    x_h = up_to_h(x_w)

    etas = []
    for it in range(max_iter + 1):
        ax = f_h.csc_matvec(n, A_h.col_ptr, A_h.row_idx, A_h.values, x_h)
        r_h = f_h.vec(n)
        f_h.ew(K.OP_SUB, b_h, ax, r_h)
        eta = math.inf
        if not f_h.count_nonreal(x_h) and not f_h.count_nonreal(r_h):
            den = f_h.add(f_h.mul(norm_a, f_h.norm_inf(x_h)), norm_b)
            e = f_h.div(f_h.norm_inf(r_h), den)
            if not f_h.is_nonreal(e):
                eta = f_h.to_f64(e)
        etas.append(eta)
        if eta <= tol:
            x_out = x_h if triple.high == triple.working else \
                f_h.convert_vec(f_w, x_h)
            return IterationOutcome(CONVERGED, it, x_out, tuple(etas))
        if eta == math.inf or it == max_iter:
            break
        r_w = r_h if triple.high == triple.working else \
            f_h.convert_vec(f_w, r_h)
        try:
            c_w = correct(r_w)
        except SolveFailure:
            break
        f_h.axpy(f_h.one, up_to_h(c_w), x_h)
    return IterationOutcome(MAX_ITER, min(it, max_iter), etas=tuple(etas))


# ---------------------------------------------------------------------------
# ILU(0)
# ---------------------------------------------------------------------------

def ilu0_factor(field, A: SparseMatrixCsc) -> Ilu0Factors:
    """Left-looking incomplete LU keeping only positions of A plus diag."""
    n = A.n_rows
    if n != A.n_cols:
        raise ValueError("ILU(0) requires a square matrix")
    work = field.vec(n)
    mask = np.zeros(n, dtype=np.uint8)
    l_ptr, u_ptr = [0], [0]
    u_rows, u_cols_vals = [], []
    l_row_arr, l_val_arr = [], []
    for j in range(n):
        lo, hi = A.col_ptr[j], A.col_ptr[j + 1]
        pat = A.row_idx[lo:hi]
        for t in range(lo, hi):
            field.set(work, pat[t - lo], field.get(A.values, t))
            mask[pat[t - lo]] = 1
        mask[j] = 1
        for t in range(lo, hi):
            k = int(pat[t - lo])
            if k >= j:
                break
            xk = field.get(work, k)
            if field.is_zero(xk):
                continue
            field.scatter_axpy_masked(field.neg(xk), l_val_arr[k],
                                      l_row_arr[k], work, mask)
        pivot = field.get(work, j)
        if field.is_nonreal(pivot):
            raise NonRealFailure(f"non-real ILU(0) pivot in column {j}")
        if field.is_zero(pivot):
            raise SingularFailure(f"zero ILU(0) pivot in column {j}")
        urows, uvals = [], []
        lrows, lvals = [], []
        for i in sorted(set(pat.tolist()) | {j}):
            e = field.get(work, i)
            if i < j:
                if not field.is_zero(e):
                    if field.is_nonreal(e):
                        raise NonRealFailure(
                            f"non-real ILU(0) entry in column {j}")
                    urows.append(i)
                    uvals.append(e)
            elif i > j:
                if not field.is_zero(e):
                    q = field.div(e, pivot)
                    if field.is_nonreal(q):
                        raise NonRealFailure(
                            f"non-real ILU(0) multiplier in column {j}")
                    if not field.is_zero(q):
                        lrows.append(i)
                        lvals.append(q)
            field.set(work, i, field.zero)
            mask[i] = 0
        urows.append(j)
        uvals.append(pivot)
        u_rows.append(np.array(urows, dtype=np.int32))
        u_cols_vals.append(uvals)
        u_ptr.append(u_ptr[-1] + len(urows))
        l_row_arr.append(np.array(lrows, dtype=np.int32))
        l_val_arr.append(_vec_of(field, lvals))
        l_ptr.append(l_ptr[-1] + len(lrows))
    l_vals = _vec_of(field, [field.get(c, i) for c in l_val_arr
                             for i in range(len(c))])
    u_vals = _vec_of(field, [e for c in u_cols_vals for e in c])
    return Ilu0Factors(
        n,
        np.array(l_ptr, dtype=np.int64),
        np.concatenate(l_row_arr) if l_row_arr else np.zeros(0, np.int32),
        l_vals,
        np.array(u_ptr, dtype=np.int64),
        np.concatenate(u_rows) if u_rows else np.zeros(0, np.int32),
        u_vals,
    )


def ilu_apply(field, M: Ilu0Factors, v):
    """w = U^-1 L^-1 v; the preconditioner application."""
    w = field.copy(v)
    field.lower_solve_unit(M.n, M.l_col_ptr, M.l_row_idx, M.l_vals, w)
    field.upper_solve(M.n, M.u_col_ptr, M.u_row_idx, M.u_vals, w)
    return w


# ---------------------------------------------------------------------------
# restarted GMRES
# ---------------------------------------------------------------------------

class _Small:
    """Dense (rows x cols) scratch stored in a flat field container."""

    def __init__(self, field, rows, cols):
        self.f = field
        self.rows = rows
        self.v = field.vec(rows * cols)

    def get(self, i, j):
        return self.f.get(self.v, j * self.rows + i)

    def set(self, i, j, e):
        self.f.set(self.v, j * self.rows + i, e)


def gmres(field, A: SparseMatrixCsc, b, M: Ilu0Factors = None,
          restart=None, max_iter=None, tol=None,
          trace=None) -> IterationOutcome:
    """Left-preconditioned restarted GMRES in one target format.

    Convergence compares the Givens-rotation residual estimate against
    tol * |M^-1 b|_2, both held in target codes; the true residual is
    recomputed at every restart.  Iterations count total inner steps.
    A dict passed as trace receives the last cycle's Krylov basis.
    """
    n = A.n_rows
    if restart is None:
        restart = min(20, n)
    if max_iter is None:
        max_iter = n
    if tol is None:
        tol = gmres_tolerance(field.fid.width)

    def precond(v):
        return ilu_apply(field, M, v) if M is not None else field.copy(v)

    def nonreal(*vs):
        return any(field.count_nonreal(v) for v in vs)

    x = field.vec(n)
    total = 0
    tol_code = None
    while True:
        ax = field.csc_matvec(n, A.col_ptr, A.row_idx, A.values, x)
        r = field.vec(n)
        field.ew(K.OP_SUB, b, ax, r)
        z = precond(r)
        if nonreal(z):
            return IterationOutcome(MAX_ITER, total, x)
        beta = field.sqrt(field.sum_sq(z))
        if field.is_nonreal(beta):
            return IterationOutcome(MAX_ITER, total, x)
        if tol_code is None:
            tol_code = field.mul(field.from_f64(tol), beta)
        if field.le(field.abs(beta), tol_code):
            return IterationOutcome(CONVERGED, total, x)
        if total >= max_iter:
            return IterationOutcome(MAX_ITER, total, x)
        v0 = field.copy(z)
        field.scale(field.div(field.one, beta), v0)
        basis = [v0]
        if trace is not None:
            trace["basis"] = basis
        h = _Small(field, restart + 1, restart)
        cs = field.vec(restart)
        sn = field.vec(restart)
        g = field.vec(restart + 1)
        field.set(g, 0, beta)
        width = 0
        converged = False
        for j in range(restart):
            total += 1
            width = j + 1
            w = precond(field.csc_matvec(n, A.col_ptr, A.row_idx,
                                         A.values, basis[j]))
            if nonreal(w):
                return IterationOutcome(MAX_ITER, total, x)
            for i in range(j + 1):
                hij = field.dot(basis[i], w)
                h.set(i, j, hij)
                field.axpy(field.neg(hij), basis[i], w)
            hlast = field.sqrt(field.sum_sq(w))
            h.set(j + 1, j, hlast)
            if field.is_nonreal(hlast):
                return IterationOutcome(MAX_ITER, total, x)
            if not field.is_zero(hlast) and j + 1 < restart:
                vn = field.copy(w)
                field.scale(field.div(field.one, hlast), vn)
                basis.append(vn)
            # rotate the new column through the accumulated Givens pairs
            for i in range(j):
                hi = h.get(i, j)
                hi1 = h.get(i + 1, j)
                ci = field.get(cs, i)
                si = field.get(sn, i)
                h.set(i, j, field.add(field.mul(ci, hi),
                                      field.mul(si, hi1)))
                h.set(i + 1, j, field.sub(field.mul(ci, hi1),
                                          field.mul(si, hi)))
            hjj = h.get(j, j)
            hj1 = h.get(j + 1, j)
            rho = field.sqrt(field.add(field.mul(hjj, hjj),
                                       field.mul(hj1, hj1)))
            if field.is_nonreal(rho) or field.is_zero(rho):
                return IterationOutcome(MAX_ITER, total, x)
            c = field.div(hjj, rho)
            s = field.div(hj1, rho)
            field.set(cs, j, c)
            field.set(sn, j, s)
            h.set(j, j, rho)
            gj = field.get(g, j)
            field.set(g, j + 1, field.neg(field.mul(s, gj)))
            field.set(g, j, field.mul(c, gj))
            est = field.abs(field.get(g, j + 1))
            if field.is_nonreal(est):
                return IterationOutcome(MAX_ITER, total, x)
            if field.le(est, tol_code):
                converged = True
                break
            if total >= max_iter:
                break
        # form x += V y from the leading width columns
        y = field.vec(width)
        for i in range(width - 1, -1, -1):
            acc = field.get(g, i)
            for k in range(i + 1, width):
                acc = field.sub(acc, field.mul(h.get(i, k),
                                               field.get(y, k)))
            hii = h.get(i, i)
            if field.is_zero(hii):
                return IterationOutcome(MAX_ITER, total, x)
            e = field.div(acc, hii)
            if field.is_nonreal(e):
                return IterationOutcome(MAX_ITER, total, x)
            field.set(y, i, e)
        for k in range(width):
            if k < len(basis):
                field.axpy(field.get(y, k), basis[k], x)
        if nonreal(x):
            return IterationOutcome(MAX_ITER, total, x)
        if converged:
            return IterationOutcome(CONVERGED, total, x)
        if total >= max_iter:
            return IterationOutcome(MAX_ITER, total, x)
