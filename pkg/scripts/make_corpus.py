"""Generate the committed test-matrix corpus under data/matrices/.

Every matrix is square, real, full rank, and small enough for the
ingest filter (nnz <= 10^4). The families are chosen to exercise the
solver stack:

  * 5/9-point Laplacians, anisotropic and convection-diffusion variants
    (moderate condition numbers for the refinement runs),
  * banded Toeplitz and pentadiagonal systems,
  * diagonally dominant sparse randoms, plain and with row scales
    spread over four decades (the row-equilibration path),
  * arrowhead and shifted-bidiagonal shapes (ordering stress),
  * "stiff" systems whose entries exceed the 8-bit IEEE maximum (448)
    but stay inside every 16-bit range, and "tiny" systems whose
    entries sit below the 8-bit IEEE subnormal floor (2^-10) while
    remaining normal at 16 bits: the 8-bit range-failure fixtures.

Generation is deterministic (fixed seeds, sorted emission).
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from taperbench.matrices import (                 # noqa: E402
    SparseMatrixCsc,
    compute_metadata,
    csc_from_coo,
    write_matrix_market,
)

OUT = os.path.join(os.path.dirname(__file__), "..", "data", "matrices")


def from_dense(D) -> SparseMatrixCsc:
    D = np.asarray(D, dtype=np.float64)
    rows, cols = np.nonzero(D)
    return csc_from_coo(D.shape[0], D.shape[1], rows, cols, D[rows, cols])


def from_scipy(S) -> SparseMatrixCsc:
    S = S.tocoo()
    return csc_from_coo(S.shape[0], S.shape[1], S.row, S.col, S.data)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def lap2d(g, sx=1.0, sy=1.0):
    """5-point grid operator -sx*dxx - sy*dyy on a g x g grid."""
    import scipy.sparse as sp

    main = np.full(g, 2.0 * (sx + sy))
    off = np.full(g - 1, -sx)
    T = sp.diags([off, main, off], [-1, 0, 1])
    E = sp.diags([np.full(g - 1, -sy)] * 2, [-1, 1])
    return from_scipy(sp.kron(sp.eye(g), T) + sp.kron(E, sp.eye(g)))


def poisson9(g):
    """9-point stencil Laplacian (compact fourth-order weights)."""
    import scipy.sparse as sp

    T = sp.diags([np.full(g - 1, -1.0), np.full(g, 4.0),
                  np.full(g - 1, -1.0)], [-1, 0, 1])
    S = sp.diags([np.full(g - 1, 1.0), np.full(g, 4.0),
                  np.full(g - 1, 1.0)], [-1, 0, 1])
    E = sp.diags([np.full(g - 1, -1.0)] * 2, [-1, 1])
    return from_scipy((sp.kron(sp.eye(g), T) + sp.kron(E, S / 4.0)))


def convdiff(g, peclet):
    """Upwinded convection-diffusion on a g x g grid; nonsymmetric."""
    import scipy.sparse as sp

    h = 1.0 / (g + 1)
    c = peclet * h
    lower = np.full(g - 1, -1.0 - c)
    upper = np.full(g - 1, -1.0)
    main = np.full(g, 4.0 + c)
    T = sp.diags([lower, main, upper], [-1, 0, 1])
    E = sp.diags([np.full(g - 1, -1.0)] * 2, [-1, 1])
    return from_scipy(sp.kron(sp.eye(g), T) + sp.kron(E, sp.eye(g)))


def tridiag(n, diag, lo=-1.0, hi=-1.0, scale=1.0):
    import scipy.sparse as sp

    return from_scipy(scale * sp.diags(
        [np.full(n - 1, lo), np.full(n, diag), np.full(n - 1, hi)],
        [-1, 0, 1]))


def pentadiag(n, coeffs):
    import scipy.sparse as sp

    c2, c1, c0 = coeffs
    return from_scipy(sp.diags(
        [np.full(n - 2, c2), np.full(n - 1, c1), np.full(n, c0),
         np.full(n - 1, c1), np.full(n - 2, c2)], [-2, -1, 0, 1, 2]))


def ddrand(n, seed, per_row=4, row_decades=0.0, scale=1.0):
    """Diagonally dominant sparse random; |offdiag| in [0.1, 1].

    row_decades spreads row magnitudes over 10^[-d, d], which is what
    the row-equilibration path is for.
    """
    rng = np.random.default_rng(seed)
    rows, cols, vals = [], [], []
    rowsum = np.zeros(n)
    for i in range(n):
        picks = rng.choice(n - 1, size=per_row, replace=False)
        for j in ((p + i + 1) % n for p in picks):
            v = rng.uniform(0.1, 1.0) * rng.choice([-1.0, 1.0])
            rows.append(i); cols.append(j); vals.append(v)
            rowsum[i] += abs(v)
    for i in range(n):
        rows.append(i); cols.append(i)
        vals.append((rowsum[i] + rng.uniform(0.5, 1.5))
                    * rng.choice([-1.0, 1.0]))
    vals = np.asarray(vals) * scale
    if row_decades:
        rs = 10.0 ** rng.uniform(-row_decades, row_decades, size=n)
        vals = vals * rs[np.asarray(rows)]
    return csc_from_coo(n, n, rows, cols, vals)


def arrowhead(n, seed):
    rng = np.random.default_rng(seed)
    D = np.diag(rng.uniform(1.0, 3.0, size=n))
    D[:, 0] = rng.uniform(0.2, 1.0, size=n) * rng.choice([-1, 1], size=n)
    D[0, :] = rng.uniform(0.2, 1.0, size=n) * rng.choice([-1, 1], size=n)
    D[0, 0] = n  # keep the head dominant so the shape stays full rank
    return from_dense(D)


def bidiag_shift(n, diag, sub):
    import scipy.sparse as sp

    A = sp.diags([np.full(n - 1, sub), np.full(n, diag)], [-1, 0]).tolil()
    A[0, n - 1] = 0.5  # corner entry breaks pure triangularity
    return from_scipy(A)


def cycle_graph_lap(n, shift):
    import scipy.sparse as sp

    A = sp.diags([np.full(n - 1, -1.0), np.full(n, 2.0 + shift),
                  np.full(n - 1, -1.0)], [-1, 0, 1]).tolil()
    A[0, n - 1] = -1.0
    A[n - 1, 0] = -1.0
    return from_scipy(A)


# ---------------------------------------------------------------------------
# corpus table
# ---------------------------------------------------------------------------

def build_corpus():
    mats = {}

    for g in (4, 5, 6, 7, 8, 10, 12):
        mats[f"lap2d_g{g:02d}"] = lap2d(g)
    mats["poisson9_g08"] = poisson9(8)
    mats["poisson9_g11"] = poisson9(11)

    mats["anis2d_g08_e10"] = lap2d(8, sx=0.1)
    mats["anis2d_g08_e02"] = lap2d(8, sx=0.02)
    mats["anis2d_g10_e05"] = lap2d(10, sx=0.05)

    for g, pe in ((6, 1), (8, 1), (8, 10), (10, 5), (12, 2)):
        mats[f"convdiff_g{g:02d}_p{pe:02d}"] = convdiff(g, pe)

    mats["tridiag_n032"] = tridiag(32, 2.2)
    mats["tridiag_n064"] = tridiag(64, 2.05)
    mats["tridiag_n128"] = tridiag(128, 2.5)
    mats["tridiag_n256"] = tridiag(256, 3.0)

    mats["penta_n048"] = pentadiag(48, (0.5, -1.5, 4.5))
    mats["penta_n096"] = pentadiag(96, (-0.25, -1.0, 3.1))
    mats["penta_n180"] = pentadiag(180, (0.4, -1.2, 3.6))

    for n, s in ((24, 11), (48, 12), (64, 13), (96, 14), (160, 15),
                 (200, 16)):
        mats[f"ddrand_n{n:03d}_s{s}"] = ddrand(n, s)

    for n, s, d in ((40, 21, 2.0), (60, 22, 1.5), (80, 23, 2.0),
                    (120, 24, 1.0)):
        mats[f"spread_n{n:03d}_s{s}"] = ddrand(n, s, row_decades=d)

    mats["heat_g09"] = from_dense(np.eye(81) + 0.1 * lap2d(9).to_dense())
    mats["heat_g11"] = from_dense(np.eye(121) + 0.25 * lap2d(11).to_dense())

    mats["arrow_n050"] = arrowhead(50, 31)
    mats["arrow_n100"] = arrowhead(100, 32)

    mats["bidiag_n060"] = bidiag_shift(60, 1.5, 0.8)
    mats["bidiag_n120"] = bidiag_shift(120, 2.0, -1.1)

    mats["cyclelap_n096"] = cycle_graph_lap(96, 0.5)
    mats["cyclelap_n150"] = cycle_graph_lap(150, 0.25)

    # entries above 448: out of 8-bit IEEE range, inside all 16-bit ones
    mats["stiff_n040_k2e3"] = tridiag(40, 2.2, scale=2.0e3)
    mats["stiff_n064_k2e4"] = tridiag(64, 2.6, scale=2.0e4)
    mats["stiff_n050_r"] = ddrand(50, 41, scale=1.5e3)

    # entries below 2^-10: flushed to zero at 8-bit IEEE, normal at 16
    mats["tiny_n040_r"] = ddrand(40, 42, scale=2.0e-4)
    mats["tiny_g06_lap"] = lap2d(6)
    mats["tiny_g06_lap"] = from_dense(
        1.0e-4 * mats["tiny_g06_lap"].to_dense())

    return mats


def main() -> int:
    os.makedirs(OUT, exist_ok=True)
    mats = build_corpus()
    print(f"{'name':22s} {'n':>4s} {'nnz':>6s} {'absmin':>9s} "
          f"{'absmax':>9s} {'cond1':>9s}")
    for name in sorted(mats):
        A = mats[name]
        meta = compute_metadata(name, A)
        assert meta.is_square and meta.is_full_rank, name
        assert A.nnz <= 10000, name
        write_matrix_market(os.path.join(OUT, f"{name}.mtx"), A,
                            comment=name)
        print(f"{name:22s} {A.n_rows:4d} {A.nnz:6d} "
              f"{float(meta.abs_min_nonzero):9.2e} "
              f"{float(meta.abs_max):9.2e} "
              f"{float(meta.cond1_estimate):9.2e}")
    print(f"total={len(mats)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
