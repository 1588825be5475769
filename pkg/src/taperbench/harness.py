"""Experiment pipeline shared by every solver study.

A run takes a dataset bundle and a solver configuration, generates one
deterministic right-hand side per matrix, converts the system into each
target format with range checking, dispatches the solver, measures errors
against an extended-precision reference, and emits sorted cumulative
distribution CSVs mirroring the study's data layout.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from . import direct_solvers
from . import formats as F
from . import iterative_solvers as I
from . import kernels as K
from . import orderings
from .fields import CodeField, SolveFailure, XRealField
from .matrices import DatasetBundle, SparseMatrixCsc, bundle_load
from .prng import stream_for
from .xreal import XReal

# documented fixed default; every artifact records the seed actually used
DEFAULT_SEED = 0x5EEDC0FFEE

OK = "ok"
RANGE_FAILURE = "range_failure"
SINGULAR_FAILURE = "singular_failure"
MAX_ITER_FAILURE = "max_iter_failure"

SOLVERS = ("lu", "qr", "gmres_ilu", "mpir")

_FAMILY_TOKENS = {"ieee": "float", "posit": "posit", "takum_linear": "takum"}


class RangeFailure(Exception):
    """A conversion overflowed or underflowed; the experiment is aborted."""

    kind = "range"


@dataclass(frozen=True)
class TestSystem:
    name: str
    A: SparseMatrixCsc          # binary64 values
    b: np.ndarray               # binary64, norm_inf exactly 1
    x_ref: list                  # XReal vector from the reference QR solve


@dataclass(frozen=True)
class ExperimentOutcome:
    matrix: str
    column: str                  # report column this outcome belongs to
    status: str
    abs_err_2: XReal | None = None
    rel_err_2: XReal | None = None
    iterations: int | None = None


@dataclass(frozen=True)
class RunConfig:
    solver: str
    bundle: str
    outdir: str
    formats: tuple = ()          # FormatId list (lu/qr/gmres_ilu)
    triples: tuple = ()          # PrecisionTriple list (mpir)
    seed: int = DEFAULT_SEED
    jobs: int = 1
    plans_dir: str | None = None

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.solver == "mpir":
            if not self.triples or self.formats:
                raise ValueError("mpir runs take triples, not formats")
        elif not self.formats or self.triples:
            raise ValueError(f"{self.solver} runs take a format list")


def column_name(fid: F.FormatId) -> str:
    """Report column header for a format (matches the plot data files)."""
    if fid.family == "ieee":
        return f"Float{fid.width}"
    if fid.family == "bfloat16":
        return "BFloat16"
    if fid.family == "float8_e4m3":
        return "Float8"
    if fid.family == "posit":
        return f"Posit{fid.width}"
    return f"LinearTakum{fid.width}"


def solver_dirname(cfg_solver: str, triple=None) -> str:
    if cfg_solver == "mpir":
        tok = _FAMILY_TOKENS[triple.family]
        return (f"solve_mpir_{tok}_{triple.low:02d}_{triple.working:02d}"
                f"_{triple.high:02d}")
    return f"solve_{cfg_solver}"


# ---------------------------------------------------------------------------
# system generation
# ---------------------------------------------------------------------------

def build_system(name: str, A: SparseMatrixCsc, seed: int) -> TestSystem:
    """Deterministic right-hand side and extended-precision reference.

    b is sampled componentwise uniform on [-1, 1) from the matrix's own
    xoshiro256** stream and divided by its max magnitude, making one entry
    exactly +-1. x_ref comes from the extended-precision QR pipeline.
    """
    if A.n_rows != A.n_cols:
        raise ValueError("test systems require square matrices")
    rng = stream_for(seed, name)
    raw = np.array([rng.next_signed_unit() for _ in range(A.n_rows)])
    b = raw / np.abs(raw).max()
    xf = XRealField()
    Ax = SparseMatrixCsc(A.n_rows, A.n_cols, A.col_ptr, A.row_idx,
                         xf.vec_from_f64(np.asarray(A.values, np.float64)))
    plan = orderings.plan_qr(A)
    Ap = orderings.apply_plan(Ax, plan)
    fac = direct_solvers.qr_factor(xf, Ap, plan.col_perm)
    x_ref = direct_solvers.qr_solve(xf, fac, xf.vec_from_f64(b))
    return TestSystem(name, A, b, x_ref)


def convert_with_check(system: TestSystem, fid: F.FormatId):
    """Round A and b into fid, rejecting overflow and underflow.

    Overflow means a finite entry produced a non-real code (Inf/NaN/NaR);
    underflow means a nonzero entry rounded to zero. Saturating families
    never overflow.
    """
    field = CodeField(fid)

    def check(vals):
        vals = np.asarray(vals, dtype=np.float64)
        codes = field.vec_from_f64(vals)
        cls = np.zeros(len(codes), dtype=np.uint8)
        K.v_classify(field.fmt, codes, cls)
        nonreal = (cls == K.CLS_NAR) | (cls == K.CLS_INF)
        if bool((np.isfinite(vals) & nonreal).any()):
            raise RangeFailure(f"overflow converting to {fid.name}")
        if bool(((vals != 0) & (cls == K.CLS_ZERO)).any()):
            raise RangeFailure(f"underflow converting to {fid.name}")
        return codes

    A = system.A
    a_codes = check(A.values)
    b_codes = check(system.b)
    At = SparseMatrixCsc(A.n_rows, A.n_cols, A.col_ptr, A.row_idx, a_codes)
    return At, b_codes


# ---------------------------------------------------------------------------
# error measurement
# ---------------------------------------------------------------------------

def _norm2(vec) -> XReal:
    acc = XReal(0)
    for e in vec:
        acc = acc + e * e
    return acc.sqrt()


def solution_errors(field: CodeField, x_codes, x_ref):
    """(abs, rel) 2-norm errors, computed entirely in extended precision.

    Upconversion of the computed solution is exact (decode).
    """
    xt = field.decode_vec(x_codes)
    diff = [a - b for a, b in zip(xt, x_ref)]
    abs_err = _norm2(diff)
    rel_err = abs_err / _norm2(x_ref)
    return abs_err, rel_err


# ---------------------------------------------------------------------------
# per-experiment dispatch
# ---------------------------------------------------------------------------

def _direct_solve(kind, system, fid, plan):
    field = CodeField(fid)
    At, bt = convert_with_check(system, fid)
    scaling = orderings.row_scaling(field, At)
    As = orderings.apply_row_scaling(field, At, scaling)
    Ap = orderings.apply_plan(As, plan)
    bs = orderings.scale_vector(field, bt, scaling)
    bp = orderings.permute_vector(field, bs, plan.row_perm)
    if kind == "lu":
        fac = direct_solvers.lu_factor(field, Ap, plan.col_perm)
        x = direct_solvers.lu_solve(field, fac, bp)
    else:
        fac = direct_solvers.qr_factor(field, Ap, plan.col_perm)
        x = direct_solvers.qr_solve(field, fac, bp)
    return field, x


def _gmres_solve(system, fid):
    field = CodeField(fid)
    At, bt = convert_with_check(system, fid)
    M = I.ilu0_factor(field, At)
    return field, I.gmres(field, At, bt, M)


def _mpir_solve(system, triple):
    field = CodeField(triple.working_format)
    At, bt = convert_with_check(system, triple.working_format)
    return field, I.mpir(At, bt, triple)


def run_one(system: TestSystem, solver: str, target, plans=None):
    """One (matrix, format-or-triple) experiment -> ExperimentOutcome."""
    col = "Float64" if solver == "mpir" else column_name(target)

    def outcome(status, **kw):
        return ExperimentOutcome(system.name, col, status, **kw)

    try:
        if solver in ("lu", "qr"):
            plan = plans[solver] if plans else (
                orderings.plan_lu(system.A) if solver == "lu"
                else orderings.plan_qr(system.A))
            field, x = _direct_solve(solver, system, target, plan)
            a, r = solution_errors(field, x, system.x_ref)
            return outcome(OK, abs_err_2=a, rel_err_2=r)
        if solver == "gmres_ilu":
            field, res = _gmres_solve(system, target)
            if res.status != I.CONVERGED:
                return outcome(MAX_ITER_FAILURE)
            a, r = solution_errors(field, res.x, system.x_ref)
            return outcome(OK, abs_err_2=a, rel_err_2=r,
                           iterations=res.iterations)
        field, res = _mpir_solve(system, target)
        if res.status == I.SINGULAR:
            return outcome(SINGULAR_FAILURE)
        if res.status == I.MAX_ITER:
            return outcome(MAX_ITER_FAILURE)
        a, r = solution_errors(field, res.x, system.x_ref)
        return outcome(OK, abs_err_2=a, rel_err_2=r,
                       iterations=res.iterations)
    except RangeFailure:
        return outcome(RANGE_FAILURE)
    except (orderings.PlanFailure, SolveFailure):
        # structural/numerical breakdown anywhere in the pipeline
        return outcome(SINGULAR_FAILURE)


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

# ascending order of the failure bands stacked above all finite values
_BANDS = {
    "lu": ((SINGULAR_FAILURE,), (RANGE_FAILURE, MAX_ITER_FAILURE)),
    "qr": ((SINGULAR_FAILURE,), (RANGE_FAILURE, MAX_ITER_FAILURE)),
    "gmres_ilu": ((RANGE_FAILURE, SINGULAR_FAILURE, MAX_ITER_FAILURE),),
    "mpir": ((MAX_ITER_FAILURE,), (SINGULAR_FAILURE, RANGE_FAILURE)),
}


def _decade_below(x: float) -> float:
    return 10.0 ** (math.floor(math.log10(x)) - 1)


def _decade_above(x: float, k: int) -> float:
    return 10.0 ** (math.floor(math.log10(x)) + 1 + k)


def emit_report(records, metric: str, columns, solver: str, path) -> None:
    """Write `percent,<col>,...` with each column sorted ascending.

    percent_i = i/N as a fraction. Exact zeros sit one decade below the
    file's smallest positive finite value; failures sit in fixed decade
    bands above the largest finite value (band order per solver).
    """
    key = "iterations" if metric == "iteration_count" else "rel_err_2"
    by_col = {c: {} for c in columns}
    for rec in records:
        if rec["column"] in by_col:
            by_col[rec["column"]][rec["matrix"]] = rec
    names = sorted({rec["matrix"] for rec in records})
    n = len(names)

    finite = []
    for c in columns:
        for rec in by_col[c].values():
            if rec["status"] == OK and float(rec[key]) > 0 \
                    and math.isfinite(float(rec[key])):
                finite.append(float(rec[key]))
    zero_level = _decade_below(min(finite)) if finite else 0.1
    band_base = max(finite) if finite else 1.0
    bands = _BANDS[solver]
    band_level = {}
    for k, statuses in enumerate(bands):
        for st in statuses:
            band_level[st] = _decade_above(band_base, k)

    cols = {}
    for c in columns:
        vals = []
        for name in names:
            rec = by_col[c][name]
            if rec["status"] == OK:
                v = float(rec[key])
                if v == 0:
                    v = zero_level
                elif not math.isfinite(v):
                    v = _decade_above(band_base, len(bands))
                vals.append(v)
            else:
                vals.append(band_level[rec["status"]])
        vals.sort()
        cols[c] = vals

    lines = ["percent," + ",".join(columns)]
    for i in range(1, n + 1):
        row = [repr(i / n)]
        row += [repr(cols[c][i - 1]) for c in columns]
        lines.append(",".join(row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# run driver
# ---------------------------------------------------------------------------

def _record(out: ExperimentOutcome) -> dict:
    return {
        "matrix": out.matrix,
        "column": out.column,
        "status": out.status,
        "abs_err_2": float(out.abs_err_2) if out.abs_err_2 is not None
        else None,
        "rel_err_2": float(out.rel_err_2) if out.rel_err_2 is not None
        else None,
        "iterations": out.iterations,
    }


def _matrix_task(args):
    (name, shape, col_ptr, row_idx, values, solver, seed,
     format_names, triple_args, plans_dir) = args
    A = SparseMatrixCsc(shape[0], shape[1], np.asarray(col_ptr),
                        np.asarray(row_idx), np.asarray(values))
    try:
        system = build_system(name, A, seed)
    except SolveFailure as e:
        return name, None, str(e)
    plans = None
    if solver in ("lu", "qr"):
        plans = {solver: _load_or_build_plan(plans_dir, name, solver, A)}
    recs = []
    if solver == "mpir":
        targets = [I.PrecisionTriple(*t) for t in triple_args]
    else:
        targets = [F.parse_format(fn) for fn in format_names]
    for tgt in targets:
        recs.append(_record(run_one(system, solver, tgt, plans)))
    return name, recs, None


def _load_or_build_plan(plans_dir, name, kind, A):
    if plans_dir:
        path = os.path.join(plans_dir, f"{name}.{kind}.plan")
        if os.path.exists(path):
            return orderings.plan_read(path)
    return (orderings.plan_lu(A) if kind == "lu" else orderings.plan_qr(A))


def build_plans(bundle: DatasetBundle, out_dir) -> int:
    """Persist lu and qr structural plans for every bundle matrix."""
    os.makedirs(out_dir, exist_ok=True)
    written = 0
    for meta in bundle.metadata:
        A = bundle.matrices[meta.name]
        for kind, builder in (("lu", orderings.plan_lu),
                              ("qr", orderings.plan_qr)):
            path = os.path.join(out_dir, f"{meta.name}.{kind}.plan")
            if not os.path.exists(path):
                orderings.plan_write(builder(A), path)
                written += 1
    return written


def _store_path(outdir):
    return os.path.join(outdir, "outcomes.jsonl")


def _load_store(outdir):
    path = _store_path(outdir)
    recs = {}
    if os.path.exists(path):
        with open(path) as f:
            for line in f:
                line = line.strip()
                if line:
                    rec = json.loads(line)
                    recs[(rec["matrix"], rec["column"])] = rec
    return recs


def _write_store(outdir, records) -> None:
    records = sorted(records, key=lambda r: (r["matrix"], r["column"]))
    with open(_store_path(outdir), "w") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def _emit_all(outdir, solver, columns, records) -> None:
    emit_report(records, "relative_error", columns, solver,
                os.path.join(outdir, "relative_error.sorted.csv"))
    if solver in ("gmres_ilu", "mpir"):
        emit_report(records, "iteration_count", columns, solver,
                    os.path.join(outdir, "iteration_count.sorted.csv"))


def _manifest(cfg: RunConfig, columns, triple) -> dict:
    man = {
        "solver": cfg.solver,
        "seed": cfg.seed,
        "bundle": os.path.basename(str(cfg.bundle)),
        "columns": list(columns),
        "code_version": __version__,
    }
    if triple is not None:
        man["triple"] = {"family": triple.family, "low": triple.low,
                         "working": triple.working, "high": triple.high}
        man["tolerance"] = I.mpir_tolerance(triple)
    else:
        man["formats"] = [f.name for f in cfg.formats]
        if cfg.solver == "gmres_ilu":
            man["tolerance"] = {f.name: I.gmres_tolerance(f.width)
                                for f in cfg.formats}
    return man


def run_experiment(cfg: RunConfig):
    """Run every (matrix, target) experiment and emit the CSV tree.

    Returns {dirname: [records]}. Experiments already present in a
    directory's outcome store are not recomputed; excluded matrices
    (reference breakdown) are skipped with a log line in the summary.
    """
    bundle = bundle_load(cfg.bundle)
    groups = []  # (dirname, columns, triple-or-None)
    if cfg.solver == "mpir":
        for t in cfg.triples:
            groups.append((solver_dirname("mpir", t), ["Float64"], t))
    else:
        cols = [column_name(f) for f in cfg.formats]
        groups.append((solver_dirname(cfg.solver), cols, None))

    excluded = []
    results = {}
    for dirname, columns, triple in groups:
        outdir = os.path.join(cfg.outdir, dirname)
        os.makedirs(outdir, exist_ok=True)
        store = _load_store(outdir)
        todo = []
        for meta in bundle.metadata:
            missing = [c for c in columns if (meta.name, c) not in store]
            if not missing:
                continue
            A = bundle.matrices[meta.name]
            fmt_names = [f.name for f in cfg.formats]
            t_args = [(triple.family, triple.low, triple.working,
                       triple.high, triple.use_bfloat16)] if triple else []
            todo.append((meta.name, (A.n_rows, A.n_cols), A.col_ptr,
                         A.row_idx, A.values, cfg.solver, cfg.seed,
                         fmt_names, t_args, cfg.plans_dir))
        if cfg.jobs > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                done = list(pool.map(_matrix_task, todo))
        else:
            done = [_matrix_task(t) for t in todo]
        for name, recs, err in done:
            if recs is None:
                excluded.append((name, err))
                continue
            for rec in recs:
                store[(rec["matrix"], rec["column"])] = rec
        # drop rows of matrices excluded this run
        for name, _ in excluded:
            for c in columns:
                store.pop((name, c), None)
        records = sorted(store.values(),
                         key=lambda r: (r["matrix"], r["column"]))
        _write_store(outdir, records)
        _emit_all(outdir, cfg.solver, columns, records)
        with open(os.path.join(outdir, "run.json"), "w") as f:
            json.dump(_manifest(cfg, columns, triple), f, indent=2,
                      sort_keys=True)
            f.write("\n")
        results[dirname] = records
    for name, err in excluded:
        print(f"excluded {name}: reference solve failed ({err})")
    return results


def summarize(results) -> str:
    """Per-run status table for standard output."""
    lines = []
    for dirname in sorted(results):
        records = results[dirname]
        counts = {}
        for rec in records:
            counts[rec["status"]] = counts.get(rec["status"], 0) + 1
        total = len(records)
        parts = " ".join(f"{k}={counts[k]}" for k in sorted(counts))
        lines.append(f"{dirname}: experiments={total} {parts}")
    return "\n".join(lines)
