"""Command-line driver: ``eigrefine generate | refine | analyze | oracle``.

Exit codes of ``refine``: 0 converged, 3 iteration cap reached, 4 diverged.
Bad arguments or inputs exit with 2.  ``EIGREFINE_SEED`` overrides
``--seed`` when set.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .linalg import DenseSym, gen_randsvd_like, gen_spectrum, sort_by_magnitude
from .mmio import MatrixMarketError, mm_read, mm_write, read_operator
from .oracle import (
    MAX_ORACLE_N,
    OracleSizeError,
    jacobi_eig,
    perturb_basis,
    round_binary32,
    subspace_iteration_binary32,
)
from .refine import RefineConfig, run, write_history_csv
from .theory import DomainError, analyze
from .variants import (
    ShiftedOperator,
    ShiftError,
    Target,
    TargetSpec,
    check_margin,
    eigenvalues_of,
    make_operator,
    resolve_shift,
    target_order,
)


class UsageError(Exception):
    pass


def _seed(args):
    env = os.environ.get("EIGREFINE_SEED")
    return int(env) if env not in (None, "") else args.seed


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_spectrum(path, lambdas):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "lambda"])
        for i, lam in enumerate(lambdas):
            w.writerow([i, f"{lam:.17g}"])


def read_spectrum(path):
    vals = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            try:
                vals.append(float(row[-1]))
            except ValueError:
                continue  # header
    if not vals:
        raise UsageError(f"no eigenvalues found in {path}")
    return np.array(vals)


# -- generate ---------------------------------------------------------------


def cmd_generate(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = _seed(args)
    if args.kind == "randsvd":
        A, model, Q = gen_randsvd_like(args.n, args.kappa, args.mode, seed)
        lam = model.lambdas
        note = f"randsvd-like n={args.n} kappa={args.kappa:g} mode={args.mode} seed={seed}"
    else:
        lam = np.array([float(t) for t in args.lambdas.split(",")])
        order = sort_by_magnitude(lam)
        lam = lam[order]
        A, Q = gen_spectrum(lam, seed)
        note = f"prescribed spectrum seed={seed}"
    mm_write(out / "A.mtx", A, comment=note)
    mm_write(out / "eigvecs.mtx", Q, comment="exact eigenvectors, column j <-> spectrum row j")
    _write_spectrum(out / "spectrum.csv", lam)
    print(f"wrote {out / 'A.mtx'}, {out / 'eigvecs.mtx'}, {out / 'spectrum.csv'}")
    return 0


# -- refine -----------------------------------------------------------------


def _initial_block(A, args, spec, seed):
    init = args.init
    K = args.K
    if init in ("round32", "perturb"):
        if not isinstance(A, DenseSym):
            raise UsageError(f"--init {init} needs the dense oracle; use --init subspace for sparse input")
        dec = jacobi_eig(A)
        order = target_order(dec.values, spec.kind)
        X = dec.vectors[:, order[:K]]
        if init == "round32":
            return round_binary32(X)
        return perturb_basis(X, args.perturb_sigma, seed)[0]
    if init == "subspace":
        base = A
        if spec.kind is Target.SMALLEST:
            base = ShiftedOperator(A, A.norm_inf())
        elif spec.kind is Target.LARGEST:
            base = ShiftedOperator(A, -A.norm_inf())
        elif spec.kind is Target.SMALLEST_MAGNITUDE:
            raise UsageError("--init subspace cannot target smallest-magnitude eigenvalues; pass a file")
        return subspace_iteration_binary32(base, K, seed=seed)[1]
    X = mm_read(init)
    if isinstance(X, np.ndarray) and X.shape == (A.n, K):
        return X
    shape = getattr(X, "shape", None)
    raise UsageError(f"initial block from {init} has shape {shape}, expected ({A.n}, {K})")


def cmd_refine(args):
    if args.from_manifest:
        with open(args.from_manifest) as fh:
            saved = json.load(fh)["args"]
        out = args.out
        for key, val in saved.items():
            setattr(args, key, val)
        args.out, args.from_manifest = out, None
    if args.matrix is None:
        raise UsageError("a matrix file is required")
    seed = _seed(args)
    args.K = args.K or args.k
    A = read_operator(args.matrix)
    spec = TargetSpec(Target(args.target), args.shift, args.lambda_next)
    X0 = _initial_block(A, args, spec, seed)
    try:
        spec = resolve_shift(A, spec, X0, k=args.k, estimate=not args.no_estimate)
    except ShiftError as exc:
        raise UsageError(str(exc)) from None
    op = make_operator(A, spec)
    cfg = RefineConfig(
        k=args.k,
        K=args.K,
        delta=args.delta,
        delta_c=args.delta_c,
        beta=args.beta,
        corr_tol=args.corr_tol,
        resid_tol=args.resid_tol,
        max_iter=args.max_iter,
        preprocess=args.preprocess,
        norm_seed=seed,
    )
    outcome = run(op, X0, cfg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    eig = eigenvalues_of(A, outcome.X) if np.all(np.isfinite(outcome.X)) else outcome.dtilde
    margin = None
    if spec.shift is not None and spec.kind is not Target.LARGEST_MAGNITUDE:
        margin = check_margin(A, spec, eig[: args.k])
    extra = {
        "target": spec.kind.value,
        "shift": spec.shift,
        "lambda_next": spec.lambda_next,
        "shift_degenerate": spec.degenerate,
        "shift_margin_estimate": margin,
        "eigenvalues": [float(x) for x in eig],
    }
    paths = {
        "vectors": str(out / "X.mtx"),
        "history": str(out / "history.csv"),
        "outcome": str(out / "outcome.json"),
        "manifest": str(out / "manifest.json"),
    }
    mm_write(paths["vectors"], outcome.X, comment="refined eigenvectors")
    write_history_csv(paths["history"], outcome.history)
    outcome.to_json(paths["outcome"], extra=extra)

    inputs = {args.matrix: _sha256(args.matrix)}
    if args.init not in ("round32", "perturb", "subspace"):
        inputs[args.init] = _sha256(args.init)
    saved = {k: v for k, v in vars(args).items() if k not in ("func", "out", "from_manifest")}
    saved["seed"] = seed
    manifest = {
        "tool": f"eigrefine {__version__}",
        "command": "refine",
        "args": saved,
        "inputs": inputs,
        "seed": seed,
        "artifacts": paths,
        "outcome": {
            "status": outcome.status.value,
            "iterations": outcome.iterations,
            "rel_resid": outcome.rel_resid if np.isfinite(outcome.rel_resid) else None,
            "exit_code": outcome.exit_code,
        },
    }
    with open(paths["manifest"], "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")

    print(
        f"{outcome.status.value} after {outcome.iterations} iterations, "
        f"relative residual {outcome.rel_resid:.3e}"
    )
    if outcome.message:
        print(outcome.message)
    return outcome.exit_code


# -- analyze ----------------------------------------------------------------


def cmd_analyze(args):
    if args.spectrum:
        lam = read_spectrum(args.spectrum)
    elif args.matrix:
        lam = jacobi_eig(read_operator(args.matrix)).values
    else:
        raise UsageError("pass --spectrum or --matrix")
    rho = (args.rho1, args.rho2) if args.rho1 is not None and args.rho2 is not None else None
    try:
        rep = analyze(lam, args.k, norm_a=args.norm_a, eps=args.eps, rho=rho)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    doc = rep.to_dict()
    doc["flags"] = [] if rep.necessary_condition_ok else ["necessary condition violated (gamma >= 1)"]
    doc["note"] = "eps is not observable at run time; refine reports ||E_L||_F as a proxy"
    print(json.dumps(doc, indent=2, default=lambda o: None))
    return 0


# -- oracle -----------------------------------------------------------------


def cmd_oracle(args):
    A = read_operator(args.matrix)
    if A.n > MAX_ORACLE_N:
        raise UsageError(f"oracle refuses n={A.n}: the Jacobi reference is capped at n={MAX_ORACLE_N}")
    dec = jacobi_eig(A)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_spectrum(out / "eigenvalues.csv", dec.values)
    mm_write(out / "eigenvectors.mtx", dec.vectors, comment="Jacobi reference eigenvectors")
    print(f"{A.n} eigenpairs in {dec.sweeps} sweeps (converged={dec.converged})")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="eigrefine", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a test matrix, its eigenvectors and spectrum")
    gsub = g.add_subparsers(dest="kind", required=True)
    r = gsub.add_parser("randsvd", help="positive definite matrix with graded spectrum")
    r.add_argument("--n", type=int, required=True)
    r.add_argument("--kappa", type=float, required=True)
    r.add_argument("--mode", type=int, choices=(3, 4), required=True)
    s = gsub.add_parser("spectrum", help="matrix with a prescribed spectrum")
    s.add_argument("--lambdas", required=True, help="comma-separated eigenvalues")
    for q in (r, s):
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--out", default=".")
        q.set_defaults(func=cmd_generate)

    f = sub.add_parser("refine", help="refine k eigenvectors of a symmetric matrix")
    f.add_argument("matrix", nargs="?")
    f.add_argument("--k", type=int, default=1)
    f.add_argument("--K", type=int, default=None)
    f.add_argument(
        "--init",
        default="subspace",
        help="round32 | perturb | subspace | path to an n x K Matrix Market array",
    )
    f.add_argument("--perturb-sigma", type=float, default=1e-4)
    f.add_argument("--target", choices=[t.value for t in Target], default=Target.LARGEST_MAGNITUDE.value)
    f.add_argument("--shift", type=float, default=None)
    f.add_argument("--lambda-next", type=float, default=None)
    f.add_argument("--no-estimate", action="store_true", help="do not estimate lambda_next by power iteration")
    f.add_argument("--beta", choices=("paired", "zero"), default="paired")
    f.add_argument("--delta", type=float, default=None)
    f.add_argument("--delta-c", type=float, default=10.0)
    f.add_argument("--corr-tol", type=float, default=1e-8)
    f.add_argument("--resid-tol", type=float, default=None)
    f.add_argument("--max-iter", type=int, default=1000)
    f.add_argument("--preprocess", choices=("off", "auto", "always"), default="off")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", default="refine-out")
    f.add_argument("--from-manifest", default=None, help="re-run with the arguments stored in a manifest")
    f.set_defaults(func=cmd_refine)

    a = sub.add_parser("analyze", help="convergence constants and bounds as JSON")
    a.add_argument("--spectrum")
    a.add_argument("--matrix")
    a.add_argument("--k", type=int, required=True)
    a.add_argument("--eps", type=float, default=None)
    a.add_argument("--norm-a", type=float, default=None)
    a.add_argument("--rho1", type=float, default=None)
    a.add_argument("--rho2", type=float, default=None)
    a.set_defaults(func=cmd_analyze)

    o = sub.add_parser("oracle", help="reference eigendecomposition of a dense matrix")
    o.add_argument("matrix")
    o.add_argument("--out", default="oracle-out")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, MatrixMarketError, OracleSizeError, ShiftError, ValueError, OSError) as exc:
        print(f"eigrefine {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
