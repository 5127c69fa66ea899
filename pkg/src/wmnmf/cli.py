"""Command-line front end.

Examples::

    wmnmf synth synth2-desk --out data/
    wmnmf fit data/manifest.json --mode wm-nmf --k 10 --seed 7 --out run/
    wmnmf fit --config run/results.json data/manifest.json --out rerun/
    wmnmf bounds --N 100 1000 10000 --M 50 --K 4 --w-star 0.5 --delta 0.05
    wmnmf probe sparsity --distances 1 2 4
    wmnmf baseline --preset synth1-desk --k 10
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .clustering import assign, kmeans, score
from .core import HyperParams, Mode, MultiViewDataset, ValidationError, WMNMFError, validate_dataset
from .solver import audit_monotonicity, fit, linear_fit_r2, scaling_benchmark
from .synthgen import PRESETS, SynthSpec, generate, preset
from .theory import (
    BoundInputs,
    dim_dependent_terms,
    dim_independent_terms,
    perturbation_probe,
    sparsity_probe,
)

log = logging.getLogger("wmnmf")

EXIT_OK, EXIT_INPUT, EXIT_COMPUTE = 0, 2, 3


class InputError(Exception):
    """Bad files, flags or manifests (exit code 2)."""


# ---------------------------------------------------------------- data I/O

def read_matrix(path: Path, delimiter: str = ",") -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=delimiter, ndmin=2, dtype=float)
    except OSError as e:
        raise InputError(f"{path}: {e}") from e
    except ValueError as e:
        raise InputError(f"{path}: {e}") from e


def read_labels(path: Path) -> np.ndarray:
    out = []
    try:
        lines = path.read_text().splitlines()
    except OSError as e:
        raise InputError(f"{path}: {e}") from e
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            out.append(int(line))
        except ValueError:
            raise InputError(f"{path}:{lineno}: expected an integer label, got {line!r}") from None
    return np.asarray(out, dtype=int)


def load_manifest(path: Path, transpose: bool = False) -> MultiViewDataset:
    """Read a manifest.json and the files it names (relative to its folder)."""
    try:
        m = json.loads(Path(path).read_text())
    except OSError as e:
        raise InputError(f"{path}: {e}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{path}:{e.lineno}: {e.msg}") from e
    views = m.get("views")
    if not isinstance(views, list) or not views:
        raise InputError(f"{path}: manifest needs a nonempty 'views' list")
    base = Path(path).parent
    delim = m.get("delimiter", ",")
    rows_are_features = bool(m.get("rows_are_features", True)) != transpose
    mats = []
    for v in views:
        X = read_matrix(base / v, delim)
        mats.append(X if rows_are_features else X.T)
    labels = read_labels(base / m["labels"]) if m.get("labels") else None
    names = m.get("view_names") or [Path(v).stem for v in views]
    try:
        return validate_dataset(mats, labels=labels, view_names=names)
    except ValidationError as e:
        raise InputError(f"{path}: {e}") from e


def write_matrix(path: Path, X: np.ndarray) -> None:
    np.savetxt(path, np.asarray(X, dtype=float), delimiter=",", fmt="%.17g")


def write_dataset(ds: MultiViewDataset, out: Path, spec: SynthSpec = None) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for name, X in zip(ds.view_names, ds.views):
        fname = f"{name}.csv"
        write_matrix(out / fname, X)
        files.append(fname)
    manifest = {"views": files, "delimiter": ",", "rows_are_features": True, "view_names": list(ds.view_names)}
    if ds.labels is not None:
        np.savetxt(out / "labels.csv", ds.labels, fmt="%d")
        manifest["labels"] = "labels.csv"
    if spec is not None:
        (out / "spec.json").write_text(json.dumps(spec.to_dict(), indent=2))
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def dataset_from_args(args) -> MultiViewDataset:
    if args.manifest and args.preset:
        raise InputError("give either a manifest or --preset, not both")
    if args.manifest:
        return load_manifest(Path(args.manifest), transpose=args.transpose)
    if args.preset:
        try:
            return generate(preset(args.preset, args.data_seed))
        except ValidationError as e:
            raise InputError(str(e)) from e
    raise InputError("no data: pass a manifest path or --preset NAME")


# ---------------------------------------------------------------- config

HP_FLAGS = {
    "k": "k", "p": "p", "beta": "beta", "mode": "mode", "seed": "seed",
    "max_outer": "outer_max", "max_inner": "inner_max", "tol": "conv_threshold",
}


def hyperparams_from_args(args, n_views: int) -> tuple:
    """Merge --config (a results.json echo) with explicit flags; flags win."""
    base, assign_method = {}, "spectral"
    if args.config:
        try:
            echo = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"{args.config}: {e}") from e
        base = dict(echo.get("config", echo))
        assign_method = echo.get("assign", assign_method)
    for flag, field_name in HP_FLAGS.items():
        val = getattr(args, flag, None)
        if val is not None:
            base[field_name] = val
    if getattr(args, "assign", None):
        assign_method = args.assign
    if "k" not in base:
        raise InputError("--k is required (or --config)")
    try:
        return HyperParams.from_dict(base), assign_method
    except (TypeError, ValidationError) as e:
        raise InputError(f"invalid hyperparameters: {e}") from e


def add_hp_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, help="rank / number of clusters")
    p.add_argument("--p", type=float, help="view-weight exponent (default 5)")
    p.add_argument("--beta", type=float, help="manifold strength (default 0.01)")
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--seed", type=int, help="initialization seed (default 0)")
    p.add_argument("--max-outer", type=int, dest="max_outer")
    p.add_argument("--max-inner", type=int, dest="max_inner")
    p.add_argument("--tol", type=float, help="convergence threshold")
    p.add_argument("--assign", choices=["spectral", "argmax"])
    p.add_argument("--config", help="results.json whose config echo to reuse")


def add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("manifest", nargs="?", help="manifest.json")
    p.add_argument("--preset", choices=sorted(PRESETS), help="use a generated dataset instead")
    p.add_argument("--data-seed", type=int, default=0, help="seed for --preset data")
    p.add_argument("--transpose", action="store_true", help="view CSVs are observations x features")


# ---------------------------------------------------------------- commands

def _summary(reports: list) -> dict:
    keys = reports[0].keys()
    return {k: {"mean": float(np.mean([r[k] for r in reports])),
                "sd": float(np.std([r[k] for r in reports]))} for k in keys}


def cmd_fit(args) -> int:
    ds = dataset_from_args(args)
    hp, method = hyperparams_from_args(args, ds.n_views)
    reps = []
    first = None
    for r in range(args.replications):
        run_hp = hp.with_(seed=hp.seed + r)
        t0 = time.perf_counter()
        run = fit(ds, run_hp)
        t1 = time.perf_counter()
        labels = assign(run.consensus, run_hp.k, method, seed=run_hp.seed)
        t2 = time.perf_counter()
        rep = {"seed": run_hp.seed, "outer_iterations": run.outer_iterations,
               "converged": run.converged, "final_objective": run.final_objective,
               "timings": {"fit_s": t1 - t0, "assign_s": t2 - t1}}
        if ds.labels is not None:
            rep["metrics"] = score(labels, ds.labels).metrics()
        reps.append(rep)
        if first is None:
            first = (run, labels)
        log.info("replication %d seed=%d outer=%d", r, run_hp.seed, run.outer_iterations)
    run, labels = first
    bundle = {
        "command": "fit",
        "metrics": reps[0].get("metrics"),
        "alpha": run.alpha.tolist(),
        "objective_trace": run.objective_trace,
        "converged": run.converged,
        "outer_iterations": run.outer_iterations,
        "config": hp.to_dict(),
        "assign": method,
        "seed": hp.seed,
        "timings": reps[0]["timings"],
        "view_names": list(ds.view_names or []),
        "replications": reps,
    }
    if ds.labels is not None and len(reps) > 1:
        bundle["metrics_summary"] = _summary([r["metrics"] for r in reps])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.json").write_text(json.dumps(bundle, indent=2))
    write_matrix(out / "weights.csv", run.W)
    np.savetxt(out / "labels.csv", labels, fmt="%d")
    if bundle["metrics"]:
        print(" ".join(f"{k}={v:.4f}" for k, v in bundle["metrics"].items()))
    print(f"wrote {out / 'results.json'}")
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        if args.spec:
            spec = SynthSpec.from_dict(json.loads(Path(args.spec).read_text()))
            if args.seed is not None:
                spec = spec.with_seed(args.seed)
        elif args.preset:
            spec = preset(args.preset, args.seed or 0)
        else:
            raise InputError("give a preset name or --spec FILE")
        ds = generate(spec)
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise InputError(f"bad spec: {e}") from e
    except ValidationError as e:
        raise InputError(str(e)) from e
    path = write_dataset(ds, Path(args.out), spec)
    print(f"wrote {ds.n_views} views, N={ds.n_obs}, manifest {path}")
    return EXIT_OK


BOUND_COLUMNS = ("N", "M", "K", "w_star", "delta", "dep_const", "dep_sqrt", "dim_dependent",
                 "indep_rademacher", "indep_confidence", "dim_independent")


def bound_rows(Ns, M, K, w_star, delta, B=1.0, b=None) -> list:
    rows = []
    for N in Ns:
        inp = BoundInputs(int(N), M, K, w_star, delta, B, b)
        d1, d2 = dim_dependent_terms(inp)
        i1, i2 = dim_independent_terms(inp)
        rows.append((int(N), M, K, w_star, delta, d1, d2, d1 + d2, i1, i2, i1 + i2))
    return rows


def cmd_bounds(args) -> int:
    try:
        rows = bound_rows(args.N, args.M, args.K, args.w_star, args.delta, args.B, args.b)
    except ValidationError as e:
        raise InputError(str(e)) from e
    print(",".join(BOUND_COLUMNS))
    for r in rows:
        print(",".join(repr(x) for x in r))
    return EXIT_OK


def _emit(args, name: str, header: list, rows: list, notes=()) -> None:
    lines = [",".join(header)] + [",".join(str(x) for x in r) for r in rows]
    lines += [f"# {n}" for n in notes]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"probe_{name}.csv").write_text(text)


def cmd_probe(args) -> int:
    kind = args.kind
    if kind == "sparsity":
        rows = sparsity_probe(args.distances, args.p_grid)
        n = len(args.distances)
        header = ["p"] + [f"alpha_{s + 1}" for s in range(n)] + ["max_alpha", "entropy"]
        _emit(args, kind, header, [[r.p, *r.alpha.tolist(), r.max_alpha, r.entropy] for r in rows])
        return EXIT_OK
    hp = HyperParams(k=args.k, mode=args.mode or Mode.WM_NMF, seed=args.seed or 0)
    if kind == "perturbation":
        ds = generate(preset(args.preset, args.data_seed))
        pts = perturbation_probe(ds, hp, args.levels, trials=args.replications, seed=args.seed or 0)
        _emit(args, kind, ["level", "mean_distance"], [[p.level, p.mean_distance] for p in pts])
    elif kind == "monotonicity":
        rows, total = [], 0
        for r in range(args.replications):
            ds = generate(preset(args.preset, args.data_seed + r))
            run = fit(ds, hp.with_(seed=hp.seed + r))
            rep = audit_monotonicity(run)
            total += len(rep.violations)
            rows.append([hp.seed + r, run.outer_iterations, len(rep.violations), run.final_objective])
        med = float(np.median([r[1] for r in rows]))
        _emit(args, kind, ["seed", "outer_iterations", "violations", "final_objective"], rows,
              [f"total_violations={total}", f"median_outer_iterations={med}"])
    elif kind == "scaling":
        spec = preset(args.preset, args.data_seed)
        pts = scaling_benchmark(spec, args.vary, args.levels_int, hp.with_(outer_max=args.max_outer or 5))
        slope, icpt, r2 = linear_fit_r2(*zip(*pts))
        _emit(args, kind, [args.vary, "seconds"], [list(p) for p in pts],
              [f"slope={slope:.6g}", f"intercept={icpt:.6g}", f"r2={r2:.6f}"])
    return EXIT_OK


def cmd_baseline(args) -> int:
    ds = dataset_from_args(args)
    if ds.labels is None:
        raise InputError("baseline comparison needs labels")
    hp, method = hyperparams_from_args(args, ds.n_views)
    k = hp.k
    table = {"WM-NMF": [], "ConcatK": [], "BSV-kmeans": []}
    for r in range(args.replications):
        seed = hp.seed + r
        run = fit(ds, hp.with_(seed=seed))
        table["WM-NMF"].append(score(assign(run.consensus, k, method, seed=seed), ds.labels).metrics())
        concat = np.vstack(ds.views).T
        table["ConcatK"].append(score(kmeans(concat, k, seed=seed), ds.labels).metrics())
        per_view = [score(kmeans(X.T, k, seed=seed), ds.labels).metrics() for X in ds.views]
        table["BSV-kmeans"].append(max(per_view, key=lambda m: m["acc"]))
    summary = {name: _summary(reps) for name, reps in table.items()}
    cols = list(summary["WM-NMF"])
    print("method," + ",".join(cols))
    for name, s in summary.items():
        print(name + "," + ",".join(f"{s[c]['mean']:.4f}" for c in cols))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        bundle = {"command": "baseline", "config": hp.to_dict(), "assign": method,
                  "seed": hp.seed, "summary": summary, "replications": table}
        (out / "results.json").write_text(json.dumps(bundle, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wmnmf", description="Weighted multi-view NMF clustering")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="factorize a dataset and cluster its consensus")
    add_data_flags(p)
    add_hp_flags(p)
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--out", default="wmnmf-out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("synth", help="write a synthetic dataset as CSV + manifest")
    p.add_argument("preset", nargs="?")
    p.add_argument("--spec", help="SynthSpec JSON file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bounds", help="print generalization bounds as CSV")
    p.add_argument("--N", type=int, nargs="+", required=True)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--w-star", type=float, dest="w_star", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--B", type=float, default=1.0, help="data bound (default 1)")
    p.add_argument("--b", type=float, default=None, help="loss range (default w*^2)")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("probe", help="empirical checks of the weighting theory")
    p.add_argument("kind", choices=["perturbation", "sparsity", "monotonicity", "scaling"])
    p.add_argument("--distances", type=float, nargs="+", default=[1.0, 2.0, 4.0])
    p.add_argument("--p-grid", type=float, nargs="+", dest="p_grid",
                   default=[1.5, 2.0, 4.0, 8.0, 16.0, 1000.0])
    p.add_argument("--levels", type=float, nargs="+", default=[0.0, 1e-3, 1e-2, 1e-1])
    p.add_argument("--vary", choices=["n_v", "N", "M", "K"], default="n_v")
    p.add_argument("--sizes", type=int, nargs="+", dest="levels_int", default=[2, 3, 4, 5, 6])
    p.add_argument("--preset", choices=sorted(PRESETS), default="synth1-desk")
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--seed", type=int)
    p.add_argument("--max-outer", type=int, dest="max_outer")
    p.add_argument("--replications", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("baseline", help="compare WM-NMF with ConcatK and BSV-kmeans")
    add_data_flags(p)
    add_hp_flags(p)
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_baseline)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "replications", 1) < 1:
        print("error: --replications must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (WMNMFError, FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"computation failed: {e}", file=sys.stderr)
        return EXIT_COMPUTE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
