"""Command-line interface: ``curveseg <subcommand> [options]``.

Subcommands: simulate, train, classify, select, evaluate, inspect. Every run
writes a JSON manifest next to its main output. Exit codes: 0 success,
1 usage error, 2 invalid data or configuration, 3 numerical failure.
Set ``CURVESEG_LOG`` (e.g. ``INFO``, ``DEBUG``) for more verbose logging.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from ._util import normalized_times
from .baselines import METHODS, MethodSpec, train_method
from .curves import LabeledCurveSet, read_curves_csv, write_curves_csv
from .datagen import (
    WaveformSpec,
    default_piecewise_spec,
    generate_piecewise,
    generate_waveforms,
    write_ground_truth_csv,
)
from .errors import ConfigurationError, CurveSegError, DataError, NumericalError
from .evaluation import adjusted_rand_index, cross_validate, intra_class_inertia
from .fmda import load_model, save_model
from .logistic import regime_probabilities
from .mixrhlp import FitConfig, MixRhlpParams
from .selection import SelectionGrid, select

log = logging.getLogger("curveseg")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; 2 is reserved for data errors here
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _scalar_or_list(values):
    return values[0] if len(values) == 1 else values


def _setup_logging():
    name = os.environ.get("CURVESEG_LOG", "WARNING").strip().upper()
    level = int(name) if name.isdigit() else getattr(logging, name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _config(args) -> FitConfig:
    kw = {"seed": args.seed, "restarts": args.restarts, "jobs": args.jobs}
    if getattr(args, "max_iter", None) is not None:
        kw["max_iter"] = args.max_iter
    if getattr(args, "epsilon", None) is not None:
        kw["epsilon"] = args.epsilon
    try:
        return FitConfig(**kw)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None


def _read_curves(path) -> LabeledCurveSet:
    """Read a curves CSV with or without a leading label column."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r, _ in zip(csv.reader(fh), range(2))]
    has_labels = len(rows) == 2 and len(rows[1]) == len(rows[0]) + 1
    return read_curves_csv(path, has_labels=has_labels)


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")


def _manifest(args, outputs, started, inputs, **extra):
    cfg = {k: v for k, v in vars(args).items() if k not in ("func",)}
    main_out = Path(outputs[0])
    path = main_out.with_name(main_out.name + ".manifest.json")
    _write_json(path, {
        "subcommand": args.command,
        "config": cfg,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "seed": getattr(args, "seed", None),
        "versions": {
            "curveseg": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "wall_seconds": round(time.perf_counter() - started, 3),
        **extra,
    })
    return path


def _method_spec(args) -> MethodSpec:
    return MethodSpec(
        args.method,
        K=_scalar_or_list(args.k),
        L=_scalar_or_list(args.l),
        p=_scalar_or_list(args.p),
        spline_degree=args.spline_degree,
        knots=args.knots,
        config=_config(args),
    )


# -- subcommands ---------------------------------------------------------


def cmd_simulate(args, started):
    out = Path(args.out)
    if args.kind == "piecewise":
        n = 50 if args.n is None else args.n
        spec = default_piecewise_spec(n_per_subclass=n, noise_sd=args.noise, jitter=args.jitter)
        data = generate_piecewise(spec, args.seed)
    else:
        n = 500 if args.n is None else args.n
        data = generate_waveforms(WaveformSpec(curves_per_class=n, noise_sd=args.noise), args.seed)
    truth = Path(args.truth) if args.truth else out.with_name(out.stem + "_truth.csv")
    write_curves_csv(data.curves, out)
    write_ground_truth_csv(data, truth)
    _manifest(args, [out, truth], started, [])
    print(f"wrote {data.curves.n} curves of {data.curves.m} points to {out}")


def cmd_train(args, started):
    data = _read_curves(args.data)
    spec = _method_spec(args)
    model = train_method(data, spec.method, spec.K, spec.L, spec.p, spec.config,
                         spline_degree=spec.spline_degree, knots=spec.knots)
    out = Path(args.out)
    save_model(model, out)
    report = Path(args.report) if args.report else out.with_name(out.stem + "_report.json")
    _write_json(report, {
        "method": model.method,
        "classes": [
            {"class": g + 1, "n_free_parameters": int(cm.n_free_parameters()),
             "fit": None if r is None else r.to_dict()}
            for g, (cm, r) in enumerate(zip(model.class_models, model.reports or [None] * model.G))
        ],
    })
    _manifest(args, [out, report], started, [args.data])
    for g, r in enumerate(model.reports or []):
        if r is not None:
            state = "converged" if r.converged else "not converged"
            print(f"class {g + 1}: log-likelihood {r.loglik:.4f} ({r.iterations} iterations, {state})")
    print(f"model written to {out}")


def cmd_classify(args, started):
    model = load_model(args.model)
    data = _read_curves(args.input)
    if data.grid.m != model.grid.m:
        raise DataError(
            f"{args.input}: curves have {data.grid.m} points but the model grid has {model.grid.m}"
        )
    post = model.posteriors(data.values)
    labels = np.argmax(post, axis=1)
    out = Path(args.out)
    with out.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "label"] + [f"posterior_{g + 1}" for g in range(model.G)])
        for i, (lab, row) in enumerate(zip(labels, post), start=1):
            w.writerow([i, int(lab) + 1] + [repr(float(v)) for v in row])
    _manifest(args, [out], started, [args.model, args.input])
    print(f"classified {data.n} curves; predictions written to {out}")


def cmd_select(args, started):
    data = _read_curves(args.data)
    classes = range(data.num_classes) if args.cls is None else [args.cls - 1]
    grid = SelectionGrid(args.kmax, args.lmax, args.pmax)
    out = Path(args.out)
    chosen = {}
    with out.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class", "K", "L", "p", "loglik", "nu", "bic", "converged", "selected", "error"])
        for g in classes:
            if g < 0 or g >= data.num_classes:
                raise ConfigurationError(f"--class {g + 1} is not a class of {args.data}")
            X = data.values[data.labels == g]
            if X.shape[0] == 0:
                raise ConfigurationError(f"class {g + 1} has no curves")
            cfg = _config(args)
            res = select(X, grid, cfg.replace(seed=cfg.seed + g), time_grid=data.grid)
            chosen[g + 1] = list(res.best)
            for r in res.table:
                w.writerow([g + 1, r.K, r.L, r.p, repr(r.loglik), r.nu, repr(r.bic),
                            int(r.converged), int((r.K, r.L, r.p) == res.best), r.error])
            print(f"class {g + 1}: selected (K, L, p) = {res.best}")
    _manifest(args, [out], started, [args.data], selected=chosen)


def _pooled_ari(data, model, truth_path):
    with Path(truth_path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != data.n:
        raise DataError(f"{truth_path}: {len(rows)} rows for {data.n} curves")
    try:
        sub = np.array([int(r["subclass"]) for r in rows])
    except (KeyError, ValueError):
        raise DataError(f"{truth_path}: missing or invalid subclass column") from None
    clusters = np.empty(data.n, dtype=int)
    for g in range(data.num_classes):
        idx = np.flatnonzero(data.labels == g)
        if idx.size:
            clusters[idx] = model.cluster_labels(data.values[idx], g)
    # pairs from different classes are never grouped together
    width = max(sub.max(), clusters.max()) + 1
    return adjusted_rand_index(data.labels * width + sub, data.labels * width + clusters)


def cmd_evaluate(args, started):
    data = _read_curves(args.data)
    spec = _method_spec(args)
    report = cross_validate(data, spec, folds=args.folds, seed=args.seed, jobs=args.jobs)
    if not args.no_inertia or args.truth:
        full = spec(data, args.seed)
        report.inertia = intra_class_inertia(data, full)
        if args.truth:
            report.ari = _pooled_ari(data, full, args.truth)
    report.extra["method"] = spec.method
    out = Path(args.out)
    report.write_json(out)
    outputs = [out]
    if args.csv:
        report.write_csv(args.csv)
        outputs.append(Path(args.csv))
    _manifest(args, outputs, started, [args.data])
    print(f"{spec.method}: {args.folds}-fold error rate {100 * report.error_rate:.2f}%")
    if report.inertia is not None:
        print(f"intra-class inertia {report.inertia:.6g}")
    if report.ari is not None:
        print(f"adjusted Rand index {report.ari:.4f}")
    print(report.confusion_table())


def _dump_model(model) -> str:
    lines = [f"method: {model.method}", f"grid: {model.grid.m} points "
             f"[{model.grid.points[0]:g}, {model.grid.points[-1]:g}]"]
    for g, cm in enumerate(model.class_models):
        lines.append(f"class {g + 1}: prior {model.priors[g]:.4f}, {cm.kind}, "
                     f"{cm.n_free_parameters()} free parameters")
        if isinstance(cm, MixRhlpParams):
            for k, comp in enumerate(cm.components):
                lines.append(f"  cluster {k + 1}: alpha {cm.alphas[k]:.4f}, {comp.L} regimes")
                for ell in range(comp.L):
                    beta = ", ".join(f"{b:.4f}" for b in comp.beta[ell])
                    w = ", ".join(f"{v:.4f}" for v in comp.logistic[ell])
                    lines.append(f"    regime {ell + 1}: beta [{beta}], sigma2 "
                                 f"{comp.sigma2[ell]:.4f}, w [{w}]")
        else:
            for k in range(cm.K):
                beta = ", ".join(f"{b:.4f}" for b in cm.betas[k])
                lines.append(f"  cluster {k + 1}: alpha {cm.alphas[k]:.4f}, beta [{beta}], "
                             f"sigma2 {cm.sigma2[k]:.4f}")
    return "\n".join(lines)


def cmd_inspect(args, started):
    model = load_model(args.model)
    text = _dump_model(model)
    print(text)
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.model).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.model).stem
    grid = model.grid.points
    means_path = out_dir / f"{stem}_mean_curves.csv"
    with means_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class", "cluster"] + [repr(float(t)) for t in grid])
        for g in range(model.G):
            for k, row in enumerate(model.mean_curves(g), start=1):
                w.writerow([g + 1, k] + [repr(float(v)) for v in row])
    probs_path = out_dir / f"{stem}_logistic.csv"
    t = normalized_times(model.grid)
    with probs_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class", "cluster", "regime"] + [repr(float(v)) for v in grid])
        for g, cm in enumerate(model.class_models):
            if not isinstance(cm, MixRhlpParams):
                continue
            for k, comp in enumerate(cm.components, start=1):
                P = regime_probabilities(comp.logistic, t)
                for ell in range(comp.L):
                    w.writerow([g + 1, k, ell + 1] + [repr(float(v)) for v in P[:, ell]])
    dump_path = out_dir / f"{stem}_parameters.txt"
    dump_path.write_text(text + "\n", encoding="utf-8")
    _manifest(args, [dump_path, means_path, probs_path], started, [args.model])


# -- parser ----------------------------------------------------------------


def _add_fit_options(p, method=True):
    if method:
        p.add_argument("--method", choices=METHODS, default="fmda-mixrhlp")
    p.add_argument("--k", type=_int_list, default=[1],
                   help="clusters per class; one value or a comma list")
    p.add_argument("--l", type=_int_list, default=[3], help="regimes per class")
    p.add_argument("--p", type=_int_list, default=[0], help="polynomial degree per class")
    p.add_argument("--spline-degree", type=int, default=3)
    p.add_argument("--knots", type=int, default=10, help="interior knots of spline methods")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="curveseg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"curveseg {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", help="generate a synthetic curve set")
    p.add_argument("kind", choices=("piecewise", "waveform"))
    p.add_argument("--n", type=int, default=None,
                   help="curves per sub-class (piecewise, default 50) or per class (waveform, 500)")
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--jitter", type=int, default=0, help="piecewise changepoint jitter")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="curves.csv")
    p.add_argument("--truth", default=None, help="ground-truth CSV (default <out>_truth.csv)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="fit a classifier")
    p.add_argument("--data", required=True)
    _add_fit_options(p)
    p.add_argument("--out", default="model.json")
    p.add_argument("--report", default=None, help="fit report JSON (default <out>_report.json)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="predict classes of new curves")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", default="predictions.csv")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("select", help="choose (K, L, p) by BIC")
    p.add_argument("--data", required=True)
    p.add_argument("--class", dest="cls", type=int, default=None,
                   help="1-based class to select for (default: every class)")
    p.add_argument("--kmax", type=int, default=4)
    p.add_argument("--lmax", type=int, default=4)
    p.add_argument("--pmax", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="selection.csv")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("evaluate", help="cross-validated error rate and inertia")
    p.add_argument("--data", required=True)
    _add_fit_options(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--truth", default=None, help="ground-truth CSV for the adjusted Rand index")
    p.add_argument("--no-inertia", action="store_true", help="skip the full-data fit")
    p.add_argument("--out", default="evaluation.json")
    p.add_argument("--csv", default=None, help="also write per-fold rates as CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("inspect", help="dump a model and its plot data")
    p.add_argument("--model", required=True)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    started = time.perf_counter()
    try:
        args.func(args, started)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CurveSegError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
