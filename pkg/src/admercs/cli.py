"""``admercs`` command line: fit, score, explain, gen-bench, eval, experiment.

Failures print a single ``admercs: error: <Type>: <message>`` line on stderr
and exit nonzero (1 for runtime errors, 2 for usage errors).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from admercs import bench, persistence, presets
from admercs.data import Dataset, load_csv, read_schema
from admercs.evaluation import evaluate, run_experiment
from admercs.explain import explain_instance, list_anomalous_contexts, render, render_context
from admercs.model import ADMercs

logger = logging.getLogger("admercs")

_PARAM_FLAGS = {
    "max_depth": int, "min_samples_leaf": float, "min_impurity_decrease": float, "rho": float,
    "gamma_delta": float, "gamma_lambda": float, "n_iterations": int,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # keep usage errors on one line
        self.exit(2, f"{self.prog}: error: UsageError: {message}\n")


def _add_data_flags(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--data", required=required, help="CSV file with a header row")
    p.add_argument("--label-column", default=None, help="ground-truth column, excluded from the attributes")
    p.add_argument("--schema", default=None, help="file of name=numeric|nominal overrides")


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="file of key = value lines (flags take precedence)")
    p.add_argument("--preset", default=None, choices=sorted(presets.PRESETS))
    for key, typ in _PARAM_FLAGS.items():
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="worker cap (falls back to ADMERCS_THREADS)")


def _config(args: argparse.Namespace) -> dict:
    config = presets.read_config(args.config) if args.config else {}
    if args.preset is not None:
        config["preset"] = args.preset
    for key in _PARAM_FLAGS:
        if getattr(args, key) is not None:
            config[key] = getattr(args, key)
    return config


def _load(args: argparse.Namespace, path: str | None = None) -> Dataset:
    schema = read_schema(args.schema) if args.schema else None
    return load_csv(path or args.data, label_column=args.label_column, schema=schema)


def _write_json(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_fit(args: argparse.Namespace) -> int:
    d = _load(args)
    config = _config(args)
    tree_params, scoring = presets.build_params(config)
    model = ADMercs(tree_params, scoring, seed=args.seed, threads=args.threads).fit(d)
    persistence.save_model(model, args.out)
    report = {"params": presets.resolve(config), "iterations": model.n_iter_,
              "delta": model.delta_.tolist(), "lambda": model.lam_.tolist()}
    if d.labels is not None:
        r = evaluate(model.delta_, d.labels)
        report.update(auc=r.auc, ap=r.ap)
    if args.report:
        _write_json(report, args.report)
    logger.info("model written to %s", args.out)
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    model = persistence.load_model(args.model)
    model.threads = args.threads
    d = _load(args)
    scores = model.score(d) if args.mode == "train" else model.score_new(d.values)
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["index", "delta"] + (["label"] if d.labels is not None else []))
        for i, s in enumerate(scores):
            w.writerow([i, repr(float(s))] + ([int(d.labels[i])] if d.labels is not None else []))
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_explain(args: argparse.Namespace) -> int:
    model = persistence.load_model(args.model)
    d = _load(args)
    if args.instance is not None:
        if not 0 <= args.instance < d.n_instances:
            raise IndexError(f"instance {args.instance} out of range [0, {d.n_instances})")
        targets = [args.instance]
    else:
        scores = model.score_new(d.values)
        targets = [int(i) for i in np.argsort(-scores, kind="stable")[:args.top]]
    items = []
    for i in targets:
        exps = explain_instance(model, d.values[i], args.top_k, args.lambda_threshold)
        items.append({"instance": i, "score": model.score_new_instance(d.values[i]), "explanations": exps})
    contexts = list_anomalous_contexts(model, args.lambda_threshold)
    if args.format == "json":
        _write_json({
            "instances": [{**it, "explanations": [e.to_dict() for e in it["explanations"]]} for it in items],
            "anomalous_contexts": [c.to_dict() for c in contexts],
        }, args.out)
        return 0
    lines = []
    for it in items:
        lines.append(f"instance {it['instance']} (score {it['score']:.4f})")
        lines.extend("  " + render(e) for e in it["explanations"]) if it["explanations"] else lines.append(
            "  no tree finds this instance unusual")
    lines.append(f"anomalous contexts (lambda >= {args.lambda_threshold}): {len(contexts)}")
    lines.extend("  " + render_context(c) for c in contexts)
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_gen_bench(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    members = bench.suite_members(args.family, args.count, args.seed)
    for i, m in enumerate(members):
        dims = args.dims if args.dims is not None else m["dims"]
        b = bench.generate(args.family, m["seed"], m["index"], args.n_instances, args.contamination, dims)
        if args.hd_factor:
            b = bench.Benchmark(bench.augment_hd(b.dataset, args.hd_factor, m["seed"]),
                                {**b.meta, "hd_factor": args.hd_factor})
        tag = f"_d{dims:03d}" if args.family == "synth-cs" else ""
        path = bench.write_benchmark(b, out_dir / f"{args.family}{tag}_{i:03d}_s{m['seed']}.csv")
        logger.info("wrote %s", path)
    print(f"wrote {len(members)} datasets to {out_dir}")
    return 0


def _read_column(path: str, names: tuple[str, ...]) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no rows")
    for name in names:
        if name in rows[0]:
            return np.array([float(r[name]) for r in rows])
    raise ValueError(f"{path}: none of the columns {list(names)} found")


def cmd_eval(args: argparse.Namespace) -> int:
    if args.report:
        report = json.loads(Path(args.report).read_text(encoding="utf-8"))
        _write_json(report["aggregate"], None)
        return 0
    if not args.scores:
        raise ValueError("either --scores or --report is required")
    scores = _read_column(args.scores, ("delta", "score"))
    labels = _read_column(args.labels or args.scores, (args.label_column,))
    r = evaluate(scores, labels)
    _write_json({"auc": r.auc, "ap": r.ap, "n_pos": r.n_pos, "n_neg": r.n_neg}, None)
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    config = _config(args)
    tree_params, scoring = presets.build_params(config)

    def fit_score(path: Path):
        d = load_csv(path, label_column=args.label_column)
        if d.labels is None:
            raise ValueError("dataset has no labels")
        model = ADMercs(tree_params, scoring, seed=args.seed, threads=args.threads).fit(d)
        return model.delta_, d.labels

    report = run_experiment(args.suite, fit_score, presets.resolve(config), args.out)
    agg = report["aggregate"]
    print(json.dumps({k: agg[k] for k in ("auc", "ap", "n_datasets", "n_failed", "wall_time_ms")}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="admercs", description="Context- and subspace-aware anomaly detection with tree ensembles.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="learn a model and save it")
    _add_data_flags(p)
    _add_param_flags(p)
    _add_common(p)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--report", default=None, help="JSON file for training delta/lambda")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="score a dataset with a saved model")
    _add_data_flags(p)
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--mode", choices=("train", "new"), default="train",
                   help="train: rerun the iterations on this data; new: keep the fitted context scores")
    p.add_argument("--out", default=None, help="CSV output (default stdout)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("explain", help="explain high-scoring instances")
    _add_data_flags(p)
    _add_common(p)
    p.add_argument("--model", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--instance", type=int, default=None, help="0-based row index")
    group.add_argument("--top", type=int, default=5, help="explain the N highest-scoring rows")
    p.add_argument("--top-k", type=int, default=5, help="explanations per instance")
    p.add_argument("--lambda-threshold", type=float, default=0.5)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("gen-bench", help="write a synthetic benchmark suite")
    p.add_argument("--family", required=True, choices=bench.SUITE_FAMILIES)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--count", type=int, default=None, help="datasets to write (default: full suite)")
    p.add_argument("--n-instances", type=int, default=1000)
    p.add_argument("--contamination", type=float, default=0.05)
    p.add_argument("--dims", type=int, default=None, help="fix the dimensionality (synth-cs)")
    p.add_argument("--hd-factor", type=int, default=0, help="append factor x M uniform noise attributes")
    _add_common(p)
    p.set_defaults(func=cmd_gen_bench, seed=1)

    p = sub.add_parser("eval", help="AUC and AP of a score file")
    p.add_argument("--scores", default=None, help="CSV with a delta or score column")
    p.add_argument("--labels", default=None, help="CSV holding the label column (default: the scores file)")
    p.add_argument("--label-column", default="label")
    p.add_argument("--report", default=None, help="print the aggregate row of an experiment report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="fit and evaluate every CSV in a suite directory")
    p.add_argument("--suite", required=True)
    p.add_argument("--label-column", default="label")
    p.add_argument("--out", default=None, help="JSON report path")
    _add_param_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - every failure becomes one line
        msg = " ".join(str(exc).split())
        sys.stderr.write(f"admercs: error: {type(exc).__name__}: {msg}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
