"""Command-line interface: mine rules, train, predict, run the benchmark.

Exit code contract: 0 success, 2 input error (unreadable/malformed files or
model documents), 3 domain error (mining or feasibility), 4 numerical failure
(non-converged solve without --allow-nonconverged).

Output determinism: under fixed flags and seed all emitted JSON is
byte-identical except fields whose key ends with ``_seconds``; in table
output, timing is confined to lines containing ``seconds``.
"""

# Pin BLAS to one thread before numpy loads: keeps every run of a fixed
# command bit-reproducible and lets worker processes scale without thrashing.
import os

for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
import json
import sys

import numpy as np

from .dataset import fit_minmax, parse_libsvm, scale_dataset, split
from .errors import DatasetError, MiningError, PrismError, SolverFailure
from .kernel import KernelConfig
from .model_selection import GridSpec, run_experiment
from .prior_miner import LinearPrior, mine_prior
from .prior_svm import PriorSvmConfig, select_prior_points, train_prior_svm
from .svm import SvmModel, accuracy, decision_values

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DOMAIN = 3
EXIT_NUMERIC = 4


def _default_seed() -> int:
    return int(os.environ.get("PRISM_SEED", "42"))


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="prism",
                                  description="Rule-constrained kernel SVM toolkit")
    sub = top.add_subparsers(dest="command", required=True)

    mine = sub.add_parser("mine", help="mine linear class rules from a dataset")
    mine.add_argument("data", help="libsvm-format data file")
    mine.add_argument("--class", dest="target", choices=["+1", "-1", "both"],
                      default="+1", help="class whose rule to mine")
    mine.add_argument("--angle-step", type=float, default=0.1)
    mine.add_argument("--seed", type=int, default=None)
    mine.add_argument("--split", type=float, default=None,
                      help="mine on a random training fraction instead of the full set")
    mine.add_argument("--format", choices=["table", "json"], default="table")
    mine.add_argument("--output", default=None)

    train = sub.add_parser("train", help="train a model and write it as JSON")
    train.add_argument("data")
    train.add_argument("--nu", type=float, default=0.5)
    train.add_argument("--sigma", type=float, default=1.0)
    train.add_argument("--kernel", choices=["rbf", "linear"], default="rbf")
    train.add_argument("--lambda2", type=float, default=None,
                       help="positive-rule penalty weight (default 0.25/N)")
    train.add_argument("--lambda3", type=float, default=None)
    train.add_argument("--b-star", type=float, default=1.0)
    train.add_argument("--no-priors", action="store_true")
    train.add_argument("--angle-step", type=float, default=0.1)
    train.add_argument("--split", type=float, default=None,
                       help="hold out a test fraction and report accuracies")
    train.add_argument("--seed", type=int, default=None)
    train.add_argument("--bias-mode", choices=["joint", "kkt-alternating"],
                       default="joint")
    train.add_argument("--allow-nonconverged", action="store_true")
    train.add_argument("--out", default=None, help="model path (default stdout)")

    pred = sub.add_parser("predict", help="apply a saved model to data")
    pred.add_argument("model")
    pred.add_argument("data")
    pred.add_argument("--threshold", type=float, default=0.0,
                      help="decision threshold for the +1 class")

    bench = sub.add_parser("benchmark",
                           help="repeated-split comparison with vs without rules")
    bench.add_argument("data")
    bench.add_argument("--repeats", type=int, default=10)
    bench.add_argument("--seed", type=int, default=None)
    bench.add_argument("--format", choices=["json", "csv", "table"], default="json")
    bench.add_argument("--output", default=None)
    bench.add_argument("--grid-subsample", type=int, default=1,
                       help="keep every k-th grid point along each axis")
    bench.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    bench.add_argument("--b-star", type=float, default=1.0)
    bench.add_argument("--angle-step", type=float, default=0.1)
    bench.add_argument("--stratified", action="store_true")
    bench.add_argument("--name", default=None, help="dataset name for the report")
    return top


def _read_data(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_libsvm(fh.read())
    except OSError as exc:
        raise _CliExit(EXIT_INPUT, f"cannot read {path}: {exc}")
    except DatasetError as exc:
        raise _CliExit(EXIT_INPUT, f"{path}: {exc}")


class _CliExit(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        self.message = message


def _emit(text: str, output: str | None):
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_mine(args) -> int:
    data = _read_data(args.data)
    seed = args.seed if args.seed is not None else _default_seed()
    if args.split is not None:
        try:
            data, _ = split(data, args.split, seed)
        except DatasetError as exc:
            raise _CliExit(EXIT_DOMAIN, str(exc))
    data = scale_dataset(data, fit_minmax(data))

    targets = [+1, -1] if args.target == "both" else [int(args.target)]
    blocks = []
    for target in targets:
        try:
            best, report = mine_prior(data, target, args.angle_step)
        except MiningError as exc:
            raise _CliExit(EXIT_DOMAIN, str(exc))
        blocks.append((target, best, report))

    if args.format == "json":
        doc = {
            "schema_version": 1,
            "rules": [
                {
                    "class": t,
                    "best": best.to_dict(),
                    "pairs": [
                        {"i": r.i, "j": r.j, "phi": r.phi, "c": r.c,
                         "support": r.support, "degenerate": r.degenerate}
                        for r in rep.pairs
                    ],
                    "mining_seconds": rep.seconds,
                }
                for t, best, rep in blocks
            ],
        }
        _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.output)
        return EXIT_OK

    lines = []
    for target, best, rep in blocks:
        lines.append(f"class {target:+d}: searched {len(rep.pairs)} feature pairs")
        lines.append(f"{'pair':>8s}  {'rule':<48s}{'support':>8s}")
        for r in rep.pairs:
            rule = LinearPrior(r.i, r.j, r.phi, r.c, target, r.support,
                               r.coef_i, r.coef_j).render()
            lines.append(f"{r.i:>3d}-{r.j:<4d}  {rule:<48s}{r.support:>8d}")
        lines.append(f"best: {best.render()}   (support {best.support})")
        lines.append(f"mining time_seconds: {rep.seconds:.3f}")
        lines.append("")
    _emit("\n".join(lines), args.output)
    return EXIT_OK


def _model_document(model: SvmModel, cfg: PriorSvmConfig, priors, scaling,
                    label_mapping) -> dict:
    doc = model.to_json_dict()
    doc["b_star"] = cfg.b_star
    doc["lambda2"] = cfg.lambda2
    doc["lambda3"] = cfg.lambda3
    doc["priors"] = {
        "pos": priors.pos_prior.to_dict() if priors.pos_prior else None,
        "neg": priors.neg_prior.to_dict() if priors.neg_prior else None,
        "q_pos": priors.q_pos,
        "q_neg": priors.q_neg,
    }
    doc["scaling"] = {"min": scaling.min.tolist(), "max": scaling.max.tolist()}
    if label_mapping:
        doc["label_mapping"] = label_mapping
    return doc


def cmd_train(args) -> int:
    data = _read_data(args.data)
    seed = args.seed if args.seed is not None else _default_seed()
    test = None
    if args.split is not None:
        try:
            data, test = split(data, args.split, seed)
        except DatasetError as exc:
            raise _CliExit(EXIT_DOMAIN, str(exc))
    scaling = fit_minmax(data)
    train_set = scale_dataset(data, scaling)

    if args.no_priors:
        p_pos = p_neg = None
        lam2 = lam3 = 0.0
    else:
        try:
            p_pos, _ = mine_prior(train_set, +1, args.angle_step)
            p_neg, _ = mine_prior(train_set, -1, args.angle_step)
        except MiningError as exc:
            raise _CliExit(EXIT_DOMAIN, str(exc))
        lam2 = args.lambda2 if args.lambda2 is not None else 0.25 / len(train_set)
        lam3 = args.lambda3 if args.lambda3 is not None else 0.25 / len(train_set)

    priors = select_prior_points(train_set, p_pos, p_neg, args.b_star)
    cfg = PriorSvmConfig(nu=args.nu, lambda2=lam2, lambda3=lam3,
                         b_star=args.b_star, bias_mode=args.bias_mode)
    try:
        model, diag = train_prior_svm(train_set, cfg, priors,
                                      KernelConfig(args.kernel, args.sigma))
    except MiningError as exc:
        raise _CliExit(EXIT_DOMAIN, str(exc))
    except PrismError as exc:
        raise _CliExit(EXIT_DOMAIN, str(exc))
    if not model.report.converged and not args.allow_nonconverged:
        raise _CliExit(EXIT_NUMERIC,
                       f"solver did not converge in {model.report.iterations} iterations "
                       "(use --allow-nonconverged to keep the best iterate)")

    doc = _model_document(model, cfg, priors, scaling, data.label_mapping)
    doc["diagnostics"] = {
        "target_margin": diag.target_margin,
        "pos_slack_sum": float(diag.pos_slack.sum()),
        "neg_slack_sum": float(diag.neg_slack.sum()),
        "converged": model.report.converged,
        "iterations": model.report.iterations,
    }
    _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    if args.split is not None:
        train_acc = accuracy(model, train_set)
        test_acc = accuracy(model, scale_dataset(test, scaling))
        sys.stdout.write(f"train accuracy: {train_acc:.4f}\n")
        sys.stdout.write(f"test accuracy: {test_acc:.4f}\n")
    return EXIT_OK


def _load_model(path: str) -> tuple[SvmModel, dict]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise _CliExit(EXIT_INPUT, f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise _CliExit(EXIT_INPUT, f"{path}: invalid JSON: {exc}")
    try:
        model = SvmModel.from_json_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise _CliExit(EXIT_INPUT, f"{path}: bad model document: {exc}")
    return model, doc


def _parse_predict_labels(path: str):
    """Features plus raw labels; an all-zero label column means unlabeled."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise _CliExit(EXIT_INPUT, f"cannot read {path}: {exc}")
    rows, labels = [], []
    n = 0
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        try:
            labels.append(float(parts[0]))
            entries = {}
            for tok in parts[1:]:
                idx_s, _, val_s = tok.partition(":")
                entries[int(idx_s)] = float(val_s)
        except ValueError:
            raise _CliExit(EXIT_INPUT, f"{path}: malformed line {line_no}")
        n = max(n, max(entries) if entries else 0)
        rows.append(entries)
    if not rows:
        raise _CliExit(EXIT_INPUT, f"{path}: no samples")
    X = np.zeros((len(rows), n))
    for i, entries in enumerate(rows):
        for idx, val in entries.items():
            X[i, idx - 1] = val
    return X, np.asarray(labels)


def cmd_predict(args) -> int:
    model, doc = _load_model(args.model)
    X, raw = _parse_predict_labels(args.data)
    if "scaling" in doc:
        lo = np.asarray(doc["scaling"]["min"], dtype=np.float64)
        hi = np.asarray(doc["scaling"]["max"], dtype=np.float64)
        if X.shape[1] != len(lo):
            raise _CliExit(EXIT_INPUT,
                           f"data has {X.shape[1]} features, model expects {len(lo)}")
        span = np.where(hi > lo, hi - lo, 1.0)
        X = np.where(hi > lo, (X - lo) / span, 0.0)
    if X.shape[1] != model.X.shape[1]:
        raise _CliExit(EXIT_INPUT,
                       f"data has {X.shape[1]} features, model expects {model.X.shape[1]}")

    dv = decision_values(model, X)
    preds = np.where(dv >= args.threshold, 1, -1)
    for p, v in zip(preds, dv):
        sys.stdout.write(f"{p:+d} {v!r}\n")

    distinct = set(raw.tolist())
    if distinct == {0.0}:
        return EXIT_OK  # unlabeled sentinel: predictions only
    if len(distinct) == 2:
        lo_lab, hi_lab = sorted(distinct)
        truth = np.where(raw == hi_lab, 1, -1)
    elif distinct <= {1.0, -1.0}:
        truth = raw.astype(np.int64)
    else:
        sys.stdout.write("labels not interpretable; accuracy skipped\n")
        return EXIT_OK
    sys.stdout.write(f"accuracy: {float(np.mean(preds == truth)):.6f}\n")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    data = _read_data(args.data)
    seed = args.seed if args.seed is not None else _default_seed()
    name = args.name or os.path.splitext(os.path.basename(args.data))[0]
    try:
        report = run_experiment(
            data, repeats=args.repeats, seed=seed, dataset_name=name,
            jobs=max(1, args.jobs), grid_subsample=max(1, args.grid_subsample),
            b_star=args.b_star, angle_step=args.angle_step,
            stratified=args.stratified)
    except PrismError as exc:
        raise _CliExit(EXIT_DOMAIN, str(exc))
    if args.format == "json":
        text = json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n"
    elif args.format == "csv":
        text = report.to_csv()
    else:
        text = report.to_table()
    _emit(text, args.output)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"mine": cmd_mine, "train": cmd_train,
                "predict": cmd_predict, "benchmark": cmd_benchmark}
    try:
        return handlers[args.command](args)
    except _CliExit as exc:
        sys.stderr.write(f"error: {exc.message}\n")
        return exc.code
    except SolverFailure as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERIC
    except PrismError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
