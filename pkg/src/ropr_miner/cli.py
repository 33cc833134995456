"""Command-line entry point: ``ropr-miner <command> [flags]``.

Exit status is 0 on success, 1 when a pipeline stage fails and 2 when the
flags themselves are invalid.  Log verbosity comes from ``ROPR_MINER_LOG``
(e.g. ``DEBUG``); logs go to stderr, results only to files.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .classifiers import BayesNet, bn_fit, format_bn_summary, knn_fit, load_model, save_model
from .dataset import (
    VARIABLES,
    Discretizer,
    discretize,
    fit_fcm_discretizer,
    fit_ned_discretizer,
    generate_synthetic,
    load_csv,
    save_csv,
)
from .evaluation import (
    ExperimentConfig,
    ExternalRanking,
    PipelineError,
    _evaluate,
    format_percent,
    run_experiment,
)
from .fptree import MiningConfig, branches, mine, write_patterns_jsonl
from .importance import format_importance_table, score_items, select_variables, write_importance

logger = logging.getLogger("ropr_miner")

FLAG_NAMES = {
    "seed": "--seed",
    "min_support": "--min-support",
    "fcm_clusters": "--fcm-clusters",
    "fcm_fuzzifier": "--fcm-fuzzifier",
    "ned_bins": "--ned-bins",
    "drop_least": "--drop-least",
    "knn_k": "--knn-k",
    "threshold": "--threshold",
    "alpha": "--alpha",
    "test_fraction": "--test-fraction",
    "exclusive": "--exclusive",
}


class UsageError(Exception):
    pass


class StageError(Exception):
    pass


def _setup_logging():
    level = os.environ.get("ROPR_MINER_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    logging.captureWarnings(True)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig(
        seed=args.seed,
        min_support=args.min_support,
        fcm_clusters=args.fcm_clusters,
        fcm_fuzzifier=args.fcm_fuzzifier,
        ned_bins=tuple(args.ned_bins or (3, 4)),
        drop_least=args.drop_least,
        knn_k=tuple(args.knn_k or (2, 3)),
        threshold=args.threshold,
        alpha=args.alpha,
        test_fraction=args.test_fraction,
        exclusive=args.exclusive,
    )
    try:
        cfg.validate()
    except ValueError as exc:
        field_name = str(exc).split(" ", 1)[0]
        raise UsageError(f"{FLAG_NAMES.get(field_name, field_name)}: {exc}") from None
    return cfg


def _load_input(args):
    if not args.input:
        raise UsageError("--input is required")
    try:
        return load_csv(args.input)
    except (OSError, ValueError) as exc:
        raise StageError(f"[load] {exc}") from exc


def _fcm_for(args, records, cfg):
    if getattr(args, "discretizer", None):
        disc = Discretizer.load(args.discretizer)
        if disc.method != "fcm":
            raise StageError("[discretize] mining needs an FCM discretizer")
        return disc
    return fit_fcm_discretizer(records, c=cfg.fcm_clusters, m=cfg.fcm_fuzzifier, seed=cfg.seed)


def _manifest(out: Path, command: str, cfg, input_path, extra=None) -> None:
    files = sorted(p for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")
    doc = {
        "toolkit": "ropr-miner",
        "toolkit_version": __version__,
        "command": command,
        "config": _config_dict(cfg) if cfg is not None else None,
        "input": {"path": str(input_path), "sha256": _sha256(input_path)} if input_path else None,
        "outputs": {str(p.relative_to(out)): _sha256(p) for p in files},
    }
    if extra:
        doc.update(extra)
    _write_json(out / "manifest.json", doc)


def _config_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["ned_bins"] = list(cfg.ned_bins)
    d["knn_k"] = list(cfg.knn_k)
    return d


# -- commands --------------------------------------------------------------


def cmd_generate(args):
    informative = []
    for tok in args.informative.split(","):
        tok = tok.strip()
        if not tok:
            continue
        informative.append(VARIABLES.index(tok) if tok in VARIABLES else int(tok))
    if args.pos < 0 or args.neg < 0:
        raise UsageError("--pos/--neg must be non-negative")
    if args.effect_size < 0:
        raise UsageError("--effect-size must be >= 0")
    records = generate_synthetic(args.pos, args.neg, informative, args.effect_size, args.seed)
    out = Path(args.output or "synthetic.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(records, out)
    logger.info("wrote %d records to %s", len(records), out)


def cmd_discretize(args):
    cfg = _config_from_args(args)
    records = _load_input(args)
    out = Path(args.output)
    try:
        if args.method == "fcm":
            disc = fit_fcm_discretizer(records, c=cfg.fcm_clusters, m=cfg.fcm_fuzzifier, seed=cfg.seed)
        else:
            disc = fit_ned_discretizer(records, cfg.ned_bins[0])
        db = discretize(records, disc)
    except ValueError as exc:
        raise StageError(f"[discretize] {exc}") from exc
    out.mkdir(parents=True, exist_ok=True)
    disc.save(out / "discretizer.json")
    lines = [json.dumps({"items": [str(i) for i in t.items], "label": t.label}) for t in db]
    _write_text(out / "transactions.jsonl", "".join(line + "\n" for line in lines))
    _manifest(out, "discretize", cfg, args.input, {"method": args.method})


def _mine(args, cfg):
    records = _load_input(args)
    try:
        disc = _fcm_for(args, records, cfg)
        db = discretize(records, disc)
    except ValueError as exc:
        raise StageError(f"[discretize] {exc}") from exc
    try:
        tree = mine(db, MiningConfig(cfg.min_support))
        table = score_items(tree, db, exclusive=cfg.exclusive)
    except ValueError as exc:
        raise StageError(f"[mine] {exc}") from exc
    return records, disc, db, tree, table


def cmd_mine(args):
    cfg = _config_from_args(args)
    _, disc, db, tree, table = _mine(args, cfg)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_patterns_jsonl(table.patterns, out / "patterns.jsonl")
    _write_text(out / "tree.txt", f"# min_support={cfg.min_support:g}\n" + tree.render() + "\n")
    disc.save(out / "discretizer.json")
    _manifest(out, "mine", cfg, args.input, {"n_patterns": len(table.patterns)})


def _external_columns(ext: ExternalRanking | None) -> dict:
    if ext is None or ext.scores is None:
        return {}
    return {ext.method: dict(ext.scores)}


def cmd_rank(args):
    cfg = _config_from_args(args)
    ext = _load_external(args)
    _, disc, db, tree, table = _mine(args, cfg)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_importance(table, out / "importance.json", cfg.drop_least)
    text = f"# min_support={cfg.min_support:g}\n" + format_importance_table(
        table, drop_k=cfg.drop_least, extra_columns=_external_columns(ext)
    )
    _write_text(out / "importance.txt", text)
    write_patterns_jsonl(table.patterns, out / "patterns.jsonl")
    _manifest(out, "rank", cfg, args.input)


def _load_external(args):
    if not getattr(args, "external_ranking", None):
        return None
    try:
        return ExternalRanking.load(args.external_ranking)
    except (OSError, ValueError) as exc:
        raise UsageError(f"--external-ranking: {exc}") from None


def cmd_train(args):
    cfg = _config_from_args(args)
    records = _load_input(args)
    if args.importance:
        with open(args.importance, encoding="utf-8") as fh:
            kept_names = json.load(fh).get("kept") or list(VARIABLES)
        kept = tuple(VARIABLES.index(n) for n in kept_names)
    elif args.all_variables:
        kept = tuple(range(len(VARIABLES)))
    else:
        _, _, _, _, table = _mine(args, cfg)
        kept = select_variables(table, cfg.drop_least)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    try:
        for k in cfg.knn_k:
            save_model(knn_fit(records, kept, k), out / f"knn_k{k}.json")
        for b in cfg.ned_bins:
            bn = bn_fit(records, kept, b, cfg.alpha, cfg.threshold)
            save_model(bn, out / f"bayesnet_ned{b}.json")
            _write_text(out / f"bayesnet_ned{b}.txt", format_bn_summary(bn))
    except ValueError as exc:
        raise StageError(f"[train] {exc}") from exc
    _manifest(out, "train", cfg, args.input, {"kept": [VARIABLES[v] for v in kept]})


def cmd_evaluate(args):
    records = _load_input(args)
    model_dir = Path(args.models)
    paths = sorted(model_dir.glob("knn_k*.json")) + sorted(model_dir.glob("bayesnet_ned*.json"))
    if not paths:
        raise UsageError(f"--models: no model files in {model_dir}")
    rows = {}
    for p in paths:
        try:
            model = load_model(p)
            preds = model.predict(records, args.threshold) if isinstance(model, BayesNet) else model.predict(records)
            cell = _evaluate(preds, records.y)
        except ValueError as exc:
            raise StageError(f"[evaluate] {p.name}: {exc}") from exc
        rows[p.stem] = {"sensitivity": cell.sensitivity, "false_alarm_rate": cell.false_alarm_rate, **asdict(cell.counts)}
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "evaluation.json", rows)
    width = max(len(k) for k in rows)
    lines = [f"{'Model'.ljust(width)}  {'Sensitivity':>11}  {'False alarm rate':>16}"]
    for name, r in rows.items():
        lines.append(f"{name.ljust(width)}  {format_percent(r['sensitivity']):>11}  {format_percent(r['false_alarm_rate']):>16}")
    _write_text(out / "evaluation.txt", "\n".join(lines) + "\n")


def cmd_pipeline(args):
    cfg = _config_from_args(args)
    ext = _load_external(args)
    records = _load_input(args)
    try:
        report = run_experiment(records, cfg, ext)
    except PipelineError as exc:
        raise StageError(str(exc)) from exc
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    _write_text(out / "report.json", report.to_json())
    _write_text(out / "report.txt", report.format_tables())
    write_importance(report.importance, out / "importance.json", cfg.drop_least)
    _write_text(
        out / "importance.txt",
        f"# min_support={cfg.min_support:g}\n"
        + format_importance_table(report.importance, drop_k=cfg.drop_least, extra_columns=_external_columns(ext)),
    )
    write_patterns_jsonl(report.importance.patterns, out / "patterns.jsonl")
    report.models["discretizer"].save(out / "discretizer.json")
    (out / "models").mkdir(exist_ok=True)
    for key, model in report.models.items():
        if key == "discretizer":
            continue
        scenario, kind, h = key
        slug = scenario.lower().replace(" ", "_").replace("(", "").replace(")", "")
        stem = f"{slug}_{'knn_k' if kind == 'knn' else 'bayesnet_ned'}{h}"
        save_model(model, out / "models" / f"{stem}.json")
        if kind == "bayesnet":
            _write_text(out / "models" / f"{stem}.txt", format_bn_summary(model))
    extra = {"external_ranking": {"path": args.external_ranking, "sha256": _sha256(args.external_ranking)}} if ext else {}
    _manifest(out, "pipeline", cfg, args.input, extra)


# -- parser ----------------------------------------------------------------


def _add_common(p, *, input_required=True):
    p.add_argument("--input", required=input_required, help="CSV with the 9-column record schema")
    p.add_argument("--output", default="ropr_output", help="output directory")
    p.add_argument("--seed", type=int, default=0)


def _add_mining(p):
    p.add_argument("--min-support", type=float, default=0.1, help="minimum item support ratio (toolkit default 0.1)")
    p.add_argument("--fcm-clusters", type=int, default=3)
    p.add_argument("--fcm-fuzzifier", type=float, default=2.0)
    p.add_argument("--drop-least", type=int, default=2)
    p.add_argument("--exclusive", choices=("structural", "item"), default="structural")
    p.add_argument("--discretizer", help="reuse a saved FCM discretizer instead of fitting one")


def _add_models(p):
    p.add_argument("--ned-bins", type=int, action="append", help="NED bin count (repeatable; default 3 and 4)")
    p.add_argument("--knn-k", type=int, action="append", help="k for k-NN (repeatable; default 2 and 3)")
    p.add_argument("--threshold", type=float, default=0.2)
    p.add_argument("--alpha", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ropr-miner", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write synthetic records")
    p.add_argument("--pos", type=int, default=174)
    p.add_argument("--neg", type=int, default=569)
    p.add_argument("--informative", default="mean_vol,std_vol", help="comma-separated names or indices")
    p.add_argument("--effect-size", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="CSV path (default synthetic.csv)")
    p.set_defaults(func=cmd_generate)

    for name, func, help_ in [
        ("discretize", cmd_discretize, "fit a discretizer and write transactions"),
        ("mine", cmd_mine, "build the FP-tree and export branch patterns"),
        ("rank", cmd_rank, "score and rank variables"),
        ("train", cmd_train, "fit k-NN and Bayesian network models"),
        ("pipeline", cmd_pipeline, "split, rank, select, train and evaluate in one go"),
    ]:
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        _add_mining(p)
        _add_models(p)
        p.add_argument("--test-fraction", type=float, default=0.2)
        if name == "discretize":
            p.add_argument("--method", choices=("fcm", "ned"), default="fcm")
        if name in ("rank", "pipeline"):
            p.add_argument("--external-ranking", help="JSON or text file naming variables another method drops")
        if name == "train":
            p.add_argument("--importance", help="importance.json from `rank`; its kept variables are used")
            p.add_argument("--all-variables", action="store_true", help="train on all 8 variables")
        p.set_defaults(func=func)

    p = sub.add_parser("evaluate", help="score saved models on a labeled CSV")
    _add_common(p)
    p.add_argument("--models", required=True, help="directory written by `train`")
    p.add_argument("--threshold", type=float, default=None, help="override the Bayesian network threshold")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"ropr-miner {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"ropr-miner {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
