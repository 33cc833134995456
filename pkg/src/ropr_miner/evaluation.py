"""Sensitivity / false-alarm metrics and the variable-selection experiment.

The experiment compares three variable sets (all variables, FP-tree
selection, and an optional externally supplied ranking) under k-NN with
several k and under the Bayesian network with several NED bin counts, on one
seeded stratified split.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal

import numpy as np

from . import __version__
from .classifiers import DEFAULT_ALPHA, DEFAULT_THRESHOLD, bn_fit, knn_fit
from .dataset import FCM_CLUSTERS, FCM_M, VARIABLES, Records, discretize, fit_fcm_discretizer, stratified_split
from .fptree import DEFAULT_MIN_SUPPORT, MiningConfig
from .importance import ImportanceTable, compute_importance, display_name, select_variables

logger = logging.getLogger(__name__)

REPORT_FORMAT = "ropr-miner/report"
REPORT_VERSION = 1

SCENARIO_ALL = "All variables"
SCENARIO_FP = "FP Tree"
SCENARIO_EXTERNAL = "External ranking"
CRITERIA = ("Sensitivity", "False alarm rate")


class UndefinedMetricError(ZeroDivisionError):
    """A rate whose denominator class is absent from the evaluated labels."""


class PipelineError(RuntimeError):
    """Failure inside one experiment stage; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(predictions, labels) -> ConfusionCounts:
    p = np.asarray(predictions).astype(np.int64).ravel()
    y = np.asarray(labels).astype(np.int64).ravel()
    if p.shape != y.shape:
        raise ValueError(f"{p.size} predictions but {y.size} labels")
    if p.size == 0:
        raise ValueError("cannot score an empty prediction set")
    return ConfusionCounts(
        tp=int(np.sum((p == 1) & (y == 1))),
        fp=int(np.sum((p == 1) & (y == 0))),
        tn=int(np.sum((p == 0) & (y == 0))),
        fn=int(np.sum((p == 0) & (y == 1))),
    )


def sensitivity(c: ConfusionCounts) -> float:
    if c.tp + c.fn == 0:
        raise UndefinedMetricError("sensitivity undefined: no positive records")
    return c.tp / (c.tp + c.fn)


def false_alarm_rate(c: ConfusionCounts) -> float:
    if c.fp + c.tn == 0:
        raise UndefinedMetricError("false alarm rate undefined: no negative records")
    return c.fp / (c.fp + c.tn)


def format_percent(rate: float | None) -> str:
    """``0.38157...`` -> ``'38.16%'`` (two decimals, round half to even)."""
    if rate is None:
        return "undefined"
    q = (Decimal(rate) * 100).quantize(Decimal("0.01"), rounding=ROUND_HALF_EVEN)
    return f"{q}%"


# -- external ranking ------------------------------------------------------


@dataclass(frozen=True)
class ExternalRanking:
    """Variables another method would drop, e.g. a random-forest ranking.

    Either ``drop`` is given directly or ``scores`` is, in which case the
    ``drop_k`` lowest-scored variables are dropped.
    """

    method: str = SCENARIO_EXTERNAL
    drop: tuple = ()
    scores: dict | None = None

    def dropped(self, drop_k: int) -> tuple:
        if self.drop:
            return tuple(self.drop)
        if self.scores is None:
            return ()
        worst_first = sorted(self.scores, key=lambda n: (self.scores[n], -VARIABLES.index(n)))
        return tuple(worst_first[:drop_k])

    @classmethod
    def load(cls, path) -> "ExternalRanking":
        """Read a ranking file.

        JSON: ``{"method": ..., "drop": [names]}`` or ``{"method": ...,
        "scores": {name: score}}``.  Anything else is read as plain text
        with one variable name to drop per line.
        """
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        try:
            d = json.loads(text)
        except json.JSONDecodeError:
            d = {"drop": [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]}
        ranking = cls(
            method=d.get("method", SCENARIO_EXTERNAL),
            drop=tuple(d.get("drop", ())),
            scores={k: float(v) for k, v in d["scores"].items()} if "scores" in d else None,
        )
        unknown = [n for n in ranking.drop + tuple(ranking.scores or ()) if n not in VARIABLES]
        if unknown:
            raise ValueError(f"{path}: unknown variable(s) {', '.join(unknown)}")
        return ranking


# -- experiment ------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    min_support: float = DEFAULT_MIN_SUPPORT
    fcm_clusters: int = FCM_CLUSTERS
    fcm_fuzzifier: float = FCM_M
    ned_bins: tuple = (3, 4)
    drop_least: int = 2
    knn_k: tuple = (2, 3)
    threshold: float = DEFAULT_THRESHOLD
    alpha: float = DEFAULT_ALPHA
    test_fraction: float = 0.2
    exclusive: str = "structural"

    def validate(self) -> None:
        """Raise ``ValueError`` naming the first invalid field."""
        checks = [
            ("min_support", 0 < self.min_support <= 1, "must be in (0, 1]"),
            ("fcm_clusters", self.fcm_clusters >= 2, "must be >= 2"),
            ("fcm_fuzzifier", self.fcm_fuzzifier > 1, "must be > 1"),
            ("ned_bins", len(self.ned_bins) > 0 and all(b >= 2 for b in self.ned_bins), "each must be >= 2"),
            ("drop_least", 0 <= self.drop_least < len(VARIABLES), f"must be in [0, {len(VARIABLES) - 1}]"),
            ("knn_k", len(self.knn_k) > 0 and all(k >= 1 for k in self.knn_k), "each must be >= 1"),
            ("threshold", 0 <= self.threshold <= 1, "must be in [0, 1]"),
            ("alpha", self.alpha > 0, "must be > 0"),
            ("test_fraction", 0 < self.test_fraction < 1, "must be in (0, 1)"),
            ("exclusive", self.exclusive in ("structural", "item"), "must be 'structural' or 'item'"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise ValueError(f"{name} {msg}, got {getattr(self, name)!r}")


@dataclass
class Cell:
    sensitivity: float | None
    false_alarm_rate: float | None
    counts: ConfusionCounts


@dataclass
class ExperimentReport:
    """Both result tables plus everything needed to reproduce them.

    ``knn[scenario][k]`` and ``bn[scenario][n_bins]`` hold :class:`Cell`.
    """

    config: ExperimentConfig
    scenarios: dict
    knn: dict
    bn: dict
    importance: ImportanceTable
    split: dict
    external_method: str | None = None
    models: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        def cell(c):
            if c is None:
                return None
            return {"sensitivity": c.sensitivity, "false_alarm_rate": c.false_alarm_rate, **asdict(c.counts)}

        def cells(table):
            return {scen: {str(h): cell(c) for h, c in row.items()} for scen, row in table.items()}

        cfg = asdict(self.config)
        cfg["ned_bins"] = list(self.config.ned_bins)
        cfg["knn_k"] = list(self.config.knn_k)
        return {
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "toolkit_version": __version__,
            "config": cfg,
            "split": self.split,
            "scenarios": {s: list(v) if v is not None else None for s, v in self.scenarios.items()},
            "importance": self.importance.to_dict(self.config.drop_least),
            "knn": cells(self.knn),
            "bayesnet": cells(self.bn),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def format_tables(self) -> str:
        cfg = self.config
        out = [
            f"min_support={cfg.min_support:g} seed={cfg.seed} drop_least={cfg.drop_least} "
            f"threshold={cfg.threshold:g} alpha={cfg.alpha:g} fcm_clusters={cfg.fcm_clusters} "
            f"fcm_fuzzifier={cfg.fcm_fuzzifier:g} test_fraction={cfg.test_fraction:g}",
            "",
        ]
        for name, scen in self.scenarios.items():
            dropped = "n/a" if scen is None else ", ".join(display_name(VARIABLES[v]) for v in sorted(set(range(len(VARIABLES))) - set(scen))) or "none"
            out.append(f"{name}: dropped {dropped}")
        out.append("")
        out.append(format_result_table(self.knn, lambda k: f"k={k}", "Performance of k-NN for different variable selection"))
        out.append("")
        out.append(format_result_table(self.bn, lambda b: f"NED ({b})", "Performance of Bayesian network for different variable selection"))
        return "\n".join(out) + "\n"


def format_result_table(table: dict, col_name, title: str) -> str:
    hyper = list(next(iter(table.values())).keys())
    head = ["Variable selection", "Criteria"] + [col_name(h) for h in hyper]
    rows = []
    for scen, row in table.items():
        for j, crit in enumerate(CRITERIA):
            vals = []
            for h in hyper:
                cell = row[h]
                if cell is None:
                    vals.append("n/a")
                else:
                    vals.append(format_percent(cell.sensitivity if j == 0 else cell.false_alarm_rate))
            rows.append([scen if j == 0 else "", crit] + vals)
    widths = [max(len(r[i]) for r in [head] + rows) for i in range(len(head))]
    lines = [title, "  ".join(h.ljust(w) for h, w in zip(head, widths)).rstrip()]
    for r in rows:
        lines.append(
            "  ".join([r[0].ljust(widths[0]), r[1].ljust(widths[1])] + [c.rjust(w) for c, w in zip(r[2:], widths[2:])]).rstrip()
        )
    return "\n".join(lines)


def _safe(metric, counts):
    try:
        return metric(counts)
    except UndefinedMetricError as exc:
        logger.warning("%s", exc)
        return None


def _evaluate(predictions, labels) -> Cell:
    c = confusion(predictions, labels)
    return Cell(_safe(sensitivity, c), _safe(false_alarm_rate, c), c)


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        logger.debug("stage %s", self.name)

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, PipelineError):
            raise PipelineError(self.name, exc) from exc


def run_experiment(
    records: Records,
    config: ExperimentConfig = ExperimentConfig(),
    external: ExternalRanking | None = None,
) -> ExperimentReport:
    """split -> FCM items (train only) -> mine/rank -> select -> classify -> score."""
    with _Stage("config"):
        config.validate()
    with _Stage("split"):
        train, test = stratified_split(records, config.test_fraction, config.seed)
    with _Stage("discretize"):
        fcm = fit_fcm_discretizer(train, c=config.fcm_clusters, m=config.fcm_fuzzifier, seed=config.seed)
        db = discretize(train, fcm)
    with _Stage("mine"):
        table = compute_importance(db, MiningConfig(config.min_support), exclusive=config.exclusive)
    with _Stage("select"):
        scenarios = {
            SCENARIO_ALL: tuple(range(len(VARIABLES))),
            SCENARIO_FP: select_variables(table, config.drop_least),
        }
        ext_name = external.method if external is not None else SCENARIO_EXTERNAL
        if ext_name in scenarios:
            ext_name = f"{ext_name} (external)"
        if external is not None:
            drop = {VARIABLES.index(n) for n in external.dropped(config.drop_least)}
            scenarios[ext_name] = tuple(v for v in range(len(VARIABLES)) if v not in drop)
        else:
            scenarios[ext_name] = None

    knn_rows, bn_rows, models = {}, {}, {}
    for name, kept in scenarios.items():
        if kept is None:
            knn_rows[name] = {k: None for k in config.knn_k}
            bn_rows[name] = {b: None for b in config.ned_bins}
            continue
        with _Stage(f"knn:{name}"):
            knn_rows[name] = {}
            for k in config.knn_k:
                model = knn_fit(train, kept, k)
                models[(name, "knn", k)] = model
                knn_rows[name][k] = _evaluate(model.predict(test), test.y)
        with _Stage(f"bayesnet:{name}"):
            bn_rows[name] = {}
            for b in config.ned_bins:
                model = bn_fit(train, kept, b, config.alpha, config.threshold)
                models[(name, "bayesnet", b)] = model
                bn_rows[name][b] = _evaluate(model.predict(test), test.y)

    split = {
        "train": len(train),
        "train_positive": train.positive_count,
        "test": len(test),
        "test_positive": test.positive_count,
    }
    models["discretizer"] = fcm
    return ExperimentReport(config, scenarios, knn_rows, bn_rows, table, split, external.method if external else None, models)
