"""Baseline accident-risk classifiers.

``KnnModel``
    k nearest neighbours, Euclidean distance on z-scored variables, predicts
    an accident when at least half of the k neighbours are positive.
``BayesNet``
    every explanatory variable is a parent of the accident node, so the
    network is a single conditional table keyed by the full configuration
    of NED bins.  Unseen configurations fall back to the smoothed prior.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import VARIABLES, DegenerateInputError, NedModel, Records, bin_word, fit_ned

MODEL_FORMAT = "ropr-miner/model"
MODEL_VERSION = 1
DEFAULT_THRESHOLD = 0.2
DEFAULT_ALPHA = 1.0


def _resolve(records: Records, kept_variables) -> tuple:
    if kept_variables is None:
        return tuple(range(len(records.variable_names)))
    return tuple(records.index_of(v) for v in kept_variables)


def _rows(model_vars, data) -> np.ndarray:
    X = data.X if isinstance(data, Records) else np.atleast_2d(np.asarray(data[: len(VARIABLES)], dtype=float))
    return X[:, list(model_vars)]


# -- k nearest neighbours ------------------------------------------------


@dataclass(frozen=True)
class KnnModel:
    k: int
    kept_variables: tuple
    mean: np.ndarray
    std: np.ndarray
    train_z: np.ndarray = field(repr=False)
    train_y: np.ndarray = field(repr=False)

    def standardize(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std

    def predict(self, data) -> np.ndarray:
        return knn_predict(self, data)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": "knn",
            "k": self.k,
            "variables": [VARIABLES[v] for v in self.kept_variables],
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "rows": self.train_z.tolist(),
            "labels": self.train_y.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "KnnModel":
        _check_header(d, "knn")
        nvar = len(d["variables"])
        return cls(
            k=int(d["k"]),
            kept_variables=tuple(VARIABLES.index(n) for n in d["variables"]),
            mean=np.array(d["mean"], dtype=float),
            std=np.array(d["std"], dtype=float),
            train_z=np.array(d["rows"], dtype=float).reshape(-1, nvar),
            train_y=np.array(d["labels"], dtype=np.int64),
        )


def knn_fit(train: Records, kept_variables=None, k: int = 2) -> KnnModel:
    """Store z-scored training rows; scaling uses training statistics only.

    A variable with zero spread in training keeps std = 1 (with a warning)
    so it contributes nothing to distances.
    """
    kept = _resolve(train, kept_variables)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > len(train):
        raise ValueError(f"k={k} exceeds the {len(train)} training records")
    X = train.X[:, list(kept)]
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    flat = std == 0
    if flat.any():
        names = ", ".join(train.variable_names[kept[j]] for j in np.flatnonzero(flat))
        warnings.warn(f"constant variable(s) in training data, std set to 1: {names}")
        std = np.where(flat, 1.0, std)
    return KnnModel(k, kept, mean, std, (X - mean) / std, train.y.copy())


def knn_predict(model: KnnModel, data) -> np.ndarray | int:
    """Label(s) for a :class:`Records` set or a single raw record.

    The k nearest rows are taken by a stable sort, so equal distances go to
    the lower training index.  Positive iff ``2 * positives >= k``.
    """
    single = not isinstance(data, Records)
    Q = model.standardize(_rows(model.kept_variables, data))
    out = np.empty(len(Q), dtype=np.int64)
    for i, q in enumerate(Q):
        d2 = np.sum((model.train_z - q) ** 2, axis=1)
        nearest = np.argsort(d2, kind="stable")[: model.k]
        out[i] = int(2 * model.train_y[nearest].sum() >= model.k)
    return int(out[0]) if single else out


# -- all-parents Bayesian network -----------------------------------------


@dataclass(frozen=True)
class BayesNet:
    """Accident node conditioned on every kept variable's NED bin.

    ``table`` maps a bin configuration (tuple, one entry per kept variable)
    to ``(n, n_positive)`` training counts; only observed configurations are
    stored.  ``marginals[j][b]`` is the share of training rows in bin ``b``
    of variable ``kept_variables[j]``.
    """

    kept_variables: tuple
    ned: tuple
    table: dict = field(repr=False)
    n_train: int
    n_positive: int
    alpha: float = DEFAULT_ALPHA
    threshold: float = DEFAULT_THRESHOLD
    marginals: tuple = field(default=(), repr=False)

    @property
    def prior(self) -> float:
        return (self.n_positive + self.alpha) / (self.n_train + 2 * self.alpha)

    def conditional(self, config) -> float:
        n, n1 = self.table[tuple(config)]
        return (n1 + self.alpha) / (n + 2 * self.alpha)

    def configurations(self, data) -> np.ndarray:
        X = _rows(self.kept_variables, data)
        return np.column_stack([m.assign(X[:, j]) for j, m in enumerate(self.ned)]).astype(np.int64)

    def posterior(self, data):
        return bn_posterior(self, data)

    def predict(self, data, threshold: float | None = None):
        return bn_predict(self, data, threshold)

    def summary(self) -> str:
        return format_bn_summary(self)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": "bayesnet",
            "variables": [VARIABLES[v] for v in self.kept_variables],
            "ned": [m.to_dict() | {"edges": m.edges.tolist()} for m in self.ned],
            "prior": self.prior,
            "alpha": self.alpha,
            "threshold": self.threshold,
            "n_train": self.n_train,
            "n_positive": self.n_positive,
            "marginals": [list(m) for m in self.marginals],
            "table": [
                {"config": list(cfg), "n": n, "n_positive": n1, "p_accident": self.conditional(cfg)}
                for cfg, (n, n1) in sorted(self.table.items())
            ],
        }

    @classmethod
    def from_dict(cls, d) -> "BayesNet":
        _check_header(d, "bayesnet")
        return cls(
            kept_variables=tuple(VARIABLES.index(n) for n in d["variables"]),
            ned=tuple(NedModel.from_dict(m) for m in d["ned"]),
            table={tuple(r["config"]): (int(r["n"]), int(r["n_positive"])) for r in d["table"]},
            n_train=int(d["n_train"]),
            n_positive=int(d["n_positive"]),
            alpha=float(d["alpha"]),
            threshold=float(d["threshold"]),
            marginals=tuple(tuple(m) for m in d.get("marginals", ())),
        )


def bn_fit(
    train: Records,
    kept_variables=None,
    n_bins: int = 4,
    alpha: float = DEFAULT_ALPHA,
    threshold: float = DEFAULT_THRESHOLD,
) -> BayesNet:
    """Fit NED bins on the training values, then count configurations.

    P(accident | cfg) = (n1 + alpha) / (n + 2 alpha).
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if not 0 <= threshold <= 1:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    kept = _resolve(train, kept_variables)
    ned = []
    for v in kept:
        try:
            ned.append(fit_ned(train.X[:, v], n_bins))
        except DegenerateInputError as exc:
            raise DegenerateInputError(f"variable {train.variable_names[v]}: {exc}") from None
    ned = tuple(ned)

    X = train.X[:, list(kept)]
    bins = np.column_stack([m.assign(X[:, j]) for j, m in enumerate(ned)]).astype(np.int64)
    table: dict = {}
    for row, label in zip(map(tuple, bins.tolist()), train.y.tolist()):
        n, n1 = table.get(row, (0, 0))
        table[row] = (n + 1, n1 + label)
    marginals = tuple(
        tuple(float(c) / len(train) for c in np.bincount(bins[:, j], minlength=n_bins)) for j in range(len(kept))
    )
    return BayesNet(kept, ned, table, len(train), train.positive_count, float(alpha), float(threshold), marginals)


def bn_posterior(model: BayesNet, data):
    """Smoothed P(accident = 1) for the record's configuration, else the prior."""
    single = not isinstance(data, Records)
    prior = model.prior
    out = np.array(
        [
            model.conditional(cfg) if cfg in model.table else prior
            for cfg in map(tuple, model.configurations(data).tolist())
        ],
        dtype=float,
    )
    return float(out[0]) if single else out


def bn_predict(model: BayesNet, data, threshold: float | None = None):
    """1 where the posterior is strictly greater than the threshold."""
    tau = model.threshold if threshold is None else threshold
    if not 0 <= tau <= 1:
        raise ValueError(f"threshold must be in [0, 1], got {tau}")
    post = bn_posterior(model, data)
    if isinstance(post, float):
        return int(post > tau)
    return (post > tau).astype(np.int64)


def format_bn_summary(model: BayesNet) -> str:
    """Per-variable NED intervals with the share of training rows in each."""
    lines = [f"accident <- {', '.join(VARIABLES[v] for v in model.kept_variables)}"]
    lines.append(f"prior P(accident) = {100 * model.prior:.1f}%   threshold = {model.threshold:g}")
    for v, m, marg in zip(model.kept_variables, model.ned, model.marginals):
        edges = m.edges
        lines.append(f"{VARIABLES[v]}:")
        for b, share in enumerate(marg):
            if b == 0:
                span = f"<{edges[0]:.4g}"
            elif b == m.n_bins - 1:
                span = f">={edges[-1]:.4g}"
            else:
                span = f"{edges[b - 1]:.4g} - {edges[b]:.4g}"
            lines.append(f"  {bin_word(b, m.n_bins):<9} {span:<22} {100 * share:5.1f}%")
    lines.append(f"observed configurations: {len(model.table)}")
    return "\n".join(lines) + "\n"


# -- persistence ----------------------------------------------------------


def _check_header(d, kind):
    if d.get("format") != MODEL_FORMAT or d.get("kind") != kind:
        raise ValueError(f"not a {kind} model document")
    if d.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {d.get('version')!r}")


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=1)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    kind = d.get("kind")
    if kind == "knn":
        return KnnModel.from_dict(d)
    if kind == "bayesnet":
        return BayesNet.from_dict(d)
    raise ValueError(f"{path}: unknown model kind {kind!r}")
