"""Labeled records, per-variable discretizers and transaction databases.

A record is one observation window: eight continuous traffic/weather
summaries plus a binary accident label.  Records live column-wise in a
:class:`Records` container (an ``(n, 8)`` float matrix and a label vector).
Two discretizers turn records into items:

* fuzzy c-means (FCM), fit per variable, used to build transactions for
  pattern mining;
* normalized equal distances (NED), i.e. equal-width bins over the training
  range, used by the Bayesian network classifier.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

logger = logging.getLogger(__name__)

VARIABLES = (
    "mean_wea",
    "mean_vis",
    "mean_vol",
    "mean_ocu",
    "mean_spe",
    "std_vol",
    "std_ocu",
    "std_spe",
)
LABEL = "accident"
CSV_HEADER = VARIABLES + (LABEL,)

DISCRETIZER_FORMAT = "ropr-miner/discretizer"
DISCRETIZER_VERSION = 1

FCM_M = 2.0
FCM_TOL = 1e-6
FCM_MAX_ITER = 300
FCM_CLUSTERS = 3


class DataError(ValueError):
    """Malformed input data (bad CSV cell, bad label, missing column)."""


class DegenerateInputError(ValueError):
    """Too little spread in the values to fit a discretizer."""


class ConfigurationError(ValueError):
    """Models and variables do not line up."""


class RawRecord(NamedTuple):
    mean_wea: float
    mean_vis: float
    mean_vol: float
    mean_ocu: float
    mean_spe: float
    std_vol: float
    std_ocu: float
    std_spe: float
    label: int


@dataclass(frozen=True)
class Records:
    """Column-oriented set of labeled records.

    ``X`` has one column per entry of ``variable_names``; ``y`` holds 0/1.
    """

    X: np.ndarray
    y: np.ndarray
    variable_names: tuple = VARIABLES

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, len(self.variable_names))
        y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        if X.ndim != 2 or X.shape[1] != len(self.variable_names):
            raise DataError(
                f"expected {len(self.variable_names)} columns, got shape {X.shape}"
            )
        if X.shape[0] != y.shape[0]:
            raise DataError(f"{X.shape[0]} rows but {y.shape[0]} labels")
        if not np.all(np.isfinite(X)):
            raise DataError("records contain non-finite values")
        if not np.all((y == 0) | (y == 1)):
            raise DataError("labels must be 0 or 1")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "variable_names", tuple(self.variable_names))

    def __len__(self):
        return self.X.shape[0]

    def __getitem__(self, i) -> RawRecord:
        return RawRecord(*map(float, self.X[i]), label=int(self.y[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def from_rows(cls, rows: Iterable[RawRecord]) -> "Records":
        rows = list(rows)
        X = np.array([r[:-1] for r in rows], dtype=float).reshape(-1, len(VARIABLES))
        y = np.array([r[-1] for r in rows], dtype=np.int64)
        return cls(X, y)

    @property
    def positive_count(self) -> int:
        return int(self.y.sum())

    def take(self, idx) -> "Records":
        idx = np.asarray(idx, dtype=np.intp)
        return Records(self.X[idx], self.y[idx], self.variable_names)

    def column(self, name_or_index) -> np.ndarray:
        return self.X[:, self.index_of(name_or_index)]

    def index_of(self, name_or_index) -> int:
        if isinstance(name_or_index, (int, np.integer)):
            if not 0 <= name_or_index < len(self.variable_names):
                raise ConfigurationError(f"variable index {name_or_index} out of range")
            return int(name_or_index)
        try:
            return self.variable_names.index(name_or_index)
        except ValueError:
            raise ConfigurationError(f"unknown variable {name_or_index!r}") from None


# -- CSV ------------------------------------------------------------------


def load_csv(path) -> Records:
    """Read records from a CSV file with the 9-column schema.

    Columns are matched by header name, so their order in the file does not
    matter.  Any missing column, empty or non-numeric cell, non-finite value,
    or label outside {0, 1} raises :class:`DataError` naming the row (1-based,
    counting the header as row 1) and the column.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, expected header {','.join(CSV_HEADER)}")
        missing = [c for c in CSV_HEADER if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        extra = [c for c in header if c not in CSV_HEADER]
        if extra:
            raise DataError(f"{path}: unexpected column(s) {', '.join(extra)}")
        pos = [header.index(c) for c in CSV_HEADER]

        X, y = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}"
                )
            values = []
            for name, j in zip(VARIABLES, pos):
                values.append(_parse_cell(path, lineno, name, row[j]))
            label_cell = row[pos[-1]].strip()
            if label_cell not in ("0", "1"):
                raise DataError(
                    f"{path}: row {lineno}, column {LABEL}: label must be 0 or 1, got {label_cell!r}"
                )
            X.append(values)
            y.append(int(label_cell))

    records = Records(np.array(X, dtype=float).reshape(-1, len(VARIABLES)), np.array(y))
    logger.info("loaded %d records (%d positive) from %s", len(records), records.positive_count, path)
    return records


def _parse_cell(path, lineno, column, cell):
    text = cell.strip()
    if not text:
        raise DataError(f"{path}: row {lineno}, column {column}: missing value")
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{path}: row {lineno}, column {column}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"{path}: row {lineno}, column {column}: non-finite value {text!r}")
    return value


def save_csv(records: Records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row, label in zip(records.X, records.y):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


# -- fuzzy c-means --------------------------------------------------------


@dataclass(frozen=True)
class FcmModel:
    """One-dimensional fuzzy c-means fit for a single variable.

    ``objective`` is the per-iteration history of
    ``J = sum_i sum_j u_ij**m (x_i - c_j)**2``.
    """

    centers: tuple
    m: float = FCM_M
    n_iter: int = 0
    objective: tuple = field(default=(), repr=False)

    @property
    def c(self) -> int:
        return len(self.centers)

    def assign(self, x):
        return fcm_assign(self, x)

    def memberships(self, x) -> np.ndarray:
        return fcm_memberships(np.asarray(self.centers), np.atleast_1d(x), self.m)

    def to_dict(self) -> dict:
        return {"centers": list(self.centers), "m": self.m}

    @classmethod
    def from_dict(cls, d) -> "FcmModel":
        return cls(centers=tuple(float(c) for c in d["centers"]), m=float(d["m"]))


def fcm_memberships(centers: np.ndarray, x: np.ndarray, m: float) -> np.ndarray:
    """Membership matrix ``u`` of shape ``(len(x), len(centers))``.

    A point sitting exactly on one or more centers gets crisp membership,
    split evenly across the coincident centers.
    """
    d2 = (x[:, None] - centers[None, :]) ** 2
    u = np.empty_like(d2)
    zero = d2 == 0.0
    hit = zero.any(axis=1)
    if hit.any():
        u[hit] = zero[hit] / zero[hit].sum(axis=1, keepdims=True)
    rest = ~hit
    if rest.any():
        # u_ij = 1 / sum_k (d_ij / d_ik)^(2/(m-1)), with d2 already squared
        p = 1.0 / (m - 1.0)
        ratio = (d2[rest][:, :, None] / d2[rest][:, None, :]) ** p
        u[rest] = 1.0 / ratio.sum(axis=2)
    return u


def _fcm_objective(x, centers, u, m) -> float:
    return float(np.sum(u**m * (x[:, None] - centers[None, :]) ** 2))


def _kmeanspp_1d(x: np.ndarray, c: int, rng: np.random.Generator) -> np.ndarray:
    centers = [x[rng.integers(len(x))]]
    for _ in range(1, c):
        d2 = np.min((x[:, None] - np.array(centers)[None, :]) ** 2, axis=1)
        centers.append(x[rng.choice(len(x), p=d2 / d2.sum())])
    return np.array(centers, dtype=float)


def fit_fcm(
    values,
    c: int = FCM_CLUSTERS,
    m: float = FCM_M,
    tol: float = FCM_TOL,
    max_iter: int = FCM_MAX_ITER,
    seed: int = 0,
    callback: Callable | None = None,
) -> FcmModel:
    """Fit fuzzy c-means to one variable.

    Parameters
    ----------
    values : array_like
        1-D sample.
    c : int
        Number of clusters (items) to create.
    m : float
        Fuzzifier, must exceed 1.
    tol : float
        Stop once no center moves by more than ``tol``.
    max_iter : int
        Upper bound on alternating updates.
    seed : int
        Seed for the k-means++ style initialisation.
    callback : callable, optional
        Called as ``callback(iteration, centers, u, objective)`` after every
        membership update; used by tests to inspect the iterates.

    Returns
    -------
    FcmModel
        Centers sorted ascending.

    Raises
    ------
    DegenerateInputError
        If there are fewer than ``c`` distinct values, or the fit collapses
        two centers onto each other.
    """
    x = np.asarray(values, dtype=float).ravel()
    if c < 2:
        raise ValueError(f"c must be >= 2, got {c}")
    if not m > 1:
        raise ValueError(f"fuzzifier m must be > 1, got {m}")
    if not np.all(np.isfinite(x)):
        raise DataError("FCM input contains non-finite values")
    n_distinct = len(np.unique(x))
    if n_distinct < c:
        raise DegenerateInputError(
            f"need at least {c} distinct values for {c} clusters, got {n_distinct}"
        )

    rng = np.random.default_rng(seed)
    centers = _kmeanspp_1d(x, c, rng)
    history = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        u = fcm_memberships(centers, x, m)
        J = _fcm_objective(x, centers, u, m)
        history.append(J)
        if callback is not None:
            callback(n_iter, centers.copy(), u, J)
        um = u**m
        new = um.T @ x / um.sum(axis=0)
        shift = np.max(np.abs(new - centers))
        centers = new
        if shift < tol:
            break

    centers = np.sort(centers)
    if np.any(np.diff(centers) <= 0):
        raise DegenerateInputError(f"FCM centers collapsed: {centers.tolist()}")
    return FcmModel(
        centers=tuple(float(v) for v in centers),
        m=float(m),
        n_iter=n_iter,
        objective=tuple(history),
    )


def fcm_assign(model: FcmModel, x):
    """Bin of the nearest center (= maximal membership); ties go to the lower bin."""
    centers = np.asarray(model.centers)
    xa = np.asarray(x, dtype=float)
    bins = np.argmin(np.abs(xa[..., None] - centers), axis=-1)
    return int(bins) if bins.ndim == 0 else bins


# -- normalized equal distances -------------------------------------------


@dataclass(frozen=True)
class NedModel:
    """Equal-width bins over the training range ``[lower, upper]``."""

    lower: float
    upper: float
    n_bins: int

    def __post_init__(self):
        if not self.lower < self.upper:
            raise DegenerateInputError(f"NED needs lower < upper, got [{self.lower}, {self.upper}]")
        if self.n_bins < 2:
            raise ValueError(f"n_bins must be >= 2, got {self.n_bins}")

    @property
    def edges(self) -> np.ndarray:
        """Interior edges (``n_bins - 1`` of them)."""
        return np.linspace(self.lower, self.upper, self.n_bins + 1)[1:-1]

    def assign(self, x):
        return ned_assign(self, x)

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "n_bins": self.n_bins}

    @classmethod
    def from_dict(cls, d) -> "NedModel":
        return cls(float(d["lower"]), float(d["upper"]), int(d["n_bins"]))


def fit_ned(values, n_bins: int) -> NedModel:
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise DegenerateInputError("NED needs at least one value")
    lo, hi = float(x.min()), float(x.max())
    if not lo < hi:
        raise DegenerateInputError(f"NED needs spread, all values equal {lo}")
    return NedModel(lo, hi, int(n_bins))


def ned_assign(model: NedModel, x):
    # left-closed bins, last bin right-closed; outside the range clamps
    bins = np.searchsorted(model.edges, np.asarray(x, dtype=float), side="right")
    return int(bins) if np.ndim(bins) == 0 else bins


# -- items and transactions -----------------------------------------------

_BIN_WORDS = {
    2: ("low", "high"),
    3: ("low", "medium", "high"),
    4: ("low", "mid_low", "mid_high", "high"),
}


def bin_word(bin_id: int, n_bins: int) -> str:
    words = _BIN_WORDS.get(n_bins)
    return words[bin_id] if words else f"bin{bin_id}"


@dataclass(frozen=True, order=True)
class Item:
    """A (variable, bin) pair; ``display_label`` is cosmetic only."""

    variable_id: int
    bin_id: int
    display_label: str = field(default="", compare=False, hash=False)

    def __str__(self):
        return self.display_label or f"v{self.variable_id}_{self.bin_id}"


@dataclass(frozen=True)
class Transaction:
    items: tuple
    label: int


@dataclass(frozen=True)
class TransactionDb:
    """Ordered transactions plus the variable names their items refer to."""

    transactions: tuple
    variable_names: tuple

    def __post_init__(self):
        object.__setattr__(self, "transactions", tuple(self.transactions))
        object.__setattr__(self, "variable_names", tuple(self.variable_names))
        for t in self.transactions:
            if t.label not in (0, 1):
                raise DataError(f"transaction label must be 0 or 1, got {t.label!r}")

    def __len__(self):
        return len(self.transactions)

    def __iter__(self):
        return iter(self.transactions)

    @property
    def total_count(self) -> int:
        return len(self.transactions)

    @property
    def positive_count(self) -> int:
        return sum(t.label for t in self.transactions)

    def inverted(self) -> "TransactionDb":
        """Same transactions with every label flipped."""
        return TransactionDb(
            tuple(Transaction(t.items, 1 - t.label) for t in self.transactions),
            self.variable_names,
        )

    @classmethod
    def from_itemsets(cls, itemsets: Sequence[Iterable], labels: Sequence[int]) -> "TransactionDb":
        """Build a db from arbitrary hashable tokens.

        Each distinct token becomes its own variable (sorted token order) with
        a single bin, so ``{"a", "b"}`` style toy data can be mined directly.
        """
        if len(itemsets) != len(labels):
            raise DataError(f"{len(itemsets)} itemsets but {len(labels)} labels")
        tokens = sorted({tok for s in itemsets for tok in s}, key=str)
        items = {tok: Item(i, 0, str(tok)) for i, tok in enumerate(tokens)}
        txs = tuple(
            Transaction(tuple(sorted(items[tok] for tok in set(s))), int(lab))
            for s, lab in zip(itemsets, labels)
        )
        return cls(txs, tuple(str(t) for t in tokens))


@dataclass(frozen=True)
class Discretizer:
    """Fitted per-variable models (all FCM or all NED) for a variable subset.

    ``variables`` holds indices into ``variable_names``; ``models[i]``
    discretizes variable ``variables[i]``.
    """

    method: str
    variables: tuple
    models: tuple
    variable_names: tuple = VARIABLES

    def __post_init__(self):
        if self.method not in ("fcm", "ned"):
            raise ConfigurationError(f"unknown discretization method {self.method!r}")
        if len(self.variables) != len(self.models):
            raise ConfigurationError(
                f"{len(self.models)} models for {len(self.variables)} variables"
            )
        kind = FcmModel if self.method == "fcm" else NedModel
        for v, mdl in zip(self.variables, self.models):
            if not isinstance(mdl, kind):
                raise ConfigurationError(
                    f"variable {self.variable_names[v]}: expected {kind.__name__}, got {type(mdl).__name__}"
                )

    def n_bins(self, k: int) -> int:
        mdl = self.models[k]
        return mdl.c if self.method == "fcm" else mdl.n_bins

    def item(self, k: int, bin_id: int) -> Item:
        v = self.variables[k]
        return Item(v, int(bin_id), f"{self.variable_names[v]}_{bin_word(bin_id, self.n_bins(k))}")

    def bins(self, records: Records) -> np.ndarray:
        """Integer bin matrix, one column per discretized variable."""
        out = np.empty((len(records), len(self.variables)), dtype=np.int64)
        for k, (v, mdl) in enumerate(zip(self.variables, self.models)):
            out[:, k] = mdl.assign(records.X[:, v]) if len(records) else []
        return out

    def to_dict(self) -> dict:
        return {
            "format": DISCRETIZER_FORMAT,
            "version": DISCRETIZER_VERSION,
            "method": self.method,
            "variables": [self.variable_names[v] for v in self.variables],
            "models": [m.to_dict() for m in self.models],
        }

    @classmethod
    def from_dict(cls, d) -> "Discretizer":
        if d.get("format") != DISCRETIZER_FORMAT:
            raise ConfigurationError(f"not a discretizer document: format={d.get('format')!r}")
        if d.get("version") != DISCRETIZER_VERSION:
            raise ConfigurationError(f"unsupported discretizer version {d.get('version')!r}")
        kind = FcmModel if d["method"] == "fcm" else NedModel
        variables = tuple(VARIABLES.index(name) for name in d["variables"])
        return cls(d["method"], variables, tuple(kind.from_dict(m) for m in d["models"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Discretizer":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _variable_subset(records, variables):
    if variables is None:
        return tuple(range(len(records.variable_names)))
    return tuple(records.index_of(v) for v in variables)


def fit_fcm_discretizer(
    records: Records,
    variables=None,
    c: int = FCM_CLUSTERS,
    m: float = FCM_M,
    tol: float = FCM_TOL,
    max_iter: int = FCM_MAX_ITER,
    seed: int = 0,
) -> Discretizer:
    variables = _variable_subset(records, variables)
    models = []
    for v in variables:
        try:
            models.append(fit_fcm(records.X[:, v], c=c, m=m, tol=tol, max_iter=max_iter, seed=seed))
        except DegenerateInputError as exc:
            raise DegenerateInputError(f"variable {records.variable_names[v]}: {exc}") from None
    return Discretizer("fcm", variables, tuple(models), records.variable_names)


def fit_ned_discretizer(records: Records, n_bins: int, variables=None) -> Discretizer:
    variables = _variable_subset(records, variables)
    models = []
    for v in variables:
        try:
            models.append(fit_ned(records.X[:, v], n_bins))
        except DegenerateInputError as exc:
            raise DegenerateInputError(f"variable {records.variable_names[v]}: {exc}") from None
    return Discretizer("ned", variables, tuple(models), records.variable_names)


def discretize(records: Records, discretizer: Discretizer) -> TransactionDb:
    """One item per discretized variable for every record, labels carried over."""
    if tuple(records.variable_names) != tuple(discretizer.variable_names):
        raise ConfigurationError("discretizer was fit on a different variable schema")
    bins = discretizer.bins(records)
    item_table = [
        [discretizer.item(k, b) for b in range(discretizer.n_bins(k))]
        for k in range(len(discretizer.variables))
    ]
    txs = tuple(
        Transaction(tuple(item_table[k][b] for k, b in enumerate(row)), int(label))
        for row, label in zip(bins, records.y)
    )
    return TransactionDb(txs, records.variable_names)


# -- splitting and synthesis ----------------------------------------------


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split(records: Records, test_fraction: float = 0.2, seed: int = 0):
    """Split each label class separately into train/test.

    The test share of a class is ``round_half_up(test_fraction * class_size)``.
    Row order inside each part follows the original record order.
    """
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    test_idx = []
    for label in (1, 0):
        idx = np.flatnonzero(records.y == label)
        if idx.size == 0:
            warnings.warn(f"no records with label {label}; class contributes nothing to the split")
            continue
        n_test = _round_half_up(test_fraction * idx.size)
        test_idx.append(rng.permutation(idx)[:n_test])
    test_mask = np.zeros(len(records), dtype=bool)
    if test_idx:
        test_mask[np.concatenate(test_idx)] = True
    return records.take(np.flatnonzero(~test_mask)), records.take(np.flatnonzero(test_mask))


# location and scale per variable for synthetic records, roughly the ranges of
# 10-minute freeway detector summaries
_SYNTH_LOC = np.array([1.5, 8.0, 1000.0, 12.0, 60.0, 150.0, 3.0, 5.0])
_SYNTH_SCALE = np.array([0.5, 1.5, 250.0, 4.0, 8.0, 40.0, 1.0, 1.5])


def generate_synthetic(
    n_pos: int = 174,
    n_neg: int = 569,
    informative_vars: Sequence[int] = (2, 5),
    effect_size: float = 2.0,
    seed: int = 0,
) -> Records:
    """Gaussian records with a planted class signal.

    Every variable is normal with the same location and scale in both
    classes, except that for ``informative_vars`` the positive class mean is
    shifted up by ``effect_size`` standard deviations.  Positives come first.
    """
    if n_pos < 0 or n_neg < 0:
        raise ValueError("class sizes must be non-negative")
    if effect_size < 0:
        raise ValueError(f"effect_size must be >= 0, got {effect_size}")
    informative = sorted(set(int(v) for v in informative_vars))
    if any(not 0 <= v < len(VARIABLES) for v in informative):
        raise ValueError(f"informative_vars must lie in 0..{len(VARIABLES) - 1}")

    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n_pos + n_neg, len(VARIABLES)))
    y = np.r_[np.ones(n_pos, dtype=np.int64), np.zeros(n_neg, dtype=np.int64)]
    Z[:n_pos, informative] += effect_size
    return Records(_SYNTH_LOC + _SYNTH_SCALE * Z, y)
