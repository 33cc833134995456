"""Variable importance from FP-tree branches.

Each branch (pattern) gets a relative object purity ratio,

    ropr = | positives_in_pattern / pattern_support - positives / total |,

i.e. how far the accident rate among transactions matching the pattern
drifts from the overall rate.  Every transaction then credits the ropr of
the branch(es) it belongs to to those of its items that lie on the branch's
exclusive part.  Summing item scores per variable gives the variable score.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

from .dataset import Transaction, TransactionDb
from .fptree import FPNode, FPTree, FrequentPattern, MiningConfig, branches, insertion_path, mine

EXCLUSIVE_MODES = ("structural", "item")


class UndefinedRatioError(ValueError):
    pass


class BranchNotFoundError(ValueError):
    pass


def ropr(db: TransactionDb, pattern) -> float:
    """Relative object purity ratio of a pattern against ``db``.

    ``pattern`` is a :class:`FrequentPattern` or any object with ``support``
    and ``positive_count``.  Computed from integer counts as
    ``|pos * TN - P * support| / (support * TN)`` so that flipping every label
    leaves the result bit-identical.
    """
    support, positive = pattern.support, pattern.positive_count
    if support < 1:
        raise UndefinedRatioError("ropr undefined for a pattern with zero support")
    if not 0 <= positive <= support:
        raise ValueError(f"positive_count {positive} outside [0, {support}]")
    tn, p = db.total_count, db.positive_count
    return abs(positive * tn - p * support) / (support * tn)


def _branch_nodes(tree: FPTree, branch: FrequentPattern) -> list[FPNode]:
    if branch.leaf is not None:
        nodes = branch.leaf.path()
    else:
        nodes, node = [], tree.root
        for item in branch.items:
            node = node.children.get(item)
            if node is None:
                raise BranchNotFoundError(f"branch {list(map(str, branch.items))} is not in the tree")
            nodes.append(node)
    if not nodes or nodes[-1].children or tuple(n.item for n in nodes) != tuple(branch.items):
        raise BranchNotFoundError(f"{list(map(str, branch.items))} is not a root-to-leaf branch")
    return nodes


def exclusive_items(tree: FPTree, branch: FrequentPattern) -> frozenset:
    """Items on the branch below its last branching point.

    The last branching point is the deepest node on the branch (root
    included) with more than one child.  With no branching at all the whole
    branch is exclusive.
    """
    nodes = _branch_nodes(tree, branch)
    cut = 0
    for depth, node in enumerate([tree.root] + nodes[:-1]):
        if len(node.children) > 1:
            cut = depth
    return frozenset(n.item for n in nodes[cut:])


def _exclusive_by_item(patterns) -> list[frozenset]:
    seen: dict = {}
    for p in patterns:
        for item in set(p.items):
            seen[item] = seen.get(item, 0) + 1
    return [frozenset(i for i in p.items if seen[i] == 1) for p in patterns]


@dataclass(frozen=True)
class ImportanceTable:
    """Item scores, variable scores and the resulting ranking.

    ``variable_scores`` covers every variable of the db, zero when none of its
    items earned anything; ``ranking`` is descending score, ties by ascending
    variable id.
    """

    item_scores: dict
    variable_scores: dict
    ranking: tuple
    variable_names: tuple
    patterns: tuple = ()
    method: str = "FP Tree"

    def score_of(self, name) -> float:
        return self.variable_scores[self.variable_names.index(name)]

    def to_dict(self, drop_k: int | None = None) -> dict:
        out = {
            "method": self.method,
            "variable_scores": {self.variable_names[v]: s for v, s in sorted(self.variable_scores.items())},
            "item_scores": {str(i): s for i, s in sorted(self.item_scores.items())},
            "ranking": [self.variable_names[v] for v in self.ranking],
        }
        if drop_k is not None:
            kept = select_variables(self, drop_k)
            out["drop_least"] = drop_k
            out["dropped"] = [self.variable_names[v] for v in sorted(set(self.ranking) - set(kept))]
            out["kept"] = [self.variable_names[v] for v in kept]
        return out

    def format_table(self, drop_k: int | None = None, digits: int = 1) -> str:
        return format_importance_table(self, drop_k=drop_k, digits=digits)


def score_items(
    tree: FPTree,
    db: TransactionDb | None = None,
    exclusive: str = "structural",
) -> ImportanceTable:
    """Accrue branch ropr onto transaction items.

    A transaction corresponds to every branch that extends its insertion
    path (one branch when the path ends at a leaf).  For each such branch,
    every item of the transaction lying in the branch's exclusive set
    receives the branch's ropr.  Per-item totals use ``math.fsum`` so they do
    not depend on accumulation order.
    """
    if exclusive not in EXCLUSIVE_MODES:
        raise ValueError(f"exclusive must be one of {EXCLUSIVE_MODES}, got {exclusive!r}")
    db = db if db is not None else tree.db
    if db is None:
        raise ValueError("score_items needs the transaction db the tree was built from")

    patterns = [replace(p, ropr=ropr(db, p)) for p in branches(tree, db)]
    if exclusive == "structural":
        excl = [exclusive_items(tree, p) for p in patterns]
    else:
        excl = _exclusive_by_item(patterns)
    by_leaf = {id(p.leaf): (p, e) for p, e in zip(patterns, excl)}

    rank = tree.rank
    contributions: dict = {}
    per_end: dict = {}
    for t in db:
        filtered = Transaction(tuple(sorted((i for i in set(t.items) if i in rank), key=rank.__getitem__)), t.label)
        path = insertion_path(tree, filtered)
        if not path:
            continue
        end = path[-1]
        hits = per_end.get(id(end))
        if hits is None:
            hits = per_end[id(end)] = [by_leaf[id(leaf)] for leaf in _leaves_below(tree, end)]
        items = set(t.items)
        for pattern, excl_items in hits:
            for item in items & excl_items:
                contributions.setdefault(item, []).append(pattern.ropr)

    item_scores = {item: math.fsum(contributions.get(item, ())) for item in tree.order}
    return variable_importance(item_scores, db.variable_names, patterns=tuple(patterns))


def _leaves_below(tree: FPTree, node: FPNode) -> list[FPNode]:
    if not node.children:
        return [node]
    out = []
    for child in tree.sorted_children(node):
        out.extend(_leaves_below(tree, child))
    return out


def variable_importance(item_scores: dict, variable_names, patterns=(), method: str = "FP Tree") -> ImportanceTable:
    """Sum item scores per variable and rank variables by the sums."""
    names = tuple(variable_names)
    grouped: dict = {v: [] for v in range(len(names))}
    for item, score in item_scores.items():
        grouped[item.variable_id].append(score)
    variable_scores = {v: math.fsum(sorted(s)) for v, s in grouped.items()}
    ranking = tuple(sorted(variable_scores, key=lambda v: (-variable_scores[v], v)))
    return ImportanceTable(dict(item_scores), variable_scores, ranking, names, tuple(patterns), method)


def compute_importance(
    db: TransactionDb,
    config: MiningConfig = MiningConfig(),
    exclusive: str = "structural",
) -> ImportanceTable:
    """Mine ``db`` and score its variables in one call."""
    return score_items(mine(db, config), db, exclusive=exclusive)


def select_variables(table: ImportanceTable, drop_k: int) -> tuple:
    """Variable ids left after dropping the ``drop_k`` lowest scores.

    Among equal scores the higher variable id is dropped first.  The kept ids
    come back in their original order.
    """
    n = len(table.variable_scores)
    if not 0 <= drop_k < n:
        raise ValueError(f"drop_k must be in [0, {n - 1}], got {drop_k}")
    scores = table.variable_scores
    worst_first = sorted(scores, key=lambda v: (scores[v], -v))
    dropped = set(worst_first[:drop_k])
    return tuple(v for v in sorted(scores) if v not in dropped)


def display_name(name: str) -> str:
    """``mean_vol`` -> ``Mean_vol``, the style used in importance tables."""
    return name[:1].upper() + name[1:]


def format_importance_table(
    table: ImportanceTable,
    drop_k: int | None = None,
    digits: int = 1,
    extra_columns: dict | None = None,
) -> str:
    """Aligned text table: one row per variable in original order.

    ``extra_columns`` maps a column title to ``{variable_name: score}``, e.g.
    to show an externally supplied ranking next to the FP-tree scores.
    """
    columns = {table.method: {table.variable_names[v]: s for v, s in table.variable_scores.items()}}
    columns.update(extra_columns or {})
    head = ["Variable"] + list(columns)
    rows = []
    for name in table.variable_names:
        row = [display_name(name)]
        for col in columns.values():
            s = col.get(name)
            row.append("" if s is None else f"{s:.{digits}f}")
        rows.append(row)
    widths = [max(len(r[j]) for r in [head] + rows) for j in range(len(head))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(head, widths)).rstrip()]
    for r in rows:
        lines.append("  ".join([r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]).rstrip())
    lines.append("")
    lines.append("Ranking: " + ", ".join(display_name(table.variable_names[v]) for v in table.ranking))
    if drop_k is not None:
        kept = set(select_variables(table, drop_k))
        dropped = [display_name(table.variable_names[v]) for v in table.ranking if v not in kept]
        lines.append(f"Dropped (least {drop_k}): " + (", ".join(dropped) or "none"))
    return "\n".join(lines) + "\n"


def write_importance(table: ImportanceTable, path, drop_k: int | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table.to_dict(drop_k), fh, indent=2)
        fh.write("\n")
