"""FP-tree construction and branch pattern extraction.

Only the tree itself is needed here, not full FP-growth: every root-to-leaf
branch of the tree is taken as one frequent pattern.  Items are pruned by
minimum support first, so the per-item frequency condition holds, but the
joint support of a whole branch can be lower than the threshold.  It is
reported alongside each pattern.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

from .dataset import Item, Transaction, TransactionDb

DEFAULT_MIN_SUPPORT = 0.1


class ItemOrderError(ValueError):
    """A transaction is not filtered/sorted with the tree's item order."""


@dataclass(frozen=True)
class MiningConfig:
    min_support: float = DEFAULT_MIN_SUPPORT

    def __post_init__(self):
        if not 0 < self.min_support <= 1:
            raise ValueError(f"min_support must be in (0, 1], got {self.min_support}")


class FPNode:
    __slots__ = ("item", "count", "parent", "children", "node_link", "terminal", "terminal_positive")

    def __init__(self, item: Item | None, parent: "FPNode | None" = None):
        self.item = item
        self.count = 0
        self.parent = parent
        self.children: dict[Item, FPNode] = {}
        self.node_link: FPNode | None = None
        # transactions whose insertion path ends here, and how many are positive
        self.terminal = 0
        self.terminal_positive = 0

    @property
    def is_root(self) -> bool:
        return self.item is None

    def path(self) -> list["FPNode"]:
        """Nodes from just below the root down to this node."""
        out = []
        node = self
        while node is not None and not node.is_root:
            out.append(node)
            node = node.parent
        return out[::-1]

    def __repr__(self):
        return f"FPNode({self.item}:{self.count})"


@dataclass
class HeaderEntry:
    support: int
    head: FPNode | None = None
    tail: FPNode | None = field(default=None, repr=False)

    def chain(self):
        node = self.head
        while node is not None:
            yield node
            node = node.node_link


@dataclass
class FPTree:
    """Prefix tree plus header table.

    ``order`` lists the frequent items in global order (descending support,
    ties by ascending ``(variable_id, bin_id)``); ``rank`` maps item to its
    position in that order.  ``db`` is the database the tree was mined from,
    when known.
    """

    root: FPNode
    header: dict
    order: tuple
    db: TransactionDb | None = None

    @cached_property
    def rank(self) -> dict:
        return {item: i for i, item in enumerate(self.order)}

    def sorted_children(self, node: FPNode) -> list[FPNode]:
        rank = self.rank
        return sorted(node.children.values(), key=lambda n: rank[n.item])

    def nodes(self):
        """All non-root nodes, depth-first in child order."""
        stack = self.sorted_children(self.root)[::-1]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(self.sorted_children(node)[::-1])

    def leaves(self) -> list[FPNode]:
        return [n for n in self.nodes() if not n.children]

    def __len__(self):
        return sum(1 for _ in self.nodes())

    def render(self) -> str:
        """Indented ``item:count`` text, one node per line."""
        lines = []

        def walk(node, depth):
            for child in self.sorted_children(node):
                lines.append(f"{'  ' * depth}{child.item}:{child.count}")
                walk(child, depth + 1)

        walk(self.root, 0)
        return "\n".join(lines)


@dataclass(frozen=True)
class FrequentPattern:
    """A root-to-leaf branch with its joint statistics over the full db."""

    items: tuple
    support: int
    positive_count: int
    ropr: float | None = None
    leaf: FPNode | None = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "items": [str(i) for i in self.items],
            "support": self.support,
            "positive_count": self.positive_count,
            "ropr": self.ropr,
        }


def item_supports(db: TransactionDb) -> dict:
    counts: dict[Item, int] = {}
    for t in db:
        for item in set(t.items):
            counts[item] = counts.get(item, 0) + 1
    return counts


def order_items(db: TransactionDb, config: MiningConfig = MiningConfig()):
    """Keep items with ``support / TN >= min_support`` and sort them globally.

    Returns
    -------
    order : tuple of Item
        Frequent items, descending support, ties by ascending item key.
    filtered : list of Transaction
        Each transaction reduced to its frequent items, in global order.
    """
    tn = db.total_count
    if tn < 1:
        raise ValueError("cannot order items of an empty transaction db")
    support = item_supports(db)
    frequent = [i for i, s in support.items() if s / tn >= config.min_support]
    order = tuple(sorted(frequent, key=lambda i: (-support[i], i.variable_id, i.bin_id)))
    rank = {item: r for r, item in enumerate(order)}
    filtered = [
        Transaction(tuple(sorted((i for i in set(t.items) if i in rank), key=rank.__getitem__)), t.label)
        for t in db
    ]
    return order, filtered


def build_tree(filtered: Iterable[Transaction], order, db: TransactionDb | None = None) -> FPTree:
    """Insert pre-sorted transactions into a fresh FP-tree."""
    order = tuple(order)
    rank = {item: r for r, item in enumerate(order)}
    root = FPNode(None)
    header = {item: HeaderEntry(0) for item in order}
    for t in filtered:
        node = root
        last = -1
        for item in t.items:
            r = rank.get(item)
            if r is None or r <= last:
                raise ItemOrderError(f"transaction {t.items} is not filtered/sorted by the item order")
            last = r
            child = node.children.get(item)
            if child is None:
                child = FPNode(item, node)
                node.children[item] = child
                entry = header[item]
                if entry.head is None:
                    entry.head = child
                else:
                    entry.tail.node_link = child
                entry.tail = child
            child.count += 1
            header[item].support += 1
            node = child
        if node is not root:
            node.terminal += 1
            node.terminal_positive += t.label
    return FPTree(root, header, order, db)


def mine(db: TransactionDb, config: MiningConfig = MiningConfig()) -> FPTree:
    """Order items and build the tree in one step."""
    order, filtered = order_items(db, config)
    return build_tree(filtered, order, db)


def pattern_support(db: TransactionDb, pattern) -> tuple:
    """``(support, positive_count)`` of transactions containing every pattern item."""
    wanted = set(pattern)
    support = positive = 0
    for t in db:
        if wanted.issubset(t.items):
            support += 1
            positive += t.label
    return support, positive


def branches(tree: FPTree, db: TransactionDb | None = None) -> list[FrequentPattern]:
    """One pattern per root-to-leaf path, depth-first in child order."""
    db = db if db is not None else tree.db
    if db is None:
        raise ValueError("branches() needs the transaction db the tree was built from")
    out = []
    for leaf in tree.leaves():
        items = tuple(n.item for n in leaf.path())
        support, positive = pattern_support(db, items)
        out.append(FrequentPattern(items, support, positive, leaf=leaf))
    return out


def insertion_path(tree: FPTree, transaction: Transaction) -> list[FPNode]:
    """Nodes the (filtered, sorted) transaction walks through from the root.

    A transaction that was never inserted stops where it would leave the tree.
    """
    rank = tree.rank
    ranks = [rank.get(item) for item in transaction.items]
    if None in ranks or any(a >= b for a, b in zip(ranks, ranks[1:])):
        raise ItemOrderError(f"transaction {transaction.items} does not follow the tree's item order")
    node = tree.root
    path = []
    for item in transaction.items:
        child = node.children.get(item)
        if child is None:
            break
        path.append(child)
        node = child
    return path


def write_patterns_jsonl(patterns, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in patterns:
            fh.write(json.dumps(p.to_dict(), sort_keys=True) + "\n")
