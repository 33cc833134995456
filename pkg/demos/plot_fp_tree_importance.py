"""
Scoring variables with an FP-tree
=================================

A three-transaction database small enough to check by hand, followed by
the same scoring on discretized synthetic traffic records.
"""

from ropr_miner import TransactionDb, mine, branches
from ropr_miner.dataset import discretize, fit_fcm_discretizer, generate_synthetic
from ropr_miner.fptree import MiningConfig
from ropr_miner.importance import compute_importance, exclusive_items, score_items

# two positive transactions share {a, b}; the negative one is {a, c}
db = TransactionDb.from_itemsets([{"a", "b"}, {"a", "b"}, {"a", "c"}], [1, 1, 0])
tree = mine(db)
print(tree.render())

# each root-to-leaf path is a pattern; its purity ratio compares the
# pattern's positive share with the database's
table = score_items(tree, db)
for p in table.patterns:
    names = [str(i) for i in p.items]
    excl = sorted(str(i) for i in exclusive_items(tree, p))
    print(f"branch {names}: support={p.support} positives={p.positive_count} ropr={p.ropr:.4f} exclusive={excl}")

# 'a' sits above the split, so it is shared and earns nothing
print({str(i): round(s, 4) for i, s in table.item_scores.items()})

###############################################################################
# Synthetic records
# -----------------
# Eight traffic variables, three fuzzy clusters each, minimum support 0.1.

records = generate_synthetic(174, 569, informative_vars=(2, 5), effect_size=2.0, seed=0)
disc = fit_fcm_discretizer(records, c=3, seed=0)
db = discretize(records, disc)
importance = compute_importance(db, MiningConfig(0.1))
print(f"{len(importance.patterns)} branches")
print(importance.format_table(drop_k=2))
