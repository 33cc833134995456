"""
An external ranking from a random forest
========================================

Writes a ranking file for ``ropr-miner pipeline --external-ranking``.
Needs scikit-learn, which the package itself does not use.

    python demos/random_forest_ranking.py records.csv rf.json
"""

import json
import sys

from sklearn.ensemble import RandomForestClassifier

from ropr_miner.dataset import load_csv

records = load_csv(sys.argv[1] if len(sys.argv) > 1 else "synthetic.csv")
forest = RandomForestClassifier(n_estimators=500, random_state=0).fit(records.X, records.y)

# impurity-based importances, scaled to percent
scores = {name: round(100 * float(v), 2) for name, v in zip(records.variable_names, forest.feature_importances_)}
for name, s in sorted(scores.items(), key=lambda kv: -kv[1]):
    print(f"{name:10s} {s:6.2f}")

out = sys.argv[2] if len(sys.argv) > 2 else "rf.json"
with open(out, "w", encoding="utf-8") as fh:
    json.dump({"method": "Random Forest", "scores": scores}, fh, indent=2)
