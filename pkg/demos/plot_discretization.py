"""
Fuzzy c-means and equal-width bins
==================================

The two ways a continuous variable becomes items: fuzzy clusters for
mining, equal-width bins for the Bayesian network.
"""

import numpy as np

from ropr_miner.dataset import fit_fcm, fit_ned, generate_synthetic

records = generate_synthetic(seed=1)
x = records.column("mean_vol")

# watch the objective fall while the centers settle
history = []
model = fit_fcm(x, c=3, seed=0, callback=lambda it, centers, u, J: history.append((it, centers, J)))
for it, centers, J in history[:5] + history[-1:]:
    print(f"iter {it:3d}  J={J:14.2f}  centers={np.round(np.sort(centers), 1)}")
print("converged after", model.n_iter, "iterations")

# every point gets a crisp item: the nearest center
labels = model.assign(x)
print("items per cluster:", np.bincount(labels, minlength=3))

# memberships for a few raw values
probe = np.array([600.0, 1000.0, 1400.0])
print(np.round(model.memberships(probe), 3))

###############################################################################
# Equal-width bins
# ----------------
# The range is cut into n equal pieces; values outside the fitted range
# fall into the end bins.

ned = fit_ned(x, 4)
print("edges:", np.round(ned.edges, 1))
print("bin counts:", np.bincount(ned.assign(x), minlength=4))
print("out of range:", ned.assign(np.array([x.min() - 100, x.max() + 100])))
