"""End-to-end acceptance checks, one or more tests per numbered criterion.

Each test carries a ``criterion`` marker; conftest prints a PASS/FAIL line
per criterion at the end of the run.
"""
import json
import random
import re
import subprocess
import sys
import time
from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest

from ropr_miner.classifiers import bn_fit, knn_fit
from ropr_miner.dataset import (
    VARIABLES,
    TransactionDb,
    discretize,
    fcm_memberships,
    fit_fcm,
    fit_fcm_discretizer,
    generate_synthetic,
    save_csv,
    stratified_split,
)
from ropr_miner.evaluation import confusion, false_alarm_rate, sensitivity
from ropr_miner.fptree import MiningConfig, branches, mine, pattern_support
from ropr_miner.importance import compute_importance, ropr, score_items
from oracles import fcm_scalar, frequent_items, item_scores as oracle_scores, support

SIGMAS = (0.1, 0.25, 0.5)


def random_db(rng):
    n_items, n_tx = rng.randint(1, 12), rng.randint(1, 64)
    tokens = [f"i{j:02d}" for j in range(n_items)]
    sets = [{t for t in tokens if rng.random() < rng.uniform(0.1, 0.8)} for _ in range(n_tx)]
    labels = [int(rng.random() < rng.uniform(0.05, 0.7)) for _ in range(n_tx)]
    return sets, labels


def rank_variables(records, seed, sigma=0.1, c=3):
    disc = fit_fcm_discretizer(records, c=c, seed=seed)
    return compute_importance(discretize(records, disc), MiningConfig(sigma))


# -- 1 -------------------------------------------------------------------------


@pytest.mark.criterion(1, "mining matches brute-force oracle on 200 random datasets, < 10 s")
def test_c1_oracle_equivalence():
    rng = random.Random(2024)
    start = time.perf_counter()
    checked = 0
    for n in range(200):
        sets, labels = random_db(rng)
        sigma = SIGMAS[n % 3]
        db = TransactionDb.from_itemsets(sets, labels)
        tree = mine(db, MiningConfig(sigma))
        assert {str(i) for i in tree.header} == frequent_items(sets, sigma)
        for p in branches(tree):
            assert (p.support, p.positive_count) == support(sets, labels, [str(i) for i in p.items])
            checked += 1
    elapsed = time.perf_counter() - start
    print(f"criterion 1: {checked} branch patterns checked in {elapsed:.2f} s")
    assert checked > 0
    assert elapsed < 10


# -- 2 -------------------------------------------------------------------------


@pytest.mark.criterion(2, "ropr: empty pattern 0, bounded in [0, 1], label inversion bit-identical")
def test_c2_empty_pattern_is_zero():
    rng = random.Random(7)
    for _ in range(50):
        sets, labels = random_db(rng)
        db = TransactionDb.from_itemsets(sets, labels)
        s, pos = pattern_support(db, [])
        assert ropr(db, SimpleNamespace(support=s, positive_count=pos)) == 0.0


@pytest.mark.criterion(2, "ropr: empty pattern 0, bounded in [0, 1], label inversion bit-identical")
def test_c2_ropr_bounded_on_fuzz():
    rng = np.random.default_rng(0)
    for _ in range(20000):
        tn = int(rng.integers(1, 2000))
        p = int(rng.integers(0, tn + 1))
        s = int(rng.integers(1, tn + 1))
        pos = int(rng.integers(max(0, s - (tn - p)), min(s, p) + 1))
        r = ropr(SimpleNamespace(total_count=tn, positive_count=p), SimpleNamespace(support=s, positive_count=pos))
        assert 0.0 <= r <= 1.0
    rnd = random.Random(8)
    for _ in range(50):
        sets, labels = random_db(rnd)
        db = TransactionDb.from_itemsets(sets, labels)
        for pat in branches(mine(db, MiningConfig(rnd.choice(SIGMAS)))):
            assert 0.0 <= ropr(db, pat) <= 1.0


@pytest.mark.criterion(2, "ropr: empty pattern 0, bounded in [0, 1], label inversion bit-identical")
def test_c2_label_inversion_bit_identical():
    rng = random.Random(9)
    for n in range(50):
        sets, labels = random_db(rng)
        db = TransactionDb.from_itemsets(sets, labels)
        cfg = MiningConfig(SIGMAS[n % 3])
        a = score_items(mine(db, cfg), db)
        inv = db.inverted()
        b = score_items(mine(inv, cfg), inv)
        hexed = lambda d: {str(k): float(v).hex() for k, v in d.items()}
        assert hexed(a.item_scores) == hexed(b.item_scores)
        assert hexed(a.variable_scores) == hexed(b.variable_scores)
        assert a.ranking == b.ranking
        assert [p.ropr.hex() for p in a.patterns] == [p.ropr.hex() for p in b.patterns]


# -- 3 -------------------------------------------------------------------------


@pytest.mark.criterion(3, "hand trace: score(b) = score(c) = 2/3, score(a) = 0")
def test_c3_hand_trace():
    sets, labels = [{"a", "b"}, {"a", "b"}, {"a", "c"}], [1, 1, 0]
    exact = oracle_scores(sets, labels, 0.1, str)
    assert exact == {"b": Fraction(2, 3), "c": Fraction(2, 3)}  # a never exclusive
    db = TransactionDb.from_itemsets(sets, labels)
    got = {str(i): s for i, s in score_items(mine(db), db).item_scores.items()}
    assert abs(got["b"] - 2 / 3) <= 1e-12
    assert abs(got["c"] - 2 / 3) <= 1e-12
    assert got["a"] == 0.0


# -- 4 -------------------------------------------------------------------------


@pytest.mark.criterion(4, "planted variables ranked top 2 in >= 18 of 20 seeds, < 30 s")
def test_c4_signal_recovery():
    planted = {VARIABLES.index("mean_vol"), VARIABLES.index("std_vol")}
    start = time.perf_counter()
    hits, tops = 0, []
    for seed in range(20):
        records = generate_synthetic(174, 569, sorted(planted), 2.0, seed)
        # the planted signal is present in the raw data
        X, y = records.X, records.y
        sep = (X[y == 1].mean(0) - X[y == 0].mean(0)) / X.std(0)
        assert set(np.argsort(-sep)[:2]) == planted
        top2 = set(rank_variables(records, seed).ranking[:2])
        tops.append(sorted(VARIABLES[v] for v in top2))
        hits += top2 == planted
    elapsed = time.perf_counter() - start
    print(f"criterion 4: planted pair in top 2 for {hits}/20 seeds ({elapsed:.1f} s); top-2 sets: {tops}")
    assert elapsed < 30
    assert hits >= 18


# -- 5 -------------------------------------------------------------------------


@pytest.mark.criterion(5, "null data: every variable's mean rank within 4.5 +/- 1.5 over 50 seeds")
def test_c5_null_calibration():
    ranks = np.zeros((50, len(VARIABLES)))
    for seed in range(50):
        ranking = rank_variables(generate_synthetic(174, 569, (2, 5), 0.0, seed), seed).ranking
        for r, v in enumerate(ranking, start=1):
            ranks[seed, v] = r
    mean_rank = ranks.mean(axis=0)
    print("criterion 5: mean ranks", dict(zip(VARIABLES, np.round(mean_rank, 2))))
    assert np.all(np.abs(mean_rank - 4.5) <= 1.5)


# -- 6 -------------------------------------------------------------------------


@pytest.mark.criterion(6, "174/569 split at 0.2 gives 139/455 train and 35/114 test")
@pytest.mark.parametrize("seed", [0, 1, 123])
def test_c6_split_arithmetic(seed):
    train, test = stratified_split(generate_synthetic(174, 569, seed=seed), 0.2, seed=seed)
    assert (train.positive_count, len(train) - train.positive_count) == (139, 455)
    assert (test.positive_count, len(test) - test.positive_count) == (35, 114)


# -- 7 -------------------------------------------------------------------------


@pytest.fixture(scope="module")
def split():
    return stratified_split(generate_synthetic(174, 569, seed=0), 0.2, seed=0)


@pytest.mark.criterion(7, "k=1 self-prediction 1.0/0.0; BN threshold sweep monotone; tau=0 gives 1.0/1.0")
def test_c7_knn_self_prediction(split):
    train, _ = split
    assert len(np.unique(train.X, axis=0)) == len(train)
    c = confusion(knn_fit(train, k=1).predict(train), train.y)
    assert sensitivity(c) == 1.0 and false_alarm_rate(c) == 0.0


@pytest.mark.criterion(7, "k=1 self-prediction 1.0/0.0; BN threshold sweep monotone; tau=0 gives 1.0/1.0")
@pytest.mark.parametrize("n_bins", [3, 4])
def test_c7_bn_threshold_sweep(split, n_bins):
    train, test = split
    model = bn_fit(train, n_bins=n_bins)
    sens, fa = [], []
    for tau in np.linspace(0.0, 1.0, 101):
        c = confusion(model.predict(test, tau), test.y)
        sens.append(sensitivity(c))
        fa.append(false_alarm_rate(c))
    assert np.all(np.diff(sens) <= 0) and np.all(np.diff(fa) <= 0)
    assert (sens[0], fa[0]) == (1.0, 1.0)


# -- 8 -------------------------------------------------------------------------


@pytest.mark.criterion(8, "FCM objective non-increasing, memberships sum to 1, centers match oracle")
def test_c8_fcm_iterates():
    records = generate_synthetic(174, 569, seed=3)
    for v in range(len(VARIABLES)):
        for seed in (0, 1):
            rows = []

            def check(it, centers, u, J):
                rows.append(J)
                assert np.max(np.abs(u.sum(axis=1) - 1.0)) <= 1e-9

            model = fit_fcm(records.column(v), c=3, seed=seed, callback=check)
            assert model.objective == tuple(rows)
            assert np.all(np.diff(rows) <= 0), (VARIABLES[v], seed)


@pytest.mark.criterion(8, "FCM objective non-increasing, memberships sum to 1, centers match oracle")
def test_c8_two_cluster_fixed_point():
    rng = np.random.default_rng(11)
    x = np.r_[rng.normal(0.0, 1.0, 40), rng.normal(10.0, 1.0, 40)]
    expected = fcm_scalar(x.tolist(), [float(x.min()), float(x.max())])
    model = fit_fcm(x, c=2, seed=0)
    assert np.max(np.abs(np.array(model.centers) - expected)) <= 1e-3
    u = fcm_memberships(np.array(model.centers), x, 2.0)
    assert np.max(np.abs(u.sum(axis=1) - 1.0)) <= 1e-9


# -- 9 -------------------------------------------------------------------------

KNN_TITLE = "Performance of k-NN for different variable selection"
BN_TITLE = "Performance of Bayesian network for different variable selection"
ROWS = ["All variables", "FP Tree", "Random Forest"]


def parse_table(text, title):
    lines = text.splitlines()
    i = lines.index(title)
    header = lines[i + 1]
    body = lines[i + 2 : i + 8]
    cells = {}
    for j in range(0, 6, 2):
        sens, fa = body[j], body[j + 1]
        label = sens[:20].strip()
        assert fa[:20].strip() == ""
        assert sens[20:].split()[0] == "Sensitivity"
        assert fa[20:].startswith("False alarm rate")
        cells[label] = (re.findall(r"\d+\.\d\d%", sens), re.findall(r"\d+\.\d\d%", fa))
    return header, cells


@pytest.mark.criterion(9, "pipeline emits both 3x2 result tables, byte-identical reruns, < 10 s")
def test_c9_pipeline_protocol_shape(tmp_path):
    data = tmp_path / "synthetic.csv"
    save_csv(generate_synthetic(174, 569, seed=0), data)
    ext = tmp_path / "rf.json"
    ext.write_text(json.dumps({"method": "Random Forest", "drop": ["mean_wea", "mean_vis"]}))

    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        start = time.perf_counter()
        proc = subprocess.run(
            [sys.executable, "-m", "ropr_miner.cli", "pipeline", "--input", str(data), "--output", str(out),
             "--seed", "0", "--external-ranking", str(ext)],
            capture_output=True, text=True,
        )
        elapsed = time.perf_counter() - start
        assert proc.returncode == 0, proc.stderr
        assert elapsed < 10
        outs.append(out)
    print(f"criterion 9: pipeline run took {elapsed:.2f} s")

    text = (outs[0] / "report.txt").read_text()
    header, cells = parse_table(text, KNN_TITLE)
    assert header.split() == ["Variable", "selection", "Criteria", "k=2", "k=3"]
    assert list(cells) == ROWS and all(len(s) == len(f) == 2 for s, f in cells.values())
    header, cells = parse_table(text, BN_TITLE)
    assert header.split() == ["Variable", "selection", "Criteria", "NED", "(3)", "NED", "(4)"]
    assert list(cells) == ROWS and all(len(s) == len(f) == 2 for s, f in cells.values())

    files_a = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(outs[1]) for p in outs[1].rglob("*") if p.is_file())
    assert files_a == files_b
    for f in files_a:
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f
