import json
import warnings

import numpy as np
import pytest

from ropr_miner.dataset import Records, generate_synthetic
from ropr_miner.evaluation import (
    ConfusionCounts,
    ExperimentConfig,
    ExternalRanking,
    PipelineError,
    UndefinedMetricError,
    confusion,
    false_alarm_rate,
    format_percent,
    run_experiment,
    sensitivity,
)


def test_confusion_basic():
    assert confusion([1, 0], [1, 0]) == ConfusionCounts(tp=1, fp=0, tn=1, fn=0)
    c = confusion([1, 1, 1], [1, 0, 0])
    assert (c.tp, c.fp) == (1, 2)
    assert c.total == 3


def test_confusion_errors():
    with pytest.raises(ValueError):
        confusion([], [])
    with pytest.raises(ValueError):
        confusion([1, 0], [1])


def test_rates():
    assert format_percent(sensitivity(ConfusionCounts(tp=2, fn=2))) == "50.00%"
    assert format_percent(false_alarm_rate(ConfusionCounts(fp=29, tn=47))) == "38.16%"
    with pytest.raises(UndefinedMetricError):
        sensitivity(ConfusionCounts(tp=0, fn=0, tn=3))
    with pytest.raises(UndefinedMetricError):
        false_alarm_rate(ConfusionCounts(tp=1))


@pytest.mark.parametrize(
    "rate, text",
    [(0.125, "12.50%"), (14 / 35, "40.00%"), (49 / 114, "42.98%"), (1.0, "100.00%"), (0.0, "0.00%"), (None, "undefined")],
)
def test_format_percent(rate, text):
    assert format_percent(rate) == text


def test_format_percent_half_even():
    # 1/32 and 3/32 are exact in binary, so these are true ties
    assert format_percent(1 / 32) == "3.12%"
    assert format_percent(3 / 32) == "9.38%"


def test_external_ranking_formats(tmp_path):
    (tmp_path / "rf.json").write_text(json.dumps({"method": "Random Forest", "drop": ["mean_wea", "mean_vis"]}))
    r = ExternalRanking.load(tmp_path / "rf.json")
    assert r.method == "Random Forest" and r.dropped(2) == ("mean_wea", "mean_vis")

    scores = {"mean_wea": 9.88, "mean_vis": 13.39, "mean_vol": 27.51, "mean_ocu": 24.89,
              "mean_spe": 29.02, "std_vol": 29.15, "std_ocu": 26.41, "std_spe": 30.11}
    (tmp_path / "s.json").write_text(json.dumps({"method": "Random Forest", "scores": scores}))
    assert ExternalRanking.load(tmp_path / "s.json").dropped(2) == ("mean_wea", "mean_vis")

    (tmp_path / "d.txt").write_text("# least important\nstd_ocu\nmean_spe\n")
    r = ExternalRanking.load(tmp_path / "d.txt")
    assert r.method == "External ranking" and r.dropped(2) == ("std_ocu", "mean_spe")

    (tmp_path / "bad.txt").write_text("speed\n")
    with pytest.raises(ValueError, match="speed"):
        ExternalRanking.load(tmp_path / "bad.txt")


@pytest.mark.parametrize(
    "field, value",
    [("min_support", 0.0), ("drop_least", 8), ("knn_k", ()), ("threshold", 1.5), ("alpha", 0.0), ("test_fraction", 1.0)],
)
def test_config_validation(field, value):
    cfg = ExperimentConfig(**{field: value})
    with pytest.raises(ValueError, match=field):
        cfg.validate()


@pytest.fixture(scope="module")
def full_size_report():
    recs = generate_synthetic(174, 569, seed=1)
    ext = ExternalRanking("Random Forest", drop=("mean_wea", "mean_vis"))
    return run_experiment(recs, ExperimentConfig(seed=7), ext)


def test_report_shape(full_size_report):
    rep = full_size_report
    assert list(rep.knn) == ["All variables", "FP Tree", "Random Forest"]
    assert all(list(row) == [2, 3] for row in rep.knn.values())
    assert all(list(row) == [3, 4] for row in rep.bn.values())
    assert rep.split == {"train": 594, "train_positive": 139, "test": 149, "test_positive": 35}
    assert len(rep.scenarios["FP Tree"]) == 6
    assert rep.scenarios["Random Forest"] == (2, 3, 4, 5, 6, 7)
    for table in (rep.knn, rep.bn):
        for row in table.values():
            for cell in row.values():
                assert 0 <= cell.sensitivity <= 1 and 0 <= cell.false_alarm_rate <= 1
                assert cell.counts.total == 149


def test_report_text_layout(full_size_report):
    text = full_size_report.format_tables()
    assert "min_support=0.1 seed=7 drop_least=2 threshold=0.2 alpha=1" in text
    lines = text.splitlines()
    i = lines.index("Performance of k-NN for different variable selection")
    assert lines[i + 1].split() == ["Variable", "selection", "Criteria", "k=2", "k=3"]
    assert lines[i + 2].startswith("All variables       Sensitivity")
    assert lines[i + 3].startswith("                    False alarm rate")
    assert lines[i + 6].startswith("Random Forest")
    j = lines.index("Performance of Bayesian network for different variable selection")
    assert lines[j + 1].split()[-4:] == ["NED", "(3)", "NED", "(4)"]


def test_report_json(full_size_report):
    doc = json.loads(full_size_report.to_json())
    assert doc["format"] == "ropr-miner/report"
    assert doc["config"]["min_support"] == 0.1 and doc["config"]["threshold"] == 0.2
    assert set(doc["knn"]["FP Tree"]) == {"2", "3"}
    assert set(doc["bayesnet"]["All variables"]) == {"3", "4"}
    assert len(doc["importance"]["dropped"]) == 2


def test_deterministic_json():
    recs = generate_synthetic(60, 140, seed=2)
    a = run_experiment(recs, ExperimentConfig(seed=3)).to_json()
    b = run_experiment(recs, ExperimentConfig(seed=3)).to_json()
    assert a == b


def test_drop_zero_makes_fp_equal_all():
    recs = generate_synthetic(60, 140, seed=2)
    rep = run_experiment(recs, ExperimentConfig(seed=3, drop_least=0))
    assert rep.scenarios["All variables"] == rep.scenarios["FP Tree"]
    d = rep.to_dict()
    assert d["knn"]["All variables"] == d["knn"]["FP Tree"]
    assert d["bayesnet"]["All variables"] == d["bayesnet"]["FP Tree"]


def test_missing_external_slot_is_reported_as_na():
    rep = run_experiment(generate_synthetic(30, 70, seed=0), ExperimentConfig())
    assert rep.scenarios["External ranking"] is None
    assert "External ranking    Sensitivity" in rep.format_tables()
    assert "n/a" in rep.format_tables()


def test_stage_tagged_errors():
    # one constant variable: FCM cannot form 3 clusters
    recs = generate_synthetic(30, 70, seed=0)
    X = recs.X.copy()
    X[:, 4] = 60.0
    with pytest.raises(PipelineError) as err:
        run_experiment(Records(X, recs.y), ExperimentConfig())
    assert err.value.stage == "discretize"
    assert "mean_spe" in str(err.value)
    with pytest.raises(PipelineError) as err:
        run_experiment(recs, ExperimentConfig(min_support=0))
    assert err.value.stage == "config"


def test_no_positive_test_records_gives_undefined_sensitivity():
    recs = generate_synthetic(2, 60, seed=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = run_experiment(recs, ExperimentConfig(test_fraction=0.1, knn_k=(1,)))
    cell = rep.knn["All variables"][1]
    assert cell.sensitivity is None and cell.false_alarm_rate is not None
    assert "undefined" in rep.format_tables()


def test_null_data_matches_decision_rule_base_rates():
    # band established beforehand by a 50-seed Monte-Carlo run:
    # k-NN mean sensitivity 0.43/0.42 (k=2) and 0.15/0.15 (k=3); every
    # cell had |mean sensitivity - mean false alarm| < 0.02
    p = 139 / 594
    expected = {2: 1 - (1 - p) ** 2, 3: 3 * p**2 * (1 - p) + p**3}
    acc = {}
    for seed in range(50):
        rep = run_experiment(generate_synthetic(174, 569, (2, 5), 0.0, seed), ExperimentConfig(seed=seed))
        for fam, table in (("knn", rep.knn), ("bn", rep.bn)):
            for scen in ("All variables", "FP Tree"):
                for h, cell in table[scen].items():
                    acc.setdefault((fam, scen, h), []).append((cell.sensitivity, cell.false_alarm_rate))
    for (fam, scen, h), vals in acc.items():
        sens, fa = np.mean(vals, axis=0)
        assert abs(sens - fa) < 0.05, (fam, scen, h)
        if fam == "knn":
            assert abs(sens - expected[h]) < 0.05, (scen, h)
