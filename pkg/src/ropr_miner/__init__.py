"""FP-tree variable importance and baseline accident-risk classifiers."""

__version__ = "0.1.0"

from .dataset import (  # noqa: E402
    VARIABLES,
    Discretizer,
    FcmModel,
    Item,
    NedModel,
    RawRecord,
    Records,
    Transaction,
    TransactionDb,
    discretize,
    fcm_assign,
    fit_fcm,
    fit_fcm_discretizer,
    fit_ned,
    fit_ned_discretizer,
    generate_synthetic,
    load_csv,
    ned_assign,
    save_csv,
    stratified_split,
)
from .fptree import (  # noqa: E402
    FPTree,
    FrequentPattern,
    MiningConfig,
    branches,
    build_tree,
    insertion_path,
    mine,
    order_items,
    pattern_support,
)
from .importance import (  # noqa: E402
    ImportanceTable,
    compute_importance,
    exclusive_items,
    ropr,
    score_items,
    select_variables,
    variable_importance,
)
from .classifiers import BayesNet, KnnModel, bn_fit, bn_posterior, bn_predict, knn_fit, knn_predict  # noqa: E402
from .evaluation import (  # noqa: E402
    ConfusionCounts,
    ExperimentConfig,
    ExperimentReport,
    ExternalRanking,
    confusion,
    false_alarm_rate,
    run_experiment,
    sensitivity,
)
