"""Visual search difficulty toolkit.

Converts timed visual-search annotation logs into per-image difficulty
scores, trains and evaluates difficulty predictors over precomputed deep
features, and applies the scores in an easy-to-hard multiple-instance
learning loop and a self-training harness.
"""

from .annotations import (
    AnnotatorStats,
    DifficultyScore,
    ImageProperties,
    PipelineConfig,
    ResponseRecord,
    annotator_stats,
    apply_wrong_answer_penalty,
    compute_shift,
    filter_annotators,
    filter_long_times,
    image_difficulty,
    image_properties,
    normalize_times,
    parse_annotation_log,
    per_class_difficulty,
    property_scores,
    score_annotation_log,
)
from .baselines import area_score, baseline_scores, edge_density, filesize_score
from .errors import (
    ConfigError,
    FormatError,
    LayoutError,
    ParseError,
    SolverError,
    VsdkitError,
)
from .feature_store import (
    FeatureMatrix,
    LayoutDescriptor,
    l2_normalize,
    l2_normalize_rows,
    read_features,
    validate_layout,
    write_features,
)
from .metrics import (
    Box,
    RankedPairSummary,
    average_precision,
    corloc,
    iou,
    kendall_tau,
    mean_average_precision,
    mse,
    one_vs_all_agreement,
    pair_accuracy,
)
from .mil import (
    Bag,
    SyntheticBagConfig,
    WindowInstance,
    easy_to_hard_schedule,
    generate_synthetic_bags,
    run_curriculum_benchmark,
    run_mil,
)
from .regression import (
    Dataset,
    GridSearchReport,
    RegressionModel,
    combine_predictors,
    grid_search,
    krr_fit,
    linear_svc_fit,
    load_model,
    nu_svr_fit,
    predict,
    save_model,
)
from .segmentation import SegmentationResult, fh_segment, fh_segment_count
from .selftrain import (
    HeuristicSpec,
    SampleSplit,
    pseudo_label,
    repeat_runs,
    run_selftrain_benchmark,
    select_candidates,
    selftrain_run,
)
from .splits import SplitSpec, make_splits

__version__ = "0.1.0"
