from semql.cascade.bounds import bernstein_radius, effective_sample_size, hoeffding_radius, weighted_lower_bound
from semql.cascade.pipeline import (
    CascadeResult,
    DegenerateSampleWarning,
    batch_allowance,
    merge_states,
    mixture_probabilities,
    phase1_proxy,
    phase2_sample,
    phase3_learn_thresholds,
    phase4_refine,
    recompute,
    route,
    run_cascade,
    score_of,
    select_sample,
)
from semql.cascade.state import CascadeConfig, CascadeState, RoutedPrediction, Sample, Scored, Source

__all__ = [
    "CascadeConfig",
    "CascadeResult",
    "CascadeState",
    "DegenerateSampleWarning",
    "RoutedPrediction",
    "Sample",
    "Scored",
    "Source",
    "batch_allowance",
    "bernstein_radius",
    "effective_sample_size",
    "hoeffding_radius",
    "merge_states",
    "mixture_probabilities",
    "phase1_proxy",
    "phase2_sample",
    "phase3_learn_thresholds",
    "phase4_refine",
    "recompute",
    "route",
    "run_cascade",
    "score_of",
    "select_sample",
    "weighted_lower_bound",
]
