"""Difference-guided reasoning: compare object states over time and space,
rank and classify the differences, and evaluate difference-first prompting.
"""

from .anomaly import (
    AnomalyVerdict,
    ThresholdSpec,
    detect_history,
    detect_threshold,
    estimate_threshold,
    nearest_history_distance,
)
from .diff import (
    Difference,
    ImpactScore,
    Norm,
    Session,
    WeightProfile,
    compute_difference,
    impact,
    latest_difference,
    pairwise_spatial_differences,
    select_main_differences,
    spatial_variability,
    temporal_delta,
)
from .embedding import EmbeddingProvider
from .evaluation import EvalReport, Scenario, TrialResult, make_report, run_trials
from .features import (
    Dim,
    EvidenceRecord,
    ExtractorRegistry,
    ExtractorSpec,
    FeatureVector,
    RawRef,
    StateRecord,
    extract,
    vector_sub,
)
from .fusion import FusedState, external_difference, fuse, internal_difference
from .history import (
    HistoryRecord,
    HistoryStore,
    ReferenceStrategy,
    compare_with_history,
    select_reference,
)
from .llm import BackendSpec, PromptSpec, build_prompt, complete, summarize_partition
from .stats import cosine_similarity, welch_t_test

__version__ = "0.1.0"
