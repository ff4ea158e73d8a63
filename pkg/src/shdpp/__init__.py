"""Query-focused extractive summarization of segmented streams.

Two conditional-DPP layers walk a stream segment by segment: a relevance
layer picks query-matching items, a context layer summarizes the remainder
conditioned on those picks.  Both kernels are learned low-rank Gram forms of
item features, trained by maximum likelihood.
"""

from .dpp import (
    Kernel,
    NullEventError,
    PsdViolationError,
    conditional_probability,
    log_det,
    marginal_kernel,
    sample_dpp,
    subset_probability,
)
from .features import Lexicon, Query, ShotFeatures, query_feature, query_scaling
from .model import (
    KernelFactors,
    LabeledSummary,
    SegmentedSequence,
    seqdpp_log_likelihood,
    shdpp_log_likelihood,
)
from .training import Example, TrainConfig, TrainReport, fit, gradient, objective, select_hyperparameters
from .inference import (
    baseline_ranking,
    baseline_sampling,
    summarize_seqdpp,
    summarize_shdpp,
    summarize_vanilla_dpp,
)
from .corpus import (
    Corpus,
    CorpusConfig,
    GroundtruthSummary,
    VideoRecord,
    build_groundtruth,
    enumerate_queries,
    generate_corpus,
    oracle_summary,
)
from .evaluation import HittingRecallReport, ScoreTriple, hitting_recall, rouge_su, summary_score
from .benchmark import BenchmarkReport, run_benchmark, segment_size_sweep
from .estimators import SeqDppSummarizer, ShDppSummarizer, VanillaDppSummarizer

__version__ = "0.1.0"

__all__ = [
    "BenchmarkReport",
    "Corpus",
    "CorpusConfig",
    "Example",
    "GroundtruthSummary",
    "HittingRecallReport",
    "Kernel",
    "KernelFactors",
    "LabeledSummary",
    "Lexicon",
    "NullEventError",
    "PsdViolationError",
    "Query",
    "ScoreTriple",
    "SegmentedSequence",
    "SeqDppSummarizer",
    "ShDppSummarizer",
    "ShotFeatures",
    "TrainConfig",
    "TrainReport",
    "VanillaDppSummarizer",
    "VideoRecord",
    "baseline_ranking",
    "baseline_sampling",
    "build_groundtruth",
    "conditional_probability",
    "enumerate_queries",
    "fit",
    "generate_corpus",
    "gradient",
    "hitting_recall",
    "log_det",
    "marginal_kernel",
    "objective",
    "oracle_summary",
    "query_feature",
    "query_scaling",
    "rouge_su",
    "run_benchmark",
    "sample_dpp",
    "segment_size_sweep",
    "select_hyperparameters",
    "seqdpp_log_likelihood",
    "shdpp_log_likelihood",
    "subset_probability",
    "summarize_seqdpp",
    "summarize_shdpp",
    "summarize_vanilla_dpp",
    "summary_score",
]
