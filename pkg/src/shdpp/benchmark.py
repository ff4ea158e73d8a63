"""Leave-one-video-out benchmark over summarization methods.

Each video takes one turn as the test video while the learned methods train
on the rest; scores are averaged over every (fold, test query) case.  The
sampling and ranking baselines receive the groundtruth summary length as
their budget, which makes them strong baselines.  Method failures are
recorded on the method's row instead of aborting the run.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import (
    Corpus,
    build_groundtruth,
    enumerate_queries,
    oracle_summary,
    query_matching_shots,
)
from .estimators import (
    SeqDppSummarizer,
    ShDppSummarizer,
    VanillaDppSummarizer,
    build_sequence,
)
from .evaluation import hitting_recall, summary_score
from .features import Query, query_concept_indices
from .inference import baseline_ranking, baseline_sampling
from .model import DEFAULT_RANK, DEFAULT_SEGMENT_SIZE, LabeledSummary
from .training import TrainConfig

logger = logging.getLogger(__name__)

KNOWN_METHODS = ("shdpp", "seqdpp", "dpp", "ranking", "sampling")
LEARNED_METHODS = ("shdpp", "seqdpp", "dpp")


@dataclass
class MethodResult:
    """Aggregate scores of one method over all (fold, query) cases."""

    method: str
    f: float = float("nan")
    precision: float = float("nan")
    recall: float = float("nan")
    hr: float = float("nan")
    hr_relevance: float | None = None
    n_cases: int = 0
    n_relevant_total: int = 0
    n_hits_total: int = 0
    n_relevance_hits_total: int | None = None
    error: str | None = None
    extra: tuple = ()


@dataclass
class BenchmarkReport:
    mode: str
    arity: int
    segment_size: int
    rows: list[MethodResult] = field(default_factory=list)

    def row(self, method: str) -> MethodResult:
        for row in self.rows:
            if row.method == method:
                return row
        raise KeyError(method)


def compute_oracles(corpus: Corpus) -> dict[str, tuple[int, ...]]:
    return {
        video.video_id: oracle_summary(video.user_summaries, video)
        for video in corpus.videos
    }


def select_queries(
    corpus: Corpus,
    arity: int,
    mode: str,
    max_queries: int | None,
    seed: int,
    oracles: dict[str, tuple[int, ...]],
) -> list[Query]:
    """Deterministic query list for a benchmark run.

    Prefers queries that match at least one shot in every video, so that
    hitting recall is informative across all folds; falls back to the full
    enumeration when that filter empties the list.  ``max_queries`` caps the
    list with a seeded subsample.
    """
    queries = enumerate_queries(corpus.lexicon, corpus.videos, arity, mode, oracles)
    informative = [
        q
        for q in queries
        if all(query_matching_shots(v, q) for v in corpus.videos)
    ]
    if informative:
        queries = informative
    if max_queries is not None and len(queries) > max_queries:
        rng = np.random.default_rng(seed)
        picked = sorted(rng.choice(len(queries), size=max_queries, replace=False))
        queries = [queries[i] for i in picked]
    return queries


def _fit_estimator(method: str, corpus, train_pairs, train_gts, config, segment_size, rank):
    common = dict(
        lexicon=corpus.lexicon,
        detector_multiplicity=corpus.detector_multiplicity,
        segment_size=segment_size,
        rank=rank,
        lambda1=config.lambda1,
        lambda2=config.lambda2,
        step_size=config.step_size,
        max_iters=config.max_iters,
        rel_tol=config.rel_tol,
        restarts=config.restarts,
        init_sigma=config.init_sigma,
        seed=config.seed,
    )
    if method == "shdpp":
        estimator = ShDppSummarizer(**common)
    elif method == "seqdpp":
        estimator = SeqDppSummarizer(**common)
    elif method == "dpp":
        estimator = VanillaDppSummarizer(**common)
    else:
        raise ValueError(f"{method} is not a learned method")
    return estimator.fit(train_pairs, train_gts)


def run_benchmark(
    corpus: Corpus,
    methods: Sequence[str],
    mode: str,
    arity: int = 2,
    max_queries: int | None = None,
    train_max_queries: int | None = None,
    seed: int = 0,
    segment_size: int = DEFAULT_SEGMENT_SIZE,
    rank: int = DEFAULT_RANK,
    train_config: TrainConfig | None = None,
) -> BenchmarkReport:
    """Cross-validated scores per method (rows in the given method order).

    Training always uses bi-concept queries; ``arity=3`` only changes the
    test queries.
    """
    methods = list(methods)
    for method in methods:
        if method not in KNOWN_METHODS:
            raise ValueError(f"unknown method {method!r}; expected {KNOWN_METHODS}")
    config = train_config or TrainConfig(seed=seed)
    oracles = compute_oracles(corpus)
    test_queries = select_queries(corpus, arity, mode, max_queries, seed, oracles)
    if arity == 2:
        train_queries = test_queries
    else:
        train_queries = select_queries(
            corpus, 2, mode, train_max_queries or max_queries, seed, oracles
        )
    if not test_queries:
        raise ValueError("no queries available for this corpus and mode")

    sequences = {
        video.video_id: build_sequence(
            video, corpus.lexicon, corpus.detector_multiplicity, segment_size
        )
        for video in corpus.videos
    }

    sums = {
        m: {"f": 0.0, "p": 0.0, "r": 0.0, "hr": 0.0, "hr_rel": 0.0, "n": 0,
            "relevant": 0, "hits": 0, "rel_hits": 0}
        for m in methods
    }
    errors: dict[str, str] = {}

    for fold, test_video in enumerate(corpus.videos):
        train_videos = [v for v in corpus.videos if v.video_id != test_video.video_id]
        train_pairs = []
        train_gts = []
        for video in train_videos:
            for query in train_queries:
                train_pairs.append((video, query))
                train_gts.append(
                    build_groundtruth(video, oracles[video.video_id], query, mode)
                )
        estimators = {}
        for method in methods:
            if method not in LEARNED_METHODS or method in errors:
                continue
            try:
                logger.info("fold %d: training %s", fold, method)
                estimators[method] = _fit_estimator(
                    method, corpus, train_pairs, train_gts, config, segment_size, rank
                )
            except Exception as exc:  # recorded, not fatal
                logger.warning("fold %d: %s failed to train: %s", fold, method, exc)
                errors[method] = f"fold {fold}: {exc}"

        test_sequence = sequences[test_video.video_id]
        for qi, query in enumerate(test_queries):
            gt = build_groundtruth(
                test_video, oracles[test_video.video_id], query, mode
            )
            budget = len(gt.shot_ids)
            for method in methods:
                if method in errors:
                    continue
                try:
                    summary = _summarize(
                        method,
                        estimators,
                        test_video,
                        test_sequence,
                        query,
                        corpus,
                        budget,
                        seed=seed * 1_000_000 + fold * 1_000 + qi,
                    )
                except Exception as exc:  # recorded, not fatal
                    logger.warning("fold %d: %s failed: %s", fold, method, exc)
                    errors[method] = f"fold {fold}, query {query}: {exc}"
                    continue
                triple = summary_score(summary, gt, test_video)
                report = hitting_recall(summary, gt)
                bucket = sums[method]
                bucket["f"] += triple.f_measure
                bucket["p"] += triple.precision
                bucket["r"] += triple.recall
                bucket["hr"] += report.hr_overall
                bucket["relevant"] += report.n_relevant
                bucket["hits"] += report.n_hits
                if report.hr_relevance is not None:
                    bucket["hr_rel"] += report.hr_relevance
                    bucket["rel_hits"] += report.n_relevance_hits
                bucket["n"] += 1

    rows = []
    for method in methods:
        bucket = sums[method]
        n = bucket["n"]
        row = MethodResult(method=method, error=errors.get(method))
        if n:
            layered = method == "shdpp"
            row.f = bucket["f"] / n
            row.precision = bucket["p"] / n
            row.recall = bucket["r"] / n
            row.hr = bucket["hr"] / n
            row.hr_relevance = bucket["hr_rel"] / n if layered else None
            row.n_cases = n
            row.n_relevant_total = bucket["relevant"]
            row.n_hits_total = bucket["hits"]
            row.n_relevance_hits_total = bucket["rel_hits"] if layered else None
        rows.append(row)
    return BenchmarkReport(mode=mode, arity=arity, segment_size=segment_size, rows=rows)


def _summarize(
    method, estimators, video, sequence, query, corpus, budget, seed
):
    if method in LEARNED_METHODS:
        return estimators[method].predict([(video, query)])[0]
    if method == "ranking":
        return baseline_ranking(
            sequence, query_concept_indices(query, corpus.lexicon), budget
        )
    if method == "sampling":
        return baseline_sampling(sequence, budget, seed)
    raise ValueError(f"unknown method {method!r}")


@dataclass
class SweepRow:
    """One (segment size, method) line of the segment-size sweep."""

    segment_size: int
    method: str
    f: float
    precision: float
    recall: float
    hr: float
    hr_relevance: float | None

    @property
    def extra(self) -> tuple:
        return (self.segment_size,)


def segment_size_sweep(
    corpus: Corpus,
    sizes: Sequence[int],
    methods: Sequence[str],
    mode: str,
    **kwargs,
) -> list[SweepRow]:
    """Benchmark at each segment size; emits plot-ready rows."""
    rows: list[SweepRow] = []
    for size in sizes:
        report = run_benchmark(
            corpus, methods, mode, segment_size=int(size), **kwargs
        )
        for result in report.rows:
            rows.append(
                SweepRow(
                    segment_size=int(size),
                    method=result.method,
                    f=result.f,
                    precision=result.precision,
                    recall=result.recall,
                    hr=result.hr,
                    hr_relevance=result.hr_relevance,
                )
            )
    return rows
