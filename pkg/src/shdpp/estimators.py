"""sklearn-style estimators wrapping the summarizer models.

Each estimator takes ``(video, query)`` pairs as ``X`` and
:class:`~shdpp.corpus.GroundtruthSummary` objects as ``y``; ``fit`` learns
the kernel factors by maximum likelihood and ``predict`` returns one summary
per pair.  Constructor arguments are stored verbatim so ``get_params`` /
``set_params`` / ``clone`` work through :class:`sklearn.base.BaseEstimator`.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .corpus import GroundtruthSummary, VideoRecord
from .features import Lexicon, Query, query_scaling
from .inference import summarize_seqdpp, summarize_shdpp, summarize_vanilla_dpp
from .model import (
    DEFAULT_RANK,
    DEFAULT_SEGMENT_SIZE,
    LabeledSummary,
    SegmentedSequence,
)
from .training import Example, TrainConfig, fit, select_hyperparameters


def build_sequence(
    video: VideoRecord,
    lexicon: Lexicon,
    detector_multiplicity,
    segment_size: int = DEFAULT_SEGMENT_SIZE,
) -> SegmentedSequence:
    return SegmentedSequence.from_video(
        video, lexicon, detector_multiplicity, segment_size
    )


def groundtruth_labels(
    sequence: SegmentedSequence, groundtruth: GroundtruthSummary
) -> LabeledSummary:
    """Split a groundtruth summary into per-segment layer selections.

    Query-relevant (flagged) shots supervise the relevance layer, the rest
    of the summary supervises the context layer.
    """
    relevant = []
    context = []
    picked = set(groundtruth.shot_ids)
    flagged = set(groundtruth.relevant)
    for seg in sequence.segments:
        members = picked & set(seg)
        rel = tuple(sorted(members & flagged))
        relevant.append(rel)
        context.append(tuple(sorted(members - flagged)))
    return LabeledSummary(relevant=tuple(relevant), context=tuple(context))


def groundtruth_selections(
    sequence: SegmentedSequence, groundtruth: GroundtruthSummary
) -> tuple[tuple[int, ...], ...]:
    """Per-segment selections of the whole summary (single-layer supervision)."""
    picked = set(groundtruth.shot_ids)
    return tuple(tuple(sorted(picked & set(seg))) for seg in sequence.segments)


def _normalized_grid(grid) -> list[tuple[float, float]]:
    pairs = []
    items = list(grid)
    if items and not isinstance(items[0], (tuple, list)):
        items = [(a, b) for a in items for b in items]
    for a, b in items:
        pairs.append((float(a), float(b)))
    return pairs


class _BaseDppSummarizer(BaseEstimator):
    """Shared plumbing: input validation, sequence building, training config."""

    def __init__(
        self,
        lexicon=None,
        detector_multiplicity=None,
        segment_size=DEFAULT_SEGMENT_SIZE,
        rank=DEFAULT_RANK,
        lambda1=0.01,
        lambda2=0.01,
        lambda_grid=None,
        step_size=0.01,
        max_iters=500,
        rel_tol=1e-6,
        restarts=5,
        init_sigma=0.1,
        seed=0,
    ):
        self.lexicon = lexicon
        self.detector_multiplicity = detector_multiplicity
        self.segment_size = segment_size
        self.rank = rank
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.lambda_grid = lambda_grid
        self.step_size = step_size
        self.max_iters = max_iters
        self.rel_tol = rel_tol
        self.restarts = restarts
        self.init_sigma = init_sigma
        self.seed = seed

    _model = "shdpp"

    def _check_setup(self) -> None:
        if self.lexicon is None or self.detector_multiplicity is None:
            raise ValueError(
                "set lexicon and detector_multiplicity before fitting or predicting"
            )

    @staticmethod
    def _check_pairs(X) -> list[tuple[VideoRecord, Query]]:
        pairs = list(X)
        for item in pairs:
            if not (isinstance(item, (tuple, list)) and len(item) == 2):
                raise ValueError("X must be a sequence of (video, query) pairs")
            video, query = item
            if not isinstance(video, VideoRecord) or not isinstance(query, Query):
                raise ValueError("X must pair VideoRecord objects with Query objects")
        return [(v, q) for v, q in pairs]

    def _sequence_cache(self, pairs) -> dict[str, SegmentedSequence]:
        cache: dict[str, SegmentedSequence] = {}
        for video, _ in pairs:
            if video.video_id not in cache:
                cache[video.video_id] = build_sequence(
                    video, self.lexicon, self.detector_multiplicity, self.segment_size
                )
        return cache

    def _config(self, lambda1: float, lambda2: float) -> TrainConfig:
        return TrainConfig(
            lambda1=lambda1,
            lambda2=lambda2,
            step_size=self.step_size,
            max_iters=self.max_iters,
            rel_tol=self.rel_tol,
            restarts=self.restarts,
            init_sigma=self.init_sigma,
            seed=self.seed,
            rank=self.rank,
        )

    def _uses_query_scale(self) -> bool:
        return True

    def _examples(self, pairs, y, cache) -> list[Example]:
        gts = list(y)
        if len(gts) != len(pairs):
            raise ValueError("X and y must have the same length")
        examples = []
        for (video, query), gt in zip(pairs, gts):
            if not isinstance(gt, GroundtruthSummary):
                raise ValueError("y must contain GroundtruthSummary objects")
            sequence = cache[video.video_id]
            scale = (
                query_scaling(query, self.lexicon)
                if self._uses_query_scale()
                else None
            )
            examples.append(
                Example(
                    sequence=sequence,
                    labels=self._labels(sequence, gt),
                    query_scale=scale,
                    group=video.video_id,
                )
            )
        return examples

    def _labels(self, sequence, groundtruth):
        raise NotImplementedError

    def _fit_examples(self, examples: list[Example]):
        lambda1, lambda2 = float(self.lambda1), float(self.lambda2)
        if self.lambda_grid is not None:
            pairs = _normalized_grid(self.lambda_grid)
            lambda1, lambda2 = select_hyperparameters(
                examples, pairs, self._config(lambda1, lambda2), model=self._model
            )
        report = fit(examples, self._config(lambda1, lambda2), model=self._model)
        self.report_ = report
        self.lambda1_ = lambda1
        self.lambda2_ = lambda2
        return report

    def fit(self, X, y):
        self._check_setup()
        pairs = self._check_pairs(X)
        if not pairs:
            raise ValueError("fit needs at least one (video, query) pair")
        cache = self._sequence_cache(pairs)
        report = self._fit_examples(self._examples(pairs, y, cache))
        self._store_factors(report.factors)
        return self

    def _store_factors(self, factors) -> None:
        raise NotImplementedError

    def _check_fitted(self, attribute: str) -> None:
        if not hasattr(self, attribute):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet")


class ShDppSummarizer(_BaseDppSummarizer):
    """Two-layer query-focused summarizer (relevance layer + context layer)."""

    _model = "shdpp"

    def _labels(self, sequence, groundtruth):
        return groundtruth_labels(sequence, groundtruth)

    def _store_factors(self, factors) -> None:
        self.factors_ = factors

    def predict(self, X) -> list[LabeledSummary]:
        self._check_setup()
        self._check_fitted("factors_")
        pairs = self._check_pairs(X)
        cache = self._sequence_cache(pairs)
        return [
            summarize_shdpp(
                cache[video.video_id],
                query_scaling(query, self.lexicon),
                self.factors_,
            )
            for video, query in pairs
        ]


class _SingleLayerSummarizer(_BaseDppSummarizer):
    def __init__(
        self,
        lexicon=None,
        detector_multiplicity=None,
        segment_size=DEFAULT_SEGMENT_SIZE,
        rank=DEFAULT_RANK,
        lambda1=0.01,
        lambda2=0.01,
        lambda_grid=None,
        step_size=0.01,
        max_iters=500,
        rel_tol=1e-6,
        restarts=5,
        init_sigma=0.1,
        seed=0,
        use_query_features=True,
    ):
        super().__init__(
            lexicon=lexicon,
            detector_multiplicity=detector_multiplicity,
            segment_size=segment_size,
            rank=rank,
            lambda1=lambda1,
            lambda2=lambda2,
            lambda_grid=lambda_grid,
            step_size=step_size,
            max_iters=max_iters,
            rel_tol=rel_tol,
            restarts=restarts,
            init_sigma=init_sigma,
            seed=seed,
        )
        self.use_query_features = use_query_features

    def _uses_query_scale(self) -> bool:
        return bool(self.use_query_features)

    def _labels(self, sequence, groundtruth):
        return groundtruth_selections(sequence, groundtruth)

    def _store_factors(self, factors) -> None:
        self.weights_ = np.asarray(factors, dtype=float)

    def _summarize(self, sequence, query_scale):
        raise NotImplementedError

    def predict(self, X) -> list[tuple[tuple[int, ...], ...]]:
        self._check_setup()
        self._check_fitted("weights_")
        pairs = self._check_pairs(X)
        cache = self._sequence_cache(pairs)
        out = []
        for video, query in pairs:
            scale = (
                query_scaling(query, self.lexicon)
                if self.use_query_features
                else None
            )
            out.append(self._summarize(cache[video.video_id], scale))
        return out


class SeqDppSummarizer(_SingleLayerSummarizer):
    """Single-kernel sequential summarizer (learned baseline)."""

    _model = "seqdpp"

    def _summarize(self, sequence, query_scale):
        return summarize_seqdpp(sequence, self.weights_, query_scale)


class VanillaDppSummarizer(_SingleLayerSummarizer):
    """Independent per-segment summarizer without carryover (learned baseline)."""

    _model = "dpp"

    def _summarize(self, sequence, query_scale):
        return summarize_vanilla_dpp(sequence, self.weights_, query_scale)
