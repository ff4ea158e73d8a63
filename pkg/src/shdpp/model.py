"""Two-layer sequential DPP over per-segment label sequences.

A stream of N shots is partitioned into consecutive segments.  At each step
a relevance layer picks query-matching shots from the segment conditioned on
its previous picks, then a context layer picks additional shots from the
remainder conditioned on the relevance picks and its own previous picks.
Both layers are conditional DPPs whose kernels are low-rank Gram matrices of
shot features: the relevance kernel projects query-scaled concept scores
through one trainable factor, the context kernel projects full features
through another.

The single-layer variant (one chain of conditional DPPs over full segments)
and its no-carryover degenerate form (independent per-segment DPPs) are also
defined here; they back the learned baselines.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .dpp import Kernel, pivoted_cholesky
from .features import CONTEXT_DIM

DEFAULT_RANK = 10
DEFAULT_SEGMENT_SIZE = 10


@dataclass(frozen=True)
class KernelFactors:
    """Trainable low-rank factors behind the two layer kernels.

    ``relevance`` has shape (rank, C) and acts on query-scaled concept
    scores; ``context`` has shape (rank, C + CONTEXT_DIM) and acts on the
    full shot features.
    """

    relevance: np.ndarray
    context: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.relevance, dtype=float)
        v = np.asarray(self.context, dtype=float)
        if w.ndim != 2 or v.ndim != 2:
            raise ValueError("factors must be 2-D matrices")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
            raise ValueError("factor entries must be finite")
        if w.shape[0] != v.shape[0] or w.shape[0] < 1:
            raise ValueError("factors must share a positive rank")
        if v.shape[1] != w.shape[1] + CONTEXT_DIM:
            raise ValueError(
                f"context factor needs {w.shape[1] + CONTEXT_DIM} columns, "
                f"got {v.shape[1]}"
            )
        object.__setattr__(self, "relevance", w)
        object.__setattr__(self, "context", v)

    @property
    def rank(self) -> int:
        return self.relevance.shape[0]

    @property
    def concept_dim(self) -> int:
        return self.relevance.shape[1]

    @classmethod
    def random(
        cls,
        concept_dim: int,
        rank: int = DEFAULT_RANK,
        sigma: float = 0.1,
        rng: np.random.Generator | int | None = 0,
    ) -> "KernelFactors":
        gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        return cls(
            relevance=sigma * gen.standard_normal((rank, concept_dim)),
            context=sigma * gen.standard_normal((rank, concept_dim + CONTEXT_DIM)),
        )


def partition_segments(n_items: int, segment_size: int) -> tuple[tuple[int, ...], ...]:
    """Consecutive disjoint index blocks; a trailing partial block is kept."""
    if n_items < 1:
        raise ValueError("cannot segment an empty stream")
    if segment_size < 1:
        raise ValueError("segment size must be positive")
    return tuple(
        tuple(range(start, min(start + segment_size, n_items)))
        for start in range(0, n_items, segment_size)
    )


@dataclass(frozen=True)
class SegmentedSequence:
    """A stream's features and its partition into per-step ground sets.

    ``concept_scores`` holds one l2-normalised row per shot (model code does
    not enforce normalisation so that arbitrary test kernels can be built);
    ``pooled_scores`` optionally keeps the pre-normalisation concept scores
    needed by the ranking baseline.
    """

    concept_scores: np.ndarray
    context_scores: np.ndarray
    segments: tuple[tuple[int, ...], ...]
    pooled_scores: np.ndarray | None = None

    def __post_init__(self):
        h = np.asarray(self.concept_scores, dtype=float)
        l = np.asarray(self.context_scores, dtype=float)
        if h.ndim != 2 or l.ndim != 2 or h.shape[0] != l.shape[0]:
            raise ValueError("feature matrices must be 2-D with matching rows")
        if l.shape[1] != CONTEXT_DIM:
            raise ValueError(f"context features must have {CONTEXT_DIM} columns")
        segments = tuple(tuple(int(i) for i in seg) for seg in self.segments)
        flat = [i for seg in segments for i in seg]
        if flat != list(range(h.shape[0])):
            raise ValueError(
                "segments must be consecutive disjoint blocks covering all shots"
            )
        object.__setattr__(self, "concept_scores", h)
        object.__setattr__(self, "context_scores", l)
        object.__setattr__(self, "segments", segments)
        if self.pooled_scores is not None:
            p = np.asarray(self.pooled_scores, dtype=float)
            if p.shape != h.shape:
                raise ValueError("pooled scores must match the concept-score shape")
            object.__setattr__(self, "pooled_scores", p)

    @property
    def n_shots(self) -> int:
        return self.concept_scores.shape[0]

    @property
    def concept_dim(self) -> int:
        return self.concept_scores.shape[1]

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @cached_property
    def full_features(self) -> np.ndarray:
        return np.hstack([self.concept_scores, self.context_scores])

    def query_features(self, query_scale: np.ndarray) -> np.ndarray:
        scale = np.asarray(query_scale, dtype=float)
        if scale.shape != (self.concept_dim,):
            raise ValueError("query scaling length must equal the concept dimension")
        return self.concept_scores * scale

    @classmethod
    def from_video(
        cls,
        video,
        lexicon,
        detector_multiplicity,
        segment_size: int = DEFAULT_SEGMENT_SIZE,
    ) -> "SegmentedSequence":
        """Build the model-side view of a corpus video."""
        from . import features as feat

        shots = feat.compute_shot_features(
            [s.frame_scores for s in video.shots],
            [s.descriptors for s in video.shots],
            detector_multiplicity,
        )
        pooled = np.vstack(
            [
                feat.max_pool_detector_scores(s.frame_scores, detector_multiplicity)
                for s in video.shots
            ]
        )
        h = np.vstack([s.concept_scores for s in shots])
        if h.shape[1] != len(lexicon):
            raise ValueError("detector layout does not match the lexicon size")
        return cls(
            concept_scores=h,
            context_scores=np.vstack([s.context_scores for s in shots]),
            segments=partition_segments(len(shots), segment_size),
            pooled_scores=pooled,
        )


@dataclass(frozen=True)
class LabeledSummary:
    """Per-segment selections: relevance-layer picks and context-layer picks."""

    relevant: tuple[tuple[int, ...], ...]
    context: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        rel = tuple(tuple(sorted(int(i) for i in seg)) for seg in self.relevant)
        ctx = tuple(tuple(sorted(int(i) for i in seg)) for seg in self.context)
        if len(rel) != len(ctx):
            raise ValueError("relevance and context selections must align per segment")
        for r, c in zip(rel, ctx):
            if len(set(r)) != len(r) or len(set(c)) != len(c):
                raise ValueError("selections must be duplicate free")
            if set(r) & set(c):
                raise ValueError("a shot cannot be picked by both layers")
        object.__setattr__(self, "relevant", rel)
        object.__setattr__(self, "context", ctx)

    @property
    def n_segments(self) -> int:
        return len(self.relevant)

    @property
    def relevant_ids(self) -> tuple[int, ...]:
        return tuple(sorted(i for seg in self.relevant for i in seg))

    @property
    def selected_ids(self) -> tuple[int, ...]:
        ids = [i for seg in self.relevant for i in seg]
        ids += [i for seg in self.context for i in seg]
        return tuple(sorted(ids))

    @classmethod
    def empty(cls, n_segments: int) -> "LabeledSummary":
        return cls(((),) * n_segments, ((),) * n_segments)


def check_labels(sequence: SegmentedSequence, labels: LabeledSummary) -> None:
    """Validate a LabeledSummary against a sequence's segment structure."""
    if labels.n_segments != sequence.n_segments:
        raise ValueError(
            f"labels cover {labels.n_segments} segments, "
            f"sequence has {sequence.n_segments}"
        )
    for t, (seg, rel, ctx) in enumerate(
        zip(sequence.segments, labels.relevant, labels.context)
    ):
        members = set(seg)
        if not set(rel) <= members:
            raise ValueError(f"segment {t}: relevance picks outside the ground set")
        if not set(ctx) <= members - set(rel):
            raise ValueError(
                f"segment {t}: context picks must come from the segment minus "
                "the relevance picks"
            )


def relevance_kernel(
    segment_features: np.ndarray,
    carryover_features: np.ndarray,
    factors: KernelFactors,
) -> Kernel:
    """Gram kernel of projected query-scaled features, carryover rows first."""
    return _gram_kernel(segment_features, carryover_features, factors.relevance)


def context_kernel(
    segment_features: np.ndarray,
    carryover_features: np.ndarray,
    factors: KernelFactors,
) -> Kernel:
    """Gram kernel of projected full features, carryover rows first."""
    return _gram_kernel(segment_features, carryover_features, factors.context)


def _gram_kernel(segment: np.ndarray, carryover: np.ndarray, factor: np.ndarray) -> Kernel:
    segment = np.atleast_2d(np.asarray(segment, dtype=float))
    carryover = np.asarray(carryover, dtype=float).reshape(-1, segment.shape[1])
    x = np.vstack([carryover, segment])
    if x.shape[1] != factor.shape[1]:
        raise ValueError(
            f"feature dimension {x.shape[1]} does not match factor columns "
            f"{factor.shape[1]}"
        )
    return Kernel.from_gram(x @ factor.T)


@dataclass(frozen=True)
class ConditionalTerm:
    """One conditional-DPP factor of a sequence log-likelihood.

    ``x`` holds the feature rows of the kernel (carryover first, then the
    segment); ``numerator`` indexes the rows whose principal minor forms the
    numerator (conditioned-on plus selected items); ``active`` indexes the
    rows that receive the +1 diagonal in the denominator (the selectable
    ground positions).
    """

    x: np.ndarray
    numerator: tuple[int, ...]
    active: tuple[int, ...]


def term_log_prob(term: ConditionalTerm, factor: np.ndarray) -> float:
    """Log conditional probability of one term under a factor matrix.

    Uses the jittered Cholesky policy, so rank-deficient selections yield a
    large negative but finite value.
    """
    b = term.x @ factor.T
    g = b @ b.T
    den = g.copy()
    active = list(term.active)
    den[active, active] += 1.0
    _, den_log_det, _ = pivoted_cholesky(den)
    if term.numerator:
        idx = list(term.numerator)
        _, num_log_det, _ = pivoted_cholesky(g[np.ix_(idx, idx)])
    else:
        num_log_det = 0.0
    return num_log_det - den_log_det


def _positions(segment: Sequence[int], offset: int) -> dict[int, int]:
    return {shot: offset + i for i, shot in enumerate(segment)}


def shdpp_terms(
    sequence: SegmentedSequence,
    labels: LabeledSummary,
    query_scale: np.ndarray,
) -> tuple[list[ConditionalTerm], list[ConditionalTerm]]:
    """Decompose the two-layer log-likelihood into per-step conditional terms."""
    check_labels(sequence, labels)
    fq = sequence.query_features(query_scale)
    full = sequence.full_features
    relevance_terms: list[ConditionalTerm] = []
    context_terms: list[ConditionalTerm] = []
    prev_rel: tuple[int, ...] = ()
    prev_ctx: tuple[int, ...] = ()
    for seg, rel, ctx in zip(sequence.segments, labels.relevant, labels.context):
        # Relevance layer: conditioned on the previous relevance picks.
        pos = _positions(seg, len(prev_rel))
        relevance_terms.append(
            ConditionalTerm(
                x=fq[list(prev_rel) + list(seg)],
                numerator=tuple(range(len(prev_rel))) + tuple(pos[i] for i in rel),
                active=tuple(pos[i] for i in seg),
            )
        )
        # Context layer: conditioned on the previous context picks and on the
        # current relevance picks; only the remainder of the segment is
        # selectable.
        pos = _positions(seg, len(prev_ctx))
        conditioned = tuple(range(len(prev_ctx))) + tuple(pos[i] for i in rel)
        context_terms.append(
            ConditionalTerm(
                x=full[list(prev_ctx) + list(seg)],
                numerator=conditioned + tuple(pos[i] for i in ctx),
                active=tuple(pos[i] for i in seg if i not in set(rel)),
            )
        )
        prev_rel, prev_ctx = rel, ctx
    return relevance_terms, context_terms


def single_layer_terms(
    feature_matrix: np.ndarray,
    segments: Sequence[Sequence[int]],
    selections: Sequence[Sequence[int]],
    sequential: bool = True,
) -> list[ConditionalTerm]:
    """Terms of the single-layer chain; ``sequential=False`` drops carryover."""
    if len(selections) != len(segments):
        raise ValueError("need one selection per segment")
    terms: list[ConditionalTerm] = []
    prev: tuple[int, ...] = ()
    for seg, picked in zip(segments, selections):
        picked = tuple(sorted(int(i) for i in picked))
        if not set(picked) <= set(seg):
            raise ValueError("selection outside its segment")
        pos = _positions(seg, len(prev))
        terms.append(
            ConditionalTerm(
                x=feature_matrix[list(prev) + list(seg)],
                numerator=tuple(range(len(prev))) + tuple(pos[i] for i in picked),
                active=tuple(pos[i] for i in seg),
            )
        )
        if sequential:
            prev = picked
    return terms


def shdpp_log_likelihood(
    sequence: SegmentedSequence,
    labels: LabeledSummary,
    query_scale: np.ndarray,
    factors: KernelFactors,
) -> float:
    """Exact log-probability of a labelled two-layer selection sequence."""
    relevance_terms, context_terms = shdpp_terms(sequence, labels, query_scale)
    total = 0.0
    for term in relevance_terms:
        total += term_log_prob(term, factors.relevance)
    for term in context_terms:
        total += term_log_prob(term, factors.context)
    return total


def _single_layer_features(
    sequence: SegmentedSequence, query_scale: np.ndarray | None
) -> np.ndarray:
    if query_scale is None:
        return sequence.full_features
    return sequence.query_features(query_scale)


def seqdpp_log_likelihood(
    sequence: SegmentedSequence,
    selections: Sequence[Sequence[int]],
    weights: np.ndarray,
    query_scale: np.ndarray | None = None,
) -> float:
    """Log-probability of a per-segment selection chain under one kernel.

    With ``query_scale`` the kernel acts on query-scaled concept scores (the
    query-aware baseline, the default elsewhere); without it, on the full
    features.
    """
    feats = _single_layer_features(sequence, query_scale)
    weights = np.asarray(weights, dtype=float)
    if weights.shape[1] != feats.shape[1]:
        raise ValueError(
            f"weights expect feature dimension {weights.shape[1]}, "
            f"features have {feats.shape[1]}"
        )
    terms = single_layer_terms(feats, sequence.segments, selections, sequential=True)
    return sum(term_log_prob(term, weights) for term in terms)


def dpp_log_likelihood(
    sequence: SegmentedSequence,
    selections: Sequence[Sequence[int]],
    weights: np.ndarray,
    query_scale: np.ndarray | None = None,
) -> float:
    """Independent per-segment DPP log-probability (no carryover)."""
    feats = _single_layer_features(sequence, query_scale)
    weights = np.asarray(weights, dtype=float)
    terms = single_layer_terms(feats, sequence.segments, selections, sequential=False)
    return sum(term_log_prob(term, weights) for term in terms)
