"""Shot-level feature vectors: pooled concept scores, windowed context, query scaling.

A shot is described by a concept-score vector ``h`` (one detector-pooled
score per lexicon concept, l2-normalised) and a 6-D contextual vector ``l``
of mean correlations over centered temporal windows.  The full feature is
the concatenation ``[h; l]``; the query-scaled feature multiplies ``h``
elementwise by a per-concept scaling that is 1 on query concepts and
``OFF_QUERY_SCALE`` elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

CONTEXT_WINDOW_SIZES = (5, 7, 9, 11, 13, 15)
CONTEXT_DIM = len(CONTEXT_WINDOW_SIZES)
UNIT_NORM_TOL = 1e-9
QUERY_ARITIES = (2, 3)
OFF_QUERY_SCALE = 0.5


@dataclass(frozen=True)
class Lexicon:
    """Ordered list of unique concept names; the order indexes ``h``."""

    concepts: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "concepts", tuple(self.concepts))
        if not self.concepts:
            raise ValueError("lexicon must contain at least one concept")
        if len(set(self.concepts)) != len(self.concepts):
            raise ValueError("lexicon concepts must be unique")

    def __len__(self) -> int:
        return len(self.concepts)

    def __contains__(self, concept: str) -> bool:
        return concept in self.concepts

    def __iter__(self):
        return iter(self.concepts)

    def index(self, concept: str) -> int:
        try:
            return self.concepts.index(concept)
        except ValueError:
            raise ValueError(f"unknown concept {concept!r}") from None


@dataclass(frozen=True)
class Query:
    """An unordered set of 2 or 3 lexicon concepts."""

    concepts: frozenset[str]

    def __init__(self, concepts: Iterable[str]):
        object.__setattr__(self, "concepts", frozenset(concepts))
        if len(self.concepts) not in QUERY_ARITIES:
            raise ValueError(
                f"a query holds 2 or 3 concepts, got {len(self.concepts)}"
            )

    @property
    def sorted_concepts(self) -> tuple[str, ...]:
        return tuple(sorted(self.concepts))

    def __str__(self) -> str:
        return "+".join(self.sorted_concepts)


def query_concept_indices(query: Query, lexicon: Lexicon) -> tuple[int, ...]:
    """Lexicon positions of the query concepts (raises on unknown concepts)."""
    return tuple(sorted(lexicon.index(c) for c in query.concepts))


def query_scaling(query: Query, lexicon: Lexicon) -> np.ndarray:
    """Per-concept scaling: 1 for query concepts, OFF_QUERY_SCALE otherwise."""
    alpha = np.full(len(lexicon), OFF_QUERY_SCALE)
    alpha[list(query_concept_indices(query, lexicon))] = 1.0
    return alpha


def l2_normalize(vector: np.ndarray) -> np.ndarray:
    """Unit vector in the same direction; the zero vector stays zero."""
    v = np.asarray(vector, dtype=float)
    norm = float(np.linalg.norm(v))
    return v if norm == 0.0 else v / norm


def _check_unit_or_zero(v: np.ndarray, name: str) -> None:
    norm = float(np.linalg.norm(v))
    if norm != 0.0 and abs(norm - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"{name} must be l2-normalised or zero, norm={norm!r}")


@dataclass(frozen=True)
class ShotFeatures:
    """Feature bundle of one shot: concept scores ``h`` and context ``l``."""

    concept_scores: np.ndarray
    context_scores: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.concept_scores, dtype=float)
        l = np.asarray(self.context_scores, dtype=float)
        if h.ndim != 1:
            raise ValueError("concept scores must be a 1-D vector")
        if l.shape != (CONTEXT_DIM,):
            raise ValueError(f"context scores must have length {CONTEXT_DIM}")
        _check_unit_or_zero(h, "concept scores")
        _check_unit_or_zero(l, "context scores")
        object.__setattr__(self, "concept_scores", h)
        object.__setattr__(self, "context_scores", l)

    @property
    def concept_dim(self) -> int:
        return self.concept_scores.shape[0]


def max_pool_detector_scores(
    frame_scores: Sequence[np.ndarray],
    detector_multiplicity: Mapping[str, int],
) -> np.ndarray:
    """Raw per-concept shot scores: average each detector over the shot's
    keyframes, then max over the concept's detectors.

    Each frame vector holds one entry per (concept, detector) pair, grouped
    per concept in the mapping's iteration order.  Scores must lie in [0, 1].
    """
    if len(frame_scores) == 0:
        raise ValueError("a shot needs at least one keyframe of scores")
    counts = [int(c) for c in detector_multiplicity.values()]
    if any(c < 1 for c in counts):
        raise ValueError("every concept needs at least one detector")
    total = sum(counts)
    stack = np.asarray(frame_scores, dtype=float)
    if stack.ndim != 2 or stack.shape[1] != total:
        raise ValueError(
            f"expected frame score vectors of length {total}, got shape {stack.shape}"
        )
    if stack.size and (stack.min() < 0.0 or stack.max() > 1.0):
        raise ValueError("detector scores must lie in [0, 1]")
    per_detector = stack.mean(axis=0)
    pooled = np.empty(len(counts))
    offset = 0
    for i, c in enumerate(counts):
        pooled[i] = per_detector[offset:offset + c].max()
        offset += c
    return pooled


def pool_concept_scores(
    frame_scores: Sequence[np.ndarray],
    detector_multiplicity: Mapping[str, int],
) -> np.ndarray:
    """l2-normalised concept-score vector ``h`` for one shot."""
    return l2_normalize(max_pool_detector_scores(frame_scores, detector_multiplicity))


def _centered_unit_rows(descriptors: np.ndarray) -> np.ndarray:
    """Rows centered and scaled to unit norm; zero-variance rows become zero,
    which makes their correlation contribution 0 by convention."""
    d = np.asarray(descriptors, dtype=float)
    centered = d - d.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return centered / norms


def contextual_features(descriptors: Sequence[np.ndarray]) -> np.ndarray:
    """Per-frame contextual vectors for a whole descriptor sequence.

    Entry (i, w) is the mean Pearson correlation between frame i's descriptor
    and every other frame inside the centered window of
    ``CONTEXT_WINDOW_SIZES[w]`` frames, truncated at the sequence boundaries.
    """
    d = np.asarray(descriptors, dtype=float)
    if d.ndim != 2 or d.shape[0] == 0:
        raise ValueError("descriptors must be a nonempty (frames, dim) array")
    unit = _centered_unit_rows(d)
    n = unit.shape[0]
    # corr(i, j) = unit[i] . unit[j]; window means come from prefix sums.
    prefix = np.vstack([np.zeros(unit.shape[1]), np.cumsum(unit, axis=0)])
    out = np.empty((n, CONTEXT_DIM))
    idx = np.arange(n)
    for w, size in enumerate(CONTEXT_WINDOW_SIZES):
        half = (size - 1) // 2
        lo = np.maximum(idx - half, 0)
        hi = np.minimum(idx + half + 1, n)
        window_sums = prefix[hi] - prefix[lo]
        neighbor_sums = window_sums - unit
        counts = hi - lo - 1
        dots = np.einsum("ij,ij->i", unit, neighbor_sums)
        with np.errstate(invalid="ignore"):
            means = np.where(counts > 0, dots / np.maximum(counts, 1), 0.0)
        out[:, w] = means
    return np.clip(out, -1.0, 1.0)


def contextual_vector(
    frame_descriptors: Sequence[np.ndarray], frame_index: int
) -> np.ndarray:
    """The 6-D contextual vector of one frame within a descriptor sequence."""
    matrix = contextual_features(frame_descriptors)
    if not 0 <= frame_index < matrix.shape[0]:
        raise ValueError(f"frame index {frame_index} out of range")
    return matrix[frame_index]


def shot_feature(shot: ShotFeatures) -> np.ndarray:
    """Full shot feature: concept scores followed by context scores."""
    return np.concatenate([shot.concept_scores, shot.context_scores])


def query_feature(shot: ShotFeatures, query: Query, lexicon: Lexicon) -> np.ndarray:
    """Query-scaled concept scores ``h * alpha(q)``; applied once, never
    re-normalised."""
    if shot.concept_dim != len(lexicon):
        raise ValueError("shot concept dimension does not match the lexicon")
    return shot.concept_scores * query_scaling(query, lexicon)


def compute_shot_features(
    frame_scores_per_shot: Sequence[Sequence[np.ndarray]],
    descriptors_per_shot: Sequence[Sequence[np.ndarray]],
    detector_multiplicity: Mapping[str, int],
) -> list[ShotFeatures]:
    """Build ShotFeatures for every shot of a stream.

    Contextual windows run over the concatenated frame sequence of the whole
    stream, so they cross shot boundaries; the per-frame context vectors are
    then average-pooled within each shot and l2-normalised.
    """
    if len(frame_scores_per_shot) != len(descriptors_per_shot):
        raise ValueError("score and descriptor shot counts differ")
    if not frame_scores_per_shot:
        raise ValueError("stream must contain at least one shot")
    all_frames = np.vstack([np.asarray(d, dtype=float) for d in descriptors_per_shot])
    context = contextual_features(all_frames)
    shots = []
    offset = 0
    for scores, descriptors in zip(frame_scores_per_shot, descriptors_per_shot):
        n_frames = len(descriptors)
        pooled_context = l2_normalize(context[offset:offset + n_frames].mean(axis=0))
        offset += n_frames
        shots.append(
            ShotFeatures(
                concept_scores=pool_concept_scores(scores, detector_multiplicity),
                context_scores=pooled_context,
            )
        )
    return shots
