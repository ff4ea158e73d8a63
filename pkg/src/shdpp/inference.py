"""Online approximate MAP inference and the non-learned baselines.

Inference walks the segments in order.  At each step the relevance layer
exhaustively enumerates every subset of the segment and keeps the one whose
conditional probability given the previous relevance picks is highest; the
context layer then does the same over the remaining shots given the current
relevance picks and its own previous picks.  Ties break toward the smaller
subset, then the lexicographically smaller index tuple, which the
enumeration order (by size, then lexicographic) realises with a
strictly-greater update rule.

Candidates are scored by their numerator determinants (the per-step
denominator is shared), computed with stacked LAPACK determinant calls per
subset size.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from typing import Sequence

import numpy as np

from .model import KernelFactors, LabeledSummary, SegmentedSequence, _single_layer_features

ENUMERATION_LIMIT = 20


@lru_cache(maxsize=None)
def _combination_rows(n: int, k: int) -> np.ndarray:
    """(C(n, k), k) index array listing k-subsets of range(n) in lex order."""
    return np.array(list(combinations(range(n), k)), dtype=np.intp).reshape(-1, k)


def _argmax_subset(
    gram: np.ndarray, conditioned: Sequence[int], ground: Sequence[int]
) -> tuple[int, ...]:
    """Ground positions whose addition to ``conditioned`` maximises the
    principal minor of ``gram`` (ties: smaller subset, then lex order)."""
    cond = np.asarray(list(conditioned), dtype=np.intp)
    ground = list(ground)
    best: tuple[int, ...] = ()
    best_det = _stacked_minors(gram, cond.reshape(1, -1))[0] if cond.size else 1.0
    for k in range(1, len(ground) + 1):
        combos = _combination_rows(len(ground), k)
        rows = np.asarray(ground, dtype=np.intp)[combos]
        if cond.size:
            rows = np.hstack([np.broadcast_to(cond, (rows.shape[0], cond.size)), rows])
        dets = _stacked_minors(gram, rows)
        i = int(np.argmax(dets))
        if dets[i] > best_det:
            best_det = dets[i]
            best = tuple(int(ground[j]) for j in combos[i])
    return best


def _stacked_minors(gram: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Determinants of the principal minors indexed by each row of ``rows``."""
    if rows.shape[1] == 0:
        return np.ones(rows.shape[0])
    minors = gram[rows[:, :, None], rows[:, None, :]]
    return np.clip(np.linalg.det(minors), 0.0, None)


def _check_enumeration_guard(sequence: SegmentedSequence) -> None:
    widest = max(len(seg) for seg in sequence.segments)
    if widest > ENUMERATION_LIMIT:
        raise ValueError(
            f"segment of size {widest} exceeds the exhaustive enumeration "
            f"limit of {ENUMERATION_LIMIT}"
        )


def summarize_shdpp(
    sequence: SegmentedSequence,
    query_scale: np.ndarray,
    factors: KernelFactors,
) -> LabeledSummary:
    """Greedy per-segment MAP labels under the two-layer model."""
    _check_enumeration_guard(sequence)
    fq = sequence.query_features(query_scale)
    full = sequence.full_features
    b_rel = fq @ factors.relevance.T
    b_ctx = full @ factors.context.T

    relevant: list[tuple[int, ...]] = []
    context: list[tuple[int, ...]] = []
    prev_rel: tuple[int, ...] = ()
    prev_ctx: tuple[int, ...] = ()
    for seg in sequence.segments:
        rows = list(prev_rel) + list(seg)
        gram = b_rel[rows] @ b_rel[rows].T
        picked = _argmax_subset(
            gram,
            range(len(prev_rel)),
            range(len(prev_rel), len(rows)),
        )
        rel = tuple(seg[i - len(prev_rel)] for i in picked)

        rows = list(prev_ctx) + list(seg)
        gram = b_ctx[rows] @ b_ctx[rows].T
        offset = len(prev_ctx)
        rel_positions = {offset + i for i, shot in enumerate(seg) if shot in set(rel)}
        conditioned = tuple(range(offset)) + tuple(sorted(rel_positions))
        ground = [
            offset + i for i in range(len(seg)) if offset + i not in rel_positions
        ]
        picked = _argmax_subset(gram, conditioned, ground)
        ctx = tuple(seg[i - offset] for i in picked)

        relevant.append(rel)
        context.append(ctx)
        prev_rel, prev_ctx = rel, ctx
    return LabeledSummary(relevant=tuple(relevant), context=tuple(context))


def _summarize_single_layer(
    sequence: SegmentedSequence,
    weights: np.ndarray,
    query_scale: np.ndarray | None,
    sequential: bool,
) -> tuple[tuple[int, ...], ...]:
    _check_enumeration_guard(sequence)
    feats = _single_layer_features(sequence, query_scale)
    weights = np.asarray(weights, dtype=float)
    projected = feats @ weights.T
    out: list[tuple[int, ...]] = []
    prev: tuple[int, ...] = ()
    for seg in sequence.segments:
        rows = list(prev) + list(seg)
        gram = projected[rows] @ projected[rows].T
        picked = _argmax_subset(
            gram, range(len(prev)), range(len(prev), len(rows))
        )
        chosen = tuple(seg[i - len(prev)] for i in picked)
        out.append(chosen)
        if sequential:
            prev = chosen
    return tuple(out)


def summarize_seqdpp(
    sequence: SegmentedSequence,
    weights: np.ndarray,
    query_scale: np.ndarray | None = None,
) -> tuple[tuple[int, ...], ...]:
    """Per-segment MAP chain under the single-layer sequential model."""
    return _summarize_single_layer(sequence, weights, query_scale, sequential=True)


def summarize_vanilla_dpp(
    sequence: SegmentedSequence,
    weights: np.ndarray,
    query_scale: np.ndarray | None = None,
) -> tuple[tuple[int, ...], ...]:
    """Per-segment MAP with no carryover between adjacent segments."""
    return _summarize_single_layer(sequence, weights, query_scale, sequential=False)


def baseline_sampling(
    sequence: SegmentedSequence, k: int, seed: int
) -> tuple[int, ...]:
    """K distinct shots drawn uniformly without replacement."""
    n = sequence.n_shots
    if not 0 <= k <= n:
        raise ValueError(f"cannot sample {k} shots from a stream of {n}")
    rng = np.random.default_rng(seed)
    return tuple(sorted(int(i) for i in rng.choice(n, size=k, replace=False)))


def baseline_ranking(
    sequence: SegmentedSequence, query_indices: Sequence[int], k: int
) -> tuple[int, ...]:
    """Top-K shots by the maximum raw (pre-normalisation) score over the
    query concepts; ties go to the earlier shot."""
    if sequence.pooled_scores is None:
        raise ValueError("ranking needs the sequence's pre-normalisation scores")
    n = sequence.n_shots
    if not 0 <= k <= n:
        raise ValueError(f"cannot rank {k} shots from a stream of {n}")
    idx = list(query_indices)
    if not idx:
        raise ValueError("ranking needs at least one query concept")
    scores = sequence.pooled_scores[:, idx].max(axis=1)
    order = sorted(range(n), key=lambda i: (-scores[i], i))
    return tuple(sorted(order[:k]))
