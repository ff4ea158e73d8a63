"""Summary scoring: skip-bigram ROUGE on shot annotations and hitting recall.

The counting units are unigrams plus skip-bigrams, where a skip-bigram is an
ordered word pair with at most ``skip_distance`` words between its members.
Precision divides the clipped multiset overlap by the candidate's unit
count, recall by the reference's.  No stemming or stopword removal is
applied; the synthetic annotations are controlled vocabulary.

Hitting recall measures the fraction of relevance-flagged groundtruth shots
a system summary recovers; its relevance-layer variant counts only the
shots picked by the relevance layer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import LabeledSummary

DEFAULT_SKIP_DISTANCE = 4


@dataclass(frozen=True)
class ScoreTriple:
    precision: float
    recall: float
    f_measure: float

    @classmethod
    def from_counts(cls, overlap: float, n_candidate: int, n_reference: int) -> "ScoreTriple":
        p = overlap / n_candidate if n_candidate else 0.0
        r = overlap / n_reference if n_reference else 0.0
        f = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(precision=p, recall=r, f_measure=f)


@dataclass(frozen=True)
class HittingRecallReport:
    """Recall of relevance-flagged groundtruth shots; counts included.

    ``hr_relevance`` is None for summarizers without a relevance layer.
    """

    hr_overall: float
    hr_relevance: float | None
    n_relevant: int
    n_hits: int
    n_relevance_hits: int | None


def su_unit_counts(
    word_ids: np.ndarray, vocab_size: int, skip_distance: int = DEFAULT_SKIP_DISTANCE
) -> tuple[np.ndarray, np.ndarray]:
    """Sorted (unit values, counts) of unigrams plus skip-bigrams.

    Words are integer ids below ``vocab_size``; a pair at positions (i, j)
    is counted when j - i - 1 <= skip_distance.  Bigrams are packed into a
    disjoint integer range above the unigrams.
    """
    ids = np.asarray(word_ids, dtype=np.int64)
    if skip_distance < 0:
        raise ValueError("skip distance must be nonnegative")
    parts = [ids]
    v = np.int64(vocab_size)
    for offset in range(1, skip_distance + 2):
        if offset >= ids.size:
            break
        parts.append(v + ids[:-offset] * v + ids[offset:])
    return np.unique(np.concatenate(parts), return_counts=True)


def clipped_overlap(
    units_a: tuple[np.ndarray, np.ndarray], units_b: tuple[np.ndarray, np.ndarray]
) -> int:
    """Sum over shared units of the minimum of the two counts."""
    values_a, counts_a = units_a
    values_b, counts_b = units_b
    if values_a.size == 0 or values_b.size == 0:
        return 0
    pos = np.searchsorted(values_b, values_a)
    pos_clipped = np.minimum(pos, values_b.size - 1)
    matched = values_b[pos_clipped] == values_a
    overlap = np.minimum(counts_a[matched], counts_b[pos_clipped[matched]])
    return int(overlap.sum())


def _encode_pair(
    candidate: Sequence[str], reference: Sequence[str]
) -> tuple[np.ndarray, np.ndarray, int]:
    vocab: dict[str, int] = {}
    def encode(words):
        out = np.empty(len(words), dtype=np.int64)
        for i, w in enumerate(words):
            out[i] = vocab.setdefault(w, len(vocab))
        return out
    c = encode(list(candidate))
    r = encode(list(reference))
    return c, r, len(vocab)


def rouge_su(
    candidate_text: Sequence[str],
    reference_text: Sequence[str],
    skip_distance: int = DEFAULT_SKIP_DISTANCE,
) -> ScoreTriple:
    """Skip-bigram-with-unigrams precision/recall/F between two word sequences."""
    candidate = list(candidate_text)
    reference = list(reference_text)
    if not candidate or not reference:
        return ScoreTriple(0.0, 0.0, 0.0)
    c_ids, r_ids, vocab_size = _encode_pair(candidate, reference)
    c_units = su_unit_counts(c_ids, vocab_size, skip_distance)
    r_units = su_unit_counts(r_ids, vocab_size, skip_distance)
    return ScoreTriple.from_counts(
        clipped_overlap(c_units, r_units),
        int(c_units[1].sum()),
        int(r_units[1].sum()),
    )


def _concatenated_text(shot_ids: Iterable[int], video) -> list[str]:
    return [w for i in sorted(shot_ids) for w in video.shots[i].text]


def summary_score(
    system: Iterable[int] | LabeledSummary,
    groundtruth,
    video,
    skip_distance: int = DEFAULT_SKIP_DISTANCE,
) -> ScoreTriple:
    """ROUGE-SU of a system summary against a groundtruth summary.

    Both sides are mapped to text by concatenating their shots' annotations
    in time order.
    """
    system_ids = _system_ids(system)
    return rouge_su(
        _concatenated_text(system_ids, video),
        _concatenated_text(groundtruth.shot_ids, video),
        skip_distance,
    )


def _system_ids(system: Iterable[int] | LabeledSummary) -> tuple[int, ...]:
    if isinstance(system, LabeledSummary):
        return system.selected_ids
    flat: list[int] = []
    for item in system:
        if isinstance(item, (tuple, list)):
            flat.extend(int(i) for i in item)
        else:
            flat.append(int(item))
    return tuple(sorted(set(flat)))


def hitting_recall(
    system: Iterable[int] | LabeledSummary, groundtruth
) -> HittingRecallReport:
    """Fraction of relevance-flagged groundtruth shots hit by the system.

    When there is nothing to hit the recall is 1 by convention.  Passing a
    :class:`LabeledSummary` also reports the relevance-layer-only recall.
    """
    relevant = set(groundtruth.relevant)
    system_ids = set(_system_ids(system))
    hits = len(system_ids & relevant)
    if isinstance(system, LabeledSummary):
        relevance_hits = len(set(system.relevant_ids) & relevant)
    else:
        relevance_hits = None
    if relevant:
        hr = hits / len(relevant)
        hr_rel = None if relevance_hits is None else relevance_hits / len(relevant)
    else:
        hr = 1.0
        hr_rel = None if relevance_hits is None else 1.0
    return HittingRecallReport(
        hr_overall=hr,
        hr_relevance=hr_rel,
        n_relevant=len(relevant),
        n_hits=hits,
        n_relevance_hits=relevance_hits,
    )
