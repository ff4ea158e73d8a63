"""Synthetic segmented-stream corpus, oracle summaries, and query-focused groundtruth.

The generator stands in for densely annotated video data: each stream is a
sequence of shots whose concept labels persist over short runs (so that
sequential diversity matters), with per-keyframe detector scores drawn from
overlapping "present"/"absent" Beta distributions, smooth low-level frame
descriptors per scene, a one-sentence text annotation containing each
labelled concept noun exactly once, and three user summaries obtained by
perturbing a planted reference summary.

The oracle summary is the greedy maximum-agreement summary against the
three user summaries, scored by the skip-bigram F-measure over concatenated
annotations; query-focused groundtruth is either the oracle united with all
query-matching shots (patient users) or the oracle alone (impatient users).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

from .evaluation import DEFAULT_SKIP_DISTANCE, clipped_overlap, su_unit_counts
from .features import Lexicon, Query

CONCEPT_NOUNS = (
    "car", "tree", "beach", "dog", "cat", "boat", "house", "garden", "market",
    "phone", "book", "chair", "table", "window", "door", "street", "bridge",
    "river", "mountain", "forest", "flower", "bird", "horse", "train", "plane",
    "bicycle", "coffee", "bread", "fruit", "cheese", "guitar", "piano", "camera",
    "computer", "lamp", "mirror", "clock", "painting", "statue", "fountain",
    "castle", "church", "tower", "museum", "library", "school", "office",
    "kitchen", "bedroom", "balcony", "rooftop", "tunnel", "harbor", "island",
    "desert", "meadow", "waterfall", "cave", "lighthouse", "windmill", "barn",
    "tractor", "helmet", "backpack", "umbrella", "lantern", "candle", "basket",
    "bottle", "kettle", "ladder", "hammer", "shovel", "canoe", "tent", "kite",
    "drum", "violin", "trumpet", "telescope",
)

SUBJECT_WORDS = ("i", "we", "they", "he", "she", "someone", "everyone", "nobody")

VERB_WORDS = (
    "saw", "watched", "passed", "visited", "noticed", "filmed", "recorded",
    "explored", "crossed", "entered", "approached", "followed", "admired",
    "inspected", "photographed", "found", "spotted", "observed", "toured",
    "reached", "examined", "studied", "sketched", "described",
)

CONTEXT_WORDS = (
    "near", "beside", "under", "behind", "around", "along", "during", "after",
    "before", "quiet", "busy", "bright", "sunny", "cloudy", "rainy", "windy",
    "foggy", "warm", "cold", "early", "late", "morning", "afternoon", "evening",
    "noon", "midnight", "yesterday", "today", "briefly", "slowly", "quickly",
    "quietly", "loudly", "carefully", "casually", "suddenly", "gradually",
    "corner", "path", "stall", "courtyard", "plaza", "alley", "avenue",
    "junction", "crossing", "entrance", "exit", "stairway", "hallway", "lobby",
    "terrace", "pier", "dock", "trail", "slope", "ridge", "valley", "field",
    "orchard", "vineyard", "pasture", "clearing", "grove", "thicket", "hedge",
    "fence", "gate", "wall", "pavement", "curb", "bench", "kiosk", "awning",
    "canopy", "arch", "column", "railing", "banner", "signpost", "billboard",
    "crowd", "queue", "gathering", "parade", "festival", "ceremony", "rehearsal",
    "performance", "lecture", "meeting", "errand", "stroll", "detour", "pause",
    "rest", "break", "snack", "picnic", "lunch", "dinner", "breakfast",
    "twilight", "dawn", "dusk", "shade", "shadow", "glare", "breeze", "drizzle",
    "mist", "frost", "thaw", "puddle", "gravel", "cobblestone", "asphalt",
    "dust", "mud", "sand", "pebble", "moss", "ivy", "fern", "reed", "driftwood",
    "foam", "ripple", "current", "tide", "horizon", "skyline", "distance",
    "foreground", "background", "upstairs", "downstairs", "indoors", "outdoors",
    "nearby", "faraway", "somewhere", "elsewhere", "together", "alone",
    "twice", "briskly", "gently", "steadily", "halfway", "onward", "homeward",
    "northward", "southward", "eastward", "westward", "uphill", "downhill",
    "clockwise", "sideways", "forward", "backward", "leftward", "rightward",
    "meanwhile", "afterwards", "beforehand", "eventually", "occasionally",
    "repeatedly", "momentarily", "patiently", "eagerly", "warmly", "calmly",
    "silently", "happily", "idly", "absently", "keenly", "fondly", "vaguely",
    "barely", "nearly", "almost", "entirely", "partly", "mostly", "rarely",
)


@dataclass(frozen=True)
class AnnotatedShot:
    """One stream unit with labels, text, and synthetic detector outputs."""

    shot_id: int
    index: int
    concepts: tuple[str, ...]
    text: tuple[str, ...]
    frame_scores: np.ndarray
    descriptors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "concepts", tuple(self.concepts))
        object.__setattr__(self, "text", tuple(self.text))
        object.__setattr__(
            self, "frame_scores", np.asarray(self.frame_scores, dtype=float)
        )
        object.__setattr__(
            self, "descriptors", np.asarray(self.descriptors, dtype=float)
        )


@dataclass(frozen=True)
class VideoRecord:
    """An ordered shot stream with exactly three nonempty user summaries."""

    video_id: str
    shots: tuple[AnnotatedShot, ...]
    user_summaries: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "shots", tuple(self.shots))
        summaries = tuple(tuple(sorted(int(i) for i in s)) for s in self.user_summaries)
        if len(summaries) != 3:
            raise ValueError("a video carries exactly three user summaries")
        if any(not s for s in summaries):
            raise ValueError("user summaries must be nonempty")
        n = len(self.shots)
        for s in summaries:
            if any(i < 0 or i >= n for i in s):
                raise ValueError("user summary references a missing shot")
        object.__setattr__(self, "user_summaries", summaries)

    @property
    def n_shots(self) -> int:
        return len(self.shots)


@dataclass(frozen=True)
class GroundtruthSummary:
    """Gold shots for one (video, query, user mode), with relevance flags."""

    shot_ids: tuple[int, ...]
    relevant: frozenset[int]
    mode: str

    def __post_init__(self):
        ids = tuple(sorted(int(i) for i in self.shot_ids))
        object.__setattr__(self, "shot_ids", ids)
        object.__setattr__(self, "relevant", frozenset(int(i) for i in self.relevant))
        if not self.relevant <= set(ids):
            raise ValueError("relevance flags must mark groundtruth shots")
        if self.mode not in ("patient", "impatient"):
            raise ValueError(f"unknown user mode {self.mode!r}")


@dataclass(frozen=True)
class Corpus:
    """A lexicon, its detector layout, and the generated streams."""

    lexicon: Lexicon
    detector_multiplicity: dict[str, int]
    videos: tuple[VideoRecord, ...]
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "videos", tuple(self.videos))
        if set(self.detector_multiplicity) != set(self.lexicon):
            raise ValueError("detector layout must cover exactly the lexicon")


@dataclass(frozen=True)
class CorpusConfig:
    """Generation parameters for the synthetic corpus."""

    videos: int = 4
    shots_per_video: int = 200
    lexicon_size: int = 20
    seed: int = 0
    descriptor_dim: int = 16
    max_detectors: int = 3
    concept_birth_rate: float = 0.6
    min_run: int = 2
    max_run: int = 6
    planted_rate: float = 0.15
    user_noise: float = 0.1

    def __post_init__(self):
        if self.videos < 2:
            raise ValueError("a corpus needs at least two videos")
        if self.lexicon_size < 10:
            raise ValueError("a corpus needs at least ten lexicon concepts")
        if self.shots_per_video < 4:
            raise ValueError("videos need at least four shots")
        if not 2 <= self.min_run <= self.max_run:
            raise ValueError("label runs must span at least two shots")
        if self.max_detectors < 1 or self.descriptor_dim < 2:
            raise ValueError("invalid detector or descriptor layout")


def build_lexicon(size: int) -> Lexicon:
    names = list(CONCEPT_NOUNS[:size])
    names += [f"object{i:02d}" for i in range(max(0, size - len(CONCEPT_NOUNS)))]
    return Lexicon(tuple(names))


def _filler_words(lexicon: Lexicon) -> tuple[tuple[str, ...], ...]:
    concepts = set(lexicon)
    return (
        tuple(w for w in SUBJECT_WORDS if w not in concepts),
        tuple(w for w in VERB_WORDS if w not in concepts),
        tuple(w for w in CONTEXT_WORDS if w not in concepts),
    )


def _shot_text(
    labels: Sequence[str],
    lexicon: Lexicon,
    rng: np.random.Generator,
    fillers: tuple[tuple[str, ...], ...],
) -> tuple[str, ...]:
    subjects, verbs, context = fillers
    ordered = sorted(labels, key=lexicon.index)
    tail = rng.choice(len(context), size=int(rng.integers(3, 6)), replace=False)
    return (
        str(subjects[rng.integers(len(subjects))]),
        str(verbs[rng.integers(len(verbs))]),
        *ordered,
        *(str(context[i]) for i in tail),
    )


def _label_tracks(
    n_shots: int, lexicon: Lexicon, config: CorpusConfig, rng: np.random.Generator
) -> list[tuple[str, ...]]:
    active: dict[str, int] = {}
    labels: list[tuple[str, ...]] = []
    for _ in range(n_shots):
        for concept in [c for c, ttl in active.items() if ttl <= 0]:
            del active[concept]
        births = rng.poisson(config.concept_birth_rate)
        pool = [c for c in lexicon if c not in active]
        for _ in range(min(births, len(pool))):
            concept = pool.pop(int(rng.integers(len(pool))))
            active[concept] = int(rng.integers(config.min_run, config.max_run + 1))
        labels.append(tuple(sorted(active, key=lexicon.index)))
        for concept in active:
            active[concept] -= 1
    return labels


def _generate_video(
    video_id: str,
    lexicon: Lexicon,
    detector_multiplicity: Mapping[str, int],
    config: CorpusConfig,
    rng: np.random.Generator,
    fillers,
) -> VideoRecord:
    n = config.shots_per_video
    labels = _label_tracks(n, lexicon, config, rng)
    total_detectors = sum(detector_multiplicity.values())
    offsets = {}
    offset = 0
    for concept in lexicon:
        offsets[concept] = offset
        offset += detector_multiplicity[concept]

    scene_ids = [0]
    for i in range(1, n):
        scene_ids.append(scene_ids[-1] + (labels[i] != labels[i - 1]))
    scene_base = {
        s: rng.standard_normal(config.descriptor_dim)
        for s in range(scene_ids[-1] + 1)
    }

    shots = []
    for i in range(n):
        n_frames = int(rng.integers(3, 6))
        scores = rng.beta(2.0, 8.0, size=(n_frames, total_detectors))
        for concept in labels[i]:
            lo = offsets[concept]
            hi = lo + detector_multiplicity[concept]
            scores[:, lo:hi] = rng.beta(8.0, 2.0, size=(n_frames, hi - lo))
        descriptors = scene_base[scene_ids[i]] + 0.35 * rng.standard_normal(
            (n_frames, config.descriptor_dim)
        )
        shots.append(
            AnnotatedShot(
                shot_id=i,
                index=i,
                concepts=labels[i],
                text=_shot_text(labels[i], lexicon, rng, fillers),
                frame_scores=scores,
                descriptors=descriptors,
            )
        )

    planted = _planted_summary(scene_ids, config, rng)
    user_summaries = tuple(
        _perturb_summary(planted, n, config.user_noise, rng) for _ in range(3)
    )
    return VideoRecord(video_id=video_id, shots=tuple(shots), user_summaries=user_summaries)


def _planted_summary(
    scene_ids: Sequence[int], config: CorpusConfig, rng: np.random.Generator
) -> list[int]:
    n = len(scene_ids)
    target = max(3, round(config.planted_rate * n))
    representatives = [0] + [
        i for i in range(1, n) if scene_ids[i] != scene_ids[i - 1]
    ]
    if len(representatives) > target:
        picked = rng.choice(len(representatives), size=target, replace=False)
        planted = [representatives[i] for i in picked]
    else:
        planted = list(representatives)
        rest = [i for i in range(n) if i not in set(planted)]
        extra = rng.choice(len(rest), size=target - len(planted), replace=False)
        planted += [rest[i] for i in extra]
    return sorted(planted)


def _perturb_summary(
    planted: Sequence[int], n_shots: int, noise: float, rng: np.random.Generator
) -> tuple[int, ...]:
    kept = [i for i in planted if rng.random() >= noise]
    if not kept:
        kept = [planted[int(rng.integers(len(planted)))]]
    outside = [i for i in range(n_shots) if i not in set(planted)]
    n_add = min(len(outside), round(noise * len(planted)))
    if n_add:
        added = rng.choice(len(outside), size=n_add, replace=False)
        kept += [outside[i] for i in added]
    return tuple(sorted(kept))


def generate_corpus(config: CorpusConfig) -> Corpus:
    """Deterministically generate a corpus from its config and seed."""
    rng = np.random.default_rng(config.seed)
    lexicon = build_lexicon(config.lexicon_size)
    detector_multiplicity = {
        c: int(rng.integers(1, config.max_detectors + 1)) for c in lexicon
    }
    fillers = _filler_words(lexicon)
    videos = tuple(
        _generate_video(
            f"video-{v:02d}", lexicon, detector_multiplicity, config, rng, fillers
        )
        for v in range(config.videos)
    )
    return Corpus(
        lexicon=lexicon,
        detector_multiplicity=detector_multiplicity,
        videos=videos,
        seed=config.seed,
    )


def _video_word_ids(video: VideoRecord) -> tuple[list[np.ndarray], int]:
    vocab: dict[str, int] = {}
    encoded = []
    for shot in video.shots:
        ids = np.empty(len(shot.text), dtype=np.int64)
        for j, word in enumerate(shot.text):
            ids[j] = vocab.setdefault(word, len(vocab))
        encoded.append(ids)
    return encoded, len(vocab)


def _summary_units(
    shot_ids: Iterable[int], encoded: Sequence[np.ndarray], vocab_size: int
):
    ordered = sorted(shot_ids)
    if not ordered:
        return (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)), 0
    words = np.concatenate([encoded[i] for i in ordered])
    units = su_unit_counts(words, vocab_size, DEFAULT_SKIP_DISTANCE)
    return units, int(units[1].sum())


def oracle_summary(
    user_summaries: Sequence[Sequence[int]], video: VideoRecord
) -> tuple[int, ...]:
    """Greedy maximum-agreement summary against the three user summaries.

    Starting empty, repeatedly add the shot with the largest marginal gain in
    the summed skip-bigram F-measure against the user summaries; stop once no
    shot has strictly positive gain.
    """
    if len(user_summaries) != 3 or any(not s for s in user_summaries):
        raise ValueError("oracle construction expects three nonempty summaries")
    encoded, vocab_size = _video_word_ids(video)
    refs = []
    for summary in user_summaries:
        units, size = _summary_units(summary, encoded, vocab_size)
        refs.append((units, size))

    def agreement(shot_ids: set[int]) -> float:
        units, size = _summary_units(shot_ids, encoded, vocab_size)
        total = 0.0
        for ref_units, ref_size in refs:
            if size + ref_size:
                total += 2.0 * clipped_overlap(units, ref_units) / (size + ref_size)
        return total

    selected: set[int] = set()
    current = 0.0
    while True:
        best_gain = 0.0
        best_shot = None
        for i in range(video.n_shots):
            if i in selected:
                continue
            gain = agreement(selected | {i}) - current
            if gain > best_gain:
                best_gain = gain
                best_shot = i
        if best_shot is None:
            return tuple(sorted(selected))
        selected.add(best_shot)
        current += best_gain


def query_matching_shots(video: VideoRecord, query: Query) -> frozenset[int]:
    return frozenset(
        shot.shot_id for shot in video.shots if set(shot.concepts) & query.concepts
    )


def build_groundtruth(
    video: VideoRecord,
    oracle: Sequence[int],
    query: Query,
    mode: str,
) -> GroundtruthSummary:
    """Query-focused gold summary for one user mode.

    Patient users get the oracle united with every query-matching shot;
    impatient users get the oracle itself.  Relevance flags mark the
    query-matching shots of the groundtruth in both modes.
    """
    matching = query_matching_shots(video, query)
    if mode == "patient":
        ids = sorted(set(oracle) | matching)
        relevant = matching
    elif mode == "impatient":
        ids = sorted(set(oracle))
        relevant = matching & set(ids)
    else:
        raise ValueError(f"unknown user mode {mode!r}")
    return GroundtruthSummary(shot_ids=tuple(ids), relevant=frozenset(relevant), mode=mode)


def enumerate_queries(
    lexicon: Lexicon,
    videos: Sequence[VideoRecord],
    arity: int = 2,
    mode: str = "patient",
    oracles: Mapping[str, Sequence[int]] | None = None,
) -> list[Query]:
    """All concept pairs (or triples) available to users of the given mode.

    Patient mode draws from the whole lexicon.  Impatient mode only pairs
    concepts that appear in some video's oracle summary; oracles are computed
    on demand when not supplied.
    """
    if arity not in (2, 3):
        raise ValueError("queries hold two or three concepts")
    if mode == "patient":
        pool = list(lexicon)
    elif mode == "impatient":
        if oracles is None:
            oracles = {
                v.video_id: oracle_summary(v.user_summaries, v) for v in videos
            }
        surviving: set[str] = set()
        for video in videos:
            for shot_id in oracles[video.video_id]:
                surviving.update(video.shots[shot_id].concepts)
        pool = [c for c in lexicon if c in surviving]
    else:
        raise ValueError(f"unknown user mode {mode!r}")
    return [Query(combo) for combo in combinations(pool, arity)]
