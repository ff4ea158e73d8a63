"""Versioned file formats: corpus JSONL, checkpoint text, result tables.

The corpus file is one JSON object per line: a header record followed by one
self-contained video record per line.  Checkpoints are a plain-text document
whose floats are written with ``repr`` so a load/save round trip is
bit-exact.  Result tables are tab-separated with a version comment header.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import AnnotatedShot, Corpus, VideoRecord
from .features import Lexicon
from .model import KernelFactors

CORPUS_FORMAT = "shdpp-corpus"
CHECKPOINT_FORMAT = "shdpp-checkpoint"
RESULTS_FORMAT = "shdpp-results"
FORMAT_VERSION = 1


def lexicon_sha256(lexicon: Lexicon) -> str:
    return hashlib.sha256("\n".join(lexicon.concepts).encode()).hexdigest()


def _matrix_to_lists(matrix: np.ndarray) -> list[list[float]]:
    return [[float(x) for x in row] for row in np.asarray(matrix)]


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    header = {
        "format": CORPUS_FORMAT,
        "version": FORMAT_VERSION,
        "seed": corpus.seed,
        "lexicon": list(corpus.lexicon),
        "detector_multiplicity": {
            c: int(corpus.detector_multiplicity[c]) for c in corpus.lexicon
        },
    }
    lines = [json.dumps(header, sort_keys=True)]
    for video in corpus.videos:
        record = {
            "video_id": video.video_id,
            "shots": [
                {
                    "id": shot.shot_id,
                    "index": shot.index,
                    "concepts": list(shot.concepts),
                    "text": list(shot.text),
                    "frame_scores": _matrix_to_lists(shot.frame_scores),
                    "descriptors": _matrix_to_lists(shot.descriptors),
                }
                for shot in video.shots
            ],
            "user_summaries": [list(s) for s in video.user_summaries],
        }
        lines.append(json.dumps(record, sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n")


def load_corpus(path: str | Path) -> Corpus:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty corpus file")
    header = json.loads(lines[0])
    if header.get("format") != CORPUS_FORMAT:
        raise ValueError(f"{path}: not a {CORPUS_FORMAT} file")
    if header.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported corpus version {header.get('version')}")
    lexicon = Lexicon(tuple(header["lexicon"]))
    videos = []
    for line in lines[1:]:
        record = json.loads(line)
        shots = tuple(
            AnnotatedShot(
                shot_id=s["id"],
                index=s["index"],
                concepts=tuple(s["concepts"]),
                text=tuple(s["text"]),
                frame_scores=np.array(s["frame_scores"], dtype=float),
                descriptors=np.array(s["descriptors"], dtype=float),
            )
            for s in record["shots"]
        )
        videos.append(
            VideoRecord(
                video_id=record["video_id"],
                shots=shots,
                user_summaries=tuple(tuple(s) for s in record["user_summaries"]),
            )
        )
    return Corpus(
        lexicon=lexicon,
        detector_multiplicity={
            c: int(v) for c, v in header["detector_multiplicity"].items()
        },
        videos=tuple(videos),
        seed=int(header["seed"]),
    )


@dataclass(frozen=True)
class Checkpoint:
    """A trained summarizer: factors plus the settings needed to reuse them."""

    model: str
    factors: KernelFactors | np.ndarray
    lexicon_sha256: str
    segment_size: int
    lambda1: float
    lambda2: float
    seed: int
    use_query_features: bool = True

    @property
    def rank(self) -> int:
        if isinstance(self.factors, KernelFactors):
            return self.factors.rank
        return self.factors.shape[0]


def _format_rows(matrix: np.ndarray) -> list[str]:
    return [" ".join(repr(float(x)) for x in row) for row in np.asarray(matrix)]


def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> None:
    lines = [
        f"format: {CHECKPOINT_FORMAT}",
        f"version: {FORMAT_VERSION}",
        f"model: {checkpoint.model}",
        f"rank: {checkpoint.rank}",
        f"segment_size: {checkpoint.segment_size}",
        f"lambda1: {repr(float(checkpoint.lambda1))}",
        f"lambda2: {repr(float(checkpoint.lambda2))}",
        f"seed: {checkpoint.seed}",
        f"lexicon_sha256: {checkpoint.lexicon_sha256}",
        f"use_query_features: {int(checkpoint.use_query_features)}",
    ]
    if isinstance(checkpoint.factors, KernelFactors):
        lines.append(f"relevance_factor: {checkpoint.factors.relevance.shape[1]}")
        lines.extend(_format_rows(checkpoint.factors.relevance))
        lines.append(f"context_factor: {checkpoint.factors.context.shape[1]}")
        lines.extend(_format_rows(checkpoint.factors.context))
    else:
        weights = np.asarray(checkpoint.factors, dtype=float)
        lines.append(f"factor: {weights.shape[1]}")
        lines.extend(_format_rows(weights))
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path: str | Path) -> Checkpoint:
    lines = Path(path).read_text().splitlines()
    fields: dict[str, str] = {}
    matrices: dict[str, np.ndarray] = {}
    i = 0
    while i < len(lines):
        key, _, value = lines[i].partition(":")
        key, value = key.strip(), value.strip()
        if key in ("relevance_factor", "context_factor", "factor"):
            rank = int(fields["rank"])
            rows = [
                [float(x) for x in lines[i + 1 + r].split()] for r in range(rank)
            ]
            matrices[key] = np.array(rows, dtype=float)
            i += 1 + rank
        else:
            fields[key] = value
            i += 1
    if fields.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if int(fields.get("version", -1)) != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version")
    model = fields["model"]
    if model == "shdpp":
        factors = KernelFactors(
            relevance=matrices["relevance_factor"],
            context=matrices["context_factor"],
        )
    else:
        factors = matrices["factor"]
    return Checkpoint(
        model=model,
        factors=factors,
        lexicon_sha256=fields["lexicon_sha256"],
        segment_size=int(fields["segment_size"]),
        lambda1=float(fields["lambda1"]),
        lambda2=float(fields["lambda2"]),
        seed=int(fields["seed"]),
        use_query_features=bool(int(fields.get("use_query_features", "1"))),
    )


RESULT_COLUMNS = ("method", "F", "Prec", "Recall", "HR", "HR_Z")


def _result_cell(value) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float) and not np.isfinite(value):
        return "n/a"
    return repr(float(value))


def results_tsv(rows: Sequence, extra_columns: Sequence[str] = ()) -> str:
    """Tab-separated result table; one row per method result."""
    header = list(extra_columns) + list(RESULT_COLUMNS)
    lines = [f"# format={RESULTS_FORMAT} version={FORMAT_VERSION}"]
    lines.append("\t".join(header))
    for row in rows:
        extras = [str(v) for v in getattr(row, "extra", ())]
        lines.append(
            "\t".join(
                extras
                + [
                    row.method,
                    _result_cell(row.f),
                    _result_cell(row.precision),
                    _result_cell(row.recall),
                    _result_cell(row.hr),
                    _result_cell(row.hr_relevance),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def format_result_table(rows: Sequence) -> str:
    """Human-readable aligned table; scores shown as percentages."""

    def pct(value) -> str:
        if value is None or (isinstance(value, float) and not np.isfinite(value)):
            return "n/a"
        return f"{100.0 * value:.2f}"

    table = [list(RESULT_COLUMNS)]
    for row in rows:
        table.append(
            [
                row.method,
                pct(row.f),
                pct(row.precision),
                pct(row.recall),
                pct(row.hr),
                pct(row.hr_relevance),
            ]
        )
    widths = [max(len(line[c]) for line in table) for c in range(len(table[0]))]
    rendered = []
    for line in table:
        rendered.append("  ".join(cell.rjust(w) for cell, w in zip(line, widths)))
    return "\n".join(rendered)
