"""Command-line interface: generate, train, summarize, benchmark, sweep.

Every command is deterministic given its flags (all randomness flows from
explicit seeds) and exits nonzero with a one-line diagnostic on error.
The ``SHDPP_LOG`` environment variable sets the log verbosity
(debug/info/warning).
"""

from __future__ import annotations

import functools
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import benchmark as bench
from . import io as pio
from .corpus import CorpusConfig, build_groundtruth, generate_corpus
from .estimators import build_sequence, groundtruth_labels, groundtruth_selections
from .features import Query, query_concept_indices, query_scaling
from .inference import (
    baseline_ranking,
    baseline_sampling,
    summarize_seqdpp,
    summarize_shdpp,
    summarize_vanilla_dpp,
)
from .model import DEFAULT_RANK, DEFAULT_SEGMENT_SIZE, LabeledSummary
from .training import Example, TrainConfig, fit, select_hyperparameters


def _setup_logging() -> None:
    level = os.environ.get("SHDPP_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def _fail_cleanly(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except Exception as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


@click.group()
def main() -> None:
    """Query-focused stream summarization with sequential hierarchical DPPs."""
    _setup_logging()


@main.command()
@click.option("--videos", type=int, default=4, show_default=True)
@click.option("--shots-per-video", type=int, default=200, show_default=True)
@click.option("--lexicon-size", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_fail_cleanly
def generate(videos, shots_per_video, lexicon_size, seed, out):
    """Generate a synthetic corpus and write it as JSONL."""
    config = CorpusConfig(
        videos=videos,
        shots_per_video=shots_per_video,
        lexicon_size=lexicon_size,
        seed=seed,
    )
    corpus = generate_corpus(config)
    pio.save_corpus(corpus, out)
    n_shots = sum(v.n_shots for v in corpus.videos)
    labels_per_shot = np.mean(
        [len(s.concepts) for v in corpus.videos for s in v.shots]
    )
    summary_sizes = [len(s) for v in corpus.videos for s in v.user_summaries]
    click.echo(f"wrote {out}")
    click.echo(
        f"videos={len(corpus.videos)} shots={n_shots} "
        f"lexicon={len(corpus.lexicon)} "
        f"mean_labels_per_shot={labels_per_shot:.2f} "
        f"mean_user_summary={np.mean(summary_sizes):.1f}"
    )


def _parse_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _training_dataset(corpus, mode, segment_size, max_queries, seed, layered, use_query):
    oracles = bench.compute_oracles(corpus)
    queries = bench.select_queries(corpus, 2, mode, max_queries, seed, oracles)
    if not queries:
        raise ValueError("no usable training queries for this corpus and mode")
    sequences = {
        v.video_id: build_sequence(
            v, corpus.lexicon, corpus.detector_multiplicity, segment_size
        )
        for v in corpus.videos
    }
    examples = []
    for video in corpus.videos:
        for query in queries:
            gt = build_groundtruth(video, oracles[video.video_id], query, mode)
            sequence = sequences[video.video_id]
            labels = (
                groundtruth_labels(sequence, gt)
                if layered
                else groundtruth_selections(sequence, gt)
            )
            examples.append(
                Example(
                    sequence=sequence,
                    labels=labels,
                    query_scale=(
                        query_scaling(query, corpus.lexicon) if use_query else None
                    ),
                    group=video.video_id,
                )
            )
    return examples


@main.command()
@click.option("--data", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--mode", type=click.Choice(["patient", "impatient"]), default="patient",
              show_default=True)
@click.option("--method", type=click.Choice(["shdpp", "seqdpp", "dpp"]),
              default="shdpp", show_default=True)
@click.option("--segment-size", type=int, default=DEFAULT_SEGMENT_SIZE, show_default=True)
@click.option("--rank", type=int, default=DEFAULT_RANK, show_default=True)
@click.option("--lambda-grid", default="0.01",
              help="Comma-separated values; pairs are the Cartesian square.",
              show_default=True)
@click.option("--max-queries", type=int, default=8, show_default=True,
              help="Cap on training queries per video (seeded subsample).")
@click.option("--restarts", type=int, default=2, show_default=True)
@click.option("--max-iters", type=int, default=150, show_default=True)
@click.option("--step-size", type=float, default=0.01, show_default=True)
@click.option("--rel-tol", type=float, default=1e-6, show_default=True)
@click.option("--init-sigma", type=float, default=0.1, show_default=True)
@click.option("--raw-features", is_flag=True,
              help="Single-layer methods: use full features instead of "
                   "query-scaled concept scores.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_fail_cleanly
def train(data, mode, method, segment_size, rank, lambda_grid, max_queries,
          restarts, max_iters, step_size, rel_tol, init_sigma, raw_features,
          seed, out):
    """Fit a summarizer by maximum likelihood and write a checkpoint."""
    corpus = pio.load_corpus(data)
    use_query = not raw_features if method != "shdpp" else True
    examples = _training_dataset(
        corpus, mode, segment_size, max_queries, seed,
        layered=(method == "shdpp"), use_query=use_query,
    )
    values = _parse_floats(lambda_grid)
    grid = [(a, b) for a in values for b in values]
    config = TrainConfig(
        lambda1=values[0], lambda2=values[0], step_size=step_size,
        max_iters=max_iters, rel_tol=rel_tol, restarts=restarts,
        init_sigma=init_sigma, seed=seed, rank=rank,
    )
    if len(grid) > 1:
        lambda1, lambda2 = select_hyperparameters(examples, grid, config, model=method)
        click.echo(f"selected lambda1={lambda1} lambda2={lambda2}")
        config = TrainConfig(
            lambda1=lambda1, lambda2=lambda2, step_size=step_size,
            max_iters=max_iters, rel_tol=rel_tol, restarts=restarts,
            init_sigma=init_sigma, seed=seed, rank=rank,
        )
    report = fit(examples, config, model=method)
    checkpoint = pio.Checkpoint(
        model=method,
        factors=report.factors,
        lexicon_sha256=pio.lexicon_sha256(corpus.lexicon),
        segment_size=segment_size,
        lambda1=config.lambda1,
        lambda2=config.lambda2,
        seed=seed,
        use_query_features=use_query,
    )
    pio.save_checkpoint(checkpoint, out)
    click.echo(
        f"wrote {out} (objective {report.objective_trace[-1]:.4f} "
        f"after {report.n_iterations} iterations)"
    )


def _parse_query(text: str, lexicon) -> Query:
    query = Query(w.strip() for w in text.split(",") if w.strip())
    query_concept_indices(query, lexicon)  # raises on unknown concepts
    return query


@main.command()
@click.option("--data", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--ckpt", type=click.Path(exists=True, dir_okay=False))
@click.option("--video-id", required=True)
@click.option("--query", "query_text", required=True,
              help='Comma-separated concepts, e.g. "car,tree".')
@click.option("--method",
              type=click.Choice(["shdpp", "seqdpp", "dpp", "ranking", "sampling"]),
              default="shdpp", show_default=True)
@click.option("--budget", type=int, help="Summary length for ranking/sampling.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_fail_cleanly
def summarize(data, ckpt, video_id, query_text, method, budget, seed, out):
    """Summarize one video for one query and write the selected shots."""
    corpus = pio.load_corpus(data)
    videos = {v.video_id: v for v in corpus.videos}
    if video_id not in videos:
        raise ValueError(f"video {video_id!r} not found in {data}")
    video = videos[video_id]
    query = _parse_query(query_text, corpus.lexicon)

    if method in ("shdpp", "seqdpp", "dpp"):
        if ckpt is None:
            raise ValueError(f"--method {method} requires --ckpt")
        checkpoint = pio.load_checkpoint(ckpt)
        if checkpoint.model != method:
            raise ValueError(
                f"checkpoint holds a {checkpoint.model} model, not {method}"
            )
        if checkpoint.lexicon_sha256 != pio.lexicon_sha256(corpus.lexicon):
            raise ValueError("checkpoint was trained against a different lexicon")
        sequence = build_sequence(
            video, corpus.lexicon, corpus.detector_multiplicity,
            checkpoint.segment_size,
        )
        scale = query_scaling(query, corpus.lexicon)
        if method == "shdpp":
            summary = summarize_shdpp(sequence, scale, checkpoint.factors)
        elif method == "seqdpp":
            summary = summarize_seqdpp(
                sequence, checkpoint.factors,
                scale if checkpoint.use_query_features else None,
            )
        else:
            summary = summarize_vanilla_dpp(
                sequence, checkpoint.factors,
                scale if checkpoint.use_query_features else None,
            )
    else:
        if budget is None:
            raise ValueError(f"--method {method} requires --budget")
        sequence = build_sequence(
            video, corpus.lexicon, corpus.detector_multiplicity, DEFAULT_SEGMENT_SIZE
        )
        if method == "ranking":
            summary = baseline_ranking(
                sequence, query_concept_indices(query, corpus.lexicon), budget
            )
        else:
            summary = baseline_sampling(sequence, budget, seed)

    lines = [
        "# format=shdpp-summary version=1",
        f"# video={video_id} query={query} method={method}",
        "layer\tshot\ttext",
    ]
    if isinstance(summary, LabeledSummary):
        rows = [("relevance", i) for i in summary.relevant_ids]
        rows += [
            ("context", i)
            for i in summary.selected_ids
            if i not in set(summary.relevant_ids)
        ]
    else:
        ids = sorted({i for part in summary for i in (part if isinstance(part, tuple) else (part,))}) \
            if summary and isinstance(summary[0], tuple) else sorted(summary)
        rows = [("-", i) for i in ids]
    for layer, shot_id in sorted(rows, key=lambda r: r[1]):
        lines.append(f"{layer}\t{shot_id}\t{' '.join(video.shots[shot_id].text)}")
    Path(out).write_text("\n".join(lines) + "\n")
    click.echo("\n".join(lines))


_benchmark_options = [
    click.option("--data", type=click.Path(exists=True, dir_okay=False), required=True),
    click.option("--mode", type=click.Choice(["patient", "impatient"]),
                 default="patient", show_default=True),
    click.option("--methods", default="shdpp,seqdpp,dpp,ranking,sampling",
                 show_default=True),
    click.option("--max-queries", type=int, default=8, show_default=True),
    click.option("--train-max-queries", type=int, default=None),
    click.option("--rank", type=int, default=DEFAULT_RANK, show_default=True),
    click.option("--lambda1", type=float, default=0.01, show_default=True),
    click.option("--lambda2", type=float, default=0.01, show_default=True),
    click.option("--restarts", type=int, default=1, show_default=True),
    click.option("--max-iters", type=int, default=60, show_default=True),
    click.option("--rel-tol", type=float, default=1e-4, show_default=True),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--out", type=click.Path(dir_okay=False), required=True),
]


def _with_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return wrap


def _make_config(lambda1, lambda2, restarts, max_iters, rel_tol, seed, rank):
    return TrainConfig(
        lambda1=lambda1, lambda2=lambda2, restarts=restarts,
        max_iters=max_iters, rel_tol=rel_tol, seed=seed, rank=rank,
    )


@main.command(name="benchmark")
@_with_options(_benchmark_options)
@click.option("--arity", type=click.Choice(["2", "3"]), default="2", show_default=True)
@click.option("--segment-size", type=int, default=DEFAULT_SEGMENT_SIZE, show_default=True)
@_fail_cleanly
def benchmark_cmd(data, mode, methods, max_queries, train_max_queries, rank,
                  lambda1, lambda2, restarts, max_iters, rel_tol, seed, out,
                  arity, segment_size):
    """Run the leave-one-video-out benchmark and write the result table."""
    corpus = pio.load_corpus(data)
    report = bench.run_benchmark(
        corpus,
        methods=[m.strip() for m in methods.split(",") if m.strip()],
        mode=mode,
        arity=int(arity),
        max_queries=max_queries,
        train_max_queries=train_max_queries,
        seed=seed,
        segment_size=segment_size,
        rank=rank,
        train_config=_make_config(lambda1, lambda2, restarts, max_iters,
                                  rel_tol, seed, rank),
    )
    Path(out).write_text(pio.results_tsv(report.rows))
    click.echo(pio.format_result_table(report.rows))
    for row in report.rows:
        if row.error:
            click.echo(f"note: {row.method} failed ({row.error})", err=True)


@main.command()
@_with_options(_benchmark_options)
@click.option("--sizes", default="4,6,8,10,12", show_default=True)
@_fail_cleanly
def sweep(data, mode, methods, max_queries, train_max_queries, rank, lambda1,
          lambda2, restarts, max_iters, rel_tol, seed, out, sizes):
    """Benchmark across segment sizes and write plot-ready rows."""
    corpus = pio.load_corpus(data)
    rows = bench.segment_size_sweep(
        corpus,
        sizes=[int(s) for s in sizes.split(",") if s.strip()],
        methods=[m.strip() for m in methods.split(",") if m.strip()],
        mode=mode,
        max_queries=max_queries,
        train_max_queries=train_max_queries,
        seed=seed,
        rank=rank,
        train_config=_make_config(lambda1, lambda2, restarts, max_iters,
                                  rel_tol, seed, rank),
    )
    Path(out).write_text(pio.results_tsv(rows, extra_columns=("segment_size",)))
    click.echo(f"wrote {out} ({len(rows)} rows)")


if __name__ == "__main__":
    main()
