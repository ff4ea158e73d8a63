"""Maximum-likelihood estimation of the low-rank kernel factors.

The objective is the dataset log-likelihood minus squared-Frobenius
penalties on the factors.  For a Gram kernel G(B) = X B^T B X^T each
conditional term contributes log det(G_S) - log det(G_F + D); using
d/dB log det(X_S B^T B X_S^T + D) = 2 B X_S^T (G_S + D)^{-1} X_S, the
gradient of one term w.r.t. its factor B is

    2 B [ X_S^T G_S^{-1} X_S  -  X_F^T (G_F + D)^{-1} X_F ]

with S the numerator rows, F all rows and D the masked identity.  The
analytic gradient is verified against central finite differences in the
test suite; optimisation is full-batch gradient ascent with a backtracking
line search (halve the step until the objective does not decrease), which
makes the objective trace non-decreasing by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .dpp import pivoted_cholesky
from .model import (
    ConditionalTerm,
    KernelFactors,
    LabeledSummary,
    SegmentedSequence,
    DEFAULT_RANK,
    shdpp_terms,
    single_layer_terms,
    _single_layer_features,
)

MODELS = ("shdpp", "seqdpp", "dpp")

MAX_HALVINGS = 60


class TrainingError(RuntimeError):
    """Optimisation could not produce a finite objective."""


@dataclass(frozen=True)
class TrainConfig:
    """Knobs of the gradient-ascent fit; defaults follow the benchmark setup."""

    lambda1: float = 0.01
    lambda2: float = 0.01
    step_size: float = 1e-2
    max_iters: int = 500
    rel_tol: float = 1e-6
    restarts: int = 5
    init_sigma: float = 0.1
    seed: int = 0
    rank: int = DEFAULT_RANK

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("regularisation weights must be nonnegative")
        if self.step_size <= 0:
            raise ValueError("step size must be positive")
        if self.max_iters < 1 or self.restarts < 1 or self.rank < 1:
            raise ValueError("max_iters, restarts and rank must be positive")
        if not 0.0 < self.rel_tol < 1.0:
            raise ValueError("rel_tol must lie in (0, 1)")
        if self.init_sigma <= 0:
            raise ValueError("init_sigma must be positive")


@dataclass(frozen=True)
class Example:
    """One training instance: a segmented stream with its labelled summary.

    ``labels`` is a :class:`LabeledSummary` for the two-layer model, or a
    per-segment selection tuple for the single-layer models (a
    LabeledSummary is accepted there too and collapsed per segment).
    ``group`` tags the source stream for leave-one-out folds.
    """

    sequence: SegmentedSequence
    labels: object
    query_scale: np.ndarray | None = None
    group: str | None = None


@dataclass
class TrainReport:
    """Outcome of a fit: factors, trace, and per-restart diagnostics."""

    factors: KernelFactors | np.ndarray
    objective_trace: tuple[float, ...]
    lambda1: float
    lambda2: float
    restart_objectives: tuple[float, ...]
    model: str = "shdpp"

    @property
    def n_iterations(self) -> int:
        return len(self.objective_trace) - 1


@dataclass(frozen=True)
class _TaggedTerm:
    block: int
    term: ConditionalTerm
    tag: str


def _collapse_selections(example: Example) -> Sequence[Sequence[int]]:
    labels = example.labels
    if isinstance(labels, LabeledSummary):
        return tuple(
            tuple(sorted(set(r) | set(c)))
            for r, c in zip(labels.relevant, labels.context)
        )
    return labels


def _compile_example(example: Example, model: str, index: int) -> list[_TaggedTerm]:
    if model == "shdpp":
        if not isinstance(example.labels, LabeledSummary):
            raise TypeError("the two-layer model trains on LabeledSummary labels")
        if example.query_scale is None:
            raise ValueError("the two-layer model needs a query scaling vector")
        rel, ctx = shdpp_terms(example.sequence, example.labels, example.query_scale)
        out = [
            _TaggedTerm(0, term, f"example {index}, segment {t}, relevance layer")
            for t, term in enumerate(rel)
        ]
        out += [
            _TaggedTerm(1, term, f"example {index}, segment {t}, context layer")
            for t, term in enumerate(ctx)
        ]
        return out
    feats = _single_layer_features(example.sequence, example.query_scale)
    terms = single_layer_terms(
        feats,
        example.sequence.segments,
        _collapse_selections(example),
        sequential=(model == "seqdpp"),
    )
    return [
        _TaggedTerm(0, term, f"example {index}, segment {t}")
        for t, term in enumerate(terms)
    ]


def _compile_dataset(dataset: Sequence[Example], model: str) -> list[_TaggedTerm]:
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    if not dataset:
        raise ValueError("dataset must be nonempty")
    compiled: list[_TaggedTerm] = []
    for i, example in enumerate(dataset):
        compiled.extend(_compile_example(example, model, i))
    return compiled


def _as_blocks(params, model: str) -> list[np.ndarray]:
    if model == "shdpp":
        if not isinstance(params, KernelFactors):
            raise TypeError("the two-layer model is parameterised by KernelFactors")
        return [params.relevance, params.context]
    return [np.asarray(params, dtype=float)]


def _from_blocks(blocks: list[np.ndarray], model: str):
    if model == "shdpp":
        return KernelFactors(relevance=blocks[0], context=blocks[1])
    return blocks[0]


def _block_lambdas(lambda1: float, lambda2: float, model: str) -> list[float]:
    return [lambda1, lambda2] if model == "shdpp" else [lambda1]


def _term_log_prob_fast(term: ConditionalTerm, b: np.ndarray, tag: str) -> float:
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
    value = num_log_det - den_log_det
    if not np.isfinite(value):
        raise TrainingError(f"non-finite conditional term for {tag}")
    return value


def _chol_inverse(lower: np.ndarray) -> np.ndarray:
    inv = solve_triangular(lower, np.eye(lower.shape[0]), lower=True)
    return inv.T @ inv


def _term_value_and_accumulate(
    term: ConditionalTerm, b: np.ndarray, acc: np.ndarray, tag: str
) -> float:
    x = term.x
    g = b @ b.T
    den = g.copy()
    active = list(term.active)
    den[active, active] += 1.0
    den_factor, den_log_det, _ = pivoted_cholesky(den)
    acc -= x.T @ _chol_inverse(den_factor) @ x
    if term.numerator:
        idx = list(term.numerator)
        num_factor, num_log_det, _ = pivoted_cholesky(g[np.ix_(idx, idx)])
        xs = x[idx]
        acc += xs.T @ _chol_inverse(num_factor) @ xs
    else:
        num_log_det = 0.0
    value = num_log_det - den_log_det
    if not np.isfinite(value):
        raise TrainingError(f"non-finite conditional term for {tag}")
    return value


def _objective_compiled(
    compiled: Sequence[_TaggedTerm],
    blocks: list[np.ndarray],
    lambdas: list[float],
) -> float:
    total = 0.0
    for tagged in compiled:
        block = tagged.block
        total += _term_log_prob_fast(
            tagged.term, tagged.term.x @ blocks[block].T, tagged.tag
        )
    for lam, b in zip(lambdas, blocks):
        total -= lam * float(np.sum(b * b))
    return total


def _gradient_compiled(
    compiled: Sequence[_TaggedTerm],
    blocks: list[np.ndarray],
    lambdas: list[float],
) -> tuple[float, list[np.ndarray]]:
    value = 0.0
    accumulators = [np.zeros((b.shape[1], b.shape[1])) for b in blocks]
    for tagged in compiled:
        block = tagged.block
        value += _term_value_and_accumulate(
            tagged.term,
            tagged.term.x @ blocks[block].T,
            accumulators[block],
            tagged.tag,
        )
    grads = []
    for b, acc, lam in zip(blocks, accumulators, lambdas):
        value -= lam * float(np.sum(b * b))
        grads.append(2.0 * b @ acc - 2.0 * lam * b)
    return value, grads


def objective(
    dataset: Sequence[Example],
    factors,
    lambda1: float,
    lambda2: float,
    model: str = "shdpp",
) -> float:
    """Regularised log-likelihood of the dataset under ``factors``."""
    compiled = _compile_dataset(dataset, model)
    return _objective_compiled(
        compiled, _as_blocks(factors, model), _block_lambdas(lambda1, lambda2, model)
    )


def gradient(
    dataset: Sequence[Example],
    factors,
    lambda1: float,
    lambda2: float,
    model: str = "shdpp",
):
    """Analytic gradient of :func:`objective` w.r.t. the factors.

    Returns ``(d_relevance, d_context)`` for the two-layer model and a single
    matrix for the single-layer models.
    """
    compiled = _compile_dataset(dataset, model)
    _, grads = _gradient_compiled(
        compiled, _as_blocks(factors, model), _block_lambdas(lambda1, lambda2, model)
    )
    return (grads[0], grads[1]) if model == "shdpp" else grads[0]


def log_likelihood(dataset: Sequence[Example], factors, model: str = "shdpp") -> float:
    """Unpenalised dataset log-likelihood (the validation criterion)."""
    compiled = _compile_dataset(dataset, model)
    return _objective_compiled(compiled, _as_blocks(factors, model), [])


def _feature_dim(dataset: Sequence[Example], model: str) -> int:
    seq = dataset[0].sequence
    if model == "shdpp":
        return seq.concept_dim
    return seq.concept_dim if dataset[0].query_scale is not None else (
        seq.full_features.shape[1]
    )


def _init_blocks(
    dataset: Sequence[Example], config: TrainConfig, model: str, restart: int
) -> list[np.ndarray]:
    rng = np.random.default_rng([config.seed, restart])
    dim = _feature_dim(dataset, model)
    if model == "shdpp":
        factors = KernelFactors.random(dim, config.rank, config.init_sigma, rng)
        return [factors.relevance, factors.context]
    return [config.init_sigma * rng.standard_normal((config.rank, dim))]


def fit(
    dataset: Sequence[Example],
    config: TrainConfig,
    model: str = "shdpp",
    validation: Sequence[Example] | None = None,
) -> TrainReport:
    """Gradient-ascent MLE with restarts.

    Each restart is initialised i.i.d. Gaussian and optimised with
    backtracking line search; the returned factors are the restart with the
    best validation log-likelihood (best final objective when no validation
    set is given).  Deterministic given ``(dataset, config.seed)``.
    """
    compiled = _compile_dataset(dataset, model)
    lambdas = _block_lambdas(config.lambda1, config.lambda2, model)
    validation_compiled = (
        _compile_dataset(validation, model) if validation else None
    )

    best = None
    restart_finals: list[float] = []
    for restart in range(config.restarts):
        blocks = _init_blocks(dataset, config, model, restart)
        try:
            trace = _ascend(compiled, blocks, lambdas, config)
        except TrainingError:
            restart_finals.append(float("-inf"))
            continue
        if not np.isfinite(trace[-1]):
            restart_finals.append(float("-inf"))
            continue
        restart_finals.append(trace[-1])
        if validation_compiled is not None:
            score = _objective_compiled(validation_compiled, blocks, [])
        else:
            score = trace[-1]
        if best is None or score > best[0]:
            best = (score, blocks, trace)

    if best is None:
        raise TrainingError("all restarts diverged to a non-finite objective")
    _, blocks, trace = best
    return TrainReport(
        factors=_from_blocks(blocks, model),
        objective_trace=tuple(trace),
        lambda1=config.lambda1,
        lambda2=config.lambda2,
        restart_objectives=tuple(restart_finals),
        model=model,
    )


def _ascend(
    compiled: Sequence[_TaggedTerm],
    blocks: list[np.ndarray],
    lambdas: list[float],
    config: TrainConfig,
) -> list[float]:
    current = _objective_compiled(compiled, blocks, lambdas)
    if not np.isfinite(current):
        raise TrainingError("initial objective is not finite")
    trace = [current]
    for _ in range(config.max_iters):
        value, grads = _gradient_compiled(compiled, blocks, lambdas)
        step = config.step_size
        accepted = None
        for _ in range(MAX_HALVINGS):
            candidate = [b + step * g for b, g in zip(blocks, grads)]
            candidate_value = _objective_compiled(compiled, candidate, lambdas)
            if np.isfinite(candidate_value) and candidate_value >= current:
                accepted = (candidate, candidate_value)
                break
            step *= 0.5
        if accepted is None:
            break  # no step of any size improves: converged
        blocks[:] = accepted[0]
        previous, current = current, accepted[1]
        trace.append(current)
        if abs(current - previous) <= config.rel_tol * max(1.0, abs(previous)):
            break
    return trace


def select_hyperparameters(
    dataset: Sequence[Example],
    grid: Iterable[tuple[float, float]],
    config: TrainConfig,
    model: str = "shdpp",
) -> tuple[float, float]:
    """Leave-one-group-out grid search over (lambda1, lambda2) pairs.

    Folds are the distinct ``Example.group`` tags (one per source stream).
    The pair with the highest mean held-out log-likelihood wins; ties break
    toward the larger lambda1 + lambda2.
    """
    pairs = [(float(a), float(b)) for a, b in grid]
    if not pairs:
        raise ValueError("hyperparameter grid must be nonempty")
    groups: list[str] = []
    for i, example in enumerate(dataset):
        tag = example.group if example.group is not None else f"#{i}"
        if tag not in groups:
            groups.append(tag)
    if len(groups) < 2:
        raise ValueError("leave-one-out selection needs at least two groups")
    if len(pairs) == 1:
        return pairs[0]

    def _tag(example: Example, i: int) -> str:
        return example.group if example.group is not None else f"#{i}"

    scored = []
    for lambda1, lambda2 in pairs:
        fold_scores = []
        for held_out in groups:
            train = [e for i, e in enumerate(dataset) if _tag(e, i) != held_out]
            test = [e for i, e in enumerate(dataset) if _tag(e, i) == held_out]
            fold_config = TrainConfig(
                lambda1=lambda1,
                lambda2=lambda2,
                step_size=config.step_size,
                max_iters=config.max_iters,
                rel_tol=config.rel_tol,
                restarts=config.restarts,
                init_sigma=config.init_sigma,
                seed=config.seed,
                rank=config.rank,
            )
            report = fit(train, fold_config, model=model)
            fold_scores.append(log_likelihood(test, report.factors, model=model))
        scored.append((float(np.mean(fold_scores)), lambda1 + lambda2, lambda1))
    best_index = max(range(len(pairs)), key=lambda i: scored[i])
    return pairs[best_index]
