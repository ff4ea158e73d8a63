"""Exact probability computations for L-ensemble DPPs and conditional DPPs.

A determinantal point process over a ground set of N items is specified by a
positive semidefinite kernel L: the probability of drawing the subset y is
det(L_y) / det(L + I), with det(L_empty) = 1 by convention.  This module
implements exact subset probabilities, the marginal kernel, the conditional
DPP obtained by fixing part of the ground set (normalised through a masked
identity that is never materialised outside determinant calls), and a
spectral sampler.

Every determinant runs through one Cholesky routine with a fixed pivot
policy: a pivot below ``-PSD_PIVOT_TOL`` is a hard PSD violation, a pivot
below ``PIVOT_FLOOR`` marks the matrix as numerically singular and is lifted
to the ``PIVOT_JITTER`` floor so that downstream log-likelihoods of
rank-deficient kernels stay finite.  All numerical policy constants live
here and nowhere else.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

SYMMETRY_TOL = 1e-10      # max allowed |L - L.T| entry for a valid kernel
PSD_PIVOT_TOL = 1e-8      # pivot below -PSD_PIVOT_TOL => decisively not PSD
PIVOT_FLOOR = 1e-12       # pivot below this counts as numerically singular
PIVOT_JITTER = 1e-10      # mass a singular pivot is lifted to
PROB_SUM_TOL = 1e-8       # tolerance on probability normalisation checks

NEG_INF = float("-inf")


class PsdViolationError(ValueError):
    """A matrix required to be PSD has a decisively negative Cholesky pivot."""


class NullEventError(ValueError):
    """The event being conditioned on has zero probability under the kernel."""


def pivoted_cholesky(matrix: np.ndarray) -> tuple[np.ndarray, float, bool]:
    """Lower Cholesky factor of a PSD matrix under the pivot policy.

    Returns ``(factor, log_det, jittered)`` where ``jittered`` is True when
    at least one pivot fell below the singularity floor and was lifted, i.e.
    the matrix is numerically singular.  Raises :class:`PsdViolationError`
    when a pivot is decisively negative.

    The policy thresholds are relative to the matrix scale (its largest
    diagonal entry, floored at 1 so unit-scale kernels see exactly the
    nominal constants): elimination roundoff in deeply rank-deficient
    matrices grows with the scale, so an absolute threshold would flag valid
    Gram kernels as indefinite.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0, False
    scale = max(1.0, float(np.abs(np.einsum("ii->i", a)).max()))
    # Fast path: plain LAPACK factorisation, accepted only when every pivot
    # is inside the clean region so the policy could not have altered it.
    try:
        factor = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        factor = None
    if factor is not None:
        diag = np.einsum("ii->i", factor)
        if float(diag.min()) ** 2 >= PIVOT_FLOOR * scale:
            return factor, float(2.0 * np.log(diag).sum()), False
    return _pivot_loop(a, scale)


def _pivot_loop(a: np.ndarray, scale: float) -> tuple[np.ndarray, float, bool]:
    work = np.array(a, dtype=float)
    n = work.shape[0]
    factor = np.zeros_like(work)
    log_det = 0.0
    jittered = False
    for j in range(n):
        pivot = work[j, j]
        if pivot < -PSD_PIVOT_TOL * scale:
            raise PsdViolationError(
                f"pivot {pivot:.3e} at index {j} is below "
                f"{-PSD_PIVOT_TOL * scale:.3e}; matrix is not positive "
                "semidefinite"
            )
        if pivot < PIVOT_FLOOR * scale:
            # Lift to the jitter floor; clamping keeps roundoff-negative
            # pivots positive so the factorisation can proceed.
            pivot = max(pivot, 0.0) + PIVOT_JITTER * scale
            jittered = True
        root = math.sqrt(pivot)
        factor[j, j] = root
        if j + 1 < n:
            col = work[j + 1:, j] / root
            factor[j + 1:, j] = col
            work[j + 1:, j + 1:] -= np.outer(col, col)
        log_det += math.log(pivot)
    return factor, log_det, jittered


class Kernel:
    """Symmetric positive semidefinite similarity matrix over N items.

    Immutable after construction; the backing array is marked read-only.
    """

    __slots__ = ("_matrix",)

    def __init__(self, entries: np.ndarray, *, validate: bool = True):
        m = np.asarray(entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"kernel must be a square matrix, got shape {m.shape}")
        if validate and m.size:
            if not np.all(np.isfinite(m)):
                raise ValueError("kernel entries must be finite")
            if float(np.abs(m - m.T).max()) > SYMMETRY_TOL:
                raise ValueError(
                    f"kernel is asymmetric beyond tolerance {SYMMETRY_TOL:g}"
                )
        m = (m + m.T) / 2.0
        m.setflags(write=False)
        self._matrix = m
        if validate:
            pivoted_cholesky(m)  # PSD check; raises PsdViolationError

    @classmethod
    def from_gram(cls, b: np.ndarray) -> "Kernel":
        """Kernel ``b @ b.T``; PSD by construction, so validation is skipped."""
        b = np.asarray(b, dtype=float)
        if b.ndim != 2:
            raise ValueError("gram factor must be a 2-D array")
        m = b @ b.T
        m = (m + m.T) / 2.0
        m.setflags(write=False)
        kernel = cls.__new__(cls)
        kernel._matrix = m
        return kernel

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def size(self) -> int:
        return self._matrix.shape[0]

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        return f"Kernel(size={self.size})"


def as_index_subset(indices: Iterable[int], size: int) -> tuple[int, ...]:
    """Canonicalise a subset of ground-set indices (sorted, duplicate free)."""
    idx = tuple(int(i) for i in indices)
    for i in idx:
        if i < 0 or i >= size:
            raise ValueError(f"index {i} out of range for ground set of size {size}")
    if len(set(idx)) != len(idx):
        raise ValueError(f"duplicate indices in subset {idx}")
    return tuple(sorted(idx))


def log_det(kernel: Kernel, subset: Sequence[int]) -> float:
    """Natural log of the determinant of the principal submatrix over ``subset``.

    The empty subset has determinant 1, hence log-determinant 0.  Numerically
    singular submatrices return ``-inf``.
    """
    idx = as_index_subset(subset, kernel.size)
    if not idx:
        return 0.0
    sub = kernel.matrix[np.ix_(idx, idx)]
    _, value, jittered = pivoted_cholesky(sub)
    return NEG_INF if jittered else value


def log_normalizer(kernel: Kernel) -> float:
    """log det(L + I), the L-ensemble partition function."""
    _, value, _ = pivoted_cholesky(kernel.matrix + np.eye(kernel.size))
    return value


def subset_probability(kernel: Kernel, subset: Sequence[int]) -> float:
    """P(Y = subset) = det(L_subset) / det(L + I)."""
    value = log_det(kernel, subset)
    if value == NEG_INF:
        return 0.0
    return min(math.exp(value - log_normalizer(kernel)), 1.0)


def marginal_kernel(kernel: Kernel) -> Kernel:
    """Marginal kernel K = L (L + I)^{-1}; K_ii = P(i in Y)."""
    eye = np.eye(kernel.size)
    k = np.linalg.solve(kernel.matrix + eye, kernel.matrix)
    return Kernel((k + k.T) / 2.0)


def conditional_probability(
    kernel: Kernel,
    conditioned: Sequence[int],
    selected: Sequence[int],
    ground: Sequence[int],
) -> float:
    """Probability of picking ``selected`` from ``ground`` given ``conditioned``.

    Implements the conditional DPP
    ``det(L_{conditioned + selected}) / det(L_{conditioned + ground} + D)``
    where ``D`` is the identity restricted to the ``ground`` positions (zero
    diagonal on the conditioned positions).  Items that are conditioned on
    but not selectable (e.g. already-picked shots of the current segment)
    belong in ``conditioned``; the active mask is always exactly ``ground``.
    """
    n = kernel.size
    cond = as_index_subset(conditioned, n)
    grnd = as_index_subset(ground, n)
    sel = as_index_subset(selected, n)
    if set(cond) & set(grnd):
        raise ValueError("conditioned items overlap the selectable ground set")
    if not set(sel) <= set(grnd):
        raise ValueError("selected items must lie inside the ground set")

    order = cond + grnd
    den = kernel.matrix[np.ix_(order, order)].copy()
    active = np.arange(len(cond), len(order))
    den[active, active] += 1.0
    _, den_log_det, den_jittered = pivoted_cholesky(den)
    if den_jittered:
        raise NullEventError(
            "conditioning event has zero probability under the kernel"
        )

    num_idx = tuple(sorted(cond + sel))
    if not num_idx:
        num_log_det = 0.0
    else:
        sub = kernel.matrix[np.ix_(num_idx, num_idx)]
        _, num_log_det, num_jittered = pivoted_cholesky(sub)
        if num_jittered:
            return 0.0
    return min(math.exp(num_log_det - den_log_det), 1.0)


def sample_dpp(kernel: Kernel, rng_seed: int | np.random.Generator) -> tuple[int, ...]:
    """Draw one subset from the DPP; deterministic given the seed.

    ``rng_seed`` may be an integer seed or a ``numpy.random.Generator`` (the
    latter lets callers reuse one stream across many draws).
    """
    rng = (
        rng_seed
        if isinstance(rng_seed, np.random.Generator)
        else np.random.default_rng(rng_seed)
    )
    n = kernel.size
    if n == 0:
        return ()
    values, vectors = np.linalg.eigh(kernel.matrix)
    values = np.clip(values, 0.0, None)
    keep = rng.random(n) < values / (1.0 + values)
    v = vectors[:, keep]
    items: list[int] = []
    while v.shape[1]:
        p = np.einsum("ij,ij->i", v, v)
        p = np.clip(p, 0.0, None)
        if items:
            p[items] = 0.0  # guard against numerically re-picking an item
        total = p.sum()
        if total <= 0.0:
            break
        i = int(rng.choice(n, p=p / total))
        items.append(i)
        j = int(np.argmax(np.abs(v[i])))
        v = v - np.outer(v[:, j], v[i] / v[i, j])
        v = np.delete(v, j, axis=1)
        if v.shape[1]:
            v, _ = np.linalg.qr(v)
    return tuple(sorted(items))
