"""Adjacent-token similarity, boundary probabilities and boundary detection."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .token_io import as_token_matrix

__all__ = [
    "EPS",
    "SimilarityMetric",
    "DegenerateTokenError",
    "BoundaryProfile",
    "BoundarySet",
    "adjacent_similarity",
    "boundary_probabilities",
    "boundary_profile",
    "detect_boundaries",
]

EPS = 1e-8


class SimilarityMetric(str, enum.Enum):
    COSINE = "cosine"
    DOT_PRODUCT = "dot"
    CHANGE_RATE = "change-rate"
    RANDOM = "random"

    @classmethod
    def parse(cls, value) -> "SimilarityMetric":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"dot-product": "dot", "changerate": "change-rate"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown similarity metric {value!r} (choose from {names})") from None


class DegenerateTokenError(ValueError):
    """A zero-norm token makes cosine similarity undefined."""

    def __init__(self, index: int):
        super().__init__(f"token {index} has zero norm; cosine similarity is undefined")
        self.index = index


@dataclass(frozen=True)
class BoundaryProfile:
    """Per-position similarity and boundary probability.

    ``sims[0]`` has no predecessor and is stored as 1.0; ``probs[0]`` is 1
    because the first token always opens a segment.
    """

    sims: np.ndarray
    probs: np.ndarray

    def __len__(self):
        return len(self.sims)


@dataclass(frozen=True)
class BoundarySet:
    """Detected boundaries with sentinels: ``positions = [0, ..., N]``.

    ``strengths[i]`` is the boundary probability at ``inner[i]``.
    """

    positions: np.ndarray
    strengths: np.ndarray

    @property
    def n(self) -> int:
        return int(self.positions[-1])

    @property
    def inner(self) -> np.ndarray:
        return self.positions[1:-1]

    def segment_lengths(self) -> np.ndarray:
        return np.diff(self.positions)


def _cosine(x: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.einsum("ij,ij->i", x, x))
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise DegenerateTokenError(int(zero[0]))
    dots = np.einsum("ij,ij->i", x[:-1], x[1:])
    return np.clip(dots / (norms[:-1] * norms[1:]), -1.0, 1.0)


def _dot_minmax(x: np.ndarray) -> np.ndarray:
    dots = np.einsum("ij,ij->i", x[:-1], x[1:])
    lo, hi = dots.min(), dots.max()
    if hi - lo <= 0:
        return np.ones_like(dots)
    return 2.0 * (dots - lo) / (hi - lo) - 1.0


def _change_rate(x: np.ndarray) -> np.ndarray:
    steps = np.linalg.norm(np.diff(x, axis=0), axis=1)
    return 1.0 - steps / (steps.max() + EPS)


def adjacent_similarity(
    tokens, metric: SimilarityMetric | str = SimilarityMetric.COSINE, seed: int | None = None
) -> np.ndarray:
    """Similarity between each token and its predecessor.

    Parameters
    ----------
    tokens : array-like, shape (N, D)
    metric : SimilarityMetric or str
        ``cosine`` (default), ``dot`` (inner product min-max scaled to
        [-1, 1] over the sequence), ``change-rate`` (one minus the step norm
        relative to the largest step) or ``random`` (uniform in [-1, 1]).
    seed : int, optional
        Seed for the ``random`` metric.

    Returns
    -------
    ndarray, shape (N,)
        Entry 0 is fixed at 1.0.
    """
    x = as_token_matrix(tokens).astype(np.float64, copy=False)
    metric = SimilarityMetric.parse(metric)
    sims = np.ones(x.shape[0])
    if x.shape[0] < 2:
        return sims
    if metric is SimilarityMetric.COSINE:
        sims[1:] = _cosine(x)
    elif metric is SimilarityMetric.DOT_PRODUCT:
        sims[1:] = _dot_minmax(x)
    elif metric is SimilarityMetric.CHANGE_RATE:
        sims[1:] = _change_rate(x)
    else:
        rng = np.random.default_rng(seed)
        sims[1:] = rng.uniform(-1.0, 1.0, size=x.shape[0] - 1)
    return sims


def boundary_probabilities(sims) -> np.ndarray:
    sims = np.asarray(sims, dtype=np.float64)
    if sims.ndim != 1 or sims.size < 1:
        raise ValueError("sims must be a non-empty vector")
    if not np.all(np.isfinite(sims)):
        raise ValueError("sims contain non-finite values")
    probs = np.clip((1.0 - sims) / 2.0, 0.0, 1.0)
    probs[0] = 1.0
    return probs


def boundary_profile(
    tokens, metric: SimilarityMetric | str = SimilarityMetric.COSINE, seed: int | None = None
) -> BoundaryProfile:
    sims = adjacent_similarity(tokens, metric, seed)
    return BoundaryProfile(sims=sims, probs=boundary_probabilities(sims))


def detect_boundaries(sims, probs, tau: float = 0.4, c_min: int = 30) -> BoundarySet:
    """Left-to-right scan with a minimum chunk size.

    Position ``t >= 1`` becomes a boundary when ``sims[t] < tau`` and it lies
    at least ``c_min`` tokens after the previously accepted boundary (the
    scan starts with the implicit boundary at 0).
    """
    sims = np.asarray(sims, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    if sims.ndim != 1 or sims.shape != probs.shape or sims.size < 1:
        raise ValueError("sims and probs must be aligned non-empty vectors")
    if not -1.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (-1, 1), got {tau}")
    if int(c_min) != c_min or c_min < 1:
        raise ValueError(f"c_min must be a positive integer, got {c_min}")
    n = sims.size
    found = []
    last = 0
    # Candidates are sparse; walk only the positions below threshold.
    for t in np.flatnonzero(sims[1:] < tau) + 1:
        if t - last >= c_min:
            found.append(int(t))
            last = int(t)
    positions = np.array([0, *found, n], dtype=np.int64)
    return BoundarySet(positions=positions, strengths=probs[found].copy())
