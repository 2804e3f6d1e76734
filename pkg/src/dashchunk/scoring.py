"""Tri-signal importance scoring and top-k audio token selection."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .boundary import EPS
from .token_io import as_attention_logits, as_token_matrix

__all__ = [
    "DEFAULT_BANDWIDTHS",
    "FusionWeights",
    "ImportanceScores",
    "AudioRetention",
    "Turnover",
    "keep_count",
    "top_k_mask",
    "boundary_signal",
    "low_variance_channels",
    "select_low_variance_channels",
    "multiscale_uniqueness",
    "attention_signal",
    "turnover",
    "fuse_and_select",
]

log = logging.getLogger(__name__)

DEFAULT_BANDWIDTHS = (0.125, 0.25, 0.5, 1.0, 2.0)


@dataclass(frozen=True)
class FusionWeights:
    w_b: float = 0.4
    w_u: float = 0.3
    w_a: float = 0.3

    def __post_init__(self):
        w = (self.w_b, self.w_u, self.w_a)
        if any(not math.isfinite(x) or x < 0 for x in w):
            raise ValueError(f"fusion weights must be finite and nonnegative, got {w}")
        if sum(w) <= 0:
            raise ValueError("fusion weights must not all be zero")

    @classmethod
    def parse(cls, text: str) -> "FusionWeights":
        parts = [p for p in str(text).split(",") if p.strip()]
        if len(parts) != 3:
            raise ValueError(f"expected three comma-separated weights, got {text!r}")
        return cls(*(float(p) for p in parts))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.w_b, self.w_u, self.w_a)


@dataclass(frozen=True)
class ImportanceScores:
    s_bnd: np.ndarray
    s_uniq: np.ndarray
    s_attn: np.ndarray
    fused: np.ndarray


@dataclass(frozen=True)
class AudioRetention:
    mask: np.ndarray
    kept_count: int

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)


@dataclass(frozen=True)
class Turnover:
    """Fused selection compared against attention-only selection."""

    rescued: np.ndarray   # kept by fusion only
    shared: np.ndarray    # kept by both
    replaced: np.ndarray  # kept by attention only

    @property
    def counts(self) -> dict[str, int]:
        return {
            "rescued": int(self.rescued.size),
            "shared": int(self.shared.size),
            "replaced": int(self.replaced.size),
        }

    @property
    def rate(self) -> float:
        total = self.rescued.size + self.shared.size
        return self.rescued.size / total if total else 0.0


def keep_count(n: int, rho: float) -> int:
    """``floor((1 - rho) * n)``, immune to binary round-off such as 0.1 + 0.9."""
    return int(math.floor(round((1.0 - rho) * n, 9)))


def top_k_mask(scores, k: int) -> np.ndarray:
    """Boolean mask of the ``k`` highest scores; equal scores favour lower index."""
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    mask = np.zeros(scores.size, dtype=bool)
    mask[order[: max(0, k)]] = True
    return mask


def boundary_signal(probs, eps: float = EPS) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    return probs / (probs.max() + eps)


def low_variance_channels(tokens, ratio: float = 0.5) -> np.ndarray:
    """Indices (ascending) of the ``floor(ratio * D)`` lowest-variance channels.

    Population variance over tokens; equal variances favour the lower channel
    index. At least one channel is always kept.
    """
    x = as_token_matrix(tokens).astype(np.float64, copy=False)
    d = x.shape[1]
    m = max(1, int(math.floor(ratio * d)))
    return np.sort(np.argsort(channel_variance(x), kind="stable")[:m])


def channel_variance(x: np.ndarray) -> np.ndarray:
    """Population variance per column.

    Uses ``E[x^2] - E[x]^2`` and redoes the two-pass computation for columns
    where cancellation could have eaten more than ~6 significant digits.
    """
    n = x.shape[0]
    mean = x.mean(axis=0)
    var = np.einsum("ij,ij->j", x, x) / n - mean * mean
    shaky = mean * mean > 1e6 * np.abs(var)
    if shaky.any():
        var[shaky] = x[:, shaky].var(axis=0)
    return np.maximum(var, 0.0)


def select_low_variance_channels(tokens, ratio: float = 0.5) -> np.ndarray:
    x = as_token_matrix(tokens)
    return np.take(x, low_variance_channels(x, ratio), axis=1)


def multiscale_uniqueness(selected, bandwidths=DEFAULT_BANDWIDTHS, eps: float = EPS) -> np.ndarray:
    """Distance-to-centre uniqueness under a sum of Gaussian kernels.

    Rows are L2-normalised, the centre is their mean, and each token's kernel
    mass ``g`` is summed over ``bandwidths``; uniqueness is ``1 - g / max g``.
    Zero-norm rows cannot be normalised and get uniqueness 1.
    """
    x = as_token_matrix(selected).astype(np.float64, copy=False)
    norms = np.sqrt(np.einsum("ij,ij->i", x, x))
    ok = norms > 0
    out = np.ones(x.shape[0])
    if not ok.all():
        log.warning("%d zero-norm token(s) scored as maximally unique", int((~ok).sum()))
        x, norms = x[ok], norms[ok]
    if not ok.any():
        return out
    # For unit rows u: |u - c|^2 = 1 - 2 u.c + |c|^2, so the normalised matrix
    # never has to be materialised.
    inv = 1.0 / norms
    center = (inv @ x) / x.shape[0]
    dist2 = np.maximum(1.0 - 2.0 * (x @ center) * inv + center @ center, 0.0)
    alphas = np.asarray(bandwidths, dtype=np.float64)
    g = np.exp(-dist2[:, None] / (2.0 * alphas[None, :])).sum(axis=1)
    out[ok] = 1.0 - g / (g.max() + eps)
    return out


def attention_signal(logits, eps: float = EPS) -> np.ndarray:
    """Max-normalise logits to [0, 1], shifting by ``-min`` if any are negative."""
    a = as_attention_logits(logits)
    lo = a.min()
    if lo < 0:
        a = a - lo
    return a / (a.max() + eps)


def turnover(fused_mask, attention_mask) -> Turnover:
    fused_mask = np.asarray(fused_mask, dtype=bool)
    attention_mask = np.asarray(attention_mask, dtype=bool)
    return Turnover(
        rescued=np.flatnonzero(fused_mask & ~attention_mask),
        shared=np.flatnonzero(fused_mask & attention_mask),
        replaced=np.flatnonzero(~fused_mask & attention_mask),
    )


def fuse_and_select(
    s_bnd,
    s_uniq,
    s_attn,
    weights: FusionWeights = FusionWeights(),
    rho_a: float = 0.75,
    fallback_attention_only: bool = False,
) -> tuple[ImportanceScores, AudioRetention, Turnover]:
    """Fuse the three signals and keep the top ``floor((1 - rho_a) * N)`` tokens.

    With ``fallback_attention_only`` (or fewer than two tokens) the fused
    score is the attention signal alone. The returned :class:`Turnover`
    compares the selection with attention-only top-k at the same budget.
    """
    s_bnd, s_uniq, s_attn = (np.asarray(v, dtype=np.float64) for v in (s_bnd, s_uniq, s_attn))
    n = s_attn.size
    if s_bnd.shape != (n,) or s_uniq.shape != (n,) or n < 1:
        raise ValueError("signal vectors must be non-empty and of equal length")
    if not 0.0 <= rho_a < 1.0:
        raise ValueError(f"rho_a must lie in [0, 1), got {rho_a}")
    if fallback_attention_only or n < 2:
        fused = s_attn.copy()
    else:
        fused = weights.w_b * s_bnd + weights.w_u * s_uniq + weights.w_a * s_attn
    k = keep_count(n, rho_a)
    if k < 1:
        log.info("audio budget rounds to zero tokens; keeping the top-scored one")
        k = 1
    mask = top_k_mask(fused, k)
    scores = ImportanceScores(s_bnd=s_bnd, s_uniq=s_uniq, s_attn=s_attn, fused=fused)
    return scores, AudioRetention(mask=mask, kept_count=k), turnover(mask, top_k_mask(s_attn, k))
