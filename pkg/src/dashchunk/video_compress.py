"""Boundary-aware video compression with interleaved spatial/temporal pruning.

Each refined video segment gets a compression ratio nudged by how much of
its paired audio survived selection. Frames that touch a segment boundary
get a retention boost, then even frames (offset within the segment) are
pruned spatially by kNN density and odd frames temporally against the
previous original frame.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .projection import SegmentMap
from .token_io import FrameGrid, as_token_matrix

__all__ = [
    "SegmentCompressionPlan",
    "segment_audio_retention",
    "adaptive_ratio",
    "boundary_frame_retention",
    "frame_keep_count",
    "knn_density",
    "spatial_prune_frame",
    "positional_cosine",
    "temporal_prune_frame",
    "segment_frames",
    "boundary_frame_strengths",
    "plan_segments",
    "compress_segment",
    "compress_video",
]

log = logging.getLogger(__name__)

# Scores are quantised before ranking so that float noise (e.g. BLAS blocking
# in a Gram product) cannot break ties between mathematically equal tokens.
_TIE_DECIMALS = 12


@dataclass
class SegmentCompressionPlan:
    segment: tuple[int, int]        # video token interval
    frames: tuple[int, int]         # frame interval [first, last + 1)
    audio_range: tuple[int, int]
    audio_retention: float
    rho_v: float                    # adapted compression ratio
    frame_retention: np.ndarray     # r_f for each frame in ``frames``
    keep_counts: np.ndarray
    boundary_frames: dict = field(default_factory=dict)  # frame -> strength

    @property
    def base_retention(self) -> float:
        return 1.0 - self.rho_v


def segment_audio_retention(audio_mask, audio_range: tuple[int, int]) -> float:
    lo, hi = audio_range
    if hi <= lo:
        log.debug("empty audio range %s; using neutral retention 0.5", audio_range)
        return 0.5
    mask = np.asarray(audio_mask, dtype=bool)
    return float(mask[lo:hi].sum()) / (hi - lo)


def adaptive_ratio(
    rho_v: float, m_bar: float, lambda_r: float = 0.1, clamp: tuple[float, float] = (0.1, 0.95)
) -> float:
    return float(np.clip(rho_v + lambda_r * (0.5 - m_bar), clamp[0], clamp[1]))


def boundary_frame_retention(r_s: float, p_f: float, factor: float = 0.3) -> float:
    return r_s + (1.0 - r_s) * factor * p_f


def frame_keep_count(r_f: float, k: int) -> int:
    """``max(1, round(r_f * k))`` with halves rounded up, capped at ``k``."""
    return min(k, max(1, int(math.floor(round(r_f * k, 9) + 0.5))))


def knn_density(frame_tokens) -> np.ndarray:
    """``exp(-mean squared distance to the k nearest neighbours)``.

    Tokens are L2-normalised first; ``k = max(1, floor(sqrt(K)))``, capped at
    ``K - 1``. A single-token frame has density 1.
    """
    x = as_token_matrix(frame_tokens, "frame").astype(np.float64, copy=False)
    n = x.shape[0]
    if n == 1:
        return np.ones(1)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    unit = np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)
    sq = np.sum(unit**2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * unit @ unit.T, 0.0)
    np.fill_diagonal(d2, np.inf)
    k = min(n - 1, max(1, math.isqrt(n)))
    nearest = np.partition(d2, k - 1, axis=1)[:, :k]
    return np.round(np.exp(-nearest.mean(axis=1)), _TIE_DECIMALS)


def _keep_lowest(scores: np.ndarray, keep: int) -> np.ndarray:
    # Drop the highest scores; among equal scores the lower index survives.
    order = np.lexsort((np.arange(scores.size), scores))
    return np.sort(order[:keep])


def spatial_prune_frame(frame_tokens, keep: int) -> np.ndarray:
    """Keep the ``keep`` least dense tokens of a frame (ascending indices)."""
    density = knn_density(frame_tokens)
    n = density.size
    if keep < 1:
        raise ValueError("keep must be >= 1")
    if keep >= n:
        return np.arange(n)
    return _keep_lowest(density, keep)


def positional_cosine(frame, prev_frame) -> np.ndarray:
    a = np.asarray(frame, dtype=np.float64)
    b = np.asarray(prev_frame, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"frame shapes differ: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    denom = na * nb
    dots = np.einsum("ij,ij->i", a, b)
    cos = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)
    return np.round(np.clip(cos, -1.0, 1.0), _TIE_DECIMALS)


def temporal_prune_frame(frame, prev_frame, keep: int) -> np.ndarray:
    """Keep the ``keep`` tokens least similar to the same slot in ``prev_frame``.

    Without a previous frame this falls back to :func:`spatial_prune_frame`.
    """
    if prev_frame is None:
        return spatial_prune_frame(frame, keep)
    sims = positional_cosine(as_token_matrix(frame, "frame"), as_token_matrix(prev_frame, "frame"))
    if keep < 1:
        raise ValueError("keep must be >= 1")
    if keep >= sims.size:
        return np.arange(sims.size)
    return _keep_lowest(sims, keep)


def segment_frames(segment: tuple[int, int], k: int) -> tuple[int, int]:
    """Frames whose first token falls inside the video interval."""
    lo, hi = segment
    return -(-lo // k), -(-hi // k)


def boundary_frame_strengths(segment_map: SegmentMap, k: int, n_frames: int) -> dict[int, float]:
    """Frame containing each inner boundary plus the frame after it."""
    out: dict[int, float] = {}
    for b, p in zip(segment_map.boundaries[1:-1].tolist(), segment_map.strengths.tolist()):
        f = b // k
        for g in (f, f + 1):
            if g < n_frames:
                out[g] = max(out.get(g, 0.0), float(p))
    return out


def plan_segments(
    segment_map: SegmentMap,
    audio_mask,
    k: int,
    n_frames: int,
    rho_v: float,
    lambda_r: float = 0.1,
    clamp: tuple[float, float] = (0.1, 0.95),
    protection: float = 0.3,
) -> list[SegmentCompressionPlan]:
    bframes = boundary_frame_strengths(segment_map, k, n_frames)
    plans = []
    for seg, arange in zip(segment_map.segments, segment_map.audio_ranges):
        f_lo, f_hi = segment_frames(seg, k)
        m_bar = segment_audio_retention(audio_mask, arange)
        # A zero base ratio means "do not compress video"; the clamp floor
        # would otherwise force 10% pruning.
        rho_s = 0.0 if rho_v <= 0 else adaptive_ratio(rho_v, m_bar, lambda_r, clamp)
        r_s = 1.0 - rho_s
        marks = {f: bframes[f] for f in range(f_lo, f_hi) if f in bframes}
        r_f = np.array(
            [boundary_frame_retention(r_s, marks.get(f, 0.0), protection) for f in range(f_lo, f_hi)]
        )
        keeps = np.array([frame_keep_count(r, k) for r in r_f], dtype=np.int64)
        plans.append(
            SegmentCompressionPlan(
                segment=seg,
                frames=(f_lo, f_hi),
                audio_range=arange,
                audio_retention=m_bar,
                rho_v=rho_s,
                frame_retention=r_f,
                keep_counts=keeps,
                boundary_frames=marks,
            )
        )
    return plans


def compress_segment(video: FrameGrid, plan: SegmentCompressionPlan) -> np.ndarray:
    """Retention mask of shape ``(n_frames_in_segment, K)``.

    Frame parity is the offset within the segment: even offsets are pruned
    spatially, odd offsets temporally against the original previous frame.
    """
    f_lo, f_hi = plan.frames
    k = video.tokens_per_frame
    mask = np.zeros((f_hi - f_lo, k), dtype=bool)
    for off, f in enumerate(range(f_lo, f_hi)):
        keep = int(plan.keep_counts[off])
        frame = video.frame(f)
        if off % 2 == 0:
            kept = spatial_prune_frame(frame, keep)
        else:
            prev = video.frame(f - 1) if f > 0 else None
            kept = temporal_prune_frame(frame, prev, keep)
        mask[off, kept] = True
    return mask


def compress_video(video: FrameGrid, plans: list[SegmentCompressionPlan]) -> np.ndarray:
    """Flat length-``N_v`` mask assembled from per-segment masks."""
    mask = np.zeros((video.frames, video.tokens_per_frame), dtype=bool)
    for plan in plans:
        f_lo, f_hi = plan.frames
        if f_hi > f_lo:
            mask[f_lo:f_hi] = compress_segment(video, plan)
    return mask.reshape(-1)
