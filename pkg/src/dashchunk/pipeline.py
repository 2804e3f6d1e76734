"""End-to-end compression of audio/video token windows.

The four stages run in a fixed order for every window:

1. boundary detection on the audio tokens,
2. projection of audio boundaries onto video indices plus refinement,
3. tri-signal scoring and top-k audio selection,
4. per-segment video compression.

Windows are independent. ``mode="window"`` splits a stream into model time
windows before running; ``mode="sequence"`` treats the stream as one window.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from .boundary import (
    BoundaryProfile,
    BoundarySet,
    SimilarityMetric,
    boundary_profile,
    detect_boundaries,
)
from .projection import ProjectedBoundaries, SegmentMap, project_boundaries, refine_boundaries
from .scoring import (
    AudioRetention,
    FusionWeights,
    ImportanceScores,
    Turnover,
    attention_signal,
    boundary_signal,
    fuse_and_select,
    multiscale_uniqueness,
    select_low_variance_channels,
)
from .token_io import FrameGrid, as_attention_logits, as_token_matrix
from .video_compress import SegmentCompressionPlan, compress_video, plan_segments

__all__ = [
    "DashConfig",
    "DashResult",
    "RetentionStats",
    "SequenceResult",
    "StageError",
    "load_config",
    "detect_audio_boundaries",
    "score_audio",
    "run_window",
    "split_windows",
    "run_sequence",
    "run_stream",
    "compute_stats",
]

log = logging.getLogger(__name__)

STAGES = ("boundary", "projection", "scoring", "video")


class StageError(RuntimeError):
    """An error raised inside one pipeline stage."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage} stage failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class DashConfig:
    tau_a: float = 0.4
    c_min: int = 30
    weights: FusionWeights = FusionWeights()
    bandwidths: tuple[float, ...] = (0.125, 0.25, 0.5, 1.0, 2.0)
    channel_ratio: float = 0.5
    lambda_r: float = 0.1
    clamp: tuple[float, float] = (0.1, 0.95)
    protection_factor: float = 0.3
    rho_a: float = 0.75
    rho_v: float = 0.75
    epsilon: float = 1e-8
    metric: SimilarityMetric = SimilarityMetric.COSINE
    seed: int = 0
    mode: str = "window"
    window_audio: int = 50
    window_video: int = 288

    def __post_init__(self):
        if isinstance(self.weights, str):
            object.__setattr__(self, "weights", FusionWeights.parse(self.weights))
        elif isinstance(self.weights, Mapping):
            object.__setattr__(self, "weights", FusionWeights(**self.weights))
        elif not isinstance(self.weights, FusionWeights):
            object.__setattr__(self, "weights", FusionWeights(*self.weights))
        object.__setattr__(self, "metric", SimilarityMetric.parse(self.metric))
        object.__setattr__(self, "bandwidths", tuple(float(a) for a in self.bandwidths))
        object.__setattr__(self, "clamp", tuple(float(c) for c in self.clamp))
        if not -1.0 < self.tau_a < 1.0:
            raise ValueError(f"tau_a must lie in (-1, 1), got {self.tau_a}")
        if int(self.c_min) != self.c_min or self.c_min < 1:
            raise ValueError(f"c_min must be a positive integer, got {self.c_min}")
        for name in ("rho_a", "rho_v"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {v}")
        if not self.bandwidths or any(a <= 0 for a in self.bandwidths):
            raise ValueError("bandwidths must be a non-empty set of positive values")
        if not 0.0 < self.channel_ratio <= 1.0:
            raise ValueError("channel_ratio must lie in (0, 1]")
        lo, hi = self.clamp
        if len(self.clamp) != 2 or not 0.0 <= lo <= hi < 1.0:
            raise ValueError(f"clamp must be an interval inside [0, 1), got {self.clamp}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.mode not in ("window", "sequence"):
            raise ValueError(f"mode must be 'window' or 'sequence', got {self.mode!r}")
        if self.window_audio < 1 or self.window_video < 1:
            raise ValueError("window sizes must be >= 1")

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any], base: "DashConfig | None" = None) -> "DashConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValueError(f"unknown config key(s): {', '.join(unknown)}")
        return dataclasses.replace(base or cls(), **dict(values))

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, FusionWeights):
                v = list(v.as_tuple())
            elif isinstance(v, SimilarityMetric):
                v = v.value
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out


def load_config(path, base: DashConfig | None = None) -> DashConfig:
    """Read a ``key: value`` document whose keys are :class:`DashConfig` fields."""
    with open(path) as fh:
        values = yaml.safe_load(fh) or {}
    if not isinstance(values, Mapping):
        raise ValueError(f"{path}: config must be a key-value mapping")
    return DashConfig.from_mapping(values, base)


@dataclass
class DashResult:
    audio_mask: np.ndarray
    video_mask: np.ndarray | None
    profile: BoundaryProfile
    audio_boundaries: BoundarySet
    projected: ProjectedBoundaries | None
    segment_map: SegmentMap | None
    plans: list[SegmentCompressionPlan]
    scores: ImportanceScores
    retention: AudioRetention
    turnover: Turnover
    fallback: bool
    tokens_per_frame: int | None
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def n_a(self) -> int:
        return int(self.audio_mask.size)

    @property
    def n_v(self) -> int:
        return 0 if self.video_mask is None else int(self.video_mask.size)


def _run_stage(name: str, timings: dict, fn, *args):
    t0 = time.perf_counter()
    try:
        return fn(*args)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0


def detect_audio_boundaries(audio, cfg: DashConfig = DashConfig()) -> tuple[BoundaryProfile, BoundarySet]:
    """Stage 1: similarity profile and detected audio boundaries."""
    prof = boundary_profile(audio, cfg.metric, cfg.seed)
    return prof, detect_boundaries(prof.sims, prof.probs, cfg.tau_a, cfg.c_min)


def score_audio(
    audio, profile: BoundaryProfile, attn, cfg: DashConfig = DashConfig(), fallback: bool = False
) -> tuple[ImportanceScores, AudioRetention, Turnover]:
    """Stage 3: tri-signal scores and the audio retention mask."""
    s_bnd = boundary_signal(profile.probs, cfg.epsilon)
    selected = select_low_variance_channels(audio, cfg.channel_ratio)
    s_uniq = multiscale_uniqueness(selected, cfg.bandwidths, cfg.epsilon)
    s_attn = attention_signal(attn, cfg.epsilon)
    return fuse_and_select(s_bnd, s_uniq, s_attn, cfg.weights, cfg.rho_a, fallback)


def run_window(audio, video: FrameGrid | None, attn, cfg: DashConfig = DashConfig()) -> DashResult:
    """Compress one window; ``video=None`` runs the audio stages only."""
    audio = as_token_matrix(audio, "audio").astype(np.float64, copy=False)
    n_a = audio.shape[0]
    attn = as_attention_logits(attn, n_a)
    timings: dict[str, float] = {}
    fallback = n_a < 2

    profile, bset = _run_stage("boundary", timings, detect_audio_boundaries, audio, cfg)

    projected = segment_map = None
    if video is not None:
        def stage_projection():
            raw = project_boundaries(bset, n_a, video.n_tokens)
            return raw, refine_boundaries(raw, video.tokens_per_frame)

        projected, segment_map = _run_stage("projection", timings, stage_projection)

    scores, retention, turn = _run_stage(
        "scoring", timings, score_audio, audio, profile, attn, cfg, fallback
    )

    plans: list[SegmentCompressionPlan] = []
    video_mask = None
    if video is not None:
        def stage_video():
            p = plan_segments(
                segment_map,
                retention.mask,
                video.tokens_per_frame,
                video.frames,
                cfg.rho_v,
                cfg.lambda_r,
                cfg.clamp,
                cfg.protection_factor,
            )
            return p, compress_video(video, p)

        plans, video_mask = _run_stage("video", timings, stage_video)

    return DashResult(
        audio_mask=retention.mask,
        video_mask=video_mask,
        profile=profile,
        audio_boundaries=bset,
        projected=projected,
        segment_map=segment_map,
        plans=plans,
        scores=scores,
        retention=retention,
        turnover=turn,
        fallback=fallback,
        tokens_per_frame=None if video is None else video.tokens_per_frame,
        timings=timings,
    )


Window = tuple  # (audio, FrameGrid | None, attn)


def split_windows(audio, video: FrameGrid | None, attn, cfg: DashConfig = DashConfig()) -> list[Window]:
    """Cut a stream into model time windows.

    The window count is ``ceil(N_a / window_audio)`` (never more than the
    frame count). Audio and whole frames are split into that many contiguous,
    near-equal chunks, which reproduces exact windows when the stream is a
    whole number of ``window_audio`` / ``window_video`` blocks.
    """
    audio = as_token_matrix(audio, "audio")
    attn = as_attention_logits(attn, audio.shape[0])
    n_win = math.ceil(audio.shape[0] / cfg.window_audio)
    if video is not None:
        n_win = max(1, min(n_win, video.frames))
    a_parts = np.array_split(np.arange(audio.shape[0]), n_win)
    windows = []
    if video is None:
        for idx in a_parts:
            windows.append((audio[idx], None, attn[idx]))
        return windows
    f_parts = np.array_split(np.arange(video.frames), n_win)
    k = video.tokens_per_frame
    for idx, frames in zip(a_parts, f_parts):
        sub = video.tokens[frames[0] * k : (frames[-1] + 1) * k]
        windows.append((audio[idx], FrameGrid(sub, len(frames), k), attn[idx]))
    return windows


@dataclass
class RetentionStats:
    audio_kept: int
    audio_total: int
    video_kept: int
    video_total: int
    stage_seconds: dict[str, float]
    turnover: dict[str, int]
    segment_count: int
    segment_length_mean: float
    segment_length_std: float

    @property
    def audio_retention(self) -> float:
        return self.audio_kept / self.audio_total if self.audio_total else 0.0

    @property
    def video_retention(self) -> float:
        return self.video_kept / self.video_total if self.video_total else 0.0

    @property
    def overall_retention(self) -> float:
        total = self.audio_total + self.video_total
        return (self.audio_kept + self.video_kept) / total if total else 0.0

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["audio_retention"] = self.audio_retention
        d["video_retention"] = self.video_retention
        d["overall_retention"] = self.overall_retention
        return d


def compute_stats(results: DashResult | Sequence[DashResult | None]) -> RetentionStats:
    """Realised retention, stage times, turnover and segment-length spread.

    Segment lengths are refined video segments (tokens) when video is
    present, audio segments otherwise; the spread is the population standard
    deviation. Failed windows (``None``) are skipped.
    """
    if isinstance(results, DashResult):
        results = [results]
    results = [r for r in results if r is not None]
    stage = {s: 0.0 for s in STAGES}
    turn = {"rescued": 0, "shared": 0, "replaced": 0}
    lengths: list[int] = []
    a_kept = a_tot = v_kept = v_tot = 0
    for r in results:
        a_kept += int(r.audio_mask.sum())
        a_tot += r.n_a
        if r.video_mask is not None:
            v_kept += int(r.video_mask.sum())
            v_tot += r.n_v
        for k, v in r.timings.items():
            stage[k] = stage.get(k, 0.0) + v
        for k, v in r.turnover.counts.items():
            turn[k] += v
        if r.segment_map is not None:
            lengths.extend(r.segment_map.segment_lengths().tolist())
        else:
            lengths.extend(r.audio_boundaries.segment_lengths().tolist())
    arr = np.asarray(lengths, dtype=np.float64)
    return RetentionStats(
        audio_kept=a_kept,
        audio_total=a_tot,
        video_kept=v_kept,
        video_total=v_tot,
        stage_seconds=stage,
        turnover=turn,
        segment_count=int(arr.size),
        segment_length_mean=float(arr.mean()) if arr.size else 0.0,
        segment_length_std=float(arr.std()) if arr.size else 0.0,
    )


@dataclass
class SequenceResult:
    results: list[DashResult | None]
    errors: list[tuple[int, str]]
    stats: RetentionStats


def run_sequence(
    windows: Sequence[Window], cfg: DashConfig = DashConfig(), workers: int = 1
) -> SequenceResult:
    """Run every window independently; a failing window does not stop the rest.

    Results keep input order. Failed windows leave ``None`` in ``results`` and
    an ``(index, message)`` entry in ``errors``.
    """

    def one(item):
        i, (audio, video, attn) = item
        try:
            return run_window(audio, video, attn, cfg), None
        except Exception as exc:  # reported per window
            log.warning("window %d failed: %s", i, exc)
            return None, (i, str(exc))

    items = list(enumerate(windows))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, items))
    else:
        outcomes = [one(it) for it in items]
    results = [res for res, _ in outcomes]
    errors = [err for _, err in outcomes if err is not None]
    return SequenceResult(results, errors, compute_stats(results))


def run_stream(audio, video: FrameGrid | None, attn, cfg: DashConfig = DashConfig(), workers: int = 1) -> SequenceResult:
    """Run a whole stream in the configured mode."""
    if cfg.mode == "sequence":
        windows = [(audio, video, attn)]
    else:
        windows = split_windows(audio, video, attn, cfg)
    return run_sequence(windows, cfg, workers)
