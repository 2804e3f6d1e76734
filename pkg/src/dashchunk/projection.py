"""Audio-to-video boundary projection and strength-ordered refinement."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from .boundary import BoundarySet

__all__ = [
    "ProjectedBoundaries",
    "SegmentMap",
    "project_boundaries",
    "refine_boundaries",
    "audio_range_of_segment",
]


@dataclass(frozen=True)
class ProjectedBoundaries:
    """Sorted, deduplicated video boundaries ``[0, ..., n_v]``.

    ``strengths`` covers the inner positions only. ``n_a`` is the audio length
    the boundaries came from (defaults to ``n_v`` when built by hand).
    """

    positions: np.ndarray
    strengths: np.ndarray
    n_v: int
    n_a: int | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.int64)
        st = np.asarray(self.strengths, dtype=np.float64)
        if pos.size < 2 or pos[0] != 0 or pos[-1] != self.n_v:
            raise ValueError("positions must start at 0 and end at n_v")
        if np.any(np.diff(pos) <= 0):
            raise ValueError("positions must be strictly increasing")
        if st.shape != (pos.size - 2,):
            raise ValueError("need one strength per inner position")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "strengths", st)
        if self.n_a is None:
            object.__setattr__(self, "n_a", self.n_v)


@dataclass(frozen=True)
class SegmentMap:
    """Refined video segmentation.

    ``boundaries`` are video token indices ``[0, ..., n_v]``; ``strengths``
    belong to the inner boundaries and ``audio_ranges[s]`` is the half-open
    audio interval paired with video segment ``s``.
    """

    boundaries: np.ndarray
    strengths: np.ndarray
    n_a: int
    n_v: int
    audio_ranges: list = field(default_factory=list)

    @property
    def segments(self) -> list[tuple[int, int]]:
        b = self.boundaries.tolist()
        return list(zip(b[:-1], b[1:]))

    def segment_lengths(self) -> np.ndarray:
        return np.diff(self.boundaries)

    def as_projected(self) -> ProjectedBoundaries:
        return ProjectedBoundaries(self.boundaries, self.strengths, self.n_v, self.n_a)


def project_boundaries(audio_set: BoundarySet, n_a: int, n_v: int) -> ProjectedBoundaries:
    """Map audio boundaries to video indices by ``floor(b * n_v / n_a)``.

    Collisions keep the larger strength; inner boundaries that land on 0 or
    ``n_v`` merge into the sentinels.
    """
    if n_a < 1 or n_v < 1:
        raise ValueError("n_a and n_v must be >= 1")
    best: dict[int, float] = {}
    for b, s in zip(audio_set.inner.tolist(), audio_set.strengths.tolist()):
        v = min(max((int(b) * n_v) // n_a, 0), n_v)
        if v == 0 or v == n_v:
            continue
        if v not in best or s > best[v]:
            best[v] = float(s)
    inner = sorted(best)
    return ProjectedBoundaries(
        positions=np.array([0, *inner, n_v], dtype=np.int64),
        strengths=np.array([best[v] for v in inner], dtype=np.float64),
        n_v=n_v,
        n_a=n_a,
    )


def audio_range_of_segment(segment: tuple[int, int], n_a: int, n_v: int) -> tuple[int, int]:
    """Inverse ratio map of a video interval back to audio indices."""
    lo_v, hi_v = int(segment[0]), int(segment[1])
    if not 0 <= lo_v <= hi_v <= n_v:
        raise ValueError(f"segment {segment} is outside [0, {n_v}]")
    lo_a = (lo_v * n_a) // n_v
    hi_a = n_a if hi_v == n_v else (hi_v * n_a) // n_v
    return lo_a, hi_a


def refine_boundaries(raw: ProjectedBoundaries, k: int) -> SegmentMap:
    """Greedy strength-ordered insertion keeping every segment >= ``2 * k``.

    Candidates are visited by descending strength (ties: smaller index
    first) and accepted when both neighbouring gaps in the current set are
    at least ``2 * k`` tokens.
    """
    if k < 1:
        raise ValueError("tokens per frame must be >= 1")
    n_v = raw.n_v
    min_len = 2 * k
    accepted = [0, n_v]
    strength_of: dict[int, float] = {}
    inner = raw.positions[1:-1].tolist()
    order = sorted(range(len(inner)), key=lambda i: (-raw.strengths[i], inner[i]))
    for i in order:
        b = inner[i]
        j = bisect.bisect_left(accepted, b)
        if b - accepted[j - 1] >= min_len and accepted[j] - b >= min_len:
            accepted.insert(j, b)
            strength_of[b] = float(raw.strengths[i])
    boundaries = np.array(accepted, dtype=np.int64)
    strengths = np.array([strength_of[b] for b in accepted[1:-1]], dtype=np.float64)
    ranges = [
        audio_range_of_segment(seg, raw.n_a, n_v) for seg in zip(accepted[:-1], accepted[1:])
    ]
    return SegmentMap(boundaries, strengths, raw.n_a, n_v, ranges)
