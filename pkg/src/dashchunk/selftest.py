"""Embedded invariant checks on synthetic data (``dashchunk --selftest``)."""

from __future__ import annotations

import io
import tempfile
import os
from typing import Callable

import numpy as np

from .boundary import adjacent_similarity, boundary_profile, detect_boundaries
from .pipeline import DashConfig, run_window
from .scoring import FusionWeights, fuse_and_select, keep_count, top_k_mask
from .token_io import (
    FrameGrid,
    SyntheticSpec,
    generate_piecewise,
    read_token_dump,
    write_token_dump,
)
from .video_compress import adaptive_ratio, boundary_frame_retention

__all__ = ["random_window", "CHECKS", "run_selftest"]


def random_window(rng: np.random.Generator, n_a=(2, 120), d=(4, 32), k=(4, 16), frames=(2, 8)):
    """Piecewise audio plus random video and heavy-tailed attention."""
    n = int(rng.integers(n_a[0], n_a[1] + 1))
    dim = int(rng.integers(d[0], d[1] + 1))
    kk = int(rng.integers(k[0], k[1] + 1))
    f = int(rng.integers(frames[0], frames[1] + 1))
    cuts = np.sort(rng.choice(np.arange(1, n), size=min(n - 1, int(rng.integers(0, 4))), replace=False)) if n > 1 else []
    lengths = np.diff(np.concatenate([[0], cuts, [n]])).astype(int).tolist()
    audio, _ = generate_piecewise(
        SyntheticSpec(lengths, float(rng.uniform(-0.5, 0.9)), float(rng.uniform(0, 0.3)), dim, int(rng.integers(1 << 31)))
    )
    video = FrameGrid(rng.standard_normal((f * kk, dim)).astype(np.float32), f, kk)
    attn = rng.standard_exponential(n) ** 3
    return audio, video, attn


def _check_gap_law(rng):
    audio, _, _ = random_window(rng)
    c_min = int(rng.integers(1, 20))
    prof = boundary_profile(audio)
    pos = detect_boundaries(prof.sims, prof.probs, float(rng.uniform(-0.5, 0.95)), c_min).positions
    return bool(np.all(np.diff(pos[:-1]) >= c_min))


def _check_segments(rng):
    audio, video, attn = random_window(rng)
    cfg = DashConfig(c_min=int(rng.integers(1, 10)), tau_a=0.6)
    r = run_window(audio, video, attn, cfg)
    return bool(np.all(r.segment_map.segment_lengths() >= 2 * video.tokens_per_frame))


def _check_popcount(rng):
    audio, video, attn = random_window(rng)
    rho = float(rng.uniform(0, 0.99))
    r = run_window(audio, video, attn, DashConfig(rho_a=rho))
    return int(r.audio_mask.sum()) == max(1, keep_count(len(attn), rho))


def _check_clamp(rng):
    rho = adaptive_ratio(float(rng.uniform(0, 1)), float(rng.uniform(0, 1)), float(rng.uniform(0, 5)))
    return 0.1 <= rho <= 0.95


def _check_protection(rng):
    r_s, p = float(rng.uniform(0, 1)), float(rng.uniform(0, 1))
    return boundary_frame_retention(r_s, p) >= r_s


def _check_scale_invariance(rng):
    audio, _, _ = random_window(rng)
    scaled = audio.astype(np.float64) * rng.uniform(0.1, 10.0, size=(audio.shape[0], 1))
    a, b = adjacent_similarity(audio), adjacent_similarity(scaled)
    return bool(np.allclose(a, b, atol=1e-6))


def _check_degenerate_weights(rng):
    n = int(rng.integers(2, 200))
    s = rng.uniform(size=(3, n))
    _, ret, _ = fuse_and_select(*s, FusionWeights(0, 0, 1), float(rng.uniform(0, 0.99)))
    return bool(np.array_equal(ret.mask, top_k_mask(s[2], ret.kept_count)))


def _check_determinism(rng):
    audio, video, attn = random_window(rng)
    a = run_window(audio, video, attn)
    b = run_window(audio, video, attn)
    return bool(np.array_equal(a.audio_mask, b.audio_mask) and np.array_equal(a.video_mask, b.video_mask))


def _check_round_trip(rng):
    m = rng.standard_normal((int(rng.integers(1, 20)), int(rng.integers(1, 20)))).astype(np.float32)
    with tempfile.TemporaryDirectory() as tmp:
        p = os.path.join(tmp, "m.dsh")
        write_token_dump(m, p)
        raw = open(p, "rb").read()
        write_token_dump(read_token_dump(p), p)
        return raw == open(p, "rb").read()


def _check_recovery(rng):
    lengths = rng.integers(30, 80, size=int(rng.integers(2, 5))).tolist()
    audio, truth = generate_piecewise(SyntheticSpec(lengths, 0.1, 0.05, 64, int(rng.integers(1 << 31))))
    prof = boundary_profile(audio)
    found = detect_boundaries(prof.sims, prof.probs, 0.4, 30).inner.tolist()
    return found == truth[1:]


CHECKS: dict[str, tuple[Callable[[np.random.Generator], bool], int]] = {
    "dsh1 round trip": (_check_round_trip, 50),
    "gap law": (_check_gap_law, 200),
    "segments >= 2K": (_check_segments, 100),
    "popcount law": (_check_popcount, 100),
    "adaptive ratio clamp": (_check_clamp, 500),
    "boundary protection r_f >= r_s": (_check_protection, 500),
    "cosine scale invariance": (_check_scale_invariance, 200),
    "attention-only weights": (_check_degenerate_weights, 200),
    "determinism": (_check_determinism, 50),
    "synthetic boundary recovery": (_check_recovery, 50),
}


def run_selftest(out: io.TextIOBase | None = None, seed: int = 0) -> bool:
    """Run every check, printing one PASS/FAIL line each; True if all pass."""
    import sys

    out = out or sys.stdout
    ok_all = True
    for name, (fn, count) in CHECKS.items():
        rng = np.random.default_rng(seed)
        failed = next((i for i in range(count) if not fn(rng)), None)
        if failed is None:
            print(f"PASS {name} ({count} instances)", file=out)
        else:
            ok_all = False
            print(f"FAIL {name} (instance {failed})", file=out)
    return ok_all
