"""JSON reports with figure-ready diagnostics, and DSH1 mask files."""

from __future__ import annotations

import json
import os
from functools import lru_cache
from importlib import resources
from typing import Any, Sequence

import jsonschema
import numpy as np

from .pipeline import DashConfig, DashResult, SequenceResult, compute_stats
from .token_io import write_token_dump

__all__ = [
    "REPORT_FORMAT",
    "report_schema",
    "window_bundle",
    "build_report",
    "validate_report",
    "emit_report",
    "load_report",
    "write_mask",
]

REPORT_FORMAT = "dashchunk-report/1"


@lru_cache(maxsize=1)
def report_schema() -> dict:
    text = resources.files("dashchunk").joinpath("report_schema.json").read_text()
    return json.loads(text)


def _ints(a) -> list[int]:
    return [int(v) for v in np.asarray(a).ravel()]


def _reals(a) -> list[float]:
    return [float(v) for v in np.asarray(a, dtype=np.float64).ravel()]


def _bits(mask) -> list[int]:
    return [1 if v else 0 for v in np.asarray(mask, dtype=bool)]


def window_bundle(result: DashResult, index: int = 0, tau: float | None = None) -> dict[str, Any]:
    """Diagnostics for one window: boundary curve, signals, selection, segments."""
    n_a = result.n_a
    detected = np.zeros(n_a, dtype=bool)
    detected[result.audio_boundaries.inner] = True
    t = result.turnover
    keep_any = np.zeros(n_a, dtype=bool)
    for idx in (t.rescued, t.shared, t.replaced):
        keep_any[idx] = True
    segments = None
    sm = result.segment_map
    if sm is not None:
        segments = {
            "boundaries": _ints(sm.boundaries),
            "strengths": _reals(sm.strengths),
            "lengths": _ints(sm.segment_lengths()),
            "audio_ranges": [[int(lo), int(hi)] for lo, hi in sm.audio_ranges],
            "plans": [
                {
                    "segment": _ints(p.segment),
                    "frames": _ints(p.frames),
                    "audio_range": _ints(p.audio_range),
                    "audio_retention": float(p.audio_retention),
                    "rho_v": float(p.rho_v),
                    "frame_retention": _reals(p.frame_retention),
                    "keep_counts": _ints(p.keep_counts),
                    "boundary_frames": [
                        {"frame": int(f), "strength": float(s)}
                        for f, s in sorted(p.boundary_frames.items())
                    ],
                }
                for p in result.plans
            ],
        }
    return {
        "index": int(index),
        "n_audio": n_a,
        "n_video": result.n_v,
        "tokens_per_frame": result.tokens_per_frame,
        "fallback": bool(result.fallback),
        "boundary_curve": {
            "t": list(range(n_a)),
            "similarity": _reals(result.profile.sims),
            "probability": _reals(result.profile.probs),
            "detected": [bool(v) for v in detected],
            "tau": float(tau) if tau is not None else 0.4,
        },
        "audio_boundaries": {
            "positions": _ints(result.audio_boundaries.positions),
            "strengths": _reals(result.audio_boundaries.strengths),
        },
        "scores": {
            "boundary": _reals(result.scores.s_bnd),
            "uniqueness": _reals(result.scores.s_uniq),
            "attention": _reals(result.scores.s_attn),
            "fused": _reals(result.scores.fused),
        },
        "selection": {
            "rescued": _ints(t.rescued),
            "shared": _ints(t.shared),
            "replaced": _ints(t.replaced),
            "dropped": _ints(np.flatnonzero(~keep_any)),
        },
        "segments": segments,
        "masks": {
            "audio": _bits(result.audio_mask),
            "video": None if result.video_mask is None else _bits(result.video_mask),
        },
        "timings": {k: float(v) for k, v in sorted(result.timings.items())},
    }


def build_report(
    results: DashResult | SequenceResult | Sequence[DashResult | None],
    cfg: DashConfig | None = None,
) -> dict[str, Any]:
    cfg = cfg or DashConfig()
    errors: list = []
    if isinstance(results, DashResult):
        windows = [results]
    elif isinstance(results, SequenceResult):
        windows = results.results
        errors = results.errors
    else:
        windows = list(results)
    stats = compute_stats(windows)
    return {
        "format": REPORT_FORMAT,
        "config": cfg.to_dict(),
        "stats": stats.to_dict(),
        "errors": [{"window": int(i), "message": str(m)} for i, m in errors],
        "windows": [
            None if r is None else window_bundle(r, i, cfg.tau_a) for i, r in enumerate(windows)
        ],
    }


def validate_report(doc: dict) -> None:
    """Raise :class:`jsonschema.ValidationError` unless ``doc`` fits the schema.

    Beyond the schema, the selection lists of each window must be disjoint
    and, together with ``dropped``, cover every audio index.
    """
    jsonschema.validate(doc, report_schema())
    for w in doc["windows"]:
        if w is None:
            continue
        sel = w["selection"]
        parts = [set(sel[k]) for k in ("rescued", "shared", "replaced", "dropped")]
        if sum(len(p) for p in parts) != w["n_audio"] or set().union(*parts) != set(range(w["n_audio"])):
            raise jsonschema.ValidationError(
                f"window {w['index']}: selection lists do not partition the audio indices"
            )


def emit_report(results, path: str | os.PathLike, cfg: DashConfig | None = None) -> dict[str, Any]:
    """Build, validate and write the report; returns the document."""
    doc = build_report(results, cfg)
    validate_report(doc)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    return doc


def load_report(path: str | os.PathLike) -> dict[str, Any]:
    with open(path) as fh:
        doc = json.load(fh)
    validate_report(doc)
    return doc


def write_mask(mask, path: str | os.PathLike) -> None:
    """Mask as a DSH1 column (``D = 1``) of 0.0/1.0 values."""
    write_token_dump(np.asarray(mask, dtype=np.float32).reshape(-1, 1), path)
