"""Command-line front end.

Errors are reported as one JSON line on stderr, e.g.
``{"error": "usage", "message": "..."}``. Exit codes: 0 success, 1 runtime
or input failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .boundary import SimilarityMetric
from .pipeline import DashConfig, load_config, run_sequence, split_windows
from .report import emit_report, write_mask
from .scoring import FusionWeights
from .selftest import run_selftest
from .token_io import DumpFormatError, FrameGrid, read_attention_logits, read_token_dump

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("usage", message)
        sys.exit(EXIT_USAGE)


def _fail(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dashchunk", description="Audio-driven token compression for audio-video token dumps.")
    p.add_argument("--audio", metavar="PATH", help="audio token dump (DSH1, N_a x D)")
    p.add_argument("--attn", metavar="PATH", help="audio attention logits (DSH1, D=1)")
    p.add_argument("--video", metavar="PATH", help="video token dump (DSH1, F*K x D)")
    p.add_argument("--frames", type=int, metavar="F")
    p.add_argument("--tokens-per-frame", type=int, metavar="K")
    p.add_argument("--rho-a", type=float, metavar="R", help="audio compression ratio")
    p.add_argument("--rho-v", type=float, metavar="R", help="video compression ratio")
    p.add_argument("--tau", type=float, metavar="T", help="similarity threshold")
    p.add_argument("--cmin", type=int, metavar="N", help="minimum audio chunk size")
    p.add_argument("--weights", metavar="WB,WU,WA", help="fusion weights")
    p.add_argument("--metric", choices=[m.value for m in SimilarityMetric])
    p.add_argument("--mode", choices=["window", "sequence"])
    p.add_argument("--seed", type=int, metavar="N", help="seed for the random metric")
    p.add_argument("--config", metavar="PATH", help="key-value config document")
    p.add_argument("--out", metavar="PATH", help="JSON report path")
    p.add_argument("--masks-out", metavar="DIR", help="directory for mask dumps")
    p.add_argument("--selftest", action="store_true", help="run the embedded invariant suite")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _config_from_args(args) -> DashConfig:
    cfg = load_config(args.config) if args.config else DashConfig()
    overrides = {
        "rho_a": args.rho_a,
        "rho_v": args.rho_v,
        "tau_a": args.tau,
        "c_min": args.cmin,
        "weights": FusionWeights.parse(args.weights) if args.weights else None,
        "metric": args.metric,
        "mode": args.mode,
        "seed": args.seed,
    }
    return DashConfig.from_mapping({k: v for k, v in overrides.items() if v is not None}, cfg)


def _load_video(args, dim: int) -> FrameGrid | None:
    if not args.video:
        return None
    tokens = read_token_dump(args.video)
    if tokens.shape[1] != dim:
        raise ValueError(f"video dimension {tokens.shape[1]} differs from audio dimension {dim}")
    k = args.tokens_per_frame
    if k is None:
        if not args.frames:
            raise ValueError("--video needs --tokens-per-frame or --frames")
        if tokens.shape[0] % args.frames:
            raise ValueError(f"{tokens.shape[0]} video tokens do not split into {args.frames} frames")
        k = tokens.shape[0] // args.frames
    grid = FrameGrid.from_tokens(tokens, k)
    if args.frames is not None and grid.frames != args.frames:
        raise ValueError(f"video holds {grid.frames} frames of {k} tokens, --frames says {args.frames}")
    return grid


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    if args.selftest:
        return EXIT_OK if run_selftest() else EXIT_FAIL
    if not args.audio or not args.attn:
        parser.error("--audio and --attn are required")
    if args.rho_v is not None and not args.video:
        parser.error("--rho-v requires --video")
    if (args.frames is not None or args.tokens_per_frame is not None) and not args.video:
        parser.error("--frames/--tokens-per-frame require --video")

    try:
        cfg = _config_from_args(args)
    except (OSError, ValueError, TypeError) as exc:
        _fail("config", str(exc))
        return EXIT_FAIL

    try:
        audio = read_token_dump(args.audio)
        attn = read_attention_logits(args.attn, audio.shape[0])
        video = _load_video(args, audio.shape[1])
    except (OSError, DumpFormatError, ValueError) as exc:
        _fail("input", str(exc))
        return EXIT_FAIL

    windows = [(audio, video, attn)] if cfg.mode == "sequence" else split_windows(audio, video, attn, cfg)
    seq = run_sequence(windows, cfg)

    audio_mask = np.concatenate(
        [r.audio_mask if r is not None else np.zeros(len(w[2]), bool) for r, w in zip(seq.results, windows)]
    )
    video_mask = None
    if video is not None:
        video_mask = np.concatenate(
            [r.video_mask if r is not None else np.zeros(w[1].n_tokens, bool) for r, w in zip(seq.results, windows)]
        )

    try:
        if args.out:
            emit_report(seq, args.out, cfg)
        else:
            json.dump(seq.stats.to_dict(), sys.stdout, indent=1)
            print()
        mask_dir = args.masks_out or (os.path.dirname(os.path.abspath(args.out)) if args.out else None)
        if mask_dir:
            os.makedirs(mask_dir, exist_ok=True)
            write_mask(audio_mask, os.path.join(mask_dir, "audio_mask.dsh"))
            if video_mask is not None:
                write_mask(video_mask, os.path.join(mask_dir, "video_mask.dsh"))
    except OSError as exc:
        _fail("output", str(exc))
        return EXIT_FAIL

    if seq.errors:
        i, msg = seq.errors[0]
        _fail("window", f"{len(seq.errors)} window(s) failed; first: window {i}: {msg}")
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
