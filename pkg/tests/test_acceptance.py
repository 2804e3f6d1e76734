"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line with the measured numbers
(visible with ``pytest -s``, or run this file directly with Python).
Instances are drawn from fixed seeds so the numbers are reproducible.
"""

import json
import math
import statistics
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
import oracles  # noqa: E402

from dashchunk.boundary import boundary_profile, detect_boundaries  # noqa: E402
from dashchunk.cli import main as cli_main  # noqa: E402
from dashchunk.pipeline import (  # noqa: E402
    DashConfig,
    detect_audio_boundaries,
    run_sequence,
    run_stream,
    run_window,
    score_audio,
)
from dashchunk.projection import ProjectedBoundaries, refine_boundaries  # noqa: E402
from dashchunk.scoring import FusionWeights, fuse_and_select, keep_count, top_k_mask  # noqa: E402
from dashchunk.token_io import (  # noqa: E402
    FrameGrid,
    SyntheticSpec,
    generate_piecewise,
    write_attention_logits,
    write_token_dump,
)
from dashchunk.video_compress import (  # noqa: E402
    adaptive_ratio,
    boundary_frame_retention,
    spatial_prune_frame,
    temporal_prune_frame,
)

N_INSTANCES = 1000


def report(criterion, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    capman = _CAPTURE.get("capman")
    if capman is not None:
        with capman.global_and_fixture_disabled():
            print(line, flush=True)
    else:
        print(line, flush=True)
    assert ok, line


_CAPTURE = {}


@pytest.fixture(autouse=True)
def _uncaptured(request):
    _CAPTURE["capman"] = request.config.pluginmanager.getplugin("capturemanager")
    yield
    _CAPTURE.clear()


# ---------------------------------------------------------------- helpers


def random_instance(rng, n_a=(2, 500), d=(4, 64), k=(4, 32), frames=(2, 12)):
    """Piecewise audio with random cut points, random video, skewed attention."""
    n = int(rng.integers(n_a[0], n_a[1] + 1))
    dim = int(rng.integers(d[0], d[1] + 1))
    kk = int(rng.integers(k[0], k[1] + 1))
    f = int(rng.integers(frames[0], frames[1] + 1))
    n_cuts = min(n - 1, int(rng.integers(0, 8)))
    cuts = np.sort(rng.choice(np.arange(1, n), size=n_cuts, replace=False)) if n_cuts else np.array([], int)
    lengths = np.diff(np.concatenate([[0], cuts, [n]])).astype(int).tolist()
    audio, _ = generate_piecewise(
        SyntheticSpec(lengths, float(rng.uniform(-0.8, 0.9)), float(rng.uniform(0, 0.4)), dim, int(rng.integers(1 << 31)))
    )
    video = FrameGrid(rng.standard_normal((f * kk, dim)).astype(np.float32), f, kk)
    attn = rng.standard_normal(n) * rng.uniform(0.1, 5)
    cfg = DashConfig(
        tau_a=float(rng.uniform(-0.5, 0.95)),
        c_min=int(rng.integers(1, 41)),
        rho_a=float(rng.uniform(0, 0.99)),
        rho_v=float(rng.uniform(0, 0.99)),
    )
    return audio, video, attn, cfg


def masks_equal(a, b):
    return np.array_equal(a.audio_mask, b.audio_mask) and np.array_equal(a.video_mask, b.video_mask)


def recall_within_one(found, truth):
    if not truth:
        return 1.0
    return sum(any(abs(f - t) <= 1 for f in found) for t in truth) / len(truth)


def recovery_stream(seed):
    """Stream in the recovery regime: lengths >= 30, noise <= 0.05, cosine <= 0.2."""
    rng = np.random.default_rng(10_000 + seed)
    lengths = rng.integers(30, 90, size=int(rng.integers(2, 8))).tolist()
    spec = SyntheticSpec(
        lengths,
        inter_segment_cosine=float(rng.uniform(-0.5, 0.2)),
        noise_scale=float(rng.uniform(0, 0.05)),
        dim=int(rng.integers(16, 129)),
        seed=seed,
    )
    return generate_piecewise(spec)


# ---------------------------------------------------------------- criterion 1


def test_invariant_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    windows, cfgs = [], []
    for _ in range(N_INSTANCES):
        audio, video, attn, cfg = random_instance(rng)
        windows.append((audio, video, attn))
        cfgs.append(cfg)

    counts = dict.fromkeys(
        [
            "gap law",
            "segments >= 2K",
            "popcount law",
            "clamp range",
            "r_f >= r_s",
            "cosine scale invariance",
            "degenerate weights",
            "determinism",
            "window independence",
        ],
        0,
    )
    failures = {name: 0 for name in counts}

    def check(name, ok):
        counts[name] += 1
        failures[name] += not ok

    first = []
    for (audio, video, attn), cfg in zip(windows, cfgs):
        r = run_window(audio, video, attn, cfg)
        first.append(r)
        n_a, k = len(attn), video.tokens_per_frame

        pos = r.audio_boundaries.positions
        check("gap law", pos[0] == 0 and pos[-1] == n_a and bool(np.all(np.diff(pos[:-1]) >= cfg.c_min)))
        lengths = r.segment_map.segment_lengths()
        check("segments >= 2K", bool(np.all(lengths >= 2 * k)) or video.n_tokens < 2 * k)
        check("popcount law", int(r.audio_mask.sum()) == max(1, keep_count(n_a, cfg.rho_a)))
        check(
            "clamp range",
            all(cfg.rho_v <= 0 or cfg.clamp[0] <= p.rho_v <= cfg.clamp[1] for p in r.plans),
        )
        check(
            "r_f >= r_s",
            all(bool(np.all(p.frame_retention >= 1 - p.rho_v)) for p in r.plans),
        )

        scaled = audio.astype(np.float64) * rng.uniform(1e-3, 1e3, size=(n_a, 1))
        pa, pb = boundary_profile(audio), boundary_profile(scaled)
        same = np.allclose(pa.sims, pb.sims, rtol=0, atol=1e-9)
        da = detect_boundaries(pa.sims, pa.probs, cfg.tau_a, cfg.c_min).positions
        db = detect_boundaries(pb.sims, pb.probs, cfg.tau_a, cfg.c_min).positions
        check("cosine scale invariance", same and np.array_equal(da, db))

        s = r.scores
        ok = True
        for axis, signal in enumerate((s.s_bnd, s.s_uniq, s.s_attn)):
            w = [0.0, 0.0, 0.0]
            w[axis] = 1.0
            _, ret, _ = fuse_and_select(s.s_bnd, s.s_uniq, s.s_attn, FusionWeights(*w), cfg.rho_a)
            ok &= np.array_equal(ret.mask, top_k_mask(signal, ret.kept_count))
            ok &= bool(np.argmax(np.where(ret.mask, signal, -np.inf)) == np.argmax(signal))
        check("degenerate weights", ok)

        again = run_window(audio, video, attn, cfg)
        check(
            "determinism",
            masks_equal(r, again) and r.scores.fused.tobytes() == again.scores.fused.tobytes(),
        )

    # scalar draws for the two ratio laws, on top of the per-plan checks
    for _ in range(N_INSTANCES):
        rho, m, lam = rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 5)
        check("clamp range", 0.1 <= adaptive_ratio(rho, m, lam) <= 0.95)
        r_s, p = rng.uniform(0, 1), rng.uniform(0, 1)
        check("r_f >= r_s", boundary_frame_retention(r_s, p) >= r_s)

    # window independence: batches of windows under a common config, shuffled
    for b in range(N_INSTANCES // 4):
        idx = rng.choice(N_INSTANCES, size=4, replace=False)
        cfg = cfgs[idx[0]]
        batch = [windows[i] for i in idx]
        perm = rng.permutation(4)
        base = run_sequence(batch, cfg, workers=2 if b % 2 else 1).results
        shuffled = run_sequence([batch[i] for i in perm], cfg).results
        for j, i in enumerate(perm):
            check("window independence", masks_equal(base[i], shuffled[j]))

    elapsed = time.perf_counter() - t0
    worst = min(counts.values())
    bad = {k: v for k, v in failures.items() if v}
    ok = not bad and worst >= N_INSTANCES and elapsed < 120
    report(
        1,
        ok,
        f"{len(counts)} invariants, >= {worst} instances each, failures={bad or 0}, {elapsed:.1f}s (limit 120s)",
    )


# ---------------------------------------------------------------- criterion 2


def test_oracle_equivalence():
    rng = np.random.default_rng(7)
    mism = dict.fromkeys(["detect_boundaries", "top-k", "spatial", "temporal", "refine_boundaries"], 0)

    for _ in range(N_INSTANCES):
        n = int(rng.integers(1, 80))
        sims = rng.uniform(-1, 1, n).round(int(rng.integers(1, 4)))
        sims[0] = 1.0
        tau, c_min = float(rng.uniform(-0.9, 0.9)), int(rng.integers(1, 30))
        probs = np.clip((1 - sims) / 2, 0, 1)
        probs[0] = 1.0
        got = detect_boundaries(sims, probs, tau, c_min).positions.tolist()
        mism["detect_boundaries"] += got != oracles.detect_scan(sims.tolist(), tau, c_min)

    for _ in range(N_INSTANCES):
        n = int(rng.integers(1, 40))
        scores = rng.integers(0, 6, n).astype(float)  # many ties
        k = int(rng.integers(0, n + 1))
        got = np.flatnonzero(top_k_mask(scores, k)).tolist()
        mism["top-k"] += got != oracles.topk_reference(scores.tolist(), k)

    for _ in range(N_INSTANCES):
        k = int(rng.integers(2, 17))
        frame = rng.standard_normal((k, int(rng.integers(2, 9))))
        if rng.uniform() < 0.4:  # duplicated tokens force density ties
            frame[rng.integers(0, k, k // 2)] = frame[0]
        keep = int(rng.integers(1, k + 1))
        mism["spatial"] += spatial_prune_frame(frame, keep).tolist() != oracles.spatial_reference(frame, keep)

    for _ in range(N_INSTANCES):
        k = int(rng.integers(1, 17))
        prev = rng.standard_normal((k, int(rng.integers(2, 9))))
        frame = rng.standard_normal(prev.shape)
        if rng.uniform() < 0.4:  # unchanged positions force similarity ties
            same = rng.uniform(size=k) < 0.6
            frame[same] = prev[same] * rng.uniform(0.5, 2)
        keep = int(rng.integers(1, k + 1))
        got = temporal_prune_frame(frame, prev, keep).tolist()
        mism["temporal"] += got != oracles.temporal_reference(frame, prev, keep)

    for _ in range(N_INSTANCES):
        n_v = int(rng.integers(4, 100))
        k = int(rng.integers(1, 10))
        m = int(rng.integers(0, min(8, n_v - 1) + 1))
        inner = sorted(rng.choice(np.arange(1, n_v), size=m, replace=False).tolist())
        strengths = rng.uniform(0, 1, m).round(1).tolist()  # coarse strengths tie often
        sm = refine_boundaries(ProjectedBoundaries(np.array([0, *inner, n_v]), np.array(strengths), n_v), k)
        mism["refine_boundaries"] += sm.boundaries.tolist() != oracles.refine_reference(inner, strengths, n_v, k)

    ok = not any(mism.values())
    report(2, ok, f"{N_INSTANCES} instances per operation, mismatches={mism}")


# ---------------------------------------------------------------- criterion 3


def test_synthetic_boundary_recovery():
    recalls, exact = [], 0
    for seed in range(100):
        audio, starts = recovery_stream(seed)
        truth = starts[1:]
        prof = boundary_profile(audio)
        found = detect_boundaries(prof.sims, prof.probs, 0.4, 30).inner.tolist()
        recalls.append(recall_within_one(found, truth))
        exact += found == truth
    recall = float(np.mean(recalls))
    report(3, recall >= 0.95, f"mean recall (+-1) {recall:.4f} over 100 seeds (need >= 0.95); exact matches {exact}/100")


# ---------------------------------------------------------------- criterion 4


def _median_ms(fn, runs=20):
    fn()  # warm-up
    times = []
    for _ in range(runs):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(times)


def test_overhead():
    rng = np.random.default_rng(4)
    cfg = DashConfig()
    cases = {}
    for name, n_a in (("window N_a=50", 50), ("stream N_a=3000", 3000)):
        audio = rng.standard_normal((n_a, 1280)).astype(np.float32)
        attn = rng.standard_normal(n_a).astype(np.float32)

        def stages(audio=audio, attn=attn):
            x = audio.astype(np.float64)
            profile, _ = detect_audio_boundaries(x, cfg)
            score_audio(x, profile, attn, cfg)

        cases[name] = _median_ms(stages)
    video = FrameGrid(rng.standard_normal((288, 1280)).astype(np.float32), 2, 144)
    audio = rng.standard_normal((50, 1280)).astype(np.float32)
    full = _median_ms(lambda: run_window(audio, video, rng.standard_normal(50), cfg))
    ok = all(v < 40 for v in cases.values())
    detail = ", ".join(f"{k}: {v:.2f} ms" for k, v in cases.items())
    report(4, ok, f"boundary+scoring median of 20 runs, {detail} (limit 40 ms); full window incl. video {full:.2f} ms")


# ---------------------------------------------------------------- criterion 5


def test_retention_targeting():
    rng = np.random.default_rng(5)
    audio_bad = 0
    audio_windows = 0
    for _ in range(N_INSTANCES):
        audio, video, attn, cfg = random_instance(rng, n_a=(2, 200), frames=(2, 6))
        rho_a = float(rng.choice([0.0, 0.25, 0.5, 0.65, 0.75, 0.8, 0.9, 0.95]))
        r = run_window(audio, video, attn, DashConfig(rho_a=rho_a, c_min=cfg.c_min, tau_a=cfg.tau_a))
        n = len(attn)
        target = Fraction(math.floor((1 - Fraction(str(rho_a))) * n), n)
        realised = Fraction(int(r.audio_mask.sum()), n)
        audio_windows += 1
        # a zero budget is lifted to one token
        audio_bad += realised != max(target, Fraction(1, n))

    devs = []
    for i in range(200):
        k = int(rng.integers(8, 145))
        n_win = int(rng.integers(1, 9))
        frames = n_win * int(rng.integers(2, 5))
        lengths = rng.integers(10, 90, 25).tolist()
        audio, _ = generate_piecewise(
            SyntheticSpec(lengths, float(rng.uniform(-0.5, 0.6)), float(rng.uniform(0, 0.3)), 32, i)
        )
        audio = audio[: 50 * n_win]
        video = FrameGrid(rng.standard_normal((frames * k, 32)), frames, k)
        rho_v = float(rng.uniform(0.1, 0.95))
        cfg = DashConfig(rho_a=float(rng.uniform(0, 0.95)), rho_v=rho_v, c_min=int(rng.integers(5, 31)))
        stats = run_stream(audio, video, rng.standard_normal(len(audio)), cfg).stats
        devs.append(stats.video_retention - (1 - rho_v))
    worst = float(np.max(np.abs(devs)))
    ok = audio_bad == 0 and worst <= 0.10
    report(
        5,
        ok,
        f"audio exact on {audio_windows - audio_bad}/{audio_windows} windows; "
        f"video max |realised - (1-rho_v)| = {100 * worst:.2f} pp over 200 streams, K in [8,144] (limit 10 pp)",
    )


# ---------------------------------------------------------------- criterion 6


def _write_stream(tmp, name, audio, attn):
    a, w = tmp / f"{name}_a.dsh", tmp / f"{name}_w.dsh"
    write_token_dump(audio, a)
    write_attention_logits(attn, w)
    return a, w


def _cli_report(a, w, out, *extra):
    code = cli_main(["--audio", str(a), "--attn", str(w), "--mode", "sequence", "--out", str(out), *extra])
    assert code == 0
    return json.loads(Path(out).read_text())


def test_ablation_sweeps(tmp_path):
    rng = np.random.default_rng(6)
    streams = []
    for seed in range(100):
        audio, starts = recovery_stream(seed)
        streams.append((_write_stream(tmp_path, f"s{seed}", audio, rng.uniform(size=len(audio))), starts[1:]))

    recall = {}
    for metric in ("cosine", "dot", "change-rate", "random"):
        vals = []
        for (a, w), truth in streams:
            doc = _cli_report(a, w, tmp_path / "r.json", "--metric", metric, "--seed", "3")
            found = doc["windows"][0]["audio_boundaries"]["positions"][1:-1]
            vals.append(recall_within_one(found, truth))
        recall[metric] = float(np.mean(vals))

    grid = ["0.4,0.3,0.3", "0.2,0.4,0.4", "0.6,0.2,0.2", "0.1,0.45,0.45", "0.5,0,0.5", "1,0,0", "0,0.5,0.5", "0,0,1"]
    turnover = {}
    nonconstant = True
    for wts in grid:
        moved = 0
        for (a, w), _ in streams[:30]:
            doc = _cli_report(a, w, tmp_path / "r.json", "--weights", wts, "--rho-a", "0.75")
            win = doc["windows"][0]
            moved += len(win["selection"]["rescued"]) + len(win["selection"]["replaced"])
            nonconstant &= len(set(win["boundary_curve"]["probability"][1:])) > 1
        turnover[wts] = moved
    wb_positive = [g for g in grid if float(g.split(",")[0]) > 0]
    ok = (
        recall["cosine"] > recall["random"]
        and nonconstant
        and all(turnover[g] > 0 for g in wb_positive)
        and turnover["0,0,1"] == 0
    )
    rec = ", ".join(f"{k} {v:.3f}" for k, v in recall.items())
    tur = ", ".join(f"({g}) {v}" for g, v in turnover.items())
    report(6, ok, f"recall: {rec}; turnover tokens over 30 streams: {tur}")


if __name__ == "__main__":
    import tempfile

    results = []
    for fn in (
        test_invariant_suite,
        test_oracle_equivalence,
        test_synthetic_boundary_recovery,
        test_overhead,
        test_retention_targeting,
    ):
        try:
            fn()
            results.append(True)
        except AssertionError:
            results.append(False)
    with tempfile.TemporaryDirectory() as tmp:
        try:
            test_ablation_sweeps(Path(tmp))
            results.append(True)
        except AssertionError:
            results.append(False)
    sys.exit(0 if all(results) else 1)
