# Audio boundaries drive video segment planning and per-frame pruning.

import numpy as np

from dashchunk import DashConfig, FrameGrid, SyntheticSpec, generate_piecewise, run_window

rng = np.random.default_rng(2)
audio, _ = generate_piecewise(SyntheticSpec([45, 45], -0.2, 0.02, 48, seed=7))
frames, k = 12, 16
video = FrameGrid(rng.standard_normal((frames * k, 48)), frames, k)

res = run_window(audio, video, rng.standard_normal(len(audio)), DashConfig(rho_a=0.6, rho_v=0.75))
print("audio boundary:", res.audio_boundaries.inner.tolist(), "-> video", res.segment_map.boundaries.tolist())

for p in res.plans:
    print(f"segment {p.segment}  frames {p.frames}  audio kept {p.audio_retention:.2f}  rho_v {p.rho_v:.3f}")
    print("   keep per frame:", p.keep_counts.tolist(), " protected frames:", sorted(p.boundary_frames))

grid = res.video_mask.reshape(frames, k)
for f in range(frames):
    print(f"frame {f:2d} " + "".join("x" if b else "." for b in grid[f]))
print(f"video kept {res.video_mask.mean():.3f} (target {1 - 0.75:.2f})")
