# Tri-signal audio scoring and how it differs from attention-only selection.

import numpy as np

from dashchunk import DashConfig, SyntheticSpec, generate_piecewise, run_window

rng = np.random.default_rng(0)
audio, starts = generate_piecewise(SyntheticSpec([30, 20], 0.0, 0.2, 32, seed=3))
attn = rng.gamma(1.0, size=len(audio))  # stand-in for pooled attention logits

res = run_window(audio, None, attn, DashConfig(rho_a=0.75, c_min=15))
s = res.scores
print("kept", res.retention.kept_count, "of", res.n_a, "audio tokens")
print("boundary at", res.audio_boundaries.inner.tolist())

order = np.argsort(-s.fused)[:6]
print(" idx   s_bnd  s_uniq  s_attn  fused")
for i in order:
    print(f"{i:4d}  {s.s_bnd[i]:.3f}  {s.s_uniq[i]:.3f}   {s.s_attn[i]:.3f}  {s.fused[i]:.3f}")

t = res.turnover
print("rescued by fusion:", t.rescued.tolist())
print("dropped vs attention-only:", t.replaced.tolist())
print("turnover rate:", round(t.rate, 3))

# attention-only weights give zero turnover
alt = run_window(audio, None, attn, DashConfig(rho_a=0.75, c_min=15, weights=(0, 0, 1)))
print("attention-only turnover:", alt.turnover.counts)
