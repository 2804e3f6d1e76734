# Audio boundaries on a synthetic token stream.
# Three "utterances" of 40, 55 and 35 tokens, each a noisy copy of its own prototype.

import numpy as np

from dashchunk import SyntheticSpec, boundary_profile, detect_boundaries, generate_piecewise

audio, starts = generate_piecewise(SyntheticSpec([40, 55, 35], inter_segment_cosine=0.1, noise_scale=0.05, dim=64, seed=1))
print("tokens:", audio.shape, " true segment starts:", starts)

prof = boundary_profile(audio)
print("similarity inside a segment ~", prof.sims[1:40].mean().round(4))
print("similarity at the cuts        ", prof.sims[starts[1:]].round(3))

found = detect_boundaries(prof.sims, prof.probs, tau=0.4, c_min=30)
print("detected:", found.positions.tolist(), " strengths:", found.strengths.round(3).tolist())

# c_min is a hard floor: with 60 the cut at 40 is too close to the start and is skipped
print("c_min=60:", detect_boundaries(prof.sims, prof.probs, 0.4, 60).positions.tolist())

# a crude text plot of p_t
for t in range(0, len(audio), 5):
    bar = "#" * int(40 * prof.probs[t])
    print(f"{t:4d} {prof.probs[t]:.3f} {bar}")
