# DSH1 dumps in, report and masks out, through the command-line entry point.

import json
import tempfile
from pathlib import Path

import numpy as np

from dashchunk import generate_piecewise, SyntheticSpec
from dashchunk.cli import main
from dashchunk.token_io import read_token_dump, write_attention_logits, write_token_dump

rng = np.random.default_rng(5)
tmp = Path(tempfile.mkdtemp())
audio, _ = generate_piecewise(SyntheticSpec([35, 30, 35], 0.1, 0.05, 64, seed=11))
write_token_dump(audio, tmp / "audio.dsh")
write_attention_logits(rng.standard_normal(len(audio)), tmp / "attn.dsh")
write_token_dump(rng.standard_normal((4 * 36, 64)).astype(np.float32), tmp / "video.dsh")
print("header bytes:", (tmp / "audio.dsh").read_bytes()[:20].hex(" "))

code = main([
    "--audio", str(tmp / "audio.dsh"), "--attn", str(tmp / "attn.dsh"),
    "--video", str(tmp / "video.dsh"), "--frames", "4", "--tokens-per-frame", "36",
    "--rho-a", "0.7", "--rho-v", "0.7", "--out", str(tmp / "report.json"),
])
print("exit", code)

doc = json.loads((tmp / "report.json").read_text())
print("windows:", len(doc["windows"]))
print(json.dumps({k: doc["stats"][k] for k in ("audio_retention", "video_retention", "segment_count")}))
print("audio mask:", read_token_dump(tmp / "audio_mask.dsh")[:, 0].astype(int))

# one stream, whole-sequence mode: both true cuts are visible
main(["--audio", str(tmp / "audio.dsh"), "--attn", str(tmp / "attn.dsh"), "--mode", "sequence", "--out", str(tmp / "seq.json")])
seq = json.loads((tmp / "seq.json").read_text())
print("sequence-mode boundaries:", seq["windows"][0]["audio_boundaries"]["positions"])
