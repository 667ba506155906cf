"""
The two-scale temporal pyramid and the skip-step upper layer
============================================================

The multi-resolution LSTM works on a half-rate copy of the sequence: even
samples are the average of themselves and their predecessor (causal, no
delay), and odd samples are filled back in by averaging their neighbours.
The multi-resolution-layers generator instead updates its upper ConvLSTM
only at even time indices.
"""
import numpy as np

from neurovid.generative import GenerativeModel, GeneratorSpec
from neurovid.pyramid import downsample, upsample

ramp = [float(i) for i in range(1, 9)]
coarse = downsample(ramp)
print("ramp       ", ramp)
print("downsampled", coarse, "(even indices 2, 4, 6, 8)")
print("upsampled  ", upsample(coarse), "(ramp delayed by half a sample)")
print("constant in, constant out:", upsample(downsample([3.0] * 6)))

###############################################################################
# One forward pass of each generator on a random 16+16 window.
rng = np.random.default_rng(0)
window = rng.uniform(-1, 1, size=(1, 1, 16, 18, 20)).astype(np.float32)
for kind in ("benchmark", "mrlstm", "mrlayer"):
    model = GenerativeModel(GeneratorSpec(kind, (8, 8)), seed=0)
    out = model(window, n=16)
    line = f"{kind:9s} reconstructions {len(out.reconstructions)}  predictions {len(out.predictions)}"
    if out.coarse is not None:
        line += f"  coarse predictions {len(out.coarse.predictions)}"
    if kind == "mrlayer":
        line += f"  upper-layer updates {out.upper_steps}"
    print(line)
