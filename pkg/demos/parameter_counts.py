"""
Counting generator parameters
=============================

Closed-form counts for the three generators. Peephole weights are full
[C, H, W] maps, so the count depends on the frame extent: with 19x19 frames
(361 sites) the published totals come out exactly, while the 18x20 grid of
the recordings (360 sites) gives slightly smaller numbers.
"""
from neurovid.generative import GenerativeModel, GeneratorSpec, count_params, count_params_by_scale

for c in (64, 128):
    bench = count_params(GeneratorSpec("benchmark", (c, c), 19, 19))
    layers = count_params(GeneratorSpec("mrlayer", (c, c), 19, 19))
    scales = count_params_by_scale(GeneratorSpec("mrlstm", (c, c), 19, 19))
    print(f"C={c}: benchmark {bench:,}  mrlayer {layers:,} (+{layers - bench})  "
          f"mrlstm scale1 {scales['scale1']:,} scale0 {scales['scale0']:,} total {sum(scales.values()):,}")
    print(f"       scale0 - benchmark = {scales['scale0'] - bench:,} = 3*4*25*C")

###############################################################################
# The same numbers on the 18x20 grid.
for kind in ("benchmark", "mrlayer", "mrlstm"):
    print(f"18x20 {kind:9s} C=64: {count_params(GeneratorSpec(kind, (64, 64), 18, 20)):,}")

###############################################################################
# The closed form agrees with the tensors a model actually allocates.
spec = GeneratorSpec("mrlstm", (8, 8), 18, 20)
print("instantiated 8-channel mrlstm:", GenerativeModel(spec).count(), "closed form:", count_params(spec))
