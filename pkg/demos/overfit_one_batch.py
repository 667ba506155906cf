"""
Overfitting one batch
=====================

A sanity check for the whole training stack: an 8-channel benchmark
generator, no critic, trained for 500 iterations on a single batch of four
synthetic windows. The reconstruction plus prediction loss should fall by
two orders of magnitude or more.
"""
import time

import numpy as np

from neurovid.data import WaveParams, generate_waves, normalize, sample_batch, window
from neurovid.generative import GenerativeModel, GeneratorSpec
from neurovid.training import TrainConfig, Trainer

frames, _ = normalize(generate_waves(WaveParams(), 200))
batch = sample_batch(window(frames).astype(np.float32), 4, seed=0, iteration=0)
trainer = Trainer(GenerativeModel(GeneratorSpec("benchmark", (8, 8)), seed=0), TrainConfig(total_iterations=500))

started = time.time()
rows = trainer.run(lambda k: batch, progress=lambda r: r["iteration"] % 50 == 0 and print(
    f"iteration {r['iteration']:3d}  loss {r['l_rec'] + r['l_pred']:10.3f}  ({time.time() - started:.0f}s)"))
first = rows[0]["l_rec"] + rows[0]["l_pred"]
last = rows[-1]["l_rec"] + rows[-1]["l_pred"]
print(f"loss {first:.1f} -> {last:.3f}: {first / last:.0f}x lower in {time.time() - started:.0f}s")
