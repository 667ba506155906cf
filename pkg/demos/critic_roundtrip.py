"""
The energy critic: shapes, energies and activation maps
=======================================================

The critic is a 3D convolutional autoencoder over the stacked past+future
sequence. Its reconstruction error is the energy: low on real sequences,
pushed up on generated ones.
"""
import numpy as np

from neurovid import autodiff as ad
from neurovid.autodiff import Tensor
from neurovid.data import WaveParams, generate_waves
from neurovid.discriminator import (
    Critic,
    CriticSpec,
    activation_concentration,
    critic_forward,
    critic_loss,
    energy,
    extract_activation_map,
)

critic = Critic(CriticSpec(), seed=0)
waves = generate_waves(WaveParams(), 32)[None, None].astype(np.float32)
with ad.no_grad():
    out = critic_forward(critic, Tensor(waves), update_stats=False)
for name, act in zip(out.layer_names, out.activations):
    print(f"{name}: {act.shape}")

###############################################################################
# Every time extent from 8 to 40 survives the stride-2 pyramid on both grids.
with ad.no_grad():
    ok = all(critic_forward(critic, Tensor(np.zeros((1, 1, t, h, w))), update_stats=False).reconstruction.shape
             == (1, 1, t, h, w) for t in range(8, 41) for h, w in ((18, 20), (19, 19)))
print("round-trip for T=8..40 on 18x20 and 19x19:", ok)

###############################################################################
# Energies. Identical real and generated sequences give zero loss.
real = Tensor(waves)
fake = Tensor(np.concatenate([waves[:, :, :16], np.zeros_like(waves[:, :, 16:])], axis=2))
with ad.no_grad():
    print("energy(real)", energy(critic, real, update_stats=False).item())
    print("energy(fake)", energy(critic, fake, update_stats=False).item())
    print("critic_loss(real, real)", critic_loss(critic, real, real).item())

###############################################################################
# Channel-mean map of the second-to-last layer, stretched back to 32 frames.
fmap = extract_activation_map(out, layer=-2, time_length=32)
past, future = activation_concentration(fmap, 16)
print(f"activation map {fmap.shape}; mean |a| past {past:.4f} future {future:.4f}")
