"""
Checking every gradient by finite differences
=============================================

The tensor engine differentiates in reverse mode. Here each op, the full
ConvLSTM step and the critic loss are compared against central differences
in 64-bit mode, with the norm-relative error that the test suite uses.
"""
import numpy as np

from neurovid import autodiff as ad
from neurovid.autodiff import Tensor
from neurovid.gradsuite import run_suite

###############################################################################
# A single check first: the squared error of a 2D convolution.
with ad.precision("check64"):
    rng = np.random.default_rng(0)
    x = Tensor(rng.normal(size=(2, 3, 6, 6)), requires_grad=True)
    k = Tensor(rng.normal(size=(4, 3, 5, 5)), requires_grad=True)
    target = Tensor(rng.normal(size=(2, 4, 6, 6)))
    print(ad.grad_check(lambda: ad.mse(ad.conv2d(x, k), target), {"x": x, "kernel": k}))

###############################################################################
# Then the whole suite over 20 seeds. Each line is the worst error seen.
worst = run_suite(seeds=range(20), critic_seeds=range(2))
for name, err in worst.items():
    print(f"{name:20s} {err:.2e} {'ok' if err < 1e-4 else 'FAILED'}")
print("all below 1e-4:", max(worst.values()) < 1e-4)
