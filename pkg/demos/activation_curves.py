#!/usr/bin/env python3
"""Draw the three output activations side by side.

The sinusoidal step activation flattens around each valid soft-label value
(0, 1/3, 2/3, 1 for three annotators) and climbs fastest halfway between
them; outside [0, 1] it continues with slope theta, which leaves a visible
jump at x = 1 in the default tail mode. The widened sigmoid is the smooth
baseline, and the quantizer is the hard snap-to-grid used after training.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from softstep import (
    SigmoidParams,
    SsfParams,
    StepGrid,
    TailMode,
    ssf_derivative,
    ssf_value,
    step_quantize,
    widened_sigmoid_value,
)

a, theta = 3, 0.05
ssf = SsfParams(a=a, theta=theta)
ssf_smooth_tail = SsfParams(a=a, theta=theta, tail_mode=TailMode.CONTINUOUS)
sigmoid = SigmoidParams()  # sigmoid(x / 5)
grid = StepGrid(a)

x = np.linspace(-0.5, 1.5, 2001)

print(f"sinusoidal step, a={a}, theta={theta}")
for k in range(a + 1):
    point = k / a
    print(f"  fixed point {point:.4f} -> {ssf_value(ssf, point):.4f}   "
          f"slope {ssf_derivative(ssf, point):+.4f}")
mid = 1 / (2 * a)
print(f"  midpoint   {mid:.4f} -> slope {ssf_derivative(ssf, mid):.4f}  (pi/2 = {np.pi / 2:.4f})")

fig, axes = plt.subplots(1, 3, figsize=(13, 4), sharey=True)

axes[0].plot(x, ssf_value(ssf, x), label="jump tail")
axes[0].plot(x, ssf_value(ssf_smooth_tail, x), "--", label="continuous tail")
axes[0].set_title(f"sinusoidal step (a={a}, theta={theta})")
axes[0].legend()

axes[1].plot(x, widened_sigmoid_value(sigmoid, x * 10), label="sigmoid(x/5), x scaled")
axes[1].plot(x, widened_sigmoid_value(SigmoidParams(widening=1.0), x * 10), "--", label="sigmoid(x)")
axes[1].set_title("widened vs plain sigmoid")
axes[1].legend()

axes[2].step(x, step_quantize(grid, x), where="post")
axes[2].set_title(f"post-training quantizer (a={a})")

for axis in axes:
    for point in grid.grid:
        axis.axhline(point, color="grey", lw=0.4, alpha=0.5)
    axis.set_xlabel("pre-activation / raw value")

os.makedirs("demos/output", exist_ok=True)
fig.tight_layout()
fig.savefig("demos/output/activation_curves.png", dpi=120)
print("saved demos/output/activation_curves.png")
