#!/usr/bin/env python3
"""Check every analytic derivative against central finite differences.

First the two output activations pointwise, then the full head: each
parameter of a small network is nudged up and down and the resulting loss
slope is compared with what backprop reports.
"""

import numpy as np

from softstep import (
    HeadConfig,
    SigmoidParams,
    SsfParams,
    backward,
    forward,
    init_network,
    soft_cross_entropy,
    soft_cross_entropy_gradient,
    ssf_derivative,
    ssf_value,
    widened_sigmoid_derivative,
    widened_sigmoid_value,
)

H = 1e-6
ssf = SsfParams(a=3, theta=0.05)
sigmoid = SigmoidParams()

print("pointwise derivatives (analytic vs central difference, h=1e-6)")
print(f"{'x':>8} {'ssf analytic':>14} {'ssf fd':>14} {'sig analytic':>14} {'sig fd':>14}")
for x in (-1.2, 0.08, 0.17, 0.5, 0.71, 0.95, 1.4):
    ssf_fd = (ssf_value(ssf, x + H) - ssf_value(ssf, x - H)) / (2 * H)
    sig_fd = (widened_sigmoid_value(sigmoid, x + H) - widened_sigmoid_value(sigmoid, x - H)) / (2 * H)
    print(f"{x:>8.2f} {ssf_derivative(ssf, x):>14.8f} {ssf_fd:>14.8f} "
          f"{widened_sigmoid_derivative(sigmoid, x):>14.8f} {sig_fd:>14.8f}")

print("\nfull-head gradient check (3 inputs -> 2 hidden -> 1 output, no dropout)")
rng = np.random.default_rng(12)
config = HeadConfig(input_dim=3, hidden_width=2, dropout1=0.0, dropout2=0.0,
                    output_activation=SsfParams(a=3, theta=0.05))
net = init_network(config, seed=12)
net.b1 = np.array([0.6, 0.45])  # keeps both hidden units active
net.b2 = 0.5  # parks the output pre-activation mid-segment
features = rng.uniform(-1.0, 1.0, size=3)
target = 2 / 3

prediction, cache = forward(net, features)
grads = backward(net, cache, soft_cross_entropy_gradient(prediction, target))


def loss():
    value, _ = forward(net, features)
    return soft_cross_entropy(value, target)


worst = 0.0
for name in ("w1", "b1", "w2"):
    param = getattr(net, name)
    grad = getattr(grads, name)
    iterator = np.nditer(param, flags=["multi_index"])
    for _ in iterator:
        index = iterator.multi_index
        original = param[index]
        param[index] = original + H
        up = loss()
        param[index] = original - H
        down = loss()
        param[index] = original
        fd = (up - down) / (2 * H)
        error = abs(grad[index] - fd) / max(1.0, abs(grad[index]))
        worst = max(worst, error)
        print(f"  {name}{list(index)}: analytic={grad[index]:+.8f} fd={fd:+.8f}")
original = net.b2
net.b2 = original + H
up = loss()
net.b2 = original - H
down = loss()
net.b2 = original
fd = (up - down) / (2 * H)
worst = max(worst, abs(grads.b2 - fd) / max(1.0, abs(grads.b2)))
print(f"  b2: analytic={grads.b2:+.8f} fd={fd:+.8f}")
print(f"\nworst relative error: {worst:.2e}")
