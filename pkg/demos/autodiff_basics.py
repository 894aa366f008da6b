# Reverse-mode autodiff on numpy arrays: tapes, gradients, and the
# finite-difference battery that audits every operator.
#
# Run: python3 demos/autodiff_basics.py

import numpy as np

from cnav import tensor as T
from cnav.gradcheck import check_gradients, run_battery

# A Tensor wraps a numpy array; ops record onto an active Tape so the
# backward pass can replay them in reverse.

x = T.Tensor(np.array([[1.0, -2.0, 3.0]]), requires_grad=True)
w = T.Tensor(np.array([[0.5], [1.5], [-0.25]]), requires_grad=True)

with T.Tape() as tape:
    y = T.matmul(T.tanh(x), w)
    loss = T.reduce_mean(T.square(y))
T.backward(loss, tape)

print("loss:", float(loss.data))
print("dloss/dx:", x.grad)
print("dloss/dw:", w.grad.ravel())

# The same gradient, measured numerically: nudge one weight both ways
# and difference the loss. check_gradients does this for every entry.

def build():
    return T.reduce_mean(T.square(T.matmul(T.tanh(x), w)))

err = check_gradients(build, [x, w])
print(f"worst relative error vs central differences: {err:.2e}")

# The full battery covers every primitive op plus each composed training
# objective (critic residual, policy objective, reconstruction, channel
# gate, squashed sampling, temperature) at 64-bit precision.

results = run_battery(seed=0, include_composites=True)
worst = max(e for _, e in results)
print(f"\nbattery: {len(results)} components, worst error {worst:.2e}")
for name, e in results:
    print(f"  {name:38s} {e:10.2e}")
