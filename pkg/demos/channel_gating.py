# Trainable channel gating: a weight vector mapped through a small
# transform to a near-binary mask that multiplies feature channels.
# Training the task loss alone decides which channels survive.
#
# Run: python3 demos/channel_gating.py

import numpy as np

from cnav import cfs
from cnav import tensor as T
from cnav.nn import Linear
from cnav.optim import Adam

rng = np.random.default_rng(0)

# The mask is m = v^2 / (v^2 + eps) with v = relu(mlp(w)): exactly zero
# where the relu cuts off, within eps of one where v is order unity.

gate = cfs.CfsModule(16, rng, eps=1e-2)
m0 = cfs.mask_values(gate)
print("initial mask (every channel starts open):")
print(" ", np.round(m0, 3))
print(f"  zero fraction: {cfs.sparsity(m0):.3f}")

# A regression task where half the input is pure noise: y depends only on
# the first 8 of 16 channels. Nothing tells the gate which are which; the
# only signal is the task loss flowing through the mask.

head = Linear(16, 4, rng, np.float32)
a_true = rng.standard_normal((8, 4)).astype(np.float32)
opt_gate = Adam(gate.params("gate"), lr=3e-3)
opt_head = Adam(head.params("head"), lr=1e-3)

print("\ntraining a gated linear head (channels 8-15 are noise):")
print("  step   loss    mean mask: signal  noise   zeros")
for step in range(5001):
    x = rng.standard_normal((64, 16)).astype(np.float32)
    y = x[:, :8] @ a_true
    with T.Tape() as tape:
        m = cfs.compute_mask(gate)
        pred = head(cfs.apply(T.Tensor(x), m))
        loss = T.reduce_mean(T.square(T.sub(pred, T.Tensor(y))))
    opt_gate.zero_grad()
    opt_head.zero_grad()
    T.backward(loss, tape)
    if step >= 500:  # let the head learn which channels matter first
        opt_gate.step()
    opt_head.step()
    if step % 500 == 0:
        mv = cfs.mask_values(gate)
        print(f"  {step:5d}  {float(loss.data):6.3f}   "
              f"{mv[:8].mean():17.3f}  {mv[8:].mean():5.3f}   "
              f"{cfs.sparsity(mv):.3f}")

mv = cfs.mask_values(gate)
print("\nfinal mask:")
print(" ", np.round(mv, 3))
print(f"noise channels closed to {mv[8:].mean():.4f}, "
      f"signal channels kept at {mv[:8].mean():.4f}")
