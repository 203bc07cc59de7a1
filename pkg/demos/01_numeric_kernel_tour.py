"""Tour of the numeric kernel: every scalar op under the teaching loop.

Run:  python3 demos/01_numeric_kernel_tour.py
"""

import numpy as np

from salient_teach.tensor_core import (
    argmax_class,
    bilinear_resize,
    cross_entropy,
    logits_gradient,
    minmax_normalize,
    softmax,
)
from salient_teach.trainer import AdamState, TrainConfig, adam_step


def show(title: str, value) -> None:
    print(f"\n== {title}")
    print(np.asarray(value))


print("The classifier head is softmax regression; these are its pieces.")

logits = [1.0, 2.0, 3.0]
probs = softmax(logits)
show(f"softmax({logits}) (max-subtracted, sums to 1)", probs)
print(f"   sum = {probs.sum():.17f}")

show("a uniform prediction over 3 classes costs ln 3", cross_entropy(np.full(3, 1 / 3), 0))
show("cross_entropy([0.7, 0.2, 0.1], label=1) = -ln(0.2)", cross_entropy([0.7, 0.2, 0.1], 1))

grad = logits_gradient(probs, 2)
show("gradient of that loss w.r.t. logits is probs - onehot(label)", grad)
print(f"   components sum to {grad.sum():+.1e} (always zero)")

print("\n== Adam: two unit-gradient steps from zero")
params = [np.zeros(1)]
state = AdamState.for_params(params)
for step in (1, 2):
    params, state = adam_step(params, [np.ones(1)], state, TrainConfig())
    print(f"   after step {step}: theta = {params[0][0]:.12f}")
print("   bias correction keeps early steps at almost exactly the learning rate")

print("\n== bilinear_resize upsamples the coarse saliency grid for display")
grid = np.array([[0.0, 1.0], [0.0, 1.0]])
show("2x2 ramp -> 4x4 (half-pixel centers: rows are 0, 0.25, 0.75, 1)",
     bilinear_resize(grid, 4, 4))

show("minmax_normalize maps any grid onto [0, 1]",
     minmax_normalize([[1.0, 3.0], [2.0, 4.0]]))
show("a constant grid normalizes to zeros: nothing to highlight",
     minmax_normalize(np.full((2, 2), 7.0)))

print(f"\n== argmax_class breaks ties toward the lowest index: "
      f"argmax_class([0.5, 0.5]) = {argmax_class([0.5, 0.5])}")
