"""The reverse-mode engine behind the model, checked against finite differences."""

import numpy as np

from spherevqa.autograd import functional as F
from spherevqa.autograd.gradcheck import finite_diff_check
from spherevqa.autograd.nn import EncoderLayer
from spherevqa.autograd.tensor import GraphReleasedError, Tensor, backward

rng = np.random.default_rng(0)

# Softmax cross-entropy: gradient is probabilities minus the one-hot target.
logits = Tensor(rng.normal(size=(2, 4)), requires_grad=True)
loss = F.cross_entropy(logits, np.array([1, 3]))
backward(loss)
print("loss", round(float(loss.data), 4))
print("grad rows sum to zero:", np.allclose(logits.grad.sum(axis=1), 0))

# The graph is released after one backward pass.
try:
    backward(loss)
except GraphReleasedError as e:
    print("second backward:", type(e).__name__)

# One cross-attention encoder layer, primary rows attending to a context sequence.
layer = EncoderLayer(8, 2, rng, np.float64, dropout=0.0)
context = Tensor(rng.normal(size=(1, 5, 8)))
mask = np.array([[True, True, True, False, False]])
x = Tensor(rng.normal(size=(1, 3, 8)), requires_grad=True)
def energy(q):
    h = layer(q, context, mask)
    return (h * h).sum()


err = finite_diff_check(energy, x)
print("encoder layer max relative error vs finite differences:", f"{err:.2e}")
