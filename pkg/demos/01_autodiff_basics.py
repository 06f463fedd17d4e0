"""Tour of the tensor engine: ops, reverse-mode gradients, grad checking.

Everything downstream (training, attacks, saliency) is built on these few
primitives, so this demo shows the raw mechanics once.
"""
import numpy as np

from ardlab import autodiff as ad
from ardlab.autodiff import Graph, Tensor

# --- forward ops ------------------------------------------------------------
x = Tensor([[1.0, 2.0, 3.0]])
s = ad.softmax(x)
print("softmax([1,2,3])      =", s.data.round(8))
print("row sum               =", s.data.sum())

# --- reverse mode -----------------------------------------------------------
# loss = 0.5 * ||relu(x W)||^2 ; gradients flow to both leaves
rng = np.random.default_rng(0)
x = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
w = Tensor(rng.standard_normal((3, 2)), requires_grad=True)
loss = ad.scale(ad.l2_norm_sq(ad.relu(ad.matmul(x, w))), 0.5)
loss.backward()
print("\nloss                  =", round(loss.item(), 6))
print("dloss/dx row 0        =", x.grad[0].round(4), "(all relu paths dead)")
print("dloss/dx row 1        =", x.grad[1].round(4))
print("dloss/dw col 0        =", w.grad[:, 0].round(4))

# the recorded graph is a plain topological list of ops
graph = Graph.trace(loss)
print("graph ops             =", [n.op for n in graph.nodes
                                  if n.op != "leaf"])

# --- gradient checking ------------------------------------------------------
# central differences with a fixed random output weighting; the returned
# number is the worst relative error over input coordinates
for name, op in [("relu", ad.relu), ("softmax", ad.softmax),
                 ("log_softmax", ad.log_softmax), ("square", ad.square)]:
    pt = rng.standard_normal((3, 5)) + 0.2
    print(f"grad_check {name:12s} -> {ad.grad_check(op, pt, h=1e-5):.2e}")
