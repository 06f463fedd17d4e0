"""MLP classifiers with checkpoint persistence and Lipschitz bounds.

Hidden layers use relu, the output layer is identity, so the product of
per-layer spectral norms upper-bounds the network's l2 Lipschitz constant.
"""
from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, EstimationError, FormatError

ROLES = ("clean_teacher", "adv_teacher", "student")

CHECKPOINT_MAGIC = b"ARDM"
CHECKPOINT_VERSION = 1


class MlpModel:
    """Fully connected relu network: layer_dims = [input, hidden..., classes]."""

    def __init__(self, layer_dims, role: str = "student", seed: int = 0,
                 weights=None, biases=None, config_digest: int = 0):
        dims = [int(d) for d in layer_dims]
        if len(dims) < 2 or any(d <= 0 for d in dims):
            raise ContractError(f"bad layer dims {dims}")
        if role not in ROLES:
            raise ContractError(f"role {role!r} not in {ROLES}")
        self.layer_dims = dims
        self.role = role
        self.config_digest = int(config_digest)
        if weights is None:
            rng = np.random.default_rng(seed)
            weights, biases = [], []
            for fan_in, fan_out in zip(dims[:-1], dims[1:]):
                limit = np.sqrt(6.0 / (fan_in + fan_out))
                weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
                biases.append(np.zeros(fan_out))
        self.weights = [Tensor(w) for w in weights]
        self.biases = [Tensor(b) for b in biases]
        for (fan_in, fan_out), w, b in zip(zip(dims[:-1], dims[1:]),
                                           self.weights, self.biases):
            if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
                raise ContractError(
                    f"weight shapes {w.shape}/{b.shape} do not match dims "
                    f"({fan_in}, {fan_out})")

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def n_classes(self) -> int:
        return self.layer_dims[-1]

    def parameters(self) -> list[Tensor]:
        return [*self.weights, *self.biases]

    def set_trainable(self, flag: bool) -> None:
        for p in self.parameters():
            p.requires_grad = flag

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def copy(self, role: str | None = None) -> "MlpModel":
        return MlpModel(self.layer_dims, role=role or self.role,
                        weights=[w.data.copy() for w in self.weights],
                        biases=[b.data.copy() for b in self.biases],
                        config_digest=self.config_digest)

    def weights_digest(self) -> str:
        """sha256 over all parameter bytes; used to assert frozen teachers."""
        h = hashlib.sha256()
        for p in self.parameters():
            h.update(p.data.tobytes())
        return h.hexdigest()

    def __repr__(self):
        return f"MlpModel(dims={self.layer_dims}, role={self.role!r})"


def forward(model: MlpModel, x) -> Tensor:
    """Graph-building forward pass: [n, input_dim] -> logits [n, C]."""
    x = x if isinstance(x, Tensor) else Tensor(x)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ContractError(
            f"forward expects [n, {model.input_dim}], got {x.shape}")
    h = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = ad.add(ad.matmul(h, w), b)
        if i < last:
            h = ad.relu(h)
    return h


def forward_np(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Plain-numpy forward for frozen models (no graph, no grads)."""
    h = np.asarray(x, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != model.input_dim:
        raise ContractError(
            f"forward expects [n, {model.input_dim}], got {h.shape}")
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w.data + b.data
        if i < last:
            h = np.maximum(h, 0.0)
    return h


def predict(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Top-1 class per row; argmax ties break toward the lowest index."""
    return np.argmax(forward_np(model, x), axis=1)


def spectral_norm(w: np.ndarray, tol: float = 1e-10, max_iter: int = 1000,
                  seed: int = 0) -> float:
    """Largest singular value via power iteration on W^T W."""
    w = np.asarray(w, dtype=np.float64)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(w.shape[1])
    v /= np.linalg.norm(v)
    sigma_prev = 0.0
    for it in range(1, max_iter + 1):
        u = w @ v
        sigma = float(np.linalg.norm(u))
        if sigma == 0.0:
            return 0.0
        v = w.T @ (u / sigma)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return sigma
        v = v / nv
        if abs(sigma - sigma_prev) <= tol * max(1.0, sigma):
            return sigma
        sigma_prev = sigma
    raise EstimationError(
        f"power iteration did not converge in {max_iter} iterations "
        f"(last delta {abs(sigma - sigma_prev):.3e})")


def lipschitz_upper(model: MlpModel) -> float:
    """Certified l2 Lipschitz upper bound: product of layer spectral norms."""
    prod = 1.0
    for w in model.weights:
        prod *= spectral_norm(w.data)
    return prod


def lipschitz_lower_empirical(model: MlpModel, pairs) -> float:
    """max ||f(a)-f(b)|| / ||a-b|| over the given point pairs.

    Coincident pairs are skipped; always <= lipschitz_upper(model).
    """
    best = None
    for a, b in pairs:
        a = np.asarray(a, dtype=np.float64).reshape(1, -1)
        b = np.asarray(b, dtype=np.float64).reshape(1, -1)
        dx = float(np.linalg.norm(a - b))
        if dx == 0.0:
            continue
        dy = float(np.linalg.norm(forward_np(model, a) - forward_np(model, b)))
        ratio = dy / dx
        if best is None or ratio > best:
            best = ratio
    if best is None:
        raise ContractError("no distinct pairs given")
    return best


def save(model: MlpModel, path) -> None:
    """Write the binary checkpoint (magic ARDM, version 1, little-endian)."""
    blob = bytearray()
    blob += CHECKPOINT_MAGIC
    blob += struct.pack("<I", CHECKPOINT_VERSION)
    blob += struct.pack("<I", len(model.weights))
    for w in model.weights:
        blob += struct.pack("<II", w.shape[0], w.shape[1])
    for w, b in zip(model.weights, model.biases):
        blob += np.ascontiguousarray(w.data).astype("<f8").tobytes()
        blob += np.ascontiguousarray(b.data).astype("<f8").tobytes()
    blob += struct.pack("<Q", model.config_digest & 0xFFFFFFFFFFFFFFFF)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(bytes(blob))
    tmp.replace(path)


def load(path, role: str = "student") -> MlpModel:
    """Read a checkpoint written by save(); round-trips forward bit-exactly."""
    raw = Path(path).read_bytes()
    view = memoryview(raw)
    off = 0

    def take(n: int, what: str) -> memoryview:
        nonlocal off
        if off + n > len(raw):
            raise FormatError(f"truncated checkpoint: {what} needs {n} bytes, "
                              f"{len(raw) - off} left")
        chunk = view[off:off + n]
        off += n
        return chunk

    if bytes(take(4, "magic")) != CHECKPOINT_MAGIC:
        raise FormatError(f"bad checkpoint magic in {path}")
    version = struct.unpack("<I", take(4, "version"))[0]
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    n_layers = struct.unpack("<I", take(4, "layer count"))[0]
    if n_layers == 0:
        raise FormatError("checkpoint has zero layers")
    shapes = [struct.unpack("<II", take(8, f"layer {i} dims"))
              for i in range(n_layers)]
    for i in range(1, n_layers):
        if shapes[i][0] != shapes[i - 1][1]:
            raise FormatError(f"layer dims do not chain at layer {i}: "
                              f"{shapes[i - 1]} -> {shapes[i]}")
    weights, biases = [], []
    for i, (rows, cols) in enumerate(shapes):
        wb = take(8 * rows * cols, f"layer {i} weights")
        weights.append(np.frombuffer(wb, dtype="<f8").reshape(rows, cols).copy())
        bb = take(8 * cols, f"layer {i} bias")
        biases.append(np.frombuffer(bb, dtype="<f8").copy())
    digest = struct.unpack("<Q", take(8, "config digest"))[0]
    if off != len(raw):
        raise FormatError(f"trailing bytes in checkpoint: {len(raw) - off}")
    dims = [shapes[0][0]] + [c for _, c in shapes]
    return MlpModel(dims, role=role, weights=weights, biases=biases,
                    config_digest=digest)
