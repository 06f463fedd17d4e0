"""Input-gradient attention maps and map-distance comparison.

The map for (model, x, y) is |d logits_y / d x|: which input coordinates the
class score listens to. Distances between maps are raw L2 norms; smaller
means the two models attend to the same regions.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError
from .losses import one_hot
from .models import MlpModel, forward


@dataclass(frozen=True)
class SaliencyMap:
    values: np.ndarray
    model_id: str = ""
    sample_id: int = 0
    target_class: int = 0


def input_gradient_map(model: MlpModel, x, y: int, model_id: str = "",
                       sample_id: int = 0) -> SaliencyMap:
    """Absolute gradient of the class-y logit w.r.t. the input."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if not (0 <= y < model.n_classes):
        raise ContractError(f"class {y} outside [0, {model.n_classes})")
    xt = Tensor(x, requires_grad=True)
    logits = forward(model, xt)
    ad.sum(ad.multiply(logits, Tensor(one_hot([y], model.n_classes)))).backward()
    return SaliencyMap(np.abs(xt.grad[0]), model_id=model_id,
                       sample_id=sample_id, target_class=int(y))


def _values(m) -> np.ndarray:
    return np.asarray(m.values if isinstance(m, SaliencyMap) else m,
                      dtype=np.float64)


def saliency_l2(map_a, map_b, normalized: bool = False) -> float:
    """L2 distance between two maps; optionally unit-normalize each first."""
    a, b = _values(map_a), _values(map_b)
    if a.shape != b.shape:
        raise ContractError(f"map shape mismatch: {a.shape} vs {b.shape}")
    if normalized:
        a = a / max(np.linalg.norm(a), 1e-32)
        b = b / max(np.linalg.norm(b), 1e-32)
    return float(np.linalg.norm(a - b))


def export_maps_csv(maps, path) -> None:
    """Write maps as rows: sample_id, model_id, target_class, v0, v1, ..."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as f:
        writer = csv.writer(f)
        for m in maps:
            writer.writerow([m.sample_id, m.model_id, m.target_class,
                             *(repr(float(v)) for v in m.values.reshape(-1))])
    tmp.replace(path)
