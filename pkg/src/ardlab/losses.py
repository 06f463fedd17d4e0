"""Classification losses built from autodiff primitives."""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ContractError("labels outside [0, n_classes)")
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def cross_entropy_per_sample(logits: Tensor, labels) -> Tensor:
    """-log softmax(logits)[y] per row, stable for extreme logits."""
    mask = one_hot(labels, logits.shape[-1])
    logp = ad.log_softmax(logits)
    return ad.scale(ad.sum(ad.multiply(logp, Tensor(mask)), axis=1), -1.0)


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean softmax cross-entropy over the batch."""
    return ad.mean(cross_entropy_per_sample(logits, labels))


def neg_margin_per_sample(logits: Tensor, labels) -> Tensor:
    """max_{k != y} z_k - z_y per row; positive iff the row is misclassified."""
    mask = one_hot(labels, logits.shape[-1])
    # push the true-class logit far down so amax sees only the others
    others = ad.subtract(logits, Tensor(mask * 1e9))
    z_y = ad.sum(ad.multiply(logits, Tensor(mask)), axis=1)
    return ad.subtract(ad.amax(others, axis=-1), z_y)
