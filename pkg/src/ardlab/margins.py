"""Margin bounds for robustness transfer: certify, then try to falsify.

For a student that fits a weighted teacher ensemble within l-inf discrepancy
Delta(x), the prediction at x cannot flip under any l2 perturbation smaller
than (avg teacher margin - 2*Delta) / (2 * L), with L the student's certified
Lipschitz upper bound. verify_bound computes that radius per sample and
attacks just inside it; any flip is an implementation bug.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attacks import AttackConfig, ascend
from .autodiff import Tensor
from .errors import ContractError
from .losses import neg_margin_per_sample
from .models import MlpModel, forward, forward_np, lipschitz_upper

EPS_SAFETY = 0.99  # attack strictly inside the certified radius


def margin(logits, y: int) -> float:
    """True-class logit minus the largest other-class logit."""
    z = np.asarray(logits.data if isinstance(logits, Tensor) else logits,
                   dtype=np.float64).reshape(-1)
    if z.size < 2:
        raise ContractError("margin needs at least 2 classes")
    if not (0 <= y < z.size):
        raise ContractError(f"label {y} outside [0, {z.size})")
    others = np.delete(z, y)
    return float(z[y] - others.max())


def ensemble_logits(teacher_logits, weights) -> np.ndarray:
    """Weighted sum of teacher logit vectors; weights on the simplex."""
    weights = np.asarray(weights, dtype=np.float64)
    stacked = np.stack([np.asarray(t.data if isinstance(t, Tensor) else t,
                                   dtype=np.float64) for t in teacher_logits])
    if weights.shape != (stacked.shape[0],):
        raise ContractError("one weight per teacher required")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ContractError("weights must be nonnegative and sum to 1")
    return np.tensordot(weights, stacked, axes=1)


def discrepancy(student_logits, ens_logits) -> float:
    """l-inf distance between student and ensemble logits."""
    a = np.asarray(student_logits.data if isinstance(student_logits, Tensor)
                   else student_logits, dtype=np.float64)
    b = np.asarray(ens_logits.data if isinstance(ens_logits, Tensor)
                   else ens_logits, dtype=np.float64)
    if a.shape != b.shape:
        raise ContractError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.abs(a - b).max())


def certified_radius(avg_margin: float, delta: float, l_s: float) -> float:
    """max(0, (avg_margin - 2*delta) / (2*L)); 0 means no certificate."""
    if l_s <= 0:
        raise ContractError("Lipschitz bound must be > 0")
    return max(0.0, (avg_margin - 2.0 * delta) / (2.0 * l_s))


@dataclass
class SampleCert:
    index: int
    label: int
    prediction: int
    teacher_margins: list[float]
    avg_margin: float
    ensemble_margin: float
    discrepancy: float
    radius: float
    certified: bool
    attacked: bool = False
    flipped: bool = False

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in (
            "index", "label", "prediction", "teacher_margins", "avg_margin",
            "ensemble_margin", "discrepancy", "radius", "certified",
            "attacked", "flipped")}


@dataclass
class MarginReport:
    lipschitz: float
    weights: list[float]
    eps_factor: float
    samples: list[SampleCert] = field(default_factory=list)

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    @property
    def n_certified(self) -> int:
        return sum(s.certified for s in self.samples)

    @property
    def violations(self) -> int:
        return sum(s.flipped for s in self.samples)

    def to_json(self) -> dict:
        return {
            "lipschitz": self.lipschitz,
            "weights": self.weights,
            "eps_factor": self.eps_factor,
            "n_samples": self.n_samples,
            "n_certified": self.n_certified,
            "violations": self.violations,
            "samples": [s.to_json() for s in self.samples],
        }

    def save(self, path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(self.to_json(), sort_keys=True, indent=2))
        tmp.replace(path)


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("ARDLAB_THREADS", "1")))
    except ValueError:
        return 1


def verify_bound(student: MlpModel, teachers, weights, dataset,
                 attack_cfg: AttackConfig) -> MarginReport:
    """Certify every sample, then attack the certified ones just inside r(x).

    The theorem is stated for l2 perturbations, so attack_cfg.norm must be
    "l2"; its epsilon field is ignored in favor of 0.99 * r(x) per sample.
    Samples the student already misclassifies are never certified.
    """
    if attack_cfg.norm != "l2":
        raise ContractError("the margin bound holds for l2 perturbations only")
    weights = np.asarray(weights, dtype=np.float64)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ContractError("weights must be nonnegative and sum to 1")
    l_s = lipschitz_upper(student)
    x, y = dataset.features, dataset.labels
    n = len(dataset)

    teacher_logits = [forward_np(t, x) for t in teachers]
    ens = np.tensordot(weights, np.stack(teacher_logits), axes=1)
    student_logits = forward_np(student, x)
    preds = np.argmax(student_logits, axis=1)

    samples = []
    for i in range(n):
        gammas = [margin(tl[i], int(y[i])) for tl in teacher_logits]
        avg = float(np.dot(weights, gammas))
        gamma_ens = margin(ens[i], int(y[i]))
        delta = discrepancy(student_logits[i], ens[i])
        radius = certified_radius(avg, delta, l_s)
        certified = bool(preds[i] == y[i] and radius > 0.0)
        samples.append(SampleCert(
            index=i, label=int(y[i]), prediction=int(preds[i]),
            teacher_margins=gammas, avg_margin=avg,
            ensemble_margin=gamma_ens, discrepancy=delta,
            radius=radius, certified=certified))

    cert_idx = np.array([s.index for s in samples if s.certified], dtype=int)
    if cert_idx.size:
        radii = np.array([samples[i].radius for i in cert_idx])
        eps = EPS_SAFETY * radii

        def attack_chunk(chunk: np.ndarray) -> np.ndarray:
            pos = np.searchsorted(cert_idx, chunk)

            def objective(xt: Tensor) -> Tensor:
                return neg_margin_per_sample(forward(student, xt), y[chunk])

            x_adv, _ = ascend(objective, x[chunk], attack_cfg, eps=eps[pos],
                              sample_ids=chunk)
            return np.argmax(forward_np(student, x_adv), axis=1)

        threads = _thread_count()
        if threads > 1 and cert_idx.size > 1:
            chunks = np.array_split(cert_idx, min(threads, cert_idx.size))
            with ThreadPoolExecutor(max_workers=threads) as pool:
                adv_preds = np.concatenate(list(pool.map(attack_chunk, chunks)))
        else:
            adv_preds = attack_chunk(cert_idx)
        for i, p_adv in zip(cert_idx, adv_preds):
            samples[i].attacked = True
            samples[i].flipped = bool(p_adv != y[i])

    return MarginReport(lipschitz=l_s, weights=[float(w) for w in weights],
                        eps_factor=EPS_SAFETY, samples=samples)
