"""Dual-teacher distillation: KL losses, confidence weighting, training loop.

A student minimizes a weighted pair of KL terms: one against the clean
teacher on clean inputs, one against the adversarial teacher on inputs
perturbed by the feature-space inner maximization. Per-sample weights come
from a sigmoid of the teachers' confidence ratio.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from . import autodiff as ad
from .autodiff import Tensor
from .attacks import AttackConfig, feature_attack, pgd_cross_entropy
from .errors import ContractError, TrainingDivergedError
from .models import MlpModel, forward, forward_np, predict

STRATEGIES = ("single_adv", "average", "weighted", "fixed_alpha")
KL_DIRECTIONS = ("teacher_ref", "student_ref")

PROB_FLOOR = 1e-12


@dataclass
class OptimizerConfig:
    """Plain SGD with momentum."""

    lr: float = 0.1
    momentum: float = 0.9
    epochs: int = 30
    batch_size: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0 or not (0 <= self.momentum < 1):
            raise ContractError("bad optimizer settings")
        if self.epochs < 0 or self.batch_size < 1:
            raise ContractError("bad optimizer settings")


@dataclass
class DistillConfig:
    """Every knob of the composite distillation objective."""

    strategy: str = "weighted"
    alpha: float = 0.5            # fixed_alpha mode: loss = (1-a)*clean + a*adv
    ratio_adv: float = 3.0        # prior loss-weight ratio, adv side
    ratio_org: float = 0.5        # prior loss-weight ratio, clean side
    slope_lambda: float = 4.0     # sigmoid slope for dynamic weights
    offset_tau: float = 1.0       # sigmoid offset
    upsilon: float = 1e-5         # stabilizer in the confidence ratio
    temperature: float = 1.0
    kl_direction: str = "teacher_ref"
    attack: AttackConfig = field(default_factory=AttackConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ContractError(f"unknown strategy {self.strategy!r}")
        if self.kl_direction not in KL_DIRECTIONS:
            raise ContractError(f"unknown kl_direction {self.kl_direction!r}")
        if not (0.0 <= self.alpha <= 1.0):
            raise ContractError("alpha must be in [0, 1]")
        if self.upsilon <= 0 or self.temperature <= 0 or self.slope_lambda <= 0:
            raise ContractError("upsilon, temperature, slope_lambda must be > 0")
        if self.ratio_adv < 0 or self.ratio_org < 0 or \
                (self.ratio_adv == 0 and self.ratio_org == 0):
            raise ContractError("ratios must be >= 0 and not both 0")


@dataclass
class TrainRecord:
    """Per-epoch training diagnostics; list lengths equal the epoch count."""

    clean_loss: list[float] = field(default_factory=list)
    adv_loss: list[float] = field(default_factory=list)
    mean_w_adv: list[float] = field(default_factory=list)
    acc: list[float] = field(default_factory=list)
    racc: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"clean_loss": self.clean_loss, "adv_loss": self.adv_loss,
                "mean_w_adv": self.mean_w_adv, "acc": self.acc,
                "racc": self.racc}


def confidence(logits) -> np.ndarray:
    """Per-row max softmax probability; in [1/C, 1)."""
    z = np.asarray(logits.data if isinstance(logits, Tensor) else logits,
                   dtype=np.float64)
    if z.ndim == 1:
        z = z[None, :]
    if z.shape[-1] < 2:
        raise ContractError("confidence needs at least 2 classes")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return (e / e.sum(axis=-1, keepdims=True)).max(axis=-1)


def weight_ratio(conf_adv, conf_org, upsilon: float):
    """conf_adv / (conf_org + upsilon); upsilon > 0 keeps this finite."""
    if upsilon <= 0:
        raise ContractError("upsilon must be > 0")
    return np.asarray(conf_adv, dtype=np.float64) / \
        (np.asarray(conf_org, dtype=np.float64) + upsilon)


def dynamic_weights(rho, slope_lambda: float, offset_tau: float):
    """Sigmoid weights: w_adv = sigmoid(lambda * (rho - tau)), w_clean = 1 - w_adv."""
    if slope_lambda <= 0:
        raise ContractError("slope_lambda must be > 0")
    w_adv = expit(slope_lambda * (np.asarray(rho, dtype=np.float64) - offset_tau))
    return w_adv, 1.0 - w_adv


def effective_weights(w_adv, ratio_adv: float, ratio_org: float):
    """Scale dynamic weights by the prior ratio and renormalize to sum 1."""
    ea = ratio_adv * np.asarray(w_adv, dtype=np.float64)
    ec = ratio_org * (1.0 - np.asarray(w_adv, dtype=np.float64))
    total = ea + ec
    if np.any(total <= 0):
        raise ContractError("effective weights collapsed to zero")
    return ea / total, ec / total


def _soft_probs(logits: np.ndarray, temperature: float) -> np.ndarray:
    z = logits / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def kl_per_sample(student_logits: Tensor, teacher_logits: np.ndarray,
                  temperature: float = 1.0,
                  direction: str = "teacher_ref") -> Tensor:
    """Per-sample KL between softened distributions.

    teacher_ref: KL(p_T || p_S) (gradient pulls the student toward the
    teacher); student_ref reverses the arguments. Probabilities are clamped
    at 1e-12 inside logs.
    """
    if direction not in KL_DIRECTIONS:
        raise ContractError(f"unknown kl direction {direction!r}")
    teacher_logits = np.asarray(teacher_logits, dtype=np.float64)
    if student_logits.shape != teacher_logits.shape:
        raise ContractError(
            f"logit shape mismatch: {student_logits.shape} vs "
            f"{teacher_logits.shape}")
    p_t = _soft_probs(teacher_logits, temperature)
    log_p_t = np.log(np.maximum(p_t, PROB_FLOOR))
    p_s = ad.softmax(ad.scale(student_logits, 1.0 / temperature))
    log_p_s = ad.log(ad.clamp_min(p_s, PROB_FLOOR))
    if direction == "teacher_ref":
        # sum_k p_t * (log p_t - log p_s)
        cross = ad.sum(ad.multiply(log_p_s, Tensor(p_t)), axis=1)
        entropy = (p_t * log_p_t).sum(axis=1)
        return ad.add(ad.scale(cross, -1.0), Tensor(entropy))
    # sum_k p_s * (log p_s - log p_t)
    inner = ad.subtract(log_p_s, Tensor(np.broadcast_to(log_p_t, p_t.shape).copy()))
    return ad.sum(ad.multiply(p_s, inner), axis=1)


def kl_loss(student_logits, teacher_logits, temperature: float = 1.0,
            direction: str = "teacher_ref") -> Tensor:
    """Batch-mean KL divergence between softened distributions (>= 0)."""
    student_logits = student_logits if isinstance(student_logits, Tensor) \
        else Tensor(student_logits)
    return ad.mean(kl_per_sample(student_logits, teacher_logits, temperature,
                                 direction))


def composite_loss(student: MlpModel, t_org: MlpModel, t_adv: MlpModel,
                   x_clean: np.ndarray, cfg: DistillConfig):
    """One-batch distillation objective; returns (loss Tensor, diagnostics).

    Builds adversarial inputs by maximizing the feature distance between the
    student at x+delta and the clean teacher at x, then combines
    KL(student(x) vs t_org(x)) and KL(student(x_adv) vs t_adv(x_adv)) with
    strategy-dependent weights.
    """
    x_clean = np.ascontiguousarray(np.asarray(x_clean, dtype=np.float64))
    trainable = [p.requires_grad for p in student.parameters()]
    student.set_trainable(False)
    try:
        delta, p_vals = feature_attack(student, t_org, x_clean, cfg.attack)
    finally:
        for p, flag in zip(student.parameters(), trainable):
            p.requires_grad = flag
    x_adv = x_clean + delta

    t_org_logits = forward_np(t_org, x_clean)
    t_adv_logits = forward_np(t_adv, x_adv)
    kl_clean = kl_per_sample(forward(student, Tensor(x_clean)), t_org_logits,
                             cfg.temperature, cfg.kl_direction)
    kl_adv = kl_per_sample(forward(student, Tensor(x_adv)), t_adv_logits,
                           cfg.temperature, cfg.kl_direction)

    diag = {
        "kl_clean": float(kl_clean.data.mean()),
        "kl_adv": float(kl_adv.data.mean()),
        "feature_gap": float(p_vals.mean()),
    }

    def add_discrepancy(w_adv_mean: float) -> None:
        # student-vs-ensemble fit at the clean inputs, diagnostic only
        ens = (1.0 - w_adv_mean) * t_org_logits + \
            w_adv_mean * forward_np(t_adv, x_clean)
        s_clean = forward_np(student, x_clean)
        diag["mean_discrepancy"] = float(
            np.abs(s_clean - ens).max(axis=1).mean())
    if cfg.strategy == "weighted":
        conf_adv = confidence(t_adv_logits)
        conf_org = confidence(t_org_logits)
        rho = weight_ratio(conf_adv, conf_org, cfg.upsilon)
        w_adv, _ = dynamic_weights(rho, cfg.slope_lambda, cfg.offset_tau)
        eff_adv, eff_clean = effective_weights(w_adv, cfg.ratio_adv,
                                               cfg.ratio_org)
        loss = ad.mean(ad.add(ad.multiply(kl_adv, Tensor(eff_adv)),
                              ad.multiply(kl_clean, Tensor(eff_clean))))
        diag["mean_w_adv"] = float(w_adv.mean())
        diag["mean_eff_adv"] = float(eff_adv.mean())
        add_discrepancy(diag["mean_eff_adv"])
    else:
        if cfg.strategy == "single_adv":
            w_adv = 1.0
        elif cfg.strategy == "average":
            w_adv = 0.5
        else:  # fixed_alpha
            w_adv = cfg.alpha
        loss = ad.add(ad.scale(ad.mean(kl_adv), w_adv),
                      ad.scale(ad.mean(kl_clean), 1.0 - w_adv))
        diag["mean_w_adv"] = float(w_adv)
        diag["mean_eff_adv"] = float(w_adv)
        add_discrepancy(float(w_adv))
    return loss, diag


def sgd_step(params: list[Tensor], velocities: list[np.ndarray],
             lr: float, momentum: float) -> None:
    for p, v in zip(params, velocities):
        if p.grad is None:
            continue
        v *= momentum
        v += p.grad
        p.data -= lr * v


def _accuracy(model: MlpModel, x: np.ndarray, y: np.ndarray) -> float:
    return float((predict(model, x) == y).mean())


def train(student: MlpModel, t_org: MlpModel, t_adv: MlpModel, dataset,
          cfg: DistillConfig, eval_set=None):
    """Distill the student against both frozen teachers with SGD.

    When eval_set is None a deterministic tenth of the data (at most 256
    samples) is held out for the per-epoch acc/racc diagnostics. Returns
    (student, TrainRecord); teachers are never written to.
    """
    if len(dataset) == 0:
        raise ContractError("dataset is empty")
    for t in (t_org, t_adv):
        if any(p.requires_grad for p in t.parameters()):
            raise ContractError("teachers must be frozen (requires_grad False)")
    opt = cfg.optimizer
    rng = np.random.default_rng(opt.seed)
    if eval_set is None:
        order = rng.permutation(len(dataset))
        n_hold = min(256, max(1, len(dataset) // 10))
        eval_set = dataset.subset(order[:n_hold])
        train_set = dataset.subset(order[n_hold:])
    else:
        train_set = dataset
    if len(train_set) == 0:
        raise ContractError("no training samples left after holdout")

    eval_attack = replace(cfg.attack, random_start=False)
    student.set_trainable(True)
    velocities = [np.zeros_like(p.data) for p in student.parameters()]
    record = TrainRecord()
    feats, n = train_set.features, len(train_set)
    for epoch in range(opt.epochs):
        order = rng.permutation(n)
        sums = {"kl_clean": 0.0, "kl_adv": 0.0, "mean_w_adv": 0.0}
        for start in range(0, n, opt.batch_size):
            batch = order[start:start + opt.batch_size]
            loss, diag = composite_loss(student, t_org, t_adv, feats[batch], cfg)
            if loss.item() > 1e6:
                raise TrainingDivergedError(epoch, loss.item())
            student.zero_grad()
            loss.backward()
            sgd_step(student.parameters(), velocities, opt.lr, opt.momentum)
            for key in sums:
                sums[key] += diag[key] * len(batch)
        record.clean_loss.append(sums["kl_clean"] / n)
        record.adv_loss.append(sums["kl_adv"] / n)
        record.mean_w_adv.append(sums["mean_w_adv"] / n)
        record.acc.append(_accuracy(student, eval_set.features, eval_set.labels))
        x_adv = pgd_cross_entropy(student, eval_set.features, eval_set.labels,
                                  eval_attack)
        record.racc.append(_accuracy(student, x_adv, eval_set.labels))
    student.set_trainable(False)
    return student, record
