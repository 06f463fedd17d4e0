"""Adversarial example generation: FGSM, PGD, and feature-space ascent.

The engine maximizes a per-sample objective by projected gradient ascent.
Perturbations always end inside the epsilon ball (to 1e-9) in the configured
norm; restarts and random starts draw from per-(seed, restart, sample) RNG
streams so results do not depend on batching or thread count.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, NumericError
from .losses import cross_entropy_per_sample
from .models import MlpModel, forward, forward_np

_TINY = 1e-32


@dataclass
class AttackConfig:
    """Norm ball and iteration budget for gradient attacks."""

    norm: str = "linf"          # linf | l2
    epsilon: float = 0.1
    steps: int = 10
    step_size: float | None = None   # default 2.5 * epsilon / steps
    restarts: int = 1
    random_start: bool = True
    seed: int = 0
    clamp: tuple[float, float] | None = None  # e.g. (0, 1) for pixel data

    def __post_init__(self):
        if self.norm not in ("linf", "l2"):
            raise ContractError(f"unknown norm {self.norm!r}")
        if self.epsilon < 0:
            raise ContractError("epsilon must be >= 0")
        if self.steps < 1:
            raise ContractError("steps must be >= 1")
        if self.step_size is not None and self.step_size <= 0:
            raise ContractError("step_size must be > 0")
        if self.restarts < 1:
            raise ContractError("restarts must be >= 1")
        if self.clamp is not None and self.clamp[0] >= self.clamp[1]:
            raise ContractError("clamp bounds must satisfy lo < hi")

    def resolved_step(self, eps):
        if self.step_size is not None:
            return self.step_size
        return 2.5 * np.asarray(eps, dtype=np.float64) / self.steps


def _row_norms(x: np.ndarray) -> np.ndarray:
    return np.sqrt((x * x).sum(axis=1, keepdims=True))


def project_delta(delta: np.ndarray, norm: str, eps) -> np.ndarray:
    """Project each row of delta onto its epsilon ball."""
    eps = np.asarray(eps, dtype=np.float64)
    if eps.ndim == 1:
        eps = eps[:, None]
    if norm == "linf":
        return np.clip(delta, -eps, eps)
    norms = _row_norms(delta)
    factor = np.minimum(1.0, eps / np.maximum(norms, _TINY))
    return delta * factor


def _random_start(ids: np.ndarray, d: int, norm: str, eps: np.ndarray,
                  seed: int, restart: int) -> np.ndarray:
    out = np.zeros((ids.size, d))
    for row, sid in enumerate(ids):
        e = float(eps[row])
        if e == 0.0:
            continue
        rng = np.random.default_rng((seed, restart, int(sid)))
        if norm == "linf":
            out[row] = rng.uniform(-e, e, d)
        else:
            g = rng.standard_normal(d)
            g /= max(np.linalg.norm(g), _TINY)
            out[row] = g * e * rng.uniform() ** (1.0 / d)
    return out


def ascend(objective, x0: np.ndarray, cfg: AttackConfig, eps=None,
           sample_ids=None, return_trace: bool = False):
    """Maximize a per-sample objective over the epsilon ball around x0.

    objective(Tensor[n, d]) must return a per-sample Tensor[n]. Each restart
    runs cfg.steps projected ascent steps and keeps its final iterate; the
    per-sample best over restarts (by final objective value) is returned as
    (x_adv, values) plus, optionally, per-restart traces of the objective
    after each step. Random starts draw from per-(seed, restart, sample_id)
    streams, so batch composition never changes the noise a sample sees;
    repeated identical calls are bit-identical. (BLAS summation order can
    still differ across batch *shapes* by float rounding.)
    """
    x0 = np.ascontiguousarray(np.asarray(x0, dtype=np.float64))
    n, d = x0.shape
    ids = np.arange(n) if sample_ids is None else \
        np.asarray(sample_ids).reshape(n)
    eps_vec = np.full(n, cfg.epsilon) if eps is None else \
        np.asarray(eps, dtype=np.float64).reshape(n)
    if np.any(eps_vec < 0):
        raise ContractError("per-sample epsilon must be >= 0")

    def evaluate(x: np.ndarray) -> np.ndarray:
        return np.asarray(objective(Tensor(x)).data).reshape(n)

    if not np.any(eps_vec > 0):
        vals = evaluate(x0)
        traces = [np.tile(vals, (cfg.steps + 1, 1))] * cfg.restarts
        return (x0.copy(), vals, traces) if return_trace else (x0.copy(), vals)

    step = cfg.resolved_step(eps_vec)
    alpha = float(step) if np.ndim(step) == 0 else \
        np.asarray(step, dtype=np.float64).reshape(n, 1)

    best_x, best_vals = None, None
    traces = []
    for r in range(cfg.restarts):
        if cfg.random_start:
            x = x0 + _random_start(ids, d, cfg.norm, eps_vec, cfg.seed, r)
            x = x0 + project_delta(x - x0, cfg.norm, eps_vec)
            if cfg.clamp is not None:
                x = np.clip(x, *cfg.clamp)
        else:
            x = x0.copy()
        trace = np.empty((cfg.steps + 1, n))
        for k in range(cfg.steps):
            xt = Tensor(x, requires_grad=True)
            try:
                vals = objective(xt)
                ad.sum(vals).backward()
            except NumericError as e:
                raise NumericError(
                    f"non-finite value in attack restart {r} step {k}: {e}") from e
            trace[k] = np.asarray(vals.data).reshape(n)
            g = xt.grad
            if cfg.norm == "linf":
                x = x + alpha * np.sign(g)
            else:
                x = x + alpha * (g / np.maximum(_row_norms(g), _TINY))
            x = x0 + project_delta(x - x0, cfg.norm, eps_vec)
            if cfg.clamp is not None:
                x = np.clip(x, *cfg.clamp)
        final = evaluate(x)
        trace[cfg.steps] = final
        traces.append(trace)
        if best_vals is None:
            best_x, best_vals = x, final
        else:
            better = final > best_vals
            best_x = np.where(better[:, None], x, best_x)
            best_vals = np.where(better, final, best_vals)
    if return_trace:
        return best_x, best_vals, traces
    return best_x, best_vals


def fgsm(model: MlpModel, x: np.ndarray, y, epsilon: float) -> np.ndarray:
    """Single-step sign-gradient attack on cross-entropy."""
    if epsilon < 0:
        raise ContractError("epsilon must be >= 0")
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    if epsilon == 0.0:
        return x.copy()
    xt = Tensor(x, requires_grad=True)
    ad.sum(cross_entropy_per_sample(forward(model, xt), y)).backward()
    return x + epsilon * np.sign(xt.grad)


def pgd(model: MlpModel, loss_fn, x: np.ndarray, y, cfg: AttackConfig,
        sample_ids=None, return_trace: bool = False):
    """Projected gradient ascent on loss_fn(logits, y); best restart wins.

    loss_fn maps (logits Tensor[n, C], labels) to per-sample losses [n].
    Returns x_adv, or (x_adv, traces) when return_trace is set.
    """
    def objective(xt: Tensor) -> Tensor:
        return loss_fn(forward(model, xt), y)

    out = ascend(objective, x, cfg, sample_ids=sample_ids,
                 return_trace=return_trace)
    if return_trace:
        x_adv, _, traces = out
        return x_adv, traces
    return out[0]


def pgd_cross_entropy(model: MlpModel, x: np.ndarray, y,
                      cfg: AttackConfig) -> np.ndarray:
    return pgd(model, cross_entropy_per_sample, x, y, cfg)


def feature_attack(m_adv: MlpModel, m_org: MlpModel, x: np.ndarray,
                   cfg: AttackConfig, eps=None, sample_ids=None):
    """Maximize ||m_adv(x + delta) - m_org(x)||_2^2 over the epsilon ball.

    Returns (delta, values): the best perturbation per sample and its
    objective value; values are never below the objective at delta = 0.
    """
    if m_adv.input_dim != m_org.input_dim or m_adv.n_classes != m_org.n_classes:
        raise ContractError("models must share input/output dims")
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    target = forward_np(m_org, x)

    def objective(xt: Tensor) -> Tensor:
        return ad.l2_norm_sq(ad.subtract(forward(m_adv, xt), Tensor(target)),
                             axis=1)

    x_adv, vals = ascend(objective, x, cfg, eps=eps, sample_ids=sample_ids)
    at_zero = ((forward_np(m_adv, x) - target) ** 2).sum(axis=1)
    worse = vals < at_zero
    if np.any(worse):
        x_adv = np.where(worse[:, None], x, x_adv)
        vals = np.where(worse, at_zero, vals)
    return x_adv - x, vals
