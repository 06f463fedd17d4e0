"""Experiment building blocks: metric rows, teacher training, sweeps.

Accuracies are percentages (two decimals in reports, full precision in the
row objects). Everything here is deterministic given its seeds.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .attacks import AttackConfig, pgd_cross_entropy
from .autodiff import Tensor
from .data import Dataset
from .distill import (DistillConfig, OptimizerConfig, TrainRecord, sgd_step,
                      train)
from .errors import ContractError
from .losses import cross_entropy
from .models import MlpModel, forward, predict

CSV_HEADER = ("strategy", "eps", "seed", "acc", "racc", "sum_acc", "runtime_s")

# Table-style loss-weight ratio grid (adv : clean prior weights)
RATIO_GRID = ((1.0, 0.5), (2.0, 0.5), (3.0, 0.5), (3.5, 0.5), (3.0, 1.0),
              (7.0, 0.3))


@dataclass(frozen=True)
class MetricsRow:
    """One evaluation: clean / robust / combined accuracy in percent."""

    strategy: str
    eps: float
    seed: int
    acc: float
    racc: float
    runtime_s: float = 0.0

    @property
    def sum_acc(self) -> float:
        return self.acc + self.racc

    def csv_values(self) -> tuple:
        # runtime_s stays a fixed placeholder so outputs are byte-identical
        # across reruns; wall-clock goes to the timings log instead
        return (self.strategy, f"{self.eps:g}", self.seed, f"{self.acc:.2f}",
                f"{self.racc:.2f}", f"{self.sum_acc:.2f}", "0.00")


def write_metrics_csv(rows, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(row.csv_values())
    tmp.replace(path)


def accuracy_pct(model: MlpModel, x: np.ndarray, y: np.ndarray) -> float:
    return 100.0 * float((predict(model, x) == y).mean())


def evaluate(model: MlpModel, dataset: Dataset, attack_cfg: AttackConfig,
             strategy: str = "", seed: int = 0) -> MetricsRow:
    """Clean and under-PGD top-1 accuracy; ties break toward lower classes."""
    acc = accuracy_pct(model, dataset.features, dataset.labels)
    if attack_cfg.epsilon == 0.0:
        racc = acc
    else:
        x_adv = pgd_cross_entropy(model, dataset.features, dataset.labels,
                                  attack_cfg)
        racc = accuracy_pct(model, x_adv, dataset.labels)
    return MetricsRow(strategy=strategy, eps=attack_cfg.epsilon, seed=seed,
                      acc=acc, racc=racc)


def train_supervised(model: MlpModel, dataset: Dataset,
                     opt: OptimizerConfig) -> MlpModel:
    """Plain cross-entropy SGD on clean inputs."""
    rng = np.random.default_rng(opt.seed)
    model.set_trainable(True)
    velocities = [np.zeros_like(p.data) for p in model.parameters()]
    feats, labels, n = dataset.features, dataset.labels, len(dataset)
    for _ in range(opt.epochs):
        order = rng.permutation(n)
        for start in range(0, n, opt.batch_size):
            batch = order[start:start + opt.batch_size]
            loss = cross_entropy(forward(model, Tensor(feats[batch])),
                                 labels[batch])
            model.zero_grad()
            loss.backward()
            sgd_step(model.parameters(), velocities, opt.lr, opt.momentum)
    model.set_trainable(False)
    return model


def train_adversarial(model: MlpModel, dataset: Dataset, opt: OptimizerConfig,
                      attack_cfg: AttackConfig) -> MlpModel:
    """Adversarial training: each batch is replaced by its PGD perturbation."""
    rng = np.random.default_rng(opt.seed)
    inner = replace(attack_cfg, random_start=False)
    model.set_trainable(True)
    velocities = [np.zeros_like(p.data) for p in model.parameters()]
    feats, labels, n = dataset.features, dataset.labels, len(dataset)
    for _ in range(opt.epochs):
        order = rng.permutation(n)
        for start in range(0, n, opt.batch_size):
            batch = order[start:start + opt.batch_size]
            model.set_trainable(False)
            x_adv = pgd_cross_entropy(model, feats[batch], labels[batch], inner)
            model.set_trainable(True)
            loss = cross_entropy(forward(model, Tensor(x_adv)), labels[batch])
            model.zero_grad()
            loss.backward()
            sgd_step(model.parameters(), velocities, opt.lr, opt.momentum)
    model.set_trainable(False)
    return model


@dataclass
class TeacherPair:
    clean: MlpModel
    adv: MlpModel


def train_teachers(train_set: Dataset, test_set: Dataset, hidden: list[int],
                   opt: OptimizerConfig, attack_cfg: AttackConfig,
                   seed: int) -> tuple[TeacherPair, list[MetricsRow]]:
    """Train the clean and adversarial teachers and check their ordering.

    The clean teacher must end with higher clean accuracy and the adversarial
    teacher with higher robust accuracy at the training radius; anything else
    makes distillation meaningless, so it is a hard error.
    """
    dims = [train_set.dim, *hidden, train_set.n_classes]
    clean = MlpModel(dims, role="clean_teacher", seed=seed)
    adv = MlpModel(dims, role="adv_teacher", seed=seed + 1)
    train_supervised(clean, train_set, replace(opt, seed=seed))
    train_adversarial(adv, train_set, replace(opt, seed=seed + 1), attack_cfg)
    rows = [evaluate(clean, test_set, attack_cfg, "clean_teacher", seed),
            evaluate(adv, test_set, attack_cfg, "adv_teacher", seed)]
    if not rows[0].acc > rows[1].acc:
        raise ContractError(
            f"clean teacher acc {rows[0].acc:.2f} not above adversarial "
            f"teacher acc {rows[1].acc:.2f}")
    if not rows[1].racc > rows[0].racc:
        raise ContractError(
            f"adversarial teacher racc {rows[1].racc:.2f} not above clean "
            f"teacher racc {rows[0].racc:.2f}")
    return TeacherPair(clean=clean, adv=adv), rows


def distill_student(teachers: TeacherPair, train_set: Dataset,
                    hidden: list[int], cfg: DistillConfig,
                    seed: int) -> tuple[MlpModel, TrainRecord]:
    """Fresh student distilled from the teacher pair, seeded end to end."""
    dims = [train_set.dim, *hidden, train_set.n_classes]
    student = MlpModel(dims, role="student", seed=seed + 2)
    cfg = replace(cfg, optimizer=replace(cfg.optimizer, seed=seed + 2))
    return train(student, teachers.clean, teachers.adv, train_set, cfg)


def strategy_sweep(teachers: TeacherPair, train_set: Dataset,
                   test_set: Dataset, hidden: list[int], cfg: DistillConfig,
                   eps_grid, eval_cfg: AttackConfig, seed: int,
                   strategies=("single_adv", "average", "weighted")):
    """Distill one student per strategy; evaluate on the epsilon grid."""
    rows, students = [], {}
    for strategy in strategies:
        student, record = distill_student(
            teachers, train_set, hidden, replace(cfg, strategy=strategy), seed)
        students[strategy] = (student, record)
        for eps in eps_grid:
            rows.append(evaluate(student, test_set,
                                 replace(eval_cfg, epsilon=eps),
                                 strategy, seed))
    return rows, students


def ratio_sweep(teachers: TeacherPair, train_set: Dataset, test_set: Dataset,
                hidden: list[int], cfg: DistillConfig, eps_grid,
                eval_cfg: AttackConfig, seed: int, grid=RATIO_GRID):
    """Distill one weighted student per (ratio_adv, ratio_org) pair."""
    rows = []
    for ratio_adv, ratio_org in grid:
        student, _ = distill_student(
            teachers, train_set, hidden,
            replace(cfg, strategy="weighted", ratio_adv=ratio_adv,
                    ratio_org=ratio_org), seed)
        label = f"ratio_{ratio_adv:g}:{ratio_org:g}"
        for eps in eps_grid:
            rows.append(evaluate(student, test_set,
                                 replace(eval_cfg, epsilon=eps), label, seed))
    return rows


def mean_rows(rows) -> dict:
    """Group rows by (strategy, eps) and average acc/racc over seeds."""
    groups: dict = {}
    for row in rows:
        groups.setdefault((row.strategy, row.eps), []).append(row)
    out = {}
    for key, grp in groups.items():
        out[key] = {
            "acc": float(np.mean([r.acc for r in grp])),
            "racc": float(np.mean([r.racc for r in grp])),
            "sum_acc": float(np.mean([r.sum_acc for r in grp])),
        }
    return out


def mean_dynamic_weight(record: TrainRecord) -> float:
    """Average of the per-epoch mean sigmoid weights seen during training."""
    if not record.mean_w_adv:
        return 0.5
    return float(np.mean(record.mean_w_adv))
