"""Shared fixtures: datasets, trained model stacks, suite wall clock.

The heavy experiment fixtures are session-scoped so the acceptance criteria
and module tests share one set of deterministic training runs. Acceptance
tests are moved to the end of the collection so the wall-clock criterion
covers the whole suite.
"""
from __future__ import annotations

import time
from dataclasses import replace

import numpy as np
import pytest

from ardlab import AttackConfig, DistillConfig, OptimizerConfig
from ardlab.config import DatasetSpec, build_datasets
from ardlab.data import export_digits_corpus, load_mnist_idx
from ardlab.experiments import (distill_student, ratio_sweep, strategy_sweep,
                                train_supervised, train_teachers)
from ardlab.models import MlpModel

SEEDS = (0, 1, 2)

_SUITE_START = time.monotonic()


def suite_elapsed() -> float:
    return time.monotonic() - _SUITE_START


def pytest_collection_modifyitems(items):
    items.sort(key=lambda it: it.fspath.basename == "test_acceptance.py")


# ---------------------------------------------------------------- moons lab

MOONS_SPEC = DatasetSpec(kind="two_moons", n=800, test_n=400, noise=0.15)
MOONS_TEACHER_OPT = OptimizerConfig(lr=0.1, momentum=0.9, epochs=20,
                                    batch_size=64)
MOONS_TEACHER_ATTACK = AttackConfig(norm="l2", epsilon=0.3, steps=7,
                                    random_start=False)
MOONS_DISTILL = DistillConfig(
    strategy="weighted",
    attack=AttackConfig(norm="l2", epsilon=0.3, steps=5, random_start=False),
    optimizer=OptimizerConfig(lr=0.1, momentum=0.9, epochs=25, batch_size=64))


@pytest.fixture(scope="session")
def moons_data():
    return build_datasets(MOONS_SPEC)


@pytest.fixture(scope="session")
def moons_runs(moons_data):
    """Per seed: teachers, weighted student, train record, wall time."""
    train_set, test_set = moons_data
    runs = {}
    for seed in SEEDS:
        t0 = time.monotonic()
        pair, teacher_rows = train_teachers(
            train_set, test_set, [64, 64], MOONS_TEACHER_OPT,
            MOONS_TEACHER_ATTACK, seed)
        student, record = distill_student(pair, train_set, [32],
                                          MOONS_DISTILL, seed)
        runs[seed] = {
            "teachers": pair, "teacher_rows": teacher_rows,
            "student": student, "record": record,
            "seconds": time.monotonic() - t0,
        }
    return runs


# --------------------------------------------------------------- digits lab

DIGITS_TEACHER_OPT = OptimizerConfig(lr=0.1, momentum=0.9, epochs=20,
                                     batch_size=128)
# strong-attack regime: big accuracy/robustness gap between the teachers
DIGITS_TEACHER_ATTACK = AttackConfig(norm="linf", epsilon=0.15, steps=7,
                                     random_start=False, clamp=(0.0, 1.0))
DIGITS_DISTILL = DistillConfig(
    strategy="weighted",
    attack=AttackConfig(norm="linf", epsilon=0.15, steps=5,
                        random_start=False, clamp=(0.0, 1.0)),
    optimizer=OptimizerConfig(lr=0.1, momentum=0.9, epochs=20, batch_size=128))
DIGITS_EVAL_EPS = 0.1
DIGITS_EVAL_ATTACK = AttackConfig(norm="linf", epsilon=DIGITS_EVAL_EPS,
                                  steps=10, random_start=True,
                                  clamp=(0.0, 1.0))


@pytest.fixture(scope="session")
def digits_paths(tmp_path_factory):
    return export_digits_corpus(tmp_path_factory.mktemp("digits_idx"),
                                test_count=500, seed=0)


@pytest.fixture(scope="session")
def digits_data(digits_paths):
    train_set = load_mnist_idx(digits_paths["train_images"],
                               digits_paths["train_labels"], 10000, "train")
    test_set = load_mnist_idx(digits_paths["test_images"],
                              digits_paths["test_labels"], 2000, "test")
    return train_set, test_set


@pytest.fixture(scope="session")
def digits_teachers(digits_data):
    train_set, test_set = digits_data
    pairs = {}
    for seed in SEEDS:
        pairs[seed], _ = train_teachers(train_set, test_set, [64, 64],
                                        DIGITS_TEACHER_OPT,
                                        DIGITS_TEACHER_ATTACK, seed)
    return pairs


@pytest.fixture(scope="session")
def digits_ablation(digits_data, digits_teachers):
    """Strategy and ratio sweeps over all seeds at the shared eval radius."""
    train_set, test_set = digits_data
    t0 = time.monotonic()
    strategy_rows, ratio_rows = [], []
    students = {}
    for seed in SEEDS:
        pair = digits_teachers[seed]
        rows, per_strategy = strategy_sweep(
            pair, train_set, test_set, [32], DIGITS_DISTILL,
            [DIGITS_EVAL_EPS], replace(DIGITS_EVAL_ATTACK, seed=seed), seed)
        strategy_rows.extend(rows)
        students[seed] = per_strategy
        ratio_rows.extend(ratio_sweep(
            pair, train_set, test_set, [32], DIGITS_DISTILL,
            [DIGITS_EVAL_EPS], replace(DIGITS_EVAL_ATTACK, seed=seed), seed))
    return {"strategy_rows": strategy_rows, "ratio_rows": ratio_rows,
            "students": students, "seconds": time.monotonic() - t0}


@pytest.fixture(scope="session")
def digits_saliency_runs(digits_data):
    """Teacher/student stacks for the attention-transfer comparison.

    Teachers train at a milder radius here so the adversarial teacher's
    input-gradient maps keep healthy magnitude.
    """
    train_set, test_set = digits_data
    attack = AttackConfig(norm="linf", epsilon=0.1, steps=7,
                          random_start=False, clamp=(0.0, 1.0))
    cfg = replace(DIGITS_DISTILL,
                  attack=replace(DIGITS_DISTILL.attack, epsilon=0.1))
    runs = {}
    for seed in SEEDS:
        pair, _ = train_teachers(train_set, test_set, [64, 64],
                                 DIGITS_TEACHER_OPT, attack, seed)
        student, _ = distill_student(pair, train_set, [32], cfg, seed)
        dims = [train_set.dim, 32, train_set.n_classes]
        init = MlpModel(dims, role="student", seed=seed + 2)
        supervised = MlpModel(dims, role="student", seed=seed + 2)
        train_supervised(supervised, train_set,
                         replace(DIGITS_TEACHER_OPT, seed=seed + 2))
        runs[seed] = {"teachers": pair, "distilled": student, "init": init,
                      "supervised": supervised}
    return runs


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
