"""Experiment config files: INI-style sections, strictly validated keys.

Unknown sections or keys are hard errors, never silently ignored. Epsilon
values accept plain floats or fractions like ``2/255``. The full key
reference lives in the README.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .attacks import AttackConfig
from .data import Dataset, gen_blobs, gen_two_moons, load_mnist_idx
from .distill import DistillConfig, OptimizerConfig
from .errors import ConfigError

DATASET_KINDS = ("two_moons", "blobs", "mnist_idx")


def parse_fraction(text: str) -> float:
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _parse_int(text: str) -> int:
    return int(text.strip())


def _parse_bool(text: str) -> bool:
    text = text.strip().lower()
    if text in ("true", "yes", "1"):
        return True
    if text in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _parse_float_list(text: str) -> list[float]:
    return [parse_fraction(t) for t in text.split(",") if t.strip()]


def _parse_centers(text: str) -> list[list[float]]:
    return [[float(v) for v in part.split(",")]
            for part in text.split(";") if part.strip()]


_SCHEMA = {
    "dataset": {
        "kind": str.strip, "n": _parse_int, "test_n": _parse_int,
        "noise": parse_fraction, "centers": _parse_centers,
        "train_images": str.strip, "train_labels": str.strip,
        "test_images": str.strip, "test_labels": str.strip,
        "limit": _parse_int, "test_limit": _parse_int,
    },
    "teachers": {
        "hidden": _parse_int_list, "lr": parse_fraction,
        "momentum": parse_fraction, "epochs": _parse_int,
        "batch_size": _parse_int, "eps": parse_fraction, "steps": _parse_int,
        "norm": str.strip,
    },
    "student": {"hidden": _parse_int_list},
    "distill": {
        "strategy": str.strip, "alpha": parse_fraction,
        "ratio_adv": parse_fraction, "ratio_org": parse_fraction,
        "slope": parse_fraction, "offset": parse_fraction,
        "upsilon": parse_fraction, "temperature": parse_fraction,
        "kl_direction": str.strip, "lr": parse_fraction,
        "momentum": parse_fraction, "epochs": _parse_int,
        "batch_size": _parse_int, "eps": parse_fraction, "steps": _parse_int,
        "norm": str.strip,
    },
    "eval": {
        "eps_grid": _parse_float_list, "steps": _parse_int,
        "restarts": _parse_int, "norm": str.strip,
        "random_start": _parse_bool,
    },
    "run": {"seeds": _parse_int_list, "out": str.strip,
            "saliency_samples": _parse_int},
}


@dataclass
class DatasetSpec:
    kind: str = "two_moons"
    n: int = 1000
    test_n: int = 400
    noise: float = 0.1
    centers: list = field(default_factory=lambda: [[0.0, 0.0], [4.0, 4.0]])
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    limit: int = 10000
    test_limit: int = 2000

    @property
    def is_image(self) -> bool:
        return self.kind == "mnist_idx"


@dataclass
class ExperimentConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    teacher_hidden: list[int] = field(default_factory=lambda: [64, 64])
    teacher_opt: OptimizerConfig = field(default_factory=OptimizerConfig)
    teacher_attack: AttackConfig = field(default_factory=AttackConfig)
    student_hidden: list[int] = field(default_factory=lambda: [32])
    distill: DistillConfig = field(default_factory=DistillConfig)
    eval_eps: list[float] = field(default_factory=lambda: [0.05, 0.1, 0.2])
    eval_attack: AttackConfig = field(default_factory=AttackConfig)
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    out: str = "runs/out"
    saliency_samples: int = 20


def _section_values(parser: configparser.ConfigParser, name: str,
                    path) -> dict:
    if not parser.has_section(name):
        return {}
    out = {}
    for key, raw in parser.items(name):
        if key not in _SCHEMA[name]:
            raise ConfigError(f"{path}: unknown key '{key}' in [{name}]")
        try:
            out[key] = _SCHEMA[name][key](raw)
        except (ValueError, ZeroDivisionError) as e:
            raise ConfigError(
                f"{path}: bad value for '{key}' in [{name}]: {e}") from e
    return out


def load_config(path) -> ExperimentConfig:
    """Parse and validate an experiment config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as f:
            parser.read_file(f)
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}") from e
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")

    cfg = ExperimentConfig()
    ds = _section_values(parser, "dataset", path)
    if "kind" in ds and ds["kind"] not in DATASET_KINDS:
        raise ConfigError(f"{path}: unknown dataset kind '{ds['kind']}'")
    cfg.dataset = replace(cfg.dataset, **ds)

    defaults_norm = "linf" if cfg.dataset.is_image else "l2"
    default_eps = 4.0 / 255.0 if cfg.dataset.is_image else 0.1
    clamp = (0.0, 1.0) if cfg.dataset.is_image else None

    t = _section_values(parser, "teachers", path)
    cfg.teacher_hidden = t.pop("hidden", cfg.teacher_hidden)
    attack_keys = {k: t.pop(k) for k in ("eps", "steps", "norm") if k in t}
    cfg.teacher_opt = replace(cfg.teacher_opt, **t)
    cfg.teacher_attack = AttackConfig(
        norm=attack_keys.get("norm", defaults_norm),
        epsilon=attack_keys.get("eps", default_eps),
        steps=attack_keys.get("steps", 7),
        random_start=False, clamp=clamp)

    s = _section_values(parser, "student", path)
    cfg.student_hidden = s.get("hidden", cfg.student_hidden)

    d = _section_values(parser, "distill", path)
    opt_keys = {k: d.pop(k) for k in ("lr", "momentum", "epochs", "batch_size")
                if k in d}
    att_keys = {k: d.pop(k) for k in ("eps", "steps", "norm") if k in d}
    rename = {"slope": "slope_lambda", "offset": "offset_tau"}
    d = {rename.get(k, k): v for k, v in d.items()}
    cfg.distill = replace(
        cfg.distill, **d,
        optimizer=replace(cfg.distill.optimizer, **opt_keys),
        attack=AttackConfig(
            norm=att_keys.get("norm", defaults_norm),
            epsilon=att_keys.get("eps", default_eps),
            steps=att_keys.get("steps", 5),
            random_start=False, clamp=clamp))

    e = _section_values(parser, "eval", path)
    cfg.eval_eps = e.pop("eps_grid",
                         [x / 255.0 for x in (1, 2, 3, 4)]
                         if cfg.dataset.is_image else cfg.eval_eps)
    if not cfg.eval_eps:
        raise ConfigError(f"{path}: eval eps_grid must be nonempty")
    cfg.eval_attack = AttackConfig(
        norm=e.get("norm", defaults_norm), epsilon=cfg.eval_eps[0],
        steps=e.get("steps", 10), restarts=e.get("restarts", 1),
        random_start=e.get("random_start", True), clamp=clamp)

    r = _section_values(parser, "run", path)
    cfg.seeds = r.get("seeds", cfg.seeds)
    cfg.out = r.get("out", cfg.out)
    cfg.saliency_samples = r.get("saliency_samples", cfg.saliency_samples)
    return cfg


def build_datasets(spec: DatasetSpec) -> tuple[Dataset, Dataset]:
    """Materialize the (train, test) pair a config describes."""
    if spec.kind == "two_moons":
        return (gen_two_moons(spec.n, spec.noise, seed=11, split="train"),
                gen_two_moons(spec.test_n, spec.noise, seed=12, split="test"))
    if spec.kind == "blobs":
        return (gen_blobs(spec.n, spec.centers, spec.noise, seed=11,
                          split="train"),
                gen_blobs(spec.test_n, spec.centers, spec.noise, seed=12,
                          split="test"))
    if spec.kind == "mnist_idx":
        for key in ("train_images", "train_labels", "test_images",
                    "test_labels"):
            p = getattr(spec, key)
            if not p or not Path(p).exists():
                raise ConfigError(f"dataset file missing: {key} = {p!r}")
        return (load_mnist_idx(spec.train_images, spec.train_labels,
                               spec.limit, split="train"),
                load_mnist_idx(spec.test_images, spec.test_labels,
                               spec.test_limit, split="test"))
    raise ConfigError(f"unknown dataset kind {spec.kind!r}")
