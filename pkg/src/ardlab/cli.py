"""Experiment CLI: train teachers, distill, ablate, verify, saliency, evaluate.

Every subcommand reads one config file, is deterministic given the seeds in
it, and writes outputs atomically (temp file + rename). Wall-clock timings go
to stderr and timings.log; metric CSVs stay byte-identical across reruns.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import models
from .attacks import AttackConfig
from .config import ExperimentConfig, build_datasets, load_config
from .distill import TrainRecord
from .errors import ArdlabError, ConfigError
from .experiments import (evaluate, mean_dynamic_weight, ratio_sweep,
                          strategy_sweep, train_supervised, train_teachers,
                          write_metrics_csv, TeacherPair)
from .margins import verify_bound
from .saliency import input_gradient_map, saliency_l2

SALIENCY_HEADER = "seed,sample_id,pair,l2"


def _teacher_paths(out: Path, seed: int) -> tuple[Path, Path]:
    return (out / f"teacher_clean_seed{seed}.ckpt",
            out / f"teacher_adv_seed{seed}.ckpt")


def _student_path(out: Path, strategy: str, seed: int) -> Path:
    return out / f"student_{strategy}_seed{seed}.ckpt"


def _record_path(out: Path, strategy: str, seed: int) -> Path:
    return out / f"train_record_{strategy}_seed{seed}.json"


def _require(path: Path) -> Path:
    if not path.exists():
        raise ConfigError(f"missing checkpoint: {path}")
    return path


def _load_teachers(out: Path, seed: int) -> TeacherPair:
    clean_p, adv_p = _teacher_paths(out, seed)
    return TeacherPair(
        clean=models.load(_require(clean_p), role="clean_teacher"),
        adv=models.load(_require(adv_p), role="adv_teacher"))


def _write_text_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def cmd_train_teachers(cfg: ExperimentConfig, out: Path,
                       skip_existing: bool) -> int:
    train_set, test_set = build_datasets(cfg.dataset)
    rows = []
    for seed in cfg.seeds:
        clean_p, adv_p = _teacher_paths(out, seed)
        if skip_existing and clean_p.exists() and adv_p.exists():
            pair = _load_teachers(out, seed)
            rows.append(evaluate(pair.clean, test_set, cfg.teacher_attack,
                                 "clean_teacher", seed))
            rows.append(evaluate(pair.adv, test_set, cfg.teacher_attack,
                                 "adv_teacher", seed))
            continue
        pair, seed_rows = train_teachers(train_set, test_set,
                                         cfg.teacher_hidden, cfg.teacher_opt,
                                         cfg.teacher_attack, seed)
        models.save(pair.clean, clean_p)
        models.save(pair.adv, adv_p)
        rows.extend(seed_rows)
    write_metrics_csv(rows, out / "teachers.csv")
    return 0


def cmd_distill(cfg: ExperimentConfig, out: Path, skip_existing: bool) -> int:
    train_set, test_set = build_datasets(cfg.dataset)
    strategy = cfg.distill.strategy
    rows = []
    for seed in cfg.seeds:
        pair = _load_teachers(out, seed)
        student_p = _student_path(out, strategy, seed)
        record_p = _record_path(out, strategy, seed)
        if skip_existing and student_p.exists() and record_p.exists():
            student = models.load(student_p)
        else:
            from .experiments import distill_student
            student, record = distill_student(pair, train_set,
                                              cfg.student_hidden, cfg.distill,
                                              seed)
            models.save(student, student_p)
            _write_text_atomic(record_p, json.dumps(record.to_json(),
                                                    sort_keys=True, indent=2))
        for eps in cfg.eval_eps:
            rows.append(evaluate(student, test_set,
                                 replace(cfg.eval_attack, epsilon=eps,
                                         seed=seed),
                                 strategy, seed))
    write_metrics_csv(rows, out / "distill.csv")
    return 0


def cmd_ablate(cfg: ExperimentConfig, out: Path, skip_existing: bool) -> int:
    train_set, test_set = build_datasets(cfg.dataset)
    strat_rows, ratio_rows = [], []
    for seed in cfg.seeds:
        pair = _load_teachers(out, seed)
        rows, students = strategy_sweep(pair, train_set, test_set,
                                        cfg.student_hidden, cfg.distill,
                                        cfg.eval_eps,
                                        replace(cfg.eval_attack, seed=seed),
                                        seed)
        strat_rows.extend(rows)
        for strategy, (student, record) in students.items():
            models.save(student, _student_path(out, strategy, seed))
            _write_text_atomic(_record_path(out, strategy, seed),
                               json.dumps(record.to_json(), sort_keys=True,
                                          indent=2))
        ratio_rows.extend(ratio_sweep(pair, train_set, test_set,
                                      cfg.student_hidden, cfg.distill,
                                      cfg.eval_eps,
                                      replace(cfg.eval_attack, seed=seed),
                                      seed))
    write_metrics_csv(strat_rows, out / "ablate_strategies.csv")
    write_metrics_csv(ratio_rows, out / "ablate_ratios.csv")
    return 0


def cmd_verify_bound(cfg: ExperimentConfig, out: Path,
                     skip_existing: bool) -> int:
    _, test_set = build_datasets(cfg.dataset)
    strategy = cfg.distill.strategy
    total_violations = 0
    for seed in cfg.seeds:
        pair = _load_teachers(out, seed)
        student = models.load(_require(_student_path(out, strategy, seed)))
        record_p = _require(_record_path(out, strategy, seed))
        record = TrainRecord(**json.loads(record_p.read_text()))
        w_adv = mean_dynamic_weight(record)
        attack = AttackConfig(norm="l2", epsilon=1.0,
                              steps=cfg.eval_attack.steps, restarts=20,
                              random_start=True, seed=seed)
        report = verify_bound(student, [pair.clean, pair.adv],
                              [1.0 - w_adv, w_adv], test_set, attack)
        report.save(out / f"margin_report_seed{seed}.json")
        total_violations += report.violations
        print(f"seed {seed}: {report.n_certified}/{report.n_samples} certified, "
              f"{report.violations} violations", file=sys.stderr)
    return 1 if total_violations > 0 else 0


def cmd_saliency(cfg: ExperimentConfig, out: Path, skip_existing: bool) -> int:
    train_set, test_set = build_datasets(cfg.dataset)
    strategy = cfg.distill.strategy
    lines = [SALIENCY_HEADER]
    for seed in cfg.seeds:
        pair = _load_teachers(out, seed)
        student = models.load(_require(_student_path(out, strategy, seed)))
        dims = [train_set.dim, *cfg.student_hidden, train_set.n_classes]
        # the pre-distillation student: same init the distilled one started from
        init = models.MlpModel(dims, role="student", seed=seed + 2)
        plain_p = _student_path(out, "supervised", seed)
        if skip_existing and plain_p.exists():
            plain = models.load(plain_p)
        else:
            plain = models.MlpModel(dims, role="student", seed=seed + 2)
            train_supervised(plain, train_set,
                             replace(cfg.teacher_opt, seed=seed + 2))
            models.save(plain, plain_p)
        named = {"student_distilled": student, "student_undistilled": init,
                 "student_supervised": plain}
        teachers = {"clean_teacher": pair.clean, "adv_teacher": pair.adv}
        count = min(cfg.saliency_samples, len(test_set))
        for i in range(count):
            x, y = test_set.features[i], int(test_set.labels[i])
            t_maps = {name: input_gradient_map(m, x, y, name, i)
                      for name, m in teachers.items()}
            for sname, smodel in named.items():
                s_map = input_gradient_map(smodel, x, y, sname, i)
                for tname, t_map in t_maps.items():
                    d = saliency_l2(s_map, t_map)
                    lines.append(f"{seed},{i},{tname}->{sname},{d!r}")
    _write_text_atomic(out / "saliency_l2.csv", "\n".join(lines) + "\n")
    return 0


def cmd_evaluate(cfg: ExperimentConfig, out: Path, skip_existing: bool) -> int:
    _, test_set = build_datasets(cfg.dataset)
    strategy = cfg.distill.strategy
    rows = []
    for seed in cfg.seeds:
        student = models.load(_require(_student_path(out, strategy, seed)))
        for eps in cfg.eval_eps:
            rows.append(evaluate(student, test_set,
                                 replace(cfg.eval_attack, epsilon=eps,
                                         seed=seed),
                                 strategy, seed))
    write_metrics_csv(rows, out / "evaluate.csv")
    return 0


_COMMANDS = {
    "train-teachers": cmd_train_teachers,
    "distill": cmd_distill,
    "ablate": cmd_ablate,
    "verify-bound": cmd_verify_bound,
    "saliency": cmd_saliency,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ardlab",
        description="Dual-teacher adversarial robust distillation lab")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's seed list with one seed")
        p.add_argument("--out", default=None, help="override the output dir")
        p.add_argument("--skip-existing", action="store_true")
    args = parser.parse_args(argv)

    started = time.monotonic()
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seeds = [args.seed]
        if args.out is not None:
            cfg.out = args.out
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        code = _COMMANDS[args.command](cfg, out, args.skip_existing)
    except ConfigError as e:
        print(f"ardlab: config error: {e}", file=sys.stderr)
        return 2
    except ArdlabError as e:
        print(f"ardlab: error: {e}", file=sys.stderr)
        return 1
    elapsed = time.monotonic() - started
    print(f"ardlab {args.command}: done in {elapsed:.2f}s", file=sys.stderr)
    with open(out / "timings.log", "a") as f:
        f.write(f"{args.command}\t{elapsed:.2f}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
