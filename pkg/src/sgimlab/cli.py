"""Command-line front end.

Six subcommands cover the whole workflow: ``calibrate`` re-derives the
environment scale, ``bench-gen`` writes a benchmark, ``teach-gen`` writes a
demonstration set, ``run`` executes one learner and saves its episode CSV,
``eval`` replays run CSVs against a benchmark into a report JSON plus
plot-ready curves, and ``compare`` prints the acceptance verdicts for a
report.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import LabConfig, load_config
from .environment import FishingEnv
from .harness import (
    BenchmarkSet,
    ExperimentReport,
    RunResult,
    build_teacher,
    compare,
    coverage,
    evaluate,
    generate_benchmark,
    goal_fraction_in_box,
)
from .learners import LearnerConfig, load_episodes, run_learner
from .memory import EpisodeMemory
from .teachers import build_demonstrator3, load_demonstrations, save_demonstrations

log = logging.getLogger(__name__)

SOCIAL = ("imitation", "observation", "sgim_d")


def _add_config_arg(parser):
    parser.add_argument("--config", type=Path, default=None,
                        help="INI file; defaults apply when omitted")


def _cmd_calibrate(args, cfg: LabConfig) -> int:
    env = FishingEnv(cfg.env)
    scale = env.calibrate_scale(args.samples, args.seed)
    print(f"calibrated scale: {scale!r}")
    print(f"configured scale: {cfg.env.scale!r}")
    drift = abs(scale - cfg.env.scale) / cfg.env.scale
    print(f"relative drift:   {drift:.2e}")
    return 0


def _cmd_bench_gen(args, cfg: LabConfig) -> int:
    env = FishingEnv(cfg.env)
    bench = generate_benchmark(env, cfg.harness.n_probe,
                               cfg.harness.resolution, cfg.harness.bench_seed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    bench.save(args.out)
    print(f"benchmark: {len(bench)} goals -> {args.out}")
    return 0


def _cmd_teach_gen(args, cfg: LabConfig) -> int:
    env = FishingEnv(cfg.env)
    demonstrator = args.demonstrator
    if demonstrator == 3:
        rng = np.random.default_rng(cfg.teacher.teacher_seed + 3)
        demos = build_demonstrator3(env, rng)
    else:
        demos = build_teacher(demonstrator, env,
                              teacher_seed=cfg.teacher.teacher_seed,
                              total_episodes=cfg.teacher.source_episodes)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_demonstrations(demos, args.out)
    print(f"demonstrator {demonstrator}: {len(demos)} demonstrations "
          f"-> {args.out}")
    return 0


def _cmd_run(args, cfg: LabConfig) -> int:
    env = FishingEnv(cfg.env.replace(
        rng_seed=cfg.harness.env_seed_base + args.seed))
    kw = cfg.learner.learner_kwargs()
    if cfg.harness.large_space:
        kw["task_lows"] = (-100.0, -100.0)
        kw["task_highs"] = (100.0, 100.0)
    learner_cfg = LearnerConfig(strategy=args.strategy, rng_seed=args.seed,
                                **kw)
    teacher = None
    if args.strategy in SOCIAL:
        source = args.teacher or cfg.teacher.path
        if source is None:
            log.info("no demonstration set given; building demonstrator %d",
                     cfg.teacher.demonstrator)
            teacher = build_teacher(cfg.teacher.demonstrator, env,
                                    teacher_seed=cfg.teacher.teacher_seed,
                                    total_episodes=cfg.teacher.source_episodes)
        else:
            teacher = load_demonstrations(source)
    record = run_learner(learner_cfg, env, teacher)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    sidecar = record.save(args.out)
    print(f"{args.strategy} seed {args.seed}: {len(record.rows)} episodes "
          f"-> {args.out} (+ {sidecar.name})")
    return 0


def _replay_run(csv_path: Path, benchmark: BenchmarkSet, env: FishingEnv,
                cfg: LabConfig) -> RunResult:
    episodes = load_episodes(csv_path)
    sidecar_path = csv_path.with_suffix(".json")
    sidecar = {}
    if sidecar_path.exists():
        sidecar = json.loads(sidecar_path.read_text())
    run_cfg = sidecar.get("config", {})
    strategy = run_cfg.get("strategy", "unknown")
    eval_every = int(run_cfg.get("eval_every") or cfg.learner.eval_every)

    memory = EpisodeMemory()
    curve = []
    for episode in episodes:
        memory.record(episode)
        if eval_every and len(memory) % eval_every == 0:
            curve.append((len(memory),
                          evaluate(memory, benchmark, env,
                                   cfg.harness.eval_seed)))
    final = curve[-1][1] if curve else evaluate(memory, benchmark, env,
                                                cfg.harness.eval_seed)
    goal_log = [tuple(g) for g in sidecar.get("goal_log", [])]
    own = [g for g in goal_log if g[2] in ("interest", "uniform", "refine")]
    frac = None
    if own:
        pts = np.array([[g[0], g[1]] for g in own])
        lo = np.asarray(benchmark.bbox_lows)
        hi = np.asarray(benchmark.bbox_highs)
        frac = float(np.all((pts >= lo) & (pts <= hi), axis=1).mean())
    lows = run_cfg.get("task_lows", [-1.0, -1.0])
    return RunResult(
        strategy=strategy, seed=int(run_cfg.get("rng_seed", -1)),
        demonstrator=(cfg.teacher.demonstrator if strategy in SOCIAL
                      else None),
        large_space=bool(lows[0] < -1.0),
        checkpoints=curve, final_error=final,
        coverage=coverage(memory.outcome_matrix()),
        goal_fraction=frac,
        demo_events=int(sidecar.get("counters", {}).get("demo_events", 0)),
        episodes=len(episodes),
    )


def _cmd_eval(args, cfg: LabConfig) -> int:
    benchmark = BenchmarkSet.load(args.benchmark)
    env = FishingEnv(cfg.env)
    report = ExperimentReport(
        benchmark_meta={"count": len(benchmark),
                        "resolution": benchmark.resolution,
                        "n_probe": benchmark.n_probe,
                        "rng_seed": benchmark.rng_seed,
                        "bbox_lows": list(benchmark.bbox_lows),
                        "bbox_highs": list(benchmark.bbox_highs)},
        noise_std=env.mean_noise_std(),
    )
    for csv_path in args.runs:
        result = _replay_run(csv_path, benchmark, env, cfg)
        report.add(result)
        print(f"{csv_path}: {result.strategy} seed {result.seed} "
              f"final error {result.final_error:.4f} "
              f"coverage {result.coverage}")
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        report.save(args.out)
        print(f"report -> {args.out}")
    if args.curves is not None:
        args.curves.parent.mkdir(parents=True, exist_ok=True)
        report.save_curves(args.curves)
        print(f"curves -> {args.curves}")
    return 0


def _cmd_compare(args, cfg: LabConfig) -> int:
    report = ExperimentReport.load(args.report)
    rows = compare(report)
    if not rows:
        print("report answers no acceptance criteria")
        return 1
    failed = 0
    for row in rows:
        status = "PASS" if row["passed"] else "FAIL"
        failed += 0 if row["passed"] else 1
        print(f"[{status}] {row['criterion']}: {row['detail']}")
    return 0 if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgimlab",
        description="goal-babbling laboratory: benchmarks, teachers, runs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="re-derive the environment scale")
    _add_config_arg(p)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--seed", type=int, default=12345)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("bench-gen", help="generate an evaluation benchmark")
    _add_config_arg(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_bench_gen)

    p = sub.add_parser("teach-gen", help="build a demonstration set")
    _add_config_arg(p)
    p.add_argument("--demonstrator", type=int, choices=(1, 2, 3),
                   required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_teach_gen)

    p = sub.add_parser("run", help="run one learner and save its episodes")
    _add_config_arg(p)
    p.add_argument("--strategy", required=True,
                   choices=("random", "sagg_riac", "imitation",
                            "observation", "sgim_d"))
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--teacher", type=Path, default=None,
                   help="demonstration set file/directory")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("eval", help="score run CSVs against a benchmark")
    _add_config_arg(p)
    p.add_argument("--benchmark", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None, help="report JSON")
    p.add_argument("--curves", type=Path, default=None,
                   help="plot-ready curve CSV")
    p.add_argument("runs", nargs="+", type=Path)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("compare", help="print acceptance verdicts")
    _add_config_arg(p)
    p.add_argument("--report", type=Path, required=True)
    p.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    cfg = load_config(args.config)
    return args.func(args, cfg)


if __name__ == "__main__":           # pragma: no cover
    sys.exit(main())
