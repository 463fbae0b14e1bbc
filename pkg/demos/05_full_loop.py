#!/usr/bin/env python3
"""The full alternating collect/train loop, miniature edition.

Runs two phases on three small worlds, evaluates on one held-out world after
each phase, compares against the behavioral-cloning baseline trained on the
identical dataset, and writes the per-phase learning curve and the final
trajectory-distance CDF.  The pinned full-scale version of this experiment
lives in tests/test_acceptance.py.
"""
from pathlib import Path

from disnav.benchmark import BLOCK, MODEL
from disnav.loop import LoopConfig, evaluate, run_land, train_bc_on
from disnav.planner import PlannerConfig
from disnav.plots import cdf_svg, learning_curve_svg
from disnav.policies import BCPolicy
from disnav.world import WorldSpec

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

small = dict(BLOCK, length_m=100.0)
config = LoopConfig(
    phases=2,
    steps_per_phase=1500,
    train_specs=tuple(WorldSpec(seed=s, **small) for s in (101, 102, 103)),
    eval_specs=(WorldSpec(seed=201, **dict(small, length_m=200.0)),),
    eval_budget=300,
    train_steps_per_phase=500,
    seed=7,
    model_config=MODEL,
    planner_config=PlannerConfig(n_samples=256),
    bootstrap_steps=100,
    lr_decay_per_phase=0.7,
)

result = run_land(config)
for i, report in enumerate(result.eval_reports):
    label = "untrained" if i == 0 else f"after phase {i}"
    print(f"{label:14s}: avg distance until disengagement {report.avg_distance_m:7.2f} m "
          f"({report.disengagement_count} disengagements)")

bc_params, _ = train_bc_on(result.dataset, config)
bc_report = evaluate(lambda wi: BCPolicy(bc_params), list(config.eval_specs), config.eval_budget)
print(f"{'BC baseline':14s}: avg distance until disengagement {bc_report.avg_distance_m:7.2f} m "
      f"({bc_report.disengagement_count} disengagements)")

learning_curve_svg(result.eval_reports, OUT / "learning_curve.svg")
cdf_svg(result.eval_reports[-1], OUT / "cdf.svg")
print(f"wrote {OUT / 'learning_curve.svg'} and {OUT / 'cdf.svg'}")
