"""Command-line entry point.

Every artifact-producing subcommand is a pure function of its config and
seeds; a RunManifest written next to the outputs records the command, the
config snapshot, content hashes of the inputs, and hashes of the outputs so
reruns can be audited byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import loop as loopmod
from . import model as modelmod
from . import planner as plannermod
from . import plots
from .dataset import Dataset
from .loop import EvalReport, LoopConfig
from .model import ModelConfig, TrainConfig
from .policies import BCConfig, BCPolicy, LandPolicy, PurePursuitPolicy, RandomPolicy, train_bc
from .world import WorldSpec, generate_world, world_from_dict, world_to_dict

USAGE_ERROR = 1
RUNTIME_ERROR = 2


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out_dir: Path, command: list[str], config: dict, inputs: list[Path], outputs: list[Path]) -> None:
    manifest = {
        "command": command,
        "config": config,
        "inputs": {str(p): _sha256(Path(p)) for p in inputs},
        "outputs": {str(Path(p).name): _sha256(Path(p)) for p in outputs},
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise RuntimeError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise RuntimeError(f"{path}: invalid JSON ({e})") from None


def _reject_unknown(d: dict, allowed: set, context: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise RuntimeError(f"{context}: unknown keys {sorted(unknown)}")


def load_loop_config(path) -> LoopConfig:
    d = _load_json(path)
    allowed = {
        "phases", "steps_per_phase", "train_specs", "eval_specs", "eval_budget",
        "train_steps_per_phase", "batch_size", "learning_rate", "seed",
        "model_config", "planner_config", "bootstrap_steps", "lr_decay_per_phase",
    }
    _reject_unknown(d, allowed, str(path))
    kwargs = dict(d)
    kwargs["train_specs"] = tuple(WorldSpec.from_dict(s) for s in d.get("train_specs", []))
    kwargs["eval_specs"] = tuple(WorldSpec.from_dict(s) for s in d.get("eval_specs", []))
    if "model_config" in d:
        kwargs["model_config"] = ModelConfig.from_dict(d["model_config"])
    if "planner_config" in d:
        kwargs["planner_config"] = plannermod.PlannerConfig.from_dict(d["planner_config"])
    return LoopConfig(**kwargs)


def _world_specs_from_file(path) -> list[WorldSpec]:
    d = _load_json(path)
    if isinstance(d, list):
        return [WorldSpec.from_dict(s) for s in d]
    return [WorldSpec.from_dict(d)]


def _make_policy(name: str, args, planner_config: plannermod.PlannerConfig, seed: int):
    if name == "land":
        _cfg, params = modelmod.load_model(args.model)
        return LandPolicy(params, planner_config, seed=seed)
    if name == "bc":
        _cfg, params = modelmod.load_model(args.model)
        return BCPolicy(params)
    if name == "scripted":
        return PurePursuitPolicy()
    if name == "random":
        return RandomPolicy(seed=seed)
    raise RuntimeError(f"unknown policy {name!r}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen_worlds(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base = WorldSpec.from_dict(_load_json(args.spec)) if args.spec else WorldSpec()
    outputs = []
    for i in range(args.count):
        spec_d = base.to_dict()
        spec_d["seed"] = args.seed + i
        world = generate_world(WorldSpec.from_dict(spec_d))
        p = out / f"world_{spec_d['seed']}.json"
        p.write_text(json.dumps(world_to_dict(world)) + "\n")
        outputs.append(p)
    write_manifest(out, ["gen-worlds"], {"spec": base.to_dict(), "count": args.count, "seed": args.seed},
                   [Path(args.spec)] if args.spec else [], outputs)
    print(f"wrote {len(outputs)} worlds to {out}")
    return 0


def cmd_collect(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    specs = _world_specs_from_file(args.worlds)
    planner_config = plannermod.PlannerConfig()
    dataset = Dataset()
    steps_per_world = max(1, args.steps // len(specs))
    for wi, spec in enumerate(specs):
        world = generate_world(spec)
        policy = _make_policy(args.policy, args, planner_config, seed=args.seed + wi)
        loopmod.rollout(
            world, policy, steps_per_world,
            dataset=dataset, episode_id=wi, policy_tag=args.policy,
        )
    ds_path = out / "dataset.ndjson"
    dataset.save(ds_path)
    inputs = [Path(args.worlds)] + ([Path(args.model)] if args.model else [])
    write_manifest(out, ["collect"], vars_snapshot(args), inputs, [ds_path])
    print(f"collected {len(dataset)} records ({dataset.disengagement_count()} disengagements)")
    return 0


def cmd_train(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = Dataset.load(args.dataset)
    config = ModelConfig.from_dict(_load_json(args.model_config)) if args.model_config else ModelConfig()
    if args.init:
        cfg_loaded, params = modelmod.load_model(args.init)
        config = cfg_loaded
    else:
        params = modelmod.init_params(config, np.random.default_rng(args.seed))
    params, history = modelmod.train(
        params, dataset, config,
        TrainConfig(steps=args.steps, batch_size=args.batch_size,
                    learning_rate=args.learning_rate, seed=args.seed),
    )
    ckpt = out / "model.ckpt"
    modelmod.save_model(ckpt, config, params)
    hist_path = out / "loss_history.json"
    hist_path.write_text(json.dumps(history) + "\n")
    inputs = [Path(args.dataset)] + ([Path(args.init)] if args.init else [])
    write_manifest(out, ["train"], vars_snapshot(args), inputs, [ckpt, hist_path])
    print(f"trained {args.steps} steps; final batch loss {history[-1]:.4f}")
    return 0


def cmd_train_bc(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = Dataset.load(args.dataset)
    config = ModelConfig()
    params, history = train_bc(
        dataset, config,
        BCConfig(steps=args.steps, batch_size=args.batch_size,
                 learning_rate=args.learning_rate, seed=args.seed),
    )
    ckpt = out / "bc.ckpt"
    _save_bc(ckpt, config, params)
    write_manifest(out, ["train-bc"], vars_snapshot(args), [Path(args.dataset)], [ckpt])
    print(f"trained BC {args.steps} steps; final batch loss {history[-1]:.5f}")
    return 0


def _save_bc(path, config, params):
    from .policies import bc_param_shapes

    header = {
        "format": modelmod.MODEL_FORMAT,
        "config": config.to_dict(),
        "arrays": [{"name": n, "shape": list(s)} for n, s in bc_param_shapes(config)],
    }
    blob = bytearray(json.dumps(header, separators=(",", ":")).encode("ascii")) + b"\n"
    for name, shape in bc_param_shapes(config):
        blob += np.ascontiguousarray(params[name], dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(blob))


def cmd_evaluate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    specs = _world_specs_from_file(args.worlds)
    planner_config = plannermod.PlannerConfig()

    def factory(wi: int):
        return _make_policy(args.policy, args, planner_config, seed=np.random.SeedSequence([args.seed, wi]))

    report = loopmod.evaluate(factory, specs, args.budget)
    rp = out / "eval.json"
    rp.write_text(json.dumps(report.to_dict()) + "\n")
    inputs = [Path(args.worlds)] + ([Path(args.model)] if args.model else [])
    write_manifest(out, ["evaluate"], vars_snapshot(args), inputs, [rp])
    print(
        f"avg distance until disengagement: {report.avg_distance_m:.2f} m "
        f"({report.disengagement_count} disengagements, {report.total_distance_m:.1f} m total)"
    )
    return 0


def cmd_run_loop(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = load_loop_config(args.config)
    result = loopmod.run_land(config)
    ds_path = out / "dataset.ndjson"
    result.dataset.save(ds_path)
    ckpt = out / "model.ckpt"
    modelmod.save_model(ckpt, config.model_config, result.params)
    reports_path = out / "phase_reports.json"
    reports_path.write_text(json.dumps([r.to_dict() for r in result.eval_reports]) + "\n")
    write_manifest(out, ["run-loop"], _load_json(args.config), [Path(args.config)],
                   [ds_path, ckpt, reports_path])
    for i, r in enumerate(result.eval_reports):
        label = "untrained" if i == 0 else f"after phase {i}"
        print(f"{label}: avg distance {r.avg_distance_m:.2f} m")
    return 0


def cmd_finetune(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config_d = _load_json(args.config) if args.config else {}
    loop_config = load_loop_config(args.config) if args.config else LoopConfig(
        train_specs=(WorldSpec(),), seed=args.seed
    )
    model_config, params = modelmod.load_model(args.model)
    dataset = Dataset.load(args.dataset)
    specs = _world_specs_from_file(args.worlds)
    before, after, tuned = loopmod.finetune_experiment(
        params, dataset, specs, args.budget, loop_config,
        finetune_steps=args.steps, finetune_lr=args.learning_rate,
    )
    paths = {
        "before.json": before.to_dict(),
        "after.json": after.to_dict(),
    }
    outputs = []
    for name, payload in paths.items():
        p = out / name
        p.write_text(json.dumps(payload) + "\n")
        outputs.append(p)
    ckpt = out / "model_finetuned.ckpt"
    modelmod.save_model(ckpt, model_config, tuned)
    outputs.append(ckpt)
    write_manifest(out, ["finetune"], {**vars_snapshot(args), "loop_config": config_d},
                   [Path(args.model), Path(args.dataset), Path(args.worlds)], outputs)
    ratio = after.avg_distance_m / max(1e-9, before.avg_distance_m)
    print(f"before {before.avg_distance_m:.2f} m -> after {after.avg_distance_m:.2f} m ({ratio:.2f}x)")
    return 0


def cmd_plot(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    if args.report:
        report = EvalReport.from_dict(_load_json(args.report))
        p = out / "cdf.svg"
        plots.cdf_svg(report, p)
        outputs.append(p)
    if args.phases:
        reports = [EvalReport.from_dict(d) for d in _load_json(args.phases)]
        p = out / "learning_curve.svg"
        plots.learning_curve_svg(reports, p)
        outputs.append(p)
    if not outputs:
        raise RuntimeError("plot needs --report and/or --phases")
    inputs = [Path(p) for p in (args.report, args.phases) if p]
    write_manifest(out, ["plot"], vars_snapshot(args), inputs, outputs)
    print("wrote " + ", ".join(str(p) for p in outputs))
    return 0


def cmd_serve(args) -> int:
    from . import serve as servemod

    world = world_from_dict(_load_json(args.world))
    planner_config = plannermod.PlannerConfig()
    policy = _make_policy(args.policy, args, planner_config, seed=args.seed)
    session = servemod.ServeSession(
        world=world,
        policy=policy,
        policy_tag=args.policy,
        steps_per_second=args.rate,
        human_monitor=args.human_monitor,
        dataset_out=Path(args.out) if args.out else None,
    )
    servemod.run_server(session, host=args.host, port=args.port, static_dir=args.static)
    return 0


def vars_snapshot(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func" and v is not None}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="disnav", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-worlds", help="generate world JSON files from a spec template")
    p.add_argument("--spec", help="WorldSpec JSON template (defaults used if omitted)")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="seed of the first world")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_worlds)

    p = sub.add_parser("collect", help="roll a policy on worlds and record a dataset")
    p.add_argument("--worlds", required=True, help="JSON file with a WorldSpec or a list of them")
    p.add_argument("--policy", default="scripted", choices=["land", "bc", "scripted", "random"])
    p.add_argument("--model", help="checkpoint for land/bc policies")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train", help="train the disengagement predictor on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model-config", dest="model_config")
    p.add_argument("--init", help="checkpoint to continue from")
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("train-bc", help="train the behavioral-cloning baseline")
    p.add_argument("--dataset", required=True)
    p.add_argument("--steps", type=int, default=1500)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_bc)

    p = sub.add_parser("evaluate", help="measure avg distance until disengagement")
    p.add_argument("--worlds", required=True)
    p.add_argument("--policy", default="land", choices=["land", "bc", "scripted", "random"])
    p.add_argument("--model", help="checkpoint (required for land/bc)")
    p.add_argument("--budget", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run-loop", help="alternate collection and training per the full loop")
    p.add_argument("--config", required=True, help="LoopConfig JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run_loop)

    p = sub.add_parser("finetune", help="evaluate, finetune on the recording, re-evaluate")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True, help="base dataset to augment")
    p.add_argument("--worlds", required=True)
    p.add_argument("--budget", type=int, default=500)
    p.add_argument("--steps", type=int, default=600)
    p.add_argument("--learning-rate", type=float, default=2e-4)
    p.add_argument("--config", help="LoopConfig JSON for train/planner settings")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("plot", help="emit SVG figures from report JSON")
    p.add_argument("--report", help="EvalReport JSON -> cdf.svg")
    p.add_argument("--phases", help="list of EvalReport JSON -> learning_curve.svg")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("serve", help="live session over WebSocket for the monitor UI")
    p.add_argument("--world", required=True, help="world.v1 JSON file")
    p.add_argument("--policy", default="land", choices=["land", "bc", "scripted", "random"])
    p.add_argument("--model", help="checkpoint for land/bc policies")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--rate", type=float, default=5.0, help="sim steps per second")
    p.add_argument("--human-monitor", action="store_true", help="disable the scripted oracle")
    p.add_argument("--static", help="directory of UI assets to serve over HTTP")
    p.add_argument("--out", help="dataset output path")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)
    return parser


def _validate(args) -> str | None:
    if getattr(args, "policy", None) in ("land", "bc") and not getattr(args, "model", None):
        return f"--model is required for --policy {args.policy}"
    return None


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else USAGE_ERROR
    problem = _validate(args)
    if problem:
        parser.print_usage(sys.stderr)
        print(f"disnav: error: {problem}", file=sys.stderr)
        return USAGE_ERROR
    try:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=1):
            return args.func(args)
    except KeyboardInterrupt:
        return RUNTIME_ERROR
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"disnav: error: {e}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
