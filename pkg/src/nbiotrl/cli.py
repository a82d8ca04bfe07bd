"""Experiment runner.

Three modes:

* ``train``: optimize the multi-agent controller, one independent run per
  seed, writing metrics, per-episode summaries and a checkpoint each.
* ``eval``: roll out a fixed policy (trained greedy, load-estimation,
  static or random) without learning.
* ``sweep``: the standard comparison: one training arm plus the two
  load-estimation baselines with repetition profiles [1,4,8] and [2,8,16]
  evaluated over fresh episodes, all on the same seeds.

Artifacts land under --out (default ``$NBIOTRL_OUT`` or ``./runs``): per
seed ``metrics_s<seed>.csv`` / ``summary_s<seed>.csv`` (+
``checkpoint_s<seed>.npz`` when training), an aggregate ``tti_summary.csv``
and a ``manifest.json`` that pins everything needed to reproduce the run.

Exit codes: 0 success, 1 configuration error, 2 runtime contract violation.
"""

import argparse
import os
import sys

from dataclasses import dataclass, asdict
from pathlib import Path

from . import __version__
from .config import (
    ActionVector,
    DqnConfig,
    SimConfig,
    config_as_dict,
    load_config_file,
    require_valid,
    require_valid_dqn,
)
from .controllers import LeUrcController, RandomController, StaticController
from .dqn import CmaDqnGreedyController, load_checkpoint, run_training, save_checkpoint
from .env import UplinkEnv
from .errors import ConfigError, ContractViolation
from .metrics import summarize, write_manifest, write_metrics, write_summary
from .mlp_backend import BACKEND
from .rng import RngStream

MODES = ("train", "eval", "sweep")
CONTROLLERS = ("cma-dqn", "le-urc", "static", "random")

LE_REPE_DEFAULT = (1, 4, 8)
LE_REPE_ALT = (2, 8, 16)


@dataclass(frozen=True)
class RunSpec:
    mode: str
    controller: str
    config_path: str | None = None
    episodes: int = 10
    eval_episodes: int = 20
    seeds: tuple = (1,)
    out_dir: str | None = None
    target_mode: str | None = None
    le_repe: tuple = LE_REPE_DEFAULT
    checkpoint: str | None = None
    static_action: tuple = (1, 12, 1)
    workers: int = 1

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.controller not in CONTROLLERS:
            raise ConfigError(
                f"controller must be one of {CONTROLLERS}, got {self.controller!r}")
        if self.mode == "train" and self.controller != "cma-dqn":
            raise ConfigError("train mode only applies to the cma-dqn controller")
        if self.mode == "eval" and self.controller == "cma-dqn" and not self.checkpoint:
            raise ConfigError("evaluating cma-dqn needs --checkpoint")
        if self.episodes < 1 or self.eval_episodes < 1:
            raise ConfigError("episode counts must be >= 1")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if len(self.le_repe) != 3:
            raise ConfigError("--le-repe takes exactly three values")
        if len(self.static_action) != 3:
            raise ConfigError("--static-action takes exactly three values")
        if self.workers < 1:
            raise ConfigError("--workers must be >= 1")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nbiotrl",
        description="NB-IoT uplink resource-configuration experiments")
    p.add_argument("--mode", choices=MODES, default="eval")
    p.add_argument("--controller", choices=CONTROLLERS, default="le-urc")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--episodes", type=int, default=10,
                   help="episodes per seed (training arm in sweep mode)")
    p.add_argument("--eval-episodes", type=int, default=20,
                   help="evaluation episodes per seed (sweep baselines)")
    p.add_argument("--seeds", type=int, nargs="+", default=[1])
    p.add_argument("--out", help="output directory (default $NBIOTRL_OUT or ./runs)")
    p.add_argument("--target-mode", choices=("ddqn", "dqn-max"),
                   help="TD bootstrap mode override")
    p.add_argument("--le-repe", type=int, nargs=3, default=list(LE_REPE_DEFAULT),
                   metavar=("R0", "R1", "R2"),
                   help="fixed per-group repetitions for le-urc")
    p.add_argument("--checkpoint", help="trained-policy checkpoint for eval")
    p.add_argument("--static-action", type=int, nargs=3, default=[1, 12, 1],
                   metavar=("N_RACH", "F_PREA", "N_REPE"),
                   help="configuration used by the static controller (all groups)")
    p.add_argument("--workers", type=int, default=1,
                   help="parallel seed workers (processes)")
    return p


def spec_from_args(args) -> RunSpec:
    return RunSpec(
        mode=args.mode,
        controller=args.controller,
        config_path=args.config,
        episodes=args.episodes,
        eval_episodes=args.eval_episodes,
        seeds=tuple(args.seeds),
        out_dir=args.out,
        target_mode=args.target_mode,
        le_repe=tuple(args.le_repe),
        checkpoint=args.checkpoint,
        static_action=tuple(args.static_action),
        workers=args.workers,
    )


def load_run_config(spec: RunSpec):
    if spec.config_path:
        cfg, dcfg = load_config_file(spec.config_path)
    else:
        cfg, dcfg = SimConfig(), DqnConfig()
    if spec.target_mode:
        dcfg = dcfg.replace(target_mode=spec.target_mode)
    return require_valid(cfg), require_valid_dqn(dcfg)


def resolve_out_dir(spec: RunSpec) -> Path:
    if spec.out_dir:
        return Path(spec.out_dir)
    root = os.environ.get("NBIOTRL_OUT", "runs")
    return Path(root) / f"{spec.mode}-{spec.controller}"


def make_controller(name: str, cfg: SimConfig, spec: RunSpec, dcfg: DqnConfig,
                    rngs: RngStream):
    if name == "le-urc":
        return LeUrcController(cfg, spec.le_repe)
    if name == "static":
        n_rach, f_prea, n_repe = spec.static_action
        return StaticController(ActionVector.uniform(n_rach, f_prea, n_repe), cfg)
    if name == "random":
        return RandomController(cfg, rngs.stream("exploration"))
    if name == "cma-dqn":
        ensemble = load_checkpoint(spec.checkpoint, cfg, dcfg)
        return CmaDqnGreedyController(ensemble)
    raise ConfigError(f"unknown controller {name!r}")


def eval_policy(cfg: SimConfig, controller, episodes: int):
    """Roll out a fixed policy; returns the list of per-episode stats."""
    env = UplinkEnv(cfg)
    all_stats = []
    for ep in range(episodes):
        state = env.reset(ep)
        controller.begin_episode()
        done = False
        while not done:
            action = controller.decide(state)
            obs, reward, state, done = env.step(action)
            controller.observe(obs, reward)
        all_stats.append(env.stats)
    return all_stats


def _seed_tag(seed: int) -> str:
    return f"s{seed}"


def _run_eval_seed(spec: RunSpec, cfg: SimConfig, dcfg: DqnConfig, seed: int,
                   out_dir: Path) -> dict:
    cfg_s = cfg.replace(seed=seed)
    rngs = RngStream(seed)
    controller = make_controller(spec.controller, cfg_s, spec, dcfg, rngs)
    stats = eval_policy(cfg_s, controller, spec.episodes)
    tag = _seed_tag(seed)
    metrics_path = out_dir / f"metrics_{tag}.csv"
    write_metrics(metrics_path, stats)
    write_summary(out_dir / f"summary_{tag}.csv", stats)
    return {"seed": seed, "metrics": metrics_path.name,
            "summary": f"summary_{tag}.csv",
            "served": [s.total_served for s in stats]}


def _run_train_seed(spec: RunSpec, cfg: SimConfig, dcfg: DqnConfig, seed: int,
                    out_dir: Path) -> dict:
    cfg_s = cfg.replace(seed=seed)

    def progress(ep, stats):
        if (ep + 1) % 10 == 0 or ep == 0:
            print(f"[seed {seed}] episode {ep + 1}/{spec.episodes}"
                  f" served={stats.total_served}", flush=True)

    result = run_training(cfg_s, dcfg, spec.episodes, progress=progress)
    tag = _seed_tag(seed)
    metrics_path = out_dir / f"metrics_{tag}.csv"
    write_metrics(metrics_path, result.episode_stats)
    write_summary(out_dir / f"summary_{tag}.csv", result.episode_stats)
    ckpt = out_dir / f"checkpoint_{tag}.npz"
    save_checkpoint(ckpt, result.ensemble)
    return {"seed": seed, "metrics": metrics_path.name,
            "summary": f"summary_{tag}.csv", "checkpoint": ckpt.name,
            "served": [s.total_served for s in result.episode_stats]}


def _run_campaign(spec: RunSpec, cfg, dcfg, out_dir: Path) -> dict:
    """Execute one arm (all seeds) into ``out_dir``; returns its manifest
    fragment."""
    out_dir.mkdir(parents=True, exist_ok=True)
    runner = _run_train_seed if spec.mode == "train" else _run_eval_seed
    if spec.workers > 1 and len(spec.seeds) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futures = [pool.submit(runner, spec, cfg, dcfg, s, out_dir)
                       for s in spec.seeds]
            per_seed = [f.result() for f in futures]
    else:
        per_seed = [runner(spec, cfg, dcfg, s, out_dir) for s in spec.seeds]
    summarize([out_dir / r["metrics"] for r in per_seed],
              out_dir / "tti_summary.csv")
    return {"out": str(out_dir), "seeds": list(spec.seeds), "runs": per_seed}


def run_experiment(spec: RunSpec) -> dict:
    """Run the requested campaign; returns the manifest payload."""
    spec.validate()
    cfg, dcfg = load_run_config(spec)
    out_dir = resolve_out_dir(spec)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "manifest.json"
    payload = {
        "spec": asdict(spec),
        "sim_config": config_as_dict(cfg),
        "dqn_config": config_as_dict(dcfg),
        "kernel_backend": BACKEND,
        "version": __version__,
        "complete": False,
    }
    write_manifest(manifest_path, payload)

    if spec.mode in ("train", "eval"):
        payload["arms"] = {spec.controller: _run_campaign(spec, cfg, dcfg, out_dir)}
    else:
        arms = {}
        train_spec = RunSpec(**{**asdict(spec), "mode": "train",
                                "controller": "cma-dqn"})
        arms["cma-dqn"] = _run_campaign(train_spec, cfg, dcfg, out_dir / "cma-dqn")
        for repe in (LE_REPE_DEFAULT, LE_REPE_ALT):
            name = "le-urc-" + "-".join(str(r) for r in repe)
            arm_spec = RunSpec(**{**asdict(spec), "mode": "eval",
                                  "controller": "le-urc", "le_repe": repe,
                                  "episodes": spec.eval_episodes})
            arms[name] = _run_campaign(arm_spec, cfg, dcfg, out_dir / name)
        payload["arms"] = arms

    payload["complete"] = True
    write_manifest(manifest_path, payload)
    return payload


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = spec_from_args(args)
    try:
        payload = run_experiment(spec)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except ContractViolation as e:
        print(f"contract violation: {e}", file=sys.stderr)
        return 2
    for name, arm in payload["arms"].items():
        total = sum(sum(r["served"]) for r in arm["runs"])
        print(f"[done] {name}: seeds={arm['seeds']} total_served={total}"
              f" out={arm['out']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
