"""Command-line experiment runner.

Subcommands ``train``, ``calibrate``, ``compare``, ``cotrain`` and
``report``.  Every run writes ``resolved-config.json`` into its output
directory; rerunning with that file reproduces the numeric outputs.

Exit codes: 0 success, 2 configuration error, 3 protocol error,
4 numeric failure.
"""

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .envs import PendulumEnv, PendulumParams, RemoteEnvEndpoint, remote_env
from .exceptions import (ConfigError, NumericError, ProtocolError, PhotonicSRLError,
                         UndefinedSimilarityError)
from .hybrid import (MeshBackend, WeightSnapshot, convergence_report, cotrain, extract_l2,
                     map_to_hardware, offline_compare)
from .mesh import NoiseModel, PhaseVoltageMap, PhotonicMesh, VoltageTable
from .spgd import SpgdConfig
from .td3 import Td3Agent, Td3Config, _action_scale, train

EXIT_OK, EXIT_CONFIG, EXIT_PROTOCOL, EXIT_NUMERIC = 0, 2, 3, 4
TASKS = ("pendulum", "remote")
RESOLVED = "resolved-config.json"


@dataclass
class MeshSettings:
    n: int = 16
    detection: str = "coherent"
    phase_map: dict = field(default_factory=lambda: asdict(PhaseVoltageMap()))
    noise: dict = field(default_factory=lambda: {"phase_jitter_sigma": 0.0, "readout_sigma": 0.0,
                                                 "seed": None})

    def build(self):
        return PhotonicMesh.build(self.n, PhaseVoltageMap(**self.phase_map),
                                  NoiseModel(**self.noise), self.detection)


@dataclass
class ExperimentConfig:
    """All settings of one run; unknown keys are rejected."""

    task: str = "pendulum"
    endpoint: str = None
    seed: int = 0
    n_samples: int = 1000
    td3: dict = field(default_factory=lambda: Td3Config().to_dict())
    mesh: dict = field(default_factory=lambda: asdict(MeshSettings()))
    spgd: dict = field(default_factory=lambda: asdict(SpgdConfig()))
    cotrain: dict = field(default_factory=lambda: {"total_steps": 30_000, "warmup": 0,
                                                   "route": "twin"})
    report: dict = field(default_factory=lambda: {"threshold": -200.0, "ma_window": 0})

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.task == "remote" and not self.endpoint:
            raise ConfigError("task 'remote' needs an endpoint")
        # merge partial sections over defaults and validate them
        defaults = ExperimentConfig.__dataclass_fields__
        for name in ("td3", "mesh", "spgd", "cotrain", "report"):
            base = defaults[name].default_factory()
            given = getattr(self, name) or {}
            unknown = set(given) - set(base)
            if unknown:
                raise ConfigError(f"unknown keys in section {name!r}: {sorted(unknown)}")
            base.update(given)
            setattr(self, name, base)
        self.td3["seed"] = self.spgd["seed"] = int(self.seed)
        self.td3_config()
        self.spgd_config()
        self.mesh_settings().build()
        if self.cotrain["route"] not in ("twin", "mesh"):
            raise ConfigError("cotrain.route must be 'twin' or 'mesh'")

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def td3_config(self):
        return Td3Config.from_dict(self.td3)

    def cotrain_config(self):
        extra = {k: v for k, v in self.cotrain.items() if k != "route"}
        return Td3Config.from_dict({**self.td3, **extra})

    def spgd_config(self):
        try:
            return SpgdConfig(**self.spgd)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def mesh_settings(self):
        try:
            return MeshSettings(**self.mesh)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self):
        return asdict(self)


# --------------------------------------------------------------------------
# Helpers
# --------------------------------------------------------------------------

def _load_config(args):
    data = {}
    if args.config:
        if not os.path.isfile(args.config):
            raise ConfigError(f"config file not found: {args.config}")
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {args.config} is not valid JSON: {exc}") from exc
    for key in ("seed", "task", "endpoint"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    target = getattr(args, "target_similarity", None)
    if target is not None:
        data.setdefault("spgd", {})["target_similarity"] = target
    return ExperimentConfig.from_dict(data)


def _prepare_out(args, cfg):
    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, RESOLVED), cfg.to_dict())
    return args.out


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _make_env(cfg, offset=0):
    if cfg.task == "pendulum":
        return PendulumEnv(PendulumParams(), seed=cfg.seed + offset)
    return remote_env(RemoteEnvEndpoint.parse(cfg.endpoint))


def _need_file(path, what):
    if not path or not os.path.isfile(path):
        raise ConfigError(f"{what} not found: {path}")
    return path


def _agent_from_npz(path, actor, env, cfg):
    """Rebuild a trained agent: actor from its snapshot, critics from ``agent.npz``."""
    agent = Td3Agent.create(env.observation_dim, env.action_dim, _action_scale(env), cfg,
                            np.random.default_rng(cfg.seed), actor=actor)
    agent.load_critics_npz(path)
    data = np.load(path)
    for name in actor.params():
        setattr(agent.actor_target, name, np.array(data[f"actor_target.{name}"]))
    return agent


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_train(args, cfg):
    out = _prepare_out(args, cfg)
    env = _make_env(cfg)
    eval_env = _make_env(cfg, 1000) if cfg.task == "pendulum" else env
    try:
        result = train(env, cfg.td3_config(), eval_env=eval_env)
        result.actor.save(os.path.join(out, "actor.json"))
        result.agent.save_npz(os.path.join(out, "agent.npz"))
        result.to_csv(os.path.join(out, "rewards.csv"))
        result.curves_to_csv(os.path.join(out, "curves.csv"), cfg.td3["ma_window"])
        snap = extract_l2(result.actor, eval_env, cfg.n_samples, seed=cfg.seed)
        snap.save(os.path.join(out, "l2_snapshot.json"))
    finally:
        env.close()
    last = result.evaluations[-1] if result.evaluations else None
    _write_json(os.path.join(out, "summary.json"),
                {"total_steps": result.total_steps, "episodes": len(result.episodes),
                 "final_eval_mean": None if last is None else last[1],
                 "l2_scale": snap.scale, "test_values": int(snap.inputs.size)})
    return EXIT_OK


def cmd_calibrate(args, cfg):
    snap = WeightSnapshot.load(_need_file(args.snapshot, "snapshot"))
    out = _prepare_out(args, cfg)
    mesh = cfg.mesh_settings().build()
    record, twin = map_to_hardware(snap, mesh, cfg.spgd_config())
    record.best_voltages.to_csv(os.path.join(out, "voltages.csv"))
    best = record.best_so_far
    with open(os.path.join(out, "calibration.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "objective", "similarity", "best_similarity"])
        for (it, obj, sim), b in zip(record.history, best):
            writer.writerow([it, repr(float(obj)), repr(float(sim)), repr(float(b))])
    np.savetxt(os.path.join(out, "w_eff_scaled.csv"), twin, delimiter=",", fmt="%.17g")
    _write_json(os.path.join(out, "summary.json"), {**record.summary(), "scale": snap.scale})
    return EXIT_OK


def _backend(args, cfg, snap):
    voltages = VoltageTable.from_csv(_need_file(args.voltages, "voltage table"))
    mesh = cfg.mesh_settings().build()
    return MeshBackend.for_snapshot(mesh, voltages, snap, np.random.default_rng(cfg.seed))


def cmd_compare(args, cfg):
    snap = WeightSnapshot.load(_need_file(args.snapshot, "snapshot"))
    out = _prepare_out(args, cfg)
    report = offline_compare(snap, _backend(args, cfg, snap))
    report.to_json(os.path.join(out, "deviation.json"))
    report.to_csv(os.path.join(out, "l2_series.csv"))
    report.actions_to_csv(os.path.join(out, "actions.csv"))
    return EXIT_OK


def cmd_cotrain(args, cfg):
    snap = WeightSnapshot.load(_need_file(args.snapshot, "snapshot"))
    out = _prepare_out(args, cfg)
    backend = _backend(args, cfg, snap)
    env = _make_env(cfg)
    eval_env = _make_env(cfg, 1000) if cfg.task == "pendulum" else env
    tcfg = cfg.cotrain_config()
    try:
        agent = None
        if args.agent:
            agent = _agent_from_npz(_need_file(args.agent, "agent checkpoint"), snap.actor, env, tcfg)
        result = cotrain(snap, backend, env, tcfg, agent=agent, route=cfg.cotrain["route"],
                         eval_env=eval_env)
    finally:
        env.close()
    result.actor.save(os.path.join(out, "actor.json"))
    result.agent.save_npz(os.path.join(out, "agent.npz"))
    result.to_csv(os.path.join(out, "rewards.csv"))
    result.curves_to_csv(os.path.join(out, "curves.csv"), cfg.td3["ma_window"])
    last = result.evaluations[-1] if result.evaluations else None
    _write_json(os.path.join(out, "summary.json"),
                {"total_steps": result.total_steps,
                 "final_eval_mean": None if last is None else last[1]})
    return EXIT_OK


def _read_eval_trace(run_dir):
    path = _need_file(os.path.join(run_dir, "rewards.csv"), "reward trace")
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["eval_mean"]:
                rows.append((int(row["step"]), float(row["eval_mean"])))
    return rows


def _run_seed(run_dir):
    path = os.path.join(run_dir, RESOLVED)
    if os.path.isfile(path):
        with open(path) as fh:
            return json.load(fh).get("seed")
    return None


def cmd_report(args, cfg):
    if len(args.software) != len(args.cotrain):
        raise ConfigError("--software and --cotrain need the same number of run directories")
    out = _prepare_out(args, cfg)
    sw = [_read_eval_trace(d) for d in args.software]
    co = [_read_eval_trace(d) for d in args.cotrain]
    seeds = [_run_seed(d) for d in args.software]
    threshold = cfg.report["threshold"] if args.threshold is None else args.threshold
    report = convergence_report(sw, co, threshold, seeds, cfg.report["ma_window"] or None)
    report.to_json(os.path.join(out, "convergence.json"))
    report.to_csv(os.path.join(out, "convergence.csv"))
    return EXIT_OK


COMMANDS = {"train": cmd_train, "calibrate": cmd_calibrate, "compare": cmd_compare,
            "cotrain": cmd_cotrain, "report": cmd_report}


def build_parser():
    parser = argparse.ArgumentParser(prog="photonic-srl", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", default="runs/out", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train the spiking TD3 agent")
    p.add_argument("--task", choices=TASKS)
    p.add_argument("--endpoint", help="remote env: tcp:host:port or stdio:<command>")

    p = sub.add_parser("calibrate", parents=[common], help="map L2 onto the mesh with SPGD")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--target-similarity", type=float)

    p = sub.add_parser("compare", parents=[common], help="offline hardware vs software inference")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--voltages", required=True)

    p = sub.add_parser("cotrain", parents=[common], help="fine-tune with L2 frozen on hardware")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--voltages", required=True)
    p.add_argument("--agent", help="agent.npz from the training run (pretrained critics)")
    p.add_argument("--task", choices=TASKS)
    p.add_argument("--endpoint")

    p = sub.add_parser("report", parents=[common], help="convergence comparison across seeds")
    p.add_argument("--software", nargs="+", required=True, help="training run directories")
    p.add_argument("--cotrain", nargs="+", required=True, help="co-training run directories")
    p.add_argument("--threshold", type=float)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        return COMMANDS[args.command](args, cfg)
    except (UndefinedSimilarityError, NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ProtocolError, ConnectionError, TimeoutError) as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (PhotonicSRLError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
