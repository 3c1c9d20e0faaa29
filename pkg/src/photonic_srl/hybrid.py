"""Hybrid optical-electronic actor: extraction, mapping, comparison, co-training.

The actor's hidden-to-hidden layer (L2) is the only layer placed on the
mesh.  Mesh entries are bounded by one, so the trained matrix is divided
by ``s = max|W2|`` before calibration and the optical product is scaled
back digitally.  Cosine calibration leaves the global magnitude of the
realized matrix free, so the digital factor is ``s * g`` with ``g`` the
least-squares gain between realized and normalized target.  The L2 bias
stays electronic.

Pipeline::

    snap = extract_l2(actor, env, n_samples=1000)
    record, twin = map_to_hardware(snap, mesh, SpgdConfig())
    backend = MeshBackend.for_snapshot(mesh, record.best_voltages, snap)
    report = offline_compare(snap, backend)
    result = cotrain(snap, backend, env, Td3Config(...))
"""

import copy
import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, DimensionError, NumericError, UsageError
from .mesh import PhotonicMesh
from .snn import ActorNet, actor_forward
from .spgd import SpgdConfig, calibrate
from .td3 import Td3Agent, Td3Config, TrainResult, _action_scale, moving_average, train
from .validation import check_rng

__all__ = ["WeightSnapshot", "DeviationReport", "ConvergenceReport", "MeshBackend",
           "extract_l2", "output_gain", "map_to_hardware", "hybrid_forward", "offline_compare",
           "cotrain", "steps_to_threshold", "convergence_report"]


# --------------------------------------------------------------------------
# Snapshot
# --------------------------------------------------------------------------

@dataclass
class WeightSnapshot:
    """Trained actor plus the L2 test set recorded on policy rollouts.

    ``inputs`` and ``outputs`` have shape (n_samples, T, h): lif1 spikes
    entering L2 and the pure product ``W2 @ spikes`` (bias excluded).
    ``actions`` are the software actions for ``states``.
    """

    actor: ActorNet
    scale: float
    states: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray
    actions: np.ndarray

    @property
    def l2_target(self):
        return self.actor.W2

    @property
    def n_samples(self):
        return self.states.shape[0]

    def to_dict(self):
        return {"actor": self.actor.to_dict(), "scale": self.scale,
                "states": self.states.tolist(), "inputs": self.inputs.tolist(),
                "outputs": self.outputs.tolist(), "actions": self.actions.tolist()}

    @classmethod
    def from_dict(cls, data):
        try:
            actor = ActorNet.from_dict(data["actor"])
            h, T = actor.hidden, actor.T
            arrays = {k: np.asarray(data[k], dtype=np.float64)
                      for k in ("states", "inputs", "outputs", "actions")}
            scale = float(data["scale"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed weight snapshot: {exc}") from exc
        n = arrays["states"].shape[0]
        expected = {"states": (n, actor.state_dim), "inputs": (n, T, h),
                    "outputs": (n, T, h), "actions": (n, actor.action_dim)}
        for name, shape in expected.items():
            if arrays[name].shape != shape:
                raise DimensionError(f"snapshot {name} has shape {arrays[name].shape}, expected {shape}")
        return cls(actor, scale, **arrays)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _scale_of(matrix):
    peak = float(np.max(np.abs(matrix))) if matrix.size else 0.0
    return peak if peak > 0 else 1.0


def extract_l2(actor, env, n_samples=1000, seed=0):
    """Roll out the deterministic policy and record the L2 test set.

    Episodes are restarted as needed until ``n_samples`` states have been
    visited.  The recorded outputs and actions come from one batched
    software forward pass over all visited states.
    """
    if not isinstance(actor, ActorNet):
        raise UsageError("extract_l2 needs a trained ActorNet")
    if int(n_samples) < 1:
        raise ConfigError(f"n_samples must be >= 1, got {n_samples}")
    rng = check_rng(seed)
    states = []
    obs = env.reset(seed=int(rng.integers(2**31)))
    while len(states) < n_samples:
        states.append(np.array(obs, dtype=np.float64))
        action, _ = actor_forward(actor, obs)
        obs, _, terminated, truncated = env.step(action)
        if terminated or truncated:
            obs = env.reset(seed=int(rng.integers(2**31)))
    states = np.stack(states)
    actions, trace = actor_forward(actor, states)
    return WeightSnapshot(actor.copy(), _scale_of(actor.W2), states,
                          np.ascontiguousarray(trace.l2_inputs.transpose(1, 0, 2)),
                          np.ascontiguousarray(trace.l2_outputs.transpose(1, 0, 2)),
                          actions)


# --------------------------------------------------------------------------
# Hardware mapping and backend
# --------------------------------------------------------------------------

class MeshBackend:
    """L2 product computed by the mesh and rescaled by ``scale``.

    ``matrix`` is the noiseless realized matrix times ``scale`` (the digital
    twin); backward passes differentiate through it.  Noiseless meshes use
    the twin directly for the forward product as well.
    """

    def __init__(self, mesh, voltages, scale=1.0, rng=None):
        if not isinstance(mesh, PhotonicMesh):
            raise ConfigError("mesh must be a PhotonicMesh")
        voltages.validate(mesh.topology, mesh.phase_map)
        self.mesh = mesh
        self.voltages = voltages
        self.scale = float(scale)
        self.rng = mesh.noise.make_rng(rng)
        self.matrix = self.scale * mesh.weight(voltages, noiseless=True)

    @classmethod
    def for_snapshot(cls, mesh, voltages, snapshot, rng=None, fit_gain=True):
        """Backend scaled by ``s * g`` for the snapshot's L2 target."""
        gain = 1.0
        if fit_gain:
            realized = mesh.weight(voltages, noiseless=True)
            gain = output_gain(realized, snapshot.l2_target / snapshot.scale)
        return cls(mesh, voltages, snapshot.scale * gain, rng)

    @property
    def shape(self):
        return self.matrix.shape

    def __call__(self, x):
        if self.mesh.noise.noiseless:
            return x @ self.matrix.T
        return self.scale * self.mesh.forward(self.voltages, x, self.rng)


def output_gain(realized, target):
    """Scalar ``g`` minimizing ``||g * realized - target||_F`` (1 for a dark mesh)."""
    norm2 = float(np.sum(realized * realized))
    if norm2 == 0.0:
        return 1.0
    return float(np.sum(realized * target)) / norm2


def map_to_hardware(snapshot, mesh, config=None, init=None, callback=None, fit_gain=True):
    """Calibrate ``mesh`` against ``W2 / s``.

    Returns ``(record, w_eff_scaled)`` where ``w_eff_scaled = s * g * W_eff``
    is the realized matrix in the actor's units (``g = 1`` without
    ``fit_gain``).
    """
    h = snapshot.actor.hidden
    if h != mesh.n:
        raise DimensionError(f"L2 is {h}x{h} but the mesh realizes {mesh.n}x{mesh.n}")
    target = snapshot.l2_target / snapshot.scale
    record = calibrate(mesh, target, config or SpgdConfig(), init=init, callback=callback)
    gain = output_gain(record.realized_matrix, target) if fit_gain else 1.0
    return record, (snapshot.scale * gain) * record.realized_matrix


def hybrid_forward(actor, backend, state):
    """Actor forward pass with L2 routed through ``backend``."""
    return actor_forward(actor, state, backend)


# --------------------------------------------------------------------------
# Offline comparison
# --------------------------------------------------------------------------

@dataclass
class DeviationReport:
    """Software vs hardware actions and L2 outputs on a shared test set.

    ``deviation_pct = 100 * |a_hw - a_sw| / action_range`` per dimension.
    L2 arrays have shape (n_samples, T, h); ``errors = measured - target``.
    """

    software_actions: np.ndarray
    hardware_actions: np.ndarray
    action_range: np.ndarray
    targets: np.ndarray
    measured: np.ndarray
    scale: float = 1.0

    @property
    def abs_deviation(self):
        return np.abs(self.hardware_actions - self.software_actions)

    @property
    def deviation_pct(self):
        return np.clip(100.0 * self.abs_deviation / self.action_range, 0.0, 100.0)

    @property
    def errors(self):
        return self.measured - self.targets

    @property
    def mean_deviation_pct(self):
        return float(self.deviation_pct.mean())

    @property
    def max_deviation_pct(self):
        return float(self.deviation_pct.max())

    def channel_stats(self):
        err = self.errors.reshape(-1, self.errors.shape[-1])
        return {"mean": err.mean(axis=0).tolist(), "std": err.std(axis=0).tolist()}

    def summary(self):
        err = self.errors
        return {"n_samples": int(self.software_actions.shape[0]),
                "mean_deviation_pct": self.mean_deviation_pct,
                "max_deviation_pct": self.max_deviation_pct,
                "mean_deviation_pct_per_dim": self.deviation_pct.mean(axis=0).tolist(),
                "action_range": self.action_range.tolist(),
                "scale": self.scale,
                "error_mean": float(err.mean()),
                "error_std": float(err.std()),
                "error_std_normalized": float(err.std() / self.scale),
                "channels": self.channel_stats()}

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)

    def to_csv(self, path):
        """Per-channel L2 series; ``sample`` counts (test input, time step) pairs."""
        n, T, h = self.targets.shape
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample", "channel", "target", "measured", "error"])
            for i in range(n):
                for t in range(T):
                    for c in range(h):
                        tgt, meas = self.targets[i, t, c], self.measured[i, t, c]
                        writer.writerow([i * T + t, c, repr(float(tgt)), repr(float(meas)),
                                         repr(float(meas - tgt))])

    def actions_to_csv(self, path):
        dev = self.deviation_pct
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample", "dim", "software", "hardware", "deviation_pct"])
            for i in range(dev.shape[0]):
                for d in range(dev.shape[1]):
                    writer.writerow([i, d, repr(float(self.software_actions[i, d])),
                                     repr(float(self.hardware_actions[i, d])), repr(float(dev[i, d]))])


def offline_compare(snapshot, backend, action_range=None):
    """Replay the test set through ``backend`` and compare with software.

    ``action_range`` defaults to ``a_max - a_min`` of the actor's box.
    """
    if snapshot.n_samples == 0:
        raise UsageError("the snapshot's test set is empty")
    actor = snapshot.actor
    rng_ = 2.0 * actor.action_scale if action_range is None else np.asarray(action_range, dtype=np.float64)
    rng_ = np.broadcast_to(rng_, (actor.action_dim,)).astype(np.float64)
    if np.any(rng_ <= 0):
        raise ConfigError("action range must be positive")
    actions, trace = hybrid_forward(actor, backend, snapshot.states)
    if not np.all(np.isfinite(actions)):
        raise NumericError("hardware forward produced non-finite actions")
    # readout noise enters before the digital rescale, so normalize by the backend's factor
    scale = float(getattr(backend, "scale", snapshot.scale))
    return DeviationReport(snapshot.actions, actions, rng_, snapshot.outputs,
                           trace.l2_outputs.transpose(1, 0, 2), scale)


# --------------------------------------------------------------------------
# Co-training
# --------------------------------------------------------------------------

def cotrain(snapshot, backend, env, cfg=None, agent=None, route="twin", eval_env=None,
            callback=None, stop_at=None):
    """Resume TD3 with the actor's L2 frozen at the hardware-realized matrix.

    ``backend.matrix`` (the twin) replaces W2 in both live and target
    actors.  ``route="twin"`` runs forward passes on the twin, ``"mesh"``
    routes them through ``backend``.  ``agent`` optionally supplies
    pretrained critics and targets; it is copied, not mutated.
    """
    if route not in ("twin", "mesh"):
        raise ConfigError(f"route must be 'twin' or 'mesh', got {route!r}")
    cfg = cfg or Td3Config()
    twin = np.array(backend.matrix, dtype=np.float64)
    if twin.shape != snapshot.actor.W2.shape:
        raise DimensionError(f"backend realizes {twin.shape}, actor L2 is {snapshot.actor.W2.shape}")
    if agent is None:
        actor = snapshot.actor.copy()
        actor.W2 = twin.copy()
        seed_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(7)[6])
        agent = Td3Agent.create(env.observation_dim, env.action_dim, _action_scale(env), cfg,
                                seed_rng, actor=actor)
    else:
        agent = copy.deepcopy(agent)
        agent.actor = snapshot.actor.copy()
        agent.actor.W2 = twin.copy()
        agent.actor_target.W2 = twin.copy()
        agent.reset_actor_optimizer(cfg.actor_lr)
    result = train(env, cfg, agent, eval_env, backend if route == "mesh" else None,
                   freeze_w2=True, callback=callback, stop_at=stop_at)
    if not np.array_equal(result.agent.actor.W2, twin):
        raise NumericError("frozen L2 changed during co-training")
    return result


# --------------------------------------------------------------------------
# Convergence comparison
# --------------------------------------------------------------------------

def steps_to_threshold(trace, threshold, ma_window=None):
    """First step whose (optionally smoothed) evaluation mean reaches ``threshold``.

    ``trace`` is a :class:`TrainResult` or a sequence of ``(step, value)``.
    Returns ``None`` when the threshold is never reached.
    """
    if isinstance(trace, TrainResult):
        rows = [(e[0], e[1]) for e in trace.evaluations]
    else:
        rows = [(r[0], r[1]) for r in trace]
    if not rows:
        return None
    steps = np.array([r[0] for r in rows])
    values = np.array([r[1] for r in rows], dtype=np.float64)
    if ma_window:
        values = moving_average(values, ma_window)
    hits = np.flatnonzero(values >= threshold)
    return int(steps[hits[0]]) if hits.size else None


@dataclass
class ConvergenceReport:
    threshold: float
    rows: list = field(default_factory=list)   # seed, software_steps, cotrain_steps, reduction_pct

    @property
    def valid(self):
        return [r for r in self.rows if r[3] is not None]

    @property
    def mean_reduction_pct(self):
        vals = [r[3] for r in self.valid]
        return float(np.mean(vals)) if vals else None

    def summary(self):
        valid = self.valid
        return {"threshold": self.threshold,
                "n_seeds": len(self.rows),
                "n_convergent": len(valid),
                "non_convergent_seeds": [r[0] for r in self.rows if r[3] is None],
                "mean_software_steps": float(np.mean([r[1] for r in valid])) if valid else None,
                "mean_cotrain_steps": float(np.mean([r[2] for r in valid])) if valid else None,
                "mean_reduction_pct": self.mean_reduction_pct,
                "per_seed": [{"seed": s, "software_steps": a, "cotrain_steps": b, "reduction_pct": r}
                             for s, a, b, r in self.rows]}

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["seed", "software_steps", "cotrain_steps", "reduction_pct"])
            for row in self.rows:
                writer.writerow(["" if v is None else v for v in row])


def convergence_report(software_traces, cotrain_traces, threshold, seeds=None, ma_window=None):
    """Steps-to-threshold per seed and the percentage reduction of co-training.

    ``reduction = 100 * (software - cotrain) / software``; seeds where either
    run never reaches the threshold are kept with ``reduction_pct = None``.
    """
    if len(software_traces) != len(cotrain_traces):
        raise ConfigError("need one co-training trace per software trace")
    seeds = list(range(len(software_traces))) if seeds is None else list(seeds)
    report = ConvergenceReport(float(threshold))
    for seed, sw, co in zip(seeds, software_traces, cotrain_traces):
        a = steps_to_threshold(sw, threshold, ma_window)
        b = steps_to_threshold(co, threshold, ma_window)
        red = None if a is None or b is None else 100.0 * (a - b) / a
        report.rows.append((seed, a, b, red))
    return report
