"""Spiking actor network with surrogate-gradient training support.

The actor is ``state -> L1 -> LIF -> L2 -> LIF -> average over T -> L3
-> tanh``.  L2 is pluggable (``backend``) so the same forward pass can
run on a dense digital matrix or on the photonic mesh.

LIF update per step (hard reset to zero, applied one step late through
the ``(1 - s)`` gate)::

    u_t = decay * u_{t-1} * (1 - s_{t-1}) + I_t
    s_t = [u_t >= threshold]

Backpropagation replaces ``d s / d u`` by a rectangular window of height
``1 / (2a)`` and half-width ``a`` around the threshold.  Spikes gating the
reset are treated as constants.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, DimensionError, NumericError, UsageError
from .validation import check_batch, check_rng

__all__ = ["LifConfig", "LifState", "ActorNet", "SpikeTrace", "DenseBackend",
           "lif_step", "encode", "actor_forward", "surrogate_grad", "actor_backward",
           "PARAM_NAMES"]

PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3")


@dataclass(frozen=True)
class LifConfig:
    decay: float = 0.5
    threshold: float = 1.0
    reset: str = "hard_zero"
    surrogate_width: float = 0.5

    def __post_init__(self):
        if not 0 <= self.decay < 1:
            raise ConfigError(f"decay must lie in [0, 1), got {self.decay}")
        if not self.threshold > 0:
            raise ConfigError(f"threshold must be > 0, got {self.threshold}")
        if self.reset != "hard_zero":
            raise ConfigError(f"unsupported reset {self.reset!r}")
        if not self.surrogate_width > 0:
            raise ConfigError(f"surrogate_width must be > 0, got {self.surrogate_width}")

    def to_dict(self):
        return {"decay": self.decay, "threshold": self.threshold,
                "reset": self.reset, "surrogate_width": self.surrogate_width}


@dataclass
class LifState:
    membrane: np.ndarray
    last_spikes: np.ndarray

    @classmethod
    def rest(cls, shape):
        return cls(np.zeros(shape), np.zeros(shape))


def lif_step(state, cfg, current):
    """Advance a LIF population by one step; returns ``(new_state, spikes)``."""
    current = np.asarray(current, dtype=np.float64)
    if current.shape != np.shape(state.membrane):
        raise DimensionError(f"current shape {current.shape} != membrane shape {np.shape(state.membrane)}")
    if not np.all(np.isfinite(current)):
        raise NumericError("LIF input current contains non-finite values")
    u = cfg.decay * state.membrane * (1.0 - state.last_spikes) + current
    spikes = (u >= cfg.threshold).astype(np.float64)
    return LifState(u, spikes), spikes


def encode(obs, T):
    """Direct-current coding: the observation repeated for ``T`` steps."""
    obs = np.asarray(obs, dtype=np.float64)
    if int(T) < 1:
        raise ConfigError(f"T must be >= 1, got {T}")
    return np.repeat(obs[None, ...], int(T), axis=0)


def surrogate_grad(u_minus_th, a):
    """Rectangular pseudo-derivative of the spike step."""
    if not a > 0:
        raise ConfigError(f"surrogate width must be > 0, got {a}")
    x = np.asarray(u_minus_th, dtype=np.float64)
    out = np.where(np.abs(x) < a, 1.0 / (2.0 * a), 0.0)
    return float(out) if out.ndim == 0 else out


class DenseBackend:
    """Digital L2: ``y = x @ matrix.T``."""

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=np.float64)

    @property
    def shape(self):
        return self.matrix.shape

    def __call__(self, x):
        return x @ self.matrix.T


@dataclass
class ActorNet:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray
    lif1: LifConfig = field(default_factory=LifConfig)
    lif2: LifConfig = field(default_factory=LifConfig)
    T: int = 1
    action_scale: np.ndarray = None

    def __post_init__(self):
        for name in PARAM_NAMES:
            setattr(self, name, np.array(getattr(self, name), dtype=np.float64))
        h, d_s = self.W1.shape
        d_a = self.W3.shape[0]
        expected = {"b1": (h,), "W2": (h, h), "b2": (h,), "W3": (d_a, h), "b3": (d_a,)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise DimensionError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if int(self.T) < 1:
            raise ConfigError(f"T must be >= 1, got {self.T}")
        self.T = int(self.T)
        scale = np.ones(d_a) if self.action_scale is None else self.action_scale
        self.action_scale = np.broadcast_to(np.asarray(scale, dtype=np.float64), (d_a,)).copy()

    @classmethod
    def initialize(cls, state_dim, action_dim, hidden=16, T=1, action_scale=1.0,
                   lif1=None, lif2=None, init_gain=1.0, rng=None):
        """Uniform fan-in initialization, ``U(-g/sqrt(fan_in), g/sqrt(fan_in))``."""
        rng = check_rng(rng)

        def layer(fan_out, fan_in):
            bound = init_gain / math.sqrt(fan_in)
            return rng.uniform(-bound, bound, (fan_out, fan_in)), rng.uniform(-bound, bound, fan_out)

        W1, b1 = layer(hidden, state_dim)
        W2, b2 = layer(hidden, hidden)
        W3, b3 = layer(action_dim, hidden)
        return cls(W1, b1, W2, b2, W3, b3, lif1 or LifConfig(), lif2 or LifConfig(), T, action_scale)

    @property
    def arch(self):
        return [self.W1.shape[1], self.W1.shape[0], self.W2.shape[0], self.W3.shape[0]]

    @property
    def state_dim(self):
        return self.W1.shape[1]

    @property
    def action_dim(self):
        return self.W3.shape[0]

    @property
    def hidden(self):
        return self.W1.shape[0]

    def params(self):
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self):
        return ActorNet(**{k: v.copy() for k, v in self.params().items()},
                        lif1=self.lif1, lif2=self.lif2, T=self.T, action_scale=self.action_scale.copy())

    def to_dict(self):
        out = {"arch": self.arch, "T": self.T,
               "lif": {"lif1": self.lif1.to_dict(), "lif2": self.lif2.to_dict()}}
        out.update({k: v.tolist() for k, v in self.params().items()})
        out["action_scale"] = self.action_scale.tolist()
        return out

    @classmethod
    def from_dict(cls, data):
        try:
            lif = data.get("lif", {})
            if "lif1" in lif:
                lif1, lif2 = LifConfig(**lif["lif1"]), LifConfig(**lif["lif2"])
            else:
                lif1 = lif2 = LifConfig(**lif)
            net = cls(*(np.asarray(data[k], dtype=np.float64) for k in PARAM_NAMES),
                      lif1=lif1, lif2=lif2, T=int(data["T"]), action_scale=data.get("action_scale"))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed actor snapshot: {exc}") from exc
        if "arch" in data and list(data["arch"]) != net.arch:
            raise ConfigError(f"snapshot arch {data['arch']} does not match weights {net.arch}")
        return net

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class SpikeTrace:
    """Layer-2 spikes per step, their temporal mean and the backward cache.

    ``spikes`` has shape (T, batch, h); ``spike_count_avg`` (batch, h).
    """

    spikes: np.ndarray
    spike_count_avg: np.ndarray
    l2_inputs: np.ndarray = None
    l2_outputs: np.ndarray = None
    cache: dict = None
    single: bool = False


def actor_forward(net, state, backend=None):
    """Unrolled forward pass; returns ``(action, trace)``.

    ``backend`` computes the pure L2 matrix product (no bias); it defaults
    to the dense ``net.W2``.  ``state`` may be one observation or a batch.
    """
    x, single = check_batch(state, net.state_dim, "state")
    backend = DenseBackend(net.W2) if backend is None else backend
    shape = getattr(backend, "shape", None)
    if shape is not None and tuple(shape) != net.W2.shape:
        raise ConfigError(f"L2 backend realizes {tuple(shape)}, actor needs {net.W2.shape}")
    batch, h = x.shape[0], net.hidden
    T = net.T
    lif1, lif2 = net.lif1, net.lif2

    i1 = x @ net.W1.T + net.b1          # identical for every step under direct coding
    u1 = np.zeros((T, batch, h))
    s1 = np.zeros((T, batch, h))
    u2 = np.zeros((T, batch, h))
    s2 = np.zeros((T, batch, h))
    y2 = np.zeros((T, batch, h))
    prev_u1 = prev_s1 = prev_u2 = prev_s2 = 0.0
    for t in range(T):
        u1[t] = lif1.decay * prev_u1 * (1.0 - prev_s1) + i1
        s1[t] = u1[t] >= lif1.threshold
        out = np.asarray(backend(s1[t]), dtype=np.float64)
        if out.shape != (batch, h):
            raise ConfigError(f"L2 backend returned shape {out.shape}, expected {(batch, h)}")
        y2[t] = out
        u2[t] = lif2.decay * prev_u2 * (1.0 - prev_s2) + out + net.b2
        s2[t] = u2[t] >= lif2.threshold
        prev_u1, prev_s1, prev_u2, prev_s2 = u1[t], s1[t], u2[t], s2[t]

    avg = s2.sum(axis=0) / T
    squashed = np.tanh(avg @ net.W3.T + net.b3)
    action = squashed * net.action_scale
    cache = {"x": x, "u1": u1, "s1": s1, "u2": u2, "s2": s2, "squashed": squashed,
             "l2_matrix": getattr(backend, "matrix", net.W2)}
    trace = SpikeTrace(s2, avg, l2_inputs=s1, l2_outputs=y2, cache=cache, single=single)
    return (action[0] if single else action), trace


def actor_backward(net, trace, upstream, freeze_w2=False):
    """Backpropagation through time for the unrolled actor.

    ``upstream`` is ``dLoss/daction`` with the same batch layout the forward
    pass saw.  Gradients are summed over the batch.  With ``freeze_w2`` the
    W2 gradient is returned as zeros (hardware-frozen layer).
    """
    if trace is None or trace.cache is None:
        raise UsageError("actor_backward needs the trace of a preceding actor_forward call")
    c = trace.cache
    g_action = np.asarray(upstream, dtype=np.float64)
    if trace.single:
        g_action = g_action.reshape(1, -1)
    if g_action.shape != c["squashed"].shape:
        raise DimensionError(f"upstream shape {g_action.shape} != action shape {c['squashed'].shape}")
    T = net.T
    x, u1, s1, u2, s2 = c["x"], c["u1"], c["s1"], c["u2"], c["s2"]
    l2 = c["l2_matrix"]

    g_z = g_action * net.action_scale * (1.0 - c["squashed"] ** 2)
    grads = {"W3": g_z.T @ trace.spike_count_avg, "b3": g_z.sum(axis=0)}
    g_s2 = (g_z @ net.W3) / T

    sg2 = surrogate_grad(u2 - net.lif2.threshold, net.lif2.surrogate_width)
    sg1 = surrogate_grad(u1 - net.lif1.threshold, net.lif1.surrogate_width)
    g_i2 = np.zeros_like(u2)
    g_i1 = np.zeros_like(u1)
    carry2 = carry1 = 0.0
    for t in range(T - 1, -1, -1):
        g_u2 = g_s2 * sg2[t] + carry2
        g_i2[t] = g_u2
        g_s1 = g_u2 @ l2
        g_u1 = g_s1 * sg1[t] + carry1
        g_i1[t] = g_u1
        if t > 0:
            carry2 = g_u2 * net.lif2.decay * (1.0 - s2[t - 1])
            carry1 = g_u1 * net.lif1.decay * (1.0 - s1[t - 1])

    g_i2_flat = g_i2.reshape(-1, g_i2.shape[-1])
    grads["W2"] = np.zeros_like(net.W2) if freeze_w2 else g_i2_flat.T @ s1.reshape(-1, s1.shape[-1])
    grads["b2"] = g_i2_flat.sum(axis=0)
    g_i1_total = g_i1.sum(axis=0)
    grads["W1"] = g_i1_total.T @ x
    grads["b1"] = g_i1_total.sum(axis=0)
    return {name: grads[name] for name in PARAM_NAMES}
