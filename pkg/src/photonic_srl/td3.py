"""Twin-delayed deep deterministic policy gradient with a spiking actor.

Pure numpy: critics are small ReLU perceptrons with hand-written
backward passes, the actor is :class:`~photonic_srl.snn.ActorNet`.
:class:`SpikingTD3` is the estimator front end (``fit(env)`` trains,
``predict(states)`` returns deterministic actions).
"""

import csv
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigError, DimensionError, ProtocolError, UsageError
from .snn import ActorNet, LifConfig, actor_backward, actor_forward
from .validation import check_batch, check_rng

__all__ = ["CriticNet", "Transition", "ReplayBuffer", "Td3Config", "Adam",
           "Td3Agent", "TrainResult", "select_action", "compute_target",
           "critic_update", "actor_update", "soft_update", "train", "evaluate",
           "SpikingTD3"]

CRITIC_PARAMS = ("W1", "b1", "W2", "b2", "W3", "b3")


# --------------------------------------------------------------------------
# Networks and optimizer
# --------------------------------------------------------------------------

@dataclass
class CriticNet:
    """``Q(s, a)``: concat -> ReLU -> ReLU -> linear."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray

    @classmethod
    def initialize(cls, input_dim, hidden=32, rng=None):
        rng = check_rng(rng)

        def layer(fan_out, fan_in):
            bound = 1.0 / math.sqrt(fan_in)
            return rng.uniform(-bound, bound, (fan_out, fan_in)), rng.uniform(-bound, bound, fan_out)

        W1, b1 = layer(hidden, input_dim)
        W2, b2 = layer(hidden, hidden)
        W3, b3 = layer(1, hidden)
        return cls(W1, b1, W2, b2, W3, b3)

    @property
    def input_dim(self):
        return self.W1.shape[1]

    def params(self):
        return {name: getattr(self, name) for name in CRITIC_PARAMS}

    def copy(self):
        return CriticNet(**{k: v.copy() for k, v in self.params().items()})

    def forward(self, s, a):
        """Return ``(q of shape (batch,), cache)``."""
        x = np.concatenate([np.atleast_2d(s), np.atleast_2d(a)], axis=1)
        if x.shape[1] != self.input_dim:
            raise DimensionError(f"critic input has width {x.shape[1]}, expected {self.input_dim}")
        h1 = np.maximum(x @ self.W1.T + self.b1, 0.0)
        h2 = np.maximum(h1 @ self.W2.T + self.b2, 0.0)
        q = (h2 @ self.W3.T + self.b3)[:, 0]
        return q, (x, h1, h2)

    def __call__(self, s, a):
        return self.forward(s, a)[0]

    def backward(self, cache, g_q):
        """Parameter gradients and ``dQ/dinput`` for upstream ``g_q`` (batch,)."""
        x, h1, h2 = cache
        g3 = np.asarray(g_q, dtype=np.float64)[:, None]
        grads = {"W3": g3.T @ h2, "b3": g3.sum(axis=0)}
        g_h2 = (g3 @ self.W3) * (h2 > 0)
        grads["W2"] = g_h2.T @ h1
        grads["b2"] = g_h2.sum(axis=0)
        g_h1 = (g_h2 @ self.W2) * (h1 > 0)
        grads["W1"] = g_h1.T @ x
        grads["b1"] = g_h1.sum(axis=0)
        return grads, g_h1 @ self.W1


class Adam:
    """Adaptive-moment optimizer over a dict of named arrays (in place)."""

    def __init__(self, params, lr=3e-4, betas=(0.9, 0.999), eps=1e-8):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads, skip=()):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            if name in skip:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# --------------------------------------------------------------------------
# Replay
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s2: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions with uniform sampling."""

    def __init__(self, capacity, state_dim, action_dim):
        if int(capacity) < 1:
            raise ConfigError("buffer capacity must be >= 1")
        self.capacity = int(capacity)
        self.s = np.zeros((self.capacity, state_dim))
        self.a = np.zeros((self.capacity, action_dim))
        self.r = np.zeros(self.capacity)
        self.s2 = np.zeros((self.capacity, state_dim))
        self.done = np.zeros(self.capacity)
        self.size = 0
        self._next = 0

    def __len__(self):
        return self.size

    def add(self, s, a, r, s2, done):
        if not math.isfinite(r):
            raise ProtocolError(f"non-finite reward {r!r}")
        i = self._next
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.s2[i] = s2
        self.done[i] = float(done)
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def push(self, transition):
        t = transition
        self.add(t.s, t.a, t.r, t.s2, t.done)

    def _order(self):
        # physical slots from oldest to newest
        start = self._next if self.size == self.capacity else 0
        return (start + np.arange(self.size)) % self.capacity

    def transitions(self):
        """Stored transitions, oldest first."""
        return [Transition(self.s[i].copy(), self.a[i].copy(), float(self.r[i]),
                           self.s2[i].copy(), bool(self.done[i])) for i in self._order()]

    def sample(self, batch_size, rng):
        if self.size == 0:
            raise UsageError("cannot sample from an empty buffer")
        idx = rng.integers(0, self.size, size=batch_size)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx], self.done[idx]


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Td3Config:
    """TD3 hyperparameters.

    ``explore_sigma``, ``target_sigma`` and ``target_clip`` are fractions of
    the per-dimension action half-range ``a_max``.
    """

    gamma: float = 0.99
    tau: float = 0.005
    policy_delay: int = 2
    explore_sigma: float = 0.1
    target_sigma: float = 0.2
    target_clip: float = 0.5
    batch: int = 256
    buffer_size: int = 1_000_000
    warmup: int = 10_000
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    total_steps: int = 150_000
    seed: int = 0
    hidden: int = 16
    critic_hidden: int = 32
    T: int = 1
    lif_decay: float = 0.5
    lif_threshold: float = 1.0
    surrogate_width: float = 0.5
    actor_init_gain: float = 1.0
    eval_every: int = 5_000
    eval_episodes: int = 10
    ma_window: int = 50
    truncation_as_terminal: bool = False

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ConfigError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0 < self.tau <= 1:
            raise ConfigError(f"tau must lie in (0, 1], got {self.tau}")
        if int(self.policy_delay) < 1:
            raise ConfigError("policy_delay must be >= 1")
        if not self.target_clip > 0:
            raise ConfigError("target_clip must be > 0")
        if int(self.batch) < 1:
            raise ConfigError("batch must be >= 1")
        if self.explore_sigma < 0 or self.target_sigma < 0:
            raise ConfigError("noise scales must be >= 0")
        if int(self.total_steps) < 0 or int(self.warmup) < 0:
            raise ConfigError("total_steps and warmup must be >= 0")
        if int(self.T) < 1 or int(self.hidden) < 1:
            raise ConfigError("T and hidden must be >= 1")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown Td3Config fields: {sorted(unknown)}")
        return cls(**data)

    def lif(self):
        return LifConfig(self.lif_decay, self.lif_threshold, "hard_zero", self.surrogate_width)


# --------------------------------------------------------------------------
# Algorithm pieces
# --------------------------------------------------------------------------

def _bounds(actor):
    return -actor.action_scale, actor.action_scale


def select_action(actor, s, sigma, rng, backend=None):
    """Policy action plus ``N(0, sigma)`` noise, clipped to the action box.

    ``sigma`` may be a scalar or one value per action dimension.
    """
    action, _ = actor_forward(actor, s, backend)
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma > 0):
        action = action + rng.normal(0.0, 1.0, np.shape(action)) * sigma
    lo, hi = _bounds(actor)
    return np.clip(action, lo, hi)


def compute_target(r, s2, done, target_actor, target_critics, cfg, rng, backend=None):
    """Clipped double-Q target with target-policy smoothing.

    Returns ``(y, q1, q2)`` where ``q1``/``q2`` are the target critics'
    values at the smoothed next action.
    """
    r = np.asarray(r, dtype=np.float64)
    done = np.asarray(done, dtype=np.float64)
    a_next, _ = actor_forward(target_actor, s2, backend)
    a_next = np.atleast_2d(a_next)
    scale = target_actor.action_scale
    eps = rng.normal(0.0, 1.0, a_next.shape) * (cfg.target_sigma * scale)
    eps = np.clip(eps, -cfg.target_clip * scale, cfg.target_clip * scale)
    a_next = np.clip(a_next + eps, -scale, scale)
    q1 = target_critics[0](s2, a_next)
    q2 = target_critics[1](s2, a_next)
    y = r + cfg.gamma * (1.0 - done) * np.minimum(q1, q2)
    return y, q1, q2


def critic_update(critics, batch, y, optimizers):
    """One Adam step per critic on the mean-squared error to ``y``."""
    s, a = batch[0], batch[1]
    losses = []
    for critic, opt in zip(critics, optimizers):
        q, cache = critic.forward(s, a)
        err = q - y
        losses.append(float(np.mean(err ** 2)))
        grads, _ = critic.backward(cache, 2.0 * err / len(err))
        opt.step(critic.params(), grads)
    return tuple(losses)


def actor_update(actor, critic, states, optimizer, step, cfg, backend=None, freeze_w2=False):
    """Deterministic policy-gradient step through the spiking actor.

    Only legal when ``step % cfg.policy_delay == 0``.  Returns the policy
    loss ``-mean(Q1(s, pi(s)))`` evaluated before the step.
    """
    if step % cfg.policy_delay != 0:
        raise UsageError(f"actor update requested at step {step}, not a multiple of {cfg.policy_delay}")
    action, trace = actor_forward(actor, states, backend)
    q, cache = critic.forward(states, action)
    n = len(q)
    _, g_input = critic.backward(cache, np.full(n, -1.0 / n))
    g_action = g_input[:, critic.input_dim - actor.action_dim:]
    grads = actor_backward(actor, trace, g_action, freeze_w2=freeze_w2)
    optimizer.step(actor.params(), grads, skip=("W2",) if freeze_w2 else ())
    return -float(np.mean(q))


def soft_update(live, target, tau, skip=()):
    """``target <- tau * live + (1 - tau) * target``.

    Works on arrays (returns the blended array), on dicts of arrays and on
    networks exposing ``params()`` (blended in place and returned).
    """
    if isinstance(live, np.ndarray) or np.isscalar(live):
        live = np.asarray(live, dtype=np.float64)
        target = np.asarray(target, dtype=np.float64)
        if live.shape != target.shape:
            raise DimensionError(f"shape mismatch {live.shape} vs {target.shape}")
        return tau * live + (1.0 - tau) * target
    lp = live.params() if hasattr(live, "params") else live
    tp = target.params() if hasattr(target, "params") else target
    if lp.keys() != tp.keys():
        raise DimensionError("parameter sets differ")
    for name, value in lp.items():
        if name in skip:
            continue
        if value.shape != tp[name].shape:
            raise DimensionError(f"{name}: shape mismatch {value.shape} vs {tp[name].shape}")
        tp[name] *= (1.0 - tau)
        tp[name] += tau * value
    return target


# --------------------------------------------------------------------------
# Agent state and training loop
# --------------------------------------------------------------------------

@dataclass
class Td3Agent:
    """Everything the training loop mutates."""

    actor: ActorNet
    actor_target: ActorNet
    critics: list
    critic_targets: list
    actor_opt: Adam
    critic_opts: list
    updates: int = 0
    actor_updates: int = 0

    @classmethod
    def create(cls, state_dim, action_dim, action_scale, cfg, rng=None, actor=None):
        rng = check_rng(rng)
        if actor is None:
            actor = ActorNet.initialize(state_dim, action_dim, cfg.hidden, cfg.T, action_scale,
                                        cfg.lif(), cfg.lif(), cfg.actor_init_gain, rng)
        else:
            actor = actor.copy()
        critics = [CriticNet.initialize(state_dim + action_dim, cfg.critic_hidden, rng) for _ in range(2)]
        return cls(actor, actor.copy(), critics, [c.copy() for c in critics],
                   Adam(actor.params(), cfg.actor_lr),
                   [Adam(c.params(), cfg.critic_lr) for c in critics])

    def reset_actor_optimizer(self, lr):
        self.actor_opt = Adam(self.actor.params(), lr)

    def save_npz(self, path):
        arrays = {}
        for prefix, net in (("actor", self.actor), ("actor_target", self.actor_target),
                            ("critic1", self.critics[0]), ("critic2", self.critics[1]),
                            ("critic1_target", self.critic_targets[0]),
                            ("critic2_target", self.critic_targets[1])):
            for k, v in net.params().items():
                arrays[f"{prefix}.{k}"] = v
        np.savez(path, **arrays)

    def load_critics_npz(self, path):
        data = np.load(path)
        for prefix, net in (("critic1", self.critics[0]), ("critic2", self.critics[1]),
                            ("critic1_target", self.critic_targets[0]),
                            ("critic2_target", self.critic_targets[1])):
            for k in CRITIC_PARAMS:
                value = data[f"{prefix}.{k}"]
                if value.shape != getattr(net, k).shape:
                    raise DimensionError(f"{prefix}.{k}: checkpoint shape {value.shape} mismatch")
                setattr(net, k, value.copy())


@dataclass
class TrainResult:
    agent: Td3Agent
    episodes: list = field(default_factory=list)   # rows: step, episode, return, eval_mean, eval_std
    evaluations: list = field(default_factory=list)  # rows: step, mean, std
    total_steps: int = 0

    @property
    def actor(self):
        return self.agent.actor

    def returns(self):
        return np.array([row[2] for row in self.episodes])

    def eval_curve(self, ma_window=50):
        """``(steps, raw means, moving average)`` of the evaluation returns."""
        if not self.evaluations:
            return np.zeros(0), np.zeros(0), np.zeros(0)
        steps = np.array([e[0] for e in self.evaluations], dtype=np.int64)
        raw = np.array([e[1] for e in self.evaluations])
        return steps, raw, moving_average(raw, ma_window)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "episode", "return", "eval_mean", "eval_std"])
            for step, ep, ret, em, es in self.episodes:
                writer.writerow([step, ep, repr(float(ret)),
                                 "" if em is None else repr(float(em)),
                                 "" if es is None else repr(float(es))])

    def curves_to_csv(self, path, ma_window=50):
        """Raw and moving-average curves of episode and evaluation returns."""
        rets = self.returns()
        ma = moving_average(rets, ma_window)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kind", "step", "raw", "ma"])
            for row, r, m in zip(self.episodes, rets, ma):
                writer.writerow(["episode", row[0], repr(float(r)), repr(float(m))])
            steps, raw, ema = self.eval_curve(ma_window)
            for s, r, m in zip(steps, raw, ema):
                writer.writerow(["eval", int(s), repr(float(r)), repr(float(m))])


def moving_average(values, window):
    """Trailing mean over up to ``window`` most recent values."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return values
    csum = np.cumsum(np.insert(values, 0, 0.0))
    idx = np.arange(1, values.size + 1)
    lo = np.maximum(idx - int(window), 0)
    return (csum[idx] - csum[lo]) / (idx - lo)


def evaluate(actor, env, episodes, rng=None, backend=None):
    """Deterministic-policy returns over ``episodes`` full episodes."""
    rng = check_rng(rng)
    returns = []
    for _ in range(int(episodes)):
        obs = env.reset(seed=int(rng.integers(2**31)))
        total, finished = 0.0, False
        while not finished:
            action = select_action(actor, obs, 0.0, rng, backend)
            obs, reward, terminated, truncated = env.step(action)
            total += reward
            finished = terminated or truncated
        returns.append(total)
    return np.array(returns)


def _check_env(env, agent):
    for attr in ("observation_dim", "action_dim", "action_low", "action_high", "reset", "step"):
        if not hasattr(env, attr):
            raise ProtocolError(f"environment lacks {attr!r}")
    if env.observation_dim != agent.actor.state_dim or env.action_dim != agent.actor.action_dim:
        raise ProtocolError(f"environment dims ({env.observation_dim}, {env.action_dim}) do not match "
                            f"actor ({agent.actor.state_dim}, {agent.actor.action_dim})")


def _action_scale(env):
    low = np.asarray(env.action_low, dtype=np.float64)
    high = np.asarray(env.action_high, dtype=np.float64)
    if not np.allclose(low, -high):
        raise ConfigError("only symmetric action boxes are supported")
    return high


def train(env, cfg=None, agent=None, eval_env=None, backend=None, freeze_w2=False,
          callback=None, stop_at=None):
    """Run the TD3 loop for ``cfg.total_steps`` environment steps.

    ``backend`` reroutes every actor L2 product (live and target); with
    ``freeze_w2`` the actor's W2 is never updated.  ``stop_at`` ends the run
    early once a periodic evaluation mean reaches that value.  Returns a
    :class:`TrainResult` whose agent holds the final networks.
    """
    cfg = cfg or Td3Config()
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(6)]
    init_rng, explore_rng, sample_rng, target_rng, env_rng, eval_rng = streams
    if agent is None:
        agent = Td3Agent.create(env.observation_dim, env.action_dim, _action_scale(env), cfg, init_rng)
    _check_env(env, agent)
    if freeze_w2 and not np.array_equal(agent.actor.W2, agent.actor_target.W2):
        raise UsageError("freeze_w2 requires identical live and target W2")
    eval_env = env if eval_env is None else eval_env
    actor = agent.actor
    scale = actor.action_scale
    buffer = ReplayBuffer(min(cfg.buffer_size, max(int(cfg.total_steps), 1)), env.observation_dim, env.action_dim)
    result = TrainResult(agent)
    skip = ("W2",) if freeze_w2 else ()

    obs = env.reset(seed=int(env_rng.integers(2**31)))
    episode, ep_return, next_eval = 0, 0.0, cfg.eval_every
    eval_pending = False
    for step in range(1, int(cfg.total_steps) + 1):
        if step <= cfg.warmup:
            action = explore_rng.uniform(-scale, scale)
        else:
            action = select_action(actor, obs, cfg.explore_sigma * scale, explore_rng, backend)
        obs2, reward, terminated, truncated = env.step(action)
        if not np.all(np.isfinite(obs2)):
            raise ProtocolError(f"environment returned non-finite observation at step {step}")
        terminal = terminated or (truncated and cfg.truncation_as_terminal)
        buffer.add(obs, action, reward, obs2, terminal)
        ep_return += reward
        obs = obs2

        if step > cfg.warmup and len(buffer) >= cfg.batch:
            batch = buffer.sample(cfg.batch, sample_rng)
            y, _, _ = compute_target(batch[2], batch[3], batch[4], agent.actor_target,
                                     agent.critic_targets, cfg, target_rng, backend)
            critic_update(agent.critics, batch, y, agent.critic_opts)
            agent.updates += 1
            if agent.updates % cfg.policy_delay == 0:
                actor_update(actor, agent.critics[0], batch[0], agent.actor_opt, agent.updates,
                             cfg, backend, freeze_w2)
                agent.actor_updates += 1
                soft_update(actor, agent.actor_target, cfg.tau, skip=skip)
                for live, tgt in zip(agent.critics, agent.critic_targets):
                    soft_update(live, tgt, cfg.tau)

        if cfg.eval_every and step >= next_eval:
            eval_pending = True
            next_eval += cfg.eval_every

        if terminated or truncated:
            eval_mean = eval_std = None
            if eval_pending:
                rets = evaluate(actor, eval_env, cfg.eval_episodes, eval_rng, backend)
                eval_mean, eval_std = float(rets.mean()), float(rets.std())
                result.evaluations.append((step, eval_mean, eval_std))
                eval_pending = False
            result.episodes.append((step, episode, ep_return, eval_mean, eval_std))
            if callback is not None:
                callback(step, episode, ep_return, eval_mean)
            episode += 1
            ep_return = 0.0
            result.total_steps = step
            if stop_at is not None and eval_mean is not None and eval_mean >= stop_at:
                return result
            obs = env.reset(seed=int(env_rng.integers(2**31)))
        result.total_steps = step
    return result


# --------------------------------------------------------------------------
# Estimator front end
# --------------------------------------------------------------------------

class SpikingTD3(BaseEstimator):
    """Spiking-actor TD3 agent with a scikit-learn style interface.

    ``fit(env)`` trains from scratch (or continues with ``warm_start``);
    ``predict(states)`` returns deterministic actions for one observation
    or a batch.  All hyperparameters are :class:`Td3Config` fields.
    """

    def __init__(self, gamma=0.99, tau=0.005, policy_delay=2, explore_sigma=0.1,
                 target_sigma=0.2, target_clip=0.5, batch=256, buffer_size=1_000_000,
                 warmup=10_000, actor_lr=3e-4, critic_lr=3e-4, total_steps=150_000,
                 hidden=16, critic_hidden=32, T=1, lif_decay=0.5, lif_threshold=1.0,
                 surrogate_width=0.5, actor_init_gain=1.0, eval_every=5_000,
                 eval_episodes=10, ma_window=50, truncation_as_terminal=False,
                 random_state=0, warm_start=False):
        self.gamma = gamma
        self.tau = tau
        self.policy_delay = policy_delay
        self.explore_sigma = explore_sigma
        self.target_sigma = target_sigma
        self.target_clip = target_clip
        self.batch = batch
        self.buffer_size = buffer_size
        self.warmup = warmup
        self.actor_lr = actor_lr
        self.critic_lr = critic_lr
        self.total_steps = total_steps
        self.hidden = hidden
        self.critic_hidden = critic_hidden
        self.T = T
        self.lif_decay = lif_decay
        self.lif_threshold = lif_threshold
        self.surrogate_width = surrogate_width
        self.actor_init_gain = actor_init_gain
        self.eval_every = eval_every
        self.eval_episodes = eval_episodes
        self.ma_window = ma_window
        self.truncation_as_terminal = truncation_as_terminal
        self.random_state = random_state
        self.warm_start = warm_start

    def config(self):
        params = self.get_params()
        params.pop("warm_start")
        params["seed"] = params.pop("random_state")
        return Td3Config(**params)

    def fit(self, env, eval_env=None, backend=None, freeze_w2=False, stop_at=None):
        agent = self.agent_ if self.warm_start and hasattr(self, "agent_") else None
        self.result_ = train(env, self.config(), agent, eval_env, backend, freeze_w2, stop_at=stop_at)
        self.agent_ = self.result_.agent
        self.actor_ = self.agent_.actor
        self.n_features_in_ = self.actor_.state_dim
        return self

    def predict(self, X, backend=None):
        check_is_fitted(self, "actor_")
        x, single = check_batch(X, self.actor_.state_dim, "states")
        action, _ = actor_forward(self.actor_, x, backend)
        return action[0] if single else action

    def score(self, env, episodes=10, seed=0):
        """Mean deterministic return over ``episodes`` episodes."""
        check_is_fitted(self, "actor_")
        return float(evaluate(self.actor_, env, episodes, seed).mean())
