"""Control environments.

* :class:`PendulumEnv` -- self-contained swing-up pendulum (g = 9.8).
* :func:`cheetah_reward` -- the HalfCheetah per-step reward as a pure function.
* :class:`RemoteEnv` / :class:`EnvServer` -- newline-delimited JSON protocol
  for attaching an external physics engine over TCP or a subprocess' stdio.

Every environment exposes ``observation_dim``, ``action_dim``,
``action_low``, ``action_high``, ``reset(seed=None) -> obs`` and
``step(action) -> (obs, reward, terminated, truncated)``.
"""

import json
import math
import os
import select
import shlex
import socket
import socketserver
import subprocess
import sys
import threading
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DimensionError, NumericError, ProtocolError
from .validation import check_rng

__all__ = ["PendulumParams", "PendulumState", "PendulumEnv", "pendulum_reset",
           "pendulum_step", "angle_normalize", "cheetah_reward", "RemoteEnv",
           "RemoteEnvEndpoint", "EnvServer", "dumps_message", "remote_env"]


# --------------------------------------------------------------------------
# Pendulum
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PendulumParams:
    m: float = 1.0
    l: float = 1.0
    g: float = 9.8
    dt: float = 0.05
    max_torque: float = 2.0
    max_speed: float = 8.0
    episode_len: int = 200

    def __post_init__(self):
        for name in ("m", "l", "g", "dt", "max_torque", "max_speed", "episode_len"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"pendulum parameter {name} must be positive")


@dataclass(frozen=True)
class PendulumState:
    theta: float
    theta_dot: float
    step_count: int = 0

    def observation(self):
        return np.array([math.cos(self.theta), math.sin(self.theta), self.theta_dot])


def angle_normalize(theta):
    """Wrap an angle into ``(-pi, pi]``."""
    if not math.isfinite(theta):
        raise NumericError(f"angle must be finite, got {theta!r}")
    wrapped = theta - 2.0 * math.pi * round(theta / (2.0 * math.pi))
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    elif wrapped > math.pi:
        wrapped -= 2.0 * math.pi
    return wrapped


def pendulum_reset(params, rng):
    """Uniform start: ``theta ~ U[-pi, pi]``, ``theta_dot ~ U[-1, 1]``."""
    theta = rng.uniform(-math.pi, math.pi)
    theta_dot = rng.uniform(-1.0, 1.0)
    state = PendulumState(float(theta), float(theta_dot), 0)
    return state, state.observation()


def pendulum_step(state, u, params):
    """Semi-implicit Euler step; returns ``(state, obs, reward, done)``.

    The reward is charged on the pre-step angle, velocity and the clipped
    torque: ``-(wrap(theta)**2 + 0.1*theta_dot**2 + 0.001*u**2)``.
    """
    u = float(np.asarray(u, dtype=np.float64).reshape(-1)[0])
    if not math.isfinite(u):
        raise NumericError(f"torque must be finite, got {u!r}")
    u = min(max(u, -params.max_torque), params.max_torque)
    th, thdot = state.theta, state.theta_dot
    reward = -(angle_normalize(th) ** 2 + 0.1 * thdot ** 2 + 0.001 * u ** 2)
    acc = 3.0 * params.g / (2.0 * params.l) * math.sin(th) + 3.0 / (params.m * params.l ** 2) * u
    new_thdot = min(max(thdot + acc * params.dt, -params.max_speed), params.max_speed)
    new_th = th + new_thdot * params.dt
    new_state = PendulumState(new_th, new_thdot, state.step_count + 1)
    done = new_state.step_count >= params.episode_len
    return new_state, new_state.observation(), reward, done


class PendulumEnv:
    """Stateful wrapper around :func:`pendulum_reset` / :func:`pendulum_step`.

    Episodes end by time limit only, reported as ``truncated``.
    """

    observation_dim = 3
    action_dim = 1

    def __init__(self, params=None, seed=None):
        self.params = params or PendulumParams()
        self.action_low = np.array([-self.params.max_torque])
        self.action_high = np.array([self.params.max_torque])
        self._rng = check_rng(seed)
        self.state = None

    def reset(self, seed=None):
        if seed is not None:
            self._rng = check_rng(seed)
        self.state, obs = pendulum_reset(self.params, self._rng)
        return obs

    def step(self, action):
        if self.state is None:
            raise ProtocolError("step() called before reset()")
        self.state, obs, reward, done = pendulum_step(self.state, action, self.params)
        return obs, reward, False, done

    def close(self):
        pass


def cheetah_reward(dx, dt, actions):
    """Forward progress minus control cost: ``dx/dt - 0.1 * sum(a**2)``."""
    if not dt > 0:
        raise NumericError(f"dt must be > 0, got {dt!r}")
    actions = np.asarray(actions, dtype=np.float64)
    if not (math.isfinite(dx) and np.all(np.isfinite(actions))):
        raise NumericError("displacement and actions must be finite")
    return 1.0 * dx / dt - 0.1 * float(np.sum(actions ** 2))


# --------------------------------------------------------------------------
# Remote environment protocol
# --------------------------------------------------------------------------

def _encode(obj):
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise NumericError(f"cannot serialize non-finite value {x!r}")
        return format(x, ".17g")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist() if obj.dtype.kind != "f" else [float(v) for v in obj.ravel()])
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_message(obj):
    """One protocol line; floats written with 17 significant digits."""
    return _encode(obj)


def _parse(line):
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed JSON line {line.strip()!r}: {exc}") from exc
    if not isinstance(msg, dict):
        raise ProtocolError(f"expected a JSON object, got {line.strip()!r}")
    return msg


@dataclass(frozen=True)
class RemoteEnvEndpoint:
    """``tcp:host:port`` or ``stdio:<command line>``."""

    transport: str
    address: str
    timeout: float = 30.0
    state_dim: int = None
    action_dim: int = None

    @classmethod
    def parse(cls, spec, timeout=30.0, state_dim=None, action_dim=None):
        kind, _, rest = spec.partition(":")
        if kind == "tcp":
            host, _, port = rest.rpartition(":")
            if not host or not port.isdigit():
                raise ConfigError(f"bad tcp endpoint {spec!r}; expected tcp:host:port")
        elif kind == "stdio":
            if not rest.strip():
                raise ConfigError("stdio endpoint needs a command")
        else:
            raise ConfigError(f"unknown transport in endpoint {spec!r}")
        return cls(kind, rest, timeout, state_dim, action_dim)


class _LineChannel:
    def __init__(self, endpoint):
        self.timeout = endpoint.timeout
        self._buf = b""
        if endpoint.transport == "tcp":
            host, _, port = endpoint.address.rpartition(":")
            try:
                self._sock = socket.create_connection((host, int(port)), timeout=self.timeout)
            except OSError as exc:
                raise ProtocolError(f"cannot reach {endpoint.address}: {exc}") from exc
            self._proc = None
            self._rfd = self._sock.fileno()
        else:
            self._sock = None
            self._proc = subprocess.Popen(shlex.split(endpoint.address), stdin=subprocess.PIPE,
                                          stdout=subprocess.PIPE)
            self._rfd = self._proc.stdout.fileno()

    def send(self, line):
        data = (line + "\n").encode()
        try:
            if self._sock is not None:
                self._sock.sendall(data)
            else:
                self._proc.stdin.write(data)
                self._proc.stdin.flush()
        except OSError as exc:
            raise ProtocolError(f"send failed: {exc}") from exc

    def recv(self):
        while b"\n" not in self._buf:
            ready, _, _ = select.select([self._rfd], [], [], self.timeout)
            if not ready:
                raise ProtocolError(f"no reply within {self.timeout} s")
            chunk = self._sock.recv(65536) if self._sock is not None else os.read(self._rfd, 65536)
            if not chunk:
                raise ProtocolError("remote environment closed the connection")
            self._buf += chunk
        line, _, self._buf = self._buf.partition(b"\n")
        return line.decode()

    def close(self):
        if self._sock is not None:
            self._sock.close()
        if self._proc is not None:
            self._proc.stdin.close()
            self._proc.wait(timeout=self.timeout)


class RemoteEnv:
    """Client side of the remote-environment protocol."""

    def __init__(self, endpoint):
        if isinstance(endpoint, str):
            endpoint = RemoteEnvEndpoint.parse(endpoint)
        self.endpoint = endpoint
        self._chan = _LineChannel(endpoint)
        spec = self._request({"cmd": "spec"})
        try:
            self.observation_dim = int(spec["state_dim"])
            self.action_dim = int(spec["action_dim"])
            self.action_low = np.asarray(spec["action_low"], dtype=np.float64)
            self.action_high = np.asarray(spec["action_high"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"bad spec reply {spec!r}") from exc
        if endpoint.state_dim is not None and endpoint.state_dim != self.observation_dim:
            raise ProtocolError(f"declared state_dim {endpoint.state_dim} != remote {self.observation_dim}")
        if endpoint.action_dim is not None and endpoint.action_dim != self.action_dim:
            raise ProtocolError(f"declared action_dim {endpoint.action_dim} != remote {self.action_dim}")
        if self.action_low.shape != (self.action_dim,) or self.action_high.shape != (self.action_dim,):
            raise ProtocolError("action bounds do not match action_dim")

    def _request(self, msg):
        self._chan.send(dumps_message(msg))
        reply = _parse(self._chan.recv())
        if "error" in reply:
            raise ProtocolError(f"remote error: {reply['error']}")
        return reply

    def _state(self, reply):
        try:
            state = np.asarray(reply["state"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"reply lacks a numeric state: {reply!r}") from exc
        if state.shape != (self.observation_dim,):
            raise ProtocolError(f"state has {state.size} entries, expected {self.observation_dim}")
        return state

    def reset(self, seed=None):
        msg = {"cmd": "reset"}
        if seed is not None:
            msg["seed"] = int(seed)
        return self._state(self._request(msg))

    def step(self, action):
        action = np.asarray(action, dtype=np.float64).reshape(-1)
        if action.shape != (self.action_dim,):
            raise DimensionError(f"action has {action.size} entries, expected {self.action_dim}")
        reply = self._request({"cmd": "step", "action": action})
        state = self._state(reply)
        try:
            reward = float(reply["reward"])
            done = bool(reply.get("done", False))
            truncated = bool(reply.get("truncated", False))
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"bad step reply {reply!r}") from exc
        if not math.isfinite(reward):
            raise ProtocolError(f"non-finite reward {reward!r}")
        return state, reward, done, truncated

    def close(self):
        self._chan.close()


def remote_env(endpoint):
    return RemoteEnv(endpoint)


class EnvServer:
    """Serve any local environment over the protocol.

    Useful for loopback tests and for wrapping an external simulator: give
    it an object with the environment interface and call
    :meth:`serve_tcp` or :meth:`serve_stdio`.
    """

    def __init__(self, env):
        self.env = env

    def handle(self, line):
        """Process one request line and return the reply line."""
        try:
            msg = _parse(line)
        except ProtocolError as exc:
            return dumps_message({"error": str(exc)})
        cmd = msg.get("cmd")
        try:
            if cmd == "spec":
                return dumps_message({"state_dim": self.env.observation_dim,
                                      "action_dim": self.env.action_dim,
                                      "action_low": np.asarray(self.env.action_low, float),
                                      "action_high": np.asarray(self.env.action_high, float)})
            if cmd == "reset":
                return dumps_message({"state": np.asarray(self.env.reset(msg.get("seed")), float)})
            if cmd == "step":
                obs, reward, done, truncated = self.env.step(np.asarray(msg["action"], float))
                return dumps_message({"state": np.asarray(obs, float), "reward": float(reward),
                                      "done": bool(done), "truncated": bool(truncated)})
        except Exception as exc:  # reported to the client, never fatal to the server
            return dumps_message({"error": f"{type(exc).__name__}: {exc}"})
        return dumps_message({"error": f"unknown cmd {cmd!r}"})

    def serve_stdio(self, stdin=None, stdout=None):
        stdin = stdin or sys.stdin
        stdout = stdout or sys.stdout
        for line in stdin:
            if line.strip():
                stdout.write(self.handle(line) + "\n")
                stdout.flush()

    def serve_tcp(self, host="127.0.0.1", port=0):
        """Start a background TCP server; returns ``(server, (host, port))``."""
        handler_self = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                for raw in self.rfile:
                    line = raw.decode()
                    if line.strip():
                        self.wfile.write((handler_self.handle(line) + "\n").encode())
                        self.wfile.flush()

        server = socketserver.ThreadingTCPServer((host, port), Handler)
        server.daemon_threads = True
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        return server, server.server_address
