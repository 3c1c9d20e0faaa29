import json
import math
import shlex
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photonic_srl.exceptions import ConfigError, DimensionError, NumericError, ProtocolError
from photonic_srl.envs import (EnvServer, PendulumEnv, PendulumParams, PendulumState,
                               RemoteEnv, RemoteEnvEndpoint, angle_normalize, cheetah_reward,
                               dumps_message, pendulum_reset, pendulum_step)
from photonic_srl.td3 import Td3Config, train

P = PendulumParams()


# -- pendulum -----------------------------------------------------------------

def test_default_parameters():
    assert (P.m, P.l, P.g, P.dt, P.max_torque, P.max_speed, P.episode_len) == (1.0, 1.0, 9.8, 0.05, 2.0, 8.0, 200)
    with pytest.raises(ConfigError):
        PendulumParams(g=0.0)


def test_reset_ranges_and_unit_circle():
    rng = np.random.default_rng(0)
    thetas, speeds = [], []
    for _ in range(10_000):
        state, obs = pendulum_reset(P, rng)
        assert abs(obs[0] ** 2 + obs[1] ** 2 - 1.0) < 1e-12
        thetas.append(state.theta)
        speeds.append(state.theta_dot)
    assert -math.pi <= min(thetas) and max(thetas) <= math.pi
    assert -1.0 <= min(speeds) and max(speeds) <= 1.0


def test_reset_is_seeded():
    np.testing.assert_array_equal(PendulumEnv(seed=3).reset(), PendulumEnv(seed=3).reset())


def test_upright_fixed_point():
    state, _, reward, done = pendulum_step(PendulumState(0.0, 0.0), 0.0, P)
    assert reward == 0.0 and not done
    assert (state.theta, state.theta_dot) == (0.0, 0.0)


def test_hanging_down_penalty():
    _, _, reward, _ = pendulum_step(PendulumState(math.pi, 0.0), 0.0, P)
    assert reward == pytest.approx(-math.pi ** 2, abs=1e-12)


def test_one_euler_step_from_horizontal():
    state, _, _, _ = pendulum_step(PendulumState(math.pi / 2, 0.0), 0.0, P)
    assert state.theta_dot == pytest.approx(0.735, abs=1e-12)
    assert state.theta == pytest.approx(math.pi / 2 + 0.03675, abs=1e-12)


def test_torque_is_clipped_before_use():
    a = pendulum_step(PendulumState(0.3, 0.1), 50.0, P)
    b = pendulum_step(PendulumState(0.3, 0.1), 2.0, P)
    assert a[0] == b[0] and a[2] == b[2]


def test_non_finite_torque_raises():
    with pytest.raises(NumericError):
        pendulum_step(PendulumState(0.0, 0.0), float("nan"), P)


def test_episode_is_exactly_200_steps():
    env = PendulumEnv(seed=0)
    env.reset()
    steps, truncated = 0, False
    while not truncated:
        _, _, terminated, truncated = env.step([0.0])
        assert not terminated
        steps += 1
    assert steps == 200


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_property_reward_and_speed_bounds(seed):
    rng = np.random.default_rng(seed)
    env = PendulumEnv(seed=seed)
    obs = env.reset()
    for _ in range(60):
        obs, reward, _, _ = env.step(rng.uniform(-4, 4, 1))
        assert reward <= 0.0
        assert abs(obs[2]) <= 8.0
        assert abs(obs[0] ** 2 + obs[1] ** 2 - 1.0) < 1e-12


@pytest.mark.parametrize("theta,expected", [
    (0.0, 0.0), (2 * math.pi, 0.0), (3 * math.pi / 2, -math.pi / 2), (-math.pi, math.pi), (math.pi, math.pi),
])
def test_angle_normalize(theta, expected):
    assert angle_normalize(theta) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e4, 1e4))
def test_property_angle_normalize_range(theta):
    w = angle_normalize(theta)
    assert -math.pi < w <= math.pi
    assert math.cos(w) == pytest.approx(math.cos(theta), abs=1e-9)


# -- cheetah reward -----------------------------------------------------------

def test_cheetah_reward_examples():
    assert cheetah_reward(0.0, 0.05, np.zeros(6)) == 0.0
    assert cheetah_reward(0.5, 0.05, np.zeros(6)) == pytest.approx(10.0)
    assert cheetah_reward(0.0, 0.05, np.ones(6)) == pytest.approx(-0.6)
    with pytest.raises(NumericError):
        cheetah_reward(0.1, 0.0, np.zeros(6))


@settings(max_examples=50, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.lists(st.floats(-1, 1), min_size=6, max_size=6))
def test_property_cheetah_linear_and_concave(dx1, dx2, acts):
    a = np.array(acts)
    zero = np.zeros(6)
    lhs = cheetah_reward(dx1 + dx2, 0.05, zero)
    assert lhs == pytest.approx(cheetah_reward(dx1, 0.05, zero) + cheetah_reward(dx2, 0.05, zero), abs=1e-9)
    mid = cheetah_reward(0.0, 0.05, a / 2)
    assert mid >= 0.5 * (cheetah_reward(0.0, 0.05, a) + cheetah_reward(0.0, 0.05, zero)) - 1e-12


# -- remote protocol ----------------------------------------------------------

def test_dumps_uses_17_significant_digits():
    line = dumps_message({"action": [0.1, 1 / 3]})
    assert line == '{"action":[0.10000000000000001,0.33333333333333331]}'


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=8))
def test_property_action_round_trip_bit_exact(values):
    back = json.loads(dumps_message({"cmd": "step", "action": np.array(values)}))["action"]
    assert np.array_equal(np.array(back), np.array(values))


def test_dumps_rejects_non_finite():
    with pytest.raises(NumericError):
        dumps_message({"reward": float("inf")})


def test_endpoint_parse():
    ep = RemoteEnvEndpoint.parse("tcp:127.0.0.1:5000")
    assert (ep.transport, ep.address) == ("tcp", "127.0.0.1:5000")
    for bad in ("udp:x:1", "tcp:host", "stdio:  "):
        with pytest.raises(ConfigError):
            RemoteEnvEndpoint.parse(bad)


def test_server_handles_bad_requests():
    server = EnvServer(PendulumEnv(seed=0))
    assert "error" in json.loads(server.handle("{not json"))
    assert "unknown cmd" in json.loads(server.handle('{"cmd":"fly"}'))["error"]
    reply = json.loads(server.handle('{"cmd":"spec","extra":1}'))
    assert reply["state_dim"] == 3 and reply["action_dim"] == 1


@pytest.fixture
def tcp_server():
    server, (host, port) = EnvServer(PendulumEnv(seed=0)).serve_tcp()
    yield f"tcp:{host}:{port}"
    server.shutdown()
    server.server_close()


def test_remote_tcp_matches_local(tcp_server):
    remote = RemoteEnv(tcp_server)
    local = PendulumEnv()
    try:
        np.testing.assert_array_equal(remote.reset(seed=5), local.reset(seed=5))
        for u in (0.3, -1.7, 2.0):
            r = remote.step([u])
            l = local.step([u])
            np.testing.assert_array_equal(r[0], l[0])
            assert r[1:] == l[1:]
        with pytest.raises(DimensionError):
            remote.step([0.0, 0.0])
    finally:
        remote.close()


def test_remote_declared_dims_must_match(tcp_server):
    with pytest.raises(ProtocolError):
        RemoteEnv(RemoteEnvEndpoint.parse(tcp_server, state_dim=17))


def test_remote_stdio_transport():
    code = "from photonic_srl.envs import EnvServer, PendulumEnv; EnvServer(PendulumEnv()).serve_stdio()"
    remote = RemoteEnv(f"stdio:{shlex.quote(sys.executable)} -c {shlex.quote(code)}")
    try:
        obs = remote.reset(seed=1)
        np.testing.assert_array_equal(obs, PendulumEnv().reset(seed=1))
        assert remote.step([0.5])[0].shape == (3,)
    finally:
        remote.close()


def test_malformed_reply_names_the_line():
    code = "import sys\nfor line in sys.stdin:\n    print('garbage{', flush=True)"
    with pytest.raises(ProtocolError, match="garbage"):
        RemoteEnv(f"stdio:{shlex.quote(sys.executable)} -c {shlex.quote(code)}")


def test_unreachable_endpoint():
    with pytest.raises(ProtocolError):
        RemoteEnv(RemoteEnvEndpoint.parse("tcp:127.0.0.1:1", timeout=1.0))


def test_training_over_loopback_is_indistinguishable(tcp_server):
    cfg = Td3Config(seed=0, total_steps=300, warmup=100, batch=16, eval_every=0)
    local = train(PendulumEnv(), cfg)
    remote_env = RemoteEnv(tcp_server)
    try:
        remote = train(remote_env, cfg)
    finally:
        remote_env.close()
    np.testing.assert_array_equal(local.returns(), remote.returns())
    np.testing.assert_array_equal(local.actor.W1, remote.actor.W1)
