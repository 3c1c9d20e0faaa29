import copy
import json

import numpy as np
import pytest

from photonic_srl.envs import PendulumEnv
from photonic_srl.exceptions import ConfigError, DimensionError, UsageError
from photonic_srl.hybrid import (ConvergenceReport, MeshBackend, WeightSnapshot, convergence_report,
                                 cotrain, extract_l2, hybrid_forward, map_to_hardware,
                                 offline_compare, output_gain, steps_to_threshold)
from photonic_srl.mesh import NoiseModel, PhotonicMesh, VoltageTable
from photonic_srl.snn import ActorNet, DenseBackend, LifConfig, actor_forward
from photonic_srl.spgd import SpgdConfig, cosine_similarity
from photonic_srl.td3 import Td3Agent, Td3Config, train

MESH4 = PhotonicMesh.build(4)
SMALL_TD3 = dict(total_steps=400, warmup=100, batch=16, eval_every=200, eval_episodes=1, hidden=4)


def make_actor(seed=0, hidden=4, T=2):
    lif = LifConfig()
    return ActorNet.initialize(3, 1, hidden, T, 2.0, lif, lif, 3.0, np.random.default_rng(seed))


def realizable_actor(seed, scale=2.5, mesh=MESH4):
    """Actor whose W2 is exactly ``scale`` times a mesh realization."""
    rng = np.random.default_rng(seed)
    actor = make_actor(seed, hidden=mesh.n)
    voltages = VoltageTable.random(mesh.topology, mesh.phase_map, rng)
    actor.W2 = scale * mesh.weight(voltages)
    return actor, voltages


def snapshot(actor, n=100, seed=0):
    return extract_l2(actor, PendulumEnv(seed=seed), n, seed=seed)


# -- extraction ---------------------------------------------------------------

def test_extract_shapes_and_binary_inputs():
    actor = make_actor(T=3)
    snap = snapshot(actor, 150)
    assert snap.inputs.shape == (150, 3, 4) and snap.outputs.shape == (150, 3, 4)
    assert set(np.unique(snap.inputs)) <= {0.0, 1.0}
    np.testing.assert_array_equal(snap.l2_target, actor.W2)
    assert snap.scale == np.max(np.abs(actor.W2))
    assert np.max(np.abs(snap.l2_target / snap.scale)) == 1.0


def test_extract_outputs_are_pure_matrix_products():
    actor = make_actor(T=2)
    actor.b2 = np.full(4, 0.7)
    snap = snapshot(actor, 50)
    np.testing.assert_allclose(snap.outputs, snap.inputs @ actor.W2.T, atol=1e-14)


def test_extract_actions_match_software_forward():
    actor = make_actor()
    snap = snapshot(actor, 60)
    np.testing.assert_array_equal(snap.actions, actor_forward(actor, snap.states)[0])


def test_extract_transmitted_volume():
    # 16 channels x 4 time steps x 1000 samples
    snap = extract_l2(make_actor(hidden=16, T=4), PendulumEnv(seed=0), 1000)
    assert snap.inputs.size == 64000


def test_extract_errors():
    with pytest.raises(UsageError):
        extract_l2(None, PendulumEnv(), 10)
    with pytest.raises(ConfigError):
        extract_l2(make_actor(), PendulumEnv(), 0)


def test_zero_w2_scale_is_one():
    actor = make_actor()
    actor.W2 = np.zeros((4, 4))
    assert snapshot(actor, 5).scale == 1.0


def test_snapshot_json_round_trip(tmp_path):
    snap = snapshot(make_actor(), 30)
    path = tmp_path / "snap.json"
    snap.save(path)
    back = WeightSnapshot.load(path)
    for name in ("states", "inputs", "outputs", "actions"):
        np.testing.assert_array_equal(getattr(back, name), getattr(snap, name))
    np.testing.assert_array_equal(back.l2_target, snap.l2_target)
    assert back.scale == snap.scale


def test_snapshot_rejects_inconsistent_shapes(tmp_path):
    data = snapshot(make_actor(), 10).to_dict()
    data["inputs"] = data["inputs"][:5]
    with pytest.raises((ConfigError, DimensionError)):
        WeightSnapshot.from_dict(data)


# -- mapping ------------------------------------------------------------------

def test_map_rejects_size_mismatch():
    snap = snapshot(make_actor(hidden=5), 10)
    with pytest.raises(DimensionError):
        map_to_hardware(snap, MESH4)


def test_map_zero_target_is_degenerate():
    actor = make_actor()
    actor.W2 = np.zeros((4, 4))
    record, twin = map_to_hardware(snapshot(actor, 5), MESH4, SpgdConfig(max_iters=50))
    assert record.degenerate
    assert np.max(np.abs(twin)) < 1e-6


def test_map_scale_round_trip_preserves_similarity():
    actor, _ = realizable_actor(1)
    snap = snapshot(actor, 20)
    record, twin = map_to_hardware(snap, MESH4, SpgdConfig(max_iters=300))
    assert cosine_similarity(twin, snap.l2_target) == pytest.approx(
        cosine_similarity(record.realized_matrix, snap.l2_target / snap.scale), abs=1e-12)
    _, plain = map_to_hardware(snap, MESH4, SpgdConfig(max_iters=300), fit_gain=False)
    np.testing.assert_allclose(plain, snap.scale * record.realized_matrix, atol=1e-15)


def test_output_gain_is_least_squares():
    rng = np.random.default_rng(0)
    w, t = rng.normal(size=(2, 4, 4))
    g = output_gain(w, t)
    for dg in (-1e-3, 1e-3):
        assert np.linalg.norm(g * w - t) <= np.linalg.norm((g + dg) * w - t)
    assert output_gain(np.zeros((2, 2)), t[:2, :2]) == 1.0
    assert output_gain(w, 3.0 * w) == pytest.approx(3.0)


def test_backend_for_snapshot_recovers_realizable_target():
    actor, voltages = realizable_actor(2)
    snap = snapshot(actor, 20)
    backend = MeshBackend.for_snapshot(MESH4, voltages, snap)
    np.testing.assert_allclose(backend.matrix, actor.W2, atol=1e-12)


# -- offline comparison -------------------------------------------------------

def test_exact_backend_is_bit_exact():
    actor = make_actor(T=3)
    snap = snapshot(actor, 200)
    report = offline_compare(snap, DenseBackend(actor.W2))
    np.testing.assert_array_equal(report.hardware_actions, report.software_actions)
    assert report.mean_deviation_pct == 0.0 and report.max_deviation_pct == 0.0


def test_zero_spike_input_gives_software_action():
    actor, voltages = realizable_actor(3)
    actor.W1 = np.zeros_like(actor.W1)
    actor.b1 = np.zeros_like(actor.b1)
    backend = MeshBackend(MESH4, VoltageTable.full(MESH4.topology, 3.0))
    state = np.array([0.2, -0.4, 1.0])
    np.testing.assert_array_equal(hybrid_forward(actor, backend, state)[0], actor_forward(actor, state)[0])


def test_readout_noise_shows_in_error_distribution():
    mesh = PhotonicMesh.build(4, noise=NoiseModel(readout_sigma=0.01))
    actor, voltages = realizable_actor(4, mesh=mesh)
    snap = snapshot(actor, 1000)
    backend = MeshBackend.for_snapshot(mesh, voltages, snap, rng=np.random.default_rng(0))
    summary = offline_compare(snap, backend).summary()
    assert summary["error_std_normalized"] == pytest.approx(0.01, rel=0.05)
    assert abs(summary["error_mean"]) < 3 * 0.01 * snap.scale / np.sqrt(snap.outputs.size)


def test_deviation_is_bounded_and_uses_full_range():
    actor = make_actor()
    snap = snapshot(actor, 50)
    report = offline_compare(snap, DenseBackend(-5.0 * actor.W2))
    assert np.all((report.deviation_pct >= 0) & (report.deviation_pct <= 100))
    np.testing.assert_allclose(report.deviation_pct,
                               100 * np.abs(report.hardware_actions - report.software_actions) / 4.0)


def test_deviation_falls_as_similarity_approaches_one():
    # Single targets can step up briefly (a spike flips in the second layer),
    # so monotonicity is checked on the family mean.
    eps = [0.8, 0.4, 0.2, 0.1, 0.05, 0.02, 0.0]
    sims = np.zeros(len(eps))
    devs = np.zeros(len(eps))
    for seed in range(8):
        actor, vstar = realizable_actor(20 + seed)
        snap = snapshot(actor, 200)
        direction = np.random.default_rng(200 + seed).choice([-1.0, 1.0], vstar.as_vector().size)
        for k, e in enumerate(eps):
            v = VoltageTable.from_vector(np.clip(vstar.as_vector() + e * direction, 0, 10), MESH4.topology)
            backend = MeshBackend.for_snapshot(MESH4, v, snap)
            sims[k] += cosine_similarity(backend.matrix, actor.W2) / 8
            devs[k] += offline_compare(snap, backend).mean_deviation_pct / 8
    assert np.all(np.diff(sims) > 0)
    assert np.all(np.diff(devs) <= 1e-12)
    assert devs[-1] == 0.0 and devs[0] > 1.0


def test_compare_rejects_empty_test_set():
    snap = snapshot(make_actor(), 5)
    empty = WeightSnapshot(snap.actor, snap.scale, snap.states[:0], snap.inputs[:0],
                           snap.outputs[:0], snap.actions[:0])
    with pytest.raises(UsageError):
        offline_compare(empty, DenseBackend(snap.l2_target))


def test_report_exports(tmp_path):
    actor = make_actor(T=2)
    snap = snapshot(actor, 10)
    report = offline_compare(snap, DenseBackend(0.9 * actor.W2))
    report.to_json(tmp_path / "d.json")
    report.to_csv(tmp_path / "s.csv")
    report.actions_to_csv(tmp_path / "a.csv")
    data = json.loads((tmp_path / "d.json").read_text())
    assert data["n_samples"] == 10
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "sample,channel,target,measured,error"
    assert len(lines) == 1 + 10 * 2 * 4
    assert lines[-1].startswith("19,3,")
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == "sample,dim,software,hardware,deviation_pct"


# -- co-training --------------------------------------------------------------

def test_cotrain_keeps_w2_bit_identical():
    actor, voltages = realizable_actor(5)
    snap = snapshot(actor, 20)
    backend = MeshBackend.for_snapshot(MESH4, VoltageTable.full(MESH4.topology, 4.0), snap)
    result = cotrain(snap, backend, PendulumEnv(seed=0), Td3Config(seed=0, **SMALL_TD3))
    np.testing.assert_array_equal(result.actor.W2, backend.matrix)
    np.testing.assert_array_equal(result.agent.actor_target.W2, backend.matrix)
    assert not np.array_equal(result.actor.b3, actor.b3)


def test_cotrain_mesh_route_keeps_w2():
    mesh = PhotonicMesh.build(4, noise=NoiseModel(readout_sigma=0.01))
    actor, voltages = realizable_actor(6, mesh=mesh)
    snap = snapshot(actor, 20)
    backend = MeshBackend.for_snapshot(mesh, voltages, snap, rng=np.random.default_rng(0))
    result = cotrain(snap, backend, PendulumEnv(seed=0), Td3Config(seed=0, **SMALL_TD3), route="mesh")
    np.testing.assert_array_equal(result.actor.W2, backend.matrix)


def test_cotrain_with_exact_w2_equals_continued_software_training():
    cfg = Td3Config(seed=1, **SMALL_TD3)
    pre = train(PendulumEnv(seed=0), cfg)
    snap = snapshot(pre.actor, 20)
    co = cotrain(snap, DenseBackend(pre.actor.W2), PendulumEnv(seed=0), cfg, agent=pre.agent)
    agent = copy.deepcopy(pre.agent)
    agent.actor_target.W2 = pre.actor.W2.copy()
    agent.reset_actor_optimizer(cfg.actor_lr)
    sw = train(PendulumEnv(seed=0), cfg, agent, freeze_w2=True)
    assert co.episodes == sw.episodes
    for name in ("W1", "b1", "W2", "b2", "W3", "b3"):
        np.testing.assert_array_equal(getattr(co.actor, name), getattr(sw.actor, name))


def test_cotrain_does_not_mutate_inputs():
    cfg = Td3Config(seed=2, **SMALL_TD3)
    pre = train(PendulumEnv(seed=0), cfg)
    before = pre.agent.actor.W1.copy()
    snap = snapshot(pre.actor, 10)
    cotrain(snap, DenseBackend(0.5 * pre.actor.W2), PendulumEnv(seed=0), cfg, agent=pre.agent)
    np.testing.assert_array_equal(pre.agent.actor.W1, before)
    np.testing.assert_array_equal(snap.actor.W2, pre.actor.W2)


def test_cotrain_errors():
    snap = snapshot(make_actor(), 5)
    with pytest.raises(ConfigError):
        cotrain(snap, DenseBackend(snap.l2_target), PendulumEnv(), route="fiber")
    with pytest.raises(DimensionError):
        cotrain(snap, DenseBackend(np.eye(3)), PendulumEnv())


# -- convergence report -------------------------------------------------------

def ramp(cross_at, start=-1000.0, end=-150.0, every=10_000, total=150_000):
    steps = np.arange(every, total + 1, every)
    return [(int(s), -100.0 if s >= cross_at else -300.0) for s in steps]


def test_steps_to_threshold():
    assert steps_to_threshold(ramp(70_000), -200) == 70_000
    assert steps_to_threshold([(1, -300.0)], -200) is None
    assert steps_to_threshold([], -200) is None
    assert steps_to_threshold([(1, -300.0), (2, -100.0), (3, -100.0)], -150, ma_window=2) == 3


def test_convergence_report_arithmetic():
    report = convergence_report([ramp(100_000)], [ramp(70_000)], -200)
    assert report.rows == [(0, 100_000, 70_000, 30.0)]
    same = convergence_report([ramp(50_000)] * 5, [ramp(50_000)] * 5, -200)
    assert same.mean_reduction_pct == 0.0 and same.summary()["n_seeds"] == 5


def test_convergence_report_flags_non_convergent(tmp_path):
    report = convergence_report([ramp(100_000), ramp(10**9)], [ramp(70_000), ramp(40_000)], -200,
                                seeds=[3, 4])
    summary = report.summary()
    assert summary["non_convergent_seeds"] == [4]
    assert summary["n_convergent"] == 1
    assert report.mean_reduction_pct == 30.0
    report.to_csv(tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines()[2] == "4,,40000,"
    with pytest.raises(ConfigError):
        convergence_report([ramp(1)], [], -200)


def test_empty_report_summary():
    assert ConvergenceReport(-200.0).summary()["mean_reduction_pct"] is None
