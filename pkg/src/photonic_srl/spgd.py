"""Stochastic parallel gradient descent (SPGD) calibration of the mesh.

All shifter voltages are perturbed at once by a random ``+/-sigma_p``
pattern; the change in the matching objective between the two perturbed
configurations steers the update::

    V' = clip(V + gain * (J(V + d) - J(V - d)) * d / (2 * sigma_p))

:class:`MeshCalibrator` wraps the loop as a scikit-learn estimator:
``fit`` takes the target weight matrix, ``transform`` runs inputs through
the calibrated mesh.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigError, DimensionError, UndefinedSimilarityError
from .mesh import NoiseModel, PhaseVoltageMap, PhotonicMesh, VoltageTable
from .validation import check_batch, check_matrix, check_rng

__all__ = ["SpgdConfig", "CalibrationRecord", "cosine_similarity",
           "spgd_step", "calibrate", "MeshCalibrator"]

OBJECTIVES = ("cosine", "neg_mse")


def cosine_similarity(a, b):
    """Cosine of the angle between two matrices viewed as flat vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    na = np.linalg.norm(a.ravel())
    nb = np.linalg.norm(b.ravel())
    if na == 0 or nb == 0:
        raise UndefinedSimilarityError("cosine similarity is undefined for an all-zero matrix")
    return float(np.clip(a.ravel() @ b.ravel() / (na * nb), -1.0, 1.0))


@dataclass(frozen=True)
class SpgdConfig:
    gain: float = 12.0
    perturb_amp: float = 0.01
    max_iters: int = 2500
    target_similarity: float = 1.0
    seed: int = 0
    objective: str = "cosine"
    gain_decay: bool = False
    init_jitter: float = 0.5

    def __post_init__(self):
        if not self.gain > 0:
            raise ConfigError(f"gain must be > 0, got {self.gain}")
        if not self.perturb_amp > 0:
            raise ConfigError(f"perturb_amp must be > 0, got {self.perturb_amp}")
        if int(self.max_iters) < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if not 0 < self.target_similarity <= 1:
            raise ConfigError(f"target_similarity must lie in (0, 1], got {self.target_similarity}")
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.init_jitter < 0:
            raise ConfigError("init_jitter must be >= 0")

    def gain_at(self, iteration):
        if self.gain_decay:
            return self.gain / math.sqrt(1.0 + iteration)
        return self.gain


@dataclass
class CalibrationRecord:
    """Outcome of a calibration run.

    ``history`` rows are ``(iteration, objective, similarity)`` measured at
    the voltages reached after each step (iteration 0 is the starting
    point).  ``realized_matrix`` is the measured matrix at ``best_voltages``.
    """

    history: list
    best_voltages: VoltageTable
    best_similarity: float
    realized_matrix: np.ndarray
    converged: bool
    degenerate: bool = False
    best_iteration: int = 0

    @property
    def best_so_far(self):
        sims = np.array([row[2] for row in self.history], dtype=np.float64)
        return np.maximum.accumulate(sims) if len(sims) else sims

    def trace_to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "objective", "similarity"])
            for it, obj, sim in self.history:
                writer.writerow([it, repr(float(obj)), repr(float(sim))])

    def summary(self):
        return {"best_similarity": self.best_similarity,
                "best_iteration": self.best_iteration,
                "iterations": len(self.history) - 1,
                "converged": self.converged,
                "degenerate": self.degenerate}


def _objective(measured, target, kind):
    if kind == "cosine":
        nm = np.linalg.norm(measured)
        if nm == 0:
            return 0.0
        return float(measured.ravel() @ target.ravel() / (nm * np.linalg.norm(target)))
    return -float(np.mean((measured - target) ** 2))


def _similarity(measured, target):
    try:
        return cosine_similarity(measured, target)
    except UndefinedSimilarityError:
        return 0.0


def _measure(mesh, vectors, rng):
    """Measured matrices for a stack of voltage vectors."""
    if mesh.noise.noiseless:
        return mesh.weights_from_vectors(vectors)
    return np.stack([mesh.probe(VoltageTable.from_vector(v, mesh.topology), rng) for v in vectors])


def spgd_step(mesh, voltages, target, config, rng, iteration=0):
    """One bilateral SPGD update.

    Returns ``(new_voltages, objective_at_new_voltages)``.  Perturbed and
    updated voltages are clamped into the phase map's range.
    """
    if not isinstance(config, SpgdConfig):
        raise ConfigError("config must be an SpgdConfig")
    target = check_matrix(target, "target", shape=(mesh.n, mesh.n))
    voltages.validate(mesh.topology, mesh.phase_map)
    v, obj, _ = _step(mesh, voltages.as_vector(), target, config, rng, iteration)
    return VoltageTable.from_vector(v, mesh.topology), obj


def _step(mesh, v, target, config, rng, iteration):
    pm = mesh.phase_map
    sigma = config.perturb_amp
    delta = sigma * (2.0 * rng.integers(0, 2, size=v.shape) - 1.0)
    plus, minus = _measure(mesh, np.stack([pm.clip(v + delta), pm.clip(v - delta)]), rng)
    d_obj = _objective(plus, target, config.objective) - _objective(minus, target, config.objective)
    if d_obj != 0.0:
        v = pm.clip(v + config.gain_at(iteration) * d_obj * delta / (2.0 * sigma))
    measured = _measure(mesh, v[None, :], rng)[0]
    return v, _objective(measured, target, config.objective), measured


def initial_voltages(mesh, config, rng):
    """Mid-range voltages plus seeded uniform jitter."""
    pm = mesh.phase_map
    jitter = rng.uniform(-config.init_jitter, config.init_jitter, mesh.topology.n_shifters)
    return pm.clip(pm.v_mid + jitter)


def calibrate(mesh, target, config=None, init=None, callback=None):
    """Drive the mesh voltages until the measured matrix matches ``target``.

    Stops at the first iteration whose similarity reaches
    ``config.target_similarity`` or after ``config.max_iters`` steps.  An
    exhausted budget is not an error; the record carries
    ``converged=False``.  An all-zero target short-circuits to fully
    attenuating diagonal stages with ``degenerate=True``.
    """
    config = config or SpgdConfig()
    if not isinstance(mesh, PhotonicMesh):
        raise ConfigError("mesh must be a PhotonicMesh")
    target = check_matrix(target, "target", shape=(mesh.n, mesh.n))
    rng = check_rng(config.seed)
    topo, pm = mesh.topology, mesh.phase_map

    if not np.any(target):
        dark = _dark_voltages(mesh)
        return CalibrationRecord([], dark, float("nan"), mesh.probe(dark, rng, noiseless=True),
                                 converged=False, degenerate=True)

    if init is None:
        v = initial_voltages(mesh, config, rng)
    else:
        v = pm.clip(init.as_vector() if isinstance(init, VoltageTable) else np.asarray(init, float))
    measured = _measure(mesh, v[None, :], rng)[0]
    sim = _similarity(measured, target)
    history = [(0, _objective(measured, target, config.objective), sim)]
    best = (sim, v, measured, 0)
    for it in range(1, int(config.max_iters) + 1):
        v, obj, measured = _step(mesh, v, target, config, rng, it - 1)
        sim = _similarity(measured, target)
        history.append((it, obj, sim))
        if sim > best[0]:
            best = (sim, v, measured, it)
        if callback is not None:
            callback(it, obj, sim)
        if best[0] >= config.target_similarity:
            break
    sim, v, measured, it = best
    return CalibrationRecord(history, VoltageTable.from_vector(v, topo), sim, measured,
                             converged=sim >= config.target_similarity, best_iteration=it)


def _dark_voltages(mesh):
    """Voltages putting every diagonal stage at zero gain (phase 0 mod 2pi)."""
    pm = mesh.phase_map
    grid = np.linspace(pm.v_min, pm.v_max, 4097)
    gains = np.sin(pm.phase(grid) / 2) ** 2
    v_dark = grid[int(np.argmin(gains))]
    return VoltageTable(np.full(mesh.topology.n_mzi, pm.v_mid), np.full(mesh.topology.n_diag, v_dark))


class MeshCalibrator(TransformerMixin, BaseEstimator):
    """Program a simulated MZI mesh to realize a target weight matrix.

    Parameters mirror :class:`SpgdConfig` plus the mesh physics.  ``fit``
    normalizes the target by its largest absolute entry, runs SPGD
    calibration against the normalized matrix and stores the realized
    weights rescaled back to the target's units in ``weights_``.

    Attributes
    ----------
    voltages_ : VoltageTable
    record_ : CalibrationRecord
    scale_ : float
        Normalization factor ``max|target|`` (1 for an all-zero target).
    weights_ : ndarray of shape (n, n)
        ``scale_ * realized_matrix`` -- the digital twin of the layer.
    similarity_ : float
    """

    def __init__(self, n=16, gain=12.0, perturb_amp=0.01, max_iters=2500,
                 target_similarity=1.0, objective="cosine", gain_decay=False,
                 init_jitter=0.5, phase_map=None, noise=None, detection="coherent",
                 random_state=0):
        self.n = n
        self.gain = gain
        self.perturb_amp = perturb_amp
        self.max_iters = max_iters
        self.target_similarity = target_similarity
        self.objective = objective
        self.gain_decay = gain_decay
        self.init_jitter = init_jitter
        self.phase_map = phase_map
        self.noise = noise
        self.detection = detection
        self.random_state = random_state

    def _mesh(self):
        return PhotonicMesh.build(self.n, self.phase_map or PhaseVoltageMap(),
                                  self.noise or NoiseModel(), self.detection)

    def _config(self):
        return SpgdConfig(gain=self.gain, perturb_amp=self.perturb_amp, max_iters=self.max_iters,
                          target_similarity=self.target_similarity, seed=self.random_state,
                          objective=self.objective, gain_decay=self.gain_decay,
                          init_jitter=self.init_jitter)

    def fit(self, X, y=None):
        target = check_matrix(X, "target")
        if target.shape != (self.n, self.n):
            raise DimensionError(f"target has shape {target.shape}, mesh realizes ({self.n}, {self.n})")
        self.mesh_ = self._mesh()
        peak = float(np.max(np.abs(target)))
        self.scale_ = peak if peak > 0 else 1.0
        self.record_ = calibrate(self.mesh_, target / self.scale_, self._config())
        self.voltages_ = self.record_.best_voltages
        self.weights_ = self.scale_ * self.record_.realized_matrix
        self.similarity_ = self.record_.best_similarity
        self.n_features_in_ = self.n
        return self

    def transform(self, X):
        """Hardware matrix-vector products ``scale_ * W_eff @ x`` for each row."""
        check_is_fitted(self, "voltages_")
        x, _ = check_batch(X, self.n, "X")
        return self.scale_ * self.mesh_.forward(self.voltages_, x)

    def score(self, X, y=None):
        """Cosine similarity between the realized weights and ``X``."""
        check_is_fitted(self, "weights_")
        return cosine_similarity(self.weights_, check_matrix(X, "target"))
