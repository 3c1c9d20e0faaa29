"""Physics-level simulator of the simplified MZI mesh chip.

The chip is a rectangular mesh of Mach-Zehnder interferometers on
``n + 1`` optical modes followed by ``n`` variable attenuators (one per
used output port).  Every MZI carries a single internal thermo-optic phase
shifter, every attenuator one more, so an ``n = 16`` chip has
``136 + 16 = 152`` tunable shifters.

Signal path::

    voltages --phase map--> phases --2x2 blocks--> (n+1)x(n+1) unitary
        --top-left n x n block, attenuators, readout--> real weight matrix

The last input mode is left dark and the last output mode is discarded.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import (ConfigError, NumericError,
                         TopologyError, VoltageRangeError)
from .validation import check_batch, check_rng

__all__ = [
    "PhaseVoltageMap", "MeshTopology", "VoltageTable", "NoiseModel",
    "PhotonicMesh", "mzi_unit_transfer", "phase_from_voltage",
    "mesh_transfer", "effective_weight", "mesh_forward", "probe_matrix",
]

DETECTION_MODES = ("coherent", "intensity")


@dataclass(frozen=True)
class PhaseVoltageMap:
    """Drive-voltage to optical-phase conversion of a thermo-optic heater.

    ``linear``: ``phase = alpha * v + phi0``; ``quadratic``:
    ``phase = alpha * v**2 + phi0``.  Voltages outside
    ``[v_min, v_max]`` are rejected.  The defaults let a linear heater
    sweep exactly one full period over the 0-10 V range, with mid-range
    (5 V) sitting at the quadrature point ``phase = pi/2``.
    """

    alpha: float = 2 * math.pi / 10.0
    phi0: float = -math.pi / 2
    mode: str = "linear"
    v_min: float = 0.0
    v_max: float = 10.0

    def __post_init__(self):
        if self.mode not in ("linear", "quadratic"):
            raise ConfigError(f"unknown phase map mode {self.mode!r}")
        if not (math.isfinite(self.v_min) and math.isfinite(self.v_max)) or self.v_max <= self.v_min:
            raise ConfigError(f"invalid voltage range [{self.v_min}, {self.v_max}]")
        if not math.isfinite(self.alpha) or not math.isfinite(self.phi0):
            raise ConfigError("alpha and phi0 must be finite")

    def check(self, v, kind="mzi"):
        v = np.asarray(v, dtype=np.float64)
        bad = ~np.isfinite(v) | (v < self.v_min) | (v > self.v_max)
        if np.any(bad):
            idx = int(np.flatnonzero(bad.ravel())[0])
            raise VoltageRangeError(
                f"{kind} shifter {idx}: voltage {v.ravel()[idx]!r} outside "
                f"[{self.v_min}, {self.v_max}] V", shifter_index=(kind, idx))
        return v

    def phase(self, v, kind="mzi"):
        v = self.check(v, kind)
        if self.mode == "linear":
            return self.alpha * v + self.phi0
        return self.alpha * v * v + self.phi0

    def clip(self, v):
        return np.clip(v, self.v_min, self.v_max)

    @property
    def v_mid(self):
        return 0.5 * (self.v_min + self.v_max)

    def to_dict(self):
        return {"alpha": self.alpha, "phi0": self.phi0, "mode": self.mode,
                "v_min": self.v_min, "v_max": self.v_max}


def phase_from_voltage(phase_map, v):
    """Evaluate the phase map at ``v`` (scalar or array)."""
    out = phase_map.phase(v)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class MeshTopology:
    """Placement of MZIs on ``n + 1`` modes plus ``n`` diagonal stages.

    ``layout`` is an ordered tuple of ``(layer, top_mode)`` pairs; MZI ``k``
    couples modes ``top_mode`` and ``top_mode + 1``.  Build the standard
    rectangular arrangement with :meth:`rectangular`.
    """

    n: int
    layout: tuple

    def __post_init__(self):
        if int(self.n) < 1:
            raise TopologyError(f"n must be >= 1, got {self.n}")
        layout = tuple((int(l), int(t)) for l, t in self.layout)
        object.__setattr__(self, "layout", layout)
        seen = set()
        last_layer = -1
        for layer, top in layout:
            if not 0 <= top < self.n:
                raise TopologyError(f"MZI at mode pair ({top}, {top + 1}) is outside {self.n + 1} modes")
            if layer < last_layer:
                raise TopologyError("layout must be ordered by layer")
            last_layer = layer
            for mode in (top, top + 1):
                if (layer, mode) in seen:
                    raise TopologyError(f"mode {mode} used twice in layer {layer}")
                seen.add((layer, mode))

    @classmethod
    def rectangular(cls, n):
        """Clements-style rectangular mesh: ``n + 1`` alternating columns."""
        modes = n + 1
        layout = []
        for layer in range(modes):
            layout.extend((layer, top) for top in range(layer % 2, modes - 1, 2))
        return cls(n, tuple(layout))

    @property
    def n_modes(self):
        return self.n + 1

    @property
    def n_mzi(self):
        return len(self.layout)

    @property
    def n_diag(self):
        return self.n

    @property
    def n_shifters(self):
        return self.n_mzi + self.n_diag

    @cached_property
    def _layer_groups(self):
        groups = {}
        for k, (layer, top) in enumerate(self.layout):
            groups.setdefault(layer, ([], []))
            groups[layer][0].append(k)
            groups[layer][1].append(top)
        return [(np.array(ks), np.array(tops)) for _, (ks, tops) in sorted(groups.items())]

    def to_json(self):
        return json.dumps({"n": self.n, "layout": [list(p) for p in self.layout]})

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        try:
            return cls(int(data["n"]), tuple(tuple(p) for p in data["layout"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise TopologyError(f"malformed topology descriptor: {exc}") from exc


@dataclass(frozen=True, eq=False)
class VoltageTable:
    """Drive voltages for every MZI shifter and every diagonal stage."""

    mzi: np.ndarray
    diag: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mzi", np.array(self.mzi, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "diag", np.array(self.diag, dtype=np.float64).reshape(-1))
        self.mzi.setflags(write=False)
        self.diag.setflags(write=False)

    def __eq__(self, other):
        if not isinstance(other, VoltageTable):
            return NotImplemented
        return np.array_equal(self.mzi, other.mzi) and np.array_equal(self.diag, other.diag)

    @classmethod
    def full(cls, topology, value):
        return cls(np.full(topology.n_mzi, value), np.full(topology.n_diag, value))

    @classmethod
    def random(cls, topology, phase_map, rng=None):
        rng = check_rng(rng)
        lo, hi = phase_map.v_min, phase_map.v_max
        return cls(rng.uniform(lo, hi, topology.n_mzi), rng.uniform(lo, hi, topology.n_diag))

    def as_vector(self):
        return np.concatenate([self.mzi, self.diag])

    @classmethod
    def from_vector(cls, vec, topology):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (topology.n_shifters,):
            raise TopologyError(f"voltage vector has shape {vec.shape}, expected ({topology.n_shifters},)")
        return cls(vec[:topology.n_mzi], vec[topology.n_mzi:])

    def validate(self, topology, phase_map=None):
        if self.mzi.shape[0] != topology.n_mzi or self.diag.shape[0] != topology.n_diag:
            raise TopologyError(
                f"voltage table has {self.mzi.shape[0]} MZI / {self.diag.shape[0]} diagonal entries, "
                f"topology needs {topology.n_mzi} / {topology.n_diag}")
        if phase_map is not None:
            phase_map.check(self.mzi, "mzi")
            phase_map.check(self.diag, "diag")
        return self

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["shifter_id", "kind", "voltage"])
            for kind, values in (("mzi", self.mzi), ("diag", self.diag)):
                for i, v in enumerate(values):
                    writer.writerow([i, kind, repr(float(v))])

    @classmethod
    def from_csv(cls, path):
        values = {"mzi": {}, "diag": {}}
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["shifter_id", "kind", "voltage"]:
                raise TopologyError(f"{path}: expected header shifter_id,kind,voltage")
            for row in reader:
                kind = row["kind"]
                if kind not in values:
                    raise TopologyError(f"{path}: unknown shifter kind {kind!r}")
                values[kind][int(row["shifter_id"])] = float(row["voltage"])
        arrays = []
        for kind in ("mzi", "diag"):
            ids = sorted(values[kind])
            if ids != list(range(len(ids))):
                raise TopologyError(f"{path}: {kind} shifter ids are not contiguous from 0")
            arrays.append([values[kind][i] for i in ids])
        return cls(*arrays)


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian phase jitter (rad, per shifter) and readout noise (per output).

    With both sigmas at zero the simulator is exactly deterministic.
    ``seed`` is used only when a caller does not hand in a generator.
    """

    phase_jitter_sigma: float = 0.0
    readout_sigma: float = 0.0
    seed: int = None

    def __post_init__(self):
        if self.phase_jitter_sigma < 0 or self.readout_sigma < 0:
            raise ConfigError("noise sigmas must be non-negative")

    @property
    def noiseless(self):
        return self.phase_jitter_sigma == 0 and self.readout_sigma == 0

    def make_rng(self, rng=None):
        return check_rng(self.seed if rng is None else rng)


NOISELESS = NoiseModel()


def mzi_unit_transfer(theta):
    """2x2 field transfer of a balanced MZI with internal phase ``theta``.

    ``i * exp(i*theta/2) * [[sin(theta/2), cos(theta/2)], [cos(theta/2), -sin(theta/2)]]``;
    bar power is ``sin(theta/2)**2``, cross power ``cos(theta/2)**2``.
    """
    theta = float(theta)
    if not math.isfinite(theta):
        raise NumericError(f"MZI phase must be finite, got {theta!r}")
    h = theta / 2
    g = 1j * np.exp(1j * h)
    s, c = math.sin(h), math.cos(h)
    return g * np.array([[s, c], [c, -s]], dtype=np.complex128)


def _unitary_from_phases(topology, theta):
    """Mesh unitary for MZI phases ``theta`` of shape (..., n_mzi)."""
    theta = np.asarray(theta, dtype=np.float64)
    batch = theta.shape[:-1]
    m = topology.n_modes
    u = np.broadcast_to(np.eye(m, dtype=np.complex128), batch + (m, m)).copy()
    for ks, tops in topology._layer_groups:
        h = theta[..., ks] / 2
        g = 1j * np.exp(1j * h)
        bar = (g * np.sin(h))[..., None]
        cross = (g * np.cos(h))[..., None]
        upper = u[..., tops, :]
        lower = u[..., tops + 1, :]
        u[..., tops, :] = bar * upper + cross * lower
        u[..., tops + 1, :] = cross * upper - bar * lower
    return u


def _weight_from_phases(topology, theta_mzi, theta_diag, detection="coherent"):
    n = topology.n
    sub = _unitary_from_phases(topology, theta_mzi)[..., :n, :n]
    gain = np.sin(np.asarray(theta_diag) / 2) ** 2
    if detection == "coherent":
        return gain[..., :, None] * sub.real
    if detection == "intensity":
        return gain[..., :, None] * (sub.real ** 2 + sub.imag ** 2)
    raise ConfigError(f"unknown detection mode {detection!r}")


def _phases(topology, phase_map, voltages, noise, rng):
    if not isinstance(voltages, VoltageTable):
        raise TopologyError("voltages must be a VoltageTable")
    voltages.validate(topology)
    theta_mzi = phase_map.phase(voltages.mzi, "mzi")
    theta_diag = phase_map.phase(voltages.diag, "diag")
    if noise is not None and noise.phase_jitter_sigma > 0:
        rng = noise.make_rng(rng)
        theta_mzi = theta_mzi + rng.normal(0.0, noise.phase_jitter_sigma, theta_mzi.shape)
        theta_diag = theta_diag + rng.normal(0.0, noise.phase_jitter_sigma, theta_diag.shape)
    return theta_mzi, theta_diag


def mesh_transfer(topology, phase_map, voltages, noise=None, rng=None):
    """Full ``(n+1) x (n+1)`` complex field transfer of the MZI section.

    Phase jitter, when configured, perturbs the phases only, so the result
    stays unitary.
    """
    theta_mzi, _ = _phases(topology, phase_map, voltages, noise, rng)
    return _unitary_from_phases(topology, theta_mzi)


def effective_weight(topology, phase_map, voltages, noise=None, rng=None, detection="coherent"):
    """Real ``n x n`` weight matrix realized by the chip.

    Coherent readout (default): ``W[i, j] = d_i * Re(U[i, j])``; intensity
    readout: ``W[i, j] = d_i * |U[i, j]|**2``.  ``d_i = sin(theta_i/2)**2``
    is the gain of the ``i``-th diagonal attenuator.
    """
    theta_mzi, theta_diag = _phases(topology, phase_map, voltages, noise, rng)
    return _weight_from_phases(topology, theta_mzi, theta_diag, detection)


def mesh_forward(topology, phase_map, voltages, x, noise=None, rng=None, detection="coherent"):
    """Optical matrix-vector product ``W_eff @ x`` plus readout noise.

    ``x`` may be a single length-``n`` vector or an ``(batch, n)`` array.
    """
    x_arr, single = check_batch(x, topology.n, "mesh input")
    rng = noise.make_rng(rng) if noise is not None and not noise.noiseless else rng
    w = effective_weight(topology, phase_map, voltages, noise, rng, detection)
    y = x_arr @ w.T
    if noise is not None and noise.readout_sigma > 0:
        y = y + rng.normal(0.0, noise.readout_sigma, y.shape)
    return y[0] if single else y


def probe_matrix(topology, phase_map, voltages, noise=None, rng=None, detection="coherent"):
    """Measure the weight matrix column by column with one-hot probes.

    Each probe is an independent pass through :func:`mesh_forward`, so it
    sees its own phase-jitter and readout-noise draws.
    """
    n = topology.n
    eye = np.eye(n)
    if noise is None or noise.phase_jitter_sigma == 0:
        # static phases: one realization serves every probe
        w = effective_weight(topology, phase_map, voltages, detection=detection)
        cols = eye @ w.T
        if noise is not None and noise.readout_sigma > 0:
            cols = cols + noise.make_rng(rng).normal(0.0, noise.readout_sigma, cols.shape)
        return cols.T
    rng = noise.make_rng(rng)
    cols = [mesh_forward(topology, phase_map, voltages, eye[j], noise, rng, detection) for j in range(n)]
    return np.stack(cols, axis=1)


@dataclass(frozen=True)
class PhotonicMesh:
    """Convenience handle bundling a topology with its physics settings."""

    topology: MeshTopology
    phase_map: PhaseVoltageMap = field(default_factory=PhaseVoltageMap)
    noise: NoiseModel = NOISELESS
    detection: str = "coherent"

    def __post_init__(self):
        if self.detection not in DETECTION_MODES:
            raise ConfigError(f"unknown detection mode {self.detection!r}")

    @classmethod
    def build(cls, n=16, phase_map=None, noise=None, detection="coherent"):
        return cls(MeshTopology.rectangular(n), phase_map or PhaseVoltageMap(),
                   noise or NOISELESS, detection)

    @property
    def n(self):
        return self.topology.n

    def transfer(self, voltages, rng=None):
        return mesh_transfer(self.topology, self.phase_map, voltages, self.noise, rng)

    def weight(self, voltages, rng=None, noiseless=False):
        noise = None if noiseless else self.noise
        return effective_weight(self.topology, self.phase_map, voltages, noise, rng, self.detection)

    def forward(self, voltages, x, rng=None):
        return mesh_forward(self.topology, self.phase_map, voltages, x, self.noise, rng, self.detection)

    def probe(self, voltages, rng=None, noiseless=False):
        noise = None if noiseless else self.noise
        return probe_matrix(self.topology, self.phase_map, voltages, noise, rng, self.detection)

    def weights_from_vectors(self, vectors):
        """Noiseless weights for a batch of concatenated voltage vectors.

        ``vectors`` has shape (batch, n_shifters); out-of-range entries
        raise.  Used by calibration to evaluate perturbations together.
        """
        vectors = np.asarray(vectors, dtype=np.float64)
        k = self.topology.n_mzi
        theta = self.phase_map.phase(vectors)
        return _weight_from_phases(self.topology, theta[..., :k], theta[..., k:], self.detection)

    def with_noise(self, noise):
        return PhotonicMesh(self.topology, self.phase_map, noise, self.detection)
