"""Photonic spiking reinforcement learning on a simulated MZI mesh.

A spiking TD3 agent is trained in numpy, its hidden-to-hidden layer is
programmed onto a Clements-style MZI mesh by SPGD, and the hybrid
optical-electronic actor is compared against and fine-tuned around the
hardware layer.
"""

from .envs import EnvServer, PendulumEnv, RemoteEnv, RemoteEnvEndpoint, remote_env
from .exceptions import (ConfigError, DimensionError, NumericError, PhotonicSRLError,
                         ProtocolError, TopologyError, UndefinedSimilarityError, UsageError,
                         VoltageRangeError)
from .hybrid import (ConvergenceReport, DeviationReport, MeshBackend, WeightSnapshot,
                     convergence_report, cotrain, extract_l2, hybrid_forward,
                     map_to_hardware, offline_compare)
from .mesh import (MeshTopology, NoiseModel, PhaseVoltageMap, PhotonicMesh, VoltageTable,
                   effective_weight, mesh_forward, mesh_transfer, probe_matrix)
from .snn import ActorNet, DenseBackend, LifConfig, actor_backward, actor_forward
from .spgd import CalibrationRecord, MeshCalibrator, SpgdConfig, calibrate, cosine_similarity
from .td3 import SpikingTD3, Td3Agent, Td3Config, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "EnvServer", "PendulumEnv", "RemoteEnv", "RemoteEnvEndpoint", "remote_env",
    "ConfigError", "DimensionError", "NumericError", "PhotonicSRLError", "ProtocolError",
    "TopologyError", "UndefinedSimilarityError", "UsageError", "VoltageRangeError",
    "ConvergenceReport", "DeviationReport", "MeshBackend", "WeightSnapshot",
    "convergence_report", "cotrain", "extract_l2", "hybrid_forward", "map_to_hardware",
    "offline_compare",
    "MeshTopology", "NoiseModel", "PhaseVoltageMap", "PhotonicMesh", "VoltageTable",
    "effective_weight", "mesh_forward", "mesh_transfer", "probe_matrix",
    "ActorNet", "DenseBackend", "LifConfig", "actor_backward", "actor_forward",
    "CalibrationRecord", "MeshCalibrator", "SpgdConfig", "calibrate", "cosine_similarity",
    "SpikingTD3", "Td3Agent", "Td3Config", "evaluate", "train",
]
