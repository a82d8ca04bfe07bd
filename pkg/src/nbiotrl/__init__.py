"""NB-IoT uplink access simulator with learning-based resource control."""

__version__ = "0.1.0"

from .config import (
    ActionVector,
    DqnConfig,
    GroupAction,
    SimConfig,
    data_re_per_device,
    load_config_file,
    rach_re_cost,
    uplink_re_budget,
)
from .controllers import (
    LeUrcController,
    RandomController,
    StaticController,
    expected_requests,
    zeta,
)
from .dqn import (
    AgentEnsemble,
    CmaDqnGreedyController,
    load_checkpoint,
    run_training,
    save_checkpoint,
)
from .env import ObservationU, UplinkEnv, build_state
from .errors import ConfigError, ContractViolation
from .phy import detection_probability_linear, mean_snr_linear
from .rng import RngStream

__all__ = [
    "ActionVector",
    "AgentEnsemble",
    "CmaDqnGreedyController",
    "ConfigError",
    "ContractViolation",
    "DqnConfig",
    "GroupAction",
    "LeUrcController",
    "ObservationU",
    "RandomController",
    "RngStream",
    "SimConfig",
    "StaticController",
    "UplinkEnv",
    "build_state",
    "data_re_per_device",
    "detection_probability_linear",
    "expected_requests",
    "load_checkpoint",
    "load_config_file",
    "mean_snr_linear",
    "rach_re_cost",
    "run_training",
    "save_checkpoint",
    "uplink_re_budget",
    "zeta",
]
