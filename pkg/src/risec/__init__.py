"""Secrecy-rate designs for RIS-aided radar-communication systems.

Submodules: channels, metrics, sdp, manifold, rcce, dfrc, robust, plus the
batch harness in config, experiments, results and cli.
"""

from .channels import ChannelSet, Geometry, PathLossModel, SteeringParams, UncertaintyModel, sample_channels
from .config import ConfigError, ScenarioConfig, dump_config, load_config
from .dfrc import DfrcOptions, PenaltyParams, run_dfrc_dinkelbach, run_dfrc_rcg
from .experiments import run_experiment
from .metrics import DfrcDesign, NoisePowers, RcceDesign
from .rcce import RcceOptions, run_rcce_bcd
from .results import ExperimentResult, emit
from .robust import QuantizationSpec, RobustOptions, run_robust_bcd

__version__ = "0.1.0"

__all__ = [
    "ChannelSet", "Geometry", "PathLossModel", "SteeringParams", "UncertaintyModel", "sample_channels",
    "ConfigError", "ScenarioConfig", "dump_config", "load_config",
    "DfrcOptions", "PenaltyParams", "run_dfrc_dinkelbach", "run_dfrc_rcg",
    "run_experiment", "DfrcDesign", "NoisePowers", "RcceDesign",
    "RcceOptions", "run_rcce_bcd", "ExperimentResult", "emit",
    "QuantizationSpec", "RobustOptions", "run_robust_bcd",
]
