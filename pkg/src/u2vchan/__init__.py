"""Non-stationary UAV-to-vehicle MIMO channel simulator with fuselage posture."""

from .channel import AntennaArray, CarrierConfig, Scene, simulate
from .mobility import MobilityProfile, Schedule, preset_scenario
from .scenario import ClusterParams, RiceanProcess, generate_clusters
from .stats import analytic_acf, analytic_ccf, coherence_time, mc_acf, mc_ccf

__all__ = [
    "AntennaArray",
    "CarrierConfig",
    "ClusterParams",
    "MobilityProfile",
    "RiceanProcess",
    "Scene",
    "Schedule",
    "analytic_acf",
    "analytic_ccf",
    "coherence_time",
    "generate_clusters",
    "mc_acf",
    "mc_ccf",
    "preset_scenario",
    "simulate",
]
