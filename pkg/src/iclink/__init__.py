"""Ternary, NRZ and bi-phase signalling over inductive coupling links."""

from .codec import TernaryFrame, decode_ternary, encode_biphase, encode_nrz, encode_ternary, max_zero_run
from .harness import Scenario, compare, load_scenario, run_experiment, sweep
from .magnetics import CoilGeometry, CoilPlacement, build_network, mutual_inductance, self_inductance, spiral_path
from .netlist import CouplingNetwork, TouchstoneData, extract_network, parse_touchstone, write_touchstone
from .sim import HBridgeParams, NoiseParams, ReceiverParams, Waveform, simulate_transient, synthesize_drive

__version__ = "0.1.0"

__all__ = [
    "CoilGeometry", "CoilPlacement", "CouplingNetwork", "HBridgeParams", "NoiseParams", "ReceiverParams",
    "Scenario", "TernaryFrame", "TouchstoneData", "Waveform", "build_network", "compare", "decode_ternary",
    "encode_biphase", "encode_nrz", "encode_ternary", "extract_network", "load_scenario", "max_zero_run",
    "mutual_inductance", "parse_touchstone", "run_experiment", "self_inductance", "simulate_transient",
    "spiral_path", "sweep", "synthesize_drive", "write_touchstone",
]
