"""Heat flow of isometric G2-structures as a flow of unit octonion sections on a flat torus."""

from .flow import FlowConfig, FlowState, diagnostics, energy, initial_state, run_flow, step
from .lattice import BackgroundData, LatticeSpec, OctonionField
from .octonions import DomainError, oct_mul

__version__ = "0.1.0"

__all__ = [
    "BackgroundData", "DomainError", "FlowConfig", "FlowState", "LatticeSpec", "OctonionField",
    "diagnostics", "energy", "initial_state", "oct_mul", "run_flow", "step",
]
