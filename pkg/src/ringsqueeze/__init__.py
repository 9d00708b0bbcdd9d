"""Squeezed-light generation in lossy microring resonators.

A non-perturbative simulator for spontaneous four-wave mixing in a
microring side coupled to a waveguide over a finite-length coupler.
Scattering loss is discretised into phantom channels so the evolution
stays unitary; pump, signal and idler fields are propagated on an
asymptotic-in/out mode basis with a split-step Bogoliubov scheme.
"""

from .device import (
    ConfigurationError,
    DeviceSpec,
    InfeasibleTargetError,
    PhantomLayout,
    ResonanceSpec,
    ResonanceWindow,
    UnphysicalDeviceError,
    build_k_grid,
    calibrate_coupling,
    figures_of_merit,
    make_device,
    map_path,
    nearest_neighbor_resonances,
)
from .coupler import (
    CouplerEnvelope,
    PoleSingularError,
    RingResponse,
    coupler_envelopes,
    coupler_transfer,
    intensity_enhancement,
    ring_response,
)

__all__ = [
    "ConfigurationError",
    "CouplerEnvelope",
    "DeviceSpec",
    "InfeasibleTargetError",
    "PhantomLayout",
    "PoleSingularError",
    "ResonanceSpec",
    "ResonanceWindow",
    "RingResponse",
    "UnphysicalDeviceError",
    "build_k_grid",
    "calibrate_coupling",
    "coupler_envelopes",
    "coupler_transfer",
    "figures_of_merit",
    "intensity_enhancement",
    "make_device",
    "map_path",
    "nearest_neighbor_resonances",
    "ring_response",
]

__version__ = "0.1.0"
