"""halfwave: spectral simulator and verification harness for i du/dt = (|p| + V) u."""

from halfwave.grid import (
    RadialGrid,
    WaveFunction,
    SpectralCoefficients,
    build_radial_grid,
    sine_transform,
    inverse_sine_transform,
    weighted_norm,
    inner,
)

__all__ = [
    "RadialGrid",
    "WaveFunction",
    "SpectralCoefficients",
    "build_radial_grid",
    "sine_transform",
    "inverse_sine_transform",
    "weighted_norm",
    "inner",
]

__version__ = "0.1.0"
