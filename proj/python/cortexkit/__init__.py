"""Python bindings for the cortexkit C++ library.

Matrices are numpy float64 arrays with samples in rows.
"""

from ._cortexkit import (
    DataError,
    DimensionError,
    EngramAE,
    GranulePurkinje,
    IoError,
    LwbpNetwork,
    density_heatmap,
    gradcheck,
    memory_map,
    point_label,
    run_experiment,
    train_engram,
    train_lwbp_2d,
)

__all__ = [
    "DataError",
    "DimensionError",
    "EngramAE",
    "GranulePurkinje",
    "IoError",
    "LwbpNetwork",
    "density_heatmap",
    "gradcheck",
    "memory_map",
    "point_label",
    "run_experiment",
    "train_engram",
    "train_lwbp_2d",
]
