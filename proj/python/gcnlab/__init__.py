"""Deep GCN training with isometric initialization and gradient-guided rewiring.

Node features cross the Python boundary as (N, C) arrays, one row per node.
"""

from ._gcnlab import (
    ConfigError,
    DimensionError,
    Graph,
    LoadError,
    StateError,
    TrainConfig,
    TrainResult,
    degree_sums,
    dirichlet_energy,
    dirichlet_energy_trace,
    glorot_bound,
    gradient_flow,
    init_weights,
    iso_magnitude,
    iso_uniform_bound,
    iso_variance,
    load_bundle,
    open_dataset,
    propagation_csr,
    propagation_matrix,
    run_seeds,
    save_bundle,
    sha256_hex,
    train,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "Graph",
    "LoadError",
    "StateError",
    "TrainConfig",
    "TrainResult",
    "degree_sums",
    "dirichlet_energy",
    "dirichlet_energy_trace",
    "glorot_bound",
    "gradient_flow",
    "init_weights",
    "iso_magnitude",
    "iso_uniform_bound",
    "iso_variance",
    "load_bundle",
    "open_dataset",
    "propagation_csr",
    "propagation_matrix",
    "run_seeds",
    "save_bundle",
    "sha256_hex",
    "train",
]
