"""Simulation and inference toolkit for spiked covariance matrices
with divergent spikes: model generation, exact block decomposition,
CLT centerings (including the polynomial deterministic shift),
eigenvector-consistency statistics, and Monte Carlo verification.
"""

__version__ = "0.1.0"

from .model import EntryLaw, SpikedModelSpec, check_separation, generate_data, sample_entry_matrix

__all__ = [
    "EntryLaw",
    "SpikedModelSpec",
    "check_separation",
    "generate_data",
    "sample_entry_matrix",
    "__version__",
]
