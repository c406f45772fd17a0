"""Kernel-weighted k-NN regression with a locally adaptive k.

Submodules: ``core`` (points, metrics, kernels, targets, noise), ``nn_index``,
``regressor``, ``adaptive``, ``worlds`` (synthetic doubling-measure worlds),
``minimax`` (lower-bound lab), ``experiments`` and ``cli``.
"""

from .adaptive import AdaptiveConfig, predict_adaptive, select_k
from .core import Dataset, InputError, Kernel, KernelKind, Metric, NoiseModel, TargetFunction
from .nn_index import Index, brute_force_knn
from .regressor import compute_weights, predict_fixed_k
from .worlds import WorldKind, WorldSpec, parse_world, sample_world

__all__ = [
    "AdaptiveConfig", "Dataset", "Index", "InputError", "Kernel", "KernelKind", "Metric",
    "NoiseModel", "TargetFunction", "WorldKind", "WorldSpec", "brute_force_knn",
    "compute_weights", "parse_world", "predict_adaptive", "predict_fixed_k",
    "sample_world", "select_k",
]

__version__ = "0.1.0"
