"""Differentially private release of 2D location datasets.

Points are mapped onto a Hilbert curve, sorted, grouped into blocks of
``k`` and released as Laplace-noised block sums. Consumers rebuild a
monotone sequence with isotonic regression and map it back to the plane.
"""

from ._meta import __version__
from .hilbert import DomainError, HilbertConfig, Rect, UNIT_SQUARE, hilbert_forward, hilbert_inverse, map_dataset
from .mechanism import AUTO, Release, publish, publish_values, publish_with_private_size
from .isotonic import Reconstruction, isotonic_l1, isotonic_l2, reconstruct
from .error_model import ErrorTable, choose_group_size, default_table, emd_1d, gen_error, predict_err
from .estimators import density_from_values, median_from_release, range_count

__all__ = [
    "__version__",
    "AUTO",
    "DomainError",
    "ErrorTable",
    "HilbertConfig",
    "Reconstruction",
    "Rect",
    "Release",
    "UNIT_SQUARE",
    "choose_group_size",
    "default_table",
    "density_from_values",
    "emd_1d",
    "gen_error",
    "hilbert_forward",
    "hilbert_inverse",
    "isotonic_l1",
    "isotonic_l2",
    "map_dataset",
    "median_from_release",
    "predict_err",
    "publish",
    "publish_values",
    "publish_with_private_size",
    "range_count",
    "reconstruct",
]
