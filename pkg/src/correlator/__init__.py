"""
n-fold coincidence histograms, plateau normalization and background correction.
"""

from .schemas import SUPPORTED_ORDERS, BackgroundRatio, CoincidenceHistogram, axis_length
from .histogram import (
    coincidence_histogram,
    collapse_axis,
    far_bin_plateau,
    grow_chains,
    plateau_normalize,
    slice_axis,
    successor_table,
    valid_record_tags,
)
from .background import (
    EPSILON_BAND,
    correct_background,
    correct_g2,
    correct_g3,
    correct_g4,
    estimate_epsilon,
    forward_mix,
    forward_mix_g2,
    forward_mix_g3,
    forward_mix_g4,
)
from .io import histogram_frame, read_histogram, write_histogram

__all__ = [
    "EPSILON_BAND",
    "SUPPORTED_ORDERS",
    "BackgroundRatio",
    "CoincidenceHistogram",
    "axis_length",
    "coincidence_histogram",
    "collapse_axis",
    "correct_background",
    "correct_g2",
    "correct_g3",
    "correct_g4",
    "estimate_epsilon",
    "far_bin_plateau",
    "forward_mix",
    "forward_mix_g2",
    "forward_mix_g3",
    "forward_mix_g4",
    "grow_chains",
    "histogram_frame",
    "plateau_normalize",
    "read_histogram",
    "slice_axis",
    "successor_table",
    "valid_record_tags",
    "write_histogram",
]
