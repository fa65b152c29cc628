"""Rolling-window correlation networks for equity returns.

Builds planarity-filtered correlation graphs over rolling return windows,
computes walk-based and geometric connectivity measures, tests per-pair
differences between stable and volatile periods by permutation, and
classifies the periods with a linear SVM over masked measure features.
"""

__version__ = "0.1.0"
