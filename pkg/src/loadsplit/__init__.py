"""Sector disaggregation of aggregate hourly load by linearly-constrained NMF."""

__version__ = "0.1.0"

from .constraints import ConstraintSet  # noqa: E402
from .estimator import LCNMF, LCNMFEnsemble  # noqa: E402
from .rank import ScreeRank  # noqa: E402

__all__ = ["ConstraintSet", "LCNMF", "LCNMFEnsemble", "ScreeRank", "__version__"]
