"""Fenchel-Young variational inference: entmax maps, sparse EM for Gaussian mixtures, a toy FY beta-VAE."""
from ._kernels import BACKEND
from .errors import CovarianceError, FormatError, NumericFailure
from .simplex import Regularizer, conjugate, fy_loss, fyvi_solve, prediction_map

__version__ = "0.1.0"

__all__ = ["BACKEND", "CovarianceError", "FormatError", "NumericFailure", "Regularizer", "conjugate",
           "fy_loss", "fyvi_solve", "prediction_map", "__version__"]
