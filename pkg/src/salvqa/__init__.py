"""Register-token saliency prediction and saliency-fused video quality regression
on a small numpy autograd engine."""

__version__ = "0.1.0"

from .rng import RngState
from .tensor import NonFiniteError, Tensor, no_grad

__all__ = ["NonFiniteError", "RngState", "Tensor", "__version__", "no_grad"]
