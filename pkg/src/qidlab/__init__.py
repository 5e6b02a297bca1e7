"""qidlab: numerical experiments on geometry preservation, forgetfulness,
and quantum identification codes for finite-dimensional channels."""

from . import hilbert, channels

__all__ = ["hilbert", "channels"]
__version__ = "0.1.0"
