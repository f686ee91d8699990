"""Rate and incident-power-density statistics of user-centric cell-free
networks: a closed-form stochastic-geometry engine cross-validated by a
Monte Carlo simulator of the underlying downlink model.
"""

from .config import (DerivedParams, SystemParams, ValidationError, derive,
                     load_params, validate)

__version__ = "0.1.0"

__all__ = ["SystemParams", "DerivedParams", "ValidationError",
           "derive", "validate", "load_params", "__version__"]
