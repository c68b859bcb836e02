"""Ergodic capacity of correlated-scattering Rayleigh fading channels.

Closed forms for Ornstein-Uhlenbeck scattering, majorization tools for
ordering correlation scenarios, statistical-CSI water-filling and a Monte
Carlo Gaussian-process oracle.
"""

from .capacity import *  # noqa: F401,F403
from .channel import *  # noqa: F401,F403
from .errors import DomainError, NumericalError, UsageError
from .mc_oracle import *  # noqa: F401,F403
from .rearrange import *  # noqa: F401,F403
from .specfun import *  # noqa: F401,F403
from . import capacity, channel, mc_oracle, rearrange, specfun

__version__ = "0.1.0"
