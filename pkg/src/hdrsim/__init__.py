"""hdrsim: simulator and closed-form analytics for hysteresis-switched
relaying between energy-harvesting nodes."""

from .model import *  # noqa: F401,F403
from .engine import *  # noqa: F401,F403
from .analytic import *  # noqa: F401,F403
from .scenarios import *  # noqa: F401,F403

__version__ = "0.1.0"
