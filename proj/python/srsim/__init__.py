"""Reflector-assisted symbiotic link toolkit.

Thin wrapper over the compiled core: scenario configs, channel synthesis,
the activation signal model, detector analytics, the Monte Carlo oracle
and the joint beam/phase optimizer.
"""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
