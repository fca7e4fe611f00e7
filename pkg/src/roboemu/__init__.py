"""Hardware-in-the-loop emulation of a flexible target robot by a rigid one.

Subpackages by concern:

* :mod:`roboemu.dynamics`, :mod:`roboemu.models`: manipulator models
* :mod:`roboemu.constrained`: rheonomic constraint, multiplier, reduced dynamics
* :mod:`roboemu.kinematics`: Newton-Raphson and CLIK correction
* :mod:`roboemu.control`: emulator torque laws and actuator lag
* :mod:`roboemu.sim`: Scheme A / Scheme B / direct-oracle runs and sweeps
* :mod:`roboemu.freq`: transfer functions and stability gates
* :mod:`roboemu.config`, :mod:`roboemu.cli`: JSON scenarios and the command line
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ConvergenceError,
    DimensionError,
    EmulationError,
    IntegrationError,
    SingularConfigurationError,
)

__all__ = [
    "__version__",
    "ConfigError",
    "ConvergenceError",
    "DimensionError",
    "EmulationError",
    "IntegrationError",
    "SingularConfigurationError",
]
