"""Entanglement-assisted postselected weak measurement: states, weak values,
Fisher information, qubit-circuit simulation and readout-error analysis."""

from .errors import *  # noqa: F401,F403
from .qcore import (
    HermitianObservable,
    QuantumState,
    expectation,
    variance,
)
from .weakvalue import (
    WeakMeasurementSetup,
    max_postselection_probability,
    optimal_postselection_for_weak_value,
    optimal_weak_value_for_probability,
    weak_value,
)

__version__ = "0.1.0"
