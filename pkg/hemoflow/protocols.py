from abc import abstractmethod
from typing import Protocol, runtime_checkable

__all__ = [
    "ScalableLike",
    "InflowLike",
    "OutflowLike",
]


# Boundary handlers are duck-typed against these protocols. The solver only
# ever calls the methods declared here, so user-defined inflow profiles or
# outflow models can be passed in without subclassing anything from this
# package.


@runtime_checkable
class ScalableLike(Protocol):
    """Protocol of objects that can be moved between SI and dimensionless
    units
    """

    @abstractmethod
    def rescale(self, scales, *, inverse=False):
        """Return a copy expressed in dimensionless units, or in SI units if
        `inverse` is true
        """
        pass


@runtime_checkable
class InflowLike(Protocol):
    """Protocol of inlet flow-rate forcings"""

    @abstractmethod
    def flow(self, t):
        """Return the prescribed volumetric flow rate (m³/s) at time `t`"""
        pass

    @property
    @abstractmethod
    def period(self):
        """The forcing period (s)"""
        pass


@runtime_checkable
class OutflowLike(Protocol):
    """Protocol of outlet models coupled through a boundary Riemann problem

    Implementations own whatever lumped state they carry. `couple()` must
    not mutate that state; `advance()` commits one time step.
    """

    @abstractmethod
    def couple(self, interior, coefficients):
        """Return the outlet interface state `(A, Au, p)` given the interior
        state adjacent to the outlet and its frozen tube-law coefficients
        """
        pass

    @abstractmethod
    def advance(self, flow, dt):
        """Advance the lumped state by `dt` under the outlet `flow`"""
        pass

    @abstractmethod
    def reset(self, pressure):
        """Reset the lumped state to the given distal pressure"""
        pass
