import csv
import logging
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import BoundarySolveError, DomainError, SchemaError
from .utilities import gauss_legendre
from .vessel import tube_law_integral

__all__ = [
    "InflowProfile",
    "WindkesselRCR",
    "characteristic_curve",
    "inflow_boundary",
    "windkessel_boundary",
]

logger = logging.getLogger(__name__)

MAX_ITERATIONS = 50
TOLERANCE      = 1e-12


class InflowProfile:
    """A periodic inlet flow rate `Q(t)` (m³/s)

    Either `tabulated`, interpolating samples `(t_k, Q_k)` linearly with
    periodic extension, or `analytic`, a truncated Fourier series
    `Q(t) = a0 + sum(a_k cos(2 pi k t / T) + b_k sin(2 pi k t / T))`.
    """

    __slots__ = ("mode", "times", "flows", "coefficients", "_period")

    def __init__(self, times, flows, period=None):
        """Construct a tabulated profile from samples covering one period

        The samples must start at `t = 0` and end at `t = period` (the last
        time if `period` is not given), with matching end values.

        Raises `DomainError` if the samples are not strictly increasing, do
        not span the period, or the periodic extension is discontinuous.
        """
        times = np.array(times, dtype=float)
        flows = np.array(flows, dtype=float)
        if times.ndim != 1 or times.shape != flows.shape or len(times) < 2:
            raise DomainError("inflow samples must be two equal-length sequences of at least 2 values")
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(flows)):
            raise DomainError("inflow samples must be finite")
        if np.any(np.diff(times) <= 0):
            raise DomainError("inflow sample times must be strictly increasing")
        period = times[-1] if period is None else float(period)
        if not period > 0:
            raise DomainError(f"inflow period must be positive, got {period!r}")
        if times[0] != 0 or not math.isclose(times[-1], period, rel_tol=1e-12):
            raise DomainError(f"inflow samples must span [0, {period!r}]")
        scale = float(np.max(np.abs(flows))) or 1.0
        if abs(flows[0] - flows[-1]) >= 1e-9 * scale:
            raise DomainError("inflow profile is discontinuous at the period wrap")
        self.mode = "tabulated"
        self.times = times
        self.flows = flows
        self.coefficients = None
        self._period = period

    @classmethod
    def fourier(cls, mean, cosines=(), sines=(), period=1.0):
        """Construct an analytic profile from Fourier coefficients"""
        if not period > 0:
            raise DomainError(f"inflow period must be positive, got {period!r}")
        cosines = np.array(cosines, dtype=float)
        sines = np.array(sines, dtype=float)
        if cosines.shape != sines.shape:
            raise DomainError("cosine and sine coefficients must have equal length")
        self = cls.__new__(cls)
        self.mode = "analytic"
        self.times = None
        self.flows = None
        self.coefficients = (float(mean), cosines, sines)
        self._period = float(period)
        return self

    @classmethod
    def constant(cls, flow, period=1.0):
        """Construct a constant profile"""
        return cls.fourier(flow, period=period)

    @classmethod
    def from_csv(cls, path, period=None):
        """Read a tabulated profile from a `t,Q` CSV file

        Raises `SchemaError` (with the row number) on a missing header,
        malformed or non-increasing rows.
        """
        times, flows = [], []
        with open(path, newline="") as file:
            reader = csv.reader(row for row in file if not row.startswith("#"))
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:2]] != ["t", "Q"]:
                raise SchemaError(f"{path}: expected header 't,Q'", row=1)
            for row_number, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    t, q = float(row[0]), float(row[1])
                except (IndexError, ValueError):
                    raise SchemaError(f"{path}: malformed row {row_number}", row=row_number) from None
                if times and t <= times[-1]:
                    raise SchemaError(f"{path}: time not increasing at row {row_number}", row=row_number)
                times.append(t)
                flows.append(q)
        try:
            return cls(times, flows, period=period)
        except DomainError as error:
            raise SchemaError(f"{path}: {error}") from None

    @classmethod
    def builtin(cls, name="ta_inflow.csv"):
        """Read one of the profiles shipped with the package"""
        with resources.as_file(resources.files("hemoflow") / "data" / name) as path:
            return cls.from_csv(path)

    def __repr__(self):
        """Return a short representation of the profile"""
        return f"InflowProfile(mode={self.mode!r}, period={self._period!r})"

    @property
    def period(self):
        """The period `T_cycle` (s)"""
        return self._period

    def flow(self, t):
        """Return `Q(t)` (m³/s), periodically extended

        Works element-wise on arrays.
        """
        t = np.asarray(t, dtype=float)
        if self.mode == "tabulated":
            result = np.interp(t, self.times, self.flows, period=self._period)
        else:
            mean, cosines, sines = self.coefficients
            result = np.full(t.shape, mean)
            for k, (a, b) in enumerate(zip(cosines, sines), start=1):
                phase = 2.0 * math.pi * k * t / self._period
                result = result + a * np.cos(phase) + b * np.sin(phase)
        return result if result.ndim else float(result)

    def mean_flow(self):
        """Return the cycle-averaged flow rate"""
        if self.mode == "analytic":
            return self.coefficients[0]
        segments = 0.5 * (self.flows[1:] + self.flows[:-1]) * np.diff(self.times)
        return float(np.sum(segments) / self._period)


@dataclass
class WindkesselRCR:
    """Three-element Windkessel outlet: `R1` in series with `R2 || C`

    `pressure` is the distal (compliance) pressure `p_c`; it is frozen while
    the solver couples the outlet during a step and advanced afterwards.
    """

    R1: float
    R2: float
    C: float
    p_out: float = 0.0
    pressure: float = field(default=None)

    def __post_init__(self):
        for name in ("R1", "R2", "C"):
            x = getattr(self, name)
            if not (x > 0 and math.isfinite(x)):
                raise DomainError(f"{name} must be positive and finite, got {x!r}")
        if self.pressure is None:
            self.pressure = self.p_out
        if not math.isfinite(self.pressure):
            raise DomainError(f"distal pressure must be finite, got {self.pressure!r}")

    @property
    def time_constant(self):
        """The distal relaxation time `R2 C` (s)"""
        return self.R2 * self.C

    def steady_pressure(self, flow):
        """Return the outlet pressure `p_out + (R1 + R2) Q` under constant flow"""
        return self.p_out + (self.R1 + self.R2) * flow

    def couple(self, interior, coefficients):
        return windkessel_boundary(interior, coefficients, self)

    def advance(self, flow, dt):
        """Advance `C dp_c/dt = Q - (p_c - p_out) / R2` by one implicit Euler
        step
        """
        if not dt > 0:
            raise DomainError(f"time step must be positive, got {dt!r}")
        ratio = dt / (self.R2 * self.C)
        self.pressure = (self.pressure + dt * flow / self.C + ratio * self.p_out) / (1.0 + ratio)
        return self.pressure

    def reset(self, pressure):
        self.pressure = float(pressure)


def speed_integral(A, A_ref, coefficients, nodes=8):
    # Integral of c(a) / a from A_ref to A
    wall = coefficients.wall
    m, n = wall.exponents
    if n == 0:
        c = np.sqrt(A * coefficients.stiffness(A) / wall.rho)
        c_ref = np.sqrt(A_ref * coefficients.stiffness(A_ref) / wall.rho)
        return 2.0 / m * (c - c_ref)
    a, w = gauss_legendre(nodes, A_ref, A)
    c = np.sqrt(a * coefficients.stiffness(a) / wall.rho)
    return float(np.sum(w * c / a))


def characteristic_curve(A, state, coefficients, family):
    """Return `(u, p, c)` at area `A` on the wave curve of `family` (1 or 3)
    through `state = (A, Au, p)`

    Along the curves the pressure follows `dp = E0 G(A) dA` and the
    velocity `du = -+ c dA / A`.
    """
    A_ref, q_ref, p_ref = (float(v) for v in state)
    sign = -1.0 if family == 1 else 1.0
    wall = coefficients.wall
    u = q_ref / A_ref + sign * speed_integral(A, A_ref, coefficients)
    p = p_ref + float(tube_law_integral(A, A_ref, coefficients.A0, wall, W=coefficients.W))
    c = float(np.sqrt(A * coefficients.stiffness(A) / wall.rho))
    return float(u), p, c


def newton(residual, A, label):
    # Damped Newton iteration on a scalar residual of the area
    for iteration in range(1, MAX_ITERATIONS + 1):
        value, slope = residual(A)
        if value == 0.0:
            return A, iteration
        if not (math.isfinite(value) and math.isfinite(slope)) or slope == 0.0:
            raise BoundarySolveError(f"{label} coupling broke down at A={A!r}")
        step = value / slope
        candidate = A - step
        while not candidate > 0:
            step *= 0.5
            candidate = A - step
            if abs(step) < TOLERANCE * A:
                raise BoundarySolveError(f"{label} coupling left the positive-area domain")
        A = candidate
        if abs(step) <= TOLERANCE * A:
            return A, iteration
    raise BoundarySolveError(f"{label} coupling did not converge in {MAX_ITERATIONS} iterations")


def inflow_boundary(interior, coefficients, flow):
    """Return the inlet interface state `(A, Au, p)` carrying flow rate `flow`

    The state lies on the wave curve of the right-going family through the
    interior trace `interior`, so the outgoing characteristic is kept.
    The returned momentum equals `flow` exactly.

    Raises `BoundarySolveError` if the Newton iteration fails.
    """
    flow = float(flow)

    def residual(A):
        u, _, c = characteristic_curve(A, interior, coefficients, 3)
        return A * u - flow, u + c

    A, iterations = newton(residual, float(interior[0]), "inflow")
    _, p, _ = characteristic_curve(A, interior, coefficients, 3)
    logger.debug("inflow coupling converged in %d iterations", iterations)
    return np.array([A, flow, p])


def windkessel_boundary(interior, coefficients, wk, dt=None):
    """Return the outlet interface state `(A, Au, p)` coupled to `wk`

    Solves `p* = p_c + R1 Q*` on the wave curve of the left-going family
    through the interior trace, with `p_c` frozen. If `dt` is given the
    Windkessel is then advanced under `Q*`.

    Raises `BoundarySolveError` if the Newton iteration fails.
    """
    def residual(A):
        u, p, c = characteristic_curve(A, interior, coefficients, 1)
        return p - wk.pressure - wk.R1 * A * u, coefficients.wall.E0 * float(coefficients.G(A)) - wk.R1 * (u - c)

    A, iterations = newton(residual, float(interior[0]), "outflow")
    u, p, _ = characteristic_curve(A, interior, coefficients, 1)
    logger.debug("outflow coupling converged in %d iterations", iterations)
    if dt is not None:
        wk.advance(A * u, dt)
    return np.array([A, A * u, p])
