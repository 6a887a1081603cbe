import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError
from .kind import WallKind

__all__ = [
    "VesselGeometry",
    "WallModel",
    "tube_law_G",
    "tube_law_F",
    "tube_law_integral",
    "wave_speed",
    "relaxation_modulus",
    "calibrate_tau_r",
    "calibrate_eta",
    "calibrate_E_inf",
    "kelvin_voigt_pressure",
]


def _values(x):
    # Tape variables carry their primal in `value`
    return np.asarray(getattr(x, "value", x), dtype=float)


def _check_area(name, a):
    if np.any(~(_values(a) > 0)):
        raise DomainError(f"{name} must be positive")


@dataclass(frozen=True)
class VesselGeometry:
    """A straight vessel segment whose radius tapers linearly

    All lengths are in metres and pressures in pascals.
    """

    length: float
    radius_in: float
    radius_out: float
    thickness: float
    pressure: float = 0.0
    outflow_pressure: float = 0.0

    def __post_init__(self):
        for name in ("length", "radius_in", "radius_out", "thickness"):
            x = getattr(self, name)
            if not (x > 0 and math.isfinite(x)):
                raise DomainError(f"{name} must be positive and finite, got {x!r}")

    @property
    def mean_radius(self):
        """The mean equilibrium radius `(R_in + R_out) / 2`"""
        return 0.5 * (self.radius_in + self.radius_out)

    @property
    def is_tapered(self):
        """True if the inlet and outlet radii differ"""
        return self.radius_in != self.radius_out

    def radius(self, x):
        """Return the equilibrium radius at axial position(s) `x`"""
        s = np.asarray(x, dtype=float) / self.length
        return self.radius_in + (self.radius_out - self.radius_in) * s

    def area(self, x):
        """Return the equilibrium area `pi * R0(x)**2`"""
        return math.pi * self.radius(x) ** 2

    def mean_area(self, a, b):
        """Return the average of the equilibrium area over `[a, b]`

        The radius is linear, so the average of its square is exact.
        """
        ra, rb = self.radius(a), self.radius(b)
        return math.pi * (ra * ra + ra * rb + rb * rb) / 3.0


@dataclass(frozen=True)
class WallModel:
    """Viscoelastic (standard linear solid) wall parameters

    `coefficient` is the tube-law coefficient `W`; it may be a scalar or an
    array aligned with the sample positions the model is used at. Exactly
    one of `eta` and `tau_r` may be left out, and is then derived from
    `tau_r = eta * (E0 - E_inf) / E0**2`.
    """

    kind: WallKind
    E0: float
    E_inf: float
    coefficient: object
    rho: float = 1060.0
    eta: float = None
    tau_r: float = None

    def __post_init__(self):
        object.__setattr__(self, "kind", WallKind.parse(self.kind))
        if not self.E_inf > 0:
            raise DomainError(f"E_inf must be positive, got {self.E_inf!r}")
        if not self.E0 > self.E_inf:
            raise DomainError(f"E0 must exceed E_inf, got E0={self.E0!r}, E_inf={self.E_inf!r}")
        if not self.rho > 0:
            raise DomainError(f"rho must be positive, got {self.rho!r}")
        if np.any(~(np.asarray(self.coefficient, dtype=float) > 0)):
            raise DomainError("tube-law coefficient W must be positive")
        eta, tau_r = self.eta, self.tau_r
        if eta is None and tau_r is None:
            raise DomainError("one of eta and tau_r must be given")
        if eta is not None and eta < 0:
            raise DomainError(f"eta must be non-negative, got {eta!r}")
        if tau_r is not None and tau_r < 0:
            raise DomainError(f"tau_r must be non-negative, got {tau_r!r}")
        if tau_r is None:
            object.__setattr__(self, "tau_r", calibrate_tau_r(eta, self.E0, self.E_inf))
        elif eta is None:
            object.__setattr__(self, "eta", calibrate_eta(tau_r, self.E0, self.E_inf))
        elif not math.isclose(tau_r, calibrate_tau_r(eta, self.E0, self.E_inf), rel_tol=1e-9, abs_tol=1e-300):
            raise DomainError(f"tau_r={tau_r!r} is inconsistent with eta={eta!r}")

    @classmethod
    def for_geometry(cls, geometry, kind, E0, E_inf, *, rho=1060.0, eta=None, tau_r=None, x=None):
        """Construct a wall model whose `W` follows the geometry

        `W` is taken at positions `x` (local radius), or at the mean radius if
        `x` is not given.
        """
        kind = WallKind.parse(kind)
        radius = geometry.mean_radius if x is None else geometry.radius(x)
        W = kind.coefficient(radius, geometry.thickness)
        return cls(kind, E0, E_inf, W, rho=rho, eta=eta, tau_r=tau_r)

    @property
    def exponents(self):
        """The tube-law exponents `(m, n)`"""
        return self.kind.exponents

    def with_coefficient(self, W):
        """Return a copy of the model using coefficient(s) `W`"""
        return replace(self, coefficient=W, tau_r=None)

    def with_relaxation(self, tau_r):
        """Return a copy with relaxation time `tau_r` (viscosity follows)"""
        return replace(self, eta=None, tau_r=tau_r)


def tube_law_G(A, A0, wall, W=None):
    """Return the inverse compliance `G(A) = (m a**m - n a**n) / (W A)`
    with `a = A / A0`

    Raises `DomainError` if `A` or `A0` is not positive.
    """
    _check_area("A", A)
    _check_area("A0", A0)
    m, n = wall.exponents
    W = wall.coefficient if W is None else W
    a = A / A0
    if n:
        return (m * a ** m - n * a ** n) / (W * A)
    return m * a ** m / (W * A)


def tube_law_F(A, A0, p0, wall, W=None, modulus=None):
    """Return the elastic pressure `F(A) = p0 + E_inf / W (a**m - a**n)`

    `modulus` replaces `E_inf` when given. Raises `DomainError` if `A` or
    `A0` is not positive.
    """
    _check_area("A", A)
    _check_area("A0", A0)
    m, n = wall.exponents
    W = wall.coefficient if W is None else W
    E = wall.E_inf if modulus is None else modulus
    a = A / A0
    if n:
        return p0 + E / W * (a ** m - a ** n)
    return p0 + E / W * (a ** m - 1.0)


def tube_law_integral(A, A_ref, A0, wall, W=None):
    """Return `E0 * integral of G(a) da` from `A_ref` to `A`

    Equals `(E0 / W) * ((A/A0)**m - (A/A0)**n)` evaluated between the
    bounds, i.e. the pressure change along a wave curve of the system.
    """
    _check_area("A", A)
    _check_area("A_ref", A_ref)
    m, n = wall.exponents
    W = wall.coefficient if W is None else W
    a, b = A / A0, A_ref / A0
    return wall.E0 / W * ((a ** m - b ** m) - (a ** n - b ** n))


def wave_speed(A, A0, wall, W=None):
    """Return the wave speed `c = sqrt(A E0 G(A) / rho)`

    Raises `DomainError` if the radicand is negative (collapsed vessel).
    """
    radicand = A * wall.E0 * tube_law_G(A, A0, wall, W=W) / wall.rho
    if np.any(radicand < 0):
        raise DomainError("negative wave-speed radicand outside model validity")
    return np.sqrt(radicand)


def relaxation_modulus(t, wall):
    """Return the relaxation modulus `E(t) = E_inf + (E0 - E_inf) exp(-t / tau_r)`

    For `tau_r == 0` the pointwise limit is returned: `E0` at `t == 0` and
    `E_inf` afterwards.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("time must be non-negative")
    if wall.tau_r == 0:
        result = np.where(t == 0, wall.E0, wall.E_inf)
    else:
        decay = np.exp(-t / wall.tau_r)
        result = wall.E0 * decay + wall.E_inf * (1.0 - decay)
    return result if result.ndim else float(result)


def calibrate_tau_r(eta, E0, E_inf):
    """Return the relaxation time `eta * (E0 - E_inf) / E0**2`

    Raises `DomainError` unless `E0 > E_inf > 0` and `eta >= 0`.
    """
    if not E0 > E_inf > 0:
        raise DomainError(f"calibration requires E0 > E_inf > 0, got E0={E0!r}, E_inf={E_inf!r}")
    if eta < 0:
        raise DomainError(f"eta must be non-negative, got {eta!r}")
    return eta * (E0 - E_inf) / (E0 * E0)


def calibrate_eta(tau_r, E0, E_inf):
    """Return the wall viscosity reproducing `tau_r` (inverse of
    `calibrate_tau_r()`)
    """
    if not E0 > E_inf > 0:
        raise DomainError(f"calibration requires E0 > E_inf > 0, got E0={E0!r}, E_inf={E_inf!r}")
    if tau_r < 0:
        raise DomainError(f"tau_r must be non-negative, got {tau_r!r}")
    return tau_r * E0 * E0 / (E0 - E_inf)


def calibrate_E_inf(geometry, rho, c_ref, kind=WallKind.ARTERY):
    """Return the asymptotic modulus matching the reference wave speed
    `c_ref` at equilibrium

    Uses the mean radius of the (possibly tapered) geometry.
    """
    if not c_ref > 0:
        raise DomainError(f"c_ref must be positive, got {c_ref!r}")
    if not rho > 0:
        raise DomainError(f"rho must be positive, got {rho!r}")
    kind = WallKind.parse(kind)
    return kind.modulus_factor(geometry.mean_radius, geometry.thickness) * rho * c_ref ** 2


def kelvin_voigt_pressure(A, A0, p0, dq_dx, wall, W=None):
    """Return the diffusive-limit pressure `F(A) - eta G(A) d(Au)/dx`"""
    return tube_law_F(A, A0, p0, wall, W=W) - wall.eta * tube_law_G(A, A0, wall, W=W) * dq_dx
