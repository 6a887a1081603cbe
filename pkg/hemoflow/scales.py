import math

from .protocols import ScalableLike

__all__ = ["NonDimScales", "nondimensionalize", "redimensionalize"]

# Physical dimension of each quantity kind, as exponents of
# (length, area, velocity, time, pressure) scales
DIMENSIONS = {
    "length":     (1, 0, 0, 0, 0),
    "area":       (0, 1, 0, 0, 0),
    "velocity":   (0, 0, 1, 0, 0),
    "time":       (0, 0, 0, 1, 0),
    "pressure":   (0, 0, 0, 0, 1),
    "modulus":    (0, 0, 0, 0, 1),
    "flow":       (0, 1, 1, 0, 0),
    "relaxation": (1, 0, -1, 0, 0),
}


class NonDimScales:
    """An immutable set of reference scales for the vessel model

    Holds the length `L_c`, area `A_c`, velocity `U_c`, time `T_c` and
    pressure `P_c` scales. The pressure scale is always `rho * U_c**2`, so
    the momentum balance keeps unit coefficients in scaled form. Without a
    cycle length, `T_c = L_c / U_c`; with one, `T_c` is the cycle length and
    the ratio `strouhal = L_c / (U_c * T_c)` multiplies every scaled time
    derivative.

    Relaxation times are scaled by the convective time `L_c / U_c`, not by
    `T_c`, which keeps the relaxation equation free of extra factors.
    """

    __slots__      = ("data",)
    __match_args__ = ("length", "area", "velocity", "time", "pressure")

    def __init__(self, length, area, velocity, time, pressure):
        """Construct scales from their five values

        Raises `ValueError` if any scale is not strictly positive and finite.
        """
        data = (float(length), float(area), float(velocity), float(time), float(pressure))
        for name, x in zip(self.__match_args__, data):
            if not (x > 0 and math.isfinite(x)):
                raise ValueError(f"{name} scale must be positive and finite, got {x!r}")
        self.data = data

    @classmethod
    def for_vessel(cls, length, area, density, *, period=None, velocity=1.0):
        """Construct the default scales for a vessel

        `length` is the vessel length, `area` the equilibrium area at the
        measurement station, and `period` the cardiac cycle length (if any).
        """
        if density <= 0:
            raise ValueError(f"density must be positive, got {density!r}")
        time = length / velocity if period is None else period
        return cls(length, area, velocity, time, density * velocity ** 2)

    def __repr__(self):
        """Return a canonical representation of the scales"""
        L, A, U, T, P = self.data
        return f"NonDimScales(length={L!r}, area={A!r}, velocity={U!r}, time={T!r}, pressure={P!r})"

    def __eq__(self, other):
        """Return true if the two scale sets are equal, otherwise false"""
        if not isinstance(other, NonDimScales):
            return NotImplemented
        return self.data == other.data

    def __hash__(self):
        return hash(self.data)

    def __iter__(self):
        """Return an iterator over the five scales"""
        yield from self.data

    @property
    def length(self):
        """The length scale `L_c` (m)"""
        return self.data[0]

    @property
    def area(self):
        """The area scale `A_c` (m²)"""
        return self.data[1]

    @property
    def velocity(self):
        """The velocity scale `U_c` (m/s)"""
        return self.data[2]

    @property
    def time(self):
        """The time scale `T_c` (s)"""
        return self.data[3]

    @property
    def pressure(self):
        """The pressure scale `P_c` (Pa)"""
        return self.data[4]

    @property
    def strouhal(self):
        """The factor `L_c / (U_c T_c)` in front of scaled time derivatives"""
        L, _, U, T, _ = self.data
        return L / (U * T)

    def factor(self, kind):
        """Return the reference value of a quantity `kind`

        Raises `KeyError` if the kind is unknown.
        """
        try:
            powers = DIMENSIONS[kind]
        except KeyError:
            raise KeyError(f"unknown quantity kind {kind!r}") from None
        result = 1.0
        for scale, power in zip(self.data, powers):
            if power:
                result *= scale ** power
        return result

    def scale(self, kind, value):
        """Return `value` of quantity `kind` in dimensionless form"""
        return value / self.factor(kind)

    def unscale(self, kind, value):
        """Return dimensionless `value` of quantity `kind` in SI units"""
        return value * self.factor(kind)


def nondimensionalize(obj, scales):
    """Return the dimensionless counterpart of a dataset or state"""
    if not isinstance(obj, ScalableLike):
        raise TypeError(f"cannot nondimensionalize {type(obj).__name__!r} object")
    return obj.rescale(scales)


def redimensionalize(obj, scales):
    """Return the SI counterpart of a dimensionless dataset or state"""
    if not isinstance(obj, ScalableLike):
        raise TypeError(f"cannot redimensionalize {type(obj).__name__!r} object")
    return obj.rescale(scales, inverse=True)
