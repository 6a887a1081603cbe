from enum import IntEnum

__all__ = ["WallKind", "ARTERY", "VEIN"]


class WallKind(IntEnum):
    """The vessel family whose tube law closes the model

    Members select the geometry coefficient `W` and the exponents `m`, `n`
    of the power-law tube law.
    """

    ARTERY = 0
    VEIN   = 1

    @classmethod
    def parse(cls, value):
        """Return the kind named by `value`

        Accepts a member, its integer value, or its handle (case-insensitive).
        Raises `ValueError` for anything else.
        """
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise ValueError(f"unknown vessel kind {value!r}") from None
        return cls(value)

    @property
    def handle(self):
        """The kind's lower-case name"""
        return ("artery", "vein")[self]

    @property
    def exponents(self):
        """The tube-law exponents `(m, n)`"""
        return ((0.5, 0.0), (10.0, -1.5))[self]

    def coefficient(self, radius, thickness):
        """Return the geometry coefficient `W` for an equilibrium `radius`
        and wall `thickness`

        Works element-wise on arrays.
        """
        if self is WallKind.ARTERY:
            return radius / thickness
        return 12.0 * radius ** 3 / thickness ** 3

    def modulus_factor(self, radius, thickness):
        """Return the factor `k` with `E = k * rho * c**2` for the wave-speed
        calibration at equilibrium
        """
        if self is WallKind.ARTERY:
            return 2.0 * radius / thickness
        return 24.0 * radius ** 3 / (23.0 * thickness ** 3)


ARTERY = WallKind.ARTERY
VEIN   = WallKind.VEIN
