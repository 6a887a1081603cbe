from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

__all__ = ["ImexTableau", "ARS443", "tableau_from_config"]


@dataclass(frozen=True, eq=False)
class ImexTableau:
    """Butcher tableau pair of an implicit-explicit Runge-Kutta method

    `explicit` and `implicit` are `s × s` coefficient matrices, `b_explicit`
    and `b_implicit` the weights. The explicit part must be strictly lower
    triangular and the implicit part lower triangular (diagonally implicit).
    """

    name: str
    explicit: np.ndarray
    implicit: np.ndarray
    b_explicit: np.ndarray
    b_implicit: np.ndarray
    order: int

    def __post_init__(self):
        for field in ("explicit", "implicit", "b_explicit", "b_implicit"):
            object.__setattr__(self, field, np.array(getattr(self, field), dtype=float))
        a, ai = self.explicit, self.implicit
        s = self.stages
        if a.shape != (s, s) or ai.shape != (s, s):
            raise ConfigurationError(f"tableau {self.name!r} needs square {s} × {s} coefficient matrices")
        if self.b_explicit.shape != (s,) or self.b_implicit.shape != (s,):
            raise ConfigurationError(f"tableau {self.name!r} weights must have length {s}")
        if np.any(np.triu(a) != 0):
            raise ConfigurationError(f"explicit part of tableau {self.name!r} is not strictly lower triangular")
        if np.any(np.triu(ai, 1) != 0):
            raise ConfigurationError(f"implicit part of tableau {self.name!r} is not lower triangular")
        if np.any(np.diag(ai)[1:] == 0):
            raise ConfigurationError(f"implicit part of tableau {self.name!r} has a zero diagonal past stage 1")
        if not (np.isclose(self.b_explicit.sum(), 1.0) and np.isclose(self.b_implicit.sum(), 1.0)):
            raise ConfigurationError(f"weights of tableau {self.name!r} do not sum to one")

    @property
    def stages(self):
        """The number of stages `s`"""
        return len(self.b_explicit)

    @property
    def c_explicit(self):
        """The explicit abscissae (row sums)"""
        return self.explicit.sum(axis=1)

    @property
    def c_implicit(self):
        """The implicit abscissae (row sums)"""
        return self.implicit.sum(axis=1)

    @property
    def stiffly_accurate(self):
        """True if both last rows equal their weights (globally stiffly
        accurate), so the step result is the last stage value
        """
        return (
            np.allclose(self.explicit[-1], self.b_explicit, rtol=0, atol=1e-15)
            and np.allclose(self.implicit[-1], self.b_implicit, rtol=0, atol=1e-15)
        )

    def order_conditions(self):
        """Return the residuals of the order conditions up to `order`

        Covers the classical conditions of both parts and the coupling
        conditions up to third order.
        """
        b, bi = self.b_explicit, self.b_implicit
        c, ci = self.c_explicit, self.c_implicit
        a, ai = self.explicit, self.implicit
        result = {"1": (b.sum() - 1.0, bi.sum() - 1.0)}
        if self.order >= 2:
            result["2"] = (b @ c - 0.5, bi @ ci - 0.5, b @ ci - 0.5, bi @ c - 0.5)
        if self.order >= 3:
            result["3"] = (
                b @ (c * c) - 1 / 3, bi @ (ci * ci) - 1 / 3,
                b @ a @ c - 1 / 6, bi @ ai @ ci - 1 / 6,
                b @ (c * ci) - 1 / 3, bi @ (c * ci) - 1 / 3,
                b @ (ci * ci) - 1 / 3, bi @ (c * c) - 1 / 3,
                b @ a @ ci - 1 / 6, b @ ai @ c - 1 / 6, b @ ai @ ci - 1 / 6,
                bi @ a @ c - 1 / 6, bi @ a @ ci - 1 / 6, bi @ ai @ c - 1 / 6,
            )
        return result

    def as_dict(self):
        """Return a JSON-compatible description of the tableau"""
        return {
            "name": self.name,
            "explicit": self.explicit.tolist(),
            "implicit": self.implicit.tolist(),
            "b_explicit": self.b_explicit.tolist(),
            "b_implicit": self.b_implicit.tolist(),
            "order": self.order,
        }


# Ascher, Ruuth and Spiteri's L-stable, globally stiffly accurate
# (4,4,3) scheme; the first implicit column is zero, so the relaxation
# source is never evaluated explicitly.
ARS443 = ImexTableau(
    name="ars443",
    explicit=[
        [0,       0,     0,    0,    0],
        [1 / 2,   0,     0,    0,    0],
        [11 / 18, 1 / 18, 0,   0,    0],
        [5 / 6,  -5 / 6, 1 / 2, 0,   0],
        [1 / 4,   7 / 4, 3 / 4, -7 / 4, 0],
    ],
    implicit=[
        [0,  0,     0,     0,     0],
        [0,  1 / 2, 0,     0,     0],
        [0,  1 / 6, 1 / 2, 0,     0],
        [0, -1 / 2, 1 / 2, 1 / 2, 0],
        [0,  3 / 2, -3 / 2, 1 / 2, 1 / 2],
    ],
    b_explicit=[1 / 4, 7 / 4, 3 / 4, -7 / 4, 0],
    b_implicit=[0, 3 / 2, -3 / 2, 1 / 2, 1 / 2],
    order=3,
)

TABLEAUS = {"ars443": ARS443}


def tableau_from_config(value):
    """Return the tableau named by `value`, or built from its dictionary form"""
    if isinstance(value, ImexTableau):
        return value
    if isinstance(value, str):
        try:
            return TABLEAUS[value.lower()]
        except KeyError:
            raise ConfigurationError(f"unknown IMEX tableau {value!r}") from None
    try:
        return ImexTableau(**value)
    except TypeError as error:
        raise ConfigurationError(f"invalid IMEX tableau description: {error}") from None
