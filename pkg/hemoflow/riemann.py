from dataclasses import dataclass

import numpy as np

from .errors import HyperbolicityError, PositivityError
from .utilities import gauss_legendre
from .vessel import tube_law_F, tube_law_G

__all__ = [
    "LawCoefficients",
    "physical_flux",
    "nonconservative_product",
    "jacobian",
    "eigenstructure",
    "abs_jacobian",
    "dot_flux",
    "segment_integral",
    "cell_integral",
    "elastic_flux",
    "elastic_eigenstructure",
    "elastic_dot_flux",
    "elastic_cell_integral",
]


@dataclass(frozen=True, eq=False)
class LawCoefficients:
    """Tube-law coefficients sampled at a set of positions

    `A0`, `p0` and `W` are arrays (or scalars) aligned with the positions;
    the moduli, density and exponents come from `wall`.
    """

    wall: object
    A0: object
    p0: object
    W: object

    def take(self, index):
        """Return the coefficients at `index` of every position array"""
        def pick(x):
            return x[index] if np.ndim(x) else x
        return LawCoefficients(self.wall, pick(self.A0), pick(self.p0), pick(self.W))

    def G(self, A):
        """Return `G(A)` with these coefficients"""
        return tube_law_G(A, self.A0, self.wall, W=self.W)

    def F(self, A):
        """Return `F(A)` with these coefficients"""
        return tube_law_F(A, self.A0, self.p0, self.wall, W=self.W)

    def stiffness(self, A):
        """Return `E0 G(A)`"""
        return self.wall.E0 * self.G(A)

    def elastic_slope(self, A):
        """Return `dF/dA = E_inf G(A)`"""
        return self.wall.E_inf * self.G(A)


def check_area(A, offset=0):
    bad = np.flatnonzero(~(np.asarray(A) > 0))
    if bad.size:
        raise PositivityError(f"non-positive area at cell {offset + int(bad[0])}", cell=offset + int(bad[0]))


def physical_flux(Q):
    """Return the conservative flux `(Au, Au², 0)` of states `Q`

    `Q` has its three components on the first axis.
    """
    A, q = Q[0], Q[1]
    return np.stack((q, q * q / A, np.zeros_like(A)))


def nonconservative_product(Q, dQ, coef):
    """Return `B(Q) dQ = (0, (A/rho) dp, E0 G(A) dq)`"""
    A = Q[0]
    return np.stack((
        np.zeros_like(A),
        A / coef.wall.rho * dQ[2],
        coef.stiffness(A) * dQ[1],
    ))


def jacobian(Q, coef):
    """Return the quasi-linear matrices `J(Q) = df/dQ + B(Q)`, shaped
    `(k, 3, 3)` for `k` states
    """
    A, q = np.atleast_1d(Q[0]), np.atleast_1d(Q[1])
    u = q / A
    J = np.zeros(A.shape + (3, 3))
    J[..., 0, 1] = 1.0
    J[..., 1, 0] = -u * u
    J[..., 1, 1] = 2.0 * u
    J[..., 1, 2] = A / coef.wall.rho
    J[..., 2, 1] = coef.stiffness(A)
    return J


def eigenstructure(Q, coef, offset=0):
    """Return eigenvalues `(u - c, 0, u + c)` and the right eigenvector
    matrices of `J(Q)`

    Raises `HyperbolicityError` (with the offending index shifted by
    `offset`) where the eigenstructure is complex, degenerate or not finite.
    """
    A, q = np.atleast_1d(Q[0]), np.atleast_1d(Q[1])
    check_area(A, offset)
    u = q / A
    g = coef.stiffness(A)
    c2 = A * g / coef.wall.rho
    k = coef.wall.rho * u * u / A
    bad = ~np.isfinite(c2) | (c2 <= 0) | ~np.isfinite(u) | (np.abs(c2 - u * u) <= 1e-12 * c2)
    if np.any(bad):
        i = offset + int(np.flatnonzero(bad)[0])
        raise HyperbolicityError(f"loss of hyperbolicity at cell {i}", cell=i)
    c = np.sqrt(c2)
    lam = np.stack((u - c, np.zeros_like(u), u + c), axis=-1)
    R = np.empty(A.shape + (3, 3))
    R[..., 0, :] = 1.0
    R[..., 1, 0] = u - c
    R[..., 1, 1] = 0.0
    R[..., 1, 2] = u + c
    R[..., 2, 0] = g
    R[..., 2, 1] = k
    R[..., 2, 2] = g
    return lam, R


def abs_jacobian(Q, coef, offset=0):
    """Return `|J(Q)| = R |Λ| R⁻¹`"""
    lam, R = eigenstructure(Q, coef, offset)
    return np.einsum("...ij,...j,...jk->...ik", R, np.abs(lam), np.linalg.inv(R))


def segment_integral(QL, QR, coef, nodes=3, offset=0):
    """Return `∫ |J(Ψ)| dΨ` and `∫ B(Ψ) dΨ` along the straight path from
    `QL` to `QR`, by Gauss-Legendre quadrature with `nodes` points
    """
    s, w = gauss_legendre(nodes)
    dQ = QR - QL
    viscous = np.zeros_like(dQ)
    jump = np.zeros_like(dQ)
    for sk, wk in zip(s, w):
        Q = QL + sk * dQ
        absJ = abs_jacobian(Q, coef, offset)
        viscous += wk * np.einsum("kij,jk->ik", absJ, dQ.reshape(3, -1)).reshape(dQ.shape)
        jump += wk * nonconservative_product(Q, dQ, coef)
    return viscous, jump


def dot_flux(QL, QR, coef, nodes=3, offset=0):
    """Return the Dumbser-Osher-Toro numerical flux and the halves of the
    non-conservative jump assigned to the left and right cells

    The flux is `(f(QL) + f(QR)) / 2 - ∫|J(Ψ)| dΨ / 2` along the linear path;
    the jump `∫B(Ψ) dΨ` is split evenly. States carry their components on
    the first axis.
    """
    viscous, jump = segment_integral(QL, QR, coef, nodes, offset)
    flux = 0.5 * (physical_flux(QL) + physical_flux(QR)) - 0.5 * viscous
    half = 0.5 * jump
    return flux, half, half


def parabola(lower, mean, upper):
    # Quadratic with the given face values and cell average, in ξ ∈ [-1/2, 1/2]
    c2 = 3.0 * (lower + upper) - 6.0 * mean
    c1 = upper - lower
    c0 = mean - c2 / 12.0
    return c0, c1, c2


def cell_integral(lower, mean, upper, node_coefs, nodes=3, offset=0):
    """Return `∫ B(Q) ∂Q/∂x dx` over every cell

    The state inside a cell is the parabola through its reconstructed face
    values with the right average. `node_coefs` lists the coefficients at
    each of the `nodes` Gauss points of every cell.
    """
    xi, w = gauss_legendre(nodes, -0.5, 0.5)
    c0, c1, c2 = parabola(lower, mean, upper)
    total = np.zeros_like(mean)
    for xk, wk, coef in zip(xi, w, node_coefs):
        Q = c0 + c1 * xk + c2 * xk * xk
        dQ = c1 + 2.0 * c2 * xk
        check_area(Q[0], offset)
        total += wk * nonconservative_product(Q, dQ, coef)
    return total


def elastic_flux(Q):
    """Return the conservative flux `(Au, Au²)` of the elastic system"""
    A, q = Q[0], Q[1]
    return np.stack((q, q * q / A))


def elastic_eigenstructure(Q, coef, offset=0):
    """Return eigenvalues `(u - c, u + c)` and right eigenvectors of the
    elastic system's Jacobian, `c` being the elastic wave speed
    """
    A, q = np.atleast_1d(Q[0]), np.atleast_1d(Q[1])
    check_area(A, offset)
    u = q / A
    c2 = A * coef.elastic_slope(A) / coef.wall.rho
    bad = ~np.isfinite(c2) | (c2 <= 0)
    if np.any(bad):
        i = offset + int(np.flatnonzero(bad)[0])
        raise HyperbolicityError(f"loss of hyperbolicity at cell {i}", cell=i)
    c = np.sqrt(c2)
    lam = np.stack((u - c, u + c), axis=-1)
    R = np.empty(A.shape + (2, 2))
    R[..., 0, :] = 1.0
    R[..., 1, 0] = u - c
    R[..., 1, 1] = u + c
    return lam, R


def elastic_product(Q, dQ, coef):
    A = Q[0]
    return np.stack((np.zeros_like(A), A / coef.wall.rho * coef.elastic_slope(A) * dQ[0]))


def elastic_dot_flux(QL, QR, coef, nodes=3, offset=0):
    """Return the DOT flux and half jumps of the elastic system"""
    s, w = gauss_legendre(nodes)
    dQ = QR - QL
    viscous = np.zeros_like(dQ)
    jump = np.zeros_like(dQ)
    for sk, wk in zip(s, w):
        Q = QL + sk * dQ
        lam, R = elastic_eigenstructure(Q, coef, offset)
        absJ = np.einsum("...ij,...j,...jk->...ik", R, np.abs(lam), np.linalg.inv(R))
        viscous += wk * np.einsum("kij,jk->ik", absJ, dQ.reshape(2, -1)).reshape(dQ.shape)
        jump += wk * elastic_product(Q, dQ, coef)
    flux = 0.5 * (elastic_flux(QL) + elastic_flux(QR)) - 0.5 * viscous
    half = 0.5 * jump
    return flux, half, half


def elastic_cell_integral(lower, mean, upper, node_coefs, nodes=3, offset=0):
    """Return the in-cell non-conservative integral of the elastic system"""
    xi, w = gauss_legendre(nodes, -0.5, 0.5)
    c0, c1, c2 = parabola(lower, mean, upper)
    total = np.zeros_like(mean)
    for xk, wk, coef in zip(xi, w, node_coefs):
        Q = c0 + c1 * xk + c2 * xk * xk
        dQ = c1 + 2.0 * c2 * xk
        check_area(Q[0], offset)
        total += wk * elastic_product(Q, dQ, coef)
    return total
