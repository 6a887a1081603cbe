import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .boundary import inflow_boundary
from .errors import ConfigurationError, DomainError, NonFiniteError, PositivityError, TimeStepError
from .imex import ARS443
from .riemann import (LawCoefficients, cell_integral, dot_flux, elastic_cell_integral,
                      elastic_dot_flux, physical_flux, segment_integral)
from .utilities import gauss_legendre
from .weno import weno3_faces

__all__ = [
    "Grid1D",
    "StateField",
    "StepRecord",
    "SimulationResult",
    "implicit_relaxation_stage",
    "Solver",
    "ElasticSolver",
    "integrate",
    "simulate",
]

logger = logging.getLogger(__name__)

DT_MIN = 1e-9


class Grid1D:
    """A uniform finite-volume grid over a vessel segment

    Holds the cell width and centres, and the tube-law coefficients sampled
    at cell centres (`cells`), interfaces (`faces`) and at the Gauss points
    of every cell (`nodes`). The equilibrium area of a cell is the exact
    average of `A0(x)` over it.
    """

    __slots__ = ("geometry", "wall", "n_cells", "dx", "centers", "interfaces", "cells", "faces", "nodes")

    def __init__(self, geometry, wall, n_cells, quadrature=3):
        """Construct the grid

        Raises `ConfigurationError` if there are fewer than 3 cells.
        """
        n_cells = int(n_cells)
        if n_cells < 3:
            raise ConfigurationError(f"grid needs at least 3 cells, got {n_cells}")
        self.geometry = geometry
        self.wall = wall
        self.n_cells = n_cells
        self.dx = geometry.length / n_cells
        self.interfaces = np.linspace(0.0, geometry.length, n_cells + 1)
        self.centers = 0.5 * (self.interfaces[:-1] + self.interfaces[1:])

        def sample(x, A0):
            W = wall.kind.coefficient(geometry.radius(x), geometry.thickness)
            p0 = np.full(np.shape(x), geometry.pressure)
            return LawCoefficients(wall, A0, p0, W)

        self.cells = sample(self.centers, geometry.mean_area(self.interfaces[:-1], self.interfaces[1:]))
        self.faces = sample(self.interfaces, geometry.area(self.interfaces))
        xi, _ = gauss_legendre(quadrature, -0.5, 0.5)
        self.nodes = [sample(self.centers + xk * self.dx, geometry.area(self.centers + xk * self.dx)) for xk in xi]

    @classmethod
    def uniform(cls, geometry, wall, n_cells):
        return cls(geometry, wall, n_cells)

    def __repr__(self):
        """Return a short representation of the grid"""
        return f"Grid1D(n_cells={self.n_cells!r}, length={self.geometry.length!r})"

    @property
    def quadrature(self):
        """The number of Gauss points per cell"""
        return len(self.nodes)

    def equilibrium(self, t=0.0):
        """Return the equilibrium state `(A0, 0, p0)`"""
        Q = np.stack((self.cells.A0, np.zeros(self.n_cells), self.cells.p0))
        return StateField(Q, t)

    def wave_speed(self, A):
        """Return the frozen wave speed `c` of each cell at areas `A`"""
        return np.sqrt(A * self.cells.stiffness(A) / self.wall.rho)

    def elastic_speed(self, A):
        """Return the elastic wave speed of each cell at areas `A`"""
        return np.sqrt(A * self.cells.elastic_slope(A) / self.wall.rho)


@dataclass(frozen=True, eq=False)
class StateField:
    """Cell averages `Q = (A, Au, p)` at time `t`

    `Q` has shape `(3, n_cells)`.
    """

    Q: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != 3:
            raise DomainError(f"state must have shape (3, n), got {Q.shape}")
        if not np.all(np.isfinite(Q)):
            raise NonFiniteError(f"non-finite state at t={self.t!r}", label="state")
        bad = np.flatnonzero(~(Q[0] > 0))
        if bad.size:
            cell = int(bad[0])
            raise PositivityError(f"non-positive area at cell {cell}, t={self.t!r}", cell=cell, time=self.t)
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "t", float(self.t))

    @property
    def A(self):
        """The cell-averaged areas"""
        return self.Q[0]

    @property
    def q(self):
        """The cell-averaged flow rates `Au`"""
        return self.Q[1]

    @property
    def p(self):
        """The cell-averaged pressures"""
        return self.Q[2]

    @property
    def u(self):
        """The velocities `q / A`"""
        return self.Q[1] / self.Q[0]

    @property
    def n_cells(self):
        return self.Q.shape[1]

    def total_volume(self, dx):
        """Return the blood volume `sum(A_i dx)`"""
        return float(np.sum(self.Q[0]) * dx)

    def rescale(self, scales, *, inverse=False):
        op = scales.unscale if inverse else scales.scale
        Q = np.stack((op("area", self.Q[0]), op("flow", self.Q[1]), op("pressure", self.Q[2])))
        return StateField(Q, op("time", self.t))


@dataclass(frozen=True)
class StepRecord:
    """Bookkeeping of one solver step

    `inflow_volume` and `outflow_volume` are the volumes that crossed the
    inlet and outlet interfaces during the step.
    """

    time: float
    dt: float
    inflow_volume: float = 0.0
    outflow_volume: float = 0.0


def implicit_relaxation_stage(p_star, dt_eff, F, tau_r):
    """Return the pressure after the implicit relaxation stage

    Solves `p = p_star + dt_eff (F - p) / tau_r` in closed form. With
    `tau_r == 0` the relaxed equilibrium `F` is returned.

    Raises `DomainError` if `dt_eff` is not positive.
    """
    if not dt_eff > 0:
        raise DomainError(f"stage time step must be positive, got {dt_eff!r}")
    if tau_r == 0:
        return np.array(np.broadcast_to(F, np.shape(p_star)), dtype=float) if np.ndim(p_star) else float(F)
    r = dt_eff / tau_r
    return (p_star + r * F) / (1.0 + r)


class Solver:
    """Asymptotic-preserving IMEX finite-volume solver of the viscoelastic
    system

    Transport (fluxes and non-conservative products) is integrated by the
    explicit part of `tableau`, the relaxation source by its diagonally
    implicit part. Interface values are third-order WENO reconstructions and
    interface fluctuations come from the path-conservative DOT solver. With
    neither `inflow` nor `outflow` the grid is periodic.
    """

    def __init__(self, grid, inflow=None, outflow=None, *, tableau=ARS443, cfl=0.9,
                 weights="z", epsilon=1e-12, dt_min=DT_MIN):
        if not 0 < cfl <= 1:
            raise ConfigurationError(f"cfl must lie in (0, 1], got {cfl!r}")
        if (inflow is None) != (outflow is None):
            raise ConfigurationError("inflow and outflow conditions must be given together")
        if not tableau.stiffly_accurate:
            raise ConfigurationError(f"tableau {tableau.name!r} is not globally stiffly accurate")
        if grid.wall.tau_r == 0 and np.any(tableau.implicit[:, 0]):
            raise ConfigurationError(f"tableau {tableau.name!r} evaluates the source explicitly, tau_r must be positive")
        self.grid = grid
        self.inflow = inflow
        self.outflow = outflow
        self.tableau = tableau
        self.cfl = cfl
        self.weights = weights
        self.epsilon = epsilon
        self.dt_min = dt_min
        self.last_step = None

    @property
    def periodic(self):
        """True if the grid wraps around"""
        return self.inflow is None

    def time_step(self, state):
        """Return the CFL time step `cfl dx / max(|u| + c)`"""
        speed = np.abs(state.u) + self.grid.wave_speed(state.A)
        return self.cfl * self.grid.dx / float(np.max(speed))

    def transport(self, Q, t):
        """Return the transport rate `dQ/dt` and the inlet and outlet mass
        fluxes at time `t`
        """
        grid = self.grid
        boundary = "periodic" if self.periodic else "extrapolate"
        lower, upper = weno3_faces(Q, boundary=boundary, weights=self.weights, epsilon=self.epsilon)
        n = grid.n_cells
        if self.periodic:
            left = np.concatenate((upper[:, -1:], upper), axis=1)
            right = np.concatenate((lower, lower[:, :1]), axis=1)
            flux, to_left, to_right = dot_flux(left, right, grid.faces, nodes=grid.quadrature)
        else:
            inner = grid.faces.take(slice(1, n))
            flux_i, left_i, right_i = dot_flux(upper[:, :-1], lower[:, 1:], inner, nodes=grid.quadrature, offset=1)
            inlet = self.inflow_state(lower[:, 0], t)
            outlet = self.outflow.couple(upper[:, -1], grid.faces.take(n))
            _, jump_in = segment_integral(inlet, lower[:, 0], grid.faces.take(0), nodes=grid.quadrature)
            _, jump_out = segment_integral(upper[:, -1], outlet, grid.faces.take(n), nodes=grid.quadrature, offset=n - 1)
            zero = np.zeros((3, 1))
            flux = np.concatenate((physical_flux(inlet)[:, None], flux_i, physical_flux(outlet)[:, None]), axis=1)
            to_left = np.concatenate((zero, left_i, jump_out[:, None]), axis=1)
            to_right = np.concatenate((jump_in[:, None], right_i, zero), axis=1)
        inside = cell_integral(lower, Q, upper, grid.nodes, nodes=grid.quadrature)
        rate = -(flux[:, 1:] - flux[:, :-1] + to_right[:, :-1] + to_left[:, 1:] + inside) / grid.dx
        return rate, float(flux[0, 0]), float(flux[0, -1])

    def inflow_state(self, interior, t):
        return inflow_boundary(interior, self.grid.faces.take(0), self.inflow.flow(t))

    def step(self, state, dt=None):
        """Return the state one IMEX step later

        `dt` defaults to the CFL time step. Commits the outlet model state and
        records the boundary volumes in `last_step`.

        Raises `TimeStepError` if `dt` is below the floor, `PositivityError`
        if a stage leaves a non-positive area.
        """
        if dt is None:
            dt = self.time_step(state)
        if not dt >= self.dt_min:
            raise TimeStepError(f"time step {dt!r} below floor {self.dt_min!r} at t={state.t!r}")
        tab = self.tableau
        grid = self.grid
        tau_r = grid.wall.tau_r
        s = tab.stages
        explicit_source = np.any(tab.implicit[:, 0])
        transports, sources = [], []
        inflow = outflow = 0.0
        Q = None
        for k in range(s):
            Q_star = state.Q.copy()
            for j in range(k):
                Q_star += dt * tab.explicit[k, j] * transports[j]
                if sources[j] is not None:
                    Q_star += dt * tab.implicit[k, j] * sources[j]
            a_kk = tab.implicit[k, k]
            t_k = state.t + tab.c_explicit[k] * dt
            check_positive(Q_star[0], t_k)
            if a_kk:
                p_star = Q_star[2].copy()
                Q = Q_star
                Q[2] = implicit_relaxation_stage(p_star, dt * a_kk, grid.cells.F(Q[0]), tau_r)
                source = np.zeros_like(Q)
                source[2] = (Q[2] - p_star) / (dt * a_kk)
                sources.append(source)
            else:
                Q = Q_star
                sources.append(self.source(Q) if explicit_source else None)
            if k < s - 1:
                rate, fin, fout = self.transport(Q, t_k)
                transports.append(rate)
                inflow += tab.b_explicit[k] * fin
                outflow += tab.b_explicit[k] * fout
        if not self.periodic:
            self.outflow.advance(outflow, dt)
        self.last_step = StepRecord(state.t + dt, dt, dt * inflow, dt * outflow)
        logger.debug("step to t=%.6g with dt=%.3g", state.t + dt, dt)
        return StateField(Q, state.t + dt)

    def source(self, Q):
        """Return the relaxation source `(0, 0, (F(A) - p) / tau_r)`"""
        source = np.zeros_like(Q)
        source[2] = (self.grid.cells.F(Q[0]) - Q[2]) / self.grid.wall.tau_r
        return source


def check_positive(A, t):
    bad = np.flatnonzero(~(A > 0))
    if bad.size:
        cell = int(bad[0])
        logger.error("non-positive area at cell %d, t=%.6g", cell, t)
        raise PositivityError(f"non-positive area at cell {cell}, t={t!r}", cell=cell, time=t)


class ElasticSolver:
    """Explicit finite-volume solver of the elastic system on a periodic grid

    Evolves `(A, Au)` with the pressure closed by `p = F(A)`, using the same
    reconstruction, the same path-conservative fluxes and the explicit part
    of `tableau`. Serves as the reference for the hyperbolic relaxation
    limit; states are exchanged as `StateField` with `p = F(A)`.
    """

    def __init__(self, grid, *, tableau=ARS443, cfl=0.9, weights="z", epsilon=1e-12, dt_min=DT_MIN):
        if not 0 < cfl <= 1:
            raise ConfigurationError(f"cfl must lie in (0, 1], got {cfl!r}")
        self.grid = grid
        self.tableau = tableau
        self.cfl = cfl
        self.weights = weights
        self.epsilon = epsilon
        self.dt_min = dt_min
        self.last_step = None

    def time_step(self, state):
        """Return the CFL time step with the elastic wave speed"""
        speed = np.abs(state.u) + self.grid.elastic_speed(state.A)
        return self.cfl * self.grid.dx / float(np.max(speed))

    def transport(self, Q):
        """Return `dQ/dt` of the elastic system"""
        grid = self.grid
        lower, upper = weno3_faces(Q, boundary="periodic", weights=self.weights, epsilon=self.epsilon)
        left = np.concatenate((upper[:, -1:], upper), axis=1)
        right = np.concatenate((lower, lower[:, :1]), axis=1)
        flux, to_left, to_right = elastic_dot_flux(left, right, grid.faces, nodes=grid.quadrature)
        inside = elastic_cell_integral(lower, Q, upper, grid.nodes, nodes=grid.quadrature)
        return -(flux[:, 1:] - flux[:, :-1] + to_right[:, :-1] + to_left[:, 1:] + inside) / grid.dx

    def step(self, state, dt=None):
        """Return the state one explicit Runge-Kutta step later"""
        if dt is None:
            dt = self.time_step(state)
        if not dt >= self.dt_min:
            raise TimeStepError(f"time step {dt!r} below floor {self.dt_min!r} at t={state.t!r}")
        tab = self.tableau
        Q0 = state.Q[:2]
        rates = []
        for k in range(tab.stages):
            Q = Q0.copy()
            for j in range(k):
                Q += dt * tab.explicit[k, j] * rates[j]
            check_positive(Q[0], state.t + tab.c_explicit[k] * dt)
            rates.append(self.transport(Q))
        Q = Q0 + dt * sum(b * rate for b, rate in zip(tab.b_explicit, rates))
        check_positive(Q[0], state.t + dt)
        self.last_step = StepRecord(state.t + dt, dt)
        return StateField(np.vstack((Q, self.grid.cells.F(Q[0]))), state.t + dt)


@dataclass(frozen=True, eq=False)
class SimulationResult:
    """Recorded cell fields of a simulation

    `A`, `u` and `p` have shape `(n_cells, n_times)`; `records` lists the
    `StepRecord` of every step taken.
    """

    x: np.ndarray
    times: np.ndarray
    A: np.ndarray
    u: np.ndarray
    p: np.ndarray
    records: list = field(default_factory=list)

    @property
    def steps(self):
        """The number of steps taken"""
        return len(self.records)

    def sample(self, station):
        """Return the `(A, u, p)` time series at axial position `station`

        Fields are interpolated linearly between cell centres and held
        constant beyond the outermost centres.
        """
        x = self.x
        i = int(np.clip(np.searchsorted(x, station) - 1, 0, len(x) - 2))
        w = float(np.clip((station - x[i]) / (x[i + 1] - x[i]), 0.0, 1.0))
        return tuple((1.0 - w) * f[i] + w * f[i + 1] for f in (self.A, self.u, self.p))

    def final_state(self):
        """Return the last recorded state"""
        return StateField(np.stack((self.A[:, -1], self.A[:, -1] * self.u[:, -1], self.p[:, -1])), self.times[-1])


def integrate(solver, state, end_time, output_times=None, period=None):
    """Advance `state` to `end_time` and record fields at `output_times`

    Output times are hit exactly; without them every step is recorded.
    `period`, if given, only marks cycle completions in the log.

    Returns a `SimulationResult`. Raises the solver's errors unchanged.
    """
    if output_times is None:
        targets = None
        recorded = [state]
    else:
        targets = np.array(output_times, dtype=float)
        if np.any(np.diff(targets) <= 0) or (targets.size and (targets[0] < state.t or targets[-1] > end_time)):
            raise ConfigurationError("output times must increase within the simulated interval")
        recorded = []
    records = []
    cycle = 0 if period is None else math.floor(state.t / period)
    k = 0
    logger.info("simulating from t=%.6g to t=%.6g on %d cells", state.t, end_time, solver.grid.n_cells)

    def record(s):
        nonlocal k
        while targets is not None and k < targets.size and abs(targets[k] - s.t) <= 1e-12 * max(1.0, abs(s.t)):
            recorded.append(s)
            k += 1

    record(state)
    while state.t < end_time and not math.isclose(state.t, end_time, rel_tol=0, abs_tol=1e-12 * max(1.0, end_time)):
        stop = end_time if targets is None or k >= targets.size else targets[k]
        remaining = stop - state.t
        dt = solver.time_step(state)
        if remaining <= dt:
            dt = remaining
        elif remaining < 2.0 * dt:
            dt = 0.5 * remaining
        state = solver.step(state, dt)
        if state.t > stop or math.isclose(state.t, stop, rel_tol=0, abs_tol=1e-12 * max(1.0, stop)):
            state = StateField(state.Q, stop)
        records.append(solver.last_step)
        if targets is None:
            recorded.append(state)
        else:
            record(state)
        if period is not None and math.floor(state.t / period + 1e-9) > cycle:
            cycle = math.floor(state.t / period + 1e-9)
            logger.info("completed cycle %d at t=%.6g after %d steps", cycle, state.t, len(records))
    logger.info("finished at t=%.6g after %d steps", state.t, len(records))
    A = np.stack([s.A for s in recorded], axis=1)
    u = np.stack([s.u for s in recorded], axis=1)
    p = np.stack([s.p for s in recorded], axis=1)
    times = np.array([s.t for s in recorded])
    return SimulationResult(solver.grid.centers.copy(), times, A, u, p, records)


def simulate(config, output_times=None, end_time=None):
    """Run the solver described by a run configuration

    `config` provides `build_solver()`, returning the solver and its initial
    state, and the simulated time and inflow period in `config.solver`.
    """
    solver, state = config.build_solver()
    end_time = config.solver.end_time if end_time is None else end_time
    period = solver.inflow.period if solver.inflow is not None else None
    return integrate(solver, state, end_time, output_times=output_times, period=period)
