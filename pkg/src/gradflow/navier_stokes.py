"""First-order multiplier-corrected scheme for 2D incompressible flow.

The three-step shape matches the gradient-flow schemes: a backward-Euler
Stokes baseline, a kinetic-energy branch test, and (when the baseline raised
the energy) an additive correction with the multiplier from the closed-form
cubic. Velocity fields are arrays of shape ``(2, *grid.shape)``; pressure is
defined up to a constant and its zero mode is pinned to 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import NoRootFoundError
from .integrators import StepDiagnostics, _abort
from .multiplier import (SOLVE_BRANCH, ZERO_BRANCH, MultiplierOutcome,
                         ScalarSolveConfig, solve_ns_eta)


def kinetic_energy(grid, u):
    return 0.5 * sum(grid.inner(c, c) for c in u)


def divergence_norm(grid, u):
    return grid.l2_norm(grid.divergence(list(u)))


def advect(grid, u):
    """Convective term (u . grad) u, computed spectrally per component."""
    grads = [grid.gradient(c) for c in u]
    out = np.zeros_like(u)
    for i in range(len(u)):
        acc = np.zeros(grid.shape)
        for j in range(len(u)):
            acc += u[j] * grads[i][j]
        out[i] = acc
    return out


def stokes_solve(grid, rhs, nu, dt):
    """Solve (1/dt - nu lap) w + grad p = rhs with div w = 0.

    The rhs is split into its divergence-free part and a gradient; the
    gradient becomes the pressure (zero mode 0) and the rest is inverted
    mode by mode.
    """
    solenoidal = grid.leray_project(list(rhs))
    pressure = grid.solve_poisson(grid.divergence(list(rhs)))
    helm = 1.0 / dt + nu * grid.laplacian_symbol()
    w = np.stack([grid.backward(grid.forward(c) / helm) for c in solenoidal])
    return w, pressure


@dataclass
class NsState:
    grid: object
    u: np.ndarray
    p: np.ndarray
    nu: float
    dt: float
    e_prev: float = float("nan")
    t: float = 0.0
    step_index: int = 0
    solver: ScalarSolveConfig = dc_field(default_factory=ScalarSolveConfig)
    tol_e: float | None = None
    verbose: bool = False

    def branch_tolerance(self):
        if self.tol_e is None:
            return 1e-12 * (1.0 + abs(self.e_prev))
        return self.tol_e


def make_ns_state(grid, u0, nu, dt, *, solver=None, tol_e=None, verbose=False):
    """Project the initial velocity and set up the flow state."""
    if grid.dims != 2:
        raise ValueError("the flow scheme is implemented for 2D grids only")
    if nu <= 0.0:
        raise ValueError("viscosity must be positive")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    u0 = np.stack([np.asarray(c, dtype=float) for c in u0])
    u0 = np.stack(grid.leray_project(list(u0)))
    state = NsState(grid=grid, u=u0, p=np.zeros(grid.shape), nu=float(nu),
                    dt=float(dt), solver=solver or ScalarSolveConfig(),
                    tol_e=tol_e, verbose=verbose)
    state.e_prev = kinetic_energy(grid, u0)
    return state


def step_ns_combined(state):
    """One backward-Euler step with the kinetic-energy branch."""
    grid, dt, nu = state.grid, state.dt, state.nu
    u_n = state.u
    adv = advect(grid, u_n)
    u_bar, p_bar = stokes_solve(grid, u_n / dt - adv, nu, dt)
    e_before = state.e_prev
    linear_solves = 1
    scalar_solves = 0
    u2 = None

    baseline_energy = kinetic_energy(grid, u_bar)
    if baseline_energy <= e_before + state.branch_tolerance():
        outcome = MultiplierOutcome(0.0, ZERO_BRANCH)
        u_new, p_new = u_bar, p_bar
    else:
        u2, p2 = stokes_solve(grid, -adv, nu, dt)
        linear_solves += 1
        scalar_solves = 1
        try:
            outcome = solve_ns_eta(grid, u_bar, u2, u_n, nu, dt, state.solver)
        except NoRootFoundError as err:
            _abort(state, SOLVE_BRANCH, err)
        u_new = u_bar + outcome.eta * u2
        p_new = p_bar + outcome.eta * p2

    e_after = (baseline_energy if outcome.branch == ZERO_BRANCH
               else kinetic_energy(grid, u_new))
    diag = StepDiagnostics(
        step_index=state.step_index, time=state.t + dt, method="ns-be",
        branch=outcome.branch, eta=outcome.eta, iterations=outcome.iterations,
        residual=outcome.residual, e_before=e_before, e_after=e_after,
        baseline_energy=baseline_energy, linear_solves=linear_solves,
        scalar_solves=scalar_solves,
        mass=tuple(grid.mean(c) for c in u_new),
        energy_violation=e_after > e_before + 1e-10 * (1.0 + abs(e_before)))
    diag.extra["div_norm"] = divergence_norm(grid, u_new)
    if state.verbose:
        diag.baseline = u_bar
        diag.correction = u2
        diag.extra["roots"] = outcome.all_roots

    state.u = u_new
    state.p = p_new
    state.t += dt
    state.step_index += 1
    state.e_prev = e_after
    return u_new, diag


def taylor_green(grid, amplitude=1.0):
    """Classical decaying vortex initial data on a 2-pi periodic box."""
    x, y = grid.meshes()
    return np.stack([amplitude * np.cos(x) * np.sin(y),
                     -amplitude * np.sin(x) * np.cos(y)])
