"""Gradient-flow model definitions.

Each model exposes the same small surface: a mobility symbol (the flow
metric), a linear symbol (the quadratic part of the free energy), the
variational derivative of the potential part, a pointwise potential density
and the full free-energy functional. The ternary model works on a pair of
fields and couples them through a constant 2x2 matrix.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EnergyBreakdown:
    quadratic: float
    potential: float

    @property
    def total(self):
        return self.quadratic + self.potential


@dataclass(frozen=True)
class AllenCahn:
    """L2 gradient flow of the double-well energy."""

    mobility: float = 1.0
    epsilon: float = 1.0
    dealias: bool = False

    kind = "allen-cahn"
    n_fields = 1

    def linear_symbol(self, grid):
        return grid.laplacian_symbol()

    def mobility_symbol(self, grid):
        return grid.constant_symbol(self.mobility)

    def nonlinear_term(self, grid, phi):
        out = phi * (phi * phi - 1.0) / self.epsilon ** 2
        return grid.dealias(out) if self.dealias else out

    def potential_density(self, grid, phi):
        return (phi * phi - 1.0) ** 2 / (4.0 * self.epsilon ** 2)

    def free_energy(self, grid, phi):
        quad = 0.5 * grid.inner(phi, grid.apply_symbol(phi, self.linear_symbol(grid)))
        pot = grid.integrate(self.potential_density(grid, phi))
        return EnergyBreakdown(quad, pot)


@dataclass(frozen=True)
class CahnHilliard(AllenCahn):
    """H^-1 gradient flow of the double-well energy (conserved dynamics)."""

    kind = "cahn-hilliard"

    def mobility_symbol(self, grid):
        return self.mobility * grid.laplacian_symbol()


@dataclass(frozen=True)
class MbeNoSlope:
    """Thin-film growth without slope selection.

    The potential part is unbounded from below (logarithmic in the slope),
    which is what makes a generic scalar multiplier solver necessary.
    """

    mobility: float = 1.0
    epsilon: float = 1.0
    dealias: bool = False

    kind = "mbe-no-slope"
    n_fields = 1

    def linear_symbol(self, grid):
        return self.epsilon ** 2 * grid.biharmonic_symbol()

    def mobility_symbol(self, grid):
        return grid.constant_symbol(self.mobility)

    def nonlinear_term(self, grid, phi):
        # Conservative form div f(grad phi), f(v) = v / (1 + |v|^2).
        grads = grid.gradient(phi)
        denom = 1.0 + sum(g * g for g in grads)
        out = grid.divergence([g / denom for g in grads])
        return grid.dealias(out) if self.dealias else out

    def potential_density(self, grid, phi):
        grads = grid.gradient(phi)
        return -0.5 * np.log1p(sum(g * g for g in grads))

    def free_energy(self, grid, phi):
        quad = 0.5 * grid.inner(phi, grid.apply_symbol(phi, self.linear_symbol(grid)))
        pot = grid.integrate(self.potential_density(grid, phi))
        return EnergyBreakdown(quad, pot)


def _pairwise_sigma(sigma):
    s12, s13, s23 = sigma
    return (s12 + s13 - s23, s12 + s23 - s13, s13 + s23 - s12)


@dataclass(frozen=True)
class TernaryCahnHilliard:
    """Three-phase conserved system reduced to two unknowns.

    The third fraction is always reconstructed as ``1 - phi1 - phi2``; the
    free energy and the coupled dynamics are written in the two retained
    fields only.
    """

    mobility: float = 1.0
    epsilon: float = 1.0
    lam: float = 0.0
    sigma: tuple = (1.0, 1.0, 1.0)
    dealias: bool = False

    kind = "ternary-cahn-hilliard"
    n_fields = 2

    def __post_init__(self):
        bad = [l + 1 for l, s in enumerate(self.capillary_coeffs()) if s <= 0.0]
        if bad:
            warnings.warn(
                f"capillary coefficient(s) {bad} are non-positive; the "
                "per-field mobility is not positive definite for those fields",
                RuntimeWarning,
                stacklevel=2,
            )

    def capillary_coeffs(self):
        """Derived coefficients (one per phase) from the surface tensions."""
        return _pairwise_sigma(self.sigma)

    def coupling_matrix(self):
        """Constant 2x2 matrix of the quadratic (gradient) energy."""
        s1, s2, s3 = self.capillary_coeffs()
        scale = 0.75 * self.epsilon ** 2
        return scale * np.array([[s1 + s3, s3], [s3, s2 + s3]])

    def mobility_symbols(self, grid):
        s1, s2, _ = self.capillary_coeffs()
        k2 = grid.laplacian_symbol()
        return (self.mobility / s1) * k2, (self.mobility / s2) * k2

    def third_phase(self, phi):
        return 1.0 - phi[0] - phi[1]

    def _potential_parts(self, phi):
        s1, s2, s3 = self.capillary_coeffs()
        p1, p2 = phi
        u = p1 + p2
        return s1, s2, s3, p1, p2, u

    def potential_density(self, grid, phi):
        s1, s2, s3, p1, p2, u = self._potential_parts(phi)
        f = (0.5 * s1 * p1 ** 2 * (1.0 - p1) ** 2
             + 0.5 * s2 * p2 ** 2 * (1.0 - p2) ** 2
             + 0.5 * s3 * u ** 2 * (1.0 - u) ** 2
             + 3.0 * self.lam * p1 ** 2 * p2 ** 2 * (1.0 - u) ** 2)
        return 12.0 * f

    def nonlinear_term(self, grid, phi):
        s1, s2, s3, p1, p2, u = self._potential_parts(phi)
        common = s3 * u * (1.0 - u) * (1.0 - 2.0 * u)
        lam6 = 6.0 * self.lam
        d1 = (s1 * p1 * (1.0 - p1) * (1.0 - 2.0 * p1) + common
              + lam6 * p1 * p2 ** 2 * (1.0 - u) ** 2
              - lam6 * p1 ** 2 * p2 ** 2 * (1.0 - u))
        d2 = (s2 * p2 * (1.0 - p2) * (1.0 - 2.0 * p2) + common
              + lam6 * p1 ** 2 * p2 * (1.0 - u) ** 2
              - lam6 * p1 ** 2 * p2 ** 2 * (1.0 - u))
        out = (12.0 * d1, 12.0 * d2)
        if self.dealias:
            out = tuple(grid.dealias(v) for v in out)
        return out

    def free_energy(self, grid, phi):
        coupling = self.coupling_matrix()
        k2 = grid.laplacian_symbol()
        lap1 = grid.apply_symbol(phi[0], k2)
        lap2 = grid.apply_symbol(phi[1], k2)
        quad = 0.5 * (
            grid.inner(phi[0], coupling[0, 0] * lap1 + coupling[0, 1] * lap2)
            + grid.inner(phi[1], coupling[1, 0] * lap1 + coupling[1, 1] * lap2))
        pot = grid.integrate(self.potential_density(grid, phi))
        return EnergyBreakdown(quad, pot)


def chemical_potential(model, grid, phi):
    """Variational derivative of the free energy (per field)."""
    if model.n_fields == 1:
        return grid.apply_symbol(phi, model.linear_symbol(grid)) \
            + model.nonlinear_term(grid, phi)
    coupling = model.coupling_matrix()
    k2 = grid.laplacian_symbol()
    lap1 = grid.apply_symbol(phi[0], k2)
    lap2 = grid.apply_symbol(phi[1], k2)
    n1, n2 = model.nonlinear_term(grid, phi)
    return (coupling[0, 0] * lap1 + coupling[0, 1] * lap2 + n1,
            coupling[1, 0] * lap1 + coupling[1, 1] * lap2 + n2)


def variational_consistency_check(model, grid, phi, dphi, h=1e-5):
    """Central-difference check of dE(phi)[dphi] against the chemical potential.

    Returns the absolute mismatch; used by tests to validate that every
    model's nonlinear term really is the variational derivative of its
    potential density.
    """
    mu = chemical_potential(model, grid, phi)
    if model.n_fields == 1:
        e_plus = model.free_energy(grid, phi + h * dphi).total
        e_minus = model.free_energy(grid, phi - h * dphi).total
        pairing = grid.inner(mu, dphi)
    else:
        plus = tuple(p + h * d for p, d in zip(phi, dphi))
        minus = tuple(p - h * d for p, d in zip(phi, dphi))
        e_plus = model.free_energy(grid, plus).total
        e_minus = model.free_energy(grid, minus).total
        pairing = sum(grid.inner(m, d) for m, d in zip(mu, dphi))
    return abs((e_plus - e_minus) / (2.0 * h) - pairing)
