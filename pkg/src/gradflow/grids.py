"""Periodic uniform grids and Fourier collocation operators.

Fields are plain real ``numpy`` arrays of shape ``grid.shape`` (row-major,
dimension 0 outermost); their spectral counterparts are the complex arrays
produced by :meth:`PeriodicGrid.forward`. All operators with a diagonal
Fourier representation are expressed as per-mode real multiplier arrays
("symbols"), e.g. ``|k|^2`` for the negative Laplacian.
"""

from __future__ import annotations

import numpy as np

from .errors import SingularOperatorError

TWO_PI = 2.0 * np.pi


class PeriodicGrid:
    """Uniform tensor-product grid on a periodic box.

    Parameters
    ----------
    n : int or sequence of int
        Sample count per dimension.
    length : float or sequence of float
        Physical box length per dimension.
    """

    def __init__(self, n, length):
        n = (int(n),) if np.isscalar(n) else tuple(int(v) for v in n)
        length = (float(length),) * len(n) if np.isscalar(length) else tuple(
            float(v) for v in length)
        if len(length) != len(n):
            raise ValueError("n and length must have matching dimensions")
        if len(n) not in (1, 2, 3):
            raise ValueError("only 1, 2 or 3 dimensions are supported")
        if any(v < 2 for v in n):
            raise ValueError("need at least two points per dimension")
        if any(v <= 0.0 for v in length):
            raise ValueError("box lengths must be positive")
        self.n = n
        self.length = length
        self.dims = len(n)
        self.shape = n
        self.spacing = tuple(L / m for L, m in zip(length, n))
        self.cell_volume = float(np.prod(self.spacing))
        self.volume = float(np.prod(length))
        self.size = int(np.prod(n))

        # Signed mode aliases j-hat in (-n/2, n/2]; for even n the Nyquist
        # index n/2 carries the positive alias.
        self._alias = []
        self._wavenumbers = []
        self._deriv_wavenumbers = []
        for d, (m, L) in enumerate(zip(n, length)):
            j = np.arange(m)
            alias = np.where(j <= m // 2, j, j - m)
            k = (TWO_PI / L) * alias
            dk = k.copy()
            if m % 2 == 0:
                dk[m // 2] = 0.0  # odd derivatives drop the Nyquist mode
            self._alias.append(alias)
            self._wavenumbers.append(k)
            self._deriv_wavenumbers.append(dk)

        self._k2 = np.zeros(self.shape)
        for d in range(self.dims):
            self._k2 = self._k2 + self._broadcast(self._wavenumbers[d], d) ** 2
        mask = np.ones(self.shape, dtype=bool)
        for d, (alias, m) in enumerate(zip(self._alias, n)):
            mask &= self._broadcast(np.abs(alias) <= m // 3, d)
        self._dealias_mask = mask

    def _broadcast(self, arr1d, d):
        shape = [1] * self.dims
        shape[d] = self.n[d]
        return arr1d.reshape(shape)

    # -- geometry -----------------------------------------------------------

    def axes(self):
        """Coordinate arrays per dimension (cell left edges)."""
        return [np.arange(m) * h for m, h in zip(self.n, self.spacing)]

    def meshes(self):
        """Full coordinate meshes, ``indexing='ij'``."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def wavenumbers(self, d):
        return self._wavenumbers[d].copy()

    # -- symbols ------------------------------------------------------------

    def laplacian_symbol(self):
        """Symbol of -Laplace: ``|k|^2`` (exactly 0 at the zero mode)."""
        return self._k2.copy()

    def biharmonic_symbol(self):
        """Symbol of Laplace^2: ``|k|^4``."""
        return self._k2 ** 2

    def constant_symbol(self, value):
        return np.full(self.shape, float(value))

    # -- transforms ---------------------------------------------------------

    def _check(self, f):
        f = np.asarray(f)
        if f.shape != self.shape:
            raise ValueError(
                f"field shape {f.shape} does not match grid shape {self.shape}")
        return f

    def forward(self, f):
        """Real samples -> complex Fourier coefficients (unnormalized)."""
        return np.fft.fftn(self._check(f))

    def backward(self, fhat):
        """Fourier coefficients -> real samples."""
        fhat = np.asarray(fhat)
        if fhat.shape != self.shape:
            raise ValueError(
                f"coefficient shape {fhat.shape} does not match grid {self.shape}")
        return np.fft.ifftn(fhat).real

    def apply_symbol(self, f, symbol):
        """Apply a diagonal-in-Fourier operator to a real field."""
        symbol = self._check(symbol)
        return self.backward(symbol * self.forward(f))

    def dealias(self, f):
        """2/3-rule truncation of a real field."""
        return self.backward(self.forward(f) * self._dealias_mask)

    # -- inner products -----------------------------------------------------

    def integrate(self, f):
        """Quadrature of a sample array: uniform sum times cell volume."""
        return float(np.sum(self._check(f))) * self.cell_volume

    def inner(self, f, g):
        f = self._check(f)
        g = self._check(g)
        return float(np.sum(f * g)) * self.cell_volume

    def l2_norm(self, f):
        return float(np.sqrt(max(self.inner(f, f), 0.0)))

    def h1_seminorm(self, f):
        """L2 norm of the spectral gradient."""
        total = 0.0
        for g in self.gradient(f):
            total += self.inner(g, g)
        return float(np.sqrt(max(total, 0.0)))

    def mean(self, f):
        return self.integrate(f) / self.volume

    # -- differential operators ----------------------------------------------

    def gradient(self, f):
        """Spectral gradient; Nyquist modes of each derivative are zeroed."""
        fhat = self.forward(f)
        out = []
        for d in range(self.dims):
            kd = self._broadcast(self._deriv_wavenumbers[d], d)
            out.append(self.backward(1j * kd * fhat))
        return out

    def divergence(self, components):
        if len(components) != self.dims:
            raise ValueError("component count does not match grid dimension")
        total = np.zeros(self.shape)
        for d, v in enumerate(components):
            kd = self._broadcast(self._deriv_wavenumbers[d], d)
            total += self.backward(1j * kd * self.forward(v))
        return total

    def leray_project(self, components):
        """Project a vector field onto divergence-free fields.

        Returns ``v - grad(inv_laplace(div v))`` with the zero mode of the
        removed potential set to 0; idempotent to rounding.
        """
        if len(components) != self.dims:
            raise ValueError("component count does not match grid dimension")
        hats = [self.forward(v) for v in components]
        kvecs = [self._broadcast(self._deriv_wavenumbers[d], d)
                 for d in range(self.dims)]
        k2 = sum(k * k for k in kvecs)
        div_hat = sum(1j * k * h for k, h in zip(kvecs, hats))
        # potential part: laplace psi = div v, so psi-hat = div-hat / (-|k|^2)
        with np.errstate(divide="ignore", invalid="ignore"):
            psi_hat = np.where(k2 > 0.0, -div_hat / k2, 0.0)
        return [self.backward(h - 1j * k * psi_hat) for h, k in zip(hats, kvecs)]

    def solve_poisson(self, rhs):
        """Solve ``laplace u = rhs`` with zero-mean ``u`` (derivative modes)."""
        rhat = self.forward(rhs)
        kvecs = [self._broadcast(self._deriv_wavenumbers[d], d)
                 for d in range(self.dims)]
        k2 = sum(k * k for k in kvecs)
        with np.errstate(divide="ignore", invalid="ignore"):
            uhat = np.where(k2 > 0.0, -rhat / k2, 0.0)
        return self.backward(uhat)

    # -- per-mode linear solves -----------------------------------------------

    def solve_shifted(self, alpha, c, symbol, rhs):
        """Solve ``(alpha I + c S) x = rhs`` for diagonal symbol S."""
        symbol = self._check(symbol)
        denom = alpha + c * symbol
        if np.any(denom <= 0.0):
            raise SingularOperatorError(
                "shifted operator has a non-positive mode; cannot invert")
        return self.backward(self.forward(rhs) / denom)

    def solve_block2(self, alpha, c, coupling, symbol, rhs_pair):
        """Solve the per-mode 2x2 system ``(alpha I + c s[m] M) x = rhs``.

        ``coupling`` is the constant 2x2 matrix M; the off-diagonal blocks act
        between the two rhs components.
        """
        coupling = np.asarray(coupling, dtype=float)
        if coupling.shape != (2, 2):
            raise ValueError("coupling matrix must be 2x2")
        symbol = self._check(symbol)
        r1 = self.forward(rhs_pair[0])
        r2 = self.forward(rhs_pair[1])
        cs = c * symbol
        a11 = alpha + cs * coupling[0, 0]
        a12 = cs * coupling[0, 1]
        a21 = cs * coupling[1, 0]
        a22 = alpha + cs * coupling[1, 1]
        det = a11 * a22 - a12 * a21
        if np.any(np.abs(det) < np.finfo(float).tiny):
            raise SingularOperatorError("2x2 block is singular at some mode")
        x1 = (a22 * r1 - a12 * r2) / det
        x2 = (a11 * r2 - a21 * r1) / det
        return self.backward(x1), self.backward(x2)
