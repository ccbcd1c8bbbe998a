"""Scalar solves for the step-correction multiplier.

Every scheme in :mod:`gradflow.integrators` reduces its per-step nonlinear
work to one scalar problem: a root of a residual function (midpoint and
multistep schemes), a constrained one-dimensional minimization (the
second-order multistep scheme), or a cubic with closed-form roots (the
incompressible-flow scheme). The solvers here are deterministic pure
functions of their inputs.

Root selection: residual equations can have several real roots and the
schemes do not care which one is used as long as the defining identity
holds, so we always return the root closest to the multiplier's "natural"
value (the initial guess: 0 for correction-style multipliers, 1 for
scaling-style ones). The bracket is always scanned so that this choice is
well defined even when Newton wanders.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyFeasibleSetError, NoRootFoundError

ZERO_BRANCH = "zero"
ONE_BRANCH = "one"
SOLVE_BRANCH = "solve"

_SCAN_POINTS = 64
_FEASIBLE_SCAN = 128
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass
class ScalarSolveConfig:
    tol: float = 1e-12
    max_iter: int = 50
    bracket_halfwidth: float = 2.0
    initial_guess: float = 1.0

    def __post_init__(self):
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.bracket_halfwidth <= 0.0:
            raise ValueError("bracket_halfwidth must be positive")

    def with_guess(self, guess):
        return ScalarSolveConfig(self.tol, self.max_iter,
                                 self.bracket_halfwidth, guess)


@dataclass
class MultiplierOutcome:
    eta: float
    branch: str
    iterations: int = 0
    residual: float = 0.0
    objective: float = 0.0
    all_roots: tuple = field(default_factory=tuple)


def _newton(q, guess, cfg):
    """Newton from the guess with central-difference slopes.

    Returns (root, iterations) or (None, iterations spent).
    """
    eta = float(guess)
    value = q(eta)
    if not np.isfinite(value):
        return None, 0
    if abs(value) <= cfg.tol:
        return eta, 0
    wander = 100.0 * cfg.bracket_halfwidth
    for it in range(1, cfg.max_iter + 1):
        h = 1e-7 * (1.0 + abs(eta))
        slope = (q(eta + h) - q(eta - h)) / (2.0 * h)
        if not np.isfinite(slope) or slope == 0.0:
            return None, it
        eta = eta - value / slope
        if not np.isfinite(eta) or abs(eta - guess) > wander:
            return None, it
        value = q(eta)
        if not np.isfinite(value):
            return None, it
        if abs(value) <= cfg.tol:
            return eta, it
    return None, cfg.max_iter


def _refine_bracket(q, lo, hi, flo, fhi, cfg):
    """Illinois-safeguarded root refinement on a sign-change interval.

    Stops at ``|q| <= tol`` or when the bracket shrinks to machine width;
    a machine-width bracket certifies the root location to rounding even
    when the slope there makes the absolute tolerance unreachable.
    """
    if flo == 0.0:
        return lo, 0, 0.0
    if fhi == 0.0:
        return hi, 0, 0.0
    iters = 0
    side = 0
    for _ in range(120):
        denom = fhi - flo
        if denom != 0.0 and np.isfinite(denom):
            mid = hi - fhi * (hi - lo) / denom
        else:
            mid = 0.5 * (lo + hi)
        # keep the iterate safely interior, else fall back to bisection
        span = hi - lo
        if not (lo + 0.01 * span <= mid <= hi - 0.01 * span):
            mid = 0.5 * (lo + hi)
        fmid = q(mid)
        iters += 1
        if not np.isfinite(fmid):
            return None, iters, float("inf")
        if abs(fmid) <= cfg.tol:
            return mid, iters, abs(fmid)
        if (flo < 0.0) != (fmid < 0.0):
            hi, fhi = mid, fmid
            if side == -1:
                flo *= 0.5
            side = -1
        else:
            lo, flo = mid, fmid
            if side == 1:
                fhi *= 0.5
            side = 1
        if hi - lo <= 4.0 * np.finfo(float).eps * (1.0 + abs(lo) + abs(hi)):
            break
    eta = lo if abs(flo) <= abs(fhi) else hi
    return eta, iters, abs(q(eta))


def _scan_with_zoom(q, lo, hi, cfg):
    """Sign-change search with progressive zoom toward the |q| minimum.

    Narrow dips (much thinner than the coarse scan spacing) are common when
    the residual is stiff in eta, so a coarse scan alone is not enough.
    Returns (brackets, near_zero_points, best_point).
    """
    brackets = []
    near_zero = []
    best = None
    window = (lo, hi)
    for _ in range(8):
        xs = np.linspace(window[0], window[1], _SCAN_POINTS)
        vals = np.array([q(x) for x in xs])
        finite = np.isfinite(vals)
        for i in range(len(xs) - 1):
            if not (finite[i] and finite[i + 1]):
                continue
            if vals[i] == 0.0:
                near_zero.append((float(xs[i]), 0.0))
            elif (vals[i] < 0.0) != (vals[i + 1] < 0.0):
                brackets.append((float(xs[i]), float(xs[i + 1]),
                                 float(vals[i]), float(vals[i + 1])))
        if not np.any(finite):
            break
        absvals = np.where(finite, np.abs(vals), np.inf)
        i_min = int(np.argmin(absvals))
        if best is None or absvals[i_min] < best[1]:
            best = (float(xs[i_min]), float(absvals[i_min]))
        if absvals[i_min] <= cfg.tol:
            near_zero.append((float(xs[i_min]), float(absvals[i_min])))
        if brackets:
            break
        spacing = (window[1] - window[0]) / (_SCAN_POINTS - 1)
        half = 3.0 * spacing
        center = float(xs[i_min])
        new_window = (max(lo, center - half), min(hi, center + half))
        if new_window[1] - new_window[0] <= 1e-13 * (1.0 + abs(center)):
            break
        window = new_window
    return brackets, near_zero, best


def solve_scalar(q, cfg):
    """Solve ``q(eta) = 0`` near ``cfg.initial_guess``.

    Newton from the guess, then a zooming sign-change scan over the bracket
    ``[guess - w, guess + w]``. A root is accepted when ``|q| <= tol`` or
    when a sign change has been pinned to a machine-width interval (the
    achieved residual is reported either way). Among all roots found, the
    one closest to the guess is returned; raises
    :class:`~gradflow.errors.NoRootFoundError` when nothing qualifies.

    Returns
    -------
    (root, iterations, all_roots)
    """
    guess = float(cfg.initial_guess)
    candidates = []

    root, newton_iters = _newton(q, guess, cfg)
    if root is not None:
        candidates.append((root, newton_iters))

    lo = guess - cfg.bracket_halfwidth
    hi = guess + cfg.bracket_halfwidth
    brackets, near_zero, best = _scan_with_zoom(q, lo, hi, cfg)
    for x, _ in near_zero:
        candidates.append((x, 0))
    for blo, bhi, flo, fhi in brackets:
        r, it, _res = _refine_bracket(q, blo, bhi, flo, fhi, cfg)
        if r is not None:
            candidates.append((r, it))

    if not candidates:
        raise NoRootFoundError(
            "no root of the multiplier equation in the bracket "
            f"[{lo:g}, {hi:g}]; consider reducing dt",
            best_eta=None if best is None else best[0],
            best_residual=None if best is None else best[1])

    candidates.sort(key=lambda c: (abs(c[0] - guess), c[0]))
    roots = tuple(sorted({round(c[0], 12) for c in candidates}))
    root, iters = candidates[0]
    return root, iters, roots


def _lincomb(base, eta, direction):
    if isinstance(base, tuple):
        return tuple(b + eta * d for b, d in zip(base, direction))
    return base + eta * direction


def _diff(left, right):
    if isinstance(left, tuple):
        return tuple(a - b for a, b in zip(left, right))
    return left - right


def _pair(grid, left, right):
    if isinstance(left, tuple):
        return sum(grid.inner(a, b) for a, b in zip(left, right))
    return grid.inner(left, right)


def _potential_difference(model, grid, phi, dens_ref):
    dens = model.potential_density(grid, phi)
    return grid.integrate(dens - dens_ref)


def cn_residual(model, grid, phi_n, phi_bar, q_corr, fprime_star):
    """Residual of the midpoint correction identity as a function of eta.

    R(eta) = (F(phi_bar + eta q) - F(phi_n), 1)
             - (1 + eta) (F'(phi_star), phi_bar + eta q - phi_n)
    """
    dens_n = model.potential_density(grid, phi_n)
    pair_base = _pair(grid, fprime_star, _diff(phi_bar, phi_n))
    pair_q = _pair(grid, fprime_star, q_corr)

    def residual(eta):
        phi = _lincomb(phi_bar, eta, q_corr)
        pot = _potential_difference(model, grid, phi, dens_ref=dens_n)
        return pot - (1.0 + eta) * (pair_base + eta * pair_q)

    return residual


def solve_cn_residual(model, grid, phi_n, phi_bar, q_corr, fprime_star, cfg):
    """Multiplier for the midpoint combined scheme (natural value 0)."""
    residual = cn_residual(model, grid, phi_n, phi_bar, q_corr, fprime_star)
    eta, iters, roots = solve_scalar(residual, cfg.with_guess(0.0))
    return MultiplierOutcome(eta, SOLVE_BRANCH, iters, abs(residual(eta)),
                             abs(residual(eta)), roots)


def classic_cn_residual(model, grid, phi_n, phi_one, q_corr, fprime_star):
    """Residual of the all-steps multiplier identity (natural value 1).

    R(eta) = (F(phi_one + eta q) - F(phi_n), 1)
             - eta (F'(phi_star), phi_one + eta q - phi_n)
    """
    dens_n = model.potential_density(grid, phi_n)
    pair_base = _pair(grid, fprime_star, _diff(phi_one, phi_n))
    pair_q = _pair(grid, fprime_star, q_corr)

    def residual(eta):
        phi = _lincomb(phi_one, eta, q_corr)
        pot = _potential_difference(model, grid, phi, dens_ref=dens_n)
        return pot - eta * (pair_base + eta * pair_q)

    return residual


@dataclass(frozen=True)
class QuadraticEnergyCoeffs:
    """Coefficients of the solve-branch energy surrogate a eta^2 + b eta + c."""

    a: float
    b: float
    c: float

    def value(self, eta):
        return (self.a * eta + self.b) * eta + self.c


def bdf2_energy_coeffs(model, grid, phi_n, phi_nm1, phi_bar, q_corr, phi_hat):
    """Quadratic-in-eta surrogate of the next energy for the 2-step scheme.

    The potential part of E(phi_bar + eta q) is replaced via the multiplier
    identity, which turns the energy into an exact quadratic in eta.
    """
    lsym = model.linear_symbol(grid)
    l_q = grid.apply_symbol(q_corr, lsym)
    l_bar = grid.apply_symbol(phi_bar, lsym)
    fp = model.nonlinear_term(grid, phi_hat)
    combo = 3.0 * phi_bar - 4.0 * phi_n + phi_nm1
    dens_n = model.potential_density(grid, phi_n)
    dens_nm1 = model.potential_density(grid, phi_nm1)
    hist_pot = grid.integrate(4.0 * dens_n - dens_nm1)

    a = 0.5 * grid.inner(l_q, q_corr) + grid.inner(fp, q_corr)
    b = grid.inner(l_bar, q_corr) + grid.inner(fp, 3.0 * q_corr + combo) / 3.0
    c = (0.5 * grid.inner(l_bar, phi_bar) + hist_pot / 3.0
         + grid.inner(fp, combo) / 3.0)
    return QuadraticEnergyCoeffs(a, b, c)


def bdf2_q_function(model, grid, phi_n, phi_nm1, phi_bar, q_corr, phi_hat):
    """|Q| objective of the 2-step constrained choice of eta."""
    fp = model.nonlinear_term(grid, phi_hat)
    combo = 3.0 * phi_bar - 4.0 * phi_n + phi_nm1
    pair_combo = grid.inner(fp, combo)
    pair_q = grid.inner(fp, q_corr)
    dens_n = model.potential_density(grid, phi_n)
    dens_nm1 = model.potential_density(grid, phi_nm1)
    hist_pot = grid.integrate(4.0 * dens_n - dens_nm1)

    def qfun(eta):
        dens = model.potential_density(grid, phi_bar + eta * q_corr)
        pot3 = 3.0 * grid.integrate(dens)
        return pot3 - hist_pot - (1.0 + eta) * (pair_combo + 3.0 * eta * pair_q)

    return qfun


def feasible_intervals(coeffs, e_prev, slack=0.0):
    """Solution set of ``a eta^2 + b eta + c <= e_prev`` as closed intervals.

    Unbounded pieces use +-inf endpoints. Raises EmptyFeasibleSetError when
    the set is empty.
    """
    a, b = coeffs.a, coeffs.b
    c = coeffs.c - e_prev - slack
    tiny = 1e-14 * (1.0 + abs(coeffs.a) + abs(coeffs.b) + abs(coeffs.c)
                    + abs(e_prev))
    if abs(a) <= tiny:
        if abs(b) <= tiny:
            if c <= 0.0:
                return [(-np.inf, np.inf)]
            raise EmptyFeasibleSetError(
                "constant energy surrogate exceeds the previous energy")
        bound = -c / b
        return [(-np.inf, bound)] if b > 0.0 else [(bound, np.inf)]
    disc = b * b - 4.0 * a * c
    if a > 0.0:
        if disc < 0.0:
            raise EmptyFeasibleSetError(
                "energy surrogate cannot be brought below the previous energy")
        root = np.sqrt(disc)
        return [((-b - root) / (2.0 * a), (-b + root) / (2.0 * a))]
    if disc < 0.0:
        return [(-np.inf, np.inf)]
    root = np.sqrt(disc)
    left = (-b + root) / (2.0 * a)
    right = (-b - root) / (2.0 * a)
    return [(-np.inf, left), (right, np.inf)]


def _golden_minimize(f, lo, hi, iters=90):
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
        if b - a <= 1e-13 * (1.0 + abs(a) + abs(b)):
            break
    pts = [(a, f(a)), (x1, f1), (x2, f2), (b, f(b))]
    return min(pts, key=lambda p: (p[1], abs(p[0])))


def solve_bdf2_constrained(qfun, coeffs, e_prev, cfg):
    """Pick the multiplier minimizing |Q| subject to the energy constraint.

    A root of Q inside the feasible set is globally optimal and is taken
    when one exists (nearest to 0 among several); otherwise |Q| is minimized
    over each feasible interval with a scan-seeded golden-section search.
    Unbounded rays are clipped to ``|eta| <= bracket_halfwidth`` for the
    scan, keeping their finite endpoints as candidates.

    The constraint bounds only the surrogate quadratic; the true next energy
    is ``surrogate + Q(eta)/3``, so when the minimizer leaves |Q| away from
    zero the choice is additionally gated on the true energy and the solve
    fails (EmptyFeasibleSetError) if no non-increasing choice exists.
    """
    intervals = feasible_intervals(coeffs, e_prev)
    w = cfg.bracket_halfwidth
    tol_feas = 1e-12 * (1.0 + abs(e_prev))
    gate_tol = 1e-10 * (1.0 + abs(e_prev))

    def true_energy(eta):
        return coeffs.value(eta) + qfun(eta) / 3.0

    def finish(eta, iters, objective, roots=()):
        excess = max(0.0, coeffs.value(eta) - e_prev)
        if true_energy(eta) > e_prev + gate_tol:
            raise EmptyFeasibleSetError(
                "energy cannot be made non-increasing with this correction "
                "direction (|Q| minimizer raises the true energy)")
        return MultiplierOutcome(eta, SOLVE_BRANCH, iters, excess, objective,
                                 roots)

    def clip(interval):
        lo = max(interval[0], -w)
        hi = min(interval[1], w)
        finite = [v for v in interval if np.isfinite(v)]
        return (lo, hi), finite

    # roots of Q restricted to the feasible set
    root_candidates = []
    total_iters = 0
    try:
        root, iters, roots = solve_scalar(qfun, cfg.with_guess(0.0))
        total_iters += iters
        for r in set(roots) | {root}:
            if coeffs.value(r) <= e_prev + tol_feas:
                root_candidates.append(r)
    except NoRootFoundError:
        pass
    if root_candidates:
        eta = min(root_candidates, key=lambda r: (abs(r), r))
        return finish(eta, total_iters, abs(qfun(eta)),
                      tuple(sorted(root_candidates)))

    # no feasible root: minimize |Q| over the feasible intervals
    best = None
    for interval in intervals:
        (lo, hi), finite_ends = clip(interval)
        candidates = [(v, abs(qfun(v))) for v in finite_ends]
        if lo < hi:
            xs = np.linspace(lo, hi, _FEASIBLE_SCAN)
            vals = np.array([abs(qfun(x)) for x in xs])
            i = int(np.argmin(vals))
            a = xs[max(i - 1, 0)]
            b = xs[min(i + 1, len(xs) - 1)]
            x, fx = _golden_minimize(lambda t: abs(qfun(t)), a, b)
            total_iters += _FEASIBLE_SCAN
            candidates.append((x, fx))
            candidates.append((float(xs[i]), float(vals[i])))
        for x, fx in candidates:
            if best is None or (fx, abs(x)) < (best[1], abs(best[0])):
                best = (x, fx)
    if best is None:
        raise EmptyFeasibleSetError("feasible set reduced to nothing usable")
    return finish(best[0], total_iters, best[1])


def bdfk_scale_factor(eta, k):
    """Amplitude factor 1 - (1 - eta)^(k+1) of the k-step update."""
    return 1.0 - (1.0 - eta) ** (k + 1)


def solve_bdfk_residual(energy_fn, phi_bar, e_prev, dissipation, k, cfg):
    """Multiplier for the k-step scheme (natural value 1).

    Solves E(s(eta) phi_bar) - e_prev + eta^2 D = 0 where s is the scaling
    factor and D >= 0 is the discrete dissipation rate of the baseline step.
    """
    if dissipation < 0.0:
        raise ValueError("dissipation must be non-negative")

    def residual(eta):
        scale = bdfk_scale_factor(eta, k)
        if isinstance(phi_bar, tuple):
            scaled = tuple(scale * p for p in phi_bar)
        else:
            scaled = scale * phi_bar
        return energy_fn(scaled) - e_prev + eta * eta * dissipation

    eta, iters, roots = solve_scalar(residual, cfg.with_guess(1.0))
    res = abs(residual(eta))
    return MultiplierOutcome(eta, SOLVE_BRANCH, iters, res, res, roots)


def ns_eta_coefficients(grid, u_bar, u2, u_n, nu, dt):
    """Cubic coefficients (ascending) of the kinetic-energy identity residual."""
    def vec_inner(a, b):
        return sum(grid.inner(ai, bi) for ai, bi in zip(a, b))

    def grad_inner(a, b):
        ga = [grid.gradient(c) for c in a]
        gb = [grid.gradient(c) for c in b]
        return sum(grid.inner(ga[i][d], gb[i][d])
                   for i in range(len(a)) for d in range(grid.dims))

    a0 = vec_inner(u_bar, u_bar)
    a1 = vec_inner(u_bar, u2)
    a2 = vec_inner(u2, u2)
    g0 = grad_inner(u_bar, u_bar)
    g1 = grad_inner(u_bar, u2)
    g2 = grad_inner(u2, u2)
    un2 = vec_inner(u_n, u_n)
    half_dt = 0.5 / dt
    c0 = (a0 - un2) * half_dt + nu * g0
    c1 = 2.0 * a1 * half_dt + nu * (g0 + 2.0 * g1)
    c2 = a2 * half_dt + nu * (g2 + 2.0 * g1)
    c3 = nu * g2
    return np.array([c0, c1, c2, c3])


def solve_ns_eta(grid, u_bar, u2, u_n, nu, dt, cfg, require_dissipative=True):
    """Closed-form multiplier for the incompressible-flow scheme.

    The residual is an explicit cubic; the real root of smallest |eta| is
    returned. With ``require_dissipative`` (the step default) roots with
    ``1 + eta < 0`` are skipped when a dissipative alternative exists, since
    they would flip the sign of the enforced energy identity.
    """
    coeffs = ns_eta_coefficients(grid, u_bar, u2, u_n, nu, dt)
    scale = float(np.max(np.abs(coeffs)))
    if not np.isfinite(scale):
        raise NoRootFoundError("non-finite inner products in the cubic")
    if scale == 0.0:
        return MultiplierOutcome(0.0, SOLVE_BRANCH, 0, 0.0, 0.0, (0.0,))

    def residual(eta):
        return ((coeffs[3] * eta + coeffs[2]) * eta + coeffs[1]) * eta + coeffs[0]

    trimmed = np.trim_zeros(coeffs / scale, "b")
    if trimmed.size <= 1:
        raise NoRootFoundError("degenerate constant nonzero residual")
    roots = np.roots(trimmed[::-1])
    real = [float(r.real) for r in roots
            if abs(r.imag) <= 1e-9 * (1.0 + abs(r.real))]
    if not real:
        raise NoRootFoundError("cubic has no real root; inputs are suspect")

    # polish each root on the exact cubic
    polished = []
    for r in real:
        eta = r
        for _ in range(3):
            deriv = (3.0 * coeffs[3] * eta + 2.0 * coeffs[2]) * eta + coeffs[1]
            if deriv == 0.0:
                break
            eta = eta - residual(eta) / deriv
        polished.append(eta)

    polished.sort(key=lambda r: (abs(r), r))
    eta = polished[0]
    if require_dissipative and 1.0 + eta < 0.0:
        ok = [r for r in polished if 1.0 + r >= -1e-12]
        if ok:
            eta = ok[0]
    res = abs(residual(eta))
    return MultiplierOutcome(eta, SOLVE_BRANCH, 0, res, res,
                             tuple(sorted(polished)))
