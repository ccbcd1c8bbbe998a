import numpy as np
import pytest

from gradflow import (AllenCahn, EmptyFeasibleSetError, NoRootFoundError,
                      PeriodicGrid, ScalarSolveConfig, bdf2_energy_coeffs,
                      bdf2_q_function, feasible_intervals,
                      solve_bdf2_constrained, solve_bdfk_residual,
                      solve_cn_residual, solve_ns_eta, solve_scalar)
from gradflow.integrators import (bdf_baseline, bdf_correction, cn_baseline,
                                  cn_correction)
from gradflow.multiplier import QuadraticEnergyCoeffs, cn_residual

TWO_PI = 2.0 * np.pi


def scan_roots(fn, lo, hi, step=1e-6, chunk=200_000):
    """Brute-force root localization: sign changes on a uniform grid,
    linearly interpolated. Independent of the production solver."""
    roots = []
    n = int(round((hi - lo) / step)) + 1
    start = 0
    prev_x = prev_v = None
    while start < n:
        stop = min(start + chunk, n)
        xs = lo + step * np.arange(start, stop)
        vals = np.array([fn(x) for x in xs]) if not _vectorized(fn) else fn(xs)
        if prev_x is not None:
            xs = np.concatenate(([prev_x], xs))
            vals = np.concatenate(([prev_v], vals))
        sign = np.sign(vals)
        flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
        for i in flips:
            x0, x1 = xs[i], xs[i + 1]
            v0, v1 = vals[i], vals[i + 1]
            roots.append(x0 - v0 * (x1 - x0) / (v1 - v0))
        exact = np.nonzero(vals == 0.0)[0]
        roots.extend(float(xs[i]) for i in exact)
        prev_x, prev_v = xs[-1], vals[-1]
        start = stop
    return sorted(set(roots))


def _vectorized(fn):
    return getattr(fn, "vectorized", False)


class TestScalarSolve:
    def test_linear(self):
        root, iters, _ = solve_scalar(lambda e: e, ScalarSolveConfig(
            initial_guess=1.0))
        assert root == pytest.approx(0.0, abs=1e-12)

    def test_quadratic_from_half(self):
        root, _, _ = solve_scalar(lambda e: e * e - 1.0, ScalarSolveConfig(
            initial_guess=0.5))
        assert root == pytest.approx(1.0, abs=1e-10)

    def test_no_real_root(self):
        with pytest.raises(NoRootFoundError):
            solve_scalar(lambda e: e * e + 1.0, ScalarSolveConfig(
                initial_guess=0.0))

    def test_closest_root_to_guess_wins(self):
        def q(e):
            return (e - 0.1) * (e - 1.8)

        near_zero, _, roots = solve_scalar(q, ScalarSolveConfig(
            initial_guess=0.0))
        assert near_zero == pytest.approx(0.1, abs=1e-9)
        near_one, _, _ = solve_scalar(q, ScalarSolveConfig(initial_guess=1.0))
        assert near_one == pytest.approx(1.8, abs=1e-9)
        assert len(roots) == 2

    def test_narrow_dip_found_by_zoom(self):
        # sign change confined to a window ~1e-4 wide, invisible to a
        # single coarse scan
        def q(e):
            return 1e8 * (e + 1.0) ** 2 - 1.0

        root, _, _ = solve_scalar(q, ScalarSolveConfig(initial_guess=0.0))
        assert root == pytest.approx(-1.0 + 1e-4, abs=1e-9)

    def test_deterministic(self):
        def q(e):
            return np.cos(3 * e) - 0.2 * e

        cfg = ScalarSolveConfig(initial_guess=0.3)
        first = solve_scalar(q, cfg)
        second = solve_scalar(q, cfg)
        assert first == second

    def test_guess_already_root(self):
        root, iters, _ = solve_scalar(lambda e: 0.0, ScalarSolveConfig(
            initial_guess=1.0))
        assert root == 1.0 and iters == 0

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ScalarSolveConfig(tol=0.0)
        with pytest.raises(ValueError):
            ScalarSolveConfig(max_iter=0)
        with pytest.raises(ValueError):
            ScalarSolveConfig(bracket_halfwidth=-1.0)


def single_mode_midpoint_instance(n=4, dt=0.05, eps=0.5, amp=0.4):
    """A small double-well instance of the midpoint correction residual."""
    grid = PeriodicGrid((n, n), (TWO_PI, TWO_PI))
    model = AllenCahn(mobility=1.0, epsilon=eps)
    x, _ = grid.meshes()
    phi_nm1 = amp * np.cos(x)
    phi_n = 0.9 * amp * np.cos(x)
    star = 1.5 * phi_n - 0.5 * phi_nm1
    gsym = model.mobility_symbol(grid)
    lsym = model.linear_symbol(grid)
    fp = model.nonlinear_term(grid, star)
    phi_bar = cn_baseline(grid, gsym, lsym, dt, phi_n, fprime=fp)
    q_corr = cn_correction(grid, gsym, lsym, dt, fp)
    return grid, model, phi_n, phi_bar, q_corr, fp


class TestMidpointResidual:
    def test_degenerate_correction(self):
        grid = PeriodicGrid((8, 8), (TWO_PI, TWO_PI))
        model = AllenCahn()
        phi = np.full(grid.shape, 0.3)
        zero = np.zeros(grid.shape)
        out = solve_cn_residual(model, grid, phi, phi, zero, zero,
                                ScalarSolveConfig())
        assert out.eta == 0.0
        assert out.residual == 0.0

    def test_root_matches_brute_force_scan(self):
        grid, model, phi_n, phi_bar, q_corr, fp = \
            single_mode_midpoint_instance()
        out = solve_cn_residual(model, grid, phi_n, phi_bar, q_corr, fp,
                                ScalarSolveConfig())
        roots = scan_roots(_vec_cn_residual(grid, model, phi_n, phi_bar,
                                            q_corr, fp), -2.0, 2.0)
        assert roots, "oracle found no root on the instance"
        nearest = min(roots, key=lambda r: (abs(r), r))
        assert out.eta == pytest.approx(nearest, abs=1e-5)
        # vectorized oracle agrees with the scalar residual definition
        residual = cn_residual(model, grid, phi_n, phi_bar, q_corr, fp)
        vec = _vec_cn_residual(grid, model, phi_n, phi_bar, q_corr, fp)
        for eta in (-1.5, -0.3, 0.0, 0.8):
            assert vec(np.array([eta]))[0] == pytest.approx(residual(eta),
                                                            rel=1e-12,
                                                            abs=1e-12)

    def test_root_satisfies_expanded_polynomial(self):
        # double-well residual is a quartic in eta; expand its coefficients
        # from moment integrals and compare the roots
        grid, model, phi_n, phi_bar, q_corr, fp = \
            single_mode_midpoint_instance()
        eps2 = model.epsilon ** 2
        u = phi_bar ** 2 - 1.0
        v = 2.0 * phi_bar * q_corr
        w = q_corr ** 2
        quartic = np.array([
            grid.integrate(u * u),
            grid.integrate(2 * u * v),
            grid.integrate(v * v + 2 * u * w),
            grid.integrate(2 * v * w),
            grid.integrate(w * w),
        ]) / (4.0 * eps2)
        const = grid.integrate((phi_n ** 2 - 1.0) ** 2) / (4.0 * eps2)
        pair0 = grid.inner(fp, phi_bar - phi_n)
        pair1 = grid.inner(fp, q_corr)
        poly = quartic.copy()
        poly[0] += -const - pair0
        poly[1] += -(pair0 + pair1)
        poly[2] += -pair1
        out = solve_cn_residual(model, grid, phi_n, phi_bar, q_corr, fp,
                                ScalarSolveConfig())
        value = np.polyval(poly[::-1], out.eta)
        assert abs(value) <= 1e-10 * (1 + np.max(np.abs(poly)))


def small_two_step_instance(n=8, dt=0.02, eps=0.6, seed=0, amplitude=0.3):
    grid = PeriodicGrid((n, n), (TWO_PI, TWO_PI))
    model = AllenCahn(mobility=1.0, epsilon=eps)
    rng = np.random.default_rng(seed)
    phi_nm1 = amplitude * rng.standard_normal(grid.shape)
    phi_n = amplitude * rng.standard_normal(grid.shape)
    phi_hat = 2.0 * phi_n - phi_nm1
    gsym = model.mobility_symbol(grid)
    lsym = model.linear_symbol(grid)
    fp = model.nonlinear_term(grid, phi_hat)
    combo = 2.0 * phi_n - 0.5 * phi_nm1
    phi_bar = bdf_baseline(grid, gsym, lsym, dt, 1.5, combo, fp)
    q_corr = bdf_correction(grid, gsym, lsym, dt, 1.5, fp)
    return grid, model, phi_n, phi_nm1, phi_bar, q_corr, phi_hat


class TestTwoStepEnergyCoeffs:
    def test_zero_correction_collapses(self):
        grid, model, phi_n, phi_nm1, phi_bar, _, phi_hat = \
            small_two_step_instance()
        zero = np.zeros(grid.shape)
        coeffs = bdf2_energy_coeffs(model, grid, phi_n, phi_nm1, phi_bar,
                                    zero, phi_hat)
        fp = model.nonlinear_term(grid, phi_hat)
        combo = 3.0 * phi_bar - 4.0 * phi_n + phi_nm1
        assert coeffs.a == 0.0
        assert coeffs.b == pytest.approx(grid.inner(fp, combo) / 3.0,
                                         rel=1e-12)

    def test_stationary_state(self):
        grid = PeriodicGrid((8, 8), (TWO_PI, TWO_PI))
        model = AllenCahn(epsilon=1.0)
        one = np.ones(grid.shape)
        rng = np.random.default_rng(1)
        q = 0.1 * rng.standard_normal(grid.shape)
        coeffs = bdf2_energy_coeffs(model, grid, one, one, one, q, one)
        lsym = model.linear_symbol(grid)
        assert coeffs.a == pytest.approx(
            0.5 * grid.inner(grid.apply_symbol(q, lsym), q), rel=1e-12)
        assert coeffs.c == pytest.approx(model.free_energy(grid, one).total,
                                         abs=1e-12)

    def test_surrogate_evaluation_identity(self):
        # direct quadrature of the surrogate energy at eta in {-1, 0, 1}
        grid, model, phi_n, phi_nm1, phi_bar, q_corr, phi_hat = \
            small_two_step_instance()
        coeffs = bdf2_energy_coeffs(model, grid, phi_n, phi_nm1, phi_bar,
                                    q_corr, phi_hat)
        fp = model.nonlinear_term(grid, phi_hat)
        lsym = model.linear_symbol(grid)
        hist_pot = grid.integrate(
            4.0 * model.potential_density(grid, phi_n)
            - model.potential_density(grid, phi_nm1))
        for eta in (-1.0, 0.0, 1.0):
            phi = phi_bar + eta * q_corr
            quad = 0.5 * grid.inner(grid.apply_symbol(phi, lsym), phi)
            surrogate_pot = hist_pot / 3.0 + (1.0 + eta) * grid.inner(
                fp, 3.0 * phi - 4.0 * phi_n + phi_nm1) / 3.0
            assert quad + surrogate_pot == pytest.approx(
                coeffs.value(eta), rel=1e-11, abs=1e-11)

    def test_true_energy_identity(self):
        # E(phi_bar + eta q) == surrogate(eta) + Q(eta) / 3 for every eta
        grid, model, phi_n, phi_nm1, phi_bar, q_corr, phi_hat = \
            small_two_step_instance(seed=2)
        coeffs = bdf2_energy_coeffs(model, grid, phi_n, phi_nm1, phi_bar,
                                    q_corr, phi_hat)
        qfun = bdf2_q_function(model, grid, phi_n, phi_nm1, phi_bar, q_corr,
                               phi_hat)
        for eta in (-1.3, -0.2, 0.0, 0.4, 1.7):
            direct = model.free_energy(grid, phi_bar + eta * q_corr).total
            assert direct == pytest.approx(
                coeffs.value(eta) + qfun(eta) / 3.0, rel=1e-11, abs=1e-11)


class TestFeasibleIntervals:
    def test_upward_interval(self):
        iv = feasible_intervals(QuadraticEnergyCoeffs(1.0, 0.0, 0.0), 4.0)
        assert iv == [(-2.0, 2.0)]

    def test_upward_empty(self):
        with pytest.raises(EmptyFeasibleSetError):
            feasible_intervals(QuadraticEnergyCoeffs(1.0, 0.0, 5.0), 4.0)

    def test_touching_point(self):
        iv = feasible_intervals(QuadraticEnergyCoeffs(1.0, 0.0, 4.0), 4.0)
        assert iv[0][0] == pytest.approx(0.0, abs=1e-12)
        assert iv[0][1] == pytest.approx(0.0, abs=1e-12)

    def test_downward_everything(self):
        iv = feasible_intervals(QuadraticEnergyCoeffs(-1.0, 0.0, 1.0), 4.0)
        assert iv == [(-np.inf, np.inf)]

    def test_downward_two_rays(self):
        iv = feasible_intervals(QuadraticEnergyCoeffs(-1.0, 0.0, 5.0), 4.0)
        assert len(iv) == 2
        assert iv[0][1] == pytest.approx(-1.0)
        assert iv[1][0] == pytest.approx(1.0)

    def test_linear_ray(self):
        iv = feasible_intervals(QuadraticEnergyCoeffs(0.0, 1.0, 0.0), 4.0)
        assert iv == [(-np.inf, 4.0)]
        iv = feasible_intervals(QuadraticEnergyCoeffs(0.0, -1.0, 0.0), 4.0)
        assert iv == [(-4.0, np.inf)]

    def test_constant_cases(self):
        assert feasible_intervals(QuadraticEnergyCoeffs(0.0, 0.0, 1.0),
                                  4.0) == [(-np.inf, np.inf)]
        with pytest.raises(EmptyFeasibleSetError):
            feasible_intervals(QuadraticEnergyCoeffs(0.0, 0.0, 9.0), 4.0)


class TestConstrainedChoice:
    def test_point_feasible_set(self):
        e_prev = 3.0
        coeffs = QuadraticEnergyCoeffs(1.0, 0.0, e_prev)
        out = solve_bdf2_constrained(lambda e: e, coeffs, e_prev,
                                     ScalarSolveConfig(initial_guess=0.0))
        assert out.eta == pytest.approx(0.0, abs=1e-10)
        assert out.objective <= 1e-10

    def test_linear_constraint_clips_root(self):
        e_prev = 2.0
        coeffs = QuadraticEnergyCoeffs(0.0, 1.0, e_prev - 1.0)

        def qfun(eta):
            return eta - 2.0

        out = solve_bdf2_constrained(qfun, coeffs, e_prev,
                                     ScalarSolveConfig(initial_guess=0.0))
        assert out.eta == pytest.approx(1.0, abs=1e-6)
        assert out.objective == pytest.approx(1.0, abs=1e-6)

    def test_gate_rejects_energy_raising_minimizer(self):
        # surrogate feasible everywhere, but Q stays far from 0 and its /3
        # leak pushes the true energy up at the |Q| minimizer
        e_prev = 1.0
        coeffs = QuadraticEnergyCoeffs(-1.0, 0.0, 0.0)

        def qfun(eta):
            return 30.0 + eta * eta

        with pytest.raises(EmptyFeasibleSetError):
            solve_bdf2_constrained(qfun, coeffs, e_prev,
                                   ScalarSolveConfig(initial_guess=0.0))

    def test_negative_objective_passes_gate(self):
        e_prev = 1.0
        coeffs = QuadraticEnergyCoeffs(-1.0, 0.0, 0.9)

        def qfun(eta):
            return -(3.0 + eta * eta)

        out = solve_bdf2_constrained(qfun, coeffs, e_prev,
                                     ScalarSolveConfig(initial_guess=0.0))
        assert out.eta == pytest.approx(0.0, abs=1e-4)
        assert out.residual == 0.0

    def test_matches_dense_grid_scan(self):
        # genuine two-step solve instances: compare against a million-point
        # scan of |Q| over the clipped feasible set
        checked = 0
        for seed in range(6):
            grid, model, phi_n, phi_nm1, phi_bar, q_corr, phi_hat = \
                small_two_step_instance(n=4, dt=0.2, eps=0.45, seed=seed,
                                        amplitude=0.6)
            e_prev = model.free_energy(grid, phi_n).total
            if model.free_energy(grid, phi_bar).total <= e_prev:
                continue
            coeffs = bdf2_energy_coeffs(model, grid, phi_n, phi_nm1, phi_bar,
                                        q_corr, phi_hat)
            qfun = bdf2_q_function(model, grid, phi_n, phi_nm1, phi_bar,
                                   q_corr, phi_hat)
            try:
                out = solve_bdf2_constrained(qfun, coeffs, e_prev,
                                             ScalarSolveConfig(
                                                 initial_guess=0.0))
            except EmptyFeasibleSetError:
                continue
            vec = _vec_qfun(grid, model, phi_n, phi_nm1, phi_bar, q_corr,
                            phi_hat)
            best = None
            for lo, hi in feasible_intervals(coeffs, e_prev):
                lo, hi = max(lo, -2.0), min(hi, 2.0)
                if lo > hi:
                    continue
                floor, cand = None, None
                for xs in np.array_split(np.linspace(lo, hi, 1_000_000), 10):
                    vals = np.abs(vec(xs))
                    i = int(np.argmin(vals))
                    if floor is None or (vals[i], abs(xs[i])) < (floor,
                                                                 abs(cand)):
                        floor, cand = float(vals[i]), float(xs[i])
                if best is None or (floor, abs(cand)) < best[:2]:
                    best = (floor, abs(cand), cand)
            assert best is not None
            assert out.eta == pytest.approx(best[2], abs=1e-4)
            checked += 1
        assert checked >= 3


def _vec_cn_residual(grid, model, phi_n, phi_bar, q_corr, fp):
    """Vectorized-over-eta midpoint residual (double-well oracle)."""
    pair0 = grid.inner(fp, phi_bar - phi_n)
    pair1 = grid.inner(fp, q_corr)
    dens_n = model.potential_density(grid, phi_n)
    base_pot = grid.integrate(dens_n)
    flat_bar = phi_bar.reshape(-1)
    flat_q = q_corr.reshape(-1)
    eps2 = model.epsilon ** 2

    def residual(etas):
        phi = flat_bar[None, :] + etas[:, None] * flat_q[None, :]
        dens = (phi * phi - 1.0) ** 2 / (4.0 * eps2)
        pot = dens.sum(axis=1) * grid.cell_volume - base_pot
        return pot - (1.0 + etas) * (pair0 + etas * pair1)

    residual.vectorized = True
    return residual


def _vec_qfun(grid, model, phi_n, phi_nm1, phi_bar, q_corr, phi_hat):
    """Vectorized-over-eta version of the two-step objective (oracle)."""
    fp = model.nonlinear_term(grid, phi_hat)
    combo = 3.0 * phi_bar - 4.0 * phi_n + phi_nm1
    pair_combo = grid.inner(fp, combo)
    pair_q = grid.inner(fp, q_corr)
    hist_pot = grid.integrate(4.0 * model.potential_density(grid, phi_n)
                              - model.potential_density(grid, phi_nm1))
    flat_bar = phi_bar.reshape(-1)
    flat_q = q_corr.reshape(-1)
    eps2 = model.epsilon ** 2

    def qfun(etas):
        phi = flat_bar[None, :] + etas[:, None] * flat_q[None, :]
        dens = (phi * phi - 1.0) ** 2 / (4.0 * eps2)
        pot3 = 3.0 * dens.sum(axis=1) * grid.cell_volume
        return pot3 - hist_pot - (1.0 + etas) * (pair_combo + 3.0 * etas
                                                 * pair_q)

    qfun.vectorized = True
    return qfun


class TestMultistepScalingResidual:
    def test_unit_scaling_when_energy_flat(self):
        out = solve_bdfk_residual(lambda f: 5.0, np.ones((4, 4)), 5.0, 0.0, 2,
                                  ScalarSolveConfig(initial_guess=1.0))
        assert out.eta == 1.0
        assert out.iterations == 0

    def test_zero_scaling_anchor(self):
        # eta = 0 scales the field to nothing: residual pins E(0) - E_prev
        grid = PeriodicGrid((8, 8), (TWO_PI, TWO_PI))
        model = AllenCahn(epsilon=1.0)
        e_zero = model.free_energy(grid, np.zeros(grid.shape)).total
        assert e_zero == pytest.approx(np.pi ** 2, rel=1e-12)
        x, _ = grid.meshes()
        phi_bar = 0.7 * np.cos(x)
        e_prev = 11.0
        dissipation = 2.0

        def energy(f):
            return model.free_energy(grid, f).total

        def residual(eta):
            scale = 1.0 - (1.0 - eta) ** 3
            return energy(scale * phi_bar) - e_prev + eta * eta * dissipation

        assert residual(0.0) == pytest.approx(e_zero - e_prev, rel=1e-12)

    def test_root_matches_brute_force_scan(self):
        grid = PeriodicGrid((4, 4), (TWO_PI, TWO_PI))
        model = AllenCahn(epsilon=0.5)
        x, _ = grid.meshes()
        phi_bar = 0.8 * np.cos(x)
        e_prev = model.free_energy(grid, 0.75 * np.cos(x)).total
        dissipation = 0.4
        k = 2

        def energy(f):
            return model.free_energy(grid, f).total

        out = solve_bdfk_residual(energy, phi_bar, e_prev, dissipation, k,
                                  ScalarSolveConfig(initial_guess=1.0))

        flat = phi_bar.reshape(-1)
        lsym = model.linear_symbol(grid)
        quad_unit = 0.5 * grid.inner(grid.apply_symbol(phi_bar, lsym), phi_bar)

        def residual_vec(etas):
            scales = 1.0 - (1.0 - etas) ** (k + 1)
            phi = scales[:, None] * flat[None, :]
            dens = (phi * phi - 1.0) ** 2 / (4.0 * model.epsilon ** 2)
            pot = dens.sum(axis=1) * grid.cell_volume
            return (scales ** 2 * quad_unit + pot - e_prev
                    + etas ** 2 * dissipation)

        residual_vec.vectorized = True
        roots = scan_roots(residual_vec, -1.0, 3.0)
        assert roots
        nearest = min(roots, key=lambda r: (abs(r - 1.0), r))
        assert out.eta == pytest.approx(nearest, abs=1e-5)

    def test_rejects_negative_dissipation(self):
        with pytest.raises(ValueError):
            solve_bdfk_residual(lambda f: 0.0, np.ones((2, 2)), 0.0, -1.0, 2,
                                ScalarSolveConfig())


class TestFlowCubic:
    @pytest.fixture
    def grid(self):
        return PeriodicGrid((32, 32), (TWO_PI, TWO_PI))

    def solenoidal(self, grid, seed, amplitude=1.0):
        rng = np.random.default_rng(seed)
        comps = [amplitude * rng.standard_normal(grid.shape)
                 for _ in range(2)]
        comps = [grid.dealias(c) for c in comps]
        return np.stack(grid.leray_project(comps))

    def test_zero_correction_linear_formula(self, grid):
        nu, dt = 0.05, 0.1
        u_n = self.solenoidal(grid, 0)
        u_bar = 0.9 * u_n
        u2 = np.zeros_like(u_n)
        out = solve_ns_eta(grid, u_bar, u2, u_n, nu, dt,
                           ScalarSolveConfig(initial_guess=0.0),
                           require_dissipative=False)
        nrm_bar = sum(grid.inner(c, c) for c in u_bar)
        nrm_n = sum(grid.inner(c, c) for c in u_n)
        grads = sum(grid.inner(g, g) for c in u_bar for g in grid.gradient(c))
        expected = -((nrm_bar - nrm_n) / (2 * dt) + nu * grads) / (nu * grads)
        assert out.eta == pytest.approx(expected, rel=1e-10)

    def test_constant_field_returns_zero(self, grid):
        u = np.stack([np.full(grid.shape, 0.7), np.full(grid.shape, -0.2)])
        out = solve_ns_eta(grid, u, np.zeros_like(u), u, 0.1, 0.1,
                           ScalarSolveConfig(initial_guess=0.0))
        assert out.eta == 0.0
        assert out.residual == 0.0

    def test_closed_form_matches_generic_solver(self, grid):
        nu, dt = 0.01, 0.2
        u_n = self.solenoidal(grid, 1, amplitude=2.0)
        u_bar = self.solenoidal(grid, 2, amplitude=1.5)
        u2 = self.solenoidal(grid, 3, amplitude=0.8)
        out = solve_ns_eta(grid, u_bar, u2, u_n, nu, dt,
                           ScalarSolveConfig(initial_guess=0.0))

        def vec_inner(a, b):
            return sum(grid.inner(x, y) for x, y in zip(a, b))

        def grad_inner(a, b):
            return sum(grid.inner(g, h)
                       for x, y in zip(a, b)
                       for g, h in zip(grid.gradient(x), grid.gradient(y)))

        def residual(eta):
            u_new = u_bar + eta * u2
            lhs = (vec_inner(u_new, u_new) - vec_inner(u_n, u_n)) / (2 * dt)
            return lhs + nu * (1 + eta) * grad_inner(u_new, u_new)

        root, _, _ = solve_scalar(residual, ScalarSolveConfig(
            initial_guess=0.0))
        assert out.eta == pytest.approx(root, abs=1e-10)
        assert abs(residual(out.eta)) <= 1e-10 * (1 + vec_inner(u_n, u_n))
