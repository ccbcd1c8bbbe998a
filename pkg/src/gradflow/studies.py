"""Simulation drivers: configured runs, order studies, scheme comparisons."""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import navier_stokes as ns
from .config import RunConfig
from .errors import ConfigError
from .grids import PeriodicGrid
from .integrators import advance, make_state, run
from .models import (AllenCahn, CahnHilliard, MbeNoSlope, TernaryCahnHilliard,
                     chemical_potential)
from .multiplier import ScalarSolveConfig
from .randomfields import seeded_random_field
from .series import record_from_diagnostics, write_series, write_snapshot


def thread_budget():
    """Worker cap from GRADFLOW_THREADS (default 1 = sequential)."""
    raw = os.environ.get("GRADFLOW_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def build_grid(cfg: RunConfig, paper_scale=False):
    g = cfg.grid
    n = g.paper_n if (paper_scale and g.paper_n is not None) else g.n
    return PeriodicGrid(n, g.length)


def build_model(cfg: RunConfig):
    m, s = cfg.model, cfg.scheme
    if m.kind == "allen-cahn":
        return AllenCahn(m.mobility, m.epsilon, dealias=s.dealias)
    if m.kind == "cahn-hilliard":
        return CahnHilliard(m.mobility, m.epsilon, dealias=s.dealias)
    if m.kind == "mbe-no-slope":
        return MbeNoSlope(m.mobility, m.epsilon, dealias=s.dealias)
    if m.kind == "ternary-cahn-hilliard":
        return TernaryCahnHilliard(m.mobility, m.epsilon, m.lam,
                                   tuple(m.sigma), dealias=s.dealias)
    if m.kind == "navier-stokes":
        return None
    raise ConfigError(f"unknown model kind {m.kind!r}")


def cosine_product(grid, variant="unit", t=0.0):
    """exp(-t) times a product of one-mode cosines matched to the box."""
    meshes = grid.meshes()
    out = np.exp(-t) * np.ones(grid.shape)
    for d, x in enumerate(meshes):
        wave = 1.0 if variant == "unit" else math.pi
        if variant == "unit" and not math.isclose(grid.length[d],
                                                  2.0 * math.pi):
            wave = 2.0 * math.pi / grid.length[d]
        out = out * np.cos(wave * x)
    return out


def initial_field(cfg: RunConfig, grid):
    """Initial data for the configured model (field, pair, or velocity)."""
    i = cfg.initial
    kind = cfg.model.kind
    if kind == "navier-stokes":
        if i.kind == "taylor-green":
            return ns.taylor_green(grid, amplitude=i.amplitude)
        if i.kind == "random":
            comps = [seeded_random_field(grid, i.seed + j, i.offset,
                                         i.amplitude) for j in range(2)]
            return np.stack(grid.leray_project(comps))
        raise ConfigError(f"initial kind {i.kind!r} not valid for the flow model")
    if kind == "ternary-cahn-hilliard":
        if i.kind == "bubbles":
            x, y = grid.meshes()
            eps = cfg.model.epsilon
            phis = []
            for cx in (i.x1, i.x2):
                r = np.sqrt((x - cx) ** 2 + (y - i.y) ** 2)
                phis.append(0.5 * (1.0 + np.tanh((i.radius - r) / eps)))
            return tuple(phis)
        if i.kind == "ramp-random":
            _, y = grid.meshes()
            ramp = 0.5 * (y / 2.0 + 0.25)
            return tuple(ramp + i.amplitude
                         * seeded_random_field(grid, i.seed + j)
                         for j in range(2))
        if i.kind == "random":
            return tuple(seeded_random_field(grid, i.seed + j, i.offset,
                                             i.amplitude) for j in range(2))
        raise ConfigError(f"initial kind {i.kind!r} not valid for two fields")
    if i.kind == "random":
        return seeded_random_field(grid, i.seed, i.offset, i.amplitude)
    if i.kind == "constant":
        return np.full(grid.shape, i.value)
    if i.kind == "cosine":
        return cosine_product(grid, i.variant, t=0.0)
    raise ConfigError(f"initial kind {i.kind!r} not valid for model {kind!r}")


def build_state(cfg: RunConfig, *, paper_scale=False, seed_override=None,
                verbose=False, scheme_block=None):
    if seed_override is not None:
        cfg.initial.seed = int(seed_override)
    s = scheme_block or cfg.scheme
    grid = build_grid(cfg, paper_scale)
    model = build_model(cfg)
    phi0 = initial_field(cfg, grid)
    solver = ScalarSolveConfig(tol=s.tol, max_iter=s.max_iter,
                               bracket_halfwidth=s.bracket)
    if cfg.model.kind == "navier-stokes":
        state = ns.make_ns_state(grid, phi0, cfg.model.nu, s.dt,
                                 solver=solver, tol_e=s.tol_e, verbose=verbose)
        return state, ns.step_ns_combined, None
    state = make_state(grid, model, s.kind, s.dt, phi0, k=s.k,
                       solver=solver, tol_e=s.tol_e, verbose=verbose)
    return state, advance, model


@dataclass
class SimulationResult:
    summary: object
    records: list
    series_path: Path | None
    out_dir: Path | None


def run_simulation(cfg: RunConfig, *, paper_scale=False, seed_override=None,
                   out_dir=None, verbose=False, write_output=True):
    """Execute the configured run, writing the series and snapshots."""
    state, step_fn, model = build_state(cfg, paper_scale=paper_scale,
                                        seed_override=seed_override,
                                        verbose=verbose)
    grid = state.grid
    n_steps = int(round(cfg.scheme.t_final / cfg.scheme.dt))
    out = Path(out_dir) if out_dir is not None else Path(cfg.output.directory)
    is_flow = model is None
    extra_keys = ("baseline_energy", "residual") + (("div_norm",) if is_flow else ())
    records = []
    snap_stride = cfg.output.snapshot_stride
    series_stride = cfg.output.series_stride

    if write_output:
        out.mkdir(parents=True, exist_ok=True)

    def snapshot(step_idx, current_time):
        values = state.u if is_flow else state.history[0]
        names = (("u", "v") if is_flow
                 else ("phi1", "phi2") if isinstance(values, tuple)
                 else ("phi",))
        fields = values if (is_flow or isinstance(values, tuple)) else (values,)
        kind = cfg.model.kind
        for name, arr in zip(names, fields):
            write_snapshot(out, grid, arr, field_name=name, step=step_idx,
                           time=current_time, model_kind=kind)

    def on_step(st, diag):
        if (diag.step_index + 1) % series_stride == 0:
            if is_flow:
                breakdown = None
                rec = record_from_diagnostics(diag)
                rec.energy_quadratic = diag.e_after
                rec.energy_potential = 0.0
            else:
                current = st.history[0]
                breakdown = model.free_energy(grid, current)
                rec = record_from_diagnostics(diag, breakdown)
            records.append(rec)
        if write_output and snap_stride and (diag.step_index + 1) % snap_stride == 0:
            snapshot(diag.step_index + 1, diag.time)

    summary = run(state, n_steps, callbacks=(on_step,), step_fn=step_fn)

    series_path = None
    if write_output:
        n_fields = 2 if (is_flow or cfg.model.kind == "ternary-cahn-hilliard") else 1
        series_path = write_series(out / "series.csv", records, n_fields,
                                   extra_keys)
        snapshot(state.step_index, state.t)
    return SimulationResult(summary, records, series_path,
                            out if write_output else None)


# -- manufactured solutions ---------------------------------------------------

class ManufacturedDecay:
    """Separable decaying cosine with forcing consistent to the grid operators.

    ``variant='unit'`` uses one full wave per box side (the natural choice on
    a 2-pi box); ``variant='pi'`` uses cos(pi x) factors, which is periodic
    when the side length is an even integer.
    """

    def __init__(self, variant="unit"):
        if variant not in ("unit", "pi"):
            raise ConfigError("variant must be 'unit' or 'pi'")
        self.variant = variant

    def value(self, grid, t):
        return cosine_product(grid, self.variant, t=t)

    def dt_value(self, grid, t):
        return -self.value(grid, t)

    def forcing(self, model, grid):
        gsym = model.mobility_symbol(grid)

        def f(_grid, t):
            phi = self.value(grid, t)
            mu = chemical_potential(model, grid, phi)
            return self.dt_value(grid, t) + grid.apply_symbol(mu, gsym)

        return f


def _history_depth(scheme, k):
    return k if scheme == "combined-bdfk" else 2


def make_manufactured_state(model, grid, scheme, dt, *, k=2, exact=None,
                            solver=None, tol_e=None):
    """State with forcing attached and history seeded from the exact solution.

    Multistep methods need a full history to start at their design order;
    seeding from the known solution keeps the order study free of startup
    error. Stability runs use the ordinary ramp startup instead.
    """
    exact = exact or ManufacturedDecay()
    depth = _history_depth(scheme, k)
    state = make_state(grid, model, scheme, dt, exact.value(grid, 0.0), k=k,
                       forcing=exact.forcing(model, grid), solver=solver,
                       tol_e=tol_e)
    for j in range(1, depth):
        state.history.insert(0, exact.value(grid, j * dt))
    state.t = (depth - 1) * dt
    state.step_index = depth - 1
    return state


@dataclass
class ConvergenceRow:
    dt: float
    error: float
    order: float
    degenerate: bool = False


def _run_to_time(model, grid, scheme, k, dt, t_final, exact, solver=None):
    state = make_manufactured_state(model, grid, scheme, dt, k=k, exact=exact,
                                    solver=solver)
    n_steps = int(round((t_final - state.t) / dt))
    if abs(state.t + n_steps * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ConfigError(f"dt {dt} does not divide the horizon {t_final}")
    run(state, n_steps, keep_diagnostics=False)
    return state.history[0]


def convergence_study(model, grid, scheme, dt_list, t_final, *, k=2,
                      exact=None, reference="exact", reference_dt=None,
                      solver=None):
    """Max-norm errors and pairwise observed orders over a dt ladder.

    ``reference='exact'`` compares against the manufactured solution;
    ``reference='self'`` against a run at ``reference_dt`` (default: the
    smallest dt divided by 16). Repeated dt values are kept but flagged.
    """
    exact = exact or ManufacturedDecay()
    dt_list = list(dt_list)
    if not dt_list:
        raise ConfigError("need at least one dt")

    def solve(dt):
        return _run_to_time(model, grid, scheme, k, dt, t_final, exact,
                            solver=solver)

    if reference == "exact":
        target = exact.value(grid, t_final)
    elif reference == "self":
        ref_dt = reference_dt if reference_dt is not None else min(dt_list) / 16.0
        target = solve(ref_dt)
    else:
        raise ConfigError("reference must be 'exact' or 'self'")

    workers = thread_budget()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fields = list(pool.map(solve, dt_list))
    else:
        fields = [solve(dt) for dt in dt_list]

    rows = []
    for idx, (dt, phi) in enumerate(zip(dt_list, fields)):
        err = float(np.max(np.abs(phi - target)))
        if idx == 0:
            rows.append(ConvergenceRow(dt, err, float("nan")))
            continue
        prev = rows[-1]
        if math.isclose(dt, prev.dt):
            rows.append(ConvergenceRow(dt, err, 0.0, degenerate=True))
        else:
            order = math.log(prev.error / err) / math.log(prev.dt / dt)
            rows.append(ConvergenceRow(dt, err, order))
    return rows


def write_convergence_table(path, rows):
    lines = ["dt,error,order,degenerate"]
    for r in rows:
        lines.append(f"{r.dt:.17g},{r.error:.17g},{r.order:.17g},"
                     f"{int(r.degenerate)}")
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def observed_order(rows):
    """Median of the well-defined pairwise orders."""
    orders = [r.order for r in rows[1:] if not r.degenerate
              and math.isfinite(r.order)]
    if not orders:
        return float("nan")
    return float(np.median(orders))


# -- scheme comparison --------------------------------------------------------

def scheme_comparison(cfg: RunConfig, *, paper_scale=False, seed_override=None,
                      verbose=False):
    """Run two schemes on identical inputs and compare their solve counts.

    The second scheme block defaults to the classic variant of the first at
    the same dt, which is the standard cost baseline.
    """
    import copy

    second = cfg.scheme2
    if second is None:
        second = copy.deepcopy(cfg.scheme)
        second.kind = "classic-cn"
    report = {"schemes": [], "final_energy_gap": None}
    finals = []
    for block in (cfg.scheme, second):
        sub = copy.deepcopy(cfg)
        sub.scheme = block
        state, step_fn, model = build_state(sub, paper_scale=paper_scale,
                                            seed_override=seed_override,
                                            verbose=verbose)
        n_steps = int(round(block.t_final / block.dt))
        start = time.perf_counter()
        aborted = None
        try:
            summary = run(state, n_steps, step_fn=step_fn,
                          keep_diagnostics=False)
        except Exception as err:  # keep the partial tally for the report
            aborted = str(err)
            summary = None
        wall = time.perf_counter() - start
        entry = {
            "kind": block.kind,
            "dt": block.dt,
            "steps": 0 if summary is None else summary.steps,
            "linear_solves": 0 if summary is None else summary.linear_solves,
            "scalar_solves": 0 if summary is None else summary.scalar_solves,
            "scalar_iterations": (0 if summary is None
                                  else summary.scalar_iterations),
            "zero_branches": 0 if summary is None else summary.zero_branches,
            "wall_time": wall,
            "aborted": aborted,
            "final_energy": None if summary is None else state.e_prev,
        }
        report["schemes"].append(entry)
        finals.append(entry["final_energy"])
    if None not in finals:
        report["final_energy_gap"] = abs(finals[0] - finals[1])
    return report


def write_comparison_report(path, report):
    Path(path).write_text(json.dumps(report, indent=2) + "\n")
    return Path(path)
