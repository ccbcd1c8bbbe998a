"""Command-line interface.

Subcommands: ``run`` (execute a configured simulation), ``convergence``
(order study over a dt ladder), ``compare`` (two-scheme cost comparison),
``presets`` (list shipped configurations). ``--config`` accepts a file path
or ``preset:NAME``. Exit codes: 0 success, 2 config error, 3 step abort,
4 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import ConfigError, StepAbortError
from .presets import preset_names, preset_text
from .studies import (build_grid, build_model, convergence_study,
                      ManufacturedDecay, observed_order, run_simulation,
                      scheme_comparison, write_comparison_report,
                      write_convergence_table)


def _add_common(sub):
    sub.add_argument("--config", required=True,
                     help="config file path or preset:NAME")
    sub.add_argument("--seed", type=int, default=None,
                     help="override the initial-condition seed")
    sub.add_argument("--output", default=None, help="override output directory")
    sub.add_argument("--paper-scale", action="store_true",
                     help="use the full-resolution grid from the config")
    sub.add_argument("--verbose-diagnostics", action="store_true",
                     help="keep per-step arrays and root lists")


def build_parser():
    parser = argparse.ArgumentParser(prog="gradflow", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    p_run = subs.add_parser("run", help="execute a configured simulation")
    _add_common(p_run)

    p_conv = subs.add_parser("convergence", help="temporal order study")
    _add_common(p_conv)
    p_conv.add_argument("--dt-list", default=None,
                        help="comma-separated dt values (default: 5 halvings "
                             "of the configured dt)")
    p_conv.add_argument("--reference", choices=("exact", "self"),
                        default="exact")

    p_cmp = subs.add_parser("compare", help="two-scheme cost comparison")
    _add_common(p_cmp)

    p_pre = subs.add_parser("presets", help="list shipped configurations")
    p_pre.add_argument("--show", default=None, metavar="NAME",
                       help="print the named preset config")
    return parser


def _cmd_run(args):
    cfg = load_config(args.config)
    result = run_simulation(cfg, paper_scale=args.paper_scale,
                            seed_override=args.seed, out_dir=args.output,
                            verbose=args.verbose_diagnostics)
    s = result.summary
    print(f"completed {s.steps} steps: {s.linear_solves} linear solves, "
          f"{s.scalar_solves} scalar solves, "
          f"{s.energy_violations} energy violations")
    if result.series_path is not None:
        print(f"series: {result.series_path}")
    return 0


def _cmd_convergence(args):
    cfg = load_config(args.config)
    if cfg.model.kind in ("navier-stokes", "ternary-cahn-hilliard"):
        raise ConfigError("order studies support the single-field models")
    if args.dt_list:
        dt_list = [float(v) for v in args.dt_list.split(",")]
    else:
        dt_list = [cfg.scheme.dt * 0.5 ** j for j in range(5)]
    grid = build_grid(cfg, args.paper_scale)
    model = build_model(cfg)
    exact = ManufacturedDecay(cfg.initial.variant)
    rows = convergence_study(model, grid, cfg.scheme.kind, dt_list,
                             cfg.scheme.t_final, k=cfg.scheme.k, exact=exact,
                             reference=args.reference)
    print(f"{'dt':>12} {'error':>14} {'order':>8}")
    for r in rows:
        flag = "  (repeated dt)" if r.degenerate else ""
        print(f"{r.dt:>12.6g} {r.error:>14.6e} {r.order:>8.3f}{flag}")
    print(f"observed order: {observed_order(rows):.3f}")
    out = args.output or cfg.output.directory
    from pathlib import Path

    Path(out).mkdir(parents=True, exist_ok=True)
    path = write_convergence_table(Path(out) / "convergence.csv", rows)
    print(f"table: {path}")
    return 0


def _cmd_compare(args):
    cfg = load_config(args.config)
    report = scheme_comparison(cfg, paper_scale=args.paper_scale,
                               seed_override=args.seed,
                               verbose=args.verbose_diagnostics)
    for entry in report["schemes"]:
        status = f"ABORTED: {entry['aborted']}" if entry["aborted"] else "ok"
        print(f"{entry['kind']:>14}: steps={entry['steps']} "
              f"linear={entry['linear_solves']} "
              f"scalar={entry['scalar_solves']} "
              f"scalar_iters={entry['scalar_iterations']} "
              f"wall={entry['wall_time']:.3f}s [{status}]")
    if report["final_energy_gap"] is not None:
        print(f"final-energy gap: {report['final_energy_gap']:.6e}")
    out = args.output or cfg.output.directory
    from pathlib import Path

    Path(out).mkdir(parents=True, exist_ok=True)
    path = write_comparison_report(Path(out) / "comparison.json", report)
    print(f"report: {path}")
    return 0


def _cmd_presets(args):
    if args.show:
        print(preset_text(args.show).strip())
        return 0
    for name in preset_names():
        print(name)
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": _cmd_run, "convergence": _cmd_convergence,
                "compare": _cmd_compare, "presets": _cmd_presets}
    try:
        return handlers[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except StepAbortError as err:
        print(f"step abort: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
