"""Command line driver.

    gwt run-gwt        --config cfg.toml --out DIR
    gwt run-reference  --config cfg.toml --out DIR
    gwt converge-time  --config cfg.toml --out DIR [--reference ref.snap]
    gwt converge-space --config cfg.toml --out DIR
    gwt observables    --config cfg.toml --out DIR

``--scenario NAME`` selects a built-in configuration instead of ``--config``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from . import experiments as ex
from .config import ConfigError, ExperimentConfig
from .io import (
    DIAGNOSTIC_COLUMNS,
    ERROR_COLUMNS,
    observable_columns,
    read_snapshot,
    write_csv,
    write_snapshot,
)
from .packet import PacketInvariantError, write_trajectory_csv
from .reference import PsiState
from .scenarios import SCENARIOS

log = logging.getLogger("gwt")


def _tag(cfg: ExperimentConfig, eps: float) -> str:
    return "" if len(cfg.eps) == 1 else f"-eps{1 / eps:g}"


def _echo(args, text: str) -> None:
    if not args.quiet:
        print(text)


def _load(args) -> ExperimentConfig:
    if args.scenario:
        cfg = SCENARIOS[args.scenario]()
    elif args.config:
        cfg = cfgmod.load(args.config)
    else:
        raise ConfigError("--config", "a config file or --scenario is required")
    changes = {}
    if args.eps:
        changes["eps"] = tuple(cfgmod.parse_number(e, "--eps") for e in args.eps)
    if args.T is not None:
        changes["T"] = cfgmod.parse_number(args.T, "-T")
    if args.dt:
        from dataclasses import replace

        changes["scheme"] = replace(cfg.scheme, dt=tuple(cfgmod.parse_number(d, "--dt") for d in args.dt))
    if changes:
        cfg = cfgmod.with_overrides(cfg, **changes)
    return cfg


def _out(args, cfg: ExperimentConfig) -> Path:
    out = Path(args.out if args.out else cfg.outputs.dir)
    out.mkdir(parents=True, exist_ok=True)
    cfgmod.dump(cfg, out / "config.toml")
    return out


def cmd_run_gwt(args) -> int:
    cfg = _load(args)
    out = _out(args, cfg)
    reports = set(cfg.outputs.reports)
    dt = cfg.scheme.dt[0]
    for eps in cfg.eps:
        tag = _tag(cfg, eps)
        meta = {"kind": "w", "model": cfg.model.name, "scheme": cfg.scheme.name, "dt": dt}
        if "observables" in reports:
            rows, res = ex.observable_series(cfg, eps, dt)
            write_csv(out / f"observables{tag}.csv", observable_columns(cfg.dim), [r.as_tuple() for r in rows])
        else:
            res = ex.run_gwt(cfg, eps, dt)
        if "w" in reports:
            write_snapshot(out / f"w{tag}.snap", res.w.field, eps, res.w.t, meta)
        if "psi" in reports and cfg.x is not None:
            grid = ex.x_grid(cfg, eps)
            ex.check_resolution(grid, eps)
            write_snapshot(out / f"psi{tag}.snap", res.psi(grid), eps, res.w.t, {**meta, "kind": "psi"})
        if "diagnostics" in reports:
            write_csv(out / f"diagnostics{tag}.csv", DIAGNOSTIC_COLUMNS,
                      [(d.t, d.norm, d.boundary) for d in res.diagnostics])
        if "trajectory" in reports:
            write_trajectory_csv(res.traj, out / f"trajectory{tag}.csv")
        last = res.diagnostics[-1]
        _echo(args, f"eps={eps:g} dt={dt:g} T={res.w.t:g}: |w|={last.norm:.6e} boundary={last.boundary:.2e}")
    return 0


def cmd_run_reference(args) -> int:
    cfg = _load(args)
    out = _out(args, cfg)
    for eps in cfg.eps:
        psi = ex.reference_psi(cfg, eps, cache_dir=False if args.no_cache else None)
        path = write_snapshot(
            out / f"reference{_tag(cfg, eps)}.snap", psi.field, eps, psi.t,
            {"kind": "reference", "model": cfg.model.name, "dt": cfg.reference.dt_over_eps * eps},
        )
        _echo(args, f"eps={eps:g}: N={psi.grid.shape} t={psi.t:g} -> {path}")
    return 0


def _print_rows(args, rows) -> None:
    for r in rows:
        order = "" if r.observed_order is None else f"{r.observed_order:.3f}"
        _echo(args, f"eps={r.eps:g} dt={r.dt:g} deta={r.deta:.6g} {r.scheme}: "
                    f"abs={r.abs_error:.4e} rel={r.rel_error:.4e} order={order}")


def cmd_converge_time(args) -> int:
    cfg = _load(args)
    out = _out(args, cfg)
    reference = None
    if args.reference:
        snap = read_snapshot(args.reference)
        reference = PsiState(snap.field, snap.t, snap.eps)
    rows = ex.time_convergence(cfg, reference=reference, cache_dir=False if args.no_cache else None, jobs=args.jobs)
    write_csv(out / "errors.csv", ERROR_COLUMNS, [r.as_tuple() for r in rows])
    _print_rows(args, rows)
    return 0


def cmd_converge_space(args) -> int:
    cfg = _load(args)
    out = _out(args, cfg)
    rows = ex.space_convergence(cfg)
    write_csv(out / "errors.csv", ERROR_COLUMNS, [r.as_tuple() for r in rows])
    _print_rows(args, rows)
    return 0


def cmd_observables(args) -> int:
    cfg = _load(args)
    out = _out(args, cfg)
    dt = cfg.scheme.dt[0]
    for eps in cfg.eps:
        rows, _ = ex.observable_series(cfg, eps, dt)
        path = write_csv(out / f"observables{_tag(cfg, eps)}.csv", observable_columns(cfg.dim),
                         [r.as_tuple() for r in rows])
        final = rows[-1]
        _echo(args, f"eps={eps:g}: <x>({final.t:g}) = {list(final.mean)} mass={final.mass:.6f} -> {path}")
    return 0


COMMANDS = {
    "run-gwt": (cmd_run_gwt, "evolve w and write snapshots and diagnostics"),
    "run-reference": (cmd_run_reference, "run the direct solver and write a reference snapshot"),
    "converge-time": (cmd_converge_time, "time-step convergence table against a reference"),
    "converge-space": (cmd_converge_space, "eta-mesh convergence table against a fine self-run"),
    "observables": (cmd_observables, "position expectation time series"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gwt", description="Gaussian wave packet transform experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (func, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="experiment TOML file")
        p.add_argument("--scenario", choices=sorted(SCENARIOS), help="built-in configuration")
        p.add_argument("--out", help="output directory (default: outputs.dir of the config)")
        p.add_argument("--quiet", action="store_true", help="only warnings and errors")
        p.add_argument("--eps", nargs="+", help="override eps (numbers or expressions such as 1/256)")
        p.add_argument("--dt", nargs="+", help="override the time step list")
        p.add_argument("-T", help="override the final time")
        if name in ("run-reference", "converge-time"):
            p.add_argument("--no-cache", action="store_true", help="do not read or write cached references")
        if name == "converge-time":
            p.add_argument("--reference", help="reference snapshot (single eps)")
            p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (PacketInvariantError, FloatingPointError, ValueError) as exc:
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
