"""Command-line front end.

Subcommands: steady, me, traj, ensemble, g2, check.  Every subcommand
accepts --config <path> plus a flag override for each config key; flags
win over the file.  Exit codes: 0 success, 2 config error, 3
numerical-guard error, 4 failed check.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .ensemble import (
    RunConfig,
    _PARSERS,
    consistency_check,
    emit_csv,
    parse_config_values,
    run_ensemble,
    write_g2_csv,
    write_matrix_csv,
    write_me_csv,
)
from .entangle import GG, concurrence
from .errors import BellheraldError, CheckFailure, ConfigError
from .lindblad import g2_left, integrate_me, steady_state
from .model import build_operators
from .trajectories import run_diffusive_sse, run_jump_sse, run_sme

_SUBCOMMAND_ENGINES = {
    "steady": ("steady",),
    "me": ("me",),
    "g2": ("g2",),
    "traj": ("jump", "diffusive", "sme"),
    "ensemble": ("jump", "diffusive", "sme"),
    "check": ("jump", "diffusive", "sme"),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bellherald",
        description=(
            "Heralded entanglement of two waveguide-coupled qubits: "
            "deterministic evolution, stochastic trajectories, and "
            "reflected-light statistics."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "steady": "stationary state of the driven master equation",
        "me": "deterministic master-equation history",
        "traj": "one stochastic trajectory",
        "ensemble": "trajectory ensemble statistics",
        "g2": "reflected-light intensity correlation",
        "check": "ensemble-vs-master-equation consistency check",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", metavar="PATH", help="key=value config file")
        for key in _PARSERS:
            flag = "--" + key.replace("_", "-")
            p.add_argument(flag, metavar="VALUE", dest=f"opt_{key}")
    return parser


def _assemble_config(args: argparse.Namespace) -> RunConfig:
    values: dict[str, object] = {}
    if args.config is not None:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {args.config!r}: {exc}") from None
        values = parse_config_values(text)
    for key, parse in _PARSERS.items():
        raw = getattr(args, f"opt_{key}")
        if raw is None:
            continue
        try:
            values[key] = parse(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"invalid value for --{key.replace('_', '-')}: {raw!r} ({exc})") from None
    allowed = _SUBCOMMAND_ENGINES[args.command]
    if "engine" not in values:
        if len(allowed) == 1:
            values["engine"] = allowed[0]
        else:
            raise ConfigError(
                f"'{args.command}' needs an engine: one of {', '.join(allowed)}"
            )
    if values["engine"] not in allowed:
        raise ConfigError(
            f"subcommand '{args.command}' requires engine in "
            f"{{{', '.join(allowed)}}} (got {values['engine']!r})"
        )
    return RunConfig(**values)


def _g2_tau_grid(config: RunConfig) -> np.ndarray:
    step = config.dt * config.sample_stride
    n = int(round(config.t_end / step))
    return np.arange(n + 1) * step


def _run_traj(config: RunConfig) -> None:
    if config.n_traj != 1:
        raise ConfigError(
            "traj integrates a single trajectory (n_traj = 1); "
            "use the ensemble subcommand for more"
        )
    ops = build_operators(config.model_params())
    if config.engine == "jump":
        record = run_jump_sse(
            ops, GG, config.t_end, config.dt, config.seed,
            sample_stride=config.sample_stride,
        )
    elif config.engine == "diffusive":
        record = run_diffusive_sse(
            ops, GG, config.t_end, config.dt, config.seed,
            sample_stride=config.sample_stride,
        )
    else:
        record = run_sme(
            ops, np.outer(GG, GG.conj()), config.t_end, config.dt, config.seed,
            config.eta_l, config.eta_r, sample_stride=config.sample_stride,
        )
    os.makedirs(config.out, exist_ok=True)
    path = os.path.join(config.out, "traj_0000.csv")
    emit_csv(record, path)
    if config.emit_svg:
        from .charts import render_series

        render_series(
            os.path.join(config.out, "traj.svg"),
            f"{config.engine} trajectory, seed {config.seed}",
            record.t_grid,
            [
                ("pop |ee>", record.populations[:, 0]),
                ("pop |+i>", record.populations[:, 1]),
                ("pop |-i>", record.populations[:, 2]),
                ("pop |gg>", record.populations[:, 3]),
                ("entanglement", record.entanglement),
            ],
        )
    left = sum(1 for e in record.jump_events if e.channel == "left")
    right = len(record.jump_events) - left
    print(f"wrote {path}")
    print(f"clicks: left = {left}, right = {right}")
    print(f"final populations [ee, +i, -i, gg]: "
          + ", ".join(f"{v:.6f}" for v in record.populations[-1]))


def _run_steady(config: RunConfig) -> None:
    ops = build_operators(config.model_params())
    rho = steady_state(ops)
    os.makedirs(config.out, exist_ok=True)
    path = write_matrix_csv(rho, os.path.join(config.out, "steady.csv"))
    dev = float(np.abs(rho - np.eye(4) / 4.0).max())
    print(f"wrote {path}")
    print(f"max deviation from maximally mixed: {dev:.6e}")
    print(f"concurrence: {concurrence(rho):.6e}")
    print(f"purity: {float(np.trace(rho @ rho).real):.6f}")


def _run_me(config: RunConfig) -> None:
    ops = build_operators(config.model_params())
    rho0 = np.outer(GG, GG.conj())
    times, states = integrate_me(
        ops, rho0, config.t_end, config.dt, sample_stride=config.sample_stride
    )
    os.makedirs(config.out, exist_ok=True)
    path = write_me_csv(times, states, os.path.join(config.out, "me.csv"))
    print(f"wrote {path}")
    final = states[-1]
    dev = float(np.abs(final - np.eye(4) / 4.0).max())
    print(f"final max deviation from maximally mixed: {dev:.6e}")


def _run_ensemble(config: RunConfig) -> None:
    stats = run_ensemble(config)
    print(f"wrote {os.path.join(config.out, 'stats.csv')}")
    print(f"trajectories: {stats.n_traj}")
    print(f"left clicks: {stats.herald_count}")
    print(f"closed heralding windows: {stats.n_windows}")
    if stats.n_windows:
        print(f"mean window duration: {stats.mean_window_duration:.6f}")
        print(f"mean herald fidelity to |+i>: {stats.herald_fidelity_mean:.6f}")


def _run_g2(config: RunConfig) -> None:
    ops = build_operators(config.model_params())
    curve = g2_left(ops, _g2_tau_grid(config))
    os.makedirs(config.out, exist_ok=True)
    path = write_g2_csv(curve.tau_grid, curve.values, os.path.join(config.out, "g2.csv"))
    if config.emit_svg:
        from .charts import render_series

        render_series(
            os.path.join(config.out, "g2.svg"),
            "reflected-light g2",
            curve.tau_grid,
            [("g2", curve.values)],
        )
    print(f"wrote {path}")
    print(f"g2(0) = {curve.values[0]:.6f}")
    print(f"max over grid = {curve.values.max():.6f}")
    print(f"g2({curve.tau_grid[-1]:.3g}) = {curve.values[-1]:.6f}")


def _run_check(config: RunConfig) -> None:
    report = consistency_check(config)
    i, j, part = report.entry_at_max
    print(f"engine: {report.engine}, trajectories: {report.n_traj}")
    print(
        f"max deviation {report.max_deviation:.3e} ({part} part of entry "
        f"[{i},{j}]) at t = {report.time_at_max:.6g}, SE = {report.se_at_max:.3e}"
    )
    print(f"max ratio |dev| / (SE + atol/3) = {report.max_ratio:.3f} (atol = {report.atol:g})")
    if not report.passed:
        raise CheckFailure(
            f"ensemble mean deviates from the master equation by "
            f"{report.max_ratio:.3f} effective standard errors (limit 3)"
        )
    print("consistency check passed")


_DISPATCH = {
    "steady": _run_steady,
    "me": _run_me,
    "traj": _run_traj,
    "ensemble": _run_ensemble,
    "g2": _run_g2,
    "check": _run_check,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _assemble_config(args)
        _DISPATCH[args.command](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CheckFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 4
    except BellheraldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
