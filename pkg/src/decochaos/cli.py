"""Command line entry points.

Exit codes: 0 success, 1 configuration/validation error, 2 runtime
failure (partial outputs are kept in the run directory).
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .classical import classify_scaling, max_lyapunov, propagate
from .errors import ConfigError, SimulationError
from .harness import (OUTPUT_ROOT_ENV, compare_command, load_config,
                      run_experiment, write_csv)
from .models import PhasePoint
from .series import DivergenceSeries


def _apply_overrides(config, args):
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "engine", None) is not None:
        changes["engine"] = args.engine
    if changes:
        # rebuild through the validator so overrides cannot bypass
        # cross-field constraints (e.g. quantum engines need a grid)
        from .harness import ExperimentConfig

        config = ExperimentConfig.from_dict({**config.to_dict(), **changes})
    return config


def _load(args, attr="config"):
    config = load_config(getattr(args, attr))
    return _apply_overrides(config, args)


def cmd_validate_config(args):
    load_config(args.config)
    print(f"{args.config}: OK")
    return 0


def cmd_propagate(args):
    config = _load(args)
    model = config.model.build()
    integ = config.integrator
    traj = propagate(model, PhasePoint(*config.initial.z), integ.dt,
                     integ.n_steps, integ.escape_radius)
    out = args.out or "trajectory.csv"
    write_csv(out, ["t", "qx", "qy", "px", "py", "energy"],
              [traj.t, traj.z[:, 0], traj.z[:, 1], traj.z[:, 2],
               traj.z[:, 3], traj.energy])
    print(f"wrote {out} ({traj.t.size} samples, "
          f"energy drift {traj.energy_drift():.3e})")
    return 0


def cmd_lyapunov(args):
    config = _load(args)
    if config.lyapunov is None:
        raise ConfigError(["lyapunov: section is required for this command"])
    model = config.model.build()
    integ = config.integrator
    est = max_lyapunov(model, PhasePoint(*config.initial.z),
                       config.lyapunov.dt or integ.dt,
                       config.lyapunov.total_time,
                       config.lyapunov.renorm_interval, config.seed,
                       integ.escape_radius)
    out = args.out or "lyapunov.csv"
    write_csv(out, ["t", "lambda_running"],
              [est.convergence[:, 0], est.convergence[:, 1]])
    print(f"lambda_max = {est.lambda_max:.6g} "
          f"(T = {est.total_time:g}, renorm {est.renorm_interval:g}); "
          f"convergence in {out}")
    return 0


def cmd_decohere(args):
    config = _load(args)
    record = run_experiment(config, args.out)
    status = "ok" if record.error is None else f"error: {record.error}"
    print(f"run directory: {record.path} ({status})")
    for name, check in record.checks.items():
        print(f"  check {name}: {'PASS' if check['pass'] else 'FAIL'} "
              f"(value {check['value']}, bound {check['bound']})")
    return 0 if record.error is None else 2


def cmd_compare(args):
    # absence of dominance is a scientific outcome, not a failure;
    # sub-run failures surface as SimulationError and exit 2
    reg = _apply_overrides(load_config(args.config), args)
    cha = _apply_overrides(load_config(args.config_chaotic), args)
    record = compare_command(reg, cha, args.out)
    print(f"comparison directory: {record.path}")
    print(json.dumps(record.results, indent=2, sort_keys=True))
    return 0


def cmd_fit(args):
    if not args.csv and not args.config:
        raise ConfigError(["fit: need --config or --csv"])
    if args.csv:
        import csv as _csv

        with open(args.csv, encoding="ascii") as fh:
            rows = list(_csv.DictReader(fh))
        t = np.array([float(r["t"]) for r in rows])
        D = np.array([float(r["D"]) for r in rows])
        series = DivergenceSeries(t, D)
        window = tuple(args.window) if args.window else None
    else:
        config = _load(args)
        from .harness import _propagate_pair

        model = config.model.build()
        _, _, _, _, _, series = _propagate_pair(model, config.initial.z,
                                                config)
        window = args.window or config.fit.window
    fit = classify_scaling(series, window)
    print(f"kind: {fit.kind}")
    print(f"exponent_or_rate: {fit.exponent_or_rate:.6g}")
    print(f"r_squared: {fit.r_squared:.6f}")
    print(f"window: {fit.window}")
    if fit.ambiguous and fit.alternative is not None:
        alt = fit.alternative
        print(f"ambiguous: runner-up {alt.kind} "
              f"{alt.exponent_or_rate:.6g} (r^2 {alt.r_squared:.6f})")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="decochaos",
        description="Wavepacket coherence decay against a thermal bath, "
                    "with orbit-stability diagnostics.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="experiment config file (YAML)")
        p.add_argument("--out", default=None,
                       help=f"output directory (default from "
                            f"${OUTPUT_ROOT_ENV} or ./runs)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--engine", default=None,
                       choices=["classical", "quantum", "both"],
                       help="override the config engine")

    p = sub.add_parser("validate-config", help="check a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate_config)

    p = sub.add_parser("propagate", help="classical trajectory CSV")
    common(p)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("lyapunov", help="maximum Lyapunov exponent")
    common(p)
    p.set_defaults(func=cmd_lyapunov)

    p = sub.add_parser("decohere", help="full single-system experiment")
    common(p)
    p.set_defaults(func=cmd_decohere)

    p = sub.add_parser("compare",
                       help="regular versus chaotic paired experiment")
    common(p)
    p.add_argument("--config-chaotic", required=True,
                   help="config of the chaotic partner run")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("fit", help="growth-law fit of a divergence series")
    common(p, config_required=False)
    p.add_argument("--csv", default=None,
                   help="fit an existing divergence CSV instead of running")
    p.add_argument("--window", type=float, nargs=2, default=None,
                   metavar=("T_LO", "T_HI"))
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SimulationError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
