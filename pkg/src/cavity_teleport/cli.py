"""Command-line driver.

Subcommands ``params``, ``analytic``, ``trajectories``, ``checkpoints`` and
``sweep`` load a :class:`RunConfig` (bundled Cs values unless ``--config``
is given), apply ``--set KEY=VALUE`` and flag overrides, and write a JSON
report or a CSV table to stdout and optionally to ``--out``.

Exit codes: 0 success, 2 configuration error, 3 overdamped regime, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from . import analysis as an
from . import dynamics as dy
from . import protocol as pr
from . import pulses as pl
from . import trajectory as tj
from .config import ConfigError, RunConfig

EXIT_OK, EXIT_CONFIG, EXIT_REGIME, EXIT_IO = 0, 2, 3, 4

UNITS = {"rates": "rad/us (MHz inputs multiplied by 2*pi)", "times": "us",
         "probabilities": "dimensionless", "fidelities": "dimensionless"}

SWEEP_COLUMNS = ("sweep_key", "value", "beta", "t1", "P", "P_prime", "F_plus", "F_minus", "F_avg")

_AMPLITUDE_KEYS = {"cf_re": "cg", "cf_im": "cg", "cg_re": "cf", "cg_im": "cf"}


# --- report builders -------------------------------------------------------------

def _setup(config: RunConfig):
    params = config.params()
    return params, config.schedule(params), config.input_state()


def cmd_params(config: RunConfig) -> dict:
    params, schedule, _ = _setup(config)
    raman = pl.raman_model(params)
    return {
        "g": params.g, "kappa": params.kappa, "gamma": params.gamma, "eta": params.eta,
        "beta": params.beta, "omega_raman": params.omega_raman, "delta_raman": params.delta_raman,
        "raman_coupling": raman.lam, "raman_duration": raman.duration,
        "cavity_branching_fraction": an.cavity_branching_fraction(params),
        "schedule": {"t1": schedule.t1, "dt1": schedule.dt1, "tau1": schedule.tau1,
                     "tau2": schedule.tau2, "t2": schedule.t2, "t_d": schedule.t_d},
        "purge_residual": pr.purge_residual(params, schedule),
    }


def cmd_analytic(config: RunConfig) -> dict:
    params, schedule, inp = _setup(config)
    fids = an.branch_fidelities(params, schedule, inp)
    raman = pl.raman_model(params)
    return {
        "beta": params.beta,
        "t1": schedule.t1,
        "P": an.success_probability(params, schedule),
        "P_prime": an.success_with_detector(params, schedule),
        "F_plus": fids.plus,
        "F_minus": fids.minus,
        "F_avg": fids.average,
        "raman_leakage": raman.leakage,
        "timing_budget": an.timing_budget(params, schedule).as_dict(),
    }


def cmd_trajectories(config: RunConfig, workers: int = 1) -> dict:
    params, schedule, inp = _setup(config)
    tcfg = tj.TrajectoryConfig(seed=config.seed, n_traj=config.n_traj)
    ens = tj.run_ensemble(params, schedule, inp, tcfg, workers=workers)
    outcomes = pr.run_analytic(params, schedule, inp)
    integrated = sum(o.weight for o in outcomes if o.status is pr.Status.SUCCESS)
    fids = an.branch_fidelities(params, schedule, inp)
    return {
        "ensemble": ens.to_dict(),
        "analytic": {
            "P": an.success_probability(params, schedule),
            "P_prime": an.success_with_detector(params, schedule),
            "integrated_success_probability": integrated,
            "F_plus": fids.plus,
            "F_minus": fids.minus,
            "cavity_branching_fraction": an.cavity_branching_fraction(params),
            "kappa_over_kappa_plus_gamma": params.kappa / (params.kappa + params.gamma),
        },
    }


def cmd_checkpoints(config: RunConfig) -> dict:
    params, schedule, inp = _setup(config)
    rows = tj.checkpoint_compare(params, schedule, inp)
    return {"checkpoints": [{"stage": stage.value, "fidelity": f} for stage, f in rows],
            "min_fidelity": min(f for _, f in rows)}


def _renormalized(config: RunConfig, key: str, value: float) -> RunConfig:
    """Set one amplitude component and rescale the other coefficient to keep unit norm."""
    vals = config.to_dict()
    vals[key] = value
    other = _AMPLITUDE_KEYS[key]
    own = "cg" if other == "cf" else "cf"
    own_sq = vals[f"{own}_re"] ** 2 + vals[f"{own}_im"] ** 2
    if own_sq > 1.0 + 1e-12:
        raise ConfigError(f"{key}={value!r} gives |{own}| > 1")
    rest = math.sqrt(max(0.0, 1.0 - own_sq))
    mag = math.hypot(vals[f"{other}_re"], vals[f"{other}_im"])
    if mag > 0:
        scale = rest / mag
        vals[f"{other}_re"] *= scale
        vals[f"{other}_im"] *= scale
    else:
        vals[f"{other}_re"], vals[f"{other}_im"] = rest, 0.0
    return RunConfig.from_dict(vals)


def cmd_sweep(config: RunConfig, key: str, values) -> list[dict]:
    if key not in RunConfig.keys():
        raise ConfigError(f"unknown sweep key {key!r}")
    rows = []
    for v in values:
        if key in _AMPLITUDE_KEYS:
            cfg = _renormalized(config, key, v)
        else:
            cfg = config.with_values(**{key: v})
        rep = cmd_analytic(cfg)
        rows.append({"sweep_key": key, "value": v, "beta": rep["beta"], "t1": rep["t1"],
                     "P": rep["P"], "P_prime": rep["P_prime"], "F_plus": rep["F_plus"],
                     "F_minus": rep["F_minus"], "F_avg": rep["F_avg"]})
    return rows


# --- output ----------------------------------------------------------------------

def _clean(x):
    """JSON-safe copy: non-finite floats become strings."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".12g")
    return str(v)


def _flatten(d: dict, prefix: str = ""):
    for k, v in d.items():
        name = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, name + ".")
        elif isinstance(v, list):
            for i, item in enumerate(v):
                if isinstance(item, dict):
                    yield from _flatten(item, f"{name}.{i}.")
                else:
                    yield f"{name}.{i}", item
        else:
            yield name, v


def render_json(command: str, config: RunConfig, results) -> str:
    report = {"command": command, "units": UNITS, "config": config.effective(), "results": results}
    return json.dumps(_clean(report), indent=2, allow_nan=False) + "\n"


def render_csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def render_report_csv(command: str, config: RunConfig, results: dict) -> str:
    rows = [{"key": "command", "value": command}]
    rows += [{"key": f"units.{k}", "value": v} for k, v in UNITS.items()]
    rows += [{"key": f"config.{k}", "value": v} for k, v in config.effective().items()]
    rows += [{"key": k, "value": v} for k, v in _flatten(results)]
    return render_csv(rows, ("key", "value"))


# --- argument handling -----------------------------------------------------------

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        raise ConfigError(f"cannot parse value {text!r}") from None


def _parse_set(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = _parse_value(value.strip())
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON configuration (default: bundled cs.config)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                        help="override one configuration value (repeatable)")
    common.add_argument("--seed", type=int, help="trajectory seed")
    common.add_argument("--n-traj", type=int, dest="n_traj", help="number of trajectories")
    common.add_argument("--out", metavar="PATH", help="also write the output to PATH")
    common.add_argument("--format", choices=("csv", "json"), help="output format")

    parser = argparse.ArgumentParser(prog="cavity-teleport", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("params", parents=[common], help="echo derived parameters")
    sub.add_parser("analytic", parents=[common], help="closed-form figures of merit")
    p = sub.add_parser("trajectories", parents=[common], help="Monte-Carlo ensemble")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    sub.add_parser("checkpoints", parents=[common], help="conditioned trajectory vs analytic stages")
    p = sub.add_parser("sweep", parents=[common], help="analytic table over one configuration key")
    p.add_argument("--key", required=True, help="RunConfig key to vary")
    p.add_argument("--values", required=True, help="comma-separated values")
    return parser


def load_config(args) -> RunConfig:
    if args.config:
        config = RunConfig.load(args.config)
    else:
        config = RunConfig.bundled()
    changes = _parse_set(args.set)
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.n_traj is not None:
        changes["n_traj"] = args.n_traj
    return config.with_values(**changes) if changes else config


def run(args) -> str:
    config = load_config(args)
    if args.command == "sweep":
        values = [_parse_value(v.strip()) for v in args.values.split(",") if v.strip()]
        rows = cmd_sweep(config, args.key, values)
        if args.format == "json":
            return render_json("sweep", config, rows)
        return render_csv(rows, SWEEP_COLUMNS)
    if args.command == "params":
        results = cmd_params(config)
    elif args.command == "analytic":
        results = cmd_analytic(config)
    elif args.command == "trajectories":
        results = cmd_trajectories(config, workers=args.workers)
    else:
        results = cmd_checkpoints(config)
    if args.format == "csv":
        return render_report_csv(args.command, config, results)
    return render_json(args.command, config, results)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = run(args)
    except (ConfigError, pr.InsufficientPurge) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except dy.OverdampedRegime as exc:
        print(f"overdamped regime: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(text)
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"I/O error: {exc}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
