"""Command-line entry point: ``sinkhorn-bridge {fit,simulate,gaussian-bench,eval,demo}``.

Every command resolves its parameters from defaults, then an optional
``--config`` JSON file, then explicit flags, and echoes the resolved values
to ``<out>/config.json``. Feeding that file back reproduces the run.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .data import DATASETS, DatasetSpec, SampleSet, generate, read_samples, write_samples
from .drift import BridgeModel, follmer_model, from_potentials
from .errors import DimensionError, NumericalError, SampleFileError
from .experiments import SNAPSHOT_TIMES, TOY_PAIRINGS, mixture_uvp_trial, toy_bridge
from .gaussian import loglog_slopes, mse_experiment, summarize, write_mse_csv
from .metrics import append_ledger, bw_uvp, energy_distance, w2_1d
from .sde import SimConfig, endpoints, simulate, write_trajectories
from .sinkhorn import SolverConfig, dual_objective, fit

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4
EXIT_NOT_CONVERGED = 5

METRICS = ("bw-uvp", "energy-distance", "w2-1d")
DEMOS = ("toy-bridges", "gaussian-mse", "mixture-uvp")

log = logging.getLogger("sinkhorn_bridge")


class ConfigError(Exception):
    pass


# -- argument types -----------------------------------------------------------


def _tau(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"tau must lie in (0, 1), got {value}")
    return value


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


DEFAULTS: dict[str, dict[str, Any]] = {
    "fit": {"source": None, "target": None, "eps": 0.1, "tol": 1e-6, "max_iter": 10_000,
            "check_every": 10, "dim": 2, "out": None},
    "simulate": {"model": None, "init": None, "follmer": False, "target": None, "eps": 1.0,
                 "tau": 0.9, "steps": 50, "count": None, "seed": 0, "dim": 2,
                 "trajectories": False, "out": None},
    "gaussian-bench": {"dims": 3, "eps": 1.0, "n_grid": [64, 128, 256, 512, 1024, 2048, 4096],
                       "tau_grid": [0.2, 0.5, 0.8], "trials": 10, "n_mc": 10_000, "seed": 0,
                       "tol": 1e-6, "out": None},
    "eval": {"generated": None, "reference": None, "metrics": ["bw-uvp"], "seed": 0, "dim": 2,
             "out": None},
    "demo": {"name": None, "out": None, "seed": 0, "n": None, "count": None, "trials": None,
             "eps": None, "tau": None, "steps": None, "dims": None, "n_grid": None,
             "tau_grid": None, "n_mc": None},
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sinkhorn-bridge", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON file of parameters; flags override it")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("fit", help="solve entropic OT and emit potentials plus a forward bridge model")
    common(p)
    p.add_argument("--source", help="sample file or dataset spec name:n:seed[:noise]")
    p.add_argument("--target", help="sample file or dataset spec name:n:seed[:noise]")
    p.add_argument("--eps", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--check-every", type=int)
    p.add_argument("--dim", type=int, help="dimension for generated datasets")

    p = sub.add_parser("simulate", help="Euler-Maruyama simulation of a fitted bridge")
    common(p)
    p.add_argument("--model", help="bridge-model.json written by `fit`")
    p.add_argument("--init", "--dataset", dest="init", help="initial points: file or dataset spec")
    p.add_argument("--follmer", action="store_const", const=True,
                   help="bridge from a point mass at the origin to --target; no Sinkhorn solve")
    p.add_argument("--target", help="target samples for --follmer")
    p.add_argument("--eps", type=float, help="volatility for --follmer")
    p.add_argument("--tau", type=_tau)
    p.add_argument("--steps", type=int)
    p.add_argument("--count", type=int, help="number of paths (initial points are cycled)")
    p.add_argument("--seed", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--trajectories", action="store_const", const=True, help="also write full paths")

    p = sub.add_parser("gaussian-bench", help="drift MSE against the closed-form Gaussian bridge")
    common(p)
    p.add_argument("--dims", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--n-grid", type=_int_list)
    p.add_argument("--tau-grid", type=_float_list)
    p.add_argument("--trials", type=int)
    p.add_argument("--n-mc", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)

    p = sub.add_parser("eval", help="compare generated samples to a reference")
    common(p)
    p.add_argument("--generated")
    p.add_argument("--reference")
    p.add_argument("--metrics", type=_str_list, help=f"comma list from {', '.join(METRICS)}")
    p.add_argument("--seed", type=int)
    p.add_argument("--dim", type=int)

    p = sub.add_parser("demo", help="write plot-ready CSV data for a named experiment")
    common(p)
    p.add_argument("name", nargs="?", choices=DEMOS)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--tau", type=_tau)
    p.add_argument("--steps", type=int)
    return parser


def _resolve(command: str, args: argparse.Namespace) -> dict[str, Any]:
    cfg = dict(DEFAULTS[command])
    if args.config:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            raise OSError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config}: {exc}") from None
        file_cfg.pop("command", None)
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys for {command}: {', '.join(sorted(unknown))}")
        cfg.update(file_cfg)
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if not cfg.get("out"):
        raise ConfigError("--out is required")
    return cfg


def _echo_config(out: Path, command: str, cfg: dict[str, Any]) -> None:
    with open(out / "config.json", "w") as fh:
        json.dump({"command": command, **cfg}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_samples(text: Optional[str], dim: int, what: str) -> SampleSet:
    """A dataset spec ``name:n:seed[:noise]`` or a CSV/JSON path."""
    if not text:
        raise ConfigError(f"missing {what}")
    head = text.split(":", 1)[0]
    if ":" in text and head in DATASETS and not Path(text).exists():
        try:
            return generate(DatasetSpec.parse(text, dim=dim))
        except ValueError as exc:
            raise ConfigError(f"{what}: {exc}") from None
    return read_samples(text)


def _print(msg: str) -> None:
    print(msg, flush=True)


# -- commands -----------------------------------------------------------------


def cmd_fit(cfg: dict[str, Any]) -> int:
    source = _load_samples(cfg["source"], cfg["dim"], "source")
    target = _load_samples(cfg["target"], cfg["dim"], "target")
    if source.dim != target.dim:
        raise ConfigError(f"source is {source.dim}-D but target is {target.dim}-D")
    try:
        solver = SolverConfig(eps=cfg["eps"], tol=cfg["tol"], max_iter=cfg["max_iter"],
                              check_every=cfg["check_every"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    pair = fit(source, target, solver)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    pair.save(out / "potentials.json")
    from_potentials(pair, source, target, "forward").save(out / "bridge-model.json")
    _echo_config(out, "fit", cfg)
    _print(f"iterations={pair.iterations} marginal_error={pair.marginal_error:.6e} "
           f"dual_objective={dual_objective(source, target, pair)!r} converged={pair.converged}")
    if not pair.converged:
        _print(f"error: Sinkhorn did not reach tol={cfg['tol']} within {cfg['max_iter']} iterations")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_simulate(cfg: dict[str, Any]) -> int:
    tau = cfg["tau"]
    if not (isinstance(tau, (int, float)) and 0.0 < tau < 1.0):
        raise ConfigError(f"tau must lie in (0, 1), got {tau}")
    if cfg["follmer"]:
        target = _load_samples(cfg["target"], cfg["dim"], "target")
        model = follmer_model(target, cfg["eps"])
        init = (_load_samples(cfg["init"], cfg["dim"], "init") if cfg["init"]
                else SampleSet(np.zeros((1, model.dim)), label="origin"))
    else:
        if not cfg["model"]:
            raise ConfigError("simulate needs --model (or --follmer with --target)")
        model = BridgeModel.load(cfg["model"])
        init = _load_samples(cfg["init"], model.dim, "init")
    count = cfg["count"] if cfg["count"] is not None else init.n
    if count < 1:
        raise ConfigError("count must be positive")
    x0 = init.points[np.arange(count) % init.n]
    try:
        sim = SimConfig(tau, cfg["steps"], model.eps, seed=cfg["seed"],
                        keep_paths=bool(cfg["trajectories"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    batch = simulate(model, x0, sim)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_samples(endpoints(batch), out / "endpoints.csv")
    if cfg["trajectories"]:
        write_trajectories(batch, out / "trajectories.csv")
    _echo_config(out, "simulate", cfg)
    _print(f"simulated {count} paths to tau={tau} in {cfg['steps']} steps")
    return EXIT_OK


def _gaussian_bench(cfg: dict[str, Any], out: Path) -> dict[float, float]:
    rows = mse_experiment(cfg["dims"], cfg["eps"], cfg["n_grid"], cfg["tau_grid"], cfg["trials"],
                          cfg["n_mc"], cfg["seed"], tol=cfg["tol"])
    write_mse_csv(rows, out / "mse.csv")
    summary = summarize(rows)
    with open(out / "summary.csv", "w") as fh:
        fh.write("n,tau,median,q1,q3,trials\n")
        for c in summary:
            fh.write(f"{c['n']},{c['tau']!r},{c['median']!r},{c['q1']!r},{c['q3']!r},{c['trials']}\n")
    slopes = loglog_slopes(rows) if len(set(cfg["n_grid"])) > 1 else {}
    with open(out / "slopes.json", "w") as fh:
        json.dump({repr(float(t)): s for t, s in slopes.items()}, fh, indent=2)
        fh.write("\n")
    return slopes


def cmd_gaussian_bench(cfg: dict[str, Any]) -> int:
    if any(not 0.0 <= t < 1.0 for t in cfg["tau_grid"]):
        raise ConfigError("every tau must lie in [0, 1)")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    slopes = _gaussian_bench(cfg, out)
    _echo_config(out, "gaussian-bench", cfg)
    for tau, slope in slopes.items():
        _print(f"tau={tau}: log-log slope of median MSE vs n = {slope:.3f}")
    return EXIT_OK


def cmd_eval(cfg: dict[str, Any]) -> int:
    metrics = cfg["metrics"]
    unknown = [m for m in metrics if m not in METRICS]
    if unknown:
        raise ConfigError(f"unknown metric(s): {', '.join(unknown)}; choose from {', '.join(METRICS)}")
    gen = _load_samples(cfg["generated"], cfg["dim"], "generated")
    ref = _load_samples(cfg["reference"], cfg["dim"], "reference")
    funcs: dict[str, Callable[[], float]] = {
        "bw-uvp": lambda: bw_uvp(gen, ref),
        "energy-distance": lambda: energy_distance(gen, ref, cfg["seed"]),
        "w2-1d": lambda: w2_1d(gen, ref),
    }
    values = {}
    for name in metrics:
        try:
            values[name] = funcs[name]()
        except DimensionError as exc:
            raise ConfigError(f"{name}: {exc}") from None
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    params = {"generated": cfg["generated"], "reference": cfg["reference"]}
    for name, value in values.items():
        append_ledger(out / "metrics.csv", name, value, params, cfg["seed"])
        _print(f"{name}={value!r}")
    _echo_config(out, "eval", cfg)
    return EXIT_OK


def _pick(cfg: dict[str, Any], key: str, default: Any) -> Any:
    return default if cfg.get(key) is None else cfg[key]


def _demo_toy(cfg: dict[str, Any], out: Path) -> None:
    n = _pick(cfg, "n", 2000)
    count = _pick(cfg, "count", 1000)
    eps = _pick(cfg, "eps", 0.1)
    tau = _pick(cfg, "tau", 0.9)
    steps = _pick(cfg, "steps", 50)
    index = []
    for k, (src, tgt) in enumerate(TOY_PAIRINGS):
        res = toy_bridge(src, tgt, n=n, eps=eps, tau=tau, steps=steps, count=count,
                         seed=cfg["seed"] + k, times=SNAPSHOT_TIMES)
        sub = out / f"{src}-to-{tgt}"
        sub.mkdir(exist_ok=True)
        for t, snap in res.snapshots.items():
            write_samples(snap, sub / f"t{t:.2f}.csv")
        write_samples(res.reference, sub / "target.csv")
        index.append({"pairing": f"{src}-to-{tgt}", "iterations": res.pair.iterations,
                      "marginal_error": res.pair.marginal_error,
                      "grid_times": {f"{t:.2f}": g for t, g in res.grid_times.items()}})
        _print(f"{src} -> {tgt}: sinkhorn iterations={res.pair.iterations}")
    with open(out / "snapshots.json", "w") as fh:
        json.dump(index, fh, indent=2)
        fh.write("\n")


def _demo_mixture(cfg: dict[str, Any], out: Path) -> None:
    trials = _pick(cfg, "trials", 5)
    n = _pick(cfg, "n", 4096)
    params = {"n": n, "eps": _pick(cfg, "eps", 1.0), "tau": _pick(cfg, "tau", 0.99),
              "steps": _pick(cfg, "steps", 100), "count": _pick(cfg, "count", 10_000)}
    values = []
    for trial in range(trials):
        res = mixture_uvp_trial(seed=cfg["seed"] + trial, **params)
        values.append(res.bw_uvp)
        append_ledger(out / "metrics.csv", "bw-uvp", res.bw_uvp, {**params, "trial": trial},
                      cfg["seed"] + trial)
        _print(f"trial {trial}: bw-uvp={res.bw_uvp:.4f}")
    mean, std = float(np.mean(values)), float(np.std(values))
    with open(out / "summary.json", "w") as fh:
        json.dump({"bw_uvp_mean": mean, "bw_uvp_std": std, "trials": trials, **params}, fh, indent=2)
        fh.write("\n")
    _print(f"bw-uvp {mean:.4f} +/- {std:.4f} over {trials} trials")


def cmd_demo(cfg: dict[str, Any]) -> int:
    name = cfg["name"]
    if name not in DEMOS:
        raise ConfigError(f"unknown demo {name!r}; choose from {', '.join(DEMOS)}")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    if name == "toy-bridges":
        _demo_toy(cfg, out)
    elif name == "mixture-uvp":
        _demo_mixture(cfg, out)
    else:
        bench = dict(DEFAULTS["gaussian-bench"], seed=cfg["seed"])
        for key in ("trials", "eps", "dims", "n_grid", "tau_grid", "n_mc"):
            if cfg.get(key) is not None:
                bench[key] = cfg[key]
        _gaussian_bench(bench, out)
    _echo_config(out, "demo", cfg)
    return EXIT_OK


COMMANDS: dict[str, Callable[[dict[str, Any]], int]] = {
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "gaussian-bench": cmd_gaussian_bench,
    "eval": cmd_eval,
    "demo": cmd_demo,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args.command, args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, SampleFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
