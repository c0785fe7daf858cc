"""Batch command line front end.

Settings resolve in three layers: built-in defaults, then an optional YAML
file given with ``--config``, then explicit flags. Artifact files never
carry timestamps, so reruns with equal settings are byte-identical.

Exit codes: 0 ok, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import yaml

from matchscore import __version__
from matchscore._io import dumps_json, write_json
from matchscore.de import DEConfig
from matchscore.equilibrium import EquilibriumError, MatchingOutcome, ObservedData, solve_assignment, verify_stability
from matchscore.estimator import DOMAIN, estimate, objective_grid
from matchscore.inequalities import Model, ScoreConfig, build_inequalities
from matchscore.market import DEFAULT_KAPPA, Case, Market, ProductionSpec, generate_market, value_matrix
from matchscore.montecarlo import (
    DEFAULT_LAMBDAS,
    Scenario,
    lambda_sweep,
    run_experiment,
    summaries_csv,
    threshold_csv,
    threshold_grid,
    unmatched_threshold_scan,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
COMMANDS = ("simulate", "estimate", "grid", "experiment", "sweep", "scan")
CONFIG_BLOCKS = ("scenario", "de", "score", "output")
PROFILES = {"desk": 20, "full": 100}

DEFAULTS = {
    "n": None,
    "case": "case2",
    "beta1": 0.5,
    "beta2": -2.0,
    "kappa": DEFAULT_KAPPA,
    "seed": 0,
    "model": "u",
    "ir": True,
    "lam": 100.0,
    "allow_small_lambda": False,
    "population": 400,
    "generations": 300,
    "differential_weight": 0.8,
    "crossover_rate": 0.9,
    "replications": None,
    "profile": "desk",
    "grid": None,
    "sweep": None,
    "scan": None,
    "market": None,
    "outcome": None,
    "out": ".",
    "jobs": None,
}
REQUIRED = {
    "simulate": ("n",),
    "estimate": (),
    "grid": (),
    "experiment": ("n",),
    "sweep": ("n",),
    "scan": (),
}


class ConfigError(ValueError):
    pass


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def parse_grid(spec) -> Dict[str, tuple]:
    """``"beta1=lo:hi:steps beta2=lo:hi:steps"`` into per-axis (lo, hi, steps)."""
    if isinstance(spec, (list, tuple)):
        spec = " ".join(spec)
    axes = {"beta1": (DOMAIN[0], DOMAIN[1], 41), "beta2": (DOMAIN[0], DOMAIN[1], 41)}
    for token in str(spec).split():
        name, _, body = token.partition("=")
        if name not in axes:
            raise ConfigError(f"grid: unknown axis {name!r}")
        try:
            lo, hi, steps = body.split(":")
            lo, hi, steps = float(lo), float(hi), int(steps)
        except ValueError as exc:
            raise ConfigError(f"grid: cannot parse {token!r}, expected {name}=lo:hi:steps") from exc
        if steps < 2 or not hi > lo:
            raise ConfigError(f"grid: axis {name} needs hi > lo and steps >= 2")
        axes[name] = (lo, hi, steps)
    return axes


def parse_sweep(spec) -> List[float]:
    name, _, body = str(spec).partition("=")
    if name != "lambda":
        raise ConfigError(f"sweep: only 'lambda=...' is supported, got {spec!r}")
    try:
        values = [float(v) for v in body.split(",") if v.strip()] if body else list(DEFAULT_LAMBDAS)
    except ValueError as exc:
        raise ConfigError(f"sweep: bad lambda list {body!r}") from exc
    if not values:
        raise ConfigError("sweep: empty lambda list")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matchscore",
        description="Simulate TU matching markets and run the matching maximum score estimator.",
        epilog="Exit codes: 0 ok, 2 configuration error, 3 numeric failure. "
        "MATCHSCORE_JOBS sets the default worker count.",
    )
    parser.add_argument("--version", action="version", version=f"matchscore {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    g = common.add_argument_group("market")
    g.add_argument("--n", type=int, default=S, help="agents per side")
    g.add_argument("--case", choices=[c.value for c in Case], default=S, help="production case (default case2)")
    g.add_argument("--beta1", type=float, default=S, help="true beta1 (default 0.5)")
    g.add_argument("--beta2", type=float, default=S, help="true beta2 (default -2)")
    g.add_argument("--kappa", type=float, default=S, help="matching cost scale for case2 (default 8)")
    g.add_argument("--seed", type=int, default=S, help="base seed (default 0)")
    g = common.add_argument_group("estimation")
    g.add_argument("--model", choices=[m.value for m in Model], default=S, help="data regime (default u)")
    g.add_argument("--ir", type=_bool, default=S, metavar="BOOL", help="add IR rows (default true)")
    g.add_argument("--lambda", dest="lam", type=float, default=S, help="IR weight (default 100)")
    g.add_argument(
        "--allow-small-lambda", dest="allow_small_lambda", action="store_const", const=True, default=S,
        help="permit lambda < 1 for diagnostics",
    )
    g.add_argument("--population", type=int, default=S, help="DE population (default 400)")
    g.add_argument("--generations", type=int, default=S, help="DE generations (default 300)")
    g.add_argument("--differential-weight", dest="differential_weight", type=float, default=S, help="DE F (default 0.8)")
    g.add_argument("--crossover-rate", dest="crossover_rate", type=float, default=S, help="DE CR (default 0.9)")
    g = common.add_argument_group("io")
    g.add_argument("--config", default=None, help="YAML file with settings; flags override it")
    g.add_argument("--out", default=S, help="output directory (default .)")
    g.add_argument("--jobs", type=int, default=S, help="worker processes (default $MATCHSCORE_JOBS or 1)")

    def add(name, help_text):
        return sub.add_parser(name, parents=[common], help=help_text, description=help_text)

    add("simulate", "draw a market, solve it, write market.json, outcome.json and stability.json")
    for name, text in (
        ("estimate", "estimate (beta1, beta2) on one market; writes estimate.json"),
        ("grid", "evaluate the objective on a grid; writes grid.csv and grid.json"),
    ):
        p = add(name, text)
        p.add_argument("--market", default=S, help="market.json to load instead of drawing one")
        p.add_argument("--outcome", default=S, help="outcome.json matching --market")
        p.add_argument("--grid", nargs="+", default=S, metavar="AXIS=lo:hi:steps", help="grid axes, e.g. beta1=-1:2:61 beta2=-10:2:121")
    for name, text in (
        ("experiment", "Monte Carlo bias/RMSE study; writes summary.csv, records.csv, manifest.json"),
        ("sweep", "lambda sweep; shorthand for experiment --sweep lambda=1,2,5,10,20,100"),
        ("scan", "unmatched-share threshold scan; shorthand for experiment --scan unmatched-threshold"),
    ):
        p = add(name, text)
        p.add_argument("--replications", type=int, default=S, help="overrides the profile replication count")
        p.add_argument("--profile", choices=sorted(PROFILES), default=S, help="desk (20 reps, default) or full (100 reps)")
        p.add_argument("--sweep", default=S, metavar="lambda=L1,L2,...", help="run one summary per lambda")
        p.add_argument("--scan", choices=["unmatched-threshold"], default=S, help="beta2 grid -1.0..-3.0 step -0.1")
    return parser


def load_yaml(path) -> dict:
    try:
        raw = yaml.safe_load(Path(path).read_text()) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    flat = {}
    for key, value in raw.items():
        if key in CONFIG_BLOCKS and isinstance(value, dict):
            flat.update(value)
        else:
            flat[key] = value
    flat = {str(k).replace("-", "_"): v for k, v in flat.items()}
    if "lambda" in flat:
        flat["lam"] = flat.pop("lambda")
    unknown = sorted(set(flat) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return flat


def resolve(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(load_yaml(args.config))
    cfg.update({k: v for k, v in vars(args).items() if k in DEFAULTS})
    if command == "sweep" and cfg["sweep"] is None:
        cfg["sweep"] = "lambda=" + ",".join(f"{x:g}" for x in DEFAULT_LAMBDAS)
    if command == "scan" and cfg["scan"] is None:
        cfg["scan"] = "unmatched-threshold"
    if command == "scan" and cfg["n"] is None:
        cfg["n"] = 100
    if command in ("estimate", "grid") and cfg["n"] is None and cfg["market"] is None:
        raise ConfigError("missing required field: n (or --market/--outcome)")
    for name in REQUIRED[command]:
        if cfg[name] is None:
            raise ConfigError(f"missing required field: {name}")
    if (cfg["market"] is None) != (cfg["outcome"] is None):
        raise ConfigError("--market and --outcome must be given together")
    try:
        cfg["case"] = Case(cfg["case"]).value
        cfg["model"] = Model(cfg["model"]).value
        cfg["ir"] = _bool(cfg["ir"])
        for key in ("beta1", "beta2", "kappa", "lam", "differential_weight", "crossover_rate"):
            cfg[key] = float(cfg[key])
        for key in ("seed", "population", "generations"):
            cfg[key] = int(cfg[key])
    except (ValueError, TypeError, argparse.ArgumentTypeError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg["n"] is not None and int(cfg["n"]) < 1:
        raise ConfigError("field n must be >= 1")
    if not 0 <= cfg["seed"] < 2**64:
        raise ConfigError("field seed must be a u64")
    if cfg["profile"] not in PROFILES:
        raise ConfigError(f"unknown profile {cfg['profile']!r}")
    if cfg["replications"] is None:
        cfg["replications"] = PROFILES[cfg["profile"]]
    cfg["replications"] = int(cfg["replications"])
    if cfg["replications"] < 1:
        raise ConfigError("field replications must be >= 1")
    return cfg


def de_config(cfg: dict, seed: int = 0) -> DEConfig:
    try:
        return DEConfig(
            population=cfg["population"],
            max_generations=cfg["generations"],
            differential_weight=cfg["differential_weight"],
            crossover_rate=cfg["crossover_rate"],
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def score_config(cfg: dict) -> ScoreConfig:
    try:
        return ScoreConfig.for_model(
            cfg["model"], cfg["ir"], cfg["lam"], enforce_lambda_floor=not cfg["allow_small_lambda"]
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def production_spec(cfg: dict) -> ProductionSpec:
    try:
        return ProductionSpec(Case(cfg["case"]), cfg["beta1"], cfg["beta2"], cfg["kappa"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


def _market_and_outcome(cfg: dict):
    if cfg["market"] is not None:
        try:
            market = Market.from_json(Path(cfg["market"]).read_text())
            outcome = MatchingOutcome.from_json(Path(cfg["outcome"]).read_text())
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot load market/outcome: {exc}") from exc
        return market, outcome
    market = generate_market(int(cfg["n"]), cfg["seed"])
    return market, solve_assignment(value_matrix(production_spec(cfg), market))


def cmd_simulate(cfg: dict) -> List[Path]:
    out = _out_dir(cfg)
    spec = production_spec(cfg)
    market = generate_market(int(cfg["n"]), cfg["seed"])
    F = value_matrix(spec, market)
    outcome = solve_assignment(F)
    report = verify_stability(outcome, F)
    print(f"{outcome.n_matched} matched, {len(outcome.unmatched_buyers)} unmatched buyers; stability: {report.summary()}")
    return [
        _write(out / "market.json", market.to_json()),
        _write(out / "outcome.json", outcome.to_json()),
        write_json(out / "stability.json", report.to_dict()),
    ]


def _ineqs(cfg: dict):
    market, outcome = _market_and_outcome(cfg)
    model = Model(cfg["model"])
    data = ObservedData(outcome, market, model.has_unmatched, model.has_transfers)
    return market, build_inequalities(data, score_config(cfg))


def _grid(cfg: dict, market, ineqs):
    axes = parse_grid(cfg["grid"] or "")
    b1, b2 = axes["beta1"], axes["beta2"]
    return objective_grid(ineqs, market, cfg["case"], b1[:2], b2[:2], (b1[2], b2[2]), cfg["kappa"])


def cmd_estimate(cfg: dict) -> List[Path]:
    out = _out_dir(cfg)
    market, ineqs = _ineqs(cfg)
    est = estimate(ineqs, market, cfg["case"], de_config(cfg, cfg["seed"]), cfg["kappa"])
    probe = objective_grid(ineqs, market, cfg["case"], DOMAIN, DOMAIN, (21, 41), cfg["kappa"])
    body = est.to_dict()
    body.update(
        {
            "beta2_unidentified": probe.beta2_constant(),
            "case": cfg["case"],
            "model": cfg["model"],
            "ir": cfg["ir"],
            "lambda": cfg["lam"],
            "seed": cfg["seed"],
        }
    )
    files = [write_json(out / "estimate.json", body)]
    print(f"beta1={est.candidate.beta1:.6g} beta2={est.candidate.beta2:.6g} score={est.score.weighted_total:g}")
    if cfg["grid"] is not None:
        grid = _grid(cfg, market, ineqs)
        files += [_write(out / "grid.csv", grid.to_csv()), _write(out / "grid.json", grid.sidecar_json())]
    return files


def cmd_grid(cfg: dict) -> List[Path]:
    out = _out_dir(cfg)
    market, ineqs = _ineqs(cfg)
    grid = _grid(cfg, market, ineqs)
    b1, b2 = grid.argmax
    print(f"{grid.values.size} grid points; argmax beta1={b1:.6g} beta2={b2:.6g}")
    return [_write(out / "grid.csv", grid.to_csv()), _write(out / "grid.json", grid.sidecar_json())]


def _scenario(cfg: dict) -> Scenario:
    try:
        return Scenario(
            case=Case(cfg["case"]),
            n=int(cfg["n"]),
            true_beta1=cfg["beta1"],
            true_beta2=cfg["beta2"],
            kappa=cfg["kappa"],
            model=Model(cfg["model"]),
            use_ir=cfg["ir"],
            lam=cfg["lam"],
            replications=cfg["replications"],
            base_seed=cfg["seed"],
            de=de_config(cfg),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _manifest(cfg: dict, command: str, summaries) -> dict:
    settings = {k: v for k, v in sorted(cfg.items()) if k not in ("out", "jobs", "market", "outcome")}
    return {
        "command": command,
        "version": __version__,
        "numpy": np.__version__,
        "settings": settings,
        "runs": [s.manifest_entry() for s in summaries],
    }


def cmd_experiment(cfg: dict, command: str = "experiment") -> List[Path]:
    out = _out_dir(cfg)
    base = _scenario(cfg)
    score_config(cfg)
    jobs = cfg["jobs"]
    files = []
    if cfg["scan"] is not None:
        rows = unmatched_threshold_scan(base.n, threshold_grid(), base, jobs)
        summaries = [r.summary for r in rows]
        files.append(_write(out / "threshold.csv", threshold_csv(rows)))
    elif cfg["sweep"] is not None:
        if not base.use_ir:
            raise ConfigError("a lambda sweep needs --ir true")
        summaries = lambda_sweep(base, parse_sweep(cfg["sweep"]), jobs)
    else:
        summaries = [run_experiment(base, jobs)]
    files.append(_write(out / "summary.csv", summaries_csv(summaries)))
    records = "".join(s.records_csv() if i == 0 else s.records_csv().split("\n", 1)[1] for i, s in enumerate(summaries))
    files.append(_write(out / "records.csv", records))
    files.append(write_json(out / "manifest.json", _manifest(cfg, command, summaries)))
    for s in summaries:
        print(
            f"lambda={s.scenario.lam:g} beta2={s.scenario.true_beta2:g}: "
            f"bias(beta2)={s.bias('beta2'):.4f} rmse(beta2)={s.rmse('beta2'):.4f} "
            f"unmatched={s.mean_unmatched:.2f} excluded={s.exclusion_rate:.0%}"
        )
    return files


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    try:
        cfg = resolve(args.command, args)
        if args.command == "simulate":
            files = cmd_simulate(cfg)
        elif args.command == "estimate":
            files = cmd_estimate(cfg)
        elif args.command == "grid":
            files = cmd_grid(cfg)
        else:
            files = cmd_experiment(cfg, args.command)
    except ConfigError as exc:
        print(f"matchscore: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EquilibriumError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"matchscore: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for f in files:
        print(f"wrote {f}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
