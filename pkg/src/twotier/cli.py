"""Command line front end.

Every command reads an optional flat ``key = value`` config file; command
line flags override it.  Outputs go to ``--out`` and are only written once
the whole run has succeeded.

Exit codes: 0 success, 1 a hard verification check failed, 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .allocation import (
    RULE_KINDS,
    AllocationRuleSpec,
    alpha_grid,
    grid_games,
    heterogeneity_sweep,
    integer_weights,
    inverse_shapley,
    optimize_alpha,
    power_law_weights,
    rule_game,
)
from .data import eu27_path
from .game import GameError, WeightedVotingGame, banzhaf, shapley_dp, shapley_exact
from .pivot import estimate_pivot_probabilities, influence_profile
from .population import ConstituencyPartition, DistributionSpec, ModelError, PreferenceModel
from .verify import any_hard_failure, default_suite, reports_to_csv, summary

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INVALID = 0, 1, 2


class ConfigError(ValueError):
    pass


def parse_config(text: str) -> dict[str, str]:
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        cfg[key.strip().lower().replace("-", "_")] = value.strip()
    return cfg


@dataclass
class RunConfig:
    command: str
    seed: int | None
    replications: int
    threads: int
    out: Path
    quota_fraction: Fraction
    alpha_grid: tuple
    values: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def path(self, key: str) -> Path | None:
        v = self.values.get(key)
        if v is None:
            return None
        if v == "eu27":
            return Path(str(eu27_path()))
        p = Path(v)
        return p if p.is_absolute() else self.base_dir / p

    def require_seed(self) -> int:
        if self.seed is None:
            raise ConfigError("a seed is required (--seed or 'seed =' in the config); runs must be reproducible")
        return self.seed


def _parse_grid(text: str) -> tuple:
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise ConfigError(f"alpha grid must look like start:stop:step, got {text!r}") from None
    if step <= 0 or b < a:
        raise ConfigError("alpha grid needs step > 0 and stop >= start")
    return tuple(float(x) for x in alpha_grid(a, b, step))


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict[str, str] = {}
    base = Path(".")
    if args.config:
        cpath = Path(args.config)
        try:
            values = parse_config(cpath.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        base = cpath.parent
    for key in ("seed", "replications", "threads", "out", "quota", "alpha_grid", "game", "partition", "weights", "target"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = str(v)
    try:
        seed = int(values["seed"]) if "seed" in values else None
        reps = int(values.get("replications", 100_000))
        threads = int(values.get("threads", 1))
        quota = Fraction(values.get("quota", "0.5"))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad numeric setting: {exc}") from None
    if reps < 1:
        raise ConfigError("replications must be >= 1")
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    if not 0.5 <= quota < 1:
        raise ConfigError(f"quota must satisfy q in [0.5, 1), got {float(quota)}")
    grid = _parse_grid(values.get("alpha_grid", "0:2:0.05"))
    return RunConfig(
        command=args.command, seed=seed, replications=reps, threads=threads,
        out=Path(values.get("out", "out")), quota_fraction=quota, alpha_grid=grid,
        values=values, base_dir=base,
    )


def write_outputs(out_dir: Path, files: dict[str, str]) -> None:
    """Write each file to a temporary name next to its target, then rename."""
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, content in files.items():
        fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.", suffix=".tmp")
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(content)
        os.replace(tmp, out_dir / name)


def _metadata(cfg: RunConfig, **extra) -> str:
    meta = {
        "command": cfg.command,
        "version": __version__,
        "seed": cfg.seed,
        "replications": cfg.replications,
        "quota_fraction": float(cfg.quota_fraction),
        "config": {k: v for k, v in sorted(cfg.values.items()) if k not in ("threads", "out")},
    }
    meta.update(extra)
    return json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj))


def _load_game(cfg: RunConfig) -> WeightedVotingGame:
    path = cfg.path("game")
    if path is None:
        raise ConfigError("no game given (--game PATH or 'game =' in the config)")
    try:
        return WeightedVotingGame.from_text(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read game file: {exc}") from None


def _load_partition(cfg: RunConfig) -> ConstituencyPartition:
    path = cfg.path("partition")
    if path is None:
        raise ConfigError("no partition given (--partition PATH or 'partition =' in the config)")
    scale = float(cfg.get("population_scale", 1.0))
    try:
        return ConstituencyPartition.from_file(path, scale)
    except OSError as exc:
        raise ConfigError(f"cannot read partition file: {exc}") from None


def _load_model(cfg: RunConfig) -> PreferenceModel:
    return PreferenceModel.from_mapping(cfg.values)


def _numbers(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"expected a list of numbers, got {text!r}") from None


def _weights_for(cfg: RunConfig, partition: ConstituencyPartition, model: PreferenceModel) -> WeightedVotingGame:
    spec = cfg.get("weights", "sqrt").strip()
    q = cfg.quota_fraction
    if spec == "sqrt":
        return WeightedVotingGame(q, power_law_weights(partition, 0.5))
    if spec == "density":
        return rule_game(AllocationRuleSpec("density_rule"), partition, q, model)
    if spec.startswith("alpha:"):
        return WeightedVotingGame(q, power_law_weights(partition, float(spec[6:])))
    if spec.startswith("shapley_alpha:"):
        return rule_game(AllocationRuleSpec("shapley_based_power_law", float(spec[14:])), partition, q)
    if spec.startswith("file:"):
        path = Path(spec[5:])
        path = path if path.is_absolute() else cfg.base_dir / path
        w = WeightedVotingGame.from_text(path.read_text()).weights
        return WeightedVotingGame(q, w)
    return WeightedVotingGame(q, _numbers(spec))


def cmd_shapley(cfg: RunConfig) -> int:
    game = _load_game(cfg)
    if "quota" in cfg.values:
        game = WeightedVotingGame(cfg.quota_fraction, game.weights)
    phi = shapley_dp(game) if game.integral else shapley_exact(game)
    resolution = None
    int_game = game
    if not game.integral:
        resolution = int(cfg.get("resolution", 10_000))
        int_game = WeightedVotingGame(game.quota_fraction, integer_weights(game.weights, resolution))
    beta = banzhaf(int_game)
    files = {
        "shapley.csv": phi.to_csv(),
        "banzhaf.csv": beta.to_csv(),
        "run.json": _metadata(cfg, game=game.to_text(), banzhaf_resolution=resolution),
    }
    write_outputs(cfg.out, files)
    print(phi.to_csv(), end="")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    seed = cfg.require_seed()
    partition = _load_partition(cfg)
    model = _load_model(cfg)
    game = _weights_for(cfg, partition, model)
    direction = cfg.get("direction", "left")
    est = estimate_pivot_probabilities(game, model, partition, cfg.replications, seed, threads=cfg.threads, direction=direction)
    prof = influence_profile(est, partition)
    dev = np.abs(est.probabilities * partition.total / partition.array() - 1)
    files = {
        "estimate.csv": est.to_csv(),
        "run.json": _metadata(
            cfg, model=model.describe(), l1_distance=prof.l1_distance, max_per_capita_deviation=float(dev.max()),
            population_scale=float(cfg.get("population_scale", 1.0)), direction=direction,
        ),
    }
    write_outputs(cfg.out, files)
    print(f"L1 distance {prof.l1_distance:.6g}; max per-capita deviation {dev.max():.4g}")
    return EXIT_OK


def cmd_optimize_alpha(cfg: RunConfig) -> int:
    seed = cfg.require_seed()
    partition = _load_partition(cfg)
    kind = cfg.get("rule_kind", "shapley_based_power_law")
    if kind not in RULE_KINDS[:2]:
        raise ConfigError(f"rule_kind must be one of {RULE_KINDS[:2]}")
    resolution = int(cfg.get("resolution", 10_000))
    note = None
    if kind == "direct_power_law":
        note = "direct weights: the best exponent need not approach 1 under strong polarisation"
    files = {}
    if "ratios" in cfg.values:
        g = DistributionSpec.parse(cfg.get("g", "uniform(-0.5, 0.5)"))
        ratios = _numbers(cfg.get("ratios"))
        sweep = heterogeneity_sweep(
            partition, g, ratios, kind, cfg.alpha_grid, cfg.quota_fraction, cfg.replications, seed,
            threads=cfg.threads, resolution=resolution,
        )
        rows = ["ratio,alpha_star,rule_kind"]
        tables = ["ratio,alpha,l1,rule_kind"]
        for ratio, res in sweep:
            rows.append(f"{ratio!r},{res.alpha_star!r},{kind}")
            tables += [f"{ratio!r},{a!r},{l1!r},{kind}" for a, l1 in res.l1_by_alpha]
        files["alpha_sweep.csv"] = "\n".join(rows) + "\n"
        files["alpha_search.csv"] = "\n".join(tables) + "\n"
        for ratio, res in sweep:
            print(f"var(H)/var(G)={ratio:g}: alpha*={res.alpha_star:g}")
    else:
        model = _load_model(cfg)
        games = grid_games(partition, kind, cfg.alpha_grid, cfg.quota_fraction, resolution=resolution)
        res = optimize_alpha(
            partition, model, kind, cfg.alpha_grid, cfg.quota_fraction, cfg.replications, seed,
            threads=cfg.threads, resolution=resolution, games=games,
        )
        files["alpha_search.csv"] = res.to_csv()
        files["weights.txt"] = games[cfg.alpha_grid.index(res.alpha_star)].to_text()
        print(f"alpha* = {res.alpha_star:g}")
    if note:
        print(f"note: {note}")
    files["run.json"] = _metadata(cfg, rule_kind=kind, resolution=resolution, note=note)
    write_outputs(cfg.out, files)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    seed = cfg.require_seed()
    partition = _load_partition(cfg) if "partition" in cfg.values else None
    scale = float(cfg.get("tolerance_scale", 1.0))
    reports = default_suite(cfg.replications, seed, threads=cfg.threads, eu27=partition, tolerance_scale=scale)
    text = summary(reports)
    failed = any_hard_failure(reports)
    write_outputs(cfg.out, {
        "checks.csv": reports_to_csv(reports),
        "summary.txt": text + "\n",
        "run.json": _metadata(cfg, tolerance_scale=scale, failed=failed),
    })
    print(text)
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def cmd_inverse(cfg: RunConfig) -> int:
    spec = cfg.get("target")
    if spec is None:
        raise ConfigError("no target given (--target or 'target =' in the config)")
    if spec == "population":
        partition = _load_partition(cfg)
        target = power_law_weights(partition, float(cfg.get("target_alpha", 1.0)))
    else:
        target = np.array(_numbers(spec))
    resolution = int(cfg.get("resolution", 10_000))
    res = inverse_shapley(
        target, cfg.quota_fraction, int(cfg.get("max_iters", 200)), float(cfg.get("tolerance", 1e-3)),
        resolution=resolution,
    )
    t = target / target.sum()
    rows = ["index,target,weight,shapley"]
    rows += [f"{i + 1},{float(t[i])!r},{int(res.weights[i])},{float(res.achieved[i])!r}" for i in range(len(t))]
    files = {
        "inverse.csv": "\n".join(rows) + "\n",
        "weights.txt": res.game(cfg.quota_fraction).to_text(),
        "run.json": _metadata(cfg, residual=res.residual, iterations=res.iterations, converged=res.converged, resolution=resolution),
    }
    write_outputs(cfg.out, files)
    print(f"L-inf residual {res.residual:.6g} after {res.iterations} iterations (heuristic; not guaranteed optimal)")
    return EXIT_OK


COMMANDS = {
    "shapley": cmd_shapley,
    "simulate": cmd_simulate,
    "optimize-alpha": cmd_optimize_alpha,
    "verify": cmd_verify,
    "inverse": cmd_inverse,
}


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--replications", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--alpha-grid", dest="alpha_grid", help="start:stop:step")
    common.add_argument("--quota", help="relative quota q in [0.5, 1)")
    common.add_argument("--game", help="game file (quota line, weights line)")
    common.add_argument("--partition", help="population file, one integer per line ('eu27' for the bundled fixture)")
    common.add_argument("--weights", help="sqrt | density | alpha:A | shapley_alpha:A | file:PATH | explicit list")
    common.add_argument("--target", help="inverse problem target: 'population' or a list of numbers")
    parser = argparse.ArgumentParser(prog="twotier", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, GameError, ModelError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
