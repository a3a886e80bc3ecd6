"""Command-line front end: ``parstab simulate | verify | estimate``.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error, 3 every simulated path blew up.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .clf import check_sclf, check_small_control, sample_ball
from .errors import IndefiniteClf
from .integrate import IntegratorConfig, Termination, simulate_ensemble
from .models import MODEL_NAMES, build_model, trolley_coordinates
from .models import trolley as trolley_mod
from .sontag import SontagController
from .stability import (
    dissipation_scan,
    ensemble_stats,
    estimate_convergence,
    estimate_exceedance,
    supermartingale_check,
)
from . import verify as checks

log = logging.getLogger("parstab")

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_BLOWUP = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model: str = "pendulum"
    params: dict = field(default_factory=dict)
    dt: float = 1e-3
    t_final: float = 20.0
    record_stride: int = 10
    seed: int = 0
    paths: int = 1
    xi: Optional[list] = None
    eps: float = 1.0
    tol: float = 0.05
    t_tail: float = 5.0
    samples: int = 10_000
    out: str = "parstab"
    world_frame: bool = False
    sweep_delta: Optional[list] = None

    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(self.dt, self.t_final, self.record_stride, self.seed)


CONFIG_KEYS = tuple(f.name for f in dataclasses.fields(RunConfig))


def load_config(path: Optional[str], overrides: dict) -> RunConfig:
    """JSON file values, then command-line flags on top."""
    values = {}
    if path:
        try:
            values = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(values, dict):
            raise ConfigError("config file must hold a JSON object")
    unknown = set(values) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    values.update({k: v for k, v in overrides.items() if v is not None})
    cfg = RunConfig(**values)
    if cfg.model not in MODEL_NAMES:
        raise ConfigError(f"unknown model {cfg.model!r}")
    if not isinstance(cfg.params, dict):
        raise ConfigError("params must be an object")
    if cfg.paths < 1:
        raise ConfigError("paths must be at least 1")
    if cfg.samples < 1:
        raise ConfigError("samples must be at least 1")
    if cfg.world_frame and cfg.model != "trolley":
        raise ConfigError("--world-frame only applies to the trolley")
    try:
        cfg.integrator()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _model(cfg: RunConfig):
    try:
        return build_model(cfg.model, **cfg.params)
    except IndefiniteClf:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _xi(cfg, model):
    xi = np.asarray(cfg.xi if cfg.xi is not None else model.default_xi, dtype=float)
    if xi.shape != (model.system.n,):
        raise ConfigError(f"xi must have {model.system.n} components")
    if not model.system.partition.inside(xi):
        raise ConfigError("xi must satisfy ||y|| <= H")
    return xi


def _fmt(v) -> str:
    return "%.17g" % v


def csv_header(n, k, world_frame=False):
    cols = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{j + 1}" for j in range(k)] + ["V", "branch"]
    if world_frame:
        cols += ["world_x1", "world_x2", "world_x3", "world_alpha", "world_omega"]
    return cols


def write_path_csv(path, sample, world_frame=False):
    n, k = sample.states.shape[1], sample.controls.shape[1]
    world = trolley_coordinates(sample.states) if world_frame else None
    lines = [",".join(csv_header(n, k, world_frame))]
    for i, t in enumerate(sample.times):
        row = [_fmt(t)] + [_fmt(v) for v in sample.states[i]] + [_fmt(v) for v in sample.controls[i]]
        row += [_fmt(sample.v_values[i]), str(int(sample.branches[i]))]
        if world is not None:
            row += [_fmt(v) for v in world[i]]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_path_csv(path):
    """Header list and float matrix of a file written by :func:`write_path_csv`."""
    text = Path(path).read_text().splitlines()
    header = text[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in text[1:]])
    return header, data


def _run(cfg, model, x0s):
    ctrl = SontagController(model.system, model.clf)
    return simulate_ensemble(model.system, ctrl, x0s, cfg.integrator(), range(cfg.paths), clf=model.clf)


def cmd_simulate(cfg: RunConfig) -> int:
    model = _model(cfg)
    paths = _run(cfg, model, _xi(cfg, model))
    files = []
    for p in paths:
        name = f"{cfg.out}_path{p.path_index:04d}.csv"
        Path(name).parent.mkdir(parents=True, exist_ok=True)
        write_path_csv(name, p, cfg.world_frame)
        files.append(name)
    terms = [p.termination.name for p in paths]
    print(json.dumps({"files": files, "termination": terms}))
    if all(p.termination == Termination.BLOWUP for p in paths):
        log.error("every path blew up")
        return EXIT_BLOWUP
    return EXIT_OK


def _derivative_states(model, count, rng):
    if model.name == "trolley":
        return trolley_mod.sample_states(rng, count, min_planar_radius=1e-3)
    return model.sampler(rng, count)


def cmd_verify(cfg: RunConfig) -> int:
    report = {"model": cfg.model, "params": cfg.params, "checks": {}}
    try:
        model = _model(cfg)
    except IndefiniteClf as exc:
        report.update(passed=False, failed=["IndefiniteClf"], error=str(exc))
        print(json.dumps(report, indent=2))
        log.error("verification failed: IndefiniteClf: %s", exc)
        return EXIT_VERIFY
    system, clf, N = model.system, model.clf, cfg.samples
    rng = np.random.default_rng(cfg.seed)
    c = report["checks"]

    sclf = check_sclf(system, clf, model.sampler, N, seed=cfg.seed)
    c["check_sclf"] = sclf.to_dict()
    diss = dissipation_scan(system, clf, model.sampler, N, seed=cfg.seed + 1)
    c["dissipation_scan"] = diss.to_dict()

    gap = checks.boundary_gap(*checks.boundary_triples(rng, 10_000, system.k))
    c["branch_boundary"] = {"passed": gap <= 1e-12, "worst_gap": gap}
    ident = checks.piecewise_identity_error(*checks.random_triples(rng, 100_000, system.k))
    c["piecewise_identity"] = {"passed": ident <= 1e-10, "worst_relative_error": ident}

    states = _derivative_states(model, min(N, 1000), rng)
    g_err, h_err = checks.derivative_errors(clf, states)
    asym = checks.hessian_asymmetry(clf, states)
    c["derivatives"] = {
        "passed": g_err <= 1e-6 and h_err <= 1e-6 and asym <= 1e-12,
        "gradient_relative_error": g_err,
        "hessian_relative_error": h_err,
        "hessian_asymmetry": asym,
    }
    small = check_small_control(clf, system, np.zeros(system.n), 0.1, seed=cfg.seed)
    c["small_control"] = {"passed": bool(small), "outcome": small.outcome, "max_control_norms": list(small.max_control_norms)}

    failed = [name for name, v in c.items() if not v["passed"]]
    report.update(passed=not failed, failed=failed)
    print(json.dumps(report, indent=2))
    if failed:
        log.error("verification failed: %s", ", ".join(failed))
        return EXIT_VERIFY
    return EXIT_OK


def _estimate_block(paths, cfg, clf, with_martingale=True):
    out = {
        "exceedance": estimate_exceedance(paths, cfg.eps).to_dict(),
        "convergence": estimate_convergence(paths, cfg.tol, cfg.t_tail).to_dict(),
        "ensemble": ensemble_stats(paths, cfg.eps).to_dict(),
    }
    if with_martingale:
        out["supermartingale"] = supermartingale_check(paths, clf, cfg.eps, confidence=0.99).to_dict()
    return out


def cmd_estimate(cfg: RunConfig) -> int:
    model = _model(cfg)
    report = {"model": cfg.model, "config": dataclasses.asdict(cfg)}
    all_paths = []
    if cfg.sweep_delta:
        H = model.system.partition.H
        if any(not 0 < d <= H for d in cfg.sweep_delta):
            raise ConfigError(f"sweep radii must lie in (0, H = {H:g}]")
        # one set of unit-ball draws, rescaled per radius, so the runs are coupled
        unit = sample_ball(np.random.default_rng([cfg.seed, 1]), np.zeros(model.system.n), 1.0, cfg.paths)
        sweep = []
        for delta in cfg.sweep_delta:
            paths = _run(cfg, model, unit * float(delta))
            all_paths += paths
            sweep.append({"delta": float(delta), **_estimate_block(paths, cfg, model.clf, False)})
        report["sweep"] = sweep
    else:
        xi = _xi(cfg, model)
        paths = _run(cfg, model, xi)
        all_paths += paths
        report["xi"] = xi.tolist()
        report.update(_estimate_block(paths, cfg, model.clf))
    report["caveat"] = (
        "finite-horizon proxies for stability in probability; estimates are not proofs"
    )
    text = json.dumps(report, indent=2, default=float)
    out = Path(f"{cfg.out}_estimate.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text + "\n")
    print(text)
    if all(p.termination == Termination.BLOWUP for p in all_paths):
        return EXIT_BLOWUP
    return EXIT_OK


def _parse_param(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError("expected KEY=VALUE")
    return key, float(value)


def build_parser():
    parser = argparse.ArgumentParser(prog="parstab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "verify", "estimate"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--model", choices=MODEL_NAMES)
        p.add_argument("--param", action="append", type=_parse_param, default=[], metavar="KEY=VALUE",
                       help="model parameter override, repeatable")
        p.add_argument("--seed", type=int)
        p.add_argument("--paths", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--dt", type=float)
        p.add_argument("--t-final", type=float)
        p.add_argument("--record-stride", type=int)
        p.add_argument("--eps", type=float)
        p.add_argument("--tol", type=float)
        p.add_argument("--t-tail", type=float)
        p.add_argument("--xi", type=float, nargs="+")
        p.add_argument("--out")
        p.add_argument("--world-frame", action="store_true", default=None)
        p.add_argument("--sweep-delta", type=float, nargs="+")
    return parser


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "estimate": cmd_estimate}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in CONFIG_KEYS if k not in ("params",) and hasattr(args, k)}
    try:
        cfg = load_config(args.config, overrides)
        if args.param:
            cfg.params = {**cfg.params, **dict(args.param)}
        if args.command == "verify" and cfg.samples < 1:
            raise ConfigError("samples must be at least 1")
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
