"""Command-line front end: ``mfgpd <subcommand> CONFIG``.

Exit codes: 0 success / verified, 1 verification failed, 2 usage or config
error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .certify import simulate_consistency, verify_ne
from .equilibrium import best_response, find_equilibria
from .errors import ConfigError, DiscretizationError, MFGError
from .hjbfp import compare, hjbfp_fixed_point
from .measures import MeanFieldFlow
from .model import BUILTINS, GridSpec, list_models, make_model
from .occupation import disintegrate

log = logging.getLogger("mfgpd")

EXIT_OK, EXIT_UNVERIFIED, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3

SOLVER_DEFAULTS = {
    "damping": 0.5,
    "max_iter": 200,
    "tol": 1e-8,
    "n_restarts": 5,
    "seed": 0,
    "dedupe_eps": 0.05,
    "certify_tol": 1e-6,
    "selection": "consistent",
    "route": "primal",
    "method": "highs",
}


@dataclass
class RunConfig:
    model_name: str
    model_params: dict
    grid: GridSpec
    solver: dict
    output_dir: Path
    sections: dict = field(default_factory=dict)

    def model(self):
        return make_model(self.model_name, self.model_params)


def _field(doc, key, where, kind=None, default=...):
    if key not in doc:
        if default is ...:
            raise ConfigError(f"{where}: missing required field {key!r}")
        return default
    value = doc[key]
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}")
    return value


def _actions(spec, where):
    if isinstance(spec, dict):
        lin = _field(spec, "linspace", where, list)
        if len(lin) != 3:
            raise ConfigError(f"{where}.linspace: expected [start, stop, count]")
        return np.linspace(lin[0], lin[1], int(lin[2]))[:, None]
    if isinstance(spec, list) and spec:
        return np.array([a if isinstance(a, list) else [a] for a in spec], dtype=float)
    raise ConfigError(f"{where}: expected a non-empty list or {{'linspace': [start, stop, count]}}")


def _check_solver(opts):
    num = (int, float)
    checks = {
        "damping": (num, lambda v: 0 < v <= 1, "must lie in (0, 1]"),
        "max_iter": (int, lambda v: v >= 1, "must be >= 1"),
        "tol": (num, lambda v: v > 0, "must be positive"),
        "n_restarts": (int, lambda v: v >= 1, "must be >= 1"),
        "seed": (int, lambda v: v >= 0, "must be >= 0"),
        "dedupe_eps": (num, lambda v: v >= 0, "must be >= 0"),
        "certify_tol": (num, lambda v: v > 0, "must be positive"),
        "selection": (str, lambda v: v in ("consistent", "vertex"), "must be 'consistent' or 'vertex'"),
        "route": (str, lambda v: v in ("primal", "dual", "both"), "must be 'primal', 'dual' or 'both'"),
        "method": (str, lambda v: v in ("highs", "simplex"), "must be 'highs' or 'simplex'"),
    }
    for key, value in opts.items():
        if key not in checks:
            raise ConfigError(f"solver.{key}: unknown option (known: {sorted(checks)})")
        kind, ok, msg = checks[key]
        if isinstance(value, bool) or not isinstance(value, kind) or not ok(value):
            raise ConfigError(f"solver.{key}: {value!r} {msg}")


def parse_config(text: str, base: Path = Path(".")) -> RunConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected a JSON object")
    model = _field(doc, "model", "config", dict)
    name = _field(model, "name", "model", str)
    if name not in BUILTINS:
        raise ConfigError(f"model.name: unknown model {name!r}; builtins: {sorted(BUILTINS)}")
    params = _field(model, "params", "model", dict, {})
    try:
        make_model(name, params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model.params: {exc}") from None

    g = _field(doc, "grid", "config", dict)
    try:
        grid = GridSpec(
            horizon=float(_field(g, "horizon", "grid", (int, float))),
            n_time=_field(g, "n_time", "grid", int),
            state_box=_field(g, "state_box", "grid", list),
            n_state=_field(g, "n_state", "grid", (list, int)),
            actions=_actions(_field(g, "actions", "grid"), "grid.actions"),
            boundary=_field(g, "boundary", "grid", str, "reflecting"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"grid: {exc}") from None

    solver = dict(_field(doc, "solver", "config", dict, {}))
    _check_solver(solver)
    solver = {**SOLVER_DEFAULTS, **solver}
    out = Path(_field(doc, "output_dir", "config", str, "results"))
    if not out.is_absolute():
        out = base / out
    sections = {k: v for k, v in doc.items() if k not in ("model", "grid", "solver", "output_dir")}
    for key, value in sections.items():
        if not isinstance(value, dict):
            raise ConfigError(f"{key}: expected an object")
    return RunConfig(name, params, grid, solver, out, sections)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, base=path.parent)


def _search_kwargs(cfg):
    s = cfg.solver
    return {k: s[k] for k in ("damping", "max_iter", "tol", "selection", "route", "method", "certify_tol")}


def _solve(cfg):
    s = cfg.solver
    return find_equilibria(cfg.model(), cfg.grid, s["n_restarts"], s["seed"], s["dedupe_eps"], **_search_kwargs(cfg))


def _candidate_dir(cfg, i=0):
    return cfg.output_dir / f"candidate_{i:03d}"


def cmd_solve(cfg, args):
    candidates = _solve(cfg)
    entries = []
    for i, cand in enumerate(candidates):
        d = _candidate_dir(cfg, i)
        files = {
            "flow": io.write_flow(d / "flow.csv", cand.flow, cfg.grid),
            "psi": io.write_psi(d / "psi.csv", cand.certificate, cfg.grid),
            "policy": io.write_policy(d / "policy.csv", disintegrate(cand.occupation), cfg.grid),
        }
        files["occupation"], files["nu"] = io.write_occupation(d / "occupation.csv", cand.occupation, cfg.grid)
        entries.append({**cand.summary(), "files": {k: str(v.relative_to(cfg.output_dir)) for k, v in files.items()}})
    io.write_json(cfg.output_dir / "candidates.json", {
        "model": {"name": cfg.model_name, "params": cfg.model_params},
        "solver": cfg.solver,
        "candidates": entries,
    })
    print(f"{len(candidates)} certified equilibri{'um' if len(candidates) == 1 else 'a'}"
          f" -> {cfg.output_dir / 'candidates.json'}")
    for e in entries:
        print(f"  seed {e['seed_index']}: primal {e['primal_value']:.10g} dual {e['dual_value']:.10g}"
              f" iterations {e['iterations']}")
    return EXIT_OK if candidates else EXIT_SOLVER


def _path_option(cfg, args, name, default):
    """Command-line paths are taken as given; config paths are relative to output_dir."""
    if getattr(args, name, None):
        return Path(getattr(args, name))
    value = cfg.sections.get("verify", {}).get(name)
    if value is None:
        return default
    p = Path(value)
    return p if p.is_absolute() else cfg.output_dir / p


def cmd_verify(cfg, args):
    d = _candidate_dir(cfg, args.candidate)
    flow_p = _path_option(cfg, args, "flow", d / "flow.csv")
    occ_p = _path_option(cfg, args, "occupation", d / "occupation.csv")
    psi_p = _path_option(cfg, args, "psi", d / "psi.csv")
    try:
        flow = io.read_flow(flow_p, cfg.grid)
        occ = io.read_occupation(occ_p, cfg.grid)
        psi = io.read_psi(psi_p, cfg.grid)
    except OSError as exc:
        raise ConfigError(f"cannot read artifact: {exc}") from None
    tol = args.tol if args.tol is not None else cfg.sections.get("verify", {}).get("tol", cfg.solver["certify_tol"])
    report = verify_ne(cfg.model(), cfg.grid, flow, occ, psi, tol=tol)
    out = io.write_json(cfg.output_dir / "verify.json", report.to_dict())
    for key, value in report.residuals.items():
        print(f"  {key:16s} {value:.3e}")
    print(f"verdict: {'PASS' if report.verdict else 'FAIL'} at tol {tol:g} -> {out}")
    return EXIT_OK if report.verdict else EXIT_UNVERIFIED


def cmd_best_response(cfg, args):
    model, grid = cfg.model(), cfg.grid
    flow_path = args.flow or cfg.sections.get("best_response", {}).get("flow")
    if flow_path:
        flow = io.read_flow(flow_path, grid)
    else:
        flow = MeanFieldFlow.constant(model.rho(grid), grid.n_time)
    route = cfg.sections.get("best_response", {}).get("route", "both")
    br = best_response(model, grid, flow, route=route, selection="vertex", method=cfg.solver["method"])
    d = cfg.output_dir / "best_response"
    io.write_occupation(d / "occupation.csv", br.occupation, grid)
    io.write_psi(d / "psi.csv", br.certificate, grid)
    io.write_json(d / "best_response.json", {"primal_value": br.primal_value, "dual_value": br.dual_value, "route": route})
    print(f"primal {br.primal_value:.12g} dual {br.dual_value:.12g} -> {d}")
    return EXIT_OK


def cmd_compare(cfg, args):
    model, grid, s = cfg.model(), cfg.grid, cfg.solver
    candidates = _solve(cfg)
    if not candidates:
        print("no certified equilibrium found", file=sys.stderr)
        return EXIT_SOLVER
    ref = hjbfp_fixed_point(model, grid, damping=s["damping"], max_iter=s["max_iter"], tol=s["tol"])
    reports = [{"seed_index": c.seed_index, **compare(c, ref, grid).to_dict()} for c in candidates]
    io.write_value(cfg.output_dir / "hjbfp" / "value.csv", ref.value, grid)
    io.write_flow(cfg.output_dir / "hjbfp" / "flow.csv", ref.flow, grid)
    io.write_json(cfg.output_dir / "compare.json", {
        "hjbfp": {
            "converged": ref.converged,
            "iterations": ref.iterations,
            "value_at_rho": ref.value_at_rho,
            "tie_nodes_visited": ref.tie_nodes_visited,
            "zero_mass_nodes": ref.zero_mass_nodes,
        },
        "candidates": reports,
    })
    for r in reports:
        print(f"  seed {r['seed_index']}: max W1 {r['max_w1']:.3e} value gap {r['value_gap']:.3e}")
    print(f"hjbfp converged={ref.converged} ties visited={ref.tie_nodes_visited} -> {cfg.output_dir / 'compare.json'}")
    return EXIT_OK


def cmd_simulate(cfg, args):
    opts = cfg.sections.get("simulate", {})
    n_paths = args.n_paths or opts.get("n_paths", 100_000)
    seed = args.seed if args.seed is not None else opts.get("seed", 0)
    d = _candidate_dir(cfg, args.candidate)
    if (d / "policy.csv").exists() and (d / "flow.csv").exists():
        flow, policy = io.read_flow(d / "flow.csv", cfg.grid), io.read_policy(d / "policy.csv", cfg.grid)
    else:
        candidates = _solve(cfg)
        if not candidates:
            print("no certified equilibrium found", file=sys.stderr)
            return EXIT_SOLVER
        flow, policy = candidates[0].flow, disintegrate(candidates[0].occupation)
    empirical, dist = simulate_consistency(cfg.model(), cfg.grid, policy, flow, n_paths, seed)
    io.write_flow(cfg.output_dir / "simulate" / "empirical_flow.csv", empirical, cfg.grid)
    io.write_json(cfg.output_dir / "simulate" / "simulate.json", {"n_paths": n_paths, "seed": seed, "max_w1": dist})
    print(f"{n_paths} paths, seed {seed}: max-node W1 {dist:.4e}")
    return EXIT_OK


def cmd_list_models(args):
    for name, doc in list_models().items():
        print(f"{name:14s} {doc}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "verify": cmd_verify,
    "best-response": cmd_best_response,
    "compare-hjbfp": cmd_compare,
    "simulate": cmd_simulate,
}


def build_parser():
    p = argparse.ArgumentParser(prog="mfgpd", description="Primal-dual mean field game solver and certifier")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config")
        sp.add_argument("--output-dir")
        if name in ("verify", "simulate"):
            sp.add_argument("--candidate", type=int, default=0)
        if name == "verify":
            sp.add_argument("--flow")
            sp.add_argument("--occupation")
            sp.add_argument("--psi")
            sp.add_argument("--tol", type=float)
        if name == "best-response":
            sp.add_argument("--flow")
        if name == "simulate":
            sp.add_argument("--n-paths", type=int)
            sp.add_argument("--seed", type=int)
    sub.add_parser("list-models")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list-models":
        return cmd_list_models(args)
    try:
        cfg = load_config(args.config)
        if args.output_dir:
            cfg.output_dir = Path(args.output_dir)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DiscretizationError as exc:
        print(f"grid error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MFGError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
