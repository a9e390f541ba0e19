"""Command-line front end.

    hadeq <subcommand> --config PATH [--seed N] [--out DIR]

Exit codes: 0 success; 1 bad config or usage; 2 a check found a violation;
3 a resolvent subproblem failed; 4 the solver hit max_outer.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import metadata

from . import __version__
from .axioms import sweep_axioms
from .bifunctions import Property, check_property
from .config import Algorithm, ConfigError, ExperimentConfig, dumps
from .solvers import Status, run_halpern, run_ppa, run_resolvent_path

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VIOLATION = 2
EXIT_SUBPROBLEM = 3
EXIT_MAX_ITER = 4

_STATUS_EXIT = {
    Status.CONVERGED: EXIT_OK,
    Status.SUBPROBLEM_FAILED: EXIT_SUBPROBLEM,
    Status.MAX_ITER: EXIT_MAX_ITER,
}


class _Parser(argparse.ArgumentParser):
    # usage errors share the config exit code; 2 is reserved for violations
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _write_report(cfg: ExperimentConfig, name: str, report: dict) -> None:
    out = cfg.output["dir"]
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, f"{cfg.output['prefix']}.{name}.json"), "w") as fh:
        fh.write(dumps(report) + "\n")


def cmd_check_space(cfg: ExperimentConfig, write: bool) -> int:
    space = cfg.build_space()
    s = cfg.sweep
    report = sweep_axioms(
        space,
        samples=int(s.get("samples", 10_000)),
        seed=cfg.seed,
        radius=float(s.get("radius", 2.0)),
        tol=float(s.get("tol", 1e-9)),
    ).to_json()
    print(dumps(report))
    if write:
        _write_report(cfg, "space", report)
    return EXIT_OK if report["passed"] else EXIT_VIOLATION


def cmd_check_bifunction(cfg: ExperimentConfig, write: bool) -> int:
    space = cfg.build_space()
    K = cfg.build_set(space)
    f = cfg.build_bifunction(space)
    props = cfg.checks.get("properties", [Property.P1.value, Property.P4_MONOTONE.value])
    sampler = cfg.sampler(space)
    reports = [check_property(f, space, K, Property(p), sampler).to_json() for p in props]
    out = {"bifunction": f.name, "passed": all(r["passed"] for r in reports), "reports": reports}
    print(dumps(out))
    if write:
        _write_report(cfg, "bifunction", out)
    return EXIT_OK if out["passed"] else EXIT_VIOLATION


def cmd_solve(cfg: ExperimentConfig) -> int:
    space = cfg.build_space()
    K = cfg.build_set(space)
    f = cfg.build_bifunction(space)
    solve = cfg.build_solve(space)
    ref = cfg.build_reference(space)
    if cfg.algorithm is Algorithm.PPA:
        trace = run_ppa(f, space, K, solve, ref)
    elif cfg.algorithm is Algorithm.HALPERN:
        trace = run_halpern(f, space, K, solve, ref)
    else:
        if not cfg.lambdas:
            raise ConfigError("RESOLVENT_PATH needs a 'lambdas' list")
        trace = run_resolvent_path(f, space, K, solve, cfg.lambdas, ref)
    out = cfg.output["dir"]
    os.makedirs(out, exist_ok=True)
    stem = os.path.join(out, cfg.output["prefix"])
    trace.write(stem + ".csv", stem + ".json", cfg.to_json(), cfg.seed)
    summary = trace.sidecar(cfg.to_json(), cfg.seed)
    summary.pop("config")
    summary["csv"] = stem + ".csv"
    if trace.records and trace.records[-1].dist_to_ref is not None:
        summary["final_dist_to_ref"] = trace.records[-1].dist_to_ref
    print(dumps(summary))
    return _STATUS_EXIT[trace.status]


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return __version__


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hadeq", description="Equilibrium problems on Hadamard spaces.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in [
        ("check-space", "sweep the CAT(0) and quasi-linearization identities"),
        ("check-bifunction", "run sampled monotonicity checks on a bifunction"),
        ("solve", "run PPA, Halpern or a resolvent path and write a trace"),
    ]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
    sub.add_parser("version", help="print the package version")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "version":
        print(_version())
        return EXIT_OK
    try:
        cfg = ExperimentConfig.load(args.config).override(args.seed, args.out)
        if args.command == "check-space":
            return cmd_check_space(cfg, write=args.out is not None)
        if args.command == "check-bifunction":
            return cmd_check_bifunction(cfg, write=args.out is not None)
        return cmd_solve(cfg)
    except (ConfigError, OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
