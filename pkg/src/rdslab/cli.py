"""Command line entry point: ``rdslab run | suite | sweep | check-network``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

import numpy as np

from .equilibria import find_balanced_reference
from .grid import SolverError
from .harness.scenario import ConfigError, shipped_scenarios
from .harness.suites import (
    EXIT_CONFIG_ERROR,
    EXIT_NUMERICAL,
    EXIT_PASS,
    SUITES,
    run_scenario,
    run_suite,
    sweep_diffusion,
)
from .network import (
    NetworkSyntaxError,
    check_quasi_positivity,
    classify_dissipation,
    conservation_laws,
    format_network,
    growth_exponent,
    load_network,
)
from .solver import NumericalError


def _print_scenario(rep) -> None:
    head = "PASS" if rep.passed else f"FAIL (exit {rep.status})"
    print(f"{rep.name}: {head}")
    if rep.error:
        print(f"  error: {rep.error}")
    for r in rep.results:
        print(f"  {r.line()}")
        for q in r.inequalities:
            if not q.holds:
                print(f"      violated: {q.label}: {q.lhs:.6g} {q.relation} {q.rhs:.6g}")


def cmd_run(args) -> int:
    rep = run_scenario(args.scenario, args.out, args.seed_override)
    _print_scenario(rep)
    return rep.status


def cmd_suite(args) -> int:
    rep = run_suite(args.name, args.out, args.seed_override)
    for s in rep.scenarios:
        _print_scenario(s)
    for c in rep.checks:
        print(c.line())
    for t in rep.sweeps:
        _print_sweep(t)
    print(f"suite {rep.name}: {'PASS' if rep.passed else 'FAIL'}")
    return rep.status


def _print_sweep(table) -> None:
    print(f"sweep {table.scenario}")
    print(f"  {'factor':>8} {'sup Linf':>12} {'lambda':>12} {'r2':>8} global")
    for r in table.rows:
        print(f"  {r.factor:8.4g} {r.sup_Linf:12.6g} {r.lam:12.6g} {r.r2:8.4f} {'yes' if r.global_solution else 'no'}")
    print(f"  trend of lambda: {table.trend}")


def cmd_sweep(args) -> int:
    table = sweep_diffusion(args.scenario, args.factors, args.out, args.seed_override)
    _print_sweep(table)
    return EXIT_PASS


def cmd_check_network(args) -> int:
    net = load_network(args.file)
    qp = check_quasi_positivity(net)
    cls = classify_dissipation(net)
    W = conservation_laws(net)
    pair = net.reversible_pair()
    ref = find_balanced_reference(net)
    info = {
        "species": list(net.species),
        "reactions": format_network(net).splitlines(),
        "quasi_positive": qp.passed,
        "dissipation_class": cls.value,
        "growth_exponent": growth_exponent(net),
        "conservation_laws": W.tolist(),
        "single_reversible_pair": pair is not None,
        "complex_balanced_reference": None if ref is None else ref.tolist(),
    }
    print(f"species: {', '.join(net.species)}")
    for line in info["reactions"]:
        print(f"  {line}")
    print(f"quasi-positive: {'yes' if qp.passed else 'no'} ({qp.method})")
    print(f"dissipation class: {cls.value}")
    print(f"growth exponent mu: {info['growth_exponent']:g}")
    print(f"conservation laws: {len(W)}")
    for w in W:
        print(f"  {np.array2string(w, precision=6)}")
    print(f"single reversible pair: {'yes' if pair is not None else 'no'}")
    print(f"complex-balanced diagonal state: {info['complex_balanced_reference']}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "network.json"), "w", encoding="utf-8") as fh:
            json.dump(info, fh, indent=2)
            fh.write("\n")
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rdslab", description="Reaction-diffusion experiments on a box with Neumann walls.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", metavar="DIR", help="directory for report and diagnostic files")
        sp.add_argument("--seed-override", type=int, metavar="N", help="replace every seed in the run")

    run = sub.add_parser("run", help="run one scenario and its checks")
    run.add_argument("scenario", help=f"TOML file or shipped name ({', '.join(shipped_scenarios())})")
    common(run)
    run.set_defaults(func=cmd_run)

    suite = sub.add_parser("suite", help="run a named suite")
    suite.add_argument("name", help=f"one of: {', '.join(SUITES)}")
    common(suite)
    suite.set_defaults(func=cmd_suite)

    sweep = sub.add_parser("sweep", help="rerun a scenario with diffusion scaled by each factor")
    sweep.add_argument("scenario")
    sweep.add_argument("--factors", type=float, nargs="*", default=[], metavar="F")
    common(sweep)
    sweep.set_defaults(func=cmd_sweep)

    net = sub.add_parser("check-network", help="structural report for a .crn network file")
    net.add_argument("file")
    net.add_argument("--out", metavar="DIR")
    net.set_defaults(func=cmd_check_network)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, NetworkSyntaxError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (NumericalError, SolverError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
