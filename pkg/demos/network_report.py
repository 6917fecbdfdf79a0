#!/usr/bin/env python3
"""Structural report for a few small reaction networks.

Parses networks written in the reaction DSL, then prints what the solver and
the checks care about: quasi-positivity, the dissipation class, the growth
exponent, conservation laws and an equilibrium for a chosen starting mass.
"""

import numpy as np

from rdslab.equilibria import find_boundary_equilibria_single, solve_complex_balanced_equilibrium
from rdslab.network import (
    check_quasi_positivity,
    classify_dissipation,
    conservation_laws,
    format_network,
    growth_exponent,
    parse_network,
)

NETWORKS = {
    "isomerisation": ("A <-> B @ 1, 1", [2.0, 0.0]),
    "three-cycle": ("A -> B @ 1\nB -> C @ 1\nC -> A @ 1", [3.0, 0.0, 0.0]),
    "autocatalysis": ("A + B <-> 2 B @ 1, 2", [1.5, 1.5]),
}


def describe(name, text, u0):
    net = parse_network(text)
    print(f"{name}")
    print("-" * len(name))
    print(format_network(net))
    print(f"  quasi-positive:   {check_quasi_positivity(net).passed}")
    print(f"  dissipation:      {classify_dissipation(net).value}")
    print(f"  growth exponent:  {growth_exponent(net):g}")
    for row in conservation_laws(net):
        print(f"  conserved:        {np.array2string(row, precision=4)}")
    eq = solve_complex_balanced_equilibrium(net, u0)
    print(f"  equilibrium from {u0}: {np.array2string(eq.u_inf, precision=6)}")
    if net.reversible_pair() is not None:
        for b in find_boundary_equilibria_single(net, u0):
            print(f"  boundary equilibrium: {b.u_inf.tolist()}")
    print()


if __name__ == "__main__":
    for name, (text, u0) in NETWORKS.items():
        describe(name, text, u0)
