#!/usr/bin/env python3
"""Independent Andersen-Gill partial-likelihood maximizer for a cohort file.

Reads a dynrec cohort with one time-constant covariate per unit and prints
the maximizing beta over all events, ignoring t_star. Used to freeze
reference values for the test suite.
"""

import sys

import numpy as np
from scipy.optimize import minimize_scalar


def read_units(path):
    lines = [l.split() for l in open(path) if l.strip() and not l.startswith("#")]
    fields = {}
    i = 1
    while lines[i][0] != "units":
        fields[lines[i][0]] = lines[i][1]
        i += 1
    s_star = float(fields["s_star"])
    units = []
    i += 1
    while lines[i][0] == "unit":
        tau = float(lines[i + 1][1])
        events = [float(x) for x in lines[i + 2][2:]]
        steps = int(lines[i + 4][1])
        x = float(lines[i + 5][1])
        units.append((events, min(tau, s_star), x))
        i += 5 + steps
    return units


def neg_loglik(beta, units):
    ends = np.array([u[1] for u in units])
    xs = np.array([u[2] for u in units])
    total = 0.0
    for events, _, x in units:
        for s in events:
            total += x * beta - np.log(np.sum(np.exp(xs[ends >= s] * beta)))
    return -total


def main():
    units = read_units(sys.argv[1])
    res = minimize_scalar(neg_loglik, args=(units,), bracket=(-1.0, 1.0),
                          method="brent", options={"xtol": 1e-12})
    print(f"{res.x:.12f}")


if __name__ == "__main__":
    main()
