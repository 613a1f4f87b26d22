"""Construct and grid-verify approximate equilibria on seeded random games."""

import argparse
import csv
import sys

import numpy as np

from robust_mssg import Abf, GameSpec, calc_ne, find_level_input, ne_constants, verify_ne
from robust_mssg.equilibrium import ConstructionError, PreconditionError


def random_game(rng, max_n, max_m):
    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(2, max_m + 1))
    a = np.sort(rng.uniform(0, 10, (2, m)), axis=0)
    d = np.sort(rng.uniform(0, 10, (2, n, m)), axis=0)
    return GameSpec(rng.uniform(0.2, 1.0, n), a[1], a[0], d[1], d[0])


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--games", type=int, default=20, help="number of games that meet the preconditions")
    ap.add_argument("--max-n", type=int, default=3)
    ap.add_argument("--max-m", type=int, default=4)
    ap.add_argument("--grid", type=float, default=0.01)
    ap.add_argument("--shrink", type=float, default=10.0, help="delta = delta0 / shrink, epsilon = epsilon0 / shrink")
    args = ap.parse_args()

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["seed", "n", "m", "status", "zeta", "max_gain", "pass"])
    done = seed = 0
    while done < args.games:
        g = random_game(np.random.default_rng(seed), args.max_n, args.max_m)
        row = [seed, g.num_defenders, g.num_targets]
        seed += 1
        try:
            u = find_level_input(g, tol=1e-12)
            c = ne_constants(g, u, 0)
            abf = Abf.certified(c.delta0 / args.shrink, c.epsilon0 / args.shrink)
            rep = calc_ne(g, abf)
        except PreconditionError as exc:
            w.writerow(row + [f"precondition: {exc}", "", "", ""])
            continue
        except ConstructionError as exc:
            w.writerow(row + [f"construction: {exc}", "", "", 0])
            done += 1
            continue
        v = verify_ne(rep.profile, rep.zeta, g, abf, args.grid)
        w.writerow(row + ["ok", repr(rep.zeta), repr(v.max_gain), int(v.passed)])
        done += 1


if __name__ == "__main__":
    main()
