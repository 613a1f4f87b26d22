"""Two-target single-defender example: constructed equilibrium, hand reference and robustness sweep."""

import argparse

import numpy as np

from robust_mssg import Abf, StrategyProfile, calc_ne, certify_robust, example, verify_ne


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=float, default=0.005)
    ap.add_argument("--eta", type=float, default=0.001)
    ap.add_argument("--samples", type=int, default=100)
    args = ap.parse_args()

    ex = example("worked_robust")
    g, abf = ex.game, ex.abf
    for model in (abf, Abf.certified(abf.delta, abf.epsilon)):
        rep = calc_ne(g, model)
        v = verify_ne(rep.profile, rep.zeta, g, model, args.grid)
        print(f"scale {model.scale:g}: profile {np.round(rep.profile.allocations[0], 4).tolist()}"
              f" zeta {rep.zeta:.4g} max gain {v.max_gain:.5f} pass {v.passed}")

    ref = StrategyProfile(ex.reference["profile"], g.resources)
    v = verify_ne(ref, ex.reference["zeta"], g, abf, args.grid)
    print(f"reference {ex.reference['profile'][0]} at zeta {ex.reference['zeta']}: max gain {v.max_gain:.5f} pass {v.passed}")

    ev = certify_robust(ref, ex.reference["zeta"], g, abf, args.eta, args.samples, args.grid)
    print(f"eta {args.eta}: b = {ev.b:.2f}, threshold {ev.threshold:.4f}, worst gain {ev.max_gain:.5f},"
          f" {sum(s.passed for s in ev.samples)}/{len(ev.samples)} samples pass")


if __name__ == "__main__":
    main()
