"""Transport exponents of the period-doubling model at desk scale, with the scaling harness.

    python3 scripts/transport_desk.py --L 4000 --T-min 20 --T-max 200
"""

import argparse

import numpy as np

from qdyn1d.dynamics import (bound_scaling_harness, build_operator, diagonalize,
                             predicted_beta_bound, run_dynamics)
from qdyn1d.potentials import PotentialSpec, realize


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=int, default=4000)
    ap.add_argument("--T-min", type=float, default=20.0)
    ap.add_argument("--T-max", type=float, default=200.0)
    ap.add_argument("--num", type=int, default=8)
    ap.add_argument("--p", type=float, nargs="+", default=[2.0, 4.0, 6.0, 8.0])
    args = ap.parse_args(argv)
    spec = PotentialSpec("substitution", {"rule": "period_doubling"}, a=0.0, b=1.0)
    eig = diagonalize(build_operator(realize(spec, (1, args.L))))
    T = np.geomspace(args.T_min, args.T_max, args.num)
    rep = run_dynamics(eig, T, args.p)
    print(f"# guard-valid T: {int(rep.valid.sum())}/{len(T)}")
    print("p,beta_hat,beta_running_min,lower_bound,harness_spread")
    for p in args.p:
        fit = rep.fits[p]
        h = bound_scaling_harness(eig, 0.0, 1.0, p, T)
        beta = "" if fit is None else f"{fit.beta:.4f}"
        run = "" if fit is None else f"{fit.beta_running:.4f}"
        print(f"{p:g},{beta},{run},{predicted_beta_bound('period_doubling', p):.2f},{h.spread:.4g}")


if __name__ == "__main__":
    main()
