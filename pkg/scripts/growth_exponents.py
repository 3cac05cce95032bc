"""Transfer-matrix growth exponents of the implemented families at their special energies.

    python3 scripts/growth_exponents.py --n-max 65536 > growth.csv
"""

import argparse
import csv
import math
import sys

from qdyn1d.potentials import PotentialSpec, odd_even_rule, realize
from qdyn1d.transfer import fit_power_law, growth_profile

CASES = [
    ("period doubling, E=a", PotentialSpec("substitution", {"rule": "period_doubling"}, a=0.0, b=1.0), 0.0),
    ("S3 odd/even (1,1), E=a", PotentialSpec("substitution", {"rule": odd_even_rule(1, 1, odd=False)},
                                             a=0.0, b=1.0), 0.0),
    ("sparse gamma=2, E=0", PotentialSpec("sparse", {"gamma": 2}, a=0.0, b=1.0), 0.0),
    ("hierarchical R=1.5, E=0", PotentialSpec("hierarchical", {"R": 1.5}), 0.0),
    ("hierarchical R=4, E=0", PotentialSpec("hierarchical", {"R": 4.0}), 0.0),
    ("prime, E=a", PotentialSpec("prime", a=0.0, b=1.0), 0.0),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-max", type=int, default=2**16)
    ap.add_argument("--norm", choices=["op", "hs"], default="op")
    args = ap.parse_args(argv)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["case", "alpha_hat", "C_hat", "residual", "n_max"])
    for name, spec, E in CASES:
        V = realize(spec, (1, args.n_max))
        fit = fit_power_law(growth_profile(V, E, args.n_max, norm=args.norm))
        w.writerow([name, f"{fit.alpha:.6f}", f"{fit.C:.6g}", f"{fit.residual:.3g}", args.n_max])
    print(f"# sparse reference exponent 2 log(sqrt 3)/log 2 = {2 * math.log(math.sqrt(3)) / math.log(2):.6f}",
          file=sys.stderr)


if __name__ == "__main__":
    main()
