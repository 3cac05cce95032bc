"""Gap edges of the hierarchical trace map and the -2, 2, 2, ... cascade at each of them.

    python3 scripts/gap_edge_cascade.py --lam 1 --R 3 --m-max 6
"""

import argparse
import sys

from qdyn1d.tracemap import gap_edge_energies, trace_orbit


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--R", type=float, default=1.0)
    ap.add_argument("--m-max", type=int, default=6)
    args = ap.parse_args(argv)
    print("m,zeros,min_spacing,max_defect,digits")
    for m in range(args.m_max + 1):
        s = gap_edge_energies(m, args.lam, args.R)
        defect = 0.0
        for E in s.precise:
            xs = trace_orbit(E, args.lam, args.R, m + 5, dps=s.dps).traces
            defect = max(defect, float(abs(xs[m + 1] + 2)), *(float(abs(x - 2)) for x in xs[m + 2:]))
        spacing = min((b - a for a, b in zip(s.precise, s.precise[1:])), default=float("nan"))
        print(f"{m},{len(s)},{float(spacing):.3e},{defect:.2e},{s.dps}")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
