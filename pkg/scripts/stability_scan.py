"""Exponent stability and Prufer-radius growth under decaying perturbations.

    python3 scripts/stability_scan.py --n-max 16384
"""

import argparse

from qdyn1d.perturb import PerturbationSpec, make_perturbation, prufer_trace, stability_check
from qdyn1d.potentials import PotentialSpec, realize

MODELS = [
    ("period doubling", PotentialSpec("substitution", {"rule": "period_doubling"}, a=0.0, b=1.0), 0.0),
    ("hierarchical R=4", PotentialSpec("hierarchical", {"R": 4.0}), 0.0),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-max", type=int, default=2**14)
    ap.add_argument("--decays", type=float, nargs="+", default=[2.0, 3.0, 4.0, 5.5])
    ap.add_argument("--pattern", default="deterministic")
    args = ap.parse_args(argv)
    n = args.n_max
    print("model,decay,alpha,alpha_perturbed,delta,growth_D,growth_N,max_residual")
    for name, spec, E0 in MODELS:
        V = realize(spec, (1, n))
        for decay in args.decays:
            W = make_perturbation(PerturbationSpec(1.0, decay, args.pattern), (1, n))
            st = stability_check(V, W, E0, n)
            tD, tN = prufer_trace(V, W, E0, n, "D"), prufer_trace(V, W, E0, n, "N")
            res = max(tD.max_residual, tN.max_residual)
            print(f"{name},{decay:g},{st.alpha:.4f},{st.alpha_perturbed:.4f},{st.delta:.4f},"
                  f"{tD.growth:.4g},{tN.growth:.4g},{res:.2e}")


if __name__ == "__main__":
    main()
