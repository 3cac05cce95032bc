"""Command-line experiment runner.

Each subcommand reads an optional JSON config (``--config``), applies flag
overrides, validates the result against ``CONFIG_SCHEMA`` and writes
plot-ready CSV. Without ``--out`` the main table goes to stdout; with
``--out DIR`` every artifact is written there together with
``manifest.json``.

Exit codes: 0 ok, 1 check failure or module error, 2 configuration error.
Errors are reported on stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import ConfigError, Qdyn1dError

KINDS = ("transfer-scan", "tracemap", "dynamics", "perturb", "sturmian", "structure-check")

_num = {"type": "number"}
_grid = {
    "oneOf": [
        {"type": "array", "items": _num, "minItems": 1},
        {
            "type": "object",
            "properties": {"start": _num, "stop": _num, "num": {"type": "integer", "minimum": 1},
                           "spacing": {"enum": ["linear", "geometric"]}},
            "required": ["start", "stop", "num"],
            "additionalProperties": False,
        },
    ]
}

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "experiment": {"enum": list(KINDS)},
        "seed": {"type": "integer"},
        "workers": {"type": "integer", "minimum": 1},
        "output": {"type": "string"},
        "potential": {
            "type": "object",
            "properties": {
                "family": {"enum": ["substitution", "sturmian", "prime", "sparse", "hierarchical",
                                    "explicit"]},
                "params": {"type": "object"},
                "a": _num, "b": _num, "coupling": _num,
                "geometry": {"enum": ["half", "whole"]},
            },
            "required": ["family"],
            "additionalProperties": False,
        },
        # transfer-scan
        "energies": _grid,
        "special": {"type": "boolean"},
        "n_max": {"type": "integer", "minimum": 4},
        "norm": {"enum": ["op", "hs"]},
        "fit_window": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
        # tracemap
        "m": {"oneOf": [{"type": "integer", "minimum": 0},
                        {"type": "array", "items": {"type": "integer", "minimum": 0}}]},
        "lambda": _num,
        "R": {"type": "number", "exclusiveMinimum": 0},
        "extra_levels": {"type": "integer", "minimum": 1},
        "orbit_energy": _num,
        # dynamics
        "L": {"type": "integer", "minimum": 1},
        "T": _grid,
        "p": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "alpha": {"type": "number", "minimum": 0},
        "E0": _num,
        "theorem": {"type": "string"},
        "amplitudes": {"type": "boolean"},
        # perturb
        "perturbation": {
            "type": "object",
            "properties": {"C2": _num, "decay": {"type": "number", "minimum": 0},
                           "pattern": {"enum": ["deterministic", "alternating", "random"]},
                           "seed": {"type": "integer"}, "shift": _num,
                           "support": {"type": "integer", "minimum": 0}},
            "required": ["C2", "decay"],
            "additionalProperties": False,
        },
        "solution": {"enum": ["D", "N"]},
        # sturmian
        "omega": {"type": ["string", "number"]},
        "theta": {"type": ["string", "number"]},
        "depth": {"type": "integer", "minimum": 10},
        "D": {"type": "number", "exclusiveMinimum": 0},
        "length": {"type": "integer", "minimum": 1},
        # structure-check
        "condition": {"enum": ["S1", "S2", "S3", "S4"]},
        "k": {"type": "integer", "minimum": 3},
        "from_index": {"type": "integer", "minimum": 1},
    },
}

DEFAULTS = {
    "seed": 0,
    "n_max": 2**14,
    "norm": "op",
    "extra_levels": 5,
    "L": 1000,
    "p": [2.0],
    "depth": 200,
    "D": 1.0,
    "length": 10**4,
    "solution": "D",
    "from_index": 1,
    "lambda": 1.0,
    "R": 1.0,
}

REQUIRED = {
    "transfer-scan": ["potential"],
    "tracemap": ["m"],
    "dynamics": ["potential", "T"],
    "perturb": ["potential", "perturbation", "E0"],
    "sturmian": ["omega"],
    "structure-check": ["potential", "condition"],
}


# --------------------------------------------------------------------- config

def _set_path(cfg: dict, dotted: str, value):
    keys = dotted.split(".")
    d = cfg
    for k in keys[:-1]:
        d = d.setdefault(k, {})
        if not isinstance(d, dict):
            raise ConfigError(f"cannot set {dotted}: {k} is not an object", dotted)
    d[keys[-1]] = value


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_config(kind: str, args: argparse.Namespace) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}", "config")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}", "config")
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object", "")
    if cfg.get("experiment", kind) != kind:
        raise ConfigError(f"config is for {cfg['experiment']!r}, not {kind!r}", "experiment")
    for key, value in vars(args).items():
        if key.startswith("o_") and value is not None:
            _set_path(cfg, key[2:].replace("__", "."), value)
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}", item)
        k, v = item.split("=", 1)
        _set_path(cfg, k.strip(), _parse_value(v))
    cfg["experiment"] = kind
    validate_config(cfg)
    return {**DEFAULTS, **cfg}


def validate_config(cfg: dict) -> None:
    v = jsonschema.Draft7Validator(CONFIG_SCHEMA)
    err = jsonschema.exceptions.best_match(v.iter_errors(cfg))
    if err is not None:
        key = ".".join(str(p) for p in err.absolute_path) or "(root)"
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            key = ".".join([*map(str, err.absolute_path), extra[0]]) if extra else key
        raise ConfigError(f"{key}: {err.message}", key)
    for req in REQUIRED[cfg["experiment"]]:
        if req not in cfg:
            raise ConfigError(f"{req}: required for {cfg['experiment']}", req)


def expand_grid(g, geometric_default: bool = False) -> np.ndarray:
    if isinstance(g, list):
        return np.asarray(g, dtype=float)
    spacing = g.get("spacing", "geometric" if geometric_default else "linear")
    if spacing == "geometric":
        return np.geomspace(g["start"], g["stop"], g["num"])
    return np.linspace(g["start"], g["stop"], g["num"])


def worker_count(cfg: dict) -> int:
    n = cfg.get("workers", os.cpu_count() or 1)
    cap = os.environ.get("QDYN1D_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"QDYN1D_THREADS must be an integer, got {cap!r}", "QDYN1D_THREADS")
    return n


def _potential(cfg):
    from .potentials import PotentialSpec

    try:
        return PotentialSpec.from_dict(cfg["potential"])
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"potential: {exc}", "potential")


# ---------------------------------------------------------------- experiments

def run_transfer_scan(cfg):
    from .potentials import realize, special_energies
    from .transfer import energy_scan, scan_to_csv

    spec = _potential(cfg)
    if cfg.get("special"):
        grid = [e for e, _ in special_energies(spec)]
    elif "energies" in cfg:
        grid = expand_grid(cfg["energies"]).tolist()
    else:
        raise ConfigError("energies: give a grid or set special=true", "energies")
    n = cfg["n_max"]
    V = realize(spec, (1, n))
    rows = energy_scan(V, grid, n, cfg["norm"], worker_count(cfg), cfg.get("fit_window"))
    summary = {"energies": len(rows), "failed": sum(bool(r.error) for r in rows)}
    return {"scan.csv": scan_to_csv(rows)}, summary, 0


def run_tracemap(cfg):
    from .tracemap import gap_edge_energies, gap_edges_to_csv, orbit_to_csv, trace_orbit

    levels = cfg["m"] if isinstance(cfg["m"], list) else [cfg["m"]]
    lam, R = cfg["lambda"], cfg["R"]
    sets = [gap_edge_energies(m, lam, R) for m in levels]
    out = {"gap_edges.csv": gap_edges_to_csv(sets, cfg["extra_levels"])}
    if "orbit_energy" in cfg:
        out["orbit.csv"] = orbit_to_csv(trace_orbit(cfg["orbit_energy"], lam, R,
                                                    max(max(levels), 1) + cfg["extra_levels"]))
    summary = {"levels": levels, "counts": [len(s) for s in sets],
               "precision_digits": [s.dps for s in sets]}
    return out, summary, 0


def run_dynamics(cfg):
    from .dynamics import (amplitudes_to_csv, bound_scaling_harness, build_operator, diagonalize,
                           predicted_beta_bound, report_summary, report_to_csv)
    from .dynamics import run_dynamics as run
    from .potentials import realize

    spec = _potential(cfg)
    L = cfg["L"]
    window = (1, L) if spec.geometry == "half" else (-L, L)
    op = build_operator(realize(spec, window), spec.geometry)
    eig = diagonalize(op)
    T = expand_grid(cfg["T"], geometric_default=True)
    rep = run(eig, T, cfg["p"], cfg.get("alpha"), worker_count(cfg),
              keep_amplitudes=cfg.get("amplitudes", False))
    out = {"moments.csv": report_to_csv(rep)}
    if rep.amplitudes:
        out["amplitudes.csv"] = amplitudes_to_csv(op, rep.amplitudes)
    summary = report_summary(rep)
    summary["eigen_residual"] = eig.residual
    if "E0" in cfg and "alpha" in cfg:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["T", "p", "lhs", "rhs", "ratio", "valid"])
        spreads = {}
        for p in cfg["p"]:
            h = bound_scaling_harness(eig, cfg["E0"], cfg["alpha"], p, T)
            spreads[str(p)] = h.spread
            for i in range(len(T)):
                w.writerow([repr(float(T[i])), repr(float(p)), repr(float(h.lhs[i])),
                            repr(float(h.rhs[i])), repr(float(h.ratio[i])), int(h.valid[i])])
        out["harness.csv"] = buf.getvalue()
        summary["harness_spread"] = spreads
    if "theorem" in cfg:
        summary["predicted_beta"] = {str(p): predicted_beta_bound(cfg["theorem"], p, cfg.get("alpha"))
                                     for p in cfg["p"]}
    return out, summary, 0


def run_perturb(cfg):
    from .perturb import PerturbationSpec, make_perturbation, prufer_trace, stability_check
    from .potentials import realize

    spec = _potential(cfg)
    try:
        pspec = PerturbationSpec(**{"seed": cfg["seed"], **cfg["perturbation"]})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"perturbation: {exc}", "perturbation")
    n = cfg["n_max"]
    V = realize(spec, (1, n))
    W = make_perturbation(pspec, (1, n))
    tr = prufer_trace(V, W, cfg["E0"], n, cfg["solution"])
    st = stability_check(V, W, cfg["E0"], n, cfg.get("fit_window"))
    summary = {"omega": tr.omega, "max_residual": tr.max_residual, "reconstruction": tr.reconstruction,
               "growth": tr.growth, "alpha": st.alpha, "alpha_perturbed": st.alpha_perturbed,
               "delta_alpha": st.delta, "outside_decay_hypothesis": not pspec.satisfies_decay(st.alpha)}
    return {"prufer.csv": tr.to_csv()}, summary, 0


def run_sturmian(cfg):
    from .cfrac import bounded_density, cf_expand, convergents, sturmian_alpha
    from .potentials import PotentialSpec, realize

    exp = cf_expand(cfg["omega"], cfg["depth"])
    conv = convergents(exp)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "a_k", "p_k", "q_k"])
    for k, a in enumerate(exp.quotients, start=1):
        w.writerow([k, a, conv[k][0], conv[k][1]])
    out = {"cfrac.csv": buf.getvalue()}
    summary = {"depth": exp.depth, "exact": exp.exact, "truncated": exp.truncated,
               "d_hat": bounded_density(exp).value if exp.depth >= 10 else None}
    if cfg["lambda"] != 0 and exp.depth >= 10:
        s = sturmian_alpha(cfg["lambda"], exp, cfg["D"])
        summary.update({"c_lambda": s.c_lambda, "alpha": s.alpha, "D": s.D})
    spec = PotentialSpec("sturmian", {"omega": cfg["omega"], "theta": cfg.get("theta", 0)},
                         coupling=cfg["lambda"])
    out["potential.csv"] = realize(spec, (1, cfg["length"])).to_csv()
    return out, summary, 0


def run_structure_check(cfg):
    from .potentials import check_structure, realize, to_word

    spec = _potential(cfg)
    V = realize(spec, (1, cfg["length"]))
    word = to_word(V, spec.a, spec.b)
    res = check_structure(word, cfg["condition"], cfg["from_index"], cfg.get("k"))
    summary = {"condition": cfg["condition"], "holds": bool(res.ok),
               "first_violation": res.first_violation, "length": cfg["length"]}
    return {}, summary, 0 if res.ok else 1


RUNNERS = {
    "transfer-scan": run_transfer_scan,
    "tracemap": run_tracemap,
    "dynamics": run_dynamics,
    "perturb": run_perturb,
    "sturmian": run_sturmian,
    "structure-check": run_structure_check,
}


def _versions():
    import scipy

    return {"qdyn1d": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}


def run(cfg: dict, out_dir: str | None = None, stream=None) -> int:
    """Execute one validated config; returns the exit status."""
    stream = stream or sys.stdout
    t0 = time.perf_counter()
    artifacts, summary, status = RUNNERS[cfg["experiment"]](cfg)
    out_dir = out_dir or cfg.get("output")
    if out_dir:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        for name, text in artifacts.items():
            (d / name).write_text(text, newline="")
        (d / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        manifest = {"config": cfg, "artifacts": sorted(artifacts) + ["summary.json"],
                    "versions": _versions(), "status": status,
                    "wall_time_s": round(time.perf_counter() - t0, 3)}
        (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    else:
        if artifacts:
            stream.write(next(iter(artifacts.values())))
        else:
            stream.write(json.dumps(summary, sort_keys=True) + "\n")
    return status


# --------------------------------------------------------------------- verify

def _row(name, value, threshold, ok):
    return {"check": name, "value": value, "threshold": threshold, "pass": bool(ok)}


def verify_identities():
    from .potentials import PotentialSamples
    from .tracemap import gap_edge_energies, trace_orbit
    from .transfer import det2, monodromy_energies, step_matrix, transfer_product

    rows = []
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(50):
        V = PotentialSamples(1, rng.uniform(-0.05, 0.05, 2000))
        M = transfer_product(V, 2000, 0, rng.uniform(-1.5, 1.5))
        worst = max(worst, abs(float(det2(M)) - 1))
    rows.append(_row("det T = 1", worst, 1e-9, worst < 1e-9))
    a, b = 0.3, 1.7
    Ta = step_matrix(a, a)
    e = float(np.abs(Ta @ Ta + np.eye(2)).max())
    rows.append(_row("T(a;E=a)^2 = -I", e, 1e-12, e < 1e-12))
    Tb = step_matrix(b, b + 1)
    e = float(np.abs(Tb @ Tb @ Tb + np.eye(2)).max())
    rows.append(_row("T(b;E=b+1)^3 = -I", e, 1e-12, e < 1e-12))
    e = float(np.abs(Ta @ step_matrix(b, a) - np.array([[-1.0, 0.0], [a - b, -1.0]])).max())
    rows.append(_row("T(a;a) T(b;a) = [[-1,0],[a-b,-1]]", e, 0.0, e == 0.0))
    for k in (3, 5, 7):
        Es = monodromy_energies(b, k)
        ref = sorted(b + 2 * math.cos(j * math.pi / k) for j in range(1, k))
        e = max(abs(x - y) for x, y in zip(Es, ref)) if len(Es) == k - 1 else math.inf
        rows.append(_row(f"monodromy energies k={k}", e, 1e-8, e < 1e-8))
    worst = 0.0
    for m in range(0, 5):
        g = gap_edge_energies(m, 1.0, 1.0)
        for E in g.precise:
            o = trace_orbit(E, 1.0, 1.0, m + 5, dps=g.dps)
            worst = max(worst, float(max(abs(o[m + 1] + 2), *(abs(o[m + l] - 2) for l in range(2, 6)))))
    rows.append(_row("gap-edge cascade m<=4", worst, 1e-6, worst < 1e-6))
    return rows


def verify_oracles():
    from .dynamics import (abel_amplitudes, abel_amplitudes_parseval, abel_amplitudes_quadrature,
                           build_operator, diagonalize)
    from .potentials import PotentialSamples
    from .tracemap import hierarchical_samples, trace_orbit
    from .transfer import solve_difference, transfer_product

    rows = []
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(20):
        E, lam, R = rng.uniform(-3, 3), rng.uniform(0.5, 2), float(rng.choice([0.5, 1, 2, 3]))
        m = int(rng.integers(1, 11))
        V = hierarchical_samples(lam, R, 2**m)
        M = transfer_product(V, 2**m, 0, E, dps=40)
        x = trace_orbit(E, lam, R, m, dps=40)[m]
        worst = max(worst, float(abs(M[0, 0] + M[1, 1] - x) / abs(x)))
    rows.append(_row("trace map vs product", worst, 1e-6, worst < 1e-6))
    V = PotentialSamples(1, rng.uniform(-1, 1, 50))
    eig = diagonalize(build_operator(V))
    e = float(np.abs(abel_amplitudes(eig, 7.0) - abel_amplitudes_quadrature(eig, 7.0)).max())
    rows.append(_row("Abel amplitudes vs time quadrature", e, 1e-6, e < 1e-6))
    eig = diagonalize(build_operator(PotentialSamples(1, rng.uniform(-1, 1, 30))))
    e = float(np.abs(abel_amplitudes(eig, 7.0) - abel_amplitudes_parseval(eig, 7.0)).max())
    rows.append(_row("Abel amplitudes vs Parseval route", e, 1e-4, e < 1e-4))
    E, lam, R = 0.37, 1.0, 1.0
    V = hierarchical_samples(lam, R, 2**10)
    psi = solve_difference(V, E, (0.0, 1.0), 0, 2**10)
    o = trace_orbit(E, lam, R, 10)
    e = max(abs(psi[2**m] - float(np.prod(o.traces[:m]))) / abs(psi[2**m]) for m in range(1, 11))
    rows.append(_row("psi_D(2^m) = x_{m-1}...x_0", float(e), 1e-8, e < 1e-8))
    return rows


def verify_bounds():
    from .dynamics import build_operator, diagonalize, predicted_beta_bound
    from .dynamics import run_dynamics as run
    from .potentials import PotentialSpec, realize
    from .transfer import fit_power_law, growth_profile

    rows = []
    spec = PotentialSpec("substitution", {"rule": "period_doubling"}, a=0.0, b=1.0)
    V = realize(spec, (1, 2**14))
    alpha = fit_power_law(growth_profile(V, 0.0, 2**14)).alpha
    rows.append(_row("period doubling alpha at E=a", alpha, 1.1, 0.0 <= alpha <= 1.1))
    eig = diagonalize(build_operator(realize(spec, (1, 1500))))
    T = np.geomspace(10, 60, 6)
    rep = run(eig, T, [6.0, 8.0])
    for p in (6.0, 8.0):
        fit = rep.fits[p]
        bound = predicted_beta_bound("period_doubling", p)
        ok = fit is not None and fit.beta >= bound - 0.3
        rows.append(_row(f"beta({p:g}) vs (p-5)/2", None if fit is None else fit.beta, bound - 0.3, ok))
    return rows


SUITES = {"identities": verify_identities, "oracles": verify_oracles, "bounds": verify_bounds}


def verify(suite: str, stream=None) -> int:
    stream = stream or sys.stdout
    rows = SUITES[suite]()
    width = max(len(r["check"]) for r in rows)
    for r in rows:
        v = r["value"]
        vs = "n/a" if v is None else f"{v:.3e}"
        stream.write(f"{'PASS' if r['pass'] else 'FAIL'}  {r['check']:<{width}}  value={vs}  "
                     f"threshold={r['threshold']:.3g}\n")
    return 0 if all(r["pass"] for r in rows) else 1


# ----------------------------------------------------------------------- main

def _common(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", help="write artifacts and manifest into this directory")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config key (dotted path; VALUE parsed as JSON)")
    p.add_argument("--seed", dest="o_seed", type=int)
    p.add_argument("--workers", dest="o_workers", type=int)


def _potential_flags(p):
    p.add_argument("--family", dest="o_potential__family")
    p.add_argument("--a", dest="o_potential__a", type=float)
    p.add_argument("--b", dest="o_potential__b", type=float)
    p.add_argument("--coupling", dest="o_potential__coupling", type=float)
    p.add_argument("--geometry", dest="o_potential__geometry")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdyn1d", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transfer-scan", help="transfer-matrix growth exponents over an energy grid")
    _common(p)
    _potential_flags(p)
    p.add_argument("--n-max", dest="o_n_max", type=int)
    p.add_argument("--norm", dest="o_norm", choices=["op", "hs"])
    p.add_argument("--special", dest="o_special", action="store_const", const=True)

    p = sub.add_parser("tracemap", help="gap edges of the hierarchical trace map")
    _common(p)
    p.add_argument("--m", dest="o_m", type=int)
    p.add_argument("--lambda", dest="o_lambda", type=float)
    p.add_argument("--R", dest="o_R", type=float)
    p.add_argument("--extra-levels", dest="o_extra_levels", type=int)
    p.add_argument("--orbit-energy", dest="o_orbit_energy", type=float)

    p = sub.add_parser("dynamics", help="Abel-averaged moments and transport exponents")
    _common(p)
    _potential_flags(p)
    p.add_argument("--L", dest="o_L", type=int)
    p.add_argument("--p", dest="o_p", type=float, nargs="+")
    p.add_argument("--T", dest="o_T", type=float, nargs="+")
    p.add_argument("--alpha", dest="o_alpha", type=float)
    p.add_argument("--E0", dest="o_E0", type=float)
    p.add_argument("--theorem", dest="o_theorem")

    p = sub.add_parser("perturb", help="Prufer stability check under a decaying perturbation")
    _common(p)
    _potential_flags(p)
    p.add_argument("--E0", dest="o_E0", type=float)
    p.add_argument("--n-max", dest="o_n_max", type=int)
    p.add_argument("--C2", dest="o_perturbation__C2", type=float)
    p.add_argument("--decay", dest="o_perturbation__decay", type=float)
    p.add_argument("--solution", dest="o_solution", choices=["D", "N"])

    p = sub.add_parser("sturmian", help="continued fraction, density and exponent of a rotation number")
    _common(p)
    p.add_argument("--omega", dest="o_omega")
    p.add_argument("--theta", dest="o_theta")
    p.add_argument("--depth", dest="o_depth", type=int)
    p.add_argument("--lambda", dest="o_lambda", type=float)
    p.add_argument("--D", dest="o_D", type=float)
    p.add_argument("--length", dest="o_length", type=int)

    p = sub.add_parser("structure-check", help="block-structure conditions of a two-valued word")
    _common(p)
    _potential_flags(p)
    p.add_argument("--condition", dest="o_condition")
    p.add_argument("--k", dest="o_k", type=int)
    p.add_argument("--length", dest="o_length", type=int)
    p.add_argument("--from-index", dest="o_from_index", type=int)

    p = sub.add_parser("verify", help="run an invariant suite and print a pass/fail table")
    p.add_argument("suite", choices=sorted(SUITES))
    return parser


def _error(kind: str, exc: Exception, key=None) -> None:
    payload = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    if key is not None:
        payload["key"] = key
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return verify(args.suite)
        cfg = build_config(args.command, args)
        return run(cfg, args.out)
    except ConfigError as exc:
        _error("config", exc, exc.key)
        return 2
    except (Qdyn1dError, ValueError, ArithmeticError, OverflowError) as exc:
        _error("module", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
