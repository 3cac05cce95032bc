"""Decaying perturbations ``V -> V + W`` and their Prufer-variable bookkeeping.

With a complex reference solution ``phi`` of the unperturbed equation
(here ``phi = phi_D + i phi_N``), any real solution ``psi`` of the perturbed
equation is written ``(psi(n), psi(n-1)) = Im[rho(n) (phi(n), phi(n-1))]``.
Then ``rho(n+1) = rho(n) (1 + U(n) sin(theta) e^{-i theta})`` with
``U(n) = -2 W(n) |phi(n)|^2 / omega`` and ``theta = arg rho(n) + arg phi(n)``,
so ``R = |rho|`` obeys

    R(n+1)^2 = R(n)^2 [1 + U sin(2 theta) + U^2 sin(theta)^2].

``rho`` is recovered independently at every site from the 2x2 system, so the
identity is a genuine numerical check, not a tautology.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateReference
from .potentials import PotentialSamples
from .transfer import fit_power_law, growth_profile

PATTERNS = ("deterministic", "alternating", "random")


@dataclass(frozen=True)
class PerturbationSpec:
    """``W(n) = s(n) C2 (shift + |n|)^(-decay)``, optionally cut off after ``support``.

    ``s(n)`` is ``+1`` (deterministic), ``(-1)^n`` (alternating) or a seeded
    random sign. ``decay=math.inf`` with ``support`` gives a finitely
    supported perturbation of size ``C2``.
    """

    C2: float
    decay: float
    pattern: str = "deterministic"
    seed: int = 0
    shift: float = 1.0
    support: int | None = None

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"pattern must be one of {PATTERNS}")
        if self.decay < 0:
            raise ValueError("decay must be >= 0")
        if self.decay == math.inf and self.support is None:
            raise ValueError("infinite decay needs a finite support")

    def satisfies_decay(self, alpha: float) -> bool:
        """Whether ``|W(n)| <= C (1 + |n|)^(-1 - 2 alpha - eps)`` for some ``eps > 0``."""
        return self.support is not None or self.decay > 1 + 2 * alpha

    @property
    def flagged(self) -> bool:
        """Decay too slow for the stability theory at any ``alpha >= 0``."""
        return not self.satisfies_decay(0.0)


def make_perturbation(spec: PerturbationSpec, window) -> PotentialSamples:
    lo, hi = int(window[0]), int(window[1])
    n = np.arange(lo, hi + 1)
    base = np.abs(n).astype(float) + spec.shift
    with np.errstate(divide="ignore"):
        if spec.decay == math.inf:
            mag = np.full(len(n), spec.C2)
        else:
            mag = spec.C2 * base ** (-spec.decay)
    mag[~np.isfinite(mag)] = 0.0
    if spec.pattern == "alternating":
        sign = np.where(n % 2 == 0, 1.0, -1.0)
    elif spec.pattern == "random":
        sign = np.random.default_rng(spec.seed).choice([-1.0, 1.0], size=len(n))
    else:
        sign = np.ones(len(n))
    W = sign * mag
    if spec.support is not None:
        W[np.abs(n) > spec.support] = 0.0
    meta = {"family": "perturbation", "C2": spec.C2, "decay": spec.decay,
            "pattern": spec.pattern, "flagged": spec.flagged}
    return PotentialSamples(lo, W, meta)


def _solve_ld(values, E, init, n_max):
    """``psi(0..n_max)`` in long double; ``values[k]`` is the potential at site ``k+1``."""
    ld = np.longdouble
    psi = np.empty(n_max + 1, dtype=ld)
    psi[0], psi[1] = ld(init[0]), ld(init[1])
    E = ld(E)
    for k in range(1, n_max):
        psi[k + 1] = (E - values[k - 1]) * psi[k] - psi[k - 1]
    return psi


@dataclass(frozen=True)
class PruferTrace:
    n: np.ndarray = field(repr=False)
    R: np.ndarray = field(repr=False)
    U: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    residual: np.ndarray = field(repr=False)  # residual[i] checks the step n[i] -> n[i]+1
    reconstruction: float
    omega: float
    solution: str

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual)) if len(self.residual) else 0.0

    @property
    def growth(self) -> float:
        """``max_n R(n) / R(1)``."""
        return float(np.max(self.R) / self.R[0])

    def multiplicative_bound(self) -> float:
        """``R(1) exp(sum |U| + sum U^2)``, an upper bound for ``max R``."""
        U = self.U[:-1]
        return float(self.R[0] * math.exp(np.sum(np.abs(U)) + np.sum(U * U)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "R", "U", "theta", "residual"])
        res = list(self.residual) + [float("nan")]
        for i, n in enumerate(self.n):
            w.writerow([int(n), repr(float(self.R[i])), repr(float(self.U[i])),
                        repr(float(self.theta[i])), "" if math.isnan(res[i]) else repr(float(res[i]))])
        return buf.getvalue()


def prufer_trace(V: PotentialSamples, W: PotentialSamples, E: float, n_max: int,
                 solution: str = "D") -> PruferTrace:
    """Prufer data of the perturbed basic solution ``psi_D`` or ``psi_N`` on ``1..n_max``.

    Both ``V`` and ``W`` must cover sites ``1..n_max``.
    """
    if solution not in ("D", "N"):
        raise ValueError("solution must be 'D' or 'N'")
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    v = np.asarray(V.slice(1, n_max), dtype=np.longdouble)
    w = np.asarray(W.slice(1, n_max), dtype=np.longdouble)
    phi_d = _solve_ld(v, E, (0, 1), n_max)
    phi_n = _solve_ld(v, E, (1, 0), n_max)
    # phi = phi_D + i phi_N: Re = phi_d, Im = phi_n
    omega = 2 * float(phi_n[1] * phi_d[0] - phi_d[1] * phi_n[0])  # 2 Im(phi(1) conj phi(0))
    if abs(omega) < 1e-12:
        raise DegenerateReference(f"reference Wronskian {omega!r} vanishes")
    init = (0, 1) if solution == "D" else (1, 0)
    psi = _solve_ld(v + w, E, init, n_max)

    n = np.arange(1, n_max + 1)
    a, b = phi_n[n], phi_d[n]          # Im phi(n), Re phi(n)
    c, d = phi_n[n - 1], phi_d[n - 1]  # Im phi(n-1), Re phi(n-1)
    # a d - b c is the reference Wronskian, exactly omega / 2 at every site
    det = np.longdouble(omega) / 2
    r1 = (psi[n] * d - b * psi[n - 1]) / det
    r2 = (a * psi[n - 1] - c * psi[n]) / det
    recon = max(np.max(np.abs(r1 * a + r2 * b - psi[n])), np.max(np.abs(r1 * c + r2 * d - psi[n - 1])))
    R2 = r1 * r1 + r2 * r2
    theta = np.arctan2(r2, r1) + np.arctan2(a, b)
    U = -2 * w * (a * a + b * b) / np.longdouble(omega)
    s = np.sin(theta)
    pred = R2[:-1] * (1 + U[:-1] * np.sin(2 * theta[:-1]) + U[:-1] ** 2 * s[:-1] ** 2)
    residual = np.abs(R2[1:] - pred)
    return PruferTrace(n, np.sqrt(R2).astype(float), U.astype(float), theta.astype(float),
                       residual.astype(float), float(recon), omega, solution)


@dataclass(frozen=True)
class StabilityResult:
    alpha: float
    alpha_perturbed: float
    n_max: int

    @property
    def delta(self) -> float:
        return abs(self.alpha_perturbed - self.alpha)


def stability_check(V: PotentialSamples, W: PotentialSamples, E0: float, n_max: int,
                    fit_window=None) -> StabilityResult:
    """Fitted transfer-matrix growth exponents at ``E0`` with and without ``W``."""
    Vp = PotentialSamples(V.start, V.values + W.slice(V.start, V.stop), dict(V.meta))
    fa = fit_power_law(growth_profile(V, E0, n_max), fit_window)
    fb = fit_power_law(growth_profile(Vp, E0, n_max), fit_window)
    return StabilityResult(fa.alpha, fb.alpha, n_max)
