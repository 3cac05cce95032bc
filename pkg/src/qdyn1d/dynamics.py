"""Wavepacket spreading on a finite lattice.

The initial state is ``delta_1``. Everything is computed in the spectral
representation of the truncated operator, so Abel averages of
``|<delta_n, exp(-itH) delta_1>|^2`` are exact sums rather than time
integrals:

    a(n, T) = sum_{j,k} c_j(n) c_k(n) * 2 / (4 + T^2 (E_j - E_k)^2),
    c_j(n) = u_j(n) u_j(1).

The inner sum over ``k`` is ``Im <delta_n, (H - E_j - 2i/T)^-1 delta_1> / T``,
which is how it is evaluated for large lattices (one tridiagonal solve per
eigenvalue instead of an ``L x L`` kernel per site).
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.linalg import eigh_tridiagonal

from .errors import FiniteSizeViolation, UnknownTheorem
from .potentials import PotentialSamples

GUARD_WIDTH = 10
GUARD_MASS = 1e-8
RESOLVENT_CHUNK = 512


@dataclass(frozen=True)
class LatticeOperator:
    """Symmetric tridiagonal ``H`` with unit hopping and Dirichlet cutoffs.

    ``sites[i]`` is the lattice label of row ``i``; the initial state sits
    on the row labelled 1.
    """

    geometry: str
    sites: np.ndarray = field(repr=False)
    diagonal: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.diagonal)

    @property
    def origin_index(self) -> int:
        return int(np.searchsorted(self.sites, 1))

    def to_dense(self) -> np.ndarray:
        L = self.size
        H = np.diag(self.diagonal.astype(float))
        i = np.arange(L - 1)
        H[i, i + 1] = H[i + 1, i] = 1.0
        return H

    def guard_rows(self) -> np.ndarray:
        """Rows within ``GUARD_WIDTH`` sites of a truncation boundary."""
        w = min(GUARD_WIDTH, self.size)
        right = np.arange(self.size - w, self.size)
        if self.geometry == "half":
            return right
        return np.union1d(np.arange(w), right)


def build_operator(V: PotentialSamples, geometry: str = "half") -> LatticeOperator:
    """Half line: sites ``1..L``. Whole line: sites ``-L..L``."""
    if geometry == "half":
        if V.start != 1:
            raise ValueError(f"half-line window must start at site 1, not {V.start}")
    elif geometry == "whole":
        if V.start != -V.stop or V.stop < 1:
            raise ValueError(f"whole-line window must be [-L, L], got [{V.start}, {V.stop}]")
    else:
        raise ValueError(f"unknown geometry {geometry!r}")
    return LatticeOperator(geometry, V.sites.copy(), np.array(V.values, dtype=float))


@dataclass(frozen=True)
class EigenData:
    operator: LatticeOperator = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    vectors: np.ndarray = field(repr=False)  # column j is u_j
    residual: float = 0.0

    @property
    def weights(self) -> np.ndarray:
        """Spectral weights ``u_j(1)^2`` of ``delta_1``."""
        return self.vectors[self.operator.origin_index] ** 2

    def window_mass(self, lo: float, hi: float) -> float:
        """Finite-lattice surrogate ``sum_{lo <= E_j <= hi} u_j(1)^2`` of the spectral measure."""
        sel = (self.eigenvalues >= lo) & (self.eigenvalues <= hi)
        return float(self.weights[sel].sum())


def diagonalize(op: LatticeOperator) -> EigenData:
    L = op.size
    if L == 1:
        E, U = op.diagonal.copy(), np.ones((1, 1))
    else:
        E, U = eigh_tridiagonal(op.diagonal, np.ones(L - 1))
    HU = op.diagonal[:, None] * U
    HU[:-1] += U[1:]
    HU[1:] += U[:-1]
    res = float(np.max(np.linalg.norm(HU - U * E, axis=0))) if L else 0.0
    return EigenData(op, E, U, res)


def _resolvent_columns(diagonal, z, source: int) -> np.ndarray:
    """``x[j] = (H - z_j)^-1 e_source`` for a batch of complex shifts ``z``.

    Thomas elimination, vectorized across the batch.
    """
    L = len(diagonal)
    B = len(z)
    cp = np.empty((L, B), dtype=complex)
    dp = np.empty((L, B), dtype=complex)
    piv = diagonal[0] - z
    cp[0] = 1.0 / piv
    dp[0] = (1.0 if source == 0 else 0.0) / piv
    for i in range(1, L):
        piv = (diagonal[i] - z) - cp[i - 1]
        cp[i] = 1.0 / piv
        rhs = (1.0 if i == source else 0.0) - dp[i - 1]
        dp[i] = rhs / piv
    x = np.empty((L, B), dtype=complex)
    x[-1] = dp[-1]
    for i in range(L - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x.T


def abel_amplitudes(eig: EigenData, T: float, method: str = "resolvent") -> np.ndarray:
    """``a(n, T)`` for every row of the lattice.

    ``method="double_sum"`` evaluates the closed form literally (``O(L^3)``,
    reference for small lattices); ``"resolvent"`` is the ``O(L^2)`` route.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    U, E = eig.vectors, eig.eigenvalues
    c = U * U[eig.operator.origin_index]  # c[n, j] = u_j(n) u_j(1)
    if method == "double_sum":
        K = 2.0 / (4.0 + (T * (E[:, None] - E[None, :])) ** 2)
        return np.einsum("nj,jk,nk->n", c, K, c)
    if method != "resolvent":
        raise ValueError(f"unknown method {method!r}")
    a = np.zeros(len(E))
    src = eig.operator.origin_index
    eta = 2.0 / T
    for s in range(0, len(E), RESOLVENT_CHUNK):
        z = E[s: s + RESOLVENT_CHUNK] + 1j * eta
        G = _resolvent_columns(eig.operator.diagonal, z, src)
        a += np.einsum("nj,jn->n", c[:, s: s + RESOLVENT_CHUNK], G.imag)
    return a / T


def abel_amplitudes_quadrature(eig: EigenData, T: float, cutoff: float = 20.0,
                               epsabs: float = 1e-12) -> np.ndarray:
    """Direct time integral ``(1/T) int_0^{cutoff T} e^{-2t/T} |<delta_n, psi(t)>|^2 dt``."""
    U, E = eig.vectors, eig.eigenvalues
    c = U * U[eig.operator.origin_index]

    def integrand(t):
        amp = c @ np.exp(-1j * E * t)
        return np.exp(-2.0 * t / T) * np.abs(amp) ** 2

    val, _ = integrate.quad_vec(integrand, 0.0, cutoff * T, epsabs=epsabs, epsrel=1e-12,
                                limit=2000)
    return val / T


def abel_amplitudes_parseval(eig: EigenData, T: float, epsabs: float = 1e-10) -> np.ndarray:
    """Energy route ``(eps / 2 pi) int |<delta_n, (H - E - i eps)^-1 delta_1>|^2 dE``, ``eps = 1/T``."""
    U, E = eig.vectors, eig.eigenvalues
    c = U * U[eig.operator.origin_index]
    eps = 1.0 / T
    # E = center + scale * tan(s) maps the real line onto (-pi/2, pi/2)
    center = 0.5 * (E[0] + E[-1])
    scale = max(0.5 * (E[-1] - E[0]), eps)

    def integrand(s):
        x = center + scale * math.tan(s)
        jac = scale / math.cos(s) ** 2
        g = c @ (1.0 / (E - x - 1j * eps))
        return np.abs(g) ** 2 * jac

    h = 0.5 * math.pi
    pts = sorted(set(float(np.arctan((e - center) / scale)) for e in E))
    val, _ = integrate.quad_vec(integrand, -h, h, epsabs=epsabs, epsrel=1e-10, limit=4000,
                                points=pts if len(pts) < 200 else None)
    return eps / (2.0 * math.pi) * val


def boundary_mass(op: LatticeOperator, a: np.ndarray) -> float:
    return float(np.sum(a[op.guard_rows()]))


def check_guard(op: LatticeOperator, a: np.ndarray) -> float:
    m = boundary_mass(op, a)
    if not m < GUARD_MASS:
        raise FiniteSizeViolation(f"mass {m:.3e} within {GUARD_WIDTH} sites of the cutoff")
    return m


def moment(op: LatticeOperator, a: np.ndarray, p: float, check: bool = True) -> float:
    """``sum_n |n|^p a(n, T)``."""
    if p <= 0:
        raise ValueError("p must be positive")
    if check:
        check_guard(op, a)
    return float(np.sum(np.abs(op.sites.astype(float)) ** p * a))


def outside_probability(op: LatticeOperator, a: np.ndarray, alpha: float, T: float,
                        check: bool = True) -> float:
    """``P(T) = sum_{|n| >= N(T)} a(n, T)`` with ``N(T) = T^(1/(1+alpha))``."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    N = T ** (1.0 / (1.0 + alpha))
    half = op.size / 2 if op.geometry == "half" else op.sites[-1] / 2
    if N > half:
        raise FiniteSizeViolation(f"N(T) = {N:.1f} exceeds half the lattice ({half:g})")
    if check:
        check_guard(op, a)
    return float(np.sum(a[np.abs(op.sites) >= N]))


def borel_transform(eig: EigenData, E, eps: float):
    """``F(E + i eps) = sum_j u_j(1)^2 / (E_j - E - i eps)``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    E = np.asarray(E, dtype=float)
    z = E[..., None] + 1j * eps
    out = np.sum(eig.weights / (eig.eigenvalues - z), axis=-1)
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TransportFit:
    beta: float
    beta_running: float
    n_used: int
    flagged: bool
    running: tuple = field(default=(), repr=False)


def transport_exponent(T, moments, valid=None) -> TransportFit:
    """Global log-log slope and running minimum of consecutive two-point slopes.

    Entries with ``valid == False`` (finite-size guard failures) are dropped
    and the fit is flagged.
    """
    T = np.asarray(T, dtype=float)
    m = np.asarray(moments, dtype=float)
    ok = np.ones(len(T), bool) if valid is None else np.asarray(valid, bool)
    ok &= np.isfinite(m) & (m > 0)
    if ok.sum() < 5:
        raise ValueError(f"need >= 5 valid T values, have {int(ok.sum())}")
    lt, lm = np.log(T[ok]), np.log(m[ok])
    beta = float(np.polyfit(lt, lm, 1)[0])
    slopes = np.diff(lm) / np.diff(lt)
    running = np.minimum.accumulate(slopes)
    return TransportFit(beta, float(running[-1]), int(ok.sum()), bool(not ok.all()),
                        tuple(float(s) for s in running))


# closed-form lower bounds on beta^-(p)
THEOREM_BOUNDS = {
    "power_law": lambda p, a: (p - 3 * a) / (1 + a),
    "power_law_eigenvalue": lambda p, a: (p + 1 - 2 * a) / (1 + a),
    "perturbed": lambda p, a: (p - 1 - 4 * a) / (1 + a),
    "period_doubling": lambda p, a: (p - 5) / 2,
    "bounded": lambda p, a: p - 1,
}


def predicted_beta_bound(theorem: str, p: float, alpha: float | None = None) -> float:
    """Lower bound on ``beta^-(p)`` implied by the named result.

    ``power_law``: transfer matrices bounded by ``C n^alpha`` at one energy;
    ``power_law_eigenvalue``: the same with an eigenvalue there;
    ``perturbed``: the stability corollary; ``period_doubling``: that model
    at ``E = a``; ``bounded``: uniformly bounded transfer matrices.
    """
    try:
        f = THEOREM_BOUNDS[theorem]
    except KeyError:
        raise UnknownTheorem(f"unknown theorem id {theorem!r}; known: {sorted(THEOREM_BOUNDS)}")
    if theorem in ("power_law", "power_law_eigenvalue", "perturbed"):
        if alpha is None or alpha < 0:
            raise ValueError("alpha >= 0 required")
    return float(f(p, alpha))


@dataclass
class DynamicsReport:
    T: np.ndarray
    p: tuple
    moments: np.ndarray  # shape (len(T), len(p)); nan where the guard failed
    boundary: np.ndarray
    valid: np.ndarray
    alpha: float | None = None
    outside: np.ndarray | None = None
    amplitudes: dict = field(default_factory=dict, repr=False)
    fits: dict = field(default_factory=dict)

    @property
    def normalization_error(self) -> float:
        if not self.amplitudes:
            return float("nan")
        return max(abs(float(a.sum()) - 0.5) for a in self.amplitudes.values())


def run_dynamics(eig: EigenData, T_grid, p_list, alpha: float | None = None,
                 workers: int = 1, keep_amplitudes: bool = False) -> DynamicsReport:
    """Amplitudes, moments, guard and ``beta^-`` fits over a grid of ``T``."""
    T_grid = np.asarray(T_grid, dtype=float)
    op = eig.operator
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            amps = list(ex.map(lambda T: abel_amplitudes(eig, T), T_grid))
    else:
        amps = [abel_amplitudes(eig, T) for T in T_grid]
    boundary = np.array([boundary_mass(op, a) for a in amps])
    valid = boundary < GUARD_MASS
    M = np.full((len(T_grid), len(p_list)), np.nan)
    P = np.full(len(T_grid), np.nan) if alpha is not None else None
    for i, a in enumerate(amps):
        if abs(a.sum() - 0.5) > 1e-8:
            raise ArithmeticError(f"normalization lost at T={T_grid[i]}: sum a = {a.sum()!r}")
        for k, p in enumerate(p_list):
            M[i, k] = moment(op, a, p, check=False)
        if alpha is not None:
            try:
                P[i] = outside_probability(op, a, alpha, T_grid[i], check=False)
            except FiniteSizeViolation:
                valid[i] = False
    M[~valid] = np.nan
    if P is not None:
        P[~valid] = np.nan
    fits = {}
    for k, p in enumerate(p_list):
        try:
            fits[p] = transport_exponent(T_grid, M[:, k], valid)
        except ValueError:
            fits[p] = None
    return DynamicsReport(T_grid, tuple(p_list), M, boundary, valid, alpha, P,
                          dict(zip(T_grid.tolist(), amps)) if keep_amplitudes else {}, fits)


@dataclass(frozen=True)
class HarnessReport:
    T: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    ratio: np.ndarray
    valid: np.ndarray
    p: float
    alpha: float
    E0: float

    @property
    def spread(self) -> float:
        """``max / min`` of the ratio over guard-valid ``T``."""
        r = self.ratio[self.valid]
        return float(r.max() / r.min())


def bound_scaling_harness(eig: EigenData, E0: float, alpha: float, p: float, T_grid
                          ) -> HarnessReport:
    """Compare ``<|X|^p>(T)`` with ``T^((p - 3 alpha)/(1 + alpha)) (1/T + mu([E0 -+ 1/T]))``.

    Only the scaling is meaningful (the constant is existential): a ratio
    bounded away from zero across ``T`` is consistent with the lower bound.
    """
    op = eig.operator
    if op.size <= 2 * GUARD_WIDTH:
        raise FiniteSizeViolation(f"lattice of {op.size} sites cannot pass the boundary guard")
    T_grid = np.asarray(T_grid, dtype=float)
    lhs, rhs, valid = [], [], []
    for T in T_grid:
        a = abel_amplitudes(eig, T)
        valid.append(boundary_mass(op, a) < GUARD_MASS)
        lhs.append(moment(op, a, p, check=False))
        mu = eig.window_mass(E0 - 1.0 / T, E0 + 1.0 / T)
        rhs.append(T ** ((p - 3 * alpha) / (1 + alpha)) * (1.0 / T + mu))
    lhs, rhs, valid = np.array(lhs), np.array(rhs), np.array(valid)
    if not valid.any():
        raise FiniteSizeViolation("no T on the grid passes the boundary guard")
    return HarnessReport(T_grid, lhs, rhs, lhs / rhs, valid, p, alpha, E0)


def report_to_csv(rep: DynamicsReport) -> str:
    """Rows ``(T, p, moment, P_T, beta_running, valid)``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["T", "p", "moment", "P_T", "beta_running", "valid"])
    for k, p in enumerate(rep.p):
        fit = rep.fits.get(p)
        run = list(fit.running) if fit else []
        j = 0
        for i, T in enumerate(rep.T):
            br = ""
            if rep.valid[i] and fit:
                # the running slope is defined from the second valid T on
                br = repr(run[j - 1]) if j > 0 else ""
                j += 1
            Pt = "" if rep.outside is None or not np.isfinite(rep.outside[i]) else repr(float(rep.outside[i]))
            m = rep.moments[i, k]
            w.writerow([repr(float(T)), repr(float(p)), repr(float(m)) if np.isfinite(m) else "",
                        Pt, br, int(rep.valid[i])])
    return buf.getvalue()


def amplitudes_to_csv(op: LatticeOperator, amplitudes: dict) -> str:
    """Long-format ``(n, T, a)``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "T", "a"])
    for T, a in amplitudes.items():
        for n, v in zip(op.sites, a):
            w.writerow([int(n), repr(float(T)), repr(float(v))])
    return buf.getvalue()


def report_summary(rep: DynamicsReport) -> dict:
    return {
        "T": [float(t) for t in rep.T],
        "p": list(rep.p),
        "valid": [bool(v) for v in rep.valid],
        "boundary_mass": [float(b) for b in rep.boundary],
        "alpha": rep.alpha,
        "beta": {str(p): (None if f is None else {"global": f.beta, "running_min": f.beta_running,
                                                 "n_used": f.n_used, "flagged": f.flagged})
                 for p, f in rep.fits.items()},
        "note": "spectral quantities use the truncated-lattice measure sum_j u_j(1)^2 delta_{E_j}",
    }


def summary_json(rep: DynamicsReport) -> str:
    return json.dumps(report_summary(rep), indent=2, sort_keys=True)
