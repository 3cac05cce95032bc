"""Trace map of the hierarchical potential ``V(n) = lambda * f(ord n)``.

With ``f(m) = 1 + R + ... + R^(m-1)`` the traces ``x_m(E) = tr T(2^m, 0; E)``
obey ``x_{m+1} = x_m^2 - 2 + R x_m (x_m - x_{m-1}^2 + 2)`` for ``m >= 1``.
Zeros of ``x_m`` are gap edges; at each of them the orbit continues
``-2, 2, 2, ...``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RootFindingFailure
from .potentials import PotentialSpec, hierarchical_f, realize
from .transfer import fit_power_law, growth_profile, solve_difference, step_matrix

SATURATION = 1e150


@dataclass(frozen=True)
class TraceOrbit:
    lam: float
    R: float
    E: float
    traces: tuple
    saturated: bool = False

    def __getitem__(self, m):
        return self.traces[m]


def _first_trace(E, lam):
    # V(1) = lam * f(0) = 0, V(2) = lam * f(1) = lam
    M = step_matrix(lam, E) @ step_matrix(0.0, E)
    return M[0, 0] + M[1, 1]


def trace_orbit(E: float, lam: float, R: float, m_max: int, dps: int | None = None) -> TraceOrbit:
    """``x_0 .. x_{m_max}``; with ``dps`` the recurrence runs in mpmath.

    In float mode the orbit stops growing past ``SATURATION`` and the
    remaining entries are ``inf`` with ``saturated=True``.
    """
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    if dps is not None:
        import mpmath

        ctx = mpmath.mp.clone()
        ctx.dps = dps
        E_, lam_, R_ = ctx.mpf(E), ctx.mpf(lam), ctx.mpf(R)
        xs = [E_, E_ * E_ - lam_ * E_ - 2]
        for _ in range(1, m_max):
            x, xp = xs[-1], xs[-2]
            xs.append(x * x - 2 + R_ * x * (x - xp * xp + 2))
        return TraceOrbit(lam, R, E, tuple(xs[: m_max + 1]))
    xs = [float(E), float(_first_trace(E, lam))]
    saturated = False
    for _ in range(1, m_max):
        x, xp = xs[-1], xs[-2]
        if abs(x) > SATURATION or abs(xp) > SATURATION:
            saturated = True
            break
        xs.append(x * x - 2.0 + R * x * (x - xp * xp + 2.0))
    xs = xs[: m_max + 1]
    xs += [math.inf] * (m_max + 1 - len(xs))
    return TraceOrbit(lam, R, float(E), tuple(xs), saturated)


def trace_values(E, lam: float, R: float, m: int) -> np.ndarray:
    """Vectorized ``x_m(E)`` over an array of energies (float, no saturation)."""
    E = np.asarray(E, dtype=float)
    if m == 0:
        return E.copy()
    xp, x = E, E * E - lam * E - 2.0
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(1, m):
            xp, x = x, x * x - 2.0 + R * x * (x - xp * xp + 2.0)
    return x


@dataclass(frozen=True)
class GapEdgeSet:
    m: int
    lam: float
    R: float
    energies: tuple
    precise: tuple = field(default=(), repr=False)
    dps: int = 30

    def __len__(self):
        return len(self.energies)


def _bisect(fun, lo, hi, tol):
    flo = fun(lo)
    while True:
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol or mid in (lo, hi):
            return mid
        fm = fun(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid


def floquet_matrix(values, theta: float) -> np.ndarray:
    """One period of the periodic operator with Bloch phase ``theta``.

    Its eigenvalues are the energies where the trace of the period's
    transfer matrix equals ``2 cos(theta)``.
    """
    N = len(values)
    H = np.diag(np.asarray(values, dtype=complex))
    idx = np.arange(N - 1)
    H[idx, idx + 1] += 1.0
    H[idx + 1, idx] += 1.0
    H[0, N - 1] += np.exp(-1j * theta)
    H[N - 1, 0] += np.exp(1j * theta)
    return H


MAX_GAP_EDGE_LEVEL = 8


def _mp_trace_and_derivative(E, lam, R, m, with_previous=False):
    x_prev, d_prev = E, 1
    x, d = E * E - lam * E - 2, 2 * E - lam
    for _ in range(1, m):
        inner = x - x_prev * x_prev + 2
        d_inner = d - 2 * x_prev * d_prev
        x_new = x * x - 2 + R * x * inner
        d_new = 2 * x * d + R * (d * inner + x * d_inner)
        x_prev, d_prev, x, d = x, d, x_new, d_new
    if with_previous:
        return x, d, x_prev
    return x, d


def _newton_polish(ctx, roots, lam, R, m):
    eps = ctx.mpf(10) ** (-(ctx.dps - 5))
    out, slopes = [], []
    for E in roots:
        E = ctx.mpf(E)
        for _ in range(60):
            x, d = _mp_trace_and_derivative(E, lam, R, m)
            if d == 0:
                break
            step = x / d
            E -= step
            if abs(step) <= eps * max(1, abs(E)):
                break
        out.append(E)
        _, d, x_prev = _mp_trace_and_derivative(E, lam, R, m, with_previous=True)
        # x_{m+1} + 2 ~ R x_m x_{m-1}^2: a residual in x_m is amplified by x_{m-1}^2
        slopes.append(abs(d) * max(1, x_prev * x_prev))
    return out, slopes


def gap_edge_energies(m: int, lam: float, R: float, dps: int | None = None) -> GapEdgeSet:
    """All ``2^m`` zeros of ``x_m``, in extended precision.

    Zeros cluster exponentially tightly in ``2^m`` (tunnelling bands), so
    seeds are the eigenvalues of the ``2^m``-periodic operator at Bloch
    phase pi/2 computed with mpmath (starting at ``dps`` digits, default
    ``2^m + 30``), Newton-polished on the recurrence at a precision raised
    until it resolves the steepest slope, and certified by a sign change of
    ``x_m`` on each side.
    """
    import mpmath

    if m < 0:
        raise ValueError("m must be >= 0")
    if m > MAX_GAP_EDGE_LEVEL:
        raise ValueError(f"m > {MAX_GAP_EDGE_LEVEL} is beyond the configured cap")
    if m == 0:
        return GapEdgeSet(0, lam, R, (0.0,), (mpmath.mpf(0),))
    ctx = mpmath.mp.clone()
    ctx.dps = dps or 2**m + 30
    lam_, R_ = ctx.mpf(lam), ctx.mpf(R)
    values = hierarchical_samples(lam, R, 2**m).values
    N = len(values)
    H = ctx.zeros(N, N)
    for i, v in enumerate(values):
        H[i, i] = ctx.mpf(float(v))
    for i in range(N - 1):
        H[i, i + 1] += 1
        H[i + 1, i] += 1
    H[0, N - 1] += -1j
    H[N - 1, 0] += 1j
    roots = sorted(ctx.re(e) for e in ctx.eighe(H, eigvals_only=True))
    # x_m varies on scales ~1/|x_m'| which is doubly exponential in m, so the
    # working precision follows the largest (amplified) slope seen at the roots
    for _ in range(6):
        roots, slopes = _newton_polish(ctx, roots, lam_, R_, m)
        needed = max(int(ctx.log10(abs(d))) for d in slopes if d != 0) + 40
        if ctx.dps >= needed:
            break
        ctx.dps = needed
    roots.sort()
    gaps = [b - a for a, b in zip(roots, roots[1:])]
    if len(roots) != 2**m or any(not g > 0 for g in gaps):
        raise RootFindingFailure(f"expected {2**m} distinct zeros of x_{m}")
    for i, E in enumerate(roots):
        room = min(gaps[max(i - 1, 0): i + 1] or [ctx.mpf(1)])
        x0, d0 = _mp_trace_and_derivative(E, lam_, R_, m)
        delta = min(room / 4, ctx.mpf(10) ** -15 / abs(d0)) if d0 != 0 else room / 4
        lo = _mp_trace_and_derivative(E - delta, lam_, R_, m)[0]
        hi = _mp_trace_and_derivative(E + delta, lam_, R_, m)[0]
        if lo * hi > 0:
            raise RootFindingFailure(
                f"zero {ctx.nstr(E, 20)} of x_{m} not isolated (bracket {ctx.nstr(delta, 5)}, "
                f"x_m = {ctx.nstr(lo, 5)}, {ctx.nstr(hi, 5)})"
            )
    return GapEdgeSet(m, lam, R, tuple(float(E) for E in roots), tuple(roots), ctx.dps)


def f_R(l, R: float):
    """Asymptotic profile of the gap-edge solution growth (vectorized in ``l``)."""
    l = np.asarray(l, dtype=float)
    if np.any(l < 1):
        raise ValueError("l must be >= 1")
    if R <= 0:
        raise ValueError("R must be positive")
    if R < 2:
        out = 2.0 / (2.0 - R) * l
    elif R == 2:
        out = l * np.log2(l)
    else:
        eps = np.log2(l) - np.floor(np.log2(l))
        out = (2.0 / R) ** eps * R * R / (2.0 * (R - 1.0) * (R - 2.0)) * l ** math.log2(R)
    return out if out.ndim else float(out)


def hierarchical_samples(lam: float, R: float, n_max: int, v0: float = 0.0):
    spec = PotentialSpec("hierarchical", {"R": R, "v0": v0}, coupling=lam)
    return realize(spec, (1, n_max))


@dataclass(frozen=True)
class NormCheck:
    C_emp: float
    alpha: float
    fit_residual: float
    n: np.ndarray = field(repr=False)
    ratios: np.ndarray = field(repr=False)


def gap_edge_norm_check(m: int, E: float, lam: float, R: float, n_max: int,
                        fit_window=None) -> NormCheck:
    """Compare ``max_{n' <= n} ||T(n, n'; E)||`` with ``f_R(n / 2^(m+1))``.

    The check is only meaningful when ``E`` is the gap edge to the last
    bit: rounding ``E`` to a float places it inside a gap, and the resulting
    exponential growth becomes visible once ``n`` exceeds a scale set by
    ``|delta E|``. Gap edges that are exact floats (e.g.
    ``-1`` and ``2`` for ``m = 1, lambda = 1``) are safe at any ``n``.
    """
    if n_max % 2 ** (m + 1):
        raise ValueError("n_max must be a multiple of 2^(m+1)")
    V = hierarchical_samples(lam, R, n_max)
    prof = growth_profile(V, E, n_max)
    fit = fit_power_law(prof, fit_window)
    l = prof.n / 2 ** (m + 1)
    sel = l >= 2
    ratios = prof.values[sel] / f_R(l[sel], R)
    return NormCheck(float(ratios.max()), fit.alpha, fit.residual, prof.n[sel], ratios)


@dataclass(frozen=True)
class GapEdgeSolutions:
    psi_d: np.ndarray
    psi_n: np.ndarray
    antiperiodicity_defect: float
    l: np.ndarray
    ratio: np.ndarray
    lambda_m: float


def lambda_m(m: int, E: float, lam: float, R: float) -> float:
    xs = trace_orbit(E, lam, R, max(m, 1)).traces
    return lam * R**m * float(np.prod(xs[:m]))


def gap_edge_solutions(m: int, E: float, lam: float, R: float, n_max: int) -> GapEdgeSolutions:
    """Dirichlet/Neumann solutions on ``0..n_max`` and their gap-edge diagnostics.

    ``psi_d[n]`` has ``psi_d(0) = 0, psi_d(1) = 1``; ``psi_n`` has
    ``psi_n(0) = 1, psi_n(1) = 0``. ``ratio[i]`` compares
    ``psi_n((2l+1) 2^m) - psi_n(2^m)`` with ``(-1)^(l+1) lambda_m f_R(l)``.
    """
    V = hierarchical_samples(lam, R, n_max)
    psi_d = solve_difference(V, E, (0.0, 1.0), 0, n_max)
    psi_n = solve_difference(V, E, (1.0, 0.0), 0, n_max)
    per = 2 ** (m + 1)
    if n_max > per:
        defect = float(np.max(np.abs(psi_d[per:] + psi_d[:-per])))
    else:
        defect = float("nan")
    lm = lambda_m(m, E, lam, R)
    half = 2**m
    l = np.arange(1, (n_max // half - 1) // 2 + 1)
    l = l[(2 * l + 1) * half <= n_max]
    sign = np.where(l % 2 == 1, 1.0, -1.0)  # (-1)^(l+1)
    ratio = (psi_n[(2 * l + 1) * half] - psi_n[half]) / (sign * lm * f_R(l, R)) \
        if len(l) else np.zeros(0)
    return GapEdgeSolutions(psi_d, psi_n, defect, l, np.asarray(ratio), lm)


def palindrome_defect(m: int, E, lam: float, R: float, dps: int | None = None) -> float:
    """``max |u_1(n) - u_0(2^m - n)|`` over ``0 < n < 2^m``, relative to ``max |u|``.

    ``u_0 = psi_D / psi_D(2^m)`` and ``u_1`` is the solution with
    ``u_1(0) = 1, u_1(2^m) = 0``; the reflection symmetry of
    ``V(1..2^m - 1)`` makes them mirror images. At gap edges the forward
    recursion is ill-conditioned for larger ``m``; pass ``dps`` (and an
    mpmath ``E``) to run it in extended precision.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    N = 2**m
    V = hierarchical_samples(lam, R, N)
    if dps is None:
        psi_d = solve_difference(V, E, (0.0, 1.0), 0, N)
        psi_n = solve_difference(V, E, (1.0, 0.0), 0, N)
    else:
        import mpmath

        ctx = mpmath.mp.clone()
        ctx.dps = dps
        E = ctx.mpf(E)
        vals = [ctx.mpf(lam) * hierarchical_f_mp(ctx, n, R) for n in range(1, N + 1)]
        psi_d, psi_n = [ctx.mpf(0), ctx.mpf(1)], [ctx.mpf(1), ctx.mpf(0)]
        for n in range(1, N):
            psi_d.append((E - vals[n - 1]) * psi_d[n] - psi_d[n - 1])
            psi_n.append((E - vals[n - 1]) * psi_n[n] - psi_n[n - 1])
    if psi_d[N] == 0:
        raise ValueError("psi_D(2^m) vanishes; u_0 undefined")
    u0 = [x / psi_d[N] for x in psi_d]
    u1 = [y - psi_n[N] * x for x, y in zip(u0, psi_n)]
    scale = max(1, max(abs(x) for x in u0), max(abs(y) for y in u1))
    return float(max(abs(u1[n] - u0[N - n]) for n in range(1, N)) / scale)


def hierarchical_f_mp(ctx, n: int, R) -> object:
    """``f(ord_2 n)`` evaluated exactly in the mpmath context ``ctx``."""
    k = (n & -n).bit_length() - 1
    R = ctx.mpf(R)
    return sum((R**i for i in range(k)), ctx.mpf(0))


def gap_edges_to_csv(sets, extra_levels: int = 5) -> str:
    """Rows ``(m, k, E_mk, x_{m+1}, ..., x_{m+extra_levels})``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["m", "k", "E_mk"] + [f"x_m_plus_{j}" for j in range(1, extra_levels + 1)])
    for s in sets:
        precise = s.precise or s.energies
        for k, (E, Ep) in enumerate(zip(s.energies, precise), start=1):
            orbit = trace_orbit(Ep, s.lam, s.R, s.m + extra_levels, dps=s.dps)
            w.writerow([s.m, k, repr(E)] + [repr(float(x)) for x in orbit.traces[s.m + 1:]])
    return buf.getvalue()


def orbit_to_csv(orbit: TraceOrbit) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["m", "x_m"])
    for m, x in enumerate(orbit.traces):
        w.writerow([m, repr(float(x))])
    return buf.getvalue()
