"""Transfer-matrix cocycles: products, norm growth profiles, power-law fits.

A 2x2 matrix is a plain ``numpy`` array of shape ``(2, 2)``; stacks of them
have shape ``(N, 2, 2)``. The one-step matrix for the equation
``phi(n+1) + phi(n-1) + V(n) phi(n) = E phi(n)`` is ``[[E - V(n), -1], [1, 0]]``
and maps ``(phi(n), phi(n-1))`` to ``(phi(n+1), phi(n))``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfWindow, RootFindingFailure
from .potentials import PotentialSamples

RENORM_SPAN = 2**10
# det-renormalization is skipped above this norm: det itself loses precision
RENORM_MAX_NORM = 1e4
DRIFT_MAX_LOG = 8.0


def step_matrix(x: float, E: float) -> np.ndarray:
    return np.array([[E - x, -1.0], [1.0, 0.0]])


def step_matrices(values, E: float) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    out = np.zeros((len(values), 2, 2))
    out[:, 0, 0] = E - values
    out[:, 0, 1] = -1.0
    out[:, 1, 0] = 1.0
    return out


def det2(M: np.ndarray) -> np.ndarray:
    return M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]


def inv_unimodular(M: np.ndarray) -> np.ndarray:
    """Inverse of (stacks of) unit-determinant matrices: the adjugate."""
    out = np.empty_like(M)
    out[..., 0, 0] = M[..., 1, 1]
    out[..., 1, 1] = M[..., 0, 0]
    out[..., 0, 1] = -M[..., 0, 1]
    out[..., 1, 0] = -M[..., 1, 0]
    return out


def op_norm(M: np.ndarray) -> np.ndarray:
    """Spectral norm of (stacks of) 2x2 matrices from the singular values."""
    s = 0.5 * np.sum(M * M, axis=(-2, -1))
    d = np.abs(det2(M))
    disc = np.sqrt(np.clip((s - d) * (s + d), 0.0, None))
    return np.sqrt(s + disc)


def hs_norm(M: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(M * M, axis=(-2, -1)))


NORMS = {"op": op_norm, "hs": hs_norm}


def _renormalize(M: np.ndarray) -> float:
    """Divide (in place) by sqrt(det) where det is reliable; return max drift seen."""
    d = det2(M)
    drift = float(np.max(np.abs(d - 1.0))) if d.size else 0.0
    ok = (d > 0) & (hs_norm(M) < RENORM_MAX_NORM)
    if np.any(ok):
        M[ok] /= np.sqrt(d[ok])[..., None, None]
    return drift


def prefix_products(values, E: float, renormalize: bool = True):
    """``P[k] = T(values[k-1]) ... T(values[0])`` for ``k = 0..N`` (``P[0] = I``).

    Inclusive scan by recursive doubling. Returns ``(P, drift)`` where drift
    is the largest ``|det - 1|`` met at renormalization checkpoints.
    """
    A = step_matrices(values, E)
    n = len(A)
    offset = 1
    drift = 0.0
    while offset < n:
        A[offset:] = A[offset:] @ A[:-offset]
        offset *= 2
        if renormalize and offset >= RENORM_SPAN:
            drift = max(drift, _renormalize(A[offset // 2:]))
    P = np.empty((n + 1, 2, 2))
    P[0] = np.eye(2)
    P[1:] = A
    return P, drift


def ordered_product(values, E: float, renormalize: bool = True) -> np.ndarray:
    """``T(values[-1]) ... T(values[0])`` by pairwise tree reduction."""
    A = step_matrices(values, E)
    if len(A) == 0:
        return np.eye(2)
    span = 1
    while len(A) > 1:
        if len(A) % 2:
            A = np.concatenate([A, np.eye(2)[None]])
        A = A[1::2] @ A[0::2]
        span *= 2
        if renormalize and span >= RENORM_SPAN:
            _renormalize(A)
    return A[0]


def _check_window(V: PotentialSamples, lo: int, hi: int):
    if lo <= hi and (lo < V.start or hi > V.stop):
        raise OutOfWindow(f"sites [{lo}, {hi}] not inside [{V.start}, {V.stop}]")


def _mp_ordered_product(values, E, dps: int):
    import mpmath

    ctx = mpmath.mp.clone()
    ctx.dps = dps
    E = ctx.mpf(E)
    a, b, c, d = ctx.mpf(1), ctx.mpf(0), ctx.mpf(0), ctx.mpf(1)
    for v in values:
        # [[E - v, -1], [1, 0]] @ [[a, b], [c, d]]
        t = E - ctx.mpf(float(v))
        a, b, c, d = t * a - c, t * b - d, a, b
    return ctx.matrix([[a, b], [c, d]])


def transfer_product(V: PotentialSamples, n: int, m: int, E: float, dps: int | None = None):
    """``T(n, m; E)``: maps ``(phi(m+1), phi(m))`` to ``(phi(n+1), phi(n))``.

    With ``dps`` the product is formed sequentially in mpmath (no overflow,
    no renormalization) and an ``mpmath.matrix`` is returned.
    """
    if n == m:
        return np.eye(2) if dps is None else _mp_ordered_product([], E, dps)
    lo, hi = min(n, m) + 1, max(n, m)
    _check_window(V, lo, hi)
    if dps is not None:
        M = _mp_ordered_product(V.slice(lo, hi), E, dps)
        if n < m:
            M = M.ctx.matrix([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]])
        return M
    M = ordered_product(V.slice(lo, hi), E)
    return M if n > m else inv_unimodular(M)


def solve_difference(V: PotentialSamples, E: float, initial, m: int, n: int) -> np.ndarray:
    """Solution ``phi(m), ..., phi(n)`` of the difference equation from
    ``(phi(m), phi(m+1)) = initial``; needs ``V`` on ``m+1..n-1``."""
    if n < m + 1:
        raise ValueError("need n >= m + 1")
    _check_window(V, m + 1, n - 1)
    out = np.empty(n - m + 1)
    out[0], out[1] = initial
    vals = V.slice(m + 1, n - 1) if n - 1 >= m + 1 else ()
    for i, v in enumerate(vals, start=1):
        out[i + 1] = (E - v) * out[i] - out[i - 1]
    return out


def dyadic_points(n_max: int) -> np.ndarray:
    pts = [1 << k for k in range(n_max.bit_length()) if (1 << k) <= n_max]
    if pts[-1] != n_max:
        pts.append(n_max)
    return np.array(pts)


def _pow2_normalize(Q: np.ndarray) -> np.ndarray:
    """Scale each matrix (in place) by a power of two so its largest entry is in
    ``[0.5, 1)``; return the exponents. Exact: no rounding is introduced."""
    _, e = np.frexp(np.max(np.abs(Q), axis=(-2, -1)))
    Q *= np.ldexp(1.0, -e)[:, None, None]
    return e


def log_scan(A: np.ndarray, append: str = "left"):
    """Inclusive scan of a matrix stack kept as ``C[k] = Q[k] 2^e[k]``.

    ``append="left"`` gives ``A[k] ... A[0]``; ``append="right"`` gives
    ``A[0] ... A[k]``. Partial products are rescaled by powers of two after
    every doubling step, so nothing overflows, no inverse is formed, and
    products that are exactly representable (integer data) stay exact.
    Returns ``(Q, L)`` with ``L = e log 2`` the natural-log scale.
    """
    Q = np.array(A, dtype=float)
    e = _pow2_normalize(Q)
    n = len(Q)
    offset = 1
    while offset < n:
        if append == "left":
            Q[offset:] = Q[offset:] @ Q[:-offset]
        else:
            Q[offset:] = Q[:-offset] @ Q[offset:]
        e[offset:] = e[offset:] + e[:-offset]
        e[offset:] += _pow2_normalize(Q[offset:])
        offset *= 2
    return Q, e * math.log(2.0)


def _log_norm(Q, L, norm: str) -> np.ndarray:
    return L + np.log(NORMS[norm](Q))


@dataclass(frozen=True)
class GrowthProfile:
    """``values[i] = max_{0 <= m <= n' <= n[i]} ||T(base + n', base + m)||`` over anchors.

    ``base`` is the site just left of the window; ``anchor`` holds the
    single-anchor norms ``||T(base + n, base + 1)||``. The ``log_*`` arrays
    are authoritative: ``values`` is ``inf`` where the norm exceeds the
    float range. ``drift`` is the largest ``|det - 1|`` of the products.
    """

    energy: float
    n: np.ndarray
    values: np.ndarray
    anchor: np.ndarray
    norm_kind: str = "op"
    drift: float = 0.0
    log_values: np.ndarray | None = field(default=None, repr=False)
    log_anchor: np.ndarray | None = field(default=None, repr=False)


def growth_profile(V: PotentialSamples, E: float, n_max: int | None = None,
                   sampling: str = "dyadic", norm: str = "op") -> GrowthProfile:
    """Sup-norm growth of the cocycle over the first ``n_max`` sites of ``V``.

    For every anchor ``n`` the products ``T(n, m)``, ``m < n``, are built as
    a suffix scan of the step matrices, so off-spectrum energies with
    exponential growth give finite (log-)values instead of overflow.
    """
    if n_max is None:
        n_max = len(V)
    if n_max < 1 or n_max > len(V):
        raise OutOfWindow(f"n_max={n_max} exceeds window of {len(V)} sites")
    if norm not in NORMS:
        raise ValueError(f"unknown norm {norm!r}")
    if sampling == "dyadic":
        pts = dyadic_points(n_max)
    elif sampling == "all":
        pts = np.arange(1, n_max + 1)
    else:
        raise ValueError(f"unknown sampling {sampling!r}")
    A = step_matrices(V.values[:n_max], E)
    drift = 0.0
    sup = np.empty(len(pts))
    for i, n in enumerate(pts):
        # T(n, m) = A[n-1] ... A[m] for m = n-1, ..., 0, plus T(n, n) = I
        Q, L = log_scan(A[n - 1::-1], append="right")
        sup[i] = max(0.0, float(np.max(_log_norm(Q, L, norm))))
        ok = L < DRIFT_MAX_LOG  # det(Q) = exp(-2 L) carries no precision beyond this
        if np.any(ok):
            drift = max(drift, float(np.max(np.abs(det2(Q[ok]) * np.exp(2 * L[ok]) - 1.0))))
    log_vals = np.maximum.accumulate(sup)
    # anchor series T(n, 1) = A[n-1] ... A[1]
    log_anchor = np.zeros(len(pts))
    if n_max > 1:
        Q, L = log_scan(A[1:], append="left")
        ln = _log_norm(Q, L, norm)
        log_anchor = np.where(pts > 1, ln[np.maximum(pts - 2, 0)], 0.0)
    with np.errstate(over="ignore"):
        vals, anchor = np.exp(log_vals), np.exp(log_anchor)
    return GrowthProfile(float(E), pts, vals, anchor, norm, drift, log_vals, log_anchor)


@dataclass(frozen=True)
class PowerLawFit:
    alpha: float
    C: float
    residual: float
    n_fit: tuple = field(default=(), repr=False)


def fit_power_law(profile: GrowthProfile, window=None, series: str = "values") -> PowerLawFit:
    """Least-squares line through ``log value`` vs ``log n``.

    By default only the upper half of the samples is used (``window`` may
    instead give an inclusive ``(n_lo, n_hi)`` range).
    """
    n = np.asarray(profile.n, dtype=float)
    logs = getattr(profile, "log_" + series, None)
    if logs is None:
        v = np.asarray(getattr(profile, series), dtype=float)
        if np.any(v <= 0) or not np.all(np.isfinite(v)):
            raise ValueError("profile values must be positive and finite")
        logs = np.log(v)
    y = np.asarray(logs, dtype=float)
    if len(n) < 4:
        raise ValueError("need at least four samples")
    if window is None:
        sel = np.arange(len(n)) >= len(n) // 2
    else:
        sel = (n >= window[0]) & (n <= window[1])
    n, y = n[sel], y[sel]
    if len(n) < 2:
        raise ValueError("need at least two samples in the fit window")
    if not np.all(np.isfinite(y)):
        raise ValueError("profile values must be positive and finite")
    if np.all(y == y[0]):
        return PowerLawFit(0.0, float(math.exp(y[0])), 0.0, tuple(n))
    x = np.log(n)
    slope, icept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + icept)) ** 2)))
    with np.errstate(over="ignore"):
        C = float(np.exp(icept))
    return PowerLawFit(float(slope), C, resid, tuple(n))


def fit_series(n, values, window=None) -> PowerLawFit:
    """``fit_power_law`` for a bare ``(n, values)`` series."""
    prof = GrowthProfile(0.0, np.asarray(n), np.asarray(values), np.asarray(values))
    return fit_power_law(prof, window)


def matrix_power(M: np.ndarray, k: int) -> np.ndarray:
    out = np.eye(2)
    for _ in range(k):
        out = M @ out
    return out


def _bracketed_root(f, lo: float, hi: float, xtol: float = 1e-12) -> float:
    """Bisection on a sign change, then secant polishing."""
    flo = f(lo)
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return float(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    x0, x1 = lo, hi
    f0, f1 = f(x0), f(x1)
    for _ in range(50):
        if f1 == f0:
            break
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        x0, f0, x1, f1 = x1, f1, x2, f(x2)
        if abs(x1 - x0) < xtol or f1 == 0:
            break
    return float(x1)


def monodromy_energies(b: float, k: int, tol: float = 1e-10) -> list:
    """The ``k - 1`` energies in ``(b-2, b+2)`` with ``T(b, E)^k = +-I``.

    Roots are located through the lower-left entry of ``T(b, E)^k``, which
    has simple zeros exactly there (``trace -+ 2`` only touches zero).
    """
    if k < 3 or k % 2 == 0:
        raise ValueError("k must be odd and >= 3")

    def f(E):
        return matrix_power(step_matrix(b, E), k)[1, 0]

    grid = np.linspace(b - 2.0, b + 2.0, 1000 * k + 1)[1:-1]
    fv = np.array([f(E) for E in grid])
    roots = [float(E) for E in grid[fv == 0]]
    for i in np.nonzero(fv[:-1] * fv[1:] < 0)[0]:
        roots.append(_bracketed_root(f, grid[i], grid[i + 1]))
    good = []
    for E in roots:
        Mk = matrix_power(step_matrix(b, E), k)
        s = math.copysign(1.0, Mk[0, 0] + Mk[1, 1])
        if np.max(np.abs(Mk - s * np.eye(2))) < tol:
            good.append(E)
    if len(good) != k - 1:
        raise RootFindingFailure(f"found {len(good)} of {k - 1} monodromy energies")
    return sorted(good)


@dataclass(frozen=True)
class ScanRow:
    E: float
    alpha: float
    C: float
    residual: float
    n_max: int
    norm_kind: str
    error: str = ""


def energy_scan(V: PotentialSamples, grid, n_max: int, norm: str = "op",
                workers: int = 1, fit_window=None) -> list:
    """Independent growth profile and fit per energy; errors land in the row."""

    def one(E):
        try:
            f = fit_power_law(growth_profile(V, E, n_max, norm=norm), fit_window)
            return ScanRow(float(E), f.alpha, f.C, f.residual, n_max, norm)
        except Exception as exc:  # noqa: BLE001 - recorded per row
            nan = float("nan")
            return ScanRow(float(E), nan, nan, nan, n_max, norm, f"{type(exc).__name__}: {exc}")

    grid = list(grid)
    if workers > 1 and len(grid) > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(one, grid))
    return [one(E) for E in grid]


def scan_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["E", "alpha_hat", "C_hat", "residual", "n_max", "norm_kind"])
    for r in rows:
        w.writerow([repr(r.E), repr(r.alpha), repr(r.C), repr(r.residual), r.n_max, r.norm_kind])
    return buf.getvalue()
