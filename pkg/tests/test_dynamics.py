import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st
from scipy import integrate

from qdyn1d.dynamics import (
    GUARD_MASS,
    abel_amplitudes,
    abel_amplitudes_parseval,
    abel_amplitudes_quadrature,
    amplitudes_to_csv,
    borel_transform,
    bound_scaling_harness,
    boundary_mass,
    build_operator,
    check_guard,
    diagonalize,
    moment,
    outside_probability,
    predicted_beta_bound,
    report_to_csv,
    run_dynamics,
    summary_json,
    transport_exponent,
)
from qdyn1d.errors import FiniteSizeViolation, UnknownTheorem
from qdyn1d.potentials import PotentialSamples, PotentialSpec, realize


def half(values):
    return build_operator(PotentialSamples(1, list(values)), "half")


def random_eig(L, seed=0, scale=1.0):
    return diagonalize(half(np.random.default_rng(seed).uniform(-scale, scale, L)))


def test_build_examples():
    assert np.array_equal(half([0, 0]).to_dense(), [[0, 1], [1, 0]])
    whole = build_operator(PotentialSamples(-1, [0, 0, 0]), "whole")
    assert np.array_equal(whole.to_dense(), [[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    assert whole.origin_index == 2


def test_build_window_mismatch():
    with pytest.raises(ValueError):
        build_operator(PotentialSamples(0, [0, 0]), "half")
    with pytest.raises(ValueError):
        build_operator(PotentialSamples(-1, [0, 0]), "whole")
    with pytest.raises(ValueError):
        build_operator(PotentialSamples(1, [0]), "ring")


@pytest.mark.parametrize("N", [1, 2, 7, 50])
def test_free_spectrum(N):
    eig = diagonalize(half(np.zeros(N)))
    ref = np.sort(2 * np.cos(np.arange(1, N + 1) * np.pi / (N + 1)))
    assert np.allclose(eig.eigenvalues, ref, atol=1e-12)
    assert eig.residual < 1e-8 and eig.weights.sum() == pytest.approx(1.0, abs=1e-12)


@given(st.floats(0.01, 1e4), st.floats(-5, 5))
def test_one_site_lattice(T, v):
    eig = diagonalize(half([v]))
    a = abel_amplitudes(eig, T)
    assert a[0] == pytest.approx(0.5, rel=1e-14)
    for p in (0.5, 1, 3):
        assert moment(eig.operator, a, p, check=False) == pytest.approx(0.5, rel=1e-14)
    assert borel_transform(eig, 0.2, 0.1) == pytest.approx(1 / (v - 0.2 - 0.1j), rel=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 60), st.integers(0, 10**6), st.floats(0.1, 500))
def test_normalization_and_positivity(L, seed, T):
    eig = random_eig(L, seed, 2.0)
    a = abel_amplitudes(eig, T)
    assert abs(a.sum() - 0.5) < 1e-10
    assert a.min() >= -1e-12


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 40), st.integers(0, 10**6), st.floats(0.1, 200))
def test_resolvent_matches_double_sum(L, seed, T):
    eig = random_eig(L, seed)
    assert np.allclose(abel_amplitudes(eig, T), abel_amplitudes(eig, T, "double_sum"), atol=1e-12)


def test_time_quadrature_oracle():
    eig = random_eig(50, 11)
    for T in (0.7, 5.0, 30.0):
        ref = abel_amplitudes_quadrature(eig, T)
        assert np.max(np.abs(abel_amplitudes(eig, T) - ref)) < 1e-6


def test_parseval_oracle():
    eig = random_eig(30, 5)
    for T in (2.0, 15.0):
        assert np.max(np.abs(abel_amplitudes(eig, T) - abel_amplitudes_parseval(eig, T))) < 1e-4


@given(st.floats(-10, 10))
def test_energy_shift_invariance(c):
    v = np.random.default_rng(1).uniform(-1, 1, 25)
    a0 = abel_amplitudes(diagonalize(half(v)), 7.0)
    a1 = abel_amplitudes(diagonalize(half(v + c)), 7.0)
    assert np.allclose(a0, a1, atol=1e-10)


def test_whole_line_moments_use_distance_from_origin():
    V = realize(PotentialSpec("explicit", {"values": [0.0] * 9, "start": -4}, geometry="whole"), (-4, 4))
    op = build_operator(V, "whole")
    a = np.zeros(9)
    a[op.sites == -3] = 0.25
    a[op.sites == 3] = 0.25
    assert moment(op, a, 2, check=False) == pytest.approx(4.5)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.5, 50), st.floats(0.1, 4), st.floats(0.1, 4))
def test_moment_monotone_in_p(seed, T, p1, p2):
    eig = random_eig(40, seed)
    a = abel_amplitudes(eig, T)
    lo, hi = sorted((p1, p2))
    op = eig.operator
    assert moment(op, a, lo, check=False) <= moment(op, a, hi, check=False) * (1 + 1e-12)


def test_moment_small_p_limit():
    eig = random_eig(30, 2)
    a = abel_amplitudes(eig, 3.0)
    assert moment(eig.operator, a, 1e-9, check=False) == pytest.approx(0.5, rel=1e-7)
    with pytest.raises(ValueError):
        moment(eig.operator, a, 0.0)


def test_guard():
    eig = diagonalize(half(np.zeros(60)))
    check_guard(eig.operator, abel_amplitudes(eig, 3.0))
    a = abel_amplitudes(eig, 200.0)
    assert boundary_mass(eig.operator, a) > GUARD_MASS
    with pytest.raises(FiniteSizeViolation):
        check_guard(eig.operator, a)
    with pytest.raises(FiniteSizeViolation):
        moment(eig.operator, a, 2)


def test_outside_probability():
    eig = diagonalize(half(np.zeros(400)))
    a = abel_amplitudes(eig, 20.0)
    P = outside_probability(eig.operator, a, 0.0, 20.0)
    assert P == pytest.approx(a[19:].sum())
    assert outside_probability(eig.operator, a, 1.0, 20.0) >= P
    with pytest.raises(FiniteSizeViolation):
        outside_probability(eig.operator, a, 0.0, 300.0, check=False)


def test_borel_transform_properties():
    eig = random_eig(40, 9, 1.5)
    E = np.random.default_rng(0).uniform(-6, 6, 200)
    assert np.all(borel_transform(eig, E, 0.05).imag > 0)
    eps = 0.2
    total = sum(
        integrate.quad(lambda x: borel_transform(eig, x, eps).imag, lo, hi, limit=400)[0]
        for lo, hi in ((-np.inf, -4), (-4, 4), (4, np.inf))
    )
    assert abs(total - math.pi) < 0.01 * math.pi
    with pytest.raises(ValueError):
        borel_transform(eig, 0.0, 0.0)


@given(st.floats(0.01, 5), st.floats(-4, 4))
def test_transport_exponent_exact_series(c, gamma):
    T = np.geomspace(10, 100, 7)
    fit = transport_exponent(T, c * T**gamma)
    assert abs(fit.beta - gamma) < 1e-6 and abs(fit.beta_running - gamma) < 1e-6
    assert not fit.flagged


def test_transport_exponent_flags_excluded_points():
    T = np.geomspace(1, 100, 8)
    valid = np.array([1, 1, 1, 1, 1, 1, 0, 0], bool)
    fit = transport_exponent(T, T**2, valid)
    assert fit.flagged and fit.n_used == 6
    with pytest.raises(ValueError):
        transport_exponent(T[:4], T[:4])


def test_free_ballistic_small():
    eig = diagonalize(half(np.zeros(400)))
    # an Abel-averaged ballistic packet keeps < 1e-8 of its mass beyond ~18 T sites
    rep = run_dynamics(eig, np.geomspace(4, 20, 6), [2])
    assert rep.valid.all()
    assert 1.8 <= rep.fits[2].beta <= 2.05


def test_predicted_bounds():
    assert predicted_beta_bound("period_doubling", 7) == 1
    assert predicted_beta_bound("power_law", 5.5, 0.0) == 5.5
    assert predicted_beta_bound("perturbed", 9, 1.0) == 2
    assert predicted_beta_bound("bounded", 4) == 3
    assert predicted_beta_bound("power_law_eigenvalue", 3, 1.0) == 1
    with pytest.raises(UnknownTheorem):
        predicted_beta_bound("nope", 2, 1.0)
    with pytest.raises(ValueError):
        predicted_beta_bound("power_law", 2)


def test_run_dynamics_report_and_csv():
    eig = diagonalize(half(np.zeros(120)))
    T = np.geomspace(2, 60, 6)
    rep = run_dynamics(eig, T, [1, 2], alpha=0.0, keep_amplitudes=True)
    assert rep.normalization_error < 1e-10
    assert rep.valid[:2].all() and not rep.valid[-1] and rep.fits[2] is None
    assert np.isnan(rep.moments[-1]).all()
    rows = report_to_csv(rep).splitlines()
    assert rows[0] == "T,p,moment,P_T,beta_running,valid" and len(rows) == 13
    assert rows[-1].endswith(",,,,0")
    long = amplitudes_to_csv(eig.operator, rep.amplitudes).splitlines()
    assert long[0] == "n,T,a" and len(long) == 1 + 6 * 120
    summary = json.loads(summary_json(rep))
    assert summary["valid"] == [bool(v) for v in rep.valid]
    np.testing.assert_array_equal(run_dynamics(eig, T, [2], workers=3).moments,
                                  run_dynamics(eig, T, [2]).moments)


def test_harness_refuses_tiny_lattice():
    with pytest.raises(FiniteSizeViolation):
        bound_scaling_harness(diagonalize(half([0.0])), 0.0, 0.0, 2, [1, 2])


def test_harness_free_lattice_bounded_below():
    eig = diagonalize(half(np.zeros(800)))
    rep = bound_scaling_harness(eig, 0.0, 0.0, 2, np.geomspace(8, 40, 6))
    assert rep.valid.all()
    assert rep.ratio.min() > 0.05 * rep.ratio.max()
