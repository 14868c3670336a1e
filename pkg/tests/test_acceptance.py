"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion lines.
Tolerances are pinned here and nowhere else; runtime bounds are asserted
against the wall clock of the criterion body.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from lpkdv import difference_calculus as dc
from lpkdv.nls import (
    Envelope,
    commutator_sweep,
    gaussian_envelope,
    nls_evolve,
    plane_envelope,
    stable_dtau,
)
from lpkdv.quad import LpkdvParams, linear_residual_max
from lpkdv.reduction import (
    assemble_ansatz,
    compute_coefficients,
    group_velocity,
    residual_scaling,
)
from lpkdv.spectral import (
    SpectralProblem,
    eigenvalues,
    isospectral_drift,
    spectral_limit_check,
)
from lpkdv.symmetries import harmonic_projection, symmetry_residual_scaling
from tests.conftest import REF_N_LIST, REF_WINDOW, make_bump_solution


class Criterion:
    def __init__(self, number, label, limit_seconds):
        self.number = number
        self.label = label
        self.limit = limit_seconds
        self.t0 = time.monotonic()

    def finish(self):
        elapsed = time.monotonic() - self.t0
        print(f"ACCEPTANCE {self.number} ({self.label}): PASS [{elapsed:.1f}s "
              f"< {self.limit}s]")
        assert elapsed < self.limit, f"criterion {self.number} runtime exceeded"


def test_criterion_1_exact_operator_calculus():
    crit = Criterion(1, "exact operator calculus", 5.0)
    ratios = [dc.ScaleRatio(1, 1), dc.ScaleRatio(1, 2), dc.ScaleRatio(1, 3),
              dc.ScaleRatio(2, 5)]
    for h in ratios:
        for deg in range(6):
            assert dc.verify_shift_decomposition(deg, h)
            coeffs = [Fraction(k + 1, 2 * k + 1) for k in range(deg + 1)]

            def poly(x):
                return sum(c * Fraction(x) ** k for k, c in enumerate(coeffs))

            s = dc.sequence_from_function(poly, 0, deg + 9)
            for j in (1, 2, 3):
                got = dc.cross_lattice_difference(s, h, j, deg)
                hv = h.value
                for idx, n1 in enumerate(range(got.n_min, got.n_min + len(got))):
                    direct = sum((-1) ** (j - t) * math.comb(j, t) * poly(n1 + t * hv)
                                 for t in range(j + 1))
                    assert got.values[idx] == direct
                # forward differences: cross-lattice at h=1 must coincide
                if h.value == 1:
                    fd = dc.forward_difference(s, j)
                    k = min(len(got), len(fd))
                    assert got.values[:k] == fd.values[:k]
    for deg in range(6):
        coeffs = [Fraction((-1) ** k, k + 2) for k in range(deg + 1)]

        def poly(x):
            return sum(c * Fraction(x) ** k for k, c in enumerate(coeffs))

        def dpoly(x):
            return sum(k * c * Fraction(x) ** (k - 1)
                       for k, c in enumerate(coeffs) if k > 0)

        s = dc.sequence_from_function(poly, -3, deg + 8)
        der = dc.formal_derivative(s, deg)
        for idx, n in enumerate(range(der.n_min, der.n_min + len(der))):
            assert der.values[idx] == dpoly(n)
    crit.finish()


def test_criterion_2_dispersion():
    crit = Criterion(2, "plane-wave dispersion residual", 1.0)
    rng = np.random.default_rng(42)
    for _ in range(100):
        p = rng.uniform(0.5, 3.0)
        q = rng.uniform(0.05, p - 0.2)
        kappa = rng.uniform(0.1, math.pi - 0.2)
        assert linear_residual_max(LpkdvParams(p, q), kappa) <= 1e-12
    crit.finish()


def test_criterion_3_reduction_coefficients(ref_coeffs, ref_params):
    crit = Criterion(3, "reduction coefficients", 1.0)
    assert abs(ref_coeffs.M1 - math.sqrt(5)) <= 1e-9
    assert abs(ref_coeffs.M1_tilde - 3 / math.sqrt(5)) <= 1e-9
    assert abs(ref_coeffs.rho1 - (-1.2)) <= 1e-9
    assert abs(ref_coeffs.rho2 - 16 / 75) <= 1e-9
    assert abs(ref_coeffs.tau2 - 1j / 3) <= 1e-9
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 20:
        p = rng.uniform(0.6, 3.0)
        q = rng.uniform(0.05, p - 0.2)
        kappa = rng.uniform(0.15, math.pi - 0.25)
        params = LpkdvParams(p, q)
        if abs(params.zeta * math.cos(kappa) - params.mu) < 1e-2:
            continue
        co = compute_coefficients(params, kappa)
        gv = group_velocity(params, kappa)
        assert abs(abs(gv) - co.M1_tilde / co.M1) <= 1e-6 * max(1.0, abs(gv))
        checked += 1
    crit.finish()


def test_criterion_4_multiscale_residual_scaling(ref_evolution, ref_coeffs):
    crit = Criterion(4, "multiscale residual scaling", 120.0)
    full = residual_scaling(ref_evolution, ref_coeffs, REF_N_LIST, REF_WINDOW)
    assert full["exponent"] >= 2.7, full
    no_second = residual_scaling(ref_evolution, ref_coeffs, REF_N_LIST,
                                 REF_WINDOW, include_second=False)
    no_zeroth = residual_scaling(ref_evolution, ref_coeffs, REF_N_LIST,
                                 REF_WINDOW, include_zeroth=False)
    assert full["exponent"] - no_second["exponent"] >= 0.7, no_second
    assert full["exponent"] - no_zeroth["exponent"] >= 0.7, no_zeroth
    crit.finish()


def test_criterion_5_nls_solver():
    crit = Criterion(5, "NLS solver exactness and conservation", 30.0)
    c = compute_coefficients(LpkdvParams(1.5, 0.5), math.pi / 2).nls_coefficients()
    L, period = 256, 40.0
    # constant-field exact solution over unit tau
    A = 0.5
    env_c = Envelope(0.0, period / L, np.full(L, A, dtype=complex))
    out = nls_evolve(env_c, c, 1.0, 1e-3)
    exact = A * np.exp(-1j * c.rho2 * A ** 2)
    assert np.max(np.abs(out.values - exact)) <= 1e-8
    # plane-wave exact solution
    A, kidx = 0.4, 3
    env_p = plane_envelope(L, 0.0, period, A, kidx)
    k = 2 * math.pi * kidx / period
    out = nls_evolve(env_p, c, 1.0, 5e-4)
    exact = env_p.values * np.exp(-1j * (c.rho2 * A ** 2 - c.rho1 * k ** 2))
    assert np.max(np.abs(out.values - exact)) <= 1e-8
    assert np.max(np.abs(np.abs(out.values) - A)) <= 1e-8
    # mass conservation at reference resolution
    env_g = gaussian_envelope(L, 0.0, period, 0.8, 2.5, 20.0)
    out = nls_evolve(env_g, c, 1.0, stable_dtau(env_g, c))
    assert abs(out.mass() - env_g.mass()) / env_g.mass() <= 1e-8
    # phase and translation equivariance
    phi = 1.2345
    a = nls_evolve(env_g, c, 0.5, 1e-3)
    b = nls_evolve(Envelope(0.0, env_g.dxi, env_g.values * np.exp(1j * phi)),
                   c, 0.5, 1e-3)
    assert np.max(np.abs(b.values - a.values * np.exp(1j * phi))) <= 1e-10
    shifted = nls_evolve(Envelope(0.0, env_g.dxi, np.roll(env_g.values, 31)),
                         c, 0.5, 1e-3)
    assert np.max(np.abs(shifted.values - np.roll(a.values, 31))) <= 1e-10
    crit.finish()


def test_criterion_6_nls_symmetry_commutators():
    crit = Criterion(6, "NLS symmetry commutators", 60.0)
    c = compute_coefficients(LpkdvParams(1.5, 0.5), math.pi / 2).nls_coefficients()
    env = gaussian_envelope(96, 0.0, 60.0, 6.0, 3.0, 30.0)
    report = commutator_sweep(c, env)
    for row in report["sweep"]:
        assert row["passed"], row
    assert report["passed"]
    crit.finish()


def test_criterion_7_lattice_symmetries(bump_solution):
    crit = Criterion(7, "lattice symmetry verification", 60.0)
    field, params = bump_solution
    lambdas = [0.125, 0.25, 0.5]
    for which in ("flow1", "flow2"):
        rep = symmetry_residual_scaling(field, params, which, lambdas)
        assert rep["exponent"] is None or rep["exponent"] >= 4.0, rep
        assert rep["passed"]
    neg = symmetry_residual_scaling(field, params, "broken", lambdas)
    assert neg["exponent"] is not None and neg["exponent"] < 2.0, neg
    crit.finish()


def test_criterion_8_harmonic_projection(ref_evolution, ref_coeffs):
    crit = Criterion(8, "harmonic projection of the flows", 120.0)
    window = (384, 384)
    errs = {}
    for N in (32, 64):
        ans = assemble_ansatz(ref_evolution, ref_coeffs, N, window)
        rep1 = harmonic_projection(ans, ref_coeffs, "flow1")
        errs[N] = rep1["weighted_rel_error"]
        if N == 64:
            rep2 = harmonic_projection(ans, ref_coeffs, "flow2")
    assert errs[64] <= 3.0 / 64, errs
    halving = errs[64] / errs[32]
    assert 0.2 <= halving <= 0.8, errs
    assert rep2["flow2_over_flow1"]["std_over_mean"] <= 0.05, rep2
    crit.finish()


def test_criterion_9_spectral_checks(ref_evolution, ref_coeffs, bump_solution):
    crit = Criterion(9, "spectral problem checks", 180.0)
    # free-operator closed forms and gauge invariance
    L = 64
    w = np.sort(eigenvalues(SpectralProblem(np.ones(L), "periodic")).real)
    assert np.max(np.abs(w - np.sort(2 * np.cos(2 * np.pi * np.arange(L) / L)))) <= 1e-10
    w = np.sort(eigenvalues(SpectralProblem(np.ones(L), "dirichlet")).real)
    exact = np.sort(2 * np.cos(np.pi * np.arange(1, L + 1) / (L + 1)))
    assert np.max(np.abs(w - exact)) <= 1e-10
    rng = np.random.default_rng(3)
    prob = SpectralProblem(1.0 + 0.4 * rng.random(48), "dirichlet")
    gauge_gap = np.max(np.abs(np.sort(eigenvalues(prob).real)
                              - np.sort(eigenvalues(prob, dense=True).real)))
    assert gauge_gap <= 1e-10
    # isospectral drift shrinks >= 2x with doubled window
    field_small, params = bump_solution
    field_big, _ = make_bump_solution(n_size=400, center=200)
    m_list = list(range(11))
    drift_small = isospectral_drift(field_small, params, m_list)["max_drift"]
    drift_big = isospectral_drift(field_big, params, m_list)["max_drift"]
    assert drift_small / drift_big >= 2.0, (drift_small, drift_big)
    # slow-variable limit of the spectral problem
    rep = spectral_limit_check(ref_evolution, ref_coeffs, REF_N_LIST)
    disc = rep["discrepancy"]
    assert all(d is not None for d in disc), rep["notes"]
    assert disc[-1] <= disc[0], disc
    e_mid = sorted(rep["estimates"][-2], key=abs)
    e_last = np.asarray(rep["estimates"][-1])
    for v in e_mid[1:4]:
        partner = e_last[np.argmin(np.abs(e_last - v))]
        assert 0.75 <= partner / v <= 1.25, (v, partner)
    crit.finish()
