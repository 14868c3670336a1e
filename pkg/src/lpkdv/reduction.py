"""Multiscale reduction of the lpKdV to the NLS equation.

Carries the full reduction data of the expansion around a carrier wave
exp(i(kappa*n - omega*m)):

  * the scale factors M1, M1_tilde fixing the slow characteristic
    xi = (M1*n - sgn*M1_tilde*m)/N and the slow time tau = M2_tilde*m/N^2,
  * the harmonic-reconstruction coefficients tau1 (zeroth harmonic source),
    tau2 (second harmonic), tau3/tau4 (stored only; their orders are not
    reconstructed here),
  * the NLS coefficients rho1, rho2 of i u_tau = rho1 u_xixi + rho2 u|u|^2.

The complex closed forms are evaluated verbatim; realness of M1 and M1_tilde
is asserted rather than assumed (the phase theta of S = r*exp(i*theta) is
what enforces it).  The assembled lattice ansatz keeps the harmonics
(k, alpha) in {(1,0), (1,+-1), (2,+-2)}:

    u = (1/N) [ u1_0(xi) + 2 Re(u1_1(xi,tau) e^{i theta}) ]
        + (1/N^2) 2 Re(tau2 u1_1^2 e^{2 i theta}),   theta = kappa*n - omega*m,

with u1_0 the real antiderivative of Re(tau1)|u1_1|^2.  With all these
relations enforced and the envelope solving the NLS, the lpKdV residual of
the assembled field is O(1/N^3); dropping the zeroth or second harmonic (or
the characteristic) degrades it to O(1/N^2), which is what the scaling test
measures.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, InternalConsistencyError, PreconditionError
from .nls import Envelope, EnvelopeEvolution, NlsCoefficients
from .quad import CarrierWave, LatticeField, LpkdvParams, dispersion, max_residual

REALNESS_RTOL = 1e-10


@dataclass(frozen=True)
class ReductionCoefficients:
    """Everything the reduction produces for one (p, q, kappa, r, M2_tilde, branch)."""

    params: LpkdvParams
    carrier: CarrierWave
    branch: int
    r: float
    theta: float
    S: complex
    M1: float
    M1_tilde: float
    M2_tilde: float
    tau1: complex
    tau2: complex
    tau3: complex
    tau4: complex | None
    rho1: float
    rho2: float

    @property
    def sgn(self) -> int:
        """Sign in the slow characteristic xi = (M1*n - sgn*M1_tilde*m)/N."""
        return self.branch

    def nls_coefficients(self) -> NlsCoefficients:
        return NlsCoefficients(self.rho1, self.rho2)

    def to_json(self) -> dict:
        def cplx(z):
            return None if z is None else {"re": z.real, "im": z.imag}

        return {
            "p": self.params.p, "q": self.params.q,
            "mu": self.params.mu, "zeta": self.params.zeta,
            "kappa": self.carrier.kappa, "omega": self.carrier.omega,
            "branch": self.branch, "r": self.r, "theta": self.theta,
            "S": cplx(self.S),
            "M1": self.M1, "M1_tilde": self.M1_tilde, "M2_tilde": self.M2_tilde,
            "tau1": cplx(self.tau1), "tau2": cplx(self.tau2),
            "tau3": cplx(self.tau3), "tau4": cplx(self.tau4),
            "rho1": self.rho1, "rho2": self.rho2,
            "defocusing": bool(self.rho1 * self.rho2 < 0),
        }


def _assert_real(z: complex, name: str) -> float:
    scale = abs(z)
    if scale > 0 and abs(z.imag) > REALNESS_RTOL * scale:
        raise InternalConsistencyError(
            f"{name} must be real: got {z} (Im/|.| = {abs(z.imag) / scale:.3e})",
            ratio=abs(z.imag) / scale,
        )
    return z.real


def compute_coefficients(params: LpkdvParams, kappa: float, r: float = 1.0,
                         m2_tilde: float = 1.0, branch: int | None = None,
                         interpret_tau4: bool = False) -> ReductionCoefficients:
    """Evaluate the full set of reduction coefficients at one parameter point.

    branch is the correlated sign pair of the reduction (the choice between
    the two slow characteristics); None auto-selects the one with M1 > 0.
    The phase theta starts from the principal arctan and is shifted by pi if
    needed so that M1_tilde > 0; realness of M1 and M1_tilde is asserted to
    REALNESS_RTOL relative.  tau4 involves two symbols with no definition in
    the source material; it is evaluated (with the lattice-parameter reading)
    only when interpret_tau4 is set, otherwise stored as None.
    """
    if not (0.0 < kappa < math.pi):
        raise DomainError(f"kappa must lie in (0, pi), got {kappa}")
    if r <= 0:
        raise DomainError("r must be positive")
    if m2_tilde <= 0:
        raise DomainError("M2_tilde must be positive")
    if branch not in (None, 1, -1):
        raise DomainError("branch must be +1, -1, or None for auto")
    mu, zeta = params.mu, params.zeta
    carrier = CarrierWave.for_params(params, kappa)
    E = cmath.exp(1j * kappa)

    theta_denom = zeta * math.cos(kappa) - mu
    if abs(theta_denom) < 1e-14 * (abs(zeta) + abs(mu)):
        raise DomainError(
            "theta undefined at this (p, q, kappa): zeta*cos(kappa) - mu ~ 0"
        )
    theta = -math.atan(zeta * math.sin(kappa) / theta_denom)

    def m_values(th):
        S = r * cmath.exp(1j * th)
        m1_signless = S * (mu - zeta * E)          # M1 = -branch * this
        m1t = S * E * (zeta ** 2 - mu ** 2) / (mu * E - zeta)
        return S, m1_signless, m1t

    S, m1_signless, m1t_c = m_values(theta)
    _assert_real(m1_signless, "M1 (signless complex form)")
    if _assert_real(m1t_c, "M1_tilde") < 0.0:
        theta += math.pi
        S, m1_signless, m1t_c = m_values(theta)
    m1_signless_re = _assert_real(m1_signless, "M1 (signless complex form)")
    m1_tilde = _assert_real(m1t_c, "M1_tilde")

    if branch is None:
        branch = -1 if m1_signless_re > 0 else 1
    m1 = -branch * m1_signless_re
    if m1 <= 0 or m1_tilde <= 0:
        raise DomainError(
            f"M1 = {m1:.6g}, M1_tilde = {m1_tilde:.6g} not both positive; "
            f"try branch = {-branch}"
        )

    tau1 = branch * 2.0 * (1 + E) ** 2 / (S * E * (mu + zeta) * (mu - zeta * E))
    tau2 = (1 + E) / ((1 - E) * (mu + zeta))
    tau3 = 2j * math.sin(kappa) / (mu + zeta)
    tau4 = None
    if interpret_tau4:
        tau4 = branch * 2.0 * S * E * (zeta + mu * E) / ((E - 1) ** 2 * (mu + zeta))

    band = zeta ** 2 + mu ** 2 - 2.0 * zeta * mu * math.cos(kappa)
    rho1 = -mu * zeta * r ** 2 * (zeta ** 2 - mu ** 2) * math.sin(kappa) / (m2_tilde * band)
    rho2 = (8.0 * zeta * mu * (zeta - mu) * (1 + math.cos(kappa)) ** 2 * math.sin(kappa)
            / (m2_tilde * (mu + zeta) * band ** 2))

    return ReductionCoefficients(
        params=params, carrier=carrier, branch=branch, r=r, theta=theta, S=S,
        M1=m1, M1_tilde=m1_tilde, M2_tilde=m2_tilde,
        tau1=tau1, tau2=tau2, tau3=tau3, tau4=tau4, rho1=rho1, rho2=rho2,
    )


def group_velocity(params: LpkdvParams, kappa: float) -> float:
    """d omega / d kappa by Richardson-refined central differences (step 1e-6)."""
    h = 1e-6
    if not (h < kappa < math.pi - h):
        raise DomainError("kappa must be interior to (0, pi)")

    def central(hh):
        return (dispersion(params, kappa + hh) - dispersion(params, kappa - hh)) / (2 * hh)

    return (4.0 * central(h / 2) - central(h)) / 3.0


def integer_scale_report(coeffs: ReductionCoefficients, max_den: int = 64) -> dict:
    """Nearest rational approximations to M1, M1_tilde and whether one r makes
    both integers (the exact-sublattice condition; diagnostic only)."""
    from fractions import Fraction

    f1 = Fraction(coeffs.M1).limit_denominator(max_den)
    f2 = Fraction(coeffs.M1_tilde).limit_denominator(max_den)
    ratio = coeffs.M1_tilde / coeffs.M1  # r-independent
    fr = Fraction(ratio).limit_denominator(max_den)
    exact_ratio = abs(float(fr) - ratio) < 1e-9 * max(1.0, abs(ratio))
    return {
        "M1_nearest": [f1.numerator, f1.denominator],
        "M1_tilde_nearest": [f2.numerator, f2.denominator],
        "ratio_nearest": [fr.numerator, fr.denominator],
        "integer_pair_possible": exact_ratio,
        "r_for_integer_M1": fr.denominator / coeffs.M1 * coeffs.r * fr.numerator
        if exact_ratio else None,
    }


@dataclass(frozen=True)
class SlowCoordinates:
    """Map from lattice indices to the slow variables (xi, tau)."""

    N: int
    M1: float
    M1_tilde: float
    M2_tilde: float
    sgn: int

    @classmethod
    def from_coefficients(cls, coeffs: ReductionCoefficients, N: int) -> "SlowCoordinates":
        if N < 1:
            raise DomainError("N must be a positive integer")
        return cls(N=N, M1=coeffs.M1, M1_tilde=coeffs.M1_tilde,
                   M2_tilde=coeffs.M2_tilde, sgn=coeffs.sgn)

    def xi(self, n, m):
        return (self.M1 * np.asarray(n) - self.sgn * self.M1_tilde * np.asarray(m)) / self.N

    def tau(self, n, m):
        return self.M2_tilde * np.asarray(m) / self.N ** 2


class ZerothHarmonic:
    """u1_0(xi) = Re(tau1) * cumulative integral of |u1_1|^2, on the whole line.

    Within one envelope period the antiderivative comes from integrating the
    cubic spline of |u|^2 (a composite 4th-order quadrature); outside, the
    function continues with one full-period rise per wrap, which keeps
    d(u1_0)/dxi = Re(tau1)|u1_1|^2 valid across seams because the envelope
    decays at both ends of its cell.
    """

    def __init__(self, envelope_values: np.ndarray, xi0: float, dxi: float,
                 tau1: complex, boundary_tol: float = 1e-6):
        amp2 = np.abs(np.asarray(envelope_values)) ** 2
        if math.sqrt(float(amp2[0])) >= boundary_tol:
            raise PreconditionError(
                f"envelope must decay at the left grid edge: |u| = "
                f"{math.sqrt(float(amp2[0])):.3e} >= {boundary_tol:.0e}"
            )
        L = len(amp2)
        self.xi0 = xi0
        self.period = L * dxi
        grid = xi0 + dxi * np.arange(L + 1)
        closed = np.concatenate([amp2, amp2[:1]])  # periodic closure
        self._antideriv = CubicSpline(grid, closed).antiderivative()
        self.total_integral = float(self._antideriv(grid[-1]))
        self.re_tau1 = tau1.real
        self.imag_diagnostic = tau1.imag * self.total_integral
        self.rise_per_period = self.re_tau1 * self.total_integral

    def value(self, xi):
        xi = np.asarray(xi, dtype=float)
        wraps = np.floor((xi - self.xi0) / self.period)
        frac = xi - wraps * self.period
        return self.re_tau1 * self._antideriv(frac) + wraps * self.rise_per_period


def build_zeroth_harmonic(envelope: Envelope, coeffs: ReductionCoefficients) -> ZerothHarmonic:
    return ZerothHarmonic(envelope.values, envelope.xi0, envelope.dxi, coeffs.tau1)


def build_second_harmonic(envelope: Envelope, coeffs: ReductionCoefficients) -> np.ndarray:
    """u2_2 = tau2 * u1_1^2, pointwise on the envelope grid."""
    return coeffs.tau2 * envelope.values ** 2


class _PeriodicInterpolant:
    """Cubic-spline interpolation of a complex periodic grid function."""

    def __init__(self, values: np.ndarray, xi0: float, dxi: float):
        L = len(values)
        self.xi0 = xi0
        self.period = L * dxi
        grid = xi0 + dxi * np.arange(L + 1)
        closed = np.concatenate([values, values[:1]])
        self._re = CubicSpline(grid, closed.real, bc_type="periodic")
        self._im = CubicSpline(grid, closed.imag, bc_type="periodic")

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        frac = self.xi0 + np.mod(xi - self.xi0, self.period)
        return self._re(frac) + 1j * self._im(frac)


@dataclass
class AnsatzField:
    """Assembled multiscale ansatz on a lattice window, with its provenance."""

    N: int
    coeffs: ReductionCoefficients
    evolution: EnvelopeEvolution
    field: LatticeField
    include_zeroth: bool
    include_second: bool
    slow: SlowCoordinates

    def envelope_values(self, n, m) -> np.ndarray:
        """u1_1 sampled at the slow coordinates of lattice points (vectorized,
        but all m must share one row)."""
        m_arr = np.asarray(m)
        if m_arr.ndim == 0:
            tau = float(self.slow.tau(0, m_arr))
            env = self.evolution.value_at(tau)
            interp = _PeriodicInterpolant(env, self.evolution.xi0, self.evolution.dxi)
            return interp(self.slow.xi(n, m))
        raise DomainError("envelope_values expects a scalar m (one row at a time)")


def assemble_ansatz(evolution: EnvelopeEvolution, coeffs: ReductionCoefficients,
                    N: int, window: tuple, include_zeroth: bool = True,
                    include_second: bool = True) -> AnsatzField:
    """Build the real lattice field of the truncated multiscale expansion.

    window = (n_size, m_size).  Slow coordinates must stay inside the stored
    tau range of the evolution (xi wraps periodically); violations raise with
    the offending (n, m).
    """
    n_size, m_size = window
    if n_size < 2 or m_size < 2:
        raise DomainError("window must be at least 2x2")
    slow = SlowCoordinates.from_coefficients(coeffs, N)
    kappa, omega = coeffs.carrier.kappa, coeffs.carrier.omega
    ns = np.arange(n_size)
    out = np.empty((n_size, m_size), dtype=np.float64)
    tau2 = coeffs.tau2
    for m in range(m_size):
        tau_m = float(slow.tau(0, m))
        if not (evolution.tau_min - 1e-12 <= tau_m <= evolution.tau_max + 1e-12):
            raise DomainError(
                f"slow time tau = {tau_m} at lattice row m = {m} outside the "
                f"envelope evolution range [{evolution.tau_min}, {evolution.tau_max}]"
            )
        env_vals = evolution.value_at(tau_m)
        interp = _PeriodicInterpolant(env_vals, evolution.xi0, evolution.dxi)
        xi_row = slow.xi(ns, m)
        u1 = interp(xi_row)
        phase = np.exp(1j * (kappa * ns - omega * m))
        row = 2.0 * np.real(u1 * phase) / N
        if include_zeroth:
            zeroth = ZerothHarmonic(env_vals, evolution.xi0, evolution.dxi, coeffs.tau1)
            row = row + zeroth.value(xi_row) / N
        if include_second:
            row = row + 2.0 * np.real(tau2 * u1 ** 2 * phase ** 2) / N ** 2
        out[:, m] = row
    return AnsatzField(N=N, coeffs=coeffs, evolution=evolution,
                       field=LatticeField(out), include_zeroth=include_zeroth,
                       include_second=include_second, slow=slow)


def fit_scaling_exponent(n_list, residuals) -> tuple:
    """Least-squares exponent of R ~ (1/N)^e; returns (exponent, r_squared)."""
    n_arr = np.asarray(n_list, dtype=float)
    r_arr = np.asarray(residuals, dtype=float)
    keep = r_arr > 0
    if int(np.sum(keep)) < 3:
        raise DomainError("scaling fit needs at least 3 positive residuals")
    x = np.log(1.0 / n_arr[keep])
    y = np.log(r_arr[keep])
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), r2


def residual_scaling(evolution: EnvelopeEvolution, coeffs: ReductionCoefficients,
                     N_list, window: tuple, margin: int = 5,
                     include_zeroth: bool = True, include_second: bool = True) -> dict:
    """lpKdV residual of the assembled ansatz versus N, with a log-log fit.

    Residual norm: max over interior plaquettes excluding `margin` near the
    window edges (boundary points lack full ansatz accuracy).  Report matches
    the documented JSON schema {"N", "residual", "exponent", "fit_r2"}.
    """
    N_list = list(N_list)
    if len(N_list) < 3 or sorted(N_list) != N_list:
        raise DomainError("N_list must be ascending with at least 3 entries")
    residuals = []
    for N in N_list:
        ans = assemble_ansatz(evolution, coeffs, N, window,
                              include_zeroth=include_zeroth,
                              include_second=include_second)
        residuals.append(max_residual(ans.field, coeffs.params, margin=margin))
    if all(r == 0.0 for r in residuals):
        return {"N": N_list, "residual": residuals, "exponent": "exact", "fit_r2": 1.0}
    exponent, r2 = fit_scaling_exponent(N_list, residuals)
    return {"N": N_list, "residual": residuals, "exponent": exponent, "fit_r2": r2}
