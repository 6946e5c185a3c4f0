"""Closed-form estimation variances from the spectral data of the model.

Everything here is built from five gauge-invariant ingredients evaluated at
the working point: the level derivatives dE_l/d alpha_i (Hellmann-Feynman),
the gap derivatives d_i = d(dE)/d alpha_i, and the real and imaginary parts
(mu, nu) of <E0|d_i E1> from first-order perturbation theory.

The per-parameter variance of the saturating estimator is

    v_i(t) = (csc^2(dE t / 2) t^2 xi1_i + xi2_i) / (n t^2 xi3)

which equals the i-th diagonal element of (n F)^{-1} exactly. The xi
coefficients are polynomial in (mu, nu, d) and independent of both the
eigenvector phase gauge and the labeling order of the other two parameters.
"""

from dataclasses import dataclass

import numpy as np

from .core import HamiltonianModel, model_evaluate, pauli_compose, spectral_decompose
from .errors import DegenerateSpectrum, DivergentTime, DomainError, SingularQfim
from .util import csc_squared, near_pole
from .qfim import QfimMatrix, _validated_qfim, covariance_from_qfim, qfim_entangled

DEGENERACY_RTOL = 1e-10
POLE_PHASE_ATOL = 1e-9
POLE_TIME_ATOL = 1e-6
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SpectralSensitivities:
    """Derivatives of the spectral data with respect to the model parameters.

    dE has shape (2, 3): row l holds dE_l/d alpha_i for the upper (l = 0) and
    lower (l = 1) level. dgap, mu, nu have shape (3,).
    """

    dE: np.ndarray
    dgap: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    gap: float


@dataclass(frozen=True)
class XiCoefficients:
    xi1: np.ndarray
    xi2: np.ndarray
    xi3: float


@dataclass(frozen=True)
class VarianceCurveRow:
    t: float
    v1: float
    v2: float
    v3: float
    envelope: float
    infimum: float
    flag: str


def spectral_sensitivities(model: HamiltonianModel, alpha) -> SpectralSensitivities:
    """Hellmann-Feynman level derivatives and perturbative overlaps at alpha."""
    ev = model_evaluate(model, alpha)
    spec = spectral_decompose(ev.h)
    scale = max(abs(spec.e0), abs(spec.e1))
    if spec.gap <= DEGENERACY_RTOL * scale or spec.gap == 0.0:
        raise DegenerateSpectrum(
            f"spectral gap {spec.gap:.3e} too small relative to |H| = {scale:.3e}"
        )
    dE = np.empty((2, 3))
    c01 = np.empty(3, dtype=complex)
    for i in range(3):
        dh = pauli_compose(ev.jac[:, i])
        dE[0, i] = (spec.v0.conj() @ dh @ spec.v0).real
        dE[1, i] = (spec.v1.conj() @ dh @ spec.v1).real
        c01[i] = (spec.v0.conj() @ dh @ spec.v1) / (spec.e1 - spec.e0)
    return SpectralSensitivities(
        dE=dE,
        dgap=dE[0] - dE[1],
        mu=c01.real.copy(),
        nu=c01.imag.copy(),
        gap=spec.gap,
    )


def xi_coefficients(sens: SpectralSensitivities) -> XiCoefficients:
    """Variance coefficients; xi1/xi2 are per parameter, xi3 is shared."""
    mu, nu, d = sens.mu, sens.nu, sens.dgap
    xi1 = np.empty(3)
    xi2 = np.empty(3)
    for i in range(3):
        j, k = [idx for idx in range(3) if idx != i]
        xi1[i] = (mu[j] * d[k] - mu[k] * d[j]) ** 2 + (nu[j] * d[k] - nu[k] * d[j]) ** 2
        xi2[i] = 16.0 * (mu[k] * nu[j] - mu[j] * nu[k]) ** 2
    xi3 = 16.0 * float(mu @ np.cross(d, nu)) ** 2
    return XiCoefficients(xi1=xi1, xi2=xi2, xi3=xi3)


def qfim_spectral_form(model: HamiltonianModel, alpha, t: float) -> QfimMatrix:
    """QFIM assembled from spectral sensitivities:

        F = t^2 d d^T + 16 sin^2(dE t / 2) (mu mu^T + nu nu^T).

    Independent route used to cross-check the generator trace formula.
    """
    s = spectral_sensitivities(model, alpha)
    osc = 16.0 * np.sin(s.gap * t / 2.0) ** 2
    m = t * t * np.outer(s.dgap, s.dgap) + osc * (np.outer(s.mu, s.mu) + np.outer(s.nu, s.nu))
    return _validated_qfim(m, t, model.name, alpha)


def _check_time(t: float) -> None:
    if not t > 0.0:
        raise DomainError(f"evolution time must be positive, got {t}")


def estimator_variances(model: HamiltonianModel, alpha, t: float, n: int) -> np.ndarray:
    """Per-parameter variances of the optimal estimator after n trials.

    Closed form in the xi coefficients; falls back to the diagonal of
    (n F)^{-1} when the spectrum is too degenerate for the spectral route.
    """
    _check_time(t)
    if n < 1:
        raise DomainError("trial count must be >= 1")
    try:
        sens = spectral_sensitivities(model, alpha)
    except DegenerateSpectrum:
        cov = covariance_from_qfim(qfim_entangled(model, alpha, t), n)
        return np.diag(cov.m).copy()
    if near_pole(sens.gap * t, TWO_PI, POLE_PHASE_ATOL):
        raise DivergentTime(
            f"dE * t = {sens.gap * t:.12g} sits on a multiple of 2 pi; variance diverges"
        )
    xi = xi_coefficients(sens)
    if xi.xi3 == 0.0:
        raise SingularQfim("xi3 vanishes; the three parameters are not jointly identifiable")
    csc2 = csc_squared(sens.gap * t / 2.0)
    return (csc2 * t * t * xi.xi1 + xi.xi2) / (n * t * t * xi.xi3)


def variance_envelope(xi: XiCoefficients, c0: float, t: float, n: int) -> np.ndarray:
    """Lower envelope (c0 t^2 xi1 + xi2) / (n t^2 xi3) of the variance curve,
    one value per parameter.

    c0 = 1 touches the curve at the csc^2 minima; larger c0 lifts it. The
    envelope is non-increasing in t and tends to xi1 / (n xi3).
    """
    _check_time(t)
    if n < 1:
        raise DomainError("trial count must be >= 1")
    if c0 < 1.0:
        raise DomainError(f"envelope constant c0 must be >= 1, got {c0}")
    if xi.xi3 == 0.0:
        raise SingularQfim("xi3 vanishes; the three parameters are not jointly identifiable")
    return (c0 * t * t * xi.xi1 + xi.xi2) / (n * t * t * xi.xi3)


def variance_infimum(xi: XiCoefficients, n: int) -> np.ndarray:
    """Large-t limit xi1 / (n xi3) of the envelope, per parameter."""
    if n < 1:
        raise DomainError("trial count must be >= 1")
    if xi.xi3 == 0.0:
        raise SingularQfim("xi3 vanishes; the three parameters are not jointly identifiable")
    return xi.xi1 / (n * xi.xi3)


def variance_curve(model: HamiltonianModel, alpha, t_grid, n: int) -> list:
    """Evaluate the three variances plus envelope/infimum on a time grid.

    Grid points within 1e-6 of a divergence time 2 pi k / dE are kept in the
    output with NaN variances and flag "pole" instead of being dropped.
    The envelope and infimum columns refer to the first parameter.
    """
    sens = spectral_sensitivities(model, alpha)
    xi = xi_coefficients(sens)
    if xi.xi3 == 0.0:
        raise SingularQfim("xi3 vanishes; the three parameters are not jointly identifiable")
    inf1 = float(variance_infimum(xi, n)[0])
    rows = []
    for t in np.asarray(t_grid, dtype=float):
        _check_time(float(t))
        env1 = float(variance_envelope(xi, 1.0, float(t), n)[0])
        k = round(t * sens.gap / TWO_PI)
        if k >= 1 and abs(t - TWO_PI * k / sens.gap) < POLE_TIME_ATOL:
            rows.append(VarianceCurveRow(float(t), np.nan, np.nan, np.nan, env1, inf1, "pole"))
            continue
        try:
            v = estimator_variances(model, alpha, float(t), n)
        except DivergentTime:
            rows.append(VarianceCurveRow(float(t), np.nan, np.nan, np.nan, env1, inf1, "pole"))
            continue
        rows.append(
            VarianceCurveRow(float(t), float(v[0]), float(v[1]), float(v[2]), env1, inf1, "")
        )
    return rows
