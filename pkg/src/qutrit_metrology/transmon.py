"""Flux-tunable transmon in the perturbative (large E_J/E_C) regime.

Energies are in joules, fluxes in webers, frequencies in rad/s. The spectrum
is the leading-order expansion

    E_n = sqrt(8 E_C E_J(Phi)) (n + 1/2) - E_J(Phi) - E_C (6 n^2 + 6 n + 3) / 12

with the SQUID Josephson energy
E_J(Phi) = E_J_sum * sqrt(cos^2(pi Phi/Phi_0) + a^2 sin^2(pi Phi/Phi_0)).
Only the square-root term depends on flux in a transition frequency, so all
level spacings shift by the same amount when the flux changes.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import constants


class InvalidDeviceError(ValueError):
    pass


class SpectrumValidityWarning(UserWarning):
    """The perturbative spectrum is being used outside its regime."""


#: Typical operating window for E_J_sum / E_C.
TRANSMON_RATIO_RANGE = (80.0, 200.0)


@dataclass(frozen=True)
class TransmonParams:
    """Device constants.

    ``n_g`` is accepted for completeness; charge dispersion is exponentially
    small in the transmon limit and the spectrum ignores it.
    """

    E_C: float
    E_J_sum: float
    asymmetry: float
    loop_area: float
    n_g: float = 0.0

    def __post_init__(self):
        values = (self.E_C, self.E_J_sum, self.asymmetry, self.loop_area, self.n_g)
        if not all(np.isfinite(v) for v in values):
            raise InvalidDeviceError("device parameters must be finite")
        if self.E_C < 0 or self.E_J_sum <= 0:
            raise InvalidDeviceError("need E_C >= 0 and E_J_sum > 0")
        if not 0 <= self.asymmetry <= 1:
            raise InvalidDeviceError(f"asymmetry must lie in [0, 1], got {self.asymmetry}")
        if self.loop_area <= 0:
            raise InvalidDeviceError("loop area must be positive")
        lo, hi = TRANSMON_RATIO_RANGE
        ratio = self.E_J_sum / self.E_C if self.E_C > 0 else np.inf
        if not lo <= ratio <= hi:
            warnings.warn(
                f"E_J_sum/E_C = {ratio:.4g} is outside the usual transmon range {lo:g}-{hi:g}",
                SpectrumValidityWarning,
                stacklevel=3,
            )

    @classmethod
    def from_frequencies(cls, ec_hz, ej_sum_hz, asymmetry, loop_area, n_g=0.0):
        """Build from energies quoted as E/h in Hz."""
        h = constants.PLANCK
        return cls(ec_hz * h, ej_sum_hz * h, asymmetry, loop_area, n_g)


@dataclass(frozen=True)
class FluxPoint:
    flux: float

    @property
    def reduced(self) -> float:
        """pi * Phi / Phi_0."""
        return np.pi * self.flux / constants.FLUX_QUANTUM


def josephson_energy(p: TransmonParams, flux):
    x = np.pi * np.asarray(flux, dtype=float) / constants.FLUX_QUANTUM
    return p.E_J_sum * np.sqrt(np.cos(x) ** 2 + p.asymmetry**2 * np.sin(x) ** 2)


def _josephson_energy_derivative(p: TransmonParams, flux):
    """dE_J/dPhi."""
    x = np.pi * np.asarray(flux, dtype=float) / constants.FLUX_QUANTUM
    s, c = np.sin(x), np.cos(x)
    root = np.sqrt(c**2 + p.asymmetry**2 * s**2)
    return -p.E_J_sum * (np.pi / constants.FLUX_QUANTUM) * (1 - p.asymmetry**2) * s * c / root


def _check_validity(p: TransmonParams, ej, n):
    ej = np.asarray(ej)
    if p.E_C == 0:
        return
    if np.any(np.sqrt(8 * p.E_C / ej) > 0.5):
        warnings.warn(
            "sqrt(8 E_C/E_J) > 0.5: perturbative spectrum is unreliable at this flux",
            SpectrumValidityWarning,
            stacklevel=3,
        )
    elif np.any(np.asarray(n) > 0.25 * np.sqrt(8 * ej / p.E_C)):
        warnings.warn(
            "level index exceeds the well-depth bound of the perturbative spectrum",
            SpectrumValidityWarning,
            stacklevel=3,
        )


def energy_level(p: TransmonParams, flux, n):
    n = np.asarray(n)
    if np.any(n < 0):
        raise ValueError("level index must be non-negative")
    ej = josephson_energy(p, flux)
    _check_validity(p, ej, n)
    return np.sqrt(8 * p.E_C * ej) * (n + 0.5) - ej - p.E_C / 12 * (6 * n**2 + 6 * n + 3)


def transition_frequency(p: TransmonParams, flux, n=0):
    """omega_{n,n+1} = (E_{n+1} - E_n)/hbar = (sqrt(8 E_C E_J) - E_C (n+1))/hbar."""
    n = np.asarray(n)
    if np.any(n < 0):
        raise ValueError("level index must be non-negative")
    ej = josephson_energy(p, flux)
    _check_validity(p, ej, n + 1)
    return (np.sqrt(8 * p.E_C * ej) - p.E_C * (n + 1)) / constants.HBAR


def frequency_shift(p: TransmonParams, flux, flux_ref):
    """omega_01(Phi) - omega_01(Phi_ref); identical for every n -> n+1 transition."""
    s = np.sqrt(8 * p.E_C * josephson_energy(p, flux))
    s_ref = np.sqrt(8 * p.E_C * josephson_energy(p, flux_ref))
    return (s - s_ref) / constants.HBAR


def magnetic_moment(p: TransmonParams, flux_ref):
    """mu = hbar * A * d(omega_01)/dPhi at the bias flux (J/T), sign kept.

    The -E_J term and the E_C offsets cancel in omega_01, so only
    sqrt(8 E_C E_J(Phi)) contributes.
    """
    ej = josephson_energy(p, flux_ref)
    dej = _josephson_energy_derivative(p, flux_ref)
    return p.loop_area * np.sqrt(8 * p.E_C) * dej / (2 * np.sqrt(ej))


@dataclass(frozen=True)
class BiasOptimum:
    flux: float
    moment: float
    #: flux where tan^2(pi Phi/Phi_0) = 1/a (maximizes |dE_J/dPhi|)
    tan2_candidate_flux: float
    tan2_candidate_moment: float
    #: flux where tan^2 = u solves 2 a^2 u^2 - (1 - a^2) u - 2 = 0 (maximizes |d sqrt(E_J)/dPhi|)
    sqrt_candidate_flux: float
    #: pi (A/Phi_0) sqrt(8 E_C E_J_sum / a), the small-asymmetry closed form
    small_asymmetry_moment: float
    valid: bool


def _flux_from_tan2(u: float) -> float:
    return constants.FLUX_QUANTUM / np.pi * np.arctan(np.sqrt(u))


def optimal_bias(p: TransmonParams, grid_points: int = 4001) -> BiasOptimum:
    """Bias flux in (0, Phi_0/2) maximizing |mu|.

    The numerical maximum is the reported answer; the closed-form candidates
    are attached for comparison only.
    """
    a = p.asymmetry
    if a >= 1:
        raise InvalidDeviceError("a symmetric-energy SQUID (a = 1) has no flux sensitivity")
    phi0 = constants.FLUX_QUANTUM
    valid = True
    if a == 0:
        warnings.warn(
            "a = 0: |mu| grows towards Phi_0/2 where E_J vanishes and the "
            "perturbative spectrum breaks down",
            SpectrumValidityWarning,
            stacklevel=2,
        )
        valid = False

    def objective(x):
        return -abs(magnetic_moment(p, x * phi0))

    # coarse grid keeps the bounded search away from the E_J -> 0 edge
    xs = np.linspace(0, 0.5, grid_points)[1:-1]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SpectrumValidityWarning)
        i = int(np.argmin([objective(x) for x in xs]))
        lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
        res = minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-14})
        x_best = res.x if res.fun <= objective(xs[i]) else xs[i]
        flux = x_best * phi0
        mu = float(magnetic_moment(p, flux))
        if np.sqrt(8 * p.E_C / josephson_energy(p, flux)) > 0.5:
            valid = False

        tan2_flux = _flux_from_tan2(1 / a) if a > 0 else phi0 / 2
        tan2_mu = float(magnetic_moment(p, tan2_flux))
        if a > 0:
            u = ((1 - a**2) + np.sqrt((1 - a**2) ** 2 + 16 * a**2)) / (4 * a**2)
            sqrt_flux = _flux_from_tan2(u)
            closed = np.pi * p.loop_area / phi0 * np.sqrt(8 * p.E_C * p.E_J_sum / a)
        else:
            sqrt_flux, closed = phi0 / 2, np.inf
    if not valid:
        warnings.warn("optimal bias lies outside the perturbative regime",
                      SpectrumValidityWarning, stacklevel=2)
    return BiasOptimum(flux, mu, tan2_flux, tan2_mu, sqrt_flux, closed, valid)


def accumulated_phase(p: TransmonParams, flux_ref, flux, tau):
    """Exact phase [omega_01(Phi) - omega_01(Phi_ref)] * tau."""
    return frequency_shift(p, flux, flux_ref) * tau


def linearized_phase(mu, delta_field, tau):
    """mu * dH * tau / hbar."""
    return mu * delta_field * tau / constants.HBAR
