"""Semi-classical Fourier phase estimation in base d.

Step k (k = K-1 down to 0) waits tau_k = d^k tau_0, cancels the phase of the
digits already found, applies the inverse Fourier readout and takes one
projective measurement. With tau_0 chosen so that the full range H_0 gives
2 pi of phase at tau_0, a field with an exact K-digit base-d representation
is recovered without error.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np

from . import qudit
from .qudit import DigitString, QuditState
from .transmon import TransmonParams, frequency_shift

MODES = ("analytic", "sampled")

#: probabilities closer than this to the maximum count as tied
TIE_TOL = 1e-12


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProtocolConfig:
    base: int
    steps: int
    tau0: float
    field_range: float
    mode: str = "analytic"
    seed: int = 0

    def __post_init__(self):
        if int(self.base) != self.base or self.base < 2:
            raise qudit.InvalidDimensionError(f"base must be >= 2, got {self.base}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not self.tau0 > 0 or not self.field_range > 0:
            raise ValueError("tau0 and field_range must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    @property
    def h0(self) -> float:
        """Field of the most significant digit: H_0 / d."""
        return self.field_range / self.base

    def delays(self):
        return [self.base**k * self.tau0 for k in range(self.steps)]


class PhaseOracle:
    """Maps a delay tau to the accumulated relative phase phi(tau).

    Subclasses implement ``phase``; ``cycle_state`` runs one
    prepare-wait-compensate-readout cycle and may be overridden by backends
    that realize the cycle with their own pulses.
    """

    def phase(self, tau: float) -> float:
        raise NotImplementedError

    def __call__(self, tau: float) -> float:
        phi = float(self.phase(tau))
        if not np.isfinite(phi):
            raise OracleError(f"oracle returned a non-finite phase for tau={tau!r}")
        return phi

    def cycle_state(self, d: int, tau: float, theta: float) -> QuditState:
        phi = self(tau)
        state = qudit.balanced_state(d)
        state = qudit.apply(qudit.phase_evolution(d, phi), state)
        state = qudit.apply(np.diag(np.exp(-1j * np.arange(d) * theta)), state)
        return qudit.apply(qudit.inverse_fourier_matrix(d), state)


@dataclass(frozen=True)
class LinearOracle(PhaseOracle):
    """phi(tau) = rate * tau."""

    rate: float

    def phase(self, tau):
        return self.rate * tau

    @classmethod
    def for_field(cls, field: float, config: ProtocolConfig) -> "LinearOracle":
        """Oracle with phi(tau_0) = 2 pi H / H_0, i.e. tau_0 = 2 pi hbar / (mu H_0)."""
        return cls(2 * np.pi * field / (config.field_range * config.tau0))


@dataclass(frozen=True)
class MeasurementRecord:
    step: int
    delay: float
    compensation: float
    outcome: int
    probabilities: np.ndarray


def outcome_probabilities(phase, d: int) -> np.ndarray:
    """P_j = |<j| F_d^{-1} |psi_phase>|^2 = (1/d^2) |sum_m e^{i m (phase - 2 pi j/d)}|^2."""
    j = np.arange(d)
    m = np.arange(d)
    amps = np.exp(1j * np.outer(phase - 2 * np.pi * j / d, m)).sum(axis=1) / d
    return np.abs(amps) ** 2


def digit_probabilities(t_true: int, residual: float, d: int, step_scale: int = 1) -> np.ndarray:
    """Outcome probabilities for true digit ``t_true`` plus an uncompensated
    residual phase amplified by ``step_scale`` (= d^(K-1-k) at step k)."""
    phi = 2 * np.pi * t_true / d + step_scale * residual
    if d == 3:
        j = np.arange(3)
        return (1 + 2 * np.cos(phi - 2 * np.pi * j / 3)) ** 2 / 9
    return outcome_probabilities(phi, d)


def pick_digit(probabilities) -> int:
    """Argmax with ties broken towards the smallest digit."""
    p = np.asarray(probabilities)
    return int(np.flatnonzero(p >= p.max() - TIE_TOL)[0])


def run_fourier_estimation(config: ProtocolConfig, oracle: PhaseOracle,
                           rng: Optional[np.random.Generator] = None):
    """Estimate K digits, least significant first.

    Returns the DigitString (most significant first) and one
    MeasurementRecord per step in measurement order.
    """
    d, K = config.base, config.steps
    if config.mode == "sampled" and rng is None:
        rng = np.random.default_rng(config.seed)
    found = {}  # digit index -> value
    records = []
    for k in range(K - 1, -1, -1):
        tau = d**k * config.tau0
        known = [found[j] for j in range(k + 1, K)]
        theta = qudit.compensation_phase(d, known)
        state = oracle.cycle_state(d, tau, theta)
        probs = qudit.born_probabilities(state)
        if config.mode == "analytic":
            outcome = pick_digit(probs)
        else:
            outcome = qudit.sample_outcome(state, rng)
        found[k] = outcome
        records.append(MeasurementRecord(k, tau, theta, outcome, probs))
    return DigitString(d, tuple(found[k] for k in range(K))), records


def run_many(config: ProtocolConfig, oracle: PhaseOracle, runs: int):
    """Independent runs, each with its own child stream of ``config.seed``."""
    children = np.random.SeedSequence(config.seed).spawn(runs)
    return [run_fourier_estimation(config, oracle, np.random.default_rng(s)) for s in children]


def decode_field(digits: DigitString, h0: float) -> float:
    """H = h0 * sum_k x_k / d^k."""
    return h0 * digits.fraction()


def encode_field(field: float, config: ProtocolConfig) -> DigitString:
    """Nearest-below K-digit string of ``field`` on the grid h0 / d^(K-1)."""
    d, K = config.base, config.steps
    n = int(np.floor(field / config.h0 * d ** (K - 1) + 1e-9))
    return DigitString.from_integer(n % d**K, d, K)


def string_likelihood(phase: float, digits: DigitString) -> float:
    """P(x | H) = prod_k (1/d^2) |sum_m e^{i m d^k (phase - phi_x)}|^2,
    ``phase`` being the field phase at tau_0."""
    d = digits.base
    delta = phase - digits.reference_phase()
    m = np.arange(d)
    total = 1.0
    for k in range(len(digits)):
        total *= abs(np.exp(1j * m * d**k * delta).sum()) ** 2 / d**2
    return total


def outcome_distribution(config: ProtocolConfig, oracle: PhaseOracle):
    """Exact probability of every digit string under Born-rule sampling,
    by enumerating all measurement paths. Returns {DigitString: prob}."""
    d, K = config.base, config.steps
    dist = {}
    for tail in product(range(d), repeat=K):
        digits = DigitString(d, tail)
        prob = 1.0
        for k in range(K - 1, -1, -1):
            theta = qudit.compensation_phase(d, [tail[j] for j in range(k + 1, K)])
            p = qudit.born_probabilities(oracle.cycle_state(d, d**k * config.tau0, theta))
            prob *= p[tail[k]]
            if prob == 0:
                break
        dist[digits] = prob
    return dist


class TransmonOracle(PhaseOracle):
    """Transmon qutrit biased at ``flux_ref`` and exposed to ``flux``.

    The drive tones sit at omega_01(flux_ref) and omega_12(flux_ref), so
    level 1 picks up phi = [omega_01(flux) - omega_01(flux_ref)] tau and
    level 2 picks up 2 phi. The cycle uses the pulse-synthesized
    preparation and readout unitaries.
    """

    def __init__(self, device: TransmonParams, flux: float, flux_ref: float, solution=None):
        from .pulse import protocol_unitaries, solve_transcendental

        self.device = device
        self.flux = flux
        self.flux_ref = flux_ref
        self.rate = float(frequency_shift(device, flux, flux_ref))
        self.solution = solution or solve_transcendental()
        self.readout, self.preparation = protocol_unitaries(self.solution)

    def phase(self, tau):
        return self.rate * tau

    def free_evolution(self, tau: float) -> np.ndarray:
        phi = self(tau)
        return np.diag(np.exp(1j * np.array([0.0, phi, 2 * phi])))

    def cycle_state(self, d, tau, theta):
        if d != 3:
            raise ValueError("the transmon backend runs in qutrit mode only (d = 3)")
        state = qudit.QuditState.basis(3, 0)
        state = qudit.apply(self.preparation, state)
        state = qudit.apply(self.free_evolution(tau), state)
        # diagonal compensation commutes with the readout's right phase factor
        state = qudit.apply(np.diag(np.exp(-1j * np.arange(3) * theta)), state)
        return qudit.apply(self.readout, state)


def transmon_backend(device: TransmonParams, flux: float, flux_ref: float) -> TransmonOracle:
    return TransmonOracle(device, flux, flux_ref)
