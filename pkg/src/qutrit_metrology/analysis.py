"""Posteriors, success probabilities and resource accounting.

With a uniform prior the posterior of the field phase after observing a
K-digit string x is

    P(phi | x) = (1/2pi) sin^2(N (phi - phi_x)/2) / (N sin^2((phi - phi_x)/2)),

N = d^K, a Fejer kernel centred on the string's reference phase phi_x.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from . import constants
from .qudit import DigitString

#: below this |phi - phi_x| (mod 2 pi) the kernel is evaluated by its series
SERIES_CUTOFF = 1e-6


@dataclass(frozen=True)
class PosteriorSpec:
    base: int
    steps: int
    reference_phase: float = 0.0

    def __post_init__(self):
        if self.base < 2 or self.steps < 1:
            raise ValueError("need base >= 2 and steps >= 1")
        object.__setattr__(self, "reference_phase", float(self.reference_phase) % (2 * np.pi))

    @classmethod
    def from_digits(cls, digits: DigitString) -> "PosteriorSpec":
        return cls(digits.base, len(digits), digits.reference_phase())

    @property
    def size(self) -> int:
        return self.base**self.steps


def _wrap(delta):
    """Map to [-pi, pi)."""
    return (np.asarray(delta, dtype=float) + np.pi) % (2 * np.pi) - np.pi


def fejer_density(delta, n: int):
    """(1/2pi) sin^2(n delta/2) / (n sin^2(delta/2)) with the removable
    singularity at delta = 0 (mod 2 pi) filled in."""
    x = _wrap(delta)
    small = np.abs(x) < SERIES_CUTOFF
    safe = np.where(small, 1.0, x)
    with np.errstate(invalid="ignore", divide="ignore"):
        exact = np.sin(n * safe / 2) ** 2 / (n * np.sin(safe / 2) ** 2)
    series = n * (1 - (n**2 - 1) * x**2 / 12)
    out = np.where(small, series, exact) / (2 * np.pi)
    return out if out.ndim else float(out)


def posterior_density(phi, spec: PosteriorSpec):
    return fejer_density(np.asarray(phi) - spec.reference_phase, spec.size)


def _likelihood_product(delta, d: int, K: int):
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    m = np.arange(d)
    out = np.ones_like(delta)
    for k in range(K):
        out *= np.abs(np.exp(1j * np.outer(d**k * delta, m)).sum(axis=1)) ** 2 / d**2
    return out


@lru_cache(maxsize=None)
def _product_normalization(d: int, K: int) -> float:
    # the product is a trigonometric polynomial of degree < d^K squared, so the
    # equispaced rule with 2 d^K nodes integrates it exactly over one period
    nodes = 2 * d**K
    grid = 2 * np.pi * np.arange(nodes) / nodes
    return float(2 * np.pi * _likelihood_product(grid, d, K).mean())


def posterior_product(phi, digits: DigitString):
    """Per-step likelihood product for ``digits``, normalized to a density on [0, 2pi)."""
    d, K = digits.base, len(digits)
    delta = np.asarray(phi, dtype=float) - digits.reference_phase()
    out = _likelihood_product(delta, d, K) / _product_normalization(d, K)
    return out.reshape(np.shape(delta)) if np.ndim(delta) else float(out[0])


def integrate_posterior(spec: PosteriorSpec, lo: float, hi: float) -> float:
    """Integral of the posterior over [lo, hi] in delta = phi - phi_x.

    The interval is split at the kernel zeros 2 pi m / N so each adaptive
    quadrature sees a single smooth lobe.
    """
    n = spec.size
    step = 2 * np.pi / n
    cuts = step * np.arange(math.ceil(lo / step), math.floor(hi / step) + 1)
    edges = np.unique(np.concatenate([[lo], cuts[(cuts > lo) & (cuts < hi)], [hi]]))
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = quad(fejer_density, a, b, args=(n,), epsabs=1e-13, epsrel=1e-12, limit=200)
        total += val
    return total


def central_peak_probability(d: int, K: int) -> float:
    """Posterior mass within |delta| <= 2 pi / d^K."""
    spec = PosteriorSpec(d, K)
    half = 2 * np.pi / spec.size
    return integrate_posterior(spec, -half, half)


def large_k_peak_probability() -> float:
    """(1/pi) int_{-pi}^{pi} sin^2 y / y^2 dy, the K -> infinity limit."""
    val, _ = quad(lambda y: np.sinc(y / np.pi) ** 2, -np.pi, np.pi, epsabs=1e-14)
    return val / np.pi


def density_profile(spec: PosteriorSpec, grid) -> np.ndarray:
    """Rows (delta_phi, density) for plotting."""
    grid = np.asarray(grid, dtype=float)
    return np.column_stack([grid, fejer_density(grid, spec.size)])


@dataclass(frozen=True)
class ResourceBudget:
    total_time: float
    steps: int
    tau0: float

    @classmethod
    def for_protocol(cls, d: int, K: int, tau0: float) -> "ResourceBudget":
        return cls(coherence_time(d, K, tau0), K, tau0)


def coherence_time(d: int, K: int, tau0: float) -> float:
    """tau0 * sum_{k<K} d^k."""
    return tau0 * ((d**K - 1) // (d - 1))


def heisenberg_precision(d: int, total_time: float, mu: float) -> float:
    """2 pi hbar / (mu (d-1) T)."""
    return 2 * np.pi * constants.HBAR / (mu * (d - 1) * total_time)


def t2_limited_precision(mu: float, d: int, t2: float) -> float:
    """Best resolution when the longest Ramsey delay equals T2."""
    return 2 * np.pi * constants.HBAR / (mu * d * t2)


def long_time_precision(mu: float, d: int, t2: float, t: float, t_rep: float | None = None) -> float:
    """Resolution after repeating the longest Ramsey sequence for a total time t.

    Without ``t_rep`` each repetition lasts T2; otherwise the repetition
    period is ``t_rep``.
    """
    if t_rep is None:
        return 2 * np.pi * constants.HBAR / (mu * d * np.sqrt(t2 * t))
    return 2 * np.pi * constants.HBAR / (mu * d * t2 * np.sqrt(t / t_rep))


def steps_required(d: int, relative_precision: float) -> int:
    """Smallest K with d^-K <= r, i.e. ceil(-log_d r)."""
    r = relative_precision
    if not 0 < r < 1:
        raise ValueError("relative precision must lie in (0, 1)")
    k = max(math.ceil(-math.log(r) / math.log(d)) - 1, 0)
    while d**k * r < 1 - 1e-12:
        k += 1
    return k


def step_ratio(d1: int, d2: int, relative_precision: float | None = None,
               integer: bool = False) -> float:
    """Steps needed in base d2 over steps needed in base d1.

    Without a precision, or with ``integer=False``, the continuous count
    -log_d r is used and the ratio is ln d1 / ln d2 for every r. With
    ``integer=True`` the ceilings are compared, which only approach that
    value as r -> 0.
    """
    if relative_precision is None or not integer:
        if relative_precision is None:
            return math.log(d1) / math.log(d2)
        r = relative_precision
        return (-math.log(r) / math.log(d2)) / (-math.log(r) / math.log(d1))
    return steps_required(d2, relative_precision) / steps_required(d1, relative_precision)


def max_steps(d: int, t2: float, tau0: float) -> int:
    """Largest K whose longest delay d^(K-1) tau0 still fits within T2."""
    if t2 < tau0:
        return 0
    k = 1 + math.floor(math.log(t2 / tau0) / math.log(d) + 1e-12)
    while d ** (k - 1) * tau0 > t2 * (1 + 1e-12):
        k -= 1
    return k
