"""Two-tone rf pulses that prepare and read out the transmon qutrit.

A rectangular two-tone pulse acts on levels 0, 1, 2 as exp(-iK) with

    K = [[0, D1, 0], [D1, 2 eps, D2], [0, D2, 0]],   eps = detuning * tau_p.

Requiring every |U_ij|^2 = 1/3 forces D1 = D2 = D and leaves the system

    eps^2 = xi^2 (1 - 2 / (3 sin^2 xi)),
    cos(eps) cos(xi) + (eps / xi) sin(eps) sin(xi) = 0,

with xi^2 = eps^2 + 2 D^2. The readout pulse uses (eps, D1, D2) =
(-eps0, D0, D0), the preparation pulse (+eps0, -D0, -D0).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import constants
from .qudit import UnitaryMatrix, inverse_fourier_matrix, fourier_matrix
from .transmon import TransmonParams, transition_frequency

XI_WINDOW = (np.arcsin(np.sqrt(2 / 3)), np.pi - np.arcsin(np.sqrt(2 / 3)))


class SolverError(RuntimeError):
    pass


class InconsistentSolutionError(RuntimeError):
    pass


class InvalidConfigurationError(ValueError):
    pass


def epsilon_of_xi(xi):
    """Non-negative eps from the modulus constraint; NaN where sin^2 xi < 2/3."""
    with np.errstate(invalid="ignore", divide="ignore"):
        return xi * np.sqrt(1 - 2 / (3 * np.sin(xi) ** 2))


def modulus_residual(eps, xi):
    return eps**2 - xi**2 * (1 - 2 / (3 * np.sin(xi) ** 2))


def phase_residual(eps, xi):
    return np.cos(eps) * np.cos(xi) + eps / xi * np.sin(eps) * np.sin(xi)


def _bisect(f, lo, hi, xtol=1e-12, maxiter=200):
    flo = f(lo)
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if fmid == 0:
            return mid
        if np.sign(fmid) == np.sign(flo):
            lo, flo = mid, fmid
        else:
            hi = mid
        if hi - lo < xtol:
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class PulseSolution:
    epsilon: float
    xi: float
    delta: float
    #: every (eps, xi) root found in the scan window, sorted by eps
    roots: tuple = field(default=(), compare=False)

    @property
    def readout_parameters(self):
        return (-self.epsilon, self.delta, self.delta)

    @property
    def preparation_parameters(self):
        return (self.epsilon, -self.delta, -self.delta)

    def residuals(self):
        """(modulus constraint, phase constraint, 2 D^2 - (xi^2 - eps^2))."""
        e, x, d = self.epsilon, self.xi, self.delta
        return (
            float(modulus_residual(e, x)),
            float(phase_residual(e, x)),
            float(2 * d**2 - (x**2 - e**2)),
        )


def solve_transcendental(grid_points: int = 10_000, xtol: float = 1e-12) -> PulseSolution:
    """Smallest-eps solution of the equal-modulus constraints.

    Scans xi over the window where sin^2 xi >= 2/3 for sign changes of the
    phase constraint (with eps eliminated through the modulus constraint) and
    refines each bracket by bisection.
    """
    lo, hi = XI_WINDOW
    xs = np.linspace(lo, hi, grid_points + 2)[1:-1]

    def g(x):
        return phase_residual(epsilon_of_xi(x), x)

    gs = g(xs)
    brackets = np.flatnonzero(np.sign(gs[:-1]) * np.sign(gs[1:]) < 0)
    roots = []
    for i in brackets:
        x = _bisect(g, xs[i], xs[i + 1], xtol=xtol)
        roots.append((float(epsilon_of_xi(x)), float(x)))
    if not roots:
        raise SolverError("no root of the pulse constraints in the scanned window")
    roots.sort()
    eps, xi = roots[0]
    delta = float(np.sqrt((xi**2 - eps**2) / 2))
    return PulseSolution(eps, xi, delta, tuple(roots))


def generator_matrix(eps, delta1, delta2) -> np.ndarray:
    return np.array(
        [[0.0, delta1, 0.0], [delta1, 2.0 * eps, delta2], [0.0, delta2, 0.0]]
    )


def _closed_form(eps, d1, d2) -> np.ndarray:
    dsq = d1**2 + d2**2
    xi = np.sqrt(eps**2 + dsq)
    if dsq > 0:
        v = np.array([d1, 0.0, d2]) / np.sqrt(dsq)
        dark = np.array([d2, 0.0, -d1]) / np.sqrt(dsq)
    else:
        # K is diagonal; any split of the outer levels works
        v = np.array([1.0, 0.0, 0.0])
        dark = np.array([0.0, 0.0, 1.0])
    w = np.array([0.0, 1.0, 0.0])
    vv, ww = np.outer(v, v), np.outer(w, w)
    # the sqrt(dsq) factors in the off-diagonal terms reduce to d1, d2
    coupling = -(np.outer(v, w) + np.outer(w, v)) * np.sqrt(dsq)
    sinc = np.sinc(xi / np.pi)  # sin(xi)/xi, finite at xi = 0
    return (
        np.outer(dark, dark)
        + np.exp(-1j * eps) * np.cos(xi) * (vv + ww)
        + 1j * np.exp(-1j * eps) * sinc * (eps * vv + coupling - eps * ww)
    )


def _exponential(eps, d1, d2) -> np.ndarray:
    evals, evecs = np.linalg.eigh(generator_matrix(eps, d1, d2))
    return (evecs * np.exp(-1j * evals)) @ evecs.T


def pulse_unitary(eps, delta1, delta2, method: str = "closed_form") -> UnitaryMatrix:
    """exp(-iK) either from the three-projector closed form or by
    diagonalizing the real symmetric K."""
    if method == "closed_form":
        return UnitaryMatrix(_closed_form(eps, delta1, delta2))
    if method == "exponential":
        return UnitaryMatrix(_exponential(eps, delta1, delta2))
    raise ValueError(f"unknown method {method!r}")


def readout_diagonals(eps0: float):
    """(D_L, D_R) with U_r = diag(D_L) F_3^{-1} diag(D_R)."""
    left = np.exp(1j * np.array([0.0, eps0 - np.pi / 3, 4 * np.pi / 3]))
    right = np.array([np.exp(-1j * np.pi / 6), -1j * np.exp(1j * eps0), np.exp(-5j * np.pi / 6)])
    return left, right


def protocol_unitaries(sol: PulseSolution, atol: float = 1e-10):
    """(U_r, U_p): readout pulse and its inverse, the preparation pulse."""
    u_r = pulse_unitary(*sol.readout_parameters)
    u_p = pulse_unitary(*sol.preparation_parameters)
    if np.abs(u_p.matrix - u_r.matrix.conj().T).max() > atol:
        raise InconsistentSolutionError("preparation pulse is not the inverse of the readout pulse")
    if equal_modulus_classification(u_r) != "inverse_fourier":
        raise InconsistentSolutionError("readout pulse is not a generalized inverse Fourier transform")
    return u_r, u_p


def strip_phases(U) -> np.ndarray:
    """Multiply by diagonal phases so the first row and column are real positive."""
    mat = np.array(U.matrix if isinstance(U, UnitaryMatrix) else U, dtype=complex)
    mat = mat / (mat[0] / np.abs(mat[0]))[None, :]
    mat = mat / (mat[:, 0] / np.abs(mat[:, 0]))[:, None]
    return mat


def equal_modulus_classification(U, atol: float = 1e-9) -> str:
    """'fourier', 'inverse_fourier' or 'neither', up to left/right diagonal phases."""
    mat = np.asarray(U.matrix if isinstance(U, UnitaryMatrix) else U)
    d = mat.shape[0]
    if np.abs(np.abs(mat) ** 2 - 1 / d).max() > atol:
        return "neither"
    canon = strip_phases(mat)
    if np.abs(canon - inverse_fourier_matrix(d).matrix).max() < atol:
        return "inverse_fourier"
    if np.abs(canon - fourier_matrix(d).matrix).max() < atol:
        return "fourier"
    return "neither"


def transition_amplitude(beta, voltage, matrix_element):
    """Effective rate beta e V <n|N|n+1> / hbar (rad/s) for one tone.

    beta and the charge matrix element are device specific and must be
    supplied; for a transmon <1|N|2> ~ sqrt(2) <0|N|1>.
    """
    return beta * constants.ELEMENTARY_CHARGE * voltage * matrix_element / constants.HBAR


def rectangular(t):
    return np.ones_like(np.asarray(t, dtype=float))


@dataclass(frozen=True)
class IQSettings:
    a1: float
    a2: float
    omega_lo: float
    omega_if: float
    phase: float
    envelope: Callable = rectangular
    sample_rate: float = 0.0

    def tones(self):
        """[(omega, amplitude, phase)] of the two output components."""
        return [
            (self.omega_lo + self.omega_if, (self.a1 - self.a2) / 4, self.phase),
            (self.omega_lo - self.omega_if, (self.a1 + self.a2) / 4, -self.phase),
        ]


def iq_pulse_settings(mode, device: TransmonParams, flux_ref, detuning, v1, v2,
                      sample_rate=0.0, envelope=rectangular) -> IQSettings:
    """IQ-mixer settings producing tones omega_01 - 2 dw (amplitude v1) and
    omega_12 + 2 dw (amplitude v2) for readout; preparation inverts the
    detuning and, through the pi carrier phase, both amplitudes."""
    w01 = float(transition_frequency(device, flux_ref, 0))
    w12 = float(transition_frequency(device, flux_ref, 1))
    half_gap = 0.5 * (w01 - w12)
    if mode == "readout":
        omega_if, phase = half_gap - 2 * detuning, 0.0
    elif mode == "preparation":
        omega_if, phase = half_gap + 2 * detuning, np.pi
    else:
        raise ValueError(f"mode must be 'readout' or 'preparation', got {mode!r}")
    if omega_if <= 0:
        raise InvalidConfigurationError(f"intermediate frequency must be positive, got {omega_if:.6g} rad/s")
    return IQSettings(
        a1=2 * (v1 + v2),
        a2=2 * (v2 - v1),
        omega_lo=0.5 * (w01 + w12),
        omega_if=omega_if,
        phase=phase,
        envelope=envelope,
        sample_rate=sample_rate,
    )


@dataclass(frozen=True, eq=False)
class Waveform:
    sample_rate: float
    times: np.ndarray
    volts: np.ndarray

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("t_s,v_volts\n")
            for t, v in zip(self.times, self.volts):
                fh.write(f"{np.format_float_positional(t, unique=True, trim='0')},{float(v)!r}\n")

    @classmethod
    def from_csv(cls, path) -> "Waveform":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["t_s", "v_volts"]:
                raise ValueError(f"unexpected waveform header {header}")
            rows = np.array([[float(a), float(b)] for a, b in reader])
        times, volts = rows[:, 0], rows[:, 1]
        dt = np.diff(times)
        if dt.size and not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
            raise ValueError("waveform time grid is not uniform")
        rate = 1 / dt[0] if dt.size else 0.0
        return cls(rate, times, volts)


def synthesize_waveform(settings: IQSettings, duration: float) -> Waveform:
    """Sample V(t) = (Omega(t)/4) [(A1 - A2) cos((w_LO + w_IF) t + phi)
    + (A1 + A2) cos((w_LO - w_IF) t - phi)] on [0, duration]."""
    fs = settings.sample_rate
    f_max = max(abs(w) for w, _, _ in settings.tones()) / (2 * np.pi)
    if fs <= 4 * f_max:
        raise InvalidConfigurationError(
            f"sample rate {fs:.6g} Hz must exceed 4x the highest tone ({f_max:.6g} Hz)"
        )
    n = int(np.floor(duration * fs + 1e-9)) + 1
    t = np.arange(n) / fs
    s = settings
    v = s.envelope(t) / 4 * (
        (s.a1 - s.a2) * np.cos((s.omega_lo + s.omega_if) * t + s.phase)
        + (s.a1 + s.a2) * np.cos((s.omega_lo - s.omega_if) * t - s.phase)
    )
    return Waveform(fs, t, v)


def rotating_frame_hamiltonian(device: TransmonParams, flux_ref, omega1, omega2,
                               envelope, delta1, delta2):
    """t -> H(t)/hbar (rad/s) for the three lowest levels in the frame
    rotating at omega1 (0-1) and omega2 (1-2), rotating-wave approximation."""
    w01 = float(transition_frequency(device, flux_ref, 0))
    w12 = float(transition_frequency(device, flux_ref, 1))
    diag = np.array([0.0, w01 - omega1, w01 + w12 - omega1 - omega2])

    def hamiltonian(t):
        amp = float(envelope(t))
        h = np.diag(diag).astype(complex)
        h[0, 1] = h[1, 0] = amp * delta1
        h[1, 2] = h[2, 1] = amp * delta2
        return h

    return hamiltonian


def integrate_propagator(hamiltonian, duration: float, steps: int = 2000) -> np.ndarray:
    """Time-ordered propagator of i dU/dt = H(t) U by fixed-step RK4."""
    dt = duration / steps
    u = np.eye(3, dtype=complex)

    def rhs(t, u):
        return -1j * hamiltonian(t) @ u

    for k in range(steps):
        t = k * dt
        k1 = rhs(t, u)
        k2 = rhs(t + dt / 2, u + dt / 2 * k1)
        k3 = rhs(t + dt / 2, u + dt / 2 * k2)
        k4 = rhs(t + dt, u + dt * k3)
        u = u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return u
