"""Dense state-vector algebra for a single d-level system.

States and unitaries are thin immutable wrappers around numpy arrays that
check their invariants on construction. Everything downstream of them (the
phase-estimation loop, the pulse module) only needs the operations defined
here.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

#: Absolute tolerance used for algebraic identities (norms, unitarity).
ATOL = 1e-12


class InvalidDimensionError(ValueError):
    pass


class InvalidDigitError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


def _check_dim(d: int) -> int:
    if int(d) != d or d < 2:
        raise InvalidDimensionError(f"dimension must be an integer >= 2, got {d!r}")
    return int(d)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class QuditState:
    """Normalized pure state of a d-level system."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes)
        if amps.ndim != 1 or amps.size < 2:
            raise InvalidDimensionError("amplitudes must be a vector of length >= 2")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > ATOL:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @classmethod
    def from_unnormalized(cls, amplitudes) -> "QuditState":
        amps = np.asarray(amplitudes, dtype=complex)
        return cls(amps / np.linalg.norm(amps))

    @classmethod
    def basis(cls, d: int, j: int) -> "QuditState":
        d = _check_dim(d)
        if not 0 <= j < d:
            raise InvalidDigitError(f"basis index {j} outside 0..{d - 1}")
        amps = np.zeros(d, dtype=complex)
        amps[j] = 1.0
        return cls(amps)

    def canonical(self) -> np.ndarray:
        """Amplitudes with the global phase fixed so the first nonzero
        amplitude is real and positive."""
        amps = self.amplitudes
        nz = np.flatnonzero(np.abs(amps) > ATOL)
        phase = amps[nz[0]] / abs(amps[nz[0]])
        return amps / phase

    def equals_up_to_phase(self, other: "QuditState", atol: float = 1e-10) -> bool:
        if self.dim != other.dim:
            return False
        return bool(np.allclose(self.canonical(), other.canonical(), rtol=0, atol=atol))


@dataclass(frozen=True, eq=False)
class UnitaryMatrix:
    """d x d unitary matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = _frozen(self.matrix)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] < 2:
            raise InvalidDimensionError(f"expected a square matrix, got shape {mat.shape}")
        dev = unitarity_error(mat)
        if dev > ATOL:
            raise ValueError(f"matrix is not unitary (max |U^dag U - I| = {dev:.3e})")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def dagger(self) -> "UnitaryMatrix":
        return UnitaryMatrix(self.matrix.conj().T)

    def __matmul__(self, other):
        if isinstance(other, UnitaryMatrix):
            if other.dim != self.dim:
                raise DimensionMismatchError(f"{self.dim} vs {other.dim}")
            return UnitaryMatrix(self.matrix @ other.matrix)
        if isinstance(other, QuditState):
            return apply(self, other)
        return NotImplemented


@dataclass(frozen=True)
class DigitString:
    """Base-d digits, most significant first.

    ``digits[k]`` multiplies ``base**-k``; the estimation loop measures the
    last entry first.
    """

    base: int
    digits: tuple

    def __post_init__(self):
        base = _check_dim(self.base)
        digits = tuple(int(x) for x in self.digits)
        for x in digits:
            if not 0 <= x < base:
                raise InvalidDigitError(f"digit {x} out of range for base {base}")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "digits", digits)

    def __len__(self):
        return len(self.digits)

    def __iter__(self):
        return iter(self.digits)

    def __getitem__(self, k):
        return self.digits[k]

    def fraction(self) -> float:
        """sum_k x_k / d^k, a number in [0, d)."""
        return sum(x / self.base**k for k, x in enumerate(self.digits))

    def reference_phase(self) -> float:
        """Phase (2 pi / d) * sum_k x_k / d^k attached to this string, in [0, 2 pi)."""
        return 2 * np.pi / self.base * self.fraction()

    def as_integer(self) -> int:
        """Integer whose base-d representation is this string."""
        value = 0
        for x in self.digits:
            value = value * self.base + x
        return value

    @classmethod
    def from_integer(cls, value: int, base: int, length: int) -> "DigitString":
        if not 0 <= value < base**length:
            raise InvalidDigitError(f"{value} does not fit into {length} base-{base} digits")
        digits = []
        for _ in range(length):
            value, x = divmod(value, base)
            digits.append(x)
        return cls(base, tuple(reversed(digits)))


def unitarity_error(mat: np.ndarray) -> float:
    mat = np.asarray(mat)
    return float(np.abs(mat.conj().T @ mat - np.eye(mat.shape[0])).max())


def balanced_state(d: int) -> QuditState:
    d = _check_dim(d)
    return QuditState(np.full(d, 1 / np.sqrt(d), dtype=complex))


def counting_state(d: int, j: int) -> QuditState:
    """Column j of the forward Fourier matrix; mapped to |j> by the inverse."""
    d = _check_dim(d)
    n = np.arange(d)
    return QuditState(np.exp(2j * np.pi * j * n / d) / np.sqrt(d))


def fourier_matrix(d: int) -> UnitaryMatrix:
    d = _check_dim(d)
    k, n = np.indices((d, d))
    return UnitaryMatrix(np.exp(2j * np.pi * n * k / d) / np.sqrt(d))


def inverse_fourier_matrix(d: int) -> UnitaryMatrix:
    """Entry (k, n) = exp(-2 pi i n k / d) / sqrt(d)."""
    d = _check_dim(d)
    k, n = np.indices((d, d))
    return UnitaryMatrix(np.exp(-2j * np.pi * n * k / d) / np.sqrt(d))


def phase_evolution(d: int, phi: float) -> UnitaryMatrix:
    """diag(exp(i j phi)), j = 0..d-1 (global phase dropped)."""
    d = _check_dim(d)
    if not np.isfinite(phi):
        raise ValueError(f"phase must be finite, got {phi!r}")
    return UnitaryMatrix(np.diag(np.exp(1j * np.arange(d) * phi)))


def compensation_phase(d: int, known_digits: Sequence[int]) -> float:
    """theta = (2 pi / d) * sum_m s_m / d^m, where ``known_digits[m-1]`` is the
    digit m positions below the one currently being measured."""
    d = _check_dim(d)
    theta = 0.0
    for m, s in enumerate(known_digits, start=1):
        if not 0 <= s < d:
            raise InvalidDigitError(f"digit {s} out of range for base {d}")
        theta += s / d**m
    return 2 * np.pi / d * theta


def compensation_unitary(d: int, known_digits: Sequence[int]) -> UnitaryMatrix:
    """diag(1, e^{-i theta}, ..., e^{-i (d-1) theta}) cancelling the phase
    contributed by already-measured lower-significance digits."""
    theta = compensation_phase(d, known_digits)
    return UnitaryMatrix(np.diag(np.exp(-1j * np.arange(d) * theta)))


def apply(U, s: QuditState) -> QuditState:
    mat = U.matrix if isinstance(U, UnitaryMatrix) else np.asarray(U, dtype=complex)
    if mat.shape != (s.dim, s.dim):
        raise DimensionMismatchError(f"operator shape {mat.shape} vs state dim {s.dim}")
    out = mat @ s.amplitudes
    # renormalize away accumulated rounding; the operator is unitary
    return QuditState(out / np.linalg.norm(out))


def born_probabilities(s: QuditState) -> np.ndarray:
    p = np.abs(s.amplitudes) ** 2
    return p / p.sum()


def sample_outcome(s: QuditState, rng: np.random.Generator) -> int:
    """Draw a computational-basis outcome; only ``rng`` is mutated."""
    return int(rng.choice(s.dim, p=born_probabilities(s)))
