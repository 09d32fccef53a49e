"""Exact two-level spin algebra.

States and density matrices live in the sigma_z eigenbasis {up, down}.
Measurement axes are restricted to the x-z plane: the observable at angle
theta from +z is

    sigma_theta = cos(theta) sigma_z + sin(theta) sigma_x

whose +1 eigenstate is (cos(theta/2), sin(theta/2)).  Pure states are kept
in a canonical global phase (up amplitude real and non-negative whenever it
is nonzero) so that equality checks in tests are well defined.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, Tuple, Union

import numpy as np

ATOL = 1e-12
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class MeasurementAxis:
    """Direction in the x-z plane, measured in radians from +z."""

    angle: float

    def __post_init__(self):
        if not math.isfinite(self.angle):
            raise ValueError("axis angle must be finite")
        object.__setattr__(self, "angle", self.angle % TWO_PI)


def _angle(axis: Union[MeasurementAxis, float]) -> float:
    if isinstance(axis, MeasurementAxis):
        return axis.angle
    return MeasurementAxis(float(axis)).angle


@dataclass(frozen=True)
class SpinState:
    """Normalized two-level pure state; build via :func:`make_spin_state`."""

    amp_up: complex
    amp_down: complex

    def __post_init__(self):
        norm = abs(self.amp_up) ** 2 + abs(self.amp_down) ** 2
        if abs(norm - 1.0) > ATOL:
            raise ValueError(f"state not normalized: |psi|^2 = {norm}")

    def vector(self) -> np.ndarray:
        return np.array([self.amp_up, self.amp_down], dtype=complex)

    def density(self) -> "SpinDensityMatrix":
        v = self.vector()
        return SpinDensityMatrix(np.outer(v, v.conj()))


def make_spin_state(amp_up: complex, amp_down: complex) -> SpinState:
    """Normalize (amp_up, amp_down) and fix the canonical global phase.

    Raises ValueError for a near-zero input vector.
    """
    a, b = complex(amp_up), complex(amp_down)
    norm_sq = abs(a) ** 2 + abs(b) ** 2
    if norm_sq <= 1e-30:
        raise ValueError("cannot normalize a near-zero spin vector")
    scale = 1.0 / math.sqrt(norm_sq)
    a, b = a * scale, b * scale
    if abs(a) > 1e-12:
        rotation = cmath.exp(-1j * cmath.phase(a))
        a, b = complex(abs(a), 0.0), b * rotation
    return SpinState(a, b)


@dataclass(frozen=True)
class SpinDensityMatrix:
    """2x2 Hermitian, unit-trace, positive semi-definite matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("density matrix must be 2x2")
        if np.max(np.abs(m - m.conj().T)) > ATOL:
            raise ValueError("density matrix not Hermitian")
        if abs(np.trace(m).real - 1.0) > ATOL or abs(np.trace(m).imag) > ATOL:
            raise ValueError("density matrix trace != 1")
        if np.min(np.linalg.eigvalsh(0.5 * (m + m.conj().T))) < -ATOL:
            raise ValueError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "matrix", m)

    @property
    def up_up(self) -> complex:
        return self.matrix[0, 0]

    @property
    def up_down(self) -> complex:
        return self.matrix[0, 1]

    @property
    def down_down(self) -> complex:
        return self.matrix[1, 1]


def sigma_eigenstate(axis: Union[MeasurementAxis, float], outcome: int) -> SpinState:
    """Eigenstate of sigma_theta with eigenvalue +1 or -1."""
    if outcome not in (+1, -1):
        raise ValueError("outcome must be +1 or -1")
    half = 0.5 * _angle(axis)
    if outcome == +1:
        return make_spin_state(math.cos(half), math.sin(half))
    return make_spin_state(-math.sin(half), math.cos(half))


def born_probability(
    state: Union[SpinState, SpinDensityMatrix],
    axis: Union[MeasurementAxis, float],
    outcome: int,
) -> float:
    """Probability of `outcome` when measuring sigma_theta on `state`."""
    eig = sigma_eigenstate(axis, outcome).vector()
    if isinstance(state, SpinState):
        p = abs(np.vdot(eig, state.vector())) ** 2
    elif isinstance(state, SpinDensityMatrix):
        p = np.real(eig.conj() @ state.matrix @ eig)
    else:
        raise TypeError(f"unsupported state type: {type(state).__name__}")
    if p < -ATOL or p > 1.0 + ATOL:
        raise AssertionError(f"Born probability out of range: {p}")
    return min(max(float(p), 0.0), 1.0)


def mixture(components: Iterable[Tuple[float, SpinState]]) -> SpinDensityMatrix:
    """Convex combination sum_i w_i |psi_i><psi_i|."""
    components = list(components)
    weights = [w for w, _ in components]
    if any(w < -ATOL for w in weights):
        raise ValueError("mixture weights must be non-negative")
    if abs(sum(weights) - 1.0) > ATOL:
        raise ValueError(f"mixture weights sum to {sum(weights)}, expected 1")
    rho = np.zeros((2, 2), dtype=complex)
    for w, psi in components:
        v = psi.vector()
        rho += w * np.outer(v, v.conj())
    return SpinDensityMatrix(rho)


def singlet_conditional(
    alice_axis: Union[MeasurementAxis, float], alice_outcome: int
) -> Tuple[float, SpinState]:
    """Condition the two-particle singlet on Alice's sigma_omega outcome.

    Either outcome occurs with probability 1/2 and leaves the partner in
    the opposite sigma_omega eigenstate (perfect anti-correlation).
    """
    if alice_outcome not in (+1, -1):
        raise ValueError("outcome must be +1 or -1")
    return 0.5, sigma_eigenstate(alice_axis, -alice_outcome)
