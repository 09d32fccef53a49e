"""Upper-half-plane post-selection of the two-channel packet.

Keeping only particles found at z >= 0 (the lower half being absorbed or
detected) decoheres the spatial-spin entanglement.  Tracing out position
over the retained region leaves a 2x2 spin density matrix

    rho  propto  [ |w_up|^2 I_up              w_up w_down^* C      ]
                 [ (w_up w_down^* C)^*        |w_down|^2 I_down    ]

where I_up/I_down are the upper-half weights of the normalized channels
and C is their upper-half coherence integral.  Its diagonal gives the
effective error fraction, the off-diagonal argument defines the relative
phase; the visibility |rho_ud| / sqrt(rho_uu rho_dd) measures how close
the projected state is to the pure superposition

    sqrt(1 - E) |up>  +  e^{i phi} sqrt(E) |down>.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import PhaseUndefinedError, PostSelectionError, QuadratureError
from .spin import SpinDensityMatrix, SpinState, make_spin_state
from .wavepacket import (
    WavePacketPair,
    error_fraction,
    free_propagate,
    half_plane_coherence,
    upper_fraction,
)

__all__ = [
    "PostSelectedSpin",
    "project_upper",
    "postselected_pure_state",
    "extract_phase",
    "constraint_residual",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PostSelectedSpin:
    """Result of the upper-half projection.

    select_prob: probability that a particle lands in the retained region.
    rho: spin density matrix of the survivors.
    error_fraction: its spin-down population rho_dd.
    phase: relative phase of the down component (see extract_phase) in
        [0, 2 pi), or None when the coherence is too small to define one
        (single-channel inputs).
    visibility: |rho_ud| / sqrt(rho_uu rho_dd) in [0, 1], or None when a
        diagonal entry vanishes.
    """

    select_prob: float
    rho: SpinDensityMatrix
    error_fraction: float
    phase: Optional[float]
    visibility: Optional[float]


def extract_phase(rho: SpinDensityMatrix, tol: Optional[float] = None) -> float:
    """Relative phase of the down component, mapped to [0, 2 pi).

    This is arg of the down-up matrix element, so that the projector onto
    sqrt(1-E)|up> + e^{i phi} sqrt(E)|down> round-trips to exactly phi.
    Raises PhaseUndefinedError when the coherence magnitude is below tol;
    the default tol scales with the geometric mean of the populations,
    floored at 1e-14.
    """
    coherence = rho.matrix[1, 0]
    if tol is None:
        tol = max(1e-10 * math.sqrt(abs(rho.up_up * rho.down_down)), 1e-14)
    if abs(coherence) < tol:
        raise PhaseUndefinedError(
            f"coherence magnitude {abs(coherence):.2e} below {tol:.2e}; "
            "phase undefined"
        )
    return cmath.phase(coherence) % TWO_PI


def constraint_residual(phi_plus: float, phi_minus: float) -> float:
    """cos(phi_plus) + cos(phi_minus).

    Vanishes exactly when phi_plus +- phi_minus = pi (mod 2 pi), covering
    both sign branches of the phase constraint.
    """
    return math.cos(phi_plus) + math.cos(phi_minus)


def postselected_pure_state(error_fraction: float, phase: float) -> SpinState:
    """The pure-state form sqrt(1-E)|up> + e^{i phi} sqrt(E)|down>."""
    if not 0.0 <= error_fraction <= 1.0:
        raise ValueError(f"error fraction must be in [0, 1], got {error_fraction}")
    return make_spin_state(
        math.sqrt(1.0 - error_fraction),
        cmath.exp(1j * phase) * math.sqrt(error_fraction),
    )


def _presaturation_drift(pair: WavePacketPair) -> float:
    probe = free_propagate(pair, pair.time + pair.mass * pair.sigma0**2 * 2.0)
    return abs(error_fraction(probe) - error_fraction(pair))


def project_upper(
    pair: WavePacketPair,
    z_max: Optional[float] = None,
    warn_presaturation: bool = True,
) -> PostSelectedSpin:
    """Project onto z in [0, z_max] (half line by default) and trace out z."""
    if warn_presaturation and _presaturation_drift(pair) > 1e-3:
        warnings.warn(
            "post-selecting before the error fraction has saturated; "
            "derived quantities are still time dependent",
            stacklevel=2,
        )
    w_up = pair.plus.weight
    w_down = pair.minus.weight
    i_up = upper_fraction(pair, "plus", z_max)
    i_down = upper_fraction(pair, "minus", z_max)
    up_mass = abs(w_up) ** 2 * i_up
    down_mass = abs(w_down) ** 2 * i_down
    select_prob = up_mass + down_mass
    if select_prob < 1e-12:
        raise PostSelectionError(
            f"selection probability {select_prob:.2e}: nothing post-selected"
        )
    if abs(w_up) > 0 and abs(w_down) > 0:
        coherence = complex(
            w_up * np.conj(w_down) * half_plane_coherence(pair, "upper", z_max)
        )
        # quadrature noise may push |C| past the Cauchy-Schwarz bound when
        # a narrow window nearly saturates it; clip inside tolerance
        bound = math.sqrt(up_mass * down_mass)
        if abs(coherence) > bound:
            if abs(coherence) > bound * (1.0 + 1e-9) + 1e-15:
                raise QuadratureError(
                    "half-plane coherence exceeds its Cauchy-Schwarz bound "
                    f"by {abs(coherence) - bound:.2e}",
                    residual=abs(coherence) - bound,
                )
            coherence *= bound / abs(coherence)
    else:
        coherence = 0.0 + 0.0j
    # component-wise real division: complex-division algorithms would turn
    # the exact down_mass / select_prob == 1.0 of one-channel inputs into
    # 1 - 1ulp and leak a spurious sqrt(ulp) coherence downstream
    coherence = complex(coherence.real / select_prob, coherence.imag / select_prob)
    rho = SpinDensityMatrix(
        np.array(
            [
                [up_mass / select_prob, coherence],
                [np.conj(coherence), down_mass / select_prob],
            ],
            dtype=complex,
        )
    )
    try:
        phase = extract_phase(rho)
    except PhaseUndefinedError:
        phase = None
    populations = abs(rho.up_up * rho.down_down)
    visibility = (
        abs(rho.up_down) / math.sqrt(populations) if populations > 1e-30 else None
    )
    return PostSelectedSpin(
        select_prob=float(select_prob),
        rho=rho,
        error_fraction=float(rho.down_down.real),
        phase=phase,
        visibility=visibility,
    )
