"""Outcome probabilities for the two-wing post-selection protocol.

One wing (Alice) measures spin along omega or along z on her half of a
singlet pair; the other wing (Bob) sends the partner through the
non-ideal device, keeps the upper half, and measures sigma_theta.  The
observable quantity is the total probability that a pair ends with Bob
recording +1.  No-signalling demands this be independent of Alice's
setting choice, which pins the post-selected relative phases to
cos(phi_plus) + cos(phi_minus) = 0.

Closed forms (E the saturated error fraction, s = sqrt(E(1-E))):

    single branch, +1 given survival:
        p(E, theta, phi) = 1/2 [1 + (1-2E) cos(theta) + 2 s sin(theta) cos(phi)]
    Alice-branch total (branch prob 1/2, survival prob 1/2):
        P_branch = 1/8 [1 + (1-2E) cos(theta) + 2 w s sin(theta) cos(phi)]
    rotated-setting total:
        P_A = 1/4 [1 + (1-2E) cos(theta)
                   + s sin(omega) sin(theta) (cos phi_+ + cos phi_-)]
    aligned-setting total:
        P_B = 1/4 [1 + (1-2E) cos(theta)]

The residual P_A - P_B is the signalling figure of merit; run_pipeline
reproduces it end to end from the wave-packet dynamics instead of the
closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

from .errors import PostSelectionError
from .postselect import PostSelectedSpin, postselected_pure_state, project_upper
from .spin import (
    MeasurementAxis,
    born_probability,
    make_spin_state,
    singlet_conditional,
)
from .wavepacket import (
    SGConfig,
    error_fraction,
    evolve_through_magnet,
    free_propagate,
    phase_settle_time,
    saturated_error_fraction,
)

__all__ = [
    "ProtocolConfig",
    "ProtocolResult",
    "outcome_probability",
    "alice_branch_total",
    "alice_total",
    "bob_branch_totals",
    "bob_total",
    "signalling_residual",
    "closed_form_result",
    "run_pipeline",
]

MODELS = ("pure", "projected")
_PTOL = 1e-12


def _angle(axis: Union[MeasurementAxis, float]) -> float:
    return axis.angle if isinstance(axis, MeasurementAxis) else float(axis)


def _check_fraction(value: float) -> float:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"error fraction must be in [0, 1], got {value}")
    return value


def _assert_probability(p: float, upper: float = 1.0) -> float:
    # out-of-range values are bug signals, not data to clamp
    assert -_PTOL <= p <= upper + _PTOL, f"probability {p} outside [0, {upper}]"
    return p


def _base(es: float, theta: float) -> float:
    return 1.0 + (1.0 - 2.0 * es) * math.cos(theta)


@dataclass(frozen=True)
class ProtocolConfig:
    """Angles, error fraction and relative phases entering the closed forms."""

    omega: float
    theta: float
    Es: float
    phi_plus: float
    phi_minus: float

    def __post_init__(self):
        _check_fraction(self.Es)


@dataclass(frozen=True)
class ProtocolResult:
    """All protocol probabilities for one setting pair, JSON-serializable."""

    omega: float
    theta: float
    Es: float
    phi_plus: Optional[float]
    phi_minus: Optional[float]
    pA_plus: float
    pA_minus: float
    PA_total: float
    PB_plus: float
    PB_minus: float
    PB_total: float
    residual: float
    model: str

    def to_json_dict(self) -> dict:
        return {
            "omega": self.omega,
            "theta": self.theta,
            "Es": self.Es,
            "phi_plus": self.phi_plus,
            "phi_minus": self.phi_minus,
            "pA_plus": self.pA_plus,
            "pA_minus": self.pA_minus,
            "PA_total": self.PA_total,
            "PB_plus": self.PB_plus,
            "PB_minus": self.PB_minus,
            "PB_total": self.PB_total,
            "residual": self.residual,
            "model": self.model,
        }


def outcome_probability(es: float, theta: float, phi: float) -> float:
    """+1 probability for sigma_theta on one post-selected pure branch."""
    _check_fraction(es)
    coherence = 2.0 * math.sqrt(es * (1.0 - es)) * math.sin(theta) * math.cos(phi)
    return _assert_probability(0.5 * (_base(es, theta) + coherence))


def alice_branch_total(
    es: float, theta: float, phi: float, coherence_weight: float = 1.0
) -> float:
    """One Alice branch's contribution to Bob's +1 total.

    The branch occurs with probability 1/2 and survives post-selection
    with probability 1/2; coherence_weight = sin(omega) carries the
    rotated-setting generalization (1 for the x setting).
    """
    _check_fraction(es)
    coherence = (
        2.0
        * coherence_weight
        * math.sqrt(es * (1.0 - es))
        * math.sin(theta)
        * math.cos(phi)
    )
    return _assert_probability(0.125 * (_base(es, theta) + coherence), upper=0.25)


def alice_total(config: ProtocolConfig) -> float:
    """Bob's +1 total when Alice measures along omega."""
    cos_sum = math.cos(config.phi_plus) + math.cos(config.phi_minus)
    coherence = (
        math.sqrt(config.Es * (1.0 - config.Es))
        * math.sin(config.omega)
        * math.sin(config.theta)
        * cos_sum
    )
    return _assert_probability(
        0.25 * (_base(config.Es, config.theta) + coherence), upper=0.5
    )


def bob_branch_totals(es: float, theta: float) -> Tuple[float, float]:
    """Per-branch totals for the aligned (z) setting: (up branch, down branch)."""
    _check_fraction(es)
    plus = 0.25 * (1.0 + math.cos(theta)) * (1.0 - es)
    minus = 0.25 * (1.0 - math.cos(theta)) * es
    return _assert_probability(plus, 0.5), _assert_probability(minus, 0.5)


def bob_total(es: float, theta: float) -> float:
    """Bob's +1 total when Alice measures along z; phase independent."""
    _check_fraction(es)
    return _assert_probability(0.25 * _base(es, theta), upper=0.5)


def signalling_residual(config: ProtocolConfig) -> float:
    """alice_total - bob_total; zero is the no-signalling condition.

    Both totals share the same base term (bitwise), so the residual is
    exactly the coherence term and vanishes identically for Es in {0, 1},
    theta = 0, omega in {0, pi}, or cos phi_+ + cos phi_- = 0.
    """
    return alice_total(config) - bob_total(config.Es, config.theta)


def closed_form_result(
    es: float,
    omega: float,
    theta: float,
    phi_plus: Optional[float],
    phi_minus: Optional[float],
    model: str,
) -> ProtocolResult:
    """Assemble a ProtocolResult from the closed forms.

    Phases may be None on degenerate branches (no coherence); the
    coherence terms are then identically zero.
    """
    pb_plus, pb_minus = bob_branch_totals(es, theta)
    weight = math.sin(omega)
    if phi_plus is None or phi_minus is None:
        pa_plus = alice_branch_total(es, theta, 0.0, coherence_weight=0.0)
        pa_minus = pa_plus
    else:
        pa_plus = alice_branch_total(es, theta, phi_plus, coherence_weight=weight)
        pa_minus = alice_branch_total(es, theta, phi_minus, coherence_weight=weight)
    pa_total = pa_plus + pa_minus
    pb_total = pb_plus + pb_minus
    return ProtocolResult(
        omega=omega,
        theta=theta,
        Es=es,
        phi_plus=phi_plus,
        phi_minus=phi_minus,
        pA_plus=pa_plus,
        pA_minus=pa_minus,
        PA_total=pa_total,
        PB_plus=pb_plus,
        PB_minus=pb_minus,
        PB_total=pb_total,
        residual=pa_total - pb_total,
        model=model,
    )


def _pipeline_branch(
    sg: SGConfig, alice_axis: float, alice_outcome: int, t_run: float
) -> Tuple[float, Optional[PostSelectedSpin]]:
    """Condition the singlet, traverse the device, post-select.

    A branch whose packet never reaches the retained half (exactly ideal
    device, wrong-polarized input) selects nothing and contributes zero
    counts; it is returned as None rather than propagating the error.
    """
    branch_prob, bob_state = singlet_conditional(alice_axis, alice_outcome)
    pair = free_propagate(evolve_through_magnet(sg, bob_state), t_run)
    try:
        return branch_prob, project_upper(pair, warn_presaturation=False)
    except PostSelectionError:
        return branch_prob, None


def _branch_outcome(post: Optional[PostSelectedSpin], theta: float, model: str) -> float:
    if post is None:
        return 0.0
    if model == "projected":
        return born_probability(post.rho, theta, +1)
    state = postselected_pure_state(post.error_fraction, post.phase or 0.0)
    return born_probability(state, theta, +1)


def run_pipeline(
    sg: SGConfig,
    omega: Union[MeasurementAxis, float],
    theta: Union[MeasurementAxis, float],
    model: str = "projected",
    phase_settle_tol: float = 1e-10,
) -> ProtocolResult:
    """Full simulation of both Alice settings through the wave-packet model.

    For each Alice outcome the partner state is conditioned, evolved
    through the magnet, flown past saturation (and far enough that the
    chirp-induced coherence phase is below phase_settle_tol), projected
    onto the upper half, and measured along theta.  The residual compares
    the rotated setting against the aligned one; under unitary dynamics
    plus Born statistics it vanishes to rounding for every configuration.
    """
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}")
    omega_v, theta_v = _angle(omega), _angle(theta)
    x_beam = make_spin_state(1.0, 1.0)
    sat = saturated_error_fraction(sg, x_beam)
    t_run = max(sat.time, phase_settle_time(sg, phase_settle_tol))

    def branch_total(prob: float, post: Optional[PostSelectedSpin]) -> float:
        if post is None:
            return 0.0
        return prob * post.select_prob * _branch_outcome(post, theta_v, model)

    # Branch labels follow Bob's conditioned polarization: his state is the
    # -a eigenstate when Alice sees a, so a = -1 feeds the "+" branch.
    branches = {}
    for alice_outcome in (+1, -1):
        prob, post = _pipeline_branch(sg, omega_v, alice_outcome, t_run)
        branches[-alice_outcome] = (prob, post)
    pa = {s: branch_total(prob, post) for s, (prob, post) in branches.items()}

    aligned = {}
    for alice_outcome in (+1, -1):
        prob, post = _pipeline_branch(sg, 0.0, alice_outcome, t_run)
        # aligned-setting branches are spin eigenstates of the device axis;
        # a defined phase here would mean the projection leaked coherence
        assert post is None or post.phase is None, (
            "aligned branch unexpectedly carries coherence"
        )
        aligned[-alice_outcome] = (prob, post)
    pb = {s: branch_total(prob, post) for s, (prob, post) in aligned.items()}

    reference_pair = free_propagate(evolve_through_magnet(sg, x_beam), t_run)
    phi = {
        s: post.phase if post is not None else None
        for s, (_, post) in branches.items()
    }
    return ProtocolResult(
        omega=omega_v,
        theta=theta_v,
        Es=error_fraction(reference_pair),
        phi_plus=phi[+1],
        phi_minus=phi[-1],
        pA_plus=pa[+1],
        pA_minus=pa[-1],
        PA_total=pa[+1] + pa[-1],
        PB_plus=pb[+1],
        PB_minus=pb[-1],
        PB_total=pb[+1] + pb[-1],
        residual=(pa[+1] + pa[-1]) - (pb[+1] + pb[-1]),
        model=model,
    )
