"""Non-ideal Stern-Gerlach post-selection simulator and no-signalling checks.

The package models spin-1/2 packets traversing a non-ideal Stern-Gerlach
device, post-selects the upper half plane, and verifies - in closed form,
against an independent grid solver, and with finite-sample statistics -
that the relative phases of the post-selected states obey the constraint
imposed by no-signalling between the wings of a singlet pair.
"""

from .errors import (
    BoundaryLeakError,
    ConfigError,
    PhaseUndefinedError,
    PostSelectionError,
    QuadratureError,
    SaturationError,
)
from .estimation import (
    MeasurementRecord,
    PhaseEstimate,
    derive_seed,
    estimate_error_fraction,
    estimate_phase,
    sample,
    violation_bound,
    wilson_interval,
)
from .gridsolver import (
    GridResult,
    GridSpec,
    export_snapshot_csv,
    grid_density,
    grid_error_fraction,
    grid_evolve,
    grid_half_plane_coherence,
    grid_mean_momentum,
    grid_norm,
)
from .postselect import (
    PostSelectedSpin,
    constraint_residual,
    extract_phase,
    postselected_pure_state,
    project_upper,
)
from .protocol import (
    ProtocolConfig,
    ProtocolResult,
    alice_branch_total,
    alice_total,
    bob_branch_totals,
    bob_total,
    closed_form_result,
    outcome_probability,
    run_pipeline,
    signalling_residual,
)
from .spin import (
    MeasurementAxis,
    SpinDensityMatrix,
    SpinState,
    born_probability,
    make_spin_state,
    mixture,
    sigma_eigenstate,
    singlet_conditional,
)
from .wavepacket import (
    GaussianComponent,
    SGConfig,
    WavePacketPair,
    asymptotic_error_fraction,
    closed_form_upper_coherence,
    component_amplitude,
    error_fraction,
    evolve_through_magnet,
    free_propagate,
    full_overlap,
    half_plane_coherence,
    make_component,
    make_pair,
    phase_settle_time,
    saturated_error_fraction,
    upper_fraction,
)

__version__ = "0.1.0"
