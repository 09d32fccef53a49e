import math

import numpy as np
import pytest

from nosignal import (
    PhaseUndefinedError,
    PostSelectionError,
    SGConfig,
    asymptotic_error_fraction,
    born_probability,
    constraint_residual,
    error_fraction,
    evolve_through_magnet,
    extract_phase,
    free_propagate,
    make_component,
    make_pair,
    make_spin_state,
    postselected_pure_state,
    project_upper,
    sigma_eigenstate,
)
from conftest import device_for_error_fraction, wrap_to_pi


def settled_pair(config, state, t=400.0):
    return free_propagate(evolve_through_magnet(config, state), t)


class TestPureStateForm:
    def test_zero_error_fraction_is_up(self):
        st = postselected_pure_state(0.0, 1.234)
        assert st.amp_up == 1.0 and st.amp_down == 0.0

    def test_half_with_zero_phase_is_plus_x(self):
        st = postselected_pure_state(0.5, 0.0)
        assert abs(st.amp_up - 1 / math.sqrt(2)) < 1e-12
        assert abs(st.amp_down - 1 / math.sqrt(2)) < 1e-12

    def test_quadrature_phase_hides_coherence_from_x(self):
        # p(+1 along x) = 1/2 + sqrt(E(1-E)) cos(phi) -> 1/2 at phi = pi/2
        st = postselected_pure_state(0.1, math.pi / 2)
        assert abs(born_probability(st, math.pi / 2, +1) - 0.5) < 1e-12

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            postselected_pure_state(-0.1, 0.0)
        with pytest.raises(ValueError):
            postselected_pure_state(1.1, 0.0)


class TestExtractPhase:
    def test_round_trip(self):
        rho = postselected_pure_state(0.2, 1.3).density()
        assert abs(extract_phase(rho) - 1.3) < 1e-12

    def test_diagonal_matrix_has_no_phase(self):
        rho = postselected_pure_state(0.0, 0.0).density()
        with pytest.raises(PhaseUndefinedError):
            extract_phase(rho)

    def test_result_in_principal_range(self):
        rho = postselected_pure_state(0.3, -0.7).density()
        phase = extract_phase(rho)
        assert 0.0 <= phase < 2 * math.pi
        assert abs(phase - (2 * math.pi - 0.7)) < 1e-12


class TestConstraintResidual:
    def test_both_right_angles(self):
        assert constraint_residual(math.pi / 2, math.pi / 2) == pytest.approx(0.0, abs=1e-15)

    def test_supplementary_phases_cancel(self):
        assert constraint_residual(math.pi / 3, 2 * math.pi / 3) == pytest.approx(
            0.0, abs=1e-15
        )

    def test_generic_value(self):
        # direct evaluation: cos 0.3 + cos 0.5 = 1.8329190510159788
        assert constraint_residual(0.3, 0.5) == math.cos(0.3) + math.cos(0.5)
        assert constraint_residual(0.3, 0.5) == pytest.approx(1.83292, abs=1e-5)


class TestProjectUpper:
    def test_up_input_case(self, device, up_state):
        # survival probability 1 - E_s, pure up state afterwards
        post = project_upper(settled_pair(device, up_state), warn_presaturation=False)
        es = asymptotic_error_fraction(device)
        assert abs(post.select_prob - (1 - es)) < 1e-4
        assert np.allclose(post.rho.matrix, [[1, 0], [0, 0]], atol=1e-12)
        assert post.phase is None
        assert post.error_fraction == 0.0

    def test_x_input_ideal_limit(self, x_state):
        ideal = SGConfig(mass=1, sigma0=1, moment=1, gradient=2500, bias=0, transit=0.002)
        post = project_upper(settled_pair(ideal, x_state), warn_presaturation=False)
        assert abs(post.select_prob - 0.5) < 1e-6
        assert np.allclose(post.rho.matrix, [[1, 0], [0, 0]], atol=1e-6)

    def test_x_input_generic(self, device, x_state):
        pair = settled_pair(device, x_state)
        post = project_upper(pair, warn_presaturation=False)
        assert abs(post.select_prob - 0.5) < 1e-9
        assert abs(post.error_fraction - error_fraction(pair)) < 1e-12
        assert post.visibility is not None and post.visibility <= 1.0 + 1e-9

    def test_consistency_with_z_measurement(self, device, x_state):
        post = project_upper(settled_pair(device, x_state), warn_presaturation=False)
        p_up = born_probability(post.rho, 0.0, +1)
        assert abs(p_up - post.rho.up_up.real) < 1e-12
        assert abs(post.error_fraction - (1 - p_up)) < 1e-12

    def test_nothing_selected_raises(self):
        plus = make_component(-1e8, 0.0, 1 / math.sqrt(2), 1.0)
        minus = make_component(-1e8, 0.0, 1 / math.sqrt(2), 1.0)
        pair = make_pair(plus, minus, mass=1.0, sigma0=1.0)
        with pytest.raises(PostSelectionError):
            project_upper(pair, warn_presaturation=False)

    def test_warns_before_saturation(self, device, x_state):
        pair = free_propagate(evolve_through_magnet(device, x_state), 0.5)
        with pytest.warns(UserWarning, match="saturated"):
            project_upper(pair)

    def test_no_warning_after_saturation(self, device, x_state):
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("error")
            project_upper(settled_pair(device, x_state, t=2000.0))

    def test_narrow_window_restores_purity(self, device, x_state):
        # over a region much smaller than every variation scale the two
        # channels are proportional, so the projected state is pure
        pair = settled_pair(device, x_state, t=20.0)
        post = project_upper(pair, z_max=3e-5, warn_presaturation=False)
        assert post.visibility == pytest.approx(1.0, abs=1e-9)
        chi = postselected_pure_state(post.error_fraction, post.phase)
        assert np.allclose(post.rho.matrix, chi.density().matrix, atol=1e-9)


class TestPhaseFlipBetweenOppositeInputs:
    def test_x_inputs_differ_by_pi(self, device):
        plus_x = make_spin_state(1.0, 1.0)
        minus_x = make_spin_state(1.0, -1.0)
        post_a = project_upper(settled_pair(device, plus_x), warn_presaturation=False)
        post_b = project_upper(settled_pair(device, minus_x), warn_presaturation=False)
        delta = wrap_to_pi(post_a.phase - post_b.phase + math.pi)
        assert abs(delta) < 1e-9

    @pytest.mark.parametrize("target", [0.05, 0.2, 0.4])
    @pytest.mark.parametrize("omega", [math.pi / 6, math.pi / 2, 2.2])
    def test_opposite_polarizations_differ_by_pi(self, target, omega):
        config = device_for_error_fraction(target)
        post = {}
        for outcome in (+1, -1):
            beam = sigma_eigenstate(omega, outcome)
            post[outcome] = project_upper(
                settled_pair(config, beam), warn_presaturation=False
            )
        delta = wrap_to_pi(post[+1].phase - post[-1].phase + math.pi)
        assert abs(delta) < 1e-9
        # and the cosine-sum form of the constraint holds
        assert abs(constraint_residual(post[+1].phase, post[-1].phase)) < 1e-9
