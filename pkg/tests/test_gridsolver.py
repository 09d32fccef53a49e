import math

import numpy as np
import pytest

from nosignal import (
    BoundaryLeakError,
    GridSpec,
    SGConfig,
    component_amplitude,
    error_fraction,
    evolve_through_magnet,
    export_snapshot_csv,
    free_propagate,
    grid_density,
    grid_error_fraction,
    grid_evolve,
    grid_half_plane_coherence,
    grid_mean_momentum,
    grid_norm,
    half_plane_coherence,
    make_spin_state,
)

SMALL_GRID = GridSpec(extent=384.0, points=4096, dt=2e-4)


class TestValidation:
    def test_points_must_be_power_of_two(self):
        with pytest.raises(ValueError):
            GridSpec(extent=100.0, points=1000, dt=1e-3)

    def test_needs_time_or_snapshots(self, device, x_state):
        with pytest.raises(ValueError):
            grid_evolve(device, x_state, SMALL_GRID)

    def test_boundary_leak_detected(self, device, x_state):
        tiny = GridSpec(extent=16.0, points=256, dt=1e-3)
        with pytest.raises(BoundaryLeakError):
            grid_evolve(device, x_state, tiny, t_final=40.0)


class TestFreeParticle:
    def test_matches_analytic_gaussian(self, x_state):
        cfg = SGConfig(mass=1, sigma0=1, moment=1, gradient=0, bias=0, transit=0.0)
        t = 9.0
        result = grid_evolve(cfg, x_state, SMALL_GRID, t_final=t)
        pair = free_propagate(evolve_through_magnet(cfg, x_state), t)
        analytic = (
            np.abs(component_amplitude(pair, result.z, "plus", True)) ** 2
            + np.abs(component_amplitude(pair, result.z, "minus", True)) ** 2
        )
        l1 = float(np.sum(np.abs(grid_density(result) - analytic)) * result.dx)
        assert l1 < 1e-6

    def test_norm_is_conserved(self, device, x_state):
        result = grid_evolve(device, x_state, SMALL_GRID, snapshots=[0.0, 5.0, 20.0])
        for idx in range(3):
            assert abs(grid_norm(result, idx) - 1.0) < 1e-10

    def test_norm_survives_many_magnet_steps(self, x_state):
        # 10^4 split-operator steps inside the magnet
        cfg = SGConfig(mass=1, sigma0=1, moment=1, gradient=1.0, bias=0.5, transit=1.0)
        grid = GridSpec(extent=128.0, points=1024, dt=1e-4)
        result = grid_evolve(cfg, x_state, grid, t_final=0.0)
        assert abs(grid_norm(result) - 1.0) < 1e-10


class TestChannels:
    def test_up_eigenstate_leaves_down_channel_empty(self, device, up_state):
        result = grid_evolve(device, up_state, SMALL_GRID, t_final=10.0)
        assert float(np.max(np.abs(result.psi_minus[0]))) == 0.0

    def test_impulsive_momentum_kicks(self, device, x_state):
        result = grid_evolve(device, x_state, SMALL_GRID, t_final=0.0)
        kick = device.momentum_kick
        assert abs(grid_mean_momentum(result, 0, "plus") - kick) / kick < 0.01
        assert abs(grid_mean_momentum(result, 0, "minus") + kick) / kick < 0.01


class TestAgainstAnalyticModel:
    @pytest.mark.parametrize("t", [2.0, 15.0, 40.0])
    def test_error_fraction_agreement(self, device, x_state, t):
        result = grid_evolve(device, x_state, SMALL_GRID, t_final=t)
        pair = free_propagate(evolve_through_magnet(device, x_state), t)
        assert abs(grid_error_fraction(result) - error_fraction(pair)) < 1e-3

    @pytest.mark.parametrize("t", [2.0, 15.0, 40.0])
    def test_position_density_agreement(self, device, x_state, t):
        result = grid_evolve(device, x_state, SMALL_GRID, t_final=t)
        pair = free_propagate(evolve_through_magnet(device, x_state), t)
        analytic = (
            np.abs(component_amplitude(pair, result.z, "plus", True)) ** 2
            + np.abs(component_amplitude(pair, result.z, "minus", True)) ** 2
        )
        l1 = float(np.sum(np.abs(grid_density(result) - analytic)) * result.dx)
        assert l1 < 1e-3

    @pytest.mark.parametrize("t", [2.0, 15.0, 40.0])
    def test_coherence_agreement(self, device, x_state, t):
        result = grid_evolve(device, x_state, SMALL_GRID, t_final=t)
        pair = free_propagate(evolve_through_magnet(device, x_state), t)
        analytic = half_plane_coherence(pair, "upper")
        grid = grid_half_plane_coherence(result)
        assert abs(abs(grid) - abs(analytic)) < 1e-3
        assert abs(np.angle(grid) - np.angle(analytic)) < 1e-2

    def test_complex_weight_input(self, device):
        # relative phase of the input spin must survive the weight division
        state = make_spin_state(1.0, 1.0j)
        result = grid_evolve(device, state, SMALL_GRID, t_final=10.0)
        pair = free_propagate(evolve_through_magnet(device, state), 10.0)
        analytic = half_plane_coherence(pair, "upper")
        grid = grid_half_plane_coherence(result)
        assert abs(grid - analytic) < 1e-3


class TestExport:
    def test_snapshot_csv(self, device, x_state, tmp_path):
        result = grid_evolve(device, x_state, GridSpec(64.0, 256, 1e-3), t_final=0.5)
        path = tmp_path / "snapshot.csv"
        export_snapshot_csv(result, 0, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "z,re_psi_plus,im_psi_plus,re_psi_minus,im_psi_minus"
        assert len(lines) == 257
        row = [float(x) for x in lines[129].split(",")]  # grid index 128 = z = 0
        assert row[0] == 0.0
        assert math.isfinite(row[1]) and math.isfinite(row[3])
