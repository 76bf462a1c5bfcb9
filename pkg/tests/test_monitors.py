"""
Tests for the trajectory monitors: Kato identity, monotonicity, localized
convergence, virial and bound ratios.
"""

import numpy as np
import pytest

from core import closed_forms, linops, profiles
from core.profiles import SolitonParams, WeightParams
from core.spectral_ops import Grid, derivative
from services import evolution, initial_data, modulation, monitors
from services.evolution import StepperConfig
from services.monitors import MonitorSeries

INT_Q2 = 8.0 * np.pi


@pytest.fixture(scope="module")
def perturbed_run():
    """Q + 0.05 bump on the default box, modulated"""
    grid = Grid(4096, 400.0)
    u0 = profiles.soliton(SolitonParams(), grid) + 0.05 * initial_data.even_bump(grid, center=5.0)
    traj = evolution.run(u0, 1.0, StepperConfig(dt=1e-3), cadence=0.05)
    return modulation.modulate_trajectory(traj, 1.0)


@pytest.fixture(scope="module")
def co_moving_run():
    """The data of perturbed_run evolved in the frame moving at speed one"""
    grid = Grid(4096, 400.0)
    u0 = profiles.soliton(SolitonParams(), grid) + 0.05 * initial_data.even_bump(grid, center=5.0)
    traj = evolution.run(u0, 1.0, StepperConfig(dt=1e-3, frame_speed=1.0), cadence=0.05)
    return modulation.modulate_trajectory(traj, 1.0)


@pytest.fixture
def modulated_soliton(soliton_trajectory):
    return modulation.modulate_trajectory(soliton_trajectory, 1.0)


class TestWeightedMass:
    """int u^2 phi and the Kato flux"""

    def test_reflection_identity(self, grid):
        """M_A(u) + M_A(u(-x)) = pi int u^2"""
        u = profiles.soliton(SolitonParams(x0=5.0), grid)
        w = WeightParams(A=10.0)
        total = monitors.weighted_mass(u, w) + monitors.weighted_mass(u.reflect(), w)
        assert total == pytest.approx(np.pi * u.inner(u), rel=1e-12)

    def test_kato_identity_on_run(self, perturbed_run):
        residual = monitors.kato_residual(perturbed_run, WeightParams(A=20.0))
        assert residual.max_abs() <= 1e-4
        assert residual.times.size == len(perturbed_run) - 2

    def test_kato_identity_moving_weight(self, perturbed_run):
        residual = monitors.kato_residual(perturbed_run, WeightParams(A=20.0, shift=-10.0), weight_speed=0.5)
        assert residual.max_abs() <= 1e-4
        assert residual.params["weight_speed"] == 0.5

    def test_kato_needs_three_snapshots(self, soliton_trajectory):
        short = evolution.Trajectory(
            times=soliton_trajectory.times[:2],
            snapshots=soliton_trajectory.snapshots[:2],
            invariants={},
        )
        with pytest.raises(ValueError, match="three snapshots"):
            monitors.kato_residual(short, WeightParams(A=20.0))


class TestMonotonicity:
    """Pairwise weighted-mass inequalities"""

    @pytest.mark.parametrize("x0", [5.0, 10.0, 20.0])
    def test_pure_soliton_constants(self, modulated_soliton, x0):
        """Exact translates give measured constants below A int Q^2"""
        w = WeightParams(A=20.0)
        right = monitors.monotonicity_right(modulated_soliton, x0, 0.5, w)
        left = monitors.monotonicity_left(modulated_soliton, x0, 0.5, w)
        for report in (right, left):
            assert 0.0 < report.c_meas <= w.A * INT_Q2 * (1.0 + 1e-6)
            assert report.t1.size == 45

    def test_reflected_left_matches_direct(self, modulated_soliton):
        w = WeightParams(A=20.0)
        direct = monitors.monotonicity_left(modulated_soliton, 5.0, 0.5, w)
        reflected = monitors.monotonicity_left(modulated_soliton, 5.0, 0.5, w, reflected=True)
        np.testing.assert_array_equal(direct.t1, reflected.t1)
        np.testing.assert_array_equal(direct.t2, reflected.t2)
        np.testing.assert_allclose(reflected.lhs, direct.lhs, rtol=1e-9)
        np.testing.assert_allclose(reflected.rhs, direct.rhs, rtol=1e-9)

    def test_reflect_trajectory(self, soliton_trajectory):
        rho = soliton_trajectory.times
        reflected, rho_v = monitors.reflect_trajectory(soliton_trajectory, rho)
        np.testing.assert_array_equal(reflected.times, -soliton_trajectory.times[::-1])
        np.testing.assert_array_equal(rho_v, -rho[::-1])

    def test_records(self, modulated_soliton):
        report = monitors.monotonicity_right(modulated_soliton, 5.0, 0.5, WeightParams(A=20.0))
        record = report.records()[0]
        assert set(record) == {"t", "lhs", "rhs", "margin", "params"}
        assert record["params"]["x0"] == 5.0

    def test_eta_monotonicity(self, perturbed_run):
        report = monitors.eta_monotonicity(perturbed_run, 5.0, 0.5, WeightParams(A=20.0))
        assert np.all(report.remainder >= 0.0)
        assert np.all(report.remainder[report.t1 == report.t2] == 0.0)
        assert np.isfinite(report.c_meas)

    def test_argument_validation(self, modulated_soliton, soliton_trajectory):
        w = WeightParams(A=20.0)
        with pytest.raises(ValueError, match="x0 must exceed 1"):
            monitors.monotonicity_right(modulated_soliton, 1.0, 0.5, w)
        with pytest.raises(ValueError, match="lambda"):
            monitors.monotonicity_left(modulated_soliton, 5.0, 1.0, w)
        with pytest.raises(ValueError, match="modulate the trajectory first"):
            monitors.monotonicity_right(soliton_trajectory, 5.0, 0.5, w)

    def test_decroissance_constant(self):
        table = monitors.decroissance_constant([5.0, 10.0], [0.0, 4.0, 8.0], A=20.0, x_samples=4001)
        assert table.shape == (2, 3)
        assert np.all(table > 0.0)
        assert np.all(table <= 20.0 * 20.0)


class TestLocalized:
    """Convergence to the right of x = t/10"""

    def test_localized_norm(self, grid):
        ones = grid.field(np.ones(grid.n))
        expected = np.sqrt(grid.spacing * np.sum(grid.nodes > 0.0))
        assert monitors.localized_norm(ones, 0.0) == pytest.approx(expected)

    def test_distance_to_own_soliton(self, grid):
        u = profiles.soliton(SolitonParams(x0=3.0), grid)
        assert monitors.localized_distance(u, 1.0, 3.0, t=10.0) == 0.0

    def test_distance_series(self, modulated_soliton):
        series = monitors.localized_distance_series(modulated_soliton)
        assert series.max_abs() < 1e-4

    def test_decay_ratio(self):
        times = np.linspace(0.0, 10.0, 11)
        assert monitors.decay_ratio(MonitorSeries("x", times, np.exp(-times))) == pytest.approx(np.exp(-10.0))
        assert monitors.decay_ratio(MonitorSeries("x", times, np.zeros(11))) == 0.0

    def test_series_shape_mismatch(self):
        with pytest.raises(ValueError, match="times vs"):
            MonitorSeries("x", np.arange(3.0), np.arange(4.0))


def _compact_bump(x, center: float = 2.0, radius: float = 4.0):
    """exp(-1 / (1 - r^2)) on |r| < 1, r = (x - center) / radius"""
    r = (np.asarray(x, dtype=np.float64) - center) / radius
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def _orthogonal_bump(grid):
    q = profiles.soliton(SolitonParams(), grid)
    q1 = profiles.soliton_derivative(SolitonParams(), grid)
    w = initial_data.even_bump(grid, center=3.0)
    for direction in (q, q1):
        w = w - (w.inner(direction) / direction.inner(direction)) * direction
    return w


@pytest.fixture(scope="module")
def w_trajectory():
    """Closed-loop linear w-flow on the default box"""
    grid = Grid(4096, 400.0)
    return evolution.run_linearized_w(_orthogonal_bump(grid), 1.0, StepperConfig(dt=1e-3), cadence=0.05)


class TestVirial:
    """Bounded virial identity for the linear w-flow"""

    def test_terms_sum_to_the_flow_rate(self, box_grid):
        """The split terms add up to 2 int psi w w_t"""
        w = _orthogonal_bump(box_grid)
        beta = linops.beta_from_w(w)
        A = box_grid.length / 8.0
        psi = box_grid.sample_weight(lambda x: closed_forms.sawtooth(x, A))
        w_t = derivative(linops.apply_L(w)) + beta * linops.kernel_profiles(box_grid).q_prime
        direct = 2.0 * (psi * w * w_t).integral()
        terms = monitors.virial_terms(w, beta, A)
        assert sum(terms.values()) == pytest.approx(direct, abs=1e-9 * abs(direct) + 1e-12)
        assert terms["dispersive"] < 0.0 and terms["mass"] < 0.0

    def test_identity_holds(self, w_trajectory):
        report = monitors.virial_linear_w(w_trajectory)
        assert report.A == w_trajectory.grid.length / 8.0
        assert report.residual <= 1e-4
        assert np.all(report.dispersive_term <= 0.0)
        labels = [s.label for s in report.series()]
        assert labels[:2] == ["virial_moment", "virial_residual"]
        assert "virial_commutator" in labels and "virial_forcing" in labels

    def test_damped_copy_breaks_the_identity(self, w_trajectory):
        """e^{-t} w(t) does not solve the flow and leaves a residual of order int psi w^2"""
        damping = np.exp(-w_trajectory.times)
        damped = evolution.Trajectory(
            times=w_trajectory.times,
            snapshots=[u * float(s) for s, u in zip(damping, w_trajectory.snapshots)],
            invariants={},
            beta_series=damping * w_trajectory.beta_series,
            flow="w",
        )
        forward = monitors.virial_linear_w(w_trajectory)
        broken = monitors.virial_linear_w(damped)
        assert forward.moment[0] > 1.0
        assert broken.residual > 0.1
        assert broken.residual > 1e3 * forward.residual

    def test_needs_three_snapshots(self, w_trajectory):
        short = evolution.Trajectory(
            times=w_trajectory.times[:2], snapshots=w_trajectory.snapshots[:2], invariants={}
        )
        with pytest.raises(ValueError, match="three snapshots"):
            monitors.virial_linear_w(short)


class TestBoundRatios:
    """Commutator-term ratios, hand-computed integrals and smoothing bounds"""

    def test_ratio_table_shapes(self, grid):
        corpus = [profiles.soliton(SolitonParams(), grid), initial_data.odd_bump(grid)]
        first = monitors.firstterm_table(corpus, [2.0, 8.0])
        second = monitors.secondterm_table(corpus, [2.0, 8.0])
        assert first.scaled_ratios.shape == (2, 2)
        assert set(second.max_by_A()) == {2.0, 8.0}
        assert np.all(second.scaled_ratios >= 0.0)

    def test_cubic_ratio_homogeneity(self, grid):
        """ratio is scale invariant; amplitude_ratio is linear in the amplitude"""
        eta = initial_data.even_bump(grid, center=2.0)
        w = WeightParams(A=8.0)
        once = monitors.cubic_weight_bound(eta, w)
        twice = monitors.cubic_weight_bound(2.0 * eta, w)
        assert twice["ratio"] == pytest.approx(once["ratio"], rel=1e-10)
        assert twice["amplitude_ratio"] == pytest.approx(2.0 * once["amplitude_ratio"], rel=1e-10)
        assert monitors.cubic_weight_bound(grid.zeros(), w) == {"ratio": 0.0, "amplitude_ratio": 0.0}

    def test_claim_tech_bounds(self, grid):
        bounds = monitors.claim_tech_bounds(initial_data.even_bump(grid), 4.0)
        assert set(bounds) == {"h_l2", "hx_l2", "hxx_hhalf"}
        assert all(0.0 < value <= 1.0 for value in bounds.values())

    def test_secondterm_single_mode(self, grid):
        """u = sin(kx), weight 1 + sin(2kx): (H u_x) u_x = -(k^2/2) sin(2kx), integral -k^2 L/4"""
        k = 2.0 * np.pi * 4 / grid.length
        u = grid.sample(lambda x: np.sin(k * x))
        weight = grid.sample(lambda x: 1.0 + np.sin(2.0 * k * x))
        expected = -k * k * grid.length / 4.0
        assert monitors.secondterm_integral(u, weight) == pytest.approx(expected, rel=1e-8)

    def test_secondterm_constant_weight_vanishes(self, grid, rng):
        u = grid.field(rng.standard_normal(grid.n))
        weight = grid.field(np.full(grid.n, 3.0))
        scale = derivative(u).inner(derivative(u))
        assert abs(monitors.secondterm_integral(u, weight)) <= 1e-12 * scale

    def test_firstterm_single_mode(self, grid):
        """u = sin(kx): (H u_x) u = -(k/2)(1 - cos(2kx))"""
        k = 2.0 * np.pi * 4 / grid.length
        w = WeightParams(A=5.0)
        u = grid.sample(lambda x: np.sin(k * x))
        dphi = profiles.phi_prime(w, grid)
        cos2 = grid.sample(lambda x: np.cos(2.0 * k * x))
        expected = -0.5 * k * dphi.integral() + 0.5 * k * (cos2 * dphi).integral()
        assert monitors.firstterm_integral(u, w) == pytest.approx(expected, rel=1e-10)

    @pytest.mark.parametrize("A", [2.0, 10.0])
    def test_kernel_form_matches_secondterm(self, A):
        """(1/2pi) iint u u K_phi = int (H u_x) u_x phi for a compactly supported bump"""
        grid = Grid(8192, 800.0)
        expected = monitors.secondterm_integral(
            grid.sample(_compact_bump), profiles.phi_weight(WeightParams(A=A), grid)
        )
        value = monitors.kernel_bilinear_form(_compact_bump, A, half_width=6.0, n_quad=512)
        assert expected != 0.0
        assert value == pytest.approx(expected, rel=1e-3)

    def test_kernel_form_on_modulated_bump(self, rng):
        a = rng.standard_normal(3)
        b = rng.standard_normal(3)

        def profile(x):
            modes = sum(a[j] * np.cos(0.5 * (j + 1) * x) + b[j] * np.sin(0.5 * (j + 1) * x) for j in range(3))
            return _compact_bump(x) * (1.0 + modes)

        grid = Grid(8192, 800.0)
        expected = monitors.secondterm_integral(grid.sample(profile), profiles.phi_weight(WeightParams(A=5.0), grid))
        value = monitors.kernel_bilinear_form(profile, 5.0, half_width=6.0, n_quad=512)
        assert value == pytest.approx(expected, rel=1e-3)


class TestAsymptotics:
    """Functionals along soliton trajectories"""

    def test_stability_functional_vanishes_on_q(self, soliton_trajectory):
        series = monitors.stability_functional(soliton_trajectory, 1.0)
        assert series.max_abs() <= 5e-3

    def test_local_energy_of_zero(self, soliton_trajectory):
        zeros = [u.grid.zeros() for u in soliton_trajectory.snapshots]
        series = monitors.local_energy_decay(soliton_trajectory, etas=zeros)
        assert series.max_abs() == 0.0

    def test_decay_limit_labels(self, modulated_soliton):
        series = monitors.decay_limits(modulated_soliton, 20.0, y0_list=(10.0, 20.0))
        labels = [s.label for s in series]
        assert labels == ["right_y0_10", "band_y0_10", "right_y0_20", "band_y0_20", "far_band", "core"]
        assert all(s.values.shape == modulated_soliton.times.shape for s in series)

    def test_eta_mass_identity_needs_three_snapshots(self, soliton_trajectory):
        short = evolution.Trajectory(
            times=soliton_trajectory.times[:2], snapshots=soliton_trajectory.snapshots[:2], invariants={}
        )
        with pytest.raises(ValueError, match="three snapshots"):
            monitors.eta_mass_identity(short, 1.0)

    @pytest.mark.parametrize("rho_dot", [1.0, 1.05])
    def test_eta_mass_identity_holds(self, rho_dot):
        grid = Grid(2048, 200.0)
        eta0 = 0.1 * initial_data.even_bump(grid, center=4.0)
        traj = evolution.run_eta(eta0, 1.0, StepperConfig(dt=1e-3), cadence=0.02, rho_dot=rho_dot)
        scale = eta0.inner(eta0)
        assert monitors.eta_mass_identity(traj, rho_dot).max_abs() <= 1e-2 * scale

    def test_eta_mass_identity_sees_the_speed_offset(self):
        grid = Grid(2048, 200.0)
        eta0 = 0.1 * initial_data.even_bump(grid, center=4.0)
        traj = evolution.run_eta(eta0, 1.0, StepperConfig(dt=1e-3), cadence=0.02, rho_dot=1.05)
        scale = eta0.inner(eta0)
        assert monitors.eta_mass_identity(traj, 1.0).max_abs() > 5e-2 * scale


class TestMovingFrame:
    """Lab-frame weights read the same values off a co-moving run"""

    def test_kato_identity(self, co_moving_run):
        residual = monitors.kato_residual(co_moving_run, WeightParams(A=20.0, shift=-10.0), weight_speed=0.5)
        assert residual.max_abs() <= 1e-4

    def test_decay_limits_agree(self, perturbed_run, co_moving_run):
        lab = monitors.decay_limits(perturbed_run, 20.0, y0_list=(10.0,))
        moving = monitors.decay_limits(co_moving_run, 20.0, y0_list=(10.0,))
        for a, b in zip(lab, moving):
            assert a.label == b.label
            np.testing.assert_allclose(b.values, a.values, rtol=1e-6, atol=1e-8)

    def test_c_plus_agrees(self, perturbed_run, co_moving_run):
        lab = modulation.estimate_c_plus(perturbed_run, 2.0)
        moving = modulation.estimate_c_plus(co_moving_run, 2.0)
        assert moving == pytest.approx(lab, rel=1e-6)
