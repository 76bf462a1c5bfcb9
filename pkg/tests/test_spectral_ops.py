"""
Tests for the periodic Fourier-multiplier calculus.

Validates:
- Grid construction and validation
- Field arithmetic, translation and reflection
- Hilbert transform, derivatives and D^s against exact torus oracles
- Sobolev norms, Parseval, dealiasing
- Inequality ratios and the Green identity
"""

import numpy as np
import pytest

from core import closed_forms, profiles
from core.errors import GridMismatchError
from core.spectral_ops import (
    Field,
    Grid,
    commutator_defect,
    derivative,
    frac_deriv,
    gn_ratio,
    green_identity_residual,
    half_energy,
    helmholtz_smooth,
    hilbert,
    lp_norm,
    poisson_extension,
    project_dealiased,
    sobolev_norm,
    spectral_inner,
)


def _mode(grid: Grid, m: int):
    return 2.0 * np.pi * m / grid.length


def _band_limited(grid: Grid, rng, k_max: float = 2.0) -> Field:
    """Random real field on 0 < |k| <= k_max"""
    k = grid.wavenumbers
    coefficients = np.zeros(grid.n_modes, dtype=np.complex128)
    band = (k > 0) & (k <= k_max)
    coefficients[band] = rng.standard_normal(band.sum()) + 1j * rng.standard_normal(band.sum())
    return Field.from_spectrum(grid, coefficients)


def _torus_kernel_correction(x: np.ndarray, length: float) -> np.ndarray:
    """1/x - (pi/L) cot(pi x/L): torus minus line Hilbert kernel, integrated against 1/(1 + y^2)"""
    out = np.zeros_like(x)
    nonzero = x != 0.0
    y = x[nonzero]
    out[nonzero] = 1.0 / y - (np.pi / length) / np.tan(np.pi * y / length)
    return out


class TestGrid:
    """Grid construction"""

    def test_nodes_are_symmetric(self, grid):
        """x_{n-j} = -x_j exactly and x_0 = -L/2"""
        nodes = grid.nodes
        assert nodes[0] == -0.5 * grid.length
        np.testing.assert_array_equal(nodes[1:], -nodes[1:][::-1])

    def test_wavenumbers_and_mask(self, grid):
        """rfft layout with the 2/3 mask"""
        assert grid.wavenumbers.shape == (grid.n // 2 + 1,)
        assert grid.wavenumbers[0] == 0.0
        assert grid.dealias_mask[0]
        assert not grid.dealias_mask[-1]
        assert grid.k_cut < 2.0 / 3.0 * grid.wavenumbers[-1] + 1e-12

    def test_equality_by_size_and_length(self):
        """Grids with equal (n, L) compare equal"""
        assert Grid(64, 10.0) == Grid(64, 10)
        assert Grid(64, 10.0) != Grid(64, 20.0)

    def test_validation(self):
        """Odd or tiny node counts and nonpositive lengths are rejected"""
        with pytest.raises(ValueError, match="even"):
            Grid(63, 10.0)
        with pytest.raises(ValueError, match="even"):
            Grid(8, 10.0)
        with pytest.raises(ValueError, match="positive"):
            Grid(64, -1.0)

    def test_offsets_wrap(self, grid):
        """Offsets from a centre stay inside the box"""
        y = grid.offsets(0.5 * grid.length + 3.0)
        assert np.all(y >= -0.5 * grid.length)
        assert np.all(y < 0.5 * grid.length)

    def test_sample_weight_seam(self, grid):
        """phi(x) + phi(-x) = pi at every node, seam included"""
        phi = grid.sample_weight(lambda x: closed_forms.phi(x, 7.0))
        np.testing.assert_allclose((phi + phi.reflect()).values, np.pi, atol=1e-13)


class TestField:
    """Field arithmetic and geometry"""

    def test_shape_mismatch(self, grid):
        with pytest.raises(ValueError, match="samples"):
            Field(grid, np.zeros(grid.n + 1))

    def test_grid_mismatch(self, grid):
        """Binary operations across grids raise GridMismatchError"""
        other = Grid(512, 100.0)
        with pytest.raises(GridMismatchError):
            grid.zeros() + other.zeros()
        with pytest.raises(GridMismatchError):
            grid.zeros().inner(other.zeros())

    def test_values_are_read_only(self, grid):
        f = grid.zeros()
        with pytest.raises(ValueError):
            f.values[0] = 1.0

    def test_scalar_arithmetic(self, grid):
        f = grid.sample(np.cos)
        np.testing.assert_allclose((2.0 * f - f / 2.0).values, 1.5 * f.values)
        np.testing.assert_allclose((1.0 - f).values, 1.0 - f.values)
        np.testing.assert_allclose((f**2).values, f.values**2)

    def test_translate_by_whole_cells(self, grid):
        """A shift by whole cells is a roll of the samples"""
        k = _mode(grid, 3)
        f = grid.sample(lambda x: np.sin(k * x) + 0.5 * np.cos(2 * k * x))
        shifted = f.translate(5 * grid.spacing)
        np.testing.assert_allclose(shifted.values, np.roll(f.values, 5), atol=1e-12)

    def test_translate_band_limited(self, grid):
        """f(x - a) is exact for a band-limited f and any real a"""
        k = _mode(grid, 4)
        f = grid.sample(lambda x: np.sin(k * x))
        expected = grid.sample(lambda x: np.sin(k * (x - 0.37)))
        np.testing.assert_allclose(f.translate(0.37).values, expected.values, atol=1e-12)

    def test_reflect(self, grid):
        """Even profiles are reflection invariant; odd ones flip sign off the seam"""
        q = profiles.soliton(profiles.SolitonParams(), grid)
        np.testing.assert_array_equal(q.reflect().values, q.values)
        qp = profiles.soliton_derivative(profiles.SolitonParams(), grid)
        np.testing.assert_allclose(qp.reflect().values[1:], -qp.values[1:], atol=1e-15)


class TestMultipliers:
    """Hilbert transform, derivatives and smoothing"""

    def test_hilbert_of_cosine(self, grid):
        """H cos(kx) = -sin(kx) and H sin(kx) = cos(kx) with the +i sgn(k) symbol"""
        k = _mode(grid, 5)
        c = grid.sample(lambda x: np.cos(k * x))
        s = grid.sample(lambda x: np.sin(k * x))
        np.testing.assert_allclose(hilbert(c).values, -s.values, atol=1e-12)
        np.testing.assert_allclose(hilbert(s).values, c.values, atol=1e-12)

    def test_hilbert_periodic_lorentzian(self, grid):
        """Exact torus oracle for H on the periodized Lorentzian"""
        f = profiles.periodic_lorentzian(grid, 1.0)
        expected = profiles.periodic_lorentzian_conjugate(grid, 1.0)
        assert (hilbert(f) - expected).max_abs() < 1e-10

    def test_hilbert_of_line_lorentzian(self):
        """H 1/(1+x^2) = -x/(1+x^2) once the torus kernel term is added"""
        grid = Grid(16384, 1600.0)
        x = grid.nodes
        f = grid.sample(lambda y: 1.0 / (1.0 + y * y))
        expected = -x / (1.0 + x * x) + _torus_kernel_correction(x, grid.length)
        mid = np.abs(x) < 0.25 * grid.length
        assert np.max(np.abs(hilbert(f).values - expected)[mid]) <= 1e-6

    def test_hilbert_is_skew_adjoint(self, grid, rng):
        """int (H f) g = -int f (H g)"""
        f = grid.field(rng.standard_normal(grid.n))
        g = grid.field(rng.standard_normal(grid.n))
        lhs = hilbert(f).inner(g)
        rhs = -f.inner(hilbert(g))
        assert abs(lhs - rhs) <= 1e-12 * f.norm() * g.norm()

    def test_hilbert_commutes_with_derivative(self, grid, rng):
        f = _band_limited(grid, rng, k_max=8.0)
        one = hilbert(derivative(f))
        other = derivative(hilbert(f))
        assert (one - other).max_abs() <= 1e-10 * (1.0 + one.max_abs())

    def test_poisson_extension_normal_derivative(self, grid, rng):
        """d_y F(x, 0) = H f' with a one-sided second-order difference in y"""
        f = _band_limited(grid, rng)
        h = 1e-3
        layers = [poisson_extension(f, y) for y in (0.0, h, 2.0 * h)]
        d_y = (-3.0 * layers[0] + 4.0 * layers[1] - layers[2]) / (2.0 * h)
        target = hilbert(derivative(f))
        assert (d_y - target).max_abs() <= 1e-4 * target.max_abs()

    def test_hilbert_squared_is_minus_identity(self, grid, rng):
        """H^2 = -1 on fields without mean or Nyquist content"""
        coefficients = rng.standard_normal(grid.n_modes) + 1j * rng.standard_normal(grid.n_modes)
        coefficients[0] = 0.0
        coefficients[-1] = 0.0
        f = Field.from_spectrum(grid, coefficients)
        np.testing.assert_allclose(hilbert(hilbert(f)).values, -f.values, atol=1e-12)

    def test_derivative_of_sine(self, grid):
        k = _mode(grid, 2)
        f = grid.sample(lambda x: np.sin(k * x))
        np.testing.assert_allclose(derivative(f).values, k * np.cos(k * grid.nodes), atol=1e-12)
        np.testing.assert_allclose(derivative(f, 2).values, -k * k * f.values, atol=1e-12)

    def test_derivative_order_validation(self, grid):
        with pytest.raises(ValueError):
            derivative(grid.zeros(), 0)

    def test_d_is_minus_hilbert_derivative(self, grid):
        """D = -H d_x for the +i sgn(k) convention"""
        q = profiles.soliton(profiles.SolitonParams(), grid)
        assert (frac_deriv(q, 1.0) + hilbert(derivative(q))).max_abs() < 1e-12

    def test_frac_deriv_semigroup(self, grid):
        """D^{1/2} D^{1/2} = D"""
        q = profiles.soliton(profiles.SolitonParams(), grid)
        twice = frac_deriv(frac_deriv(q, 0.5), 0.5)
        assert (twice - frac_deriv(q, 1.0)).max_abs() < 1e-10

    def test_frac_deriv_order_zero_and_negative(self, grid):
        f = grid.sample(np.cos)
        assert frac_deriv(f, 0) is f
        with pytest.raises(ValueError, match="nonnegative"):
            frac_deriv(f, -0.5)

    def test_poisson_extension_of_lorentzian(self, grid):
        """exp(-y|k|) moves the periodized Lorentzian from width a to a + y"""
        f = profiles.periodic_lorentzian(grid, 1.0)
        expected = profiles.periodic_lorentzian(grid, 3.5)
        assert (poisson_extension(f, 2.5) - expected).max_abs() < 1e-10
        assert poisson_extension(f, 0.0) is f
        with pytest.raises(ValueError):
            poisson_extension(f, -1.0)

    def test_helmholtz_smooth(self, grid):
        """(1 - gamma d_xx)^{-1} on a single mode"""
        k = _mode(grid, 3)
        f = grid.sample(lambda x: np.cos(k * x))
        smoothed = helmholtz_smooth(f, 2.0)
        np.testing.assert_allclose(smoothed.values, f.values / (1.0 + 2.0 * k * k), atol=1e-12)
        with pytest.raises(ValueError, match="gamma"):
            helmholtz_smooth(f, 0.0)

    def test_project_dealiased(self, grid, rng):
        f = grid.field(rng.standard_normal(grid.n))
        projected = project_dealiased(f)
        assert np.all(np.abs(projected.spectrum[~grid.dealias_mask]) < 1e-10)
        np.testing.assert_allclose(
            projected.spectrum[grid.dealias_mask], f.spectrum[grid.dealias_mask], atol=1e-9
        )


class TestNorms:
    """Inner products and Sobolev norms"""

    def test_parseval(self, grid, rng):
        f = grid.field(rng.standard_normal(grid.n))
        g = grid.field(rng.standard_normal(grid.n))
        assert spectral_inner(f, g) == pytest.approx(f.inner(g), rel=1e-10, abs=1e-10)

    def test_sobolev_zero_is_l2(self, grid):
        q = profiles.soliton(profiles.SolitonParams(), grid)
        assert sobolev_norm(q, 0.0) == pytest.approx(q.norm(), rel=1e-12)

    def test_sobolev_range(self, grid):
        with pytest.raises(ValueError, match="Sobolev"):
            sobolev_norm(grid.zeros(), 2.5)

    def test_half_energy_matches_pairing(self, grid):
        """||D^{1/2} q||^2 = int q_x H q"""
        q = profiles.soliton(profiles.SolitonParams(), grid)
        pairing = derivative(q).inner(hilbert(q))
        assert half_energy(q) == pytest.approx(pairing, rel=1e-10)

    def test_pairing_is_half_energy_on_random_fields(self, grid, rng):
        """int u_x H u = ||D^{1/2} u||^2 >= 0 on 50 random band-limited fields"""
        for _ in range(50):
            u = _band_limited(grid, rng, k_max=8.0)
            pairing = derivative(u).inner(hilbert(u))
            assert pairing >= 0.0
            assert pairing == pytest.approx(half_energy(u), rel=1e-10)

    def test_half_norm_of_single_mode(self, grid):
        """||cos(kx)||^2 in the homogeneous H^{1/2} norm is k ||cos(kx)||^2"""
        k = _mode(grid, 7)
        f = grid.sample(lambda x: np.cos(k * x))
        assert sobolev_norm(f, 0.5, homogeneous=True) ** 2 == pytest.approx(k * f.inner(f), rel=1e-12)

    def test_soliton_half_energy(self, box_grid):
        """int Q D Q = 4 pi up to the torus tail"""
        q = profiles.soliton(profiles.SolitonParams(), box_grid)
        assert half_energy(q) == pytest.approx(4.0 * np.pi, abs=1e-2)

    def test_lp_norm(self, grid):
        f = grid.field(np.ones(grid.n))
        assert lp_norm(f, 4.0) == pytest.approx(grid.length**0.25)


class TestInequalityRatios:
    """Gagliardo-Nirenberg, commutator and Green-identity checks"""

    def test_gn_ratio_zero_and_scale_invariance(self, grid):
        q = profiles.soliton(profiles.SolitonParams(), grid)
        assert gn_ratio(grid.zeros()) == 0.0
        assert gn_ratio(3.0 * q) == pytest.approx(gn_ratio(q), rel=1e-12)
        assert 0.0 < gn_ratio(q) < 10.0

    def test_gn_ratio_dilation_invariance(self, grid):
        """f(x) -> f(x / 2.5) realized by stretching the box under the same samples"""
        q = profiles.soliton(profiles.SolitonParams(), grid)
        stretched = Field(Grid(grid.n, 2.5 * grid.length), q.values)
        assert gn_ratio(stretched) == pytest.approx(gn_ratio(q), rel=1e-6)

    def test_gn_ratio_corpus_bound(self, grid, rng):
        """100 random band-limited fields stay below the soliton's ratio"""
        ratios = np.array([gn_ratio(_band_limited(grid, rng)) for _ in range(100)])
        assert np.all(ratios > 0.0)
        assert np.max(ratios) <= gn_ratio(profiles.soliton(profiles.SolitonParams(), grid))

    @pytest.mark.parametrize("s", [0.5, 1.0])
    def test_commutator_defect_with_constant(self, grid, s):
        q = profiles.soliton(profiles.SolitonParams(), grid)
        assert commutator_defect(q, grid.field(np.ones(grid.n)), s) == 0.0

    @pytest.mark.parametrize("s", [0.5, 1.0])
    def test_commutator_defect_two_modes(self, grid, s):
        """cos(k1 x), cos(k2 x): D^s(fg) - g D^s f expands over the modes k1 + k2 and k1 - k2"""
        k1, k2 = _mode(grid, 3), _mode(grid, 5)
        f = grid.sample(lambda x: np.cos(k1 * x))
        g = grid.sample(lambda x: np.cos(k2 * x))
        a = (k1 + k2) ** s - k1**s
        b = abs(k1 - k2) ** s - k1**s
        L = grid.length
        numerator = 0.5 * np.sqrt(0.5 * L * (a * a + b * b))
        denominator = k2**s * np.sqrt(3.0 * L / 8.0)
        assert commutator_defect(f, g, s) == pytest.approx(numerator / denominator, rel=1e-10)

    def test_commutator_defect(self, grid):
        q = profiles.soliton(profiles.SolitonParams(), grid)
        bump = grid.sample(lambda x: np.exp(-0.25 * x * x))
        assert np.isfinite(commutator_defect(q, bump, 0.5))
        assert commutator_defect(grid.zeros(), bump, 1.0) == 0.0
        with pytest.raises(ValueError, match="Commutator"):
            commutator_defect(q, bump, 0.75)

    def test_green_identity_converges(self):
        """The truncated half-plane residual shrinks as the layer stack grows"""
        grid = Grid(2048, 400.0)
        q = profiles.soliton(profiles.SolitonParams(), grid)
        coarse = green_identity_residual(q, 5.0, 10.0, 32)
        fine = green_identity_residual(q, 5.0, 40.0, 96)
        assert fine < coarse
        assert fine <= 1e-3

    def test_green_identity_arguments(self, grid):
        q = profiles.soliton(profiles.SolitonParams(), grid)
        with pytest.raises(ValueError, match="y_max"):
            green_identity_residual(q, 5.0, 0.0, 8)
        with pytest.raises(ValueError, match="n_layers"):
            green_identity_residual(q, 5.0, 10.0, 0)
        with pytest.raises(ValueError, match="exceed 1"):
            green_identity_residual(q, 0.5, 10.0, 8)
