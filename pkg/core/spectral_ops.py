"""Fourier-multiplier calculus on a periodic 1-D grid.

The real line is replaced by the torus [-L/2, L/2). All transforms are real
FFTs, so a Field's spectrum holds the modes m = 0 .. n/2 and conjugate
symmetry is automatic.
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Union

import numpy as np

from config.settings import ERRORS, MIN_GRID_N
from core import closed_forms
from core.errors import GridMismatchError

Number = Union[int, float]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid; equality is decided by (n, length) only."""

    n: int
    length: float
    spacing: float = field(init=False, repr=False, compare=False)
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    wavenumbers: np.ndarray = field(init=False, repr=False, compare=False)
    dealias_mask: np.ndarray = field(init=False, repr=False, compare=False)
    parseval_weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = int(self.n)
        if n != self.n or n % 2 or n < MIN_GRID_N:
            raise ValueError(ERRORS["grid_size"].format(MIN_GRID_N, self.n))
        length = float(self.length)
        if not length > 0:
            raise ValueError(ERRORS["grid_length"].format(self.length))
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "length", length)

        spacing = length / n
        modes = np.arange(n // 2 + 1)
        # Integer offsets keep x_{n-j} = -x_j exactly.
        nodes = (np.arange(n) - n // 2) * spacing
        wavenumbers = 2.0 * np.pi * modes / length
        dealias_mask = 3 * modes < n
        weights = np.full(modes.size, 2.0)
        weights[0] = 1.0
        weights[-1] = 1.0

        for name, value in [
            ("spacing", spacing),
            ("nodes", nodes),
            ("wavenumbers", wavenumbers),
            ("dealias_mask", dealias_mask),
            ("parseval_weights", weights),
        ]:
            if isinstance(value, np.ndarray):
                value.flags.writeable = False
            object.__setattr__(self, name, value)

    @property
    def n_modes(self) -> int:
        return self.n // 2 + 1

    @property
    def k_cut(self) -> float:
        """Largest wavenumber kept by the 2/3 rule"""
        return float(self.wavenumbers[self.dealias_mask][-1])

    def field(self, values) -> "Field":
        return Field(self, values)

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.n))

    def sample(self, func: Callable[[np.ndarray], np.ndarray]) -> "Field":
        return Field(self, func(self.nodes))

    def offsets(self, center: float) -> np.ndarray:
        """x - center folded back into [-L/2, L/2)"""
        if center == 0.0:
            return self.nodes
        half = 0.5 * self.length
        return np.mod(self.nodes - center + half, self.length) - half

    def sample_weight(self, func: Callable[[np.ndarray], np.ndarray]) -> "Field":
        """Sample a non-periodic weight (phi, psi, ...) on the torus.

        Node 0 sits on the seam x = -L/2 = +L/2 and takes the mean of both
        one-sided values, so phi(x) + phi(-x) = pi holds at every node.
        """
        values = np.array(func(self.nodes), dtype=np.float64)
        values[0] = 0.5 * (values[0] + float(func(np.float64(0.5 * self.length))))
        return Field(self, values)


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a function on a Grid. Values are read-only."""

    grid: Grid
    values: np.ndarray

    # numpy defers mixed arithmetic to the reflected Field methods
    __array_ufunc__ = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (self.grid.n,):
            raise ValueError(ERRORS["shape_mismatch"].format(self.grid.n, values.shape))
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_spectrum(cls, grid: Grid, coefficients: np.ndarray) -> "Field":
        return cls(grid, np.fft.irfft(coefficients, n=grid.n))

    @cached_property
    def spectrum(self) -> np.ndarray:
        coefficients = np.fft.rfft(self.values)
        coefficients.flags.writeable = False
        return coefficients

    def _check(self, other: "Field"):
        if other.grid != self.grid:
            raise GridMismatchError(ERRORS["grid_mismatch"].format(self.grid, other.grid))

    def _operand(self, other):
        if isinstance(other, Field):
            self._check(other)
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._operand(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._operand(other))

    def __rsub__(self, other):
        return Field(self.grid, self._operand(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._operand(other))

    __rmul__ = __mul__

    def __truediv__(self, other: Number):
        return Field(self.grid, self.values / other)

    def __neg__(self):
        return Field(self.grid, -self.values)

    def __pow__(self, power: int):
        return Field(self.grid, self.values ** power)

    def integral(self) -> float:
        return float(self.grid.spacing * np.sum(self.values))

    def inner(self, other: "Field") -> float:
        self._check(other)
        return float(self.grid.spacing * np.dot(self.values, other.values))

    def norm(self) -> float:
        return float(np.sqrt(self.inner(self)))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def translate(self, shift: float) -> "Field":
        """f(x - shift) by spectral phase shift; exact for band-limited fields."""
        phase = np.exp(-1j * self.grid.wavenumbers * shift)
        return Field.from_spectrum(self.grid, self.spectrum * phase)

    def reflect(self) -> "Field":
        """f(-x) on the symmetric node set"""
        return Field(self.grid, np.roll(self.values[::-1], 1))


# Multipliers ------------------------------------------------------------------

def apply_multiplier(f: Field, symbol: np.ndarray) -> Field:
    return Field.from_spectrum(f.grid, f.spectrum * symbol)


def _odd_symbol(grid: Grid, symbol: np.ndarray) -> np.ndarray:
    symbol = np.array(symbol, dtype=np.complex128)
    symbol[-1] = 0.0
    return symbol


def hilbert_symbol(grid: Grid) -> np.ndarray:
    """+i sgn(k): zero mode and Nyquist mapped to 0"""
    return _odd_symbol(grid, 1j * np.sign(grid.wavenumbers))


def derivative_symbol(grid: Grid, order: int = 1) -> np.ndarray:
    symbol = (1j * grid.wavenumbers) ** order
    return _odd_symbol(grid, symbol) if order % 2 else symbol.astype(np.complex128)


def hilbert(f: Field) -> Field:
    return apply_multiplier(f, hilbert_symbol(f.grid))


def derivative(f: Field, order: int = 1) -> Field:
    if int(order) != order or order < 1:
        raise ValueError(ERRORS["nonpositive"].format("Derivative order", order))
    return apply_multiplier(f, derivative_symbol(f.grid, int(order)))


def frac_deriv(f: Field, s: float) -> Field:
    """D^s with symbol |k|^s; s = 0 returns f unchanged"""
    if s < 0:
        raise ValueError(ERRORS["negative_order"].format(s))
    if s == 0:
        return f
    return apply_multiplier(f, f.grid.wavenumbers ** s)


def helmholtz_smooth(f: Field, gamma: float) -> Field:
    """(1 - gamma d_xx)^(-1) f"""
    if not gamma > 0:
        raise ValueError(ERRORS["nonpositive"].format("gamma", gamma))
    return apply_multiplier(f, 1.0 / (1.0 + gamma * f.grid.wavenumbers**2))


def poisson_extension(f: Field, y: float) -> Field:
    """Harmonic extension of f to height y, symbol exp(-y|k|)"""
    if y < 0:
        raise ValueError(ERRORS["negative_order"].format(y))
    if y == 0:
        return f
    return apply_multiplier(f, np.exp(-y * f.grid.wavenumbers))


def project_dealiased(f: Field) -> Field:
    return apply_multiplier(f, f.grid.dealias_mask)


def spectral_inner(f: Field, g: Field) -> float:
    """Parseval form of the trapezoidal inner product"""
    f._check(g)
    grid = f.grid
    products = np.real(f.spectrum * np.conj(g.spectrum))
    return float(grid.length / grid.n**2 * np.dot(grid.parseval_weights, products))


def sobolev_norm(f: Field, s: float, homogeneous: bool = False) -> float:
    if not 0 <= s <= 2:
        raise ValueError(f"Sobolev index must lie in [0, 2]: got {s}")
    grid = f.grid
    k = grid.wavenumbers
    weight = k ** (2 * s) if homogeneous else (1.0 + k * k) ** s
    energy = grid.parseval_weights * weight * np.abs(f.spectrum) ** 2
    return float(np.sqrt(grid.length / grid.n**2 * np.sum(energy)))


def half_energy(f: Field) -> float:
    """int f_x H f = ||D^{1/2} f||^2"""
    return sobolev_norm(f, 0.5, homogeneous=True) ** 2


def lp_norm(f: Field, p: float) -> float:
    return float((f.grid.spacing * np.sum(np.abs(f.values) ** p)) ** (1.0 / p))


# Inequality ratios ------------------------------------------------------------

def gn_ratio(f: Field) -> float:
    """||f||_{L^4}^2 / (||f||_{L^2} ||D^{1/2} f||_{L^2}); 0 for f = 0"""
    denominator = f.norm() * sobolev_norm(f, 0.5, homogeneous=True)
    if denominator == 0.0:
        return 0.0
    return lp_norm(f, 4.0) ** 2 / denominator


def commutator_defect(f: Field, g: Field, s: float) -> float:
    """||D^s(fg) - g D^s f|| / (||f||_{L^4} ||D^s g||_{L^4})"""
    if s not in (0.5, 1.0):
        raise ValueError(f"Commutator order must be 1/2 or 1: got {s}")
    numerator = (frac_deriv(f * g, s) - g * frac_deriv(f, s)).norm()
    if numerator == 0.0:
        return 0.0
    denominator = lp_norm(f, 4.0) * lp_norm(frac_deriv(g, s), 4.0)
    if denominator == 0.0:
        return float("inf")
    return numerator / denominator


def green_identity_residual(u: Field, A: float, y_max: float, n_layers: int) -> float:
    """|lhs - rhs| for

        int (H u_x) u phi' = - iint_{y>0} |grad U|^2 Phi + 1/2 int u^2 H phi''

    U is the Poisson extension of u and Phi the harmonic extension of phi'.
    The half-plane integral is truncated at y_max and evaluated with
    Gauss-Legendre layers.
    """
    if not y_max > 0:
        raise ValueError(ERRORS["nonpositive"].format("y_max", y_max))
    if int(n_layers) != n_layers or n_layers <= 0:
        raise ValueError(ERRORS["nonpositive"].format("n_layers", n_layers))
    if not A > 1:
        raise ValueError(f"Weight scale A must exceed 1: got {A}")

    grid = u.grid
    x = grid.nodes
    phi_prime = grid.sample_weight(lambda z: closed_forms.phi_prime(z, A))
    h_phi_second = grid.sample_weight(lambda z: closed_forms.hilbert_phi_second(z, A))

    lhs = (hilbert(derivative(u)) * u * phi_prime).integral()
    boundary = 0.5 * (u * u * h_phi_second).integral()

    roots, weights = np.polynomial.legendre.leggauss(int(n_layers))
    heights = 0.5 * y_max * (roots + 1.0)
    weights = 0.5 * y_max * weights

    dx_symbol = derivative_symbol(grid)
    k = grid.wavenumbers
    bulk = 0.0
    for y, weight in zip(heights, weights):
        layer = u.spectrum * np.exp(-y * k)
        ux = np.fft.irfft(dx_symbol * layer, n=grid.n)
        uy = np.fft.irfft(-k * layer, n=grid.n)
        density = (ux * ux + uy * uy) * closed_forms.harmonic_phi_prime(x, y, A)
        bulk += weight * grid.spacing * np.sum(density)

    return float(abs(lhs - (-bulk + boundary)))
