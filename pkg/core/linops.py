"""Linearized operators around the soliton and their spectra.

    L   = D + 1 - Q           (D has symbol |k|)
    L_c = D + c - Q_c
    Ltilde quadratic form: 2||D^{1/2} z||^2 + ||z||^2 - int (xQ' + Q) z^2,
    with xQ' + Q = S.
"""
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy import linalg

from config.settings import ERRORS, MIN_SPECTRUM_GRID_N
from core import profiles
from core.errors import GridMismatchError
from core.profiles import SolitonParams
from core.spectral_ops import Field, Grid, derivative, frac_deriv, half_energy
from utils.logger import get_logger

logger = get_logger(__name__)


class OperatorKind(str, Enum):
    L = "L"
    L_C = "L_c"
    LTILDE = "Ltilde"


class Metric(str, Enum):
    L2 = "L2"
    H_HALF = "H1/2"


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense symmetric matrix M with z^T M z equal to the quadratic form."""

    grid: Grid
    entries: np.ndarray
    kind: OperatorKind
    c: float = 1.0

    def __post_init__(self):
        self.entries.flags.writeable = False

    def apply(self, f: Field) -> Field:
        return Field(self.grid, self.entries @ f.values / self.grid.spacing)

    def quadratic_form(self, f: Field) -> float:
        return float(f.values @ self.entries @ f.values)

    @property
    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.T)))


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    kind: OperatorKind
    metric: Metric
    eigenvalues: np.ndarray
    eigenvectors: List[Field]
    residuals: np.ndarray
    constraint_set: List[Field] = field(default_factory=list)
    constraint_labels: List[str] = field(default_factory=list)

    @property
    def rayleigh_min(self) -> float:
        return float(self.eigenvalues[0])

    def count_below(self, threshold: float) -> int:
        return int(np.sum(self.eigenvalues < threshold))

    def correlations(self, named: Dict[str, Field]) -> Dict[str, List[float]]:
        return {
            label: [correlation(vector, profile) for vector in self.eigenvectors]
            for label, profile in named.items()
        }

    def to_text(self, named: Optional[Dict[str, Field]] = None) -> str:
        lines = [
            f"operator: {self.kind.value}",
            f"metric: {self.metric.value}",
            f"constraints: {', '.join(self.constraint_labels) or 'none'}",
            f"rayleigh_min: {self.rayleigh_min:.12g}",
            "index  eigenvalue          residual",
        ]
        for index, (value, residual) in enumerate(zip(self.eigenvalues, self.residuals)):
            lines.append(f"{index:5d}  {value: .12e}  {residual:.3e}")
        if named:
            lines.append("correlations:")
            for label, values in self.correlations(named).items():
                rendered = " ".join(f"{v:.6f}" for v in values)
                lines.append(f"  {label}: {rendered}")
        return "\n".join(lines) + "\n"


def correlation(f: Field, g: Field) -> float:
    """|<f, g>| / (|f| |g|)"""
    denominator = f.norm() * g.norm()
    return 0.0 if denominator == 0.0 else abs(f.inner(g)) / denominator


# Matrix-free application -----------------------------------------------------

def apply_L_c(f: Field, c: float) -> Field:
    if not c > 0:
        raise ValueError(ERRORS["nonpositive"].format("c", c))
    potential = profiles.soliton(SolitonParams(c=c), f.grid)
    return frac_deriv(f, 1.0) + c * f - potential * f


def apply_L(f: Field) -> Field:
    return apply_L_c(f, 1.0)


def ltilde_potential(grid: Grid) -> Field:
    """xQ' + Q = S"""
    return profiles.profile_S(grid)


def quadform_Ltilde(z: Field) -> float:
    return 2.0 * half_energy(z) + z.inner(z) - (ltilde_potential(z.grid) * z * z).integral()


@dataclass(frozen=True, eq=False)
class KernelProfiles:
    """Q' and Q'' = d_x Q' in the discrete sense the w-flow uses"""

    q_prime: Field
    q_second: Field
    l_q_second: Field
    q_prime_norm2: float


@lru_cache(maxsize=8)
def kernel_profiles(grid: Grid) -> KernelProfiles:
    q_prime = profiles.soliton_derivative(SolitonParams(), grid)
    q_second = derivative(q_prime)
    return KernelProfiles(
        q_prime=q_prime,
        q_second=q_second,
        l_q_second=apply_L(q_second),
        q_prime_norm2=q_prime.inner(q_prime),
    )


def beta_from_w(w: Field) -> float:
    """int w L(Q'') / int (Q')^2"""
    kernel = kernel_profiles(w.grid)
    return w.inner(kernel.l_q_second) / kernel.q_prime_norm2


# Dense assembly ----------------------------------------------------------------

def _d_matrix(grid: Grid) -> np.ndarray:
    column = np.fft.irfft(grid.wavenumbers, n=grid.n)
    return linalg.circulant(column)


def assemble(kind: OperatorKind, grid: Grid, c: float = 1.0) -> OperatorMatrix:
    kind = OperatorKind(kind)
    if grid.n < MIN_SPECTRUM_GRID_N:
        raise ValueError(ERRORS["spectrum_grid"].format(MIN_SPECTRUM_GRID_N, grid.n))
    if not c > 0:
        raise ValueError(ERRORS["nonpositive"].format("c", c))

    d_matrix = _d_matrix(grid)
    if kind is OperatorKind.LTILDE:
        matrix = 2.0 * d_matrix
        matrix[np.diag_indices(grid.n)] += 1.0 - ltilde_potential(grid).values
        c = 1.0
    else:
        c = 1.0 if kind is OperatorKind.L else c
        potential = profiles.soliton(SolitonParams(c=c), grid)
        matrix = d_matrix
        matrix[np.diag_indices(grid.n)] += c - potential.values

    entries = 0.5 * grid.spacing * (matrix + matrix.T)
    logger.info(f"Assembled {kind.value} (c={c}) on n={grid.n}, L={grid.length}")
    return OperatorMatrix(grid=grid, entries=entries, kind=kind, c=c)


@lru_cache(maxsize=4)
def _h_half_gram_cached(grid: Grid) -> np.ndarray:
    gram = _d_matrix(grid)
    gram[np.diag_indices(grid.n)] += 1.0
    gram = 0.5 * grid.spacing * (gram + gram.T)
    gram.flags.writeable = False
    return gram


def h_half_gram(grid: Grid) -> np.ndarray:
    """Gram matrix of ||z||^2 + ||D^{1/2} z||^2 with quadrature weight"""
    return _h_half_gram_cached(grid)


def _gram(grid: Grid, metric: Metric) -> np.ndarray:
    if Metric(metric) is Metric.H_HALF:
        return h_half_gram(grid)
    return grid.spacing * np.eye(grid.n)


def _eigensolve(matrix: np.ndarray, gram: np.ndarray, n_lowest: int) -> Tuple[np.ndarray, np.ndarray]:
    n_lowest = min(int(n_lowest), matrix.shape[0])
    return linalg.eigh(matrix, gram, subset_by_index=[0, n_lowest - 1])


def _report(
    M: OperatorMatrix,
    metric: Metric,
    values: np.ndarray,
    vectors: np.ndarray,
    gram: np.ndarray,
    constraints: Sequence[Field] = (),
    labels: Sequence[str] = (),
    basis: Optional[np.ndarray] = None,
) -> SpectrumReport:
    defect = M.entries @ vectors - (gram @ vectors) * values
    if basis is not None:
        # Only the component inside the constraint complement must vanish
        defect = basis @ (basis.T @ defect)
    residuals = np.linalg.norm(defect, axis=0) / np.linalg.norm(vectors, axis=0)
    fields = []
    for column in vectors.T:
        pivot = column[np.argmax(np.abs(column))]
        fields.append(Field(M.grid, column * np.sign(pivot)))
    return SpectrumReport(
        kind=M.kind,
        metric=metric,
        eigenvalues=values,
        eigenvectors=fields,
        residuals=residuals,
        constraint_set=list(constraints),
        constraint_labels=list(labels) or [f"g{i}" for i in range(len(constraints))],
    )


def spectrum(M: OperatorMatrix, n_lowest: int, metric: Metric = Metric.L2) -> SpectrumReport:
    if n_lowest < 1:
        raise ValueError(ERRORS["nonpositive"].format("n_lowest", n_lowest))
    metric = Metric(metric)
    gram = _gram(M.grid, metric)
    values, vectors = _eigensolve(M.entries, gram, n_lowest)
    return _report(M, metric, values, vectors, gram)


def constrained_rayleigh_min(
    M: OperatorMatrix,
    constraints: Sequence[Field],
    metric: Metric = Metric.L2,
    n_lowest: int = 4,
    labels: Sequence[str] = (),
) -> SpectrumReport:
    """Lowest Rayleigh quotients of M on {z : <z, g_i> = 0 for all i}.

    The constraint complement is spanned by an orthonormal null-space basis
    V, and the reduced pencil (V^T M V, V^T G V) is solved directly.
    """
    metric = Metric(metric)
    if not constraints:
        return spectrum(M, n_lowest, metric)
    for g in constraints:
        if g.grid != M.grid:
            raise GridMismatchError(ERRORS["grid_mismatch"].format(M.grid, g.grid))

    block = np.column_stack([g.values for g in constraints])
    if np.linalg.matrix_rank(block) < block.shape[1]:
        raise ValueError("Constraint fields are linearly dependent on the grid")

    basis = linalg.null_space(block.T)
    gram = _gram(M.grid, metric)
    reduced = basis.T @ M.entries @ basis
    reduced_gram = basis.T @ gram @ basis
    values, coefficients = _eigensolve(
        0.5 * (reduced + reduced.T), 0.5 * (reduced_gram + reduced_gram.T), n_lowest
    )
    vectors = basis @ coefficients
    return _report(M, metric, values, vectors, gram, constraints, labels, basis=basis)


# Fourier-side oracle for the even eigenfunctions --------------------------------

@dataclass(frozen=True)
class FourierEigenOracle:
    """(L f)^ / (4 pi e^{-|k|}) for f = Q + a Q^2, as a polynomial in |k|."""

    a: float
    image: Tuple[float, ...]
    profile: Tuple[float, ...]
    eigenvalue: float
    residual: float


def fourier_eigen_oracle(a: float) -> FourierEigenOracle:
    kappa = Polynomial([0.0, 1.0])
    # Transforms in units of 4 pi e^{-|k|}
    q1 = Polynomial([1.0])
    q2 = 2.0 * (1.0 + kappa)
    q3 = 2.0 * (3.0 + 3.0 * kappa + kappa**2)

    f_hat = q1 + a * q2
    image = kappa * f_hat + f_hat - (q2 + a * q3)
    image = Polynomial(np.pad(image.coef, (0, 3 - image.coef.size)))
    f_coef = np.pad(f_hat.coef, (0, 3 - f_hat.coef.size))
    eigenvalue = image.coef[1] / f_coef[1] if f_coef[1] else image.coef[0] / f_coef[0]
    residual = float(np.max(np.abs(image.coef - eigenvalue * f_coef)))
    return FourierEigenOracle(
        a=float(a),
        image=tuple(float(v) for v in image.coef),
        profile=tuple(float(v) for v in f_coef),
        eigenvalue=float(eigenvalue),
        residual=residual,
    )


def even_eigen_coefficients() -> Tuple[float, float]:
    """Roots a of 4a^2 - 2a - 1 = 0, ground state first: ((1+sqrt5)/4, (1-sqrt5)/4)"""
    roots = np.sort(Polynomial([-1.0, -2.0, 4.0]).roots().real)[::-1]
    return float(roots[0]), float(roots[1])


# Traversal lemma -----------------------------------------------------------------

@dataclass(frozen=True)
class TraversalReport:
    eps: float
    residual_norm: float
    pairing: float
    predicted_pairing: float
    upper_bound: float
    constrained_min: Optional[float] = None
    ltilde_constrained_min: Optional[float] = None

    def as_record(self) -> Dict[str, Optional[float]]:
        return dict(self.__dict__)


def traversal_check(
    eps: float,
    grid: Grid,
    L_matrix: Optional[OperatorMatrix] = None,
    Ltilde_matrix: Optional[OperatorMatrix] = None,
) -> TraversalReport:
    """S_eps = S + eps Q, T_eps = T - eps S with L T_eps = S_eps."""
    if not eps > 0:
        raise ValueError(ERRORS["nonpositive"].format("eps", eps))
    q = profiles.soliton(SolitonParams(), grid)
    s = profiles.profile_S(grid)
    t = profiles.profile_T(grid)
    s_eps = s + eps * q
    t_eps = t - eps * s

    pairing = s_eps.inner(t_eps)
    predicted = s.inner(t) + eps * (-s.inner(s) + t.inner(q)) - eps**2 * s.inner(q)

    constrained = None
    if L_matrix is not None:
        constrained = constrained_rayleigh_min(L_matrix, [s_eps], labels=["S_eps"]).rayleigh_min
    ltilde_min = None
    if Ltilde_matrix is not None:
        ltilde_min = constrained_rayleigh_min(
            Ltilde_matrix, [s_eps], metric=Metric.H_HALF, labels=["S_eps"]
        ).rayleigh_min

    return TraversalReport(
        eps=eps,
        residual_norm=(apply_L(t_eps) - s_eps).norm(),
        pairing=pairing,
        predicted_pairing=predicted,
        upper_bound=-2.0 * eps * s.inner(s),
        constrained_min=constrained,
        ltilde_constrained_min=ltilde_min,
    )
