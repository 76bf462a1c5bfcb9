"""Soliton family, weights and the closed-form oracle table sampled on a Grid."""
from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field as PydanticField
from scipy import integrate

from config.settings import ERRORS, MIN_SEPARATION
from core import closed_forms
from core.errors import LabError
from core.spectral_ops import Field, Grid, frac_deriv

SQRT5 = np.sqrt(5.0)
F0_COEFFICIENT = 0.25 * (1.0 + SQRT5)
F1_COEFFICIENT = 0.25 * (1.0 - SQRT5)


class SolitonParams(BaseModel):
    """Speed c and centre x0 of Q_c(x - x0)"""
    model_config = ConfigDict(frozen=True)

    c: float = PydanticField(default=1.0, gt=0)
    x0: float = 0.0


class WeightParams(BaseModel):
    """Scale A and offset of phi_A(x - shift)"""
    model_config = ConfigDict(frozen=True)

    A: float = PydanticField(default=20.0, gt=1)
    shift: float = 0.0

    def shifted(self, offset: float) -> "WeightParams":
        return WeightParams(A=self.A, shift=self.shift + offset)


# Soliton family ---------------------------------------------------------------

def soliton(params: SolitonParams, grid: Grid) -> Field:
    """c Q(c(x - x0)), with the centre offset wrapped onto the torus"""
    return Field(grid, closed_forms.q_scaled(grid.offsets(params.x0), params.c))


def soliton_derivative(params: SolitonParams, grid: Grid, order: int = 1) -> Field:
    if order not in (1, 2):
        raise ValueError(f"Closed-form soliton derivatives exist for order 1 and 2: got {order}")
    return Field(grid, closed_forms.q_scaled(grid.offsets(params.x0), params.c, order))


def soliton_speed_derivative(params: SolitonParams, grid: Grid) -> Field:
    """d/dc Q_c(y) = S(c y)"""
    return Field(grid, closed_forms.s_profile(params.c * grid.offsets(params.x0)))


def profile_S(grid: Grid, center: float = 0.0) -> Field:
    return Field(grid, closed_forms.s_profile(grid.offsets(center)))


def profile_T(grid: Grid, center: float = 0.0) -> Field:
    return Field(grid, closed_forms.t_profile(grid.offsets(center)))


def _even_profile(grid: Grid, coefficient: float, center: float) -> Field:
    base = closed_forms.q(grid.offsets(center))
    return Field(grid, base + coefficient * base * base)


def profile_f0(grid: Grid, center: float = 0.0) -> Field:
    """Q + (1+sqrt5)/4 Q^2, the ground state of L"""
    return _even_profile(grid, F0_COEFFICIENT, center)


def profile_f1(grid: Grid, center: float = 0.0) -> Field:
    """Q + (1-sqrt5)/4 Q^2, the second even eigenfunction of L"""
    return _even_profile(grid, F1_COEFFICIENT, center)


def validate_separation(params: Sequence[SolitonParams], min_gap: float = MIN_SEPARATION):
    centers = [p.x0 for p in params]
    gaps = np.diff(centers)
    if np.any(gaps < min_gap):
        raise ValueError(ERRORS["unordered"].format(min_gap, centers))


def multisoliton_sum(
    params: Sequence[SolitonParams], grid: Grid, min_gap: float = MIN_SEPARATION
) -> Field:
    validate_separation(params, min_gap)
    total = grid.zeros()
    for entry in params:
        total = total + soliton(entry, grid)
    return total


# Weights ----------------------------------------------------------------------

def phi_weight(params: WeightParams, grid: Grid) -> Field:
    return grid.sample_weight(lambda x: closed_forms.phi(x - params.shift, params.A))


def phi_prime(params: WeightParams, grid: Grid) -> Field:
    return grid.sample_weight(lambda x: closed_forms.phi_prime(x - params.shift, params.A))


def phi_second(params: WeightParams, grid: Grid) -> Field:
    return grid.sample_weight(lambda x: closed_forms.phi_second(x - params.shift, params.A))


def phi_third(params: WeightParams, grid: Grid) -> Field:
    return grid.sample_weight(lambda x: closed_forms.phi_third(x - params.shift, params.A))


def hilbert_phi_oracle(params: WeightParams, grid: Grid) -> Tuple[Field, Field]:
    """Closed forms of (H phi', H phi'') on the real line"""
    first = grid.sample_weight(
        lambda x: closed_forms.hilbert_phi_prime(x - params.shift, params.A)
    )
    second = grid.sample_weight(
        lambda x: closed_forms.hilbert_phi_second(x - params.shift, params.A)
    )
    return first, second


def kernel_K_phi(x, y, params: WeightParams):
    return closed_forms.kernel_k_phi(x - params.shift, y - params.shift, params.A)


def weight_comparability(A: float, window: float = 4.0, samples: int = 20001) -> float:
    """sup over windows of length `window` of max(phi')/min(phi')"""
    left = np.linspace(-50.0 * A, 50.0 * A, samples)
    # phi' is unimodal, so window extrema sit at the endpoints or at 0
    a = closed_forms.phi_prime(left, A)
    b = closed_forms.phi_prime(left + window, A)
    contains_peak = (left < 0.0) & (left + window > 0.0)
    top = np.where(contains_peak, 1.0 / A, np.maximum(a, b))
    return float(np.max(top / np.minimum(a, b)))


# Torus artifacts --------------------------------------------------------------

def periodic_lorentzian(grid: Grid, width: float) -> Field:
    """Periodization sum_j width/(width^2 + (x + jL)^2)"""
    a = 2.0 * np.pi * width / grid.length
    return grid.sample(
        lambda x: np.pi / grid.length * np.sinh(a)
        / (np.cosh(a) - np.cos(2.0 * np.pi * x / grid.length))
    )


def periodic_lorentzian_conjugate(grid: Grid, width: float) -> Field:
    """Torus Hilbert transform of periodic_lorentzian"""
    a = 2.0 * np.pi * width / grid.length
    return grid.sample(
        lambda x: -np.pi / grid.length * np.sin(2.0 * np.pi * x / grid.length)
        / (np.cosh(a) - np.cos(2.0 * np.pi * x / grid.length))
    )


def periodization_floor(grid: Grid) -> float:
    """Sup of the image-sum tail 4 sum_{j != 0} (x + jL)^-2 over the box"""
    return 24.0 / grid.length**2


def soliton_residual(grid: Grid, c: float = 1.0) -> Field:
    """D Q_c + c Q_c - Q_c^2 / 2, zero on the real line"""
    profile = soliton(SolitonParams(c=c), grid)
    return frac_deriv(profile, 1.0) + c * profile - 0.5 * profile * profile


# Oracle table -----------------------------------------------------------------

def closed_form_integrals() -> Dict[str, float]:
    pi = np.pi
    return {
        "int_Q": 4.0 * pi,
        "int_Q2": 8.0 * pi,
        "int_Q3": 24.0 * pi,
        "int_Q4": 80.0 * pi,
        "int_Qprime2": 4.0 * pi,
        "int_S2": 4.0 * pi,
        "int_QDQ": 4.0 * pi,
        "energy_Q": -4.0 * pi,
    }


def _quad(func) -> float:
    value, _ = integrate.quad(func, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-13, limit=400)
    return value


def measured_closed_form_integrals() -> Dict[str, float]:
    """The oracle table recomputed on the real line by adaptive quadrature."""
    q = closed_forms.q
    # int Q D Q on the Fourier side: Q^(k) = 4 pi exp(-|k|)
    qdq, _ = integrate.quad(lambda k: 16.0 * np.pi * k * np.exp(-2.0 * k), 0.0, np.inf,
                            epsabs=1e-13, epsrel=1e-13)
    int_q3 = _quad(lambda x: q(x) ** 3)
    return {
        "int_Q": _quad(q),
        "int_Q2": _quad(lambda x: q(x) ** 2),
        "int_Q3": int_q3,
        "int_Q4": _quad(lambda x: q(x) ** 4),
        "int_Qprime2": _quad(lambda x: closed_forms.q_prime(x) ** 2),
        "int_S2": _quad(lambda x: closed_forms.s_profile(x) ** 2),
        "int_QDQ": qdq,
        "energy_Q": qdq - int_q3 / 3.0,
    }


def verify_closed_form_integrals(tol: float = 1e-8) -> Dict[str, float]:
    expected = closed_form_integrals()
    measured = measured_closed_form_integrals()
    mismatched: List[str] = [
        key for key, value in expected.items() if abs(measured[key] - value) > tol
    ]
    if mismatched:
        raise LabError(f"Closed-form integrals disagree with quadrature: {mismatched}")
    return measured
