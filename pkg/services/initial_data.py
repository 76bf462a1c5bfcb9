"""Initial data: perturbation builders for the stability experiments."""
from enum import Enum
from typing import Optional

import numpy as np

from config.settings import ERRORS
from core import profiles
from core.profiles import SolitonParams
from core.spectral_ops import Field, Grid, sobolev_norm

EVEN_BUMP_WIDTH = 2.0
RANDOM_BAND_LIMIT = 1.5
RANDOM_ENVELOPE_WIDTH = 4.0


class PerturbationKind(str, Enum):
    NONE = "none"
    EVEN_BUMP = "even_bump"
    ODD_BUMP = "odd_bump"
    RANDOM_BANDLIMITED = "random_bandlimited"


def even_bump(grid: Grid, center: float = 0.0) -> Field:
    y = grid.offsets(center)
    return Field(grid, np.exp(-0.5 * (y / EVEN_BUMP_WIDTH) ** 2))


def odd_bump(grid: Grid, center: float = 0.0) -> Field:
    y = grid.offsets(center)
    return Field(grid, (y / EVEN_BUMP_WIDTH) * np.exp(-0.5 * (y / EVEN_BUMP_WIDTH) ** 2))


def random_bandlimited(grid: Grid, seed: int, center: float = 0.0) -> Field:
    """Seeded normal coefficients on |k| <= 1.5, localized by a Gaussian envelope"""
    rng = np.random.default_rng(seed)
    k = grid.wavenumbers
    coefficients = np.zeros(k.size, dtype=np.complex128)
    band = (k > 0) & (k <= RANDOM_BAND_LIMIT)
    coefficients[band] = rng.standard_normal(band.sum()) + 1j * rng.standard_normal(band.sum())
    raw = np.fft.irfft(coefficients, n=grid.n)
    y = grid.offsets(center)
    envelope = np.exp(-0.5 * (y / RANDOM_ENVELOPE_WIDTH) ** 2)
    return Field(grid, raw * envelope)


def build_perturbation(
    kind: PerturbationKind,
    grid: Grid,
    amplitude: float,
    seed: Optional[int] = None,
    center: float = 0.0,
    orthogonal_to: Optional[SolitonParams] = None,
) -> Field:
    """Direction of the given kind scaled to ||.||_{H^1/2} = amplitude.

    With `orthogonal_to`, the component along that soliton's Q_c' is removed
    before scaling.
    """
    kind = PerturbationKind(kind)
    if kind is PerturbationKind.NONE or amplitude == 0.0:
        return grid.zeros()
    if kind is PerturbationKind.EVEN_BUMP:
        direction = even_bump(grid, center)
    elif kind is PerturbationKind.ODD_BUMP:
        direction = odd_bump(grid, center)
    else:
        if seed is None:
            raise ValueError(ERRORS["missing_seed"].format(kind.value))
        direction = random_bandlimited(grid, seed, center)

    if orthogonal_to is not None:
        slope = profiles.soliton_derivative(orthogonal_to, grid)
        direction = direction - (direction.inner(slope) / slope.inner(slope)) * slope

    norm = sobolev_norm(direction, 0.5)
    if norm == 0.0:
        return grid.zeros()
    return (amplitude / norm) * direction
