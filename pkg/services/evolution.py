"""Time integration of the BO equation, the eta-equation and the linear w-flow.

All flows are written as v_t = Lin v + N(v) in real-FFT space. Lin is a
diagonal, purely dispersive symbol that is integrated exactly; N is advanced
by the four stages of ETD-RK4 (Kassam-Trefethen contour coefficients) or of
the integrating-factor RK4.

    BO   : u_t = d_x D u - 1/2 d_x (u^2)              Lin = i k|k| + i k s
    eta  : eta_t = d_x(D eta + eta - Q eta - eta^2/2) + (rho' - 1) d_x(Q + eta)
    w    : w_t = d_x(D w + w - Q w) + beta Q'
"""
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field as PydanticField

from config.settings import (
    BLOWUP_THRESHOLD,
    DEFAULT_DT,
    ERRORS,
    ETD_CONTOUR_POINTS,
    RK4_STAGE_LIMIT,
)
from core import linops, profiles
from core.errors import BlowupError
from core.profiles import SolitonParams
from core.spectral_ops import Field, Grid, derivative_symbol, half_energy
from utils.logger import get_logger

logger = get_logger(__name__)

SpectralMap = Callable[[np.ndarray], np.ndarray]
RhoDot = Union[float, Callable[[float], float]]


class Scheme(str, Enum):
    ETDRK4 = "etdrk4"
    IFRK4 = "ifrk4"


class BetaMode(str, Enum):
    CLOSED_LOOP = "closed_loop"
    ZERO = "zero"


class StepperConfig(BaseModel):
    """Time step, scheme, dealiasing switch and frame speed"""
    model_config = ConfigDict(frozen=True)

    dt: float = PydanticField(default=DEFAULT_DT, gt=0)
    scheme: Scheme = Scheme.ETDRK4
    dealias: bool = True
    frame_speed: float = 0.0


@dataclass(frozen=True, eq=False)
class ModulationSeries:
    rho: np.ndarray
    c: np.ndarray
    eta_norm: np.ndarray
    ortho_defect: np.ndarray


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Snapshots of one run; times strictly increasing, one grid throughout."""

    times: np.ndarray
    snapshots: List[Field]
    invariants: Dict[str, np.ndarray]
    modulation: Optional[ModulationSeries] = None
    beta_series: Optional[np.ndarray] = None
    frame_speed: float = 0.0
    flow: str = "bo"

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        if times.size != len(self.snapshots):
            raise ValueError("Trajectory times and snapshots differ in length")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("Trajectory times must be strictly increasing")
        if self.snapshots:
            grid = self.snapshots[0].grid
            if any(s.grid != grid for s in self.snapshots):
                raise ValueError("Trajectory snapshots must share one grid")
        object.__setattr__(self, "times", times)

    def __len__(self) -> int:
        return len(self.snapshots)

    @property
    def grid(self) -> Grid:
        return self.snapshots[0].grid

    @property
    def mass(self) -> np.ndarray:
        return self.invariants["mass"]

    @property
    def energy(self) -> np.ndarray:
        return self.invariants["energy"]

    @property
    def invariant_series(self):
        return self.mass, self.energy

    def with_modulation(self, series: ModulationSeries) -> "Trajectory":
        return replace(self, modulation=series)

    def relative_drift(self, key: str) -> float:
        series = self.invariants[key]
        scale = abs(series[0]) or 1.0
        return float(np.max(np.abs(series - series[0])) / scale)


def invariants(u: Field):
    """(mass, energy) = (int u^2, int u_x H u - u^3/3)"""
    return u.inner(u), half_energy(u) - (u * u * u).integral() / 3.0


# Exponential integrator ---------------------------------------------------------

class SpectralIntegrator:
    """Diagonal-linear exponential RK4 in the style of Kassam & Trefethen.

    The contour mean runs over the full circle around each dt*L and is kept
    complex: the dispersive symbols here are purely imaginary.
    """

    def __init__(self, linear_symbol: np.ndarray, dt: float, scheme: Scheme = Scheme.ETDRK4,
                 contour_points: int = ETD_CONTOUR_POINTS):
        self.dt = dt
        self.scheme = Scheme(scheme)
        lin = np.asarray(linear_symbol, dtype=np.complex128)
        self.E = np.exp(dt * lin)
        self.E2 = np.exp(dt * lin / 2.0)

        if self.scheme is Scheme.ETDRK4:
            roots = np.exp(2j * np.pi * (np.arange(1, contour_points + 1) - 0.5) / contour_points)
            LR = dt * lin[:, None] + roots[None, :]
            exp_lr = np.exp(LR)
            self.Q = dt * np.mean((np.exp(LR / 2.0) - 1.0) / LR, axis=1)
            self.f1 = dt * np.mean((-4.0 - LR + exp_lr * (4.0 - 3.0 * LR + LR**2)) / LR**3, axis=1)
            self.f2 = dt * np.mean((2.0 + LR + exp_lr * (-2.0 + LR)) / LR**3, axis=1)
            self.f3 = dt * np.mean((-4.0 - 3.0 * LR - LR**2 + exp_lr * (4.0 - LR)) / LR**3, axis=1)

    def step(self, v: np.ndarray, nonlinear: SpectralMap) -> np.ndarray:
        if self.scheme is Scheme.ETDRK4:
            Nv = nonlinear(v)
            a = self.E2 * v + self.Q * Nv
            Na = nonlinear(a)
            b = self.E2 * v + self.Q * Na
            Nb = nonlinear(b)
            c = self.E2 * a + self.Q * (2.0 * Nb - Nv)
            Nc = nonlinear(c)
            return self.E * v + Nv * self.f1 + 2.0 * (Na + Nb) * self.f2 + Nc * self.f3

        h = self.dt
        k1 = h * nonlinear(v)
        k2 = h * nonlinear(self.E2 * (v + 0.5 * k1))
        k3 = h * nonlinear(self.E2 * v + 0.5 * k2)
        k4 = h * nonlinear(self.E * v + self.E2 * k3)
        return self.E * v + (self.E * k1 + 2.0 * self.E2 * (k2 + k3) + k4) / 6.0


def _dispersion(grid: Grid, drift: float) -> np.ndarray:
    """i k|k| + i k drift, Nyquist removed"""
    k = grid.wavenumbers
    symbol = 1j * k * np.abs(k) + drift * derivative_symbol(grid)
    symbol[-1] = 0.0
    return symbol


@lru_cache(maxsize=32)
def _integrator(grid: Grid, cfg: StepperConfig, drift: float) -> SpectralIntegrator:
    logger.debug(f"Building {cfg.scheme.value} coefficients for n={grid.n}, dt={cfg.dt}, drift={drift}")
    return SpectralIntegrator(_dispersion(grid, drift), cfg.dt, cfg.scheme)


def _project(grid: Grid, cfg: StepperConfig, coefficients: np.ndarray) -> np.ndarray:
    projected = np.array(coefficients, dtype=np.complex128)
    projected[-1] = 0.0
    if cfg.dealias:
        projected *= grid.dealias_mask
    return projected


def _mask(grid: Grid, cfg: StepperConfig):
    return grid.dealias_mask.astype(np.float64) if cfg.dealias else 1.0


# Flow definitions ------------------------------------------------------------------

class _Flow:
    """One flow: its integrator, its nonlinear term and the invariants it records."""

    name = "flow"

    def __init__(self, grid: Grid, cfg: StepperConfig, drift: float):
        self.grid = grid
        self.cfg = cfg
        self.integrator = _integrator(grid, cfg, drift)
        self.dx = derivative_symbol(grid)
        self.mask = _mask(grid, cfg)

    def physical(self, v: np.ndarray) -> np.ndarray:
        return np.fft.irfft(v, n=self.grid.n)

    def nonlinear(self, v: np.ndarray, t: float) -> np.ndarray:
        raise NotImplementedError

    def record(self, f: Field) -> Dict[str, float]:
        raise NotImplementedError

    def step(self, v: np.ndarray, t: float) -> np.ndarray:
        return self.integrator.step(v, lambda w: self.nonlinear(w, t))


class _BOFlow(_Flow):
    name = "bo"

    def nonlinear(self, v, t):
        u = self.physical(v)
        return -0.5 * self.dx * self.mask * np.fft.rfft(u * u)

    def record(self, f):
        mass, energy = invariants(f)
        return {"mass": mass, "energy": energy}


class _EtaFlow(_Flow):
    name = "eta"

    def __init__(self, grid, cfg, rho_dot: RhoDot):
        super().__init__(grid, cfg, drift=1.0)
        self.q = profiles.soliton(SolitonParams(), grid).values
        self.q_hat = np.fft.rfft(self.q)
        self.rho_dot = rho_dot

    def speed_offset(self, t: float) -> float:
        rho_dot = self.rho_dot(t) if callable(self.rho_dot) else self.rho_dot
        return float(rho_dot) - 1.0

    def nonlinear(self, v, t):
        eta = self.physical(v)
        products = np.fft.rfft(self.q * eta + 0.5 * eta * eta)
        return self.dx * (-self.mask * products + self.speed_offset(t) * (self.q_hat + v))

    def record(self, f):
        full = Field(self.grid, f.values + self.q)
        _, energy = invariants(full)
        return {"mass": f.inner(f), "energy": energy}


class _WFlow(_Flow):
    name = "w"

    def __init__(self, grid, cfg, beta_mode: BetaMode):
        super().__init__(grid, cfg.model_copy(update={"frame_speed": 0.0}), drift=1.0)
        self.q = profiles.soliton(SolitonParams(), grid).values
        self.kernel = linops.kernel_profiles(grid)
        self.q_prime_hat = np.fft.rfft(self.kernel.q_prime.values)
        self.beta_mode = BetaMode(beta_mode)
        self.last_beta = 0.0

    def beta(self, w: np.ndarray) -> float:
        if self.beta_mode is BetaMode.ZERO:
            return 0.0
        return linops.beta_from_w(Field(self.grid, w))

    def nonlinear(self, v, t):
        w = self.physical(v)
        return -self.dx * np.fft.rfft(self.q * w) + self.beta(w) * self.q_prime_hat

    def record(self, f):
        lw = linops.apply_L(f)
        return {
            "mass": f.inner(f),
            "energy": lw.inner(f),
            "w_dot_q": f.inner(Field(self.grid, self.q)),
            "w_dot_q_prime": f.inner(self.kernel.q_prime),
            "beta": self.beta(f.values),
        }


# Public stepping API ----------------------------------------------------------------

def _advance(flow: _Flow, u: Field, cfg: StepperConfig, project: bool) -> Field:
    v = np.fft.rfft(u.values)
    if project:
        v = _project(u.grid, cfg, v)
    return Field.from_spectrum(u.grid, flow.step(v, 0.0))


def step_bo(u: Field, cfg: StepperConfig) -> Field:
    """One step of u_t + H u_xx + u u_x = 0 (lab frame unless frame_speed != 0)"""
    return _advance(_BOFlow(u.grid, cfg, cfg.frame_speed), u, cfg, project=True)


def step_eta(eta: Field, rho_dot: float, cfg: StepperConfig) -> Field:
    return _advance(_EtaFlow(eta.grid, cfg, rho_dot), eta, cfg, project=True)


def step_linearized_w(w: Field, beta_mode: BetaMode, cfg: StepperConfig) -> Field:
    return _advance(_WFlow(w.grid, cfg, beta_mode), w, cfg, project=False)


def check_stage_stability(u0: Field, cfg: StepperConfig) -> float:
    """Advective RK4 stage number dt * k_cut * max|u0|; warns above the RK4 limit."""
    k_top = u0.grid.k_cut if cfg.dealias else float(u0.grid.wavenumbers[-2])
    number = cfg.dt * k_top * (u0.max_abs() + abs(cfg.frame_speed))
    if number > RK4_STAGE_LIMIT:
        logger.warning(
            f"Stage number {number:.3g} exceeds {RK4_STAGE_LIMIT}; reduce dt for stable RK4 stages"
        )
    return number


def _run(flow: _Flow, u0: Field, T: float, cadence: float, project: bool,
         extra: Optional[Dict[str, object]] = None) -> Trajectory:
    cfg = flow.cfg
    if not T > 0:
        raise ValueError(ERRORS["nonpositive"].format("T", T))
    if not cadence > 0:
        raise ValueError(ERRORS["nonpositive"].format("cadence", cadence))

    grid = u0.grid
    n_steps = max(1, int(round(T / cfg.dt)))
    stride = max(1, int(round(cadence / cfg.dt)))

    v = np.fft.rfft(u0.values)
    if project:
        v = _project(grid, cfg, v)

    times: List[float] = []
    snapshots: List[Field] = []
    records: Dict[str, List[float]] = {}

    def capture(step_index: int, field_now: Field):
        times.append(step_index * cfg.dt)
        snapshots.append(field_now)
        for key, value in flow.record(field_now).items():
            records.setdefault(key, []).append(value)

    def partial() -> Trajectory:
        return _trajectory(flow, times, snapshots, records, extra)

    capture(0, Field.from_spectrum(grid, v))
    for step_index in range(1, n_steps + 1):
        t = (step_index - 1) * cfg.dt
        v = flow.step(v, t)
        values = np.fft.irfft(v, n=grid.n)
        peak = float(np.max(np.abs(values)))
        if not np.isfinite(peak) or peak > BLOWUP_THRESHOLD:
            message = ERRORS["blowup"].format(step_index, step_index * cfg.dt, peak)
            logger.error(message)
            raise BlowupError(message, step=step_index, time=step_index * cfg.dt, partial=partial())
        if step_index % stride == 0 or step_index == n_steps:
            capture(step_index, Field(grid, values))

    logger.info(f"Finished {flow.name} run: {n_steps} steps, {len(snapshots)} snapshots")
    return partial()


def _trajectory(flow, times, snapshots, records, extra) -> Trajectory:
    invariants_series = {key: np.asarray(values) for key, values in records.items()}
    beta = invariants_series.pop("beta", None)
    return Trajectory(
        times=np.asarray(times),
        snapshots=list(snapshots),
        invariants=invariants_series,
        beta_series=beta,
        frame_speed=flow.cfg.frame_speed if flow.name == "bo" else 1.0,
        flow=flow.name,
        **(extra or {}),
    )


def run(u0: Field, T: float, cfg: StepperConfig, cadence: float) -> Trajectory:
    """Deterministic BO run with snapshots every `cadence` time units"""
    check_stage_stability(u0, cfg)
    return _run(_BOFlow(u0.grid, cfg, cfg.frame_speed), u0, T, cadence, project=True)


def run_eta(eta0: Field, T: float, cfg: StepperConfig, cadence: float,
            rho_dot: RhoDot = 1.0) -> Trajectory:
    return _run(_EtaFlow(eta0.grid, cfg, rho_dot), eta0, T, cadence, project=True)


def run_linearized_w(w0: Field, T: float, cfg: StepperConfig, cadence: float,
                     beta_mode: BetaMode = BetaMode.CLOSED_LOOP) -> Trajectory:
    return _run(_WFlow(w0.grid, cfg, beta_mode), w0, T, cadence, project=False)
