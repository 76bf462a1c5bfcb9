"""Orthogonal decomposition u = Q_c(. - rho) + eta and its multi-soliton version."""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from config.settings import (
    ERRORS,
    MIN_SEPARATION,
    NEWTON_MAX_ITER,
    NEWTON_TOL,
    TUBE_RADIUS_FRACTION,
)
from core import linops, profiles
from core.errors import ModulationError
from core.profiles import SolitonParams, WeightParams
from core.spectral_ops import Field, derivative
from services.evolution import ModulationSeries, Trajectory
from utils.logger import get_logger

logger = get_logger(__name__)

INT_Q2 = profiles.closed_form_integrals()["int_Q2"]


@dataclass(frozen=True, eq=False)
class ModulationState:
    """Result of one decomposition.

    eta is expressed in the soliton frame, eta(y) = u(y + rho) - Q_c(y);
    eta_lab = u - Q_c(. - rho) lives on the original nodes.
    """

    rho: float
    c: float
    eta: Field
    eta_lab: Field
    ortho_defect: float
    newton_iters: int

    @property
    def soliton(self) -> Field:
        return profiles.soliton(SolitonParams(c=self.c, x0=self.rho), self.eta.grid)

    def recompose(self) -> Field:
        return self.soliton + self.eta_lab


def _tube_check(distance: float, radius: float, rho: float):
    if distance > radius:
        raise ModulationError(
            ERRORS["outside_tube"].format(distance, radius),
            diagnostics={"distance": distance, "radius": radius, "rho_guess": rho},
        )


def fit_translation(u: Field, c: float, rho_guess: float = 0.0) -> ModulationState:
    """Newton solve of I(y) = int Q_c'(x) (u(x + y) - Q_c(x)) dx = 0.

    The translate u(. + y) is a spectral phase shift, so y is continuous.
    I'(y) = int (Q_c')^2 - int eta Q_c''.
    """
    if not c > 0:
        raise ValueError(ERRORS["nonpositive"].format("c", c))
    grid = u.grid
    centered = SolitonParams(c=c)
    q_c = profiles.soliton(centered, grid)
    q_c1 = profiles.soliton_derivative(centered, grid, order=1)
    q_c2 = profiles.soliton_derivative(centered, grid, order=2)
    q_c1_norm2 = q_c1.inner(q_c1)

    def residual(y: float):
        eta = u.translate(-y) - q_c
        return eta, eta.inner(q_c1)

    y = float(rho_guess)
    eta, value = residual(y)
    _tube_check(eta.norm(), TUBE_RADIUS_FRACTION * q_c.norm(), y)

    for iteration in range(1, NEWTON_MAX_ITER + 1):
        slope = q_c1_norm2 - eta.inner(q_c2)
        if slope <= 0:
            raise ModulationError(
                "Translation functional lost monotonicity",
                diagnostics={"rho": y, "slope": slope, "iteration": iteration},
            )
        step = value / slope
        candidate = y - step
        eta_new, value_new = residual(candidate)
        # Halve the step while the residual grows
        for _ in range(30):
            if abs(value_new) <= abs(value) or abs(step) <= NEWTON_TOL:
                break
            step *= 0.5
            candidate = y - step
            eta_new, value_new = residual(candidate)
        y, eta, value = candidate, eta_new, value_new
        if abs(step) <= NEWTON_TOL * max(1.0, abs(y)):
            break
    else:
        raise ModulationError(
            ERRORS["newton_diverged"].format(NEWTON_MAX_ITER, abs(value)),
            diagnostics={"rho": y, "residual": value},
        )

    eta_lab = u - profiles.soliton(SolitonParams(c=c, x0=y), grid)
    return ModulationState(
        rho=y,
        c=c,
        eta=eta,
        eta_lab=eta_lab,
        ortho_defect=abs(value),
        newton_iters=iteration,
    )


def rho_dot_estimate(state: ModulationState) -> float:
    """rho' = c + [int eta L_c(Q_c'') - 1/2 int eta^2 Q_c''] / [int (Q_c')^2 - int eta Q_c'']"""
    grid = state.eta.grid
    centered = SolitonParams(c=state.c)
    q_c1 = profiles.soliton_derivative(centered, grid, order=1)
    q_c2 = profiles.soliton_derivative(centered, grid, order=2)
    eta = state.eta
    numerator = eta.inner(linops.apply_L_c(q_c2, state.c)) - 0.5 * (eta * eta).inner(q_c2)
    denominator = q_c1.inner(q_c1) - eta.inner(q_c2)
    return state.c + numerator / denominator


def local_eta_norm(state: ModulationState) -> float:
    """(int eta^2 / (1 + x^2))^(1/2) in the soliton frame"""
    x = state.eta.grid.nodes
    return float(np.sqrt((state.eta * state.eta * (1.0 / (1.0 + x * x))).integral()))


def rho_dot_bound_ratio(state: ModulationState) -> float:
    """|rho' - c| / (int eta^2/(1+x^2))^(1/2); 0 when eta vanishes"""
    local = local_eta_norm(state)
    if local == 0.0:
        return 0.0
    return abs(rho_dot_estimate(state) - state.c) / local


def mass_matched_speed(u: Field) -> float:
    """c with int Q_c^2 = int u^2"""
    return u.inner(u) / INT_Q2


def estimate_c_plus(
    traj: Trajectory,
    A: float,
    tail_fraction: float = 1.0 / 3.0,
    origin: float = 0.0,
    weight_speed: float = 0.1,
) -> float:
    """Running max over the trajectory tail of int u^2 phi_A(x - origin - t/10), over pi int Q^2.

    origin + weight_speed * t is a lab-frame position, so snapshots from a
    co-moving run see the weight drift at weight_speed - frame_speed.
    """
    if not 0 < tail_fraction <= 1:
        raise ValueError(f"Tail fraction must lie in (0, 1]: got {tail_fraction}")
    times = traj.times
    relative_speed = weight_speed - traj.frame_speed
    start = times[-1] - tail_fraction * (times[-1] - times[0])
    values = [
        (u * u * profiles.phi_weight(WeightParams(A=A, shift=origin + relative_speed * t), u.grid)).integral()
        for t, u in zip(times, traj.snapshots)
        if t >= start
    ]
    return max(0.0, max(values)) / (np.pi * INT_Q2)


# Multi-soliton decomposition ----------------------------------------------------------

def multisoliton_decompose(
    u: Field,
    guesses: Sequence[SolitonParams],
    min_gap: float = MIN_SEPARATION,
) -> List[ModulationState]:
    """Newton solve for (c_j, rho_j) with int eta R_j = int eta (R_j)_x = 0.

    R_j = Q_{c_j}(. - rho_j) and eta = u - sum_j R_j. Each returned state carries
    the common eta; its eta field is shifted into the frame of soliton j.
    """
    if not guesses:
        raise ValueError("At least one soliton guess is required")
    profiles.validate_separation(guesses, min_gap)
    grid = u.grid
    count = len(guesses)
    params = np.array([[g.c, g.x0] for g in guesses], dtype=np.float64).ravel()

    def pieces(p: np.ndarray):
        solitons = [SolitonParams(c=p[2 * j], x0=p[2 * j + 1]) for j in range(count)]
        bumps = [profiles.soliton(s, grid) for s in solitons]
        eta = u
        for bump in bumps:
            eta = eta - bump
        return solitons, bumps, eta

    def system(p: np.ndarray):
        solitons, bumps, eta = pieces(p)
        slopes = [derivative(b) for b in bumps]
        values = np.empty(2 * count)
        for j in range(count):
            values[2 * j] = eta.inner(bumps[j])
            values[2 * j + 1] = eta.inner(slopes[j])
        return solitons, bumps, slopes, eta, values

    def jacobian(solitons, bumps, slopes, eta) -> np.ndarray:
        speed_dirs = [profiles.soliton_speed_derivative(s, grid) for s in solitons]
        speed_slopes = [derivative(d) for d in speed_dirs]
        curvatures = [derivative(s) for s in slopes]
        matrix = np.zeros((2 * count, 2 * count))
        for j in range(count):
            for k in range(count):
                # d eta / d c_k = -dR_k/dc, d eta / d rho_k = +(R_k)_x
                matrix[2 * j, 2 * k] = -speed_dirs[k].inner(bumps[j])
                matrix[2 * j, 2 * k + 1] = slopes[k].inner(bumps[j])
                matrix[2 * j + 1, 2 * k] = -speed_dirs[k].inner(slopes[j])
                matrix[2 * j + 1, 2 * k + 1] = slopes[k].inner(slopes[j])
            matrix[2 * j, 2 * j] += eta.inner(speed_dirs[j])
            matrix[2 * j, 2 * j + 1] -= eta.inner(slopes[j])
            matrix[2 * j + 1, 2 * j] += eta.inner(speed_slopes[j])
            matrix[2 * j + 1, 2 * j + 1] -= eta.inner(curvatures[j])
        return matrix

    solitons, bumps, slopes, eta, values = system(params)
    radius = TUBE_RADIUS_FRACTION * sum(b.norm() for b in bumps)
    _tube_check(eta.norm(), radius, float(params[1]))

    for iteration in range(1, NEWTON_MAX_ITER + 1):
        step = np.linalg.solve(jacobian(solitons, bumps, slopes, eta), values)
        candidate = params - step
        for _ in range(30):
            speeds = candidate[0::2]
            if np.all(speeds > 0):
                trial = system(candidate)
                if np.linalg.norm(trial[-1]) <= np.linalg.norm(values) or np.max(np.abs(step)) <= NEWTON_TOL:
                    break
            step = 0.5 * step
            candidate = params - step
        else:
            raise ModulationError(
                "Multi-soliton Newton step could not reduce the residual",
                diagnostics={"params": params.tolist(), "iteration": iteration},
            )
        params = candidate
        solitons, bumps, slopes, eta, values = trial

        centers = params[1::2]
        gaps = np.diff(centers)
        if gaps.size and np.min(gaps) < 0.5 * min_gap:
            raise ModulationError(
                ERRORS["collision"].format(float(np.min(gaps)), 0.5 * min_gap),
                diagnostics={"centers": centers.tolist(), "iteration": iteration},
            )
        if np.max(np.abs(step)) <= NEWTON_TOL * max(1.0, float(np.max(np.abs(params)))):
            break
    else:
        raise ModulationError(
            ERRORS["newton_diverged"].format(NEWTON_MAX_ITER, float(np.max(np.abs(values)))),
            diagnostics={"params": params.tolist()},
        )

    states = []
    for j, soliton in enumerate(solitons):
        states.append(
            ModulationState(
                rho=soliton.x0,
                c=soliton.c,
                eta=eta.translate(-soliton.x0),
                eta_lab=eta,
                ortho_defect=float(max(abs(values[2 * j]), abs(values[2 * j + 1]))),
                newton_iters=iteration,
            )
        )
    return states


def fit_scale_and_translation(u: Field, guess: SolitonParams) -> ModulationState:
    """Single-soliton case of multisoliton_decompose: int eta Q_c = int eta Q_c' = 0"""
    return multisoliton_decompose(u, [guess])[0]


def translation_sensitivity(
    u: Field, c: float, direction: Field, eps_list: Sequence[float] = (1e-4, 1e-3, 1e-2)
) -> Dict[str, float]:
    """|rho(u + eps d) - rho(u)| / (eps ||d||) for each eps and their maximum"""
    base = fit_translation(u, c)
    norm = direction.norm()
    ratios = {}
    for eps in eps_list:
        moved = fit_translation(u + eps * direction, c, rho_guess=base.rho)
        ratios[f"{eps:g}"] = abs(moved.rho - base.rho) / (eps * norm) if norm else 0.0
    ratios["lipschitz"] = max(ratios.values()) if ratios else 0.0
    return ratios


def modulate_trajectory(
    traj: Trajectory,
    c: float,
    rho0: float = 0.0,
    states: Optional[List[ModulationState]] = None,
) -> Trajectory:
    """Attach a (rho, c, ||eta||, defect) series, fitting each snapshot from the last rho.

    Snapshots in a moving frame drift at c - frame_speed. Fitted states are
    appended to `states` when a list is supplied.
    """
    drift = c - traj.frame_speed
    rho_series, eta_norms, defects = [], [], []
    rho = rho0
    previous_time = traj.times[0]
    for t, u in zip(traj.times, traj.snapshots):
        guess = rho + drift * (t - previous_time)
        try:
            state = fit_translation(u, c, rho_guess=guess)
        except ModulationError as e:
            logger.error(f"Modulation failed at t={t:.6g}: {str(e)}")
            e.diagnostics.setdefault("time", float(t))
            raise
        rho, previous_time = state.rho, t
        rho_series.append(state.rho)
        eta_norms.append(state.eta.norm())
        defects.append(state.ortho_defect)
        if states is not None:
            states.append(state)

    series = ModulationSeries(
        rho=np.asarray(rho_series),
        c=np.full(len(rho_series), float(c)),
        eta_norm=np.asarray(eta_norms),
        ortho_defect=np.asarray(defects),
    )
    return traj.with_modulation(series)


def decompose_trajectory(
    traj: Trajectory, guesses: Sequence[SolitonParams], min_gap: float = MIN_SEPARATION
) -> List[List[ModulationState]]:
    """multisoliton_decompose at every snapshot, each solve seeded by the last one"""
    current = list(guesses)
    previous_time = traj.times[0]
    history = []
    for t, u in zip(traj.times, traj.snapshots):
        dt = t - previous_time
        seeded = [
            SolitonParams(c=g.c, x0=g.x0 + (g.c - traj.frame_speed) * dt) for g in current
        ]
        try:
            states = multisoliton_decompose(u, seeded, min_gap=min_gap)
        except ModulationError as e:
            logger.error(f"Multi-soliton decomposition failed at t={t:.6g}: {str(e)}")
            e.diagnostics.setdefault("time", float(t))
            raise
        history.append(states)
        current = [SolitonParams(c=s.c, x0=s.rho) for s in states]
        previous_time = t
    return history
