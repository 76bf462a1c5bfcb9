"""Named desk-scale experiments: initial data -> evolve -> modulate -> monitor -> persist."""
from pathlib import Path
from typing import Any, Callable, Dict, List

import numpy as np

from config.experiment import ExperimentConfig, ExperimentTag, dump_experiment_config
from core import linops, profiles
from core.errors import BlowupError, LabError, ModulationError
from core.profiles import SolitonParams, WeightParams
from core.spectral_ops import (
    Field,
    Grid,
    derivative,
    gn_ratio,
    green_identity_residual,
    hilbert,
    sobolev_norm,
)
from services import evolution, modulation, monitors
from services.artifact_store import ArtifactStore, RunManifest, now_iso
from services.initial_data import build_perturbation, even_bump
from utils.detailed_logger import DetailedLogger


class ExperimentRunner:
    """Runs one ExperimentConfig into one output directory."""

    def __init__(self, cfg: ExperimentConfig, out_dir: Path):
        self.cfg = cfg
        self.store = ArtifactStore(out_dir)
        self.logger = DetailedLogger(f"experiment_{cfg.experiment.value}")
        self.summary: Dict[str, Any] = {}
        self.pipelines: Dict[ExperimentTag, Callable[[], None]] = {
            ExperimentTag.SOLITON_TRANSLATE: self.soliton_translate,
            ExperimentTag.STABILITY: self.stability,
            ExperimentTag.ASYMPTOTIC: self.asymptotic,
            ExperimentTag.MULTISOLITON: self.multisoliton,
            ExperimentTag.SPECTRUM: self.spectrum,
            ExperimentTag.MONOTONICITY_SWEEP: self.monotonicity_sweep,
            ExperimentTag.IDENTITY_SUITE: self.identity_suite,
            ExperimentTag.LINEAR_LIOUVILLE: self.linear_liouville,
        }

    @property
    def grid(self) -> Grid:
        return Grid(self.cfg.grid_n, self.cfg.grid_length)

    def run(self) -> RunManifest:
        cfg = self.cfg
        manifest = RunManifest(
            experiment=cfg.experiment.value,
            config=cfg.model_dump(mode="json"),
            started=now_iso(),
        )
        self.store.write_text("config.env", dump_experiment_config(cfg))
        self.logger.info("Experiment started", experiment=cfg.experiment.value, out_dir=str(self.store.out_dir))

        outcome, error = "completed", None
        try:
            self.pipelines[cfg.experiment]()
        except ModulationError as e:
            outcome, error = "tube_exit", str(e)
            self.summary["modulation_diagnostics"] = e.diagnostics
            self.logger.error("Modulation left the tube", error=e, **e.diagnostics)
        except BlowupError as e:
            outcome, error = "blowup", str(e)
            self.summary.update({"blowup_step": e.step, "blowup_time": e.time})
            if e.partial is not None and len(e.partial):
                self.store.store_field("u_last_finite", e.partial.snapshots[-1])
                self._emit_invariants(e.partial)
            self.logger.error("Time stepping blew up", error=e, step=e.step, time=e.time)
        except LabError as e:
            outcome, error = "failed", str(e)
            self.logger.error("Experiment failed", error=e)

        final = manifest.model_copy(update={
            "finished": now_iso(),
            "outcome": outcome,
            "error": error,
            "summary": _plain(self.summary),
            "files": self.store.inventory(),
        })
        self.store.write_manifest(final)
        self.logger.info("Experiment finished", outcome=outcome, summary=final.summary)
        self.logger.close()
        return final

    # helpers ------------------------------------------------------------------------------

    def _evolve(self, u0: Field) -> evolution.Trajectory:
        cfg = self.cfg
        self.store.store_field("u0", u0)
        traj = evolution.run(u0, cfg.T, cfg.stepper, cfg.cadence)
        self.store.store_field("u_final", traj.snapshots[-1])
        self._emit_invariants(traj)
        self.summary["mass_drift"] = traj.relative_drift("mass")
        self.summary["energy_drift"] = traj.relative_drift("energy")
        self.logger.info(
            "Evolution finished", snapshots=len(traj),
            mass_drift=self.summary["mass_drift"], energy_drift=self.summary["energy_drift"],
        )
        return traj

    def _emit_invariants(self, traj: evolution.Trajectory):
        self.store.emit_metrics(
            monitors.MonitorSeries(key, traj.times, values) for key, values in traj.invariants.items()
        )

    def _perturbed_soliton(self) -> Field:
        cfg = self.cfg
        grid = self.grid
        perturbation = build_perturbation(
            cfg.perturbation_kind, grid, cfg.perturbation_amplitude, seed=cfg.seed,
            center=cfg.soliton_center,
            orthogonal_to=cfg.soliton if cfg.orthogonalize else None,
        )
        return profiles.soliton(cfg.soliton, grid) + perturbation

    def _modulated(self, traj: evolution.Trajectory, states: List[modulation.ModulationState]):
        cfg = self.cfg
        initial = modulation.fit_scale_and_translation(traj.snapshots[0], cfg.soliton)
        self.summary["c_fit"] = initial.c
        self.logger.info("Initial scale fit", c=initial.c, rho=initial.rho)
        modulated = modulation.modulate_trajectory(traj, initial.c, initial.rho, states=states)
        m = modulated.modulation
        self.store.emit_metrics([
            monitors.MonitorSeries("rho", traj.times, m.rho),
            monitors.MonitorSeries("eta_norm", traj.times, m.eta_norm),
            monitors.MonitorSeries("ortho_defect", traj.times, m.ortho_defect),
        ])
        return modulated

    def _localized(self, traj: evolution.Trajectory) -> monitors.MonitorSeries:
        series = monitors.localized_distance_series(traj, origin=self.cfg.soliton_center)
        self.store.emit_metrics([series])
        self.summary["localized_distance_final"] = float(series.values[-1])
        self.summary["localized_decay_ratio"] = monitors.decay_ratio(series)
        return series

    def _pair_reports(self, traj, etas):
        cfg = self.cfg
        w = WeightParams(A=cfg.A)
        surface = {}
        for x0 in cfg.x0_list:
            right = monitors.monotonicity_right(traj, x0, cfg.lam, w)
            left = monitors.monotonicity_left(traj, x0, cfg.lam, w)
            eta_report = monitors.eta_monotonicity(traj, x0, cfg.lam, w, etas=etas)
            for report in (right, left, eta_report):
                self.store.emit_records(report.label, report.records())
            surface[f"{x0:g}"] = {
                "right_worst_margin": right.worst_margin,
                "right_c_meas": right.c_meas,
                "left_worst_margin": left.worst_margin,
                "left_c_meas": left.c_meas,
                "eta_c_meas": eta_report.c_meas,
            }
        self.summary["monotonicity"] = surface
        self.summary["worst_monotonicity_margin"] = min(
            min(v["right_worst_margin"], v["left_worst_margin"]) for v in surface.values()
        )

    # pipelines ----------------------------------------------------------------------------

    def soliton_translate(self):
        cfg = self.cfg
        traj = self._evolve(profiles.soliton(cfg.soliton, self.grid))
        travelled = SolitonParams(c=cfg.c, x0=cfg.soliton_center + (cfg.c - cfg.frame_speed) * traj.times[-1])
        exact = profiles.soliton(travelled, self.grid)
        self.summary["relative_l2_drift"] = (traj.snapshots[-1] - exact).norm() / exact.norm()

    def stability(self):
        cfg = self.cfg
        traj = self._evolve(self._perturbed_soliton())
        states: List[modulation.ModulationState] = []
        traj = self._modulated(traj, states)
        tube = [sobolev_norm(s.eta_lab, 0.5) for s in states]
        self.summary["tube_distance"] = float(np.max(tube))
        self.summary["rho_dot_bound_ratio"] = float(max(modulation.rho_dot_bound_ratio(s) for s in states))
        self._localized(traj)

        kato = monitors.kato_residual(
            traj, WeightParams(A=cfg.A, shift=cfg.soliton_center), weight_speed=cfg.c
        )
        self.store.emit_metrics([kato])
        self.summary["kato_residual_max"] = kato.max_abs()
        self._pair_reports(traj, [s.eta for s in states])

    def asymptotic(self):
        cfg = self.cfg
        traj = self._evolve(self._perturbed_soliton())
        states: List[modulation.ModulationState] = []
        traj = self._modulated(traj, states)
        self._localized(traj)

        c_plus = modulation.estimate_c_plus(
            traj, cfg.cplus_weight_scale, tail_fraction=cfg.cplus_tail_fraction, origin=cfg.soliton_center
        )
        self.summary["c_plus"] = c_plus
        self.summary["c_mass_matched"] = modulation.mass_matched_speed(traj.snapshots[0])
        series = monitors.decay_limits(traj, cfg.A, cfg.decay_y0_list, origin=cfg.soliton_center)
        series.append(monitors.stability_functional(traj, c_plus))
        series.append(monitors.local_energy_decay(traj, [s.eta for s in states]))
        self.store.emit_metrics(series)
        far_band = next(s for s in series if s.label == "far_band")
        self.summary["far_band_final"] = float(far_band.values[-1])

    def multisoliton(self):
        cfg = self.cfg
        grid = self.grid
        solitons = list(cfg.solitons)
        base = profiles.multisoliton_sum(solitons, grid, min_gap=cfg.min_separation)
        perturbation = build_perturbation(
            cfg.perturbation_kind, grid, cfg.perturbation_amplitude, seed=cfg.seed,
            center=0.5 * (solitons[0].x0 + solitons[-1].x0),
        )
        traj = self._evolve(base + perturbation)
        history = modulation.decompose_trajectory(traj, solitons, min_gap=cfg.min_separation)

        speeds = np.array([[s.c for s in states] for states in history])
        centers = np.array([[s.rho for s in states] for states in history])
        labels = [f"soliton_{j}" for j in range(len(solitons))]
        series = []
        for j, label in enumerate(labels):
            series.append(monitors.MonitorSeries(f"{label}_c", traj.times, speeds[:, j]))
            series.append(monitors.MonitorSeries(f"{label}_rho", traj.times, centers[:, j]))

        origin = solitons[0].x0
        cutoff_speed = 0.1 * min(s.c for s in solitons) - traj.frame_speed
        distances = []
        for t, u, states in zip(traj.times, traj.snapshots, history):
            reference = grid.zeros()
            for state in states:
                reference = reference + state.soliton
            distances.append(monitors.localized_norm(u - reference, origin + cutoff_speed * t))
        distance = monitors.MonitorSeries("localized_distance", traj.times, distances)
        series.append(distance)
        self.store.emit_metrics(series)

        velocities = np.gradient(centers, traj.times, axis=0)
        self.summary["max_speed_change"] = float(np.max(np.abs(speeds - speeds[0])))
        if len(solitons) > 1:
            self.summary["min_relative_velocity"] = float(np.min(np.diff(velocities, axis=1)))
        self.summary["localized_distance_final"] = distances[-1]
        self.summary["localized_decay_ratio"] = monitors.decay_ratio(distance)

    def spectrum(self):
        cfg = self.cfg
        grid = Grid(cfg.spectrum_n, cfg.grid_length)
        a0, a1 = linops.even_eigen_coefficients()
        oracle = {f"a={a:.6f}": linops.fourier_eigen_oracle(a) for a in (a0, a1)}
        self.summary["fourier_oracle"] = {
            key: {"eigenvalue": o.eigenvalue, "residual": o.residual} for key, o in oracle.items()
        }

        L = linops.assemble(linops.OperatorKind.L, grid)
        report = linops.spectrum(L, cfg.n_lowest)
        named = {
            "f0": profiles.profile_f0(grid),
            "Qprime": profiles.soliton_derivative(SolitonParams(), grid),
            "f1": profiles.profile_f1(grid),
        }
        q = profiles.soliton(SolitonParams(), grid)
        constrained = linops.constrained_rayleigh_min(
            L, [q, named["Qprime"]], labels=["Q", "Qprime"]
        )
        ltilde = linops.assemble(linops.OperatorKind.LTILDE, grid)
        dual = linops.constrained_rayleigh_min(
            ltilde, [profiles.profile_S(grid)], metric=linops.Metric.H_HALF, labels=["S"]
        )
        text = [report.to_text(named), constrained.to_text(), dual.to_text()]

        scaled = {}
        for c in (0.5, 1.0, 2.0):
            L_c = linops.assemble(linops.OperatorKind.L_C, grid, c=c)
            scaled[f"{c:g}"] = linops.spectrum(L_c, 3).eigenvalues.tolist()
        traversal = [
            linops.traversal_check(eps, grid, L_matrix=L, Ltilde_matrix=ltilde).as_record()
            for eps in cfg.traversal_eps
        ]
        self.store.write_text("spectrum.txt", "\n".join(text))
        self.store.emit_records("traversal", traversal)

        self.summary.update({
            "eigenvalues": report.eigenvalues.tolist(),
            "expected": [-(1.0 + profiles.SQRT5) / 2.0, 0.0, (profiles.SQRT5 - 1.0) / 2.0],
            "correlations": {k: v[:3] for k, v in report.correlations(named).items()},
            "count_below_0.75": report.count_below(0.75),
            "count_below_0.95": report.count_below(0.95),
            "L_min_Q_Qprime": constrained.rayleigh_min,
            "Ltilde_min_S": dual.rayleigh_min,
            "L_c_lowest": scaled,
            "max_residual": float(np.max(report.residuals)),
        })

    def monotonicity_sweep(self):
        cfg = self.cfg
        traj = self._evolve(self._perturbed_soliton())
        states: List[modulation.ModulationState] = []
        traj = self._modulated(traj, states)
        etas = [s.eta for s in states]
        self._pair_reports(traj, etas)
        self.summary["decroissance"] = monitors.decroissance_constant(
            cfg.x0_list, (0.0, 10.0, 40.0), A=cfg.A, lam=cfg.lam
        ).tolist()

        corpus = traj.snapshots[:: max(1, len(traj) // 8)]
        first = monitors.firstterm_table(corpus, cfg.bound_A_list)
        second = monitors.secondterm_table(corpus, cfg.bound_A_list)
        cubic = {
            f"{A:g}": max(monitors.cubic_weight_bound(eta, WeightParams(A=A))["ratio"] for eta in etas)
            for A in cfg.bound_A_list
        }
        self.summary["firstterm_max"] = {f"{k:g}": v for k, v in first.max_by_A().items()}
        self.summary["secondterm_max"] = {f"{k:g}": v for k, v in second.max_by_A().items()}
        self.summary["cubic_ratio_max"] = cubic

    def identity_suite(self):
        cfg = self.cfg
        grid = self.grid
        q = profiles.soliton(SolitonParams(), grid)
        q1 = profiles.soliton_derivative(SolitonParams(), grid)
        s = profiles.profile_S(grid)
        t = profiles.profile_T(grid)
        residuals = {
            "L_Qprime": linops.apply_L(q1).norm(),
            "L_S_plus_Q": (linops.apply_L(s) + q).norm(),
            "L_T_minus_S": (linops.apply_L(t) - s).norm(),
            "L_Q_plus_half_Q2": (linops.apply_L(q) + 0.5 * q * q).norm(),
            "soliton_equation": profiles.soliton_residual(grid).norm(),
            "HQprime_plus_S": (hilbert(derivative(q)) + s).max_abs(),
        }
        inner = {
            "S_Q": s.inner(q),
            "S_T": s.inner(t),
            "T_Q": t.inner(q),
            "half_int_Q2": 0.5 * q.inner(q),
            "int_S2": s.inner(s),
        }
        self.summary["operator_residuals"] = residuals
        self.summary["periodization_floor"] = profiles.periodization_floor(grid)
        self.summary["inner_products"] = inner
        self.summary["closed_form_integrals"] = profiles.verify_closed_form_integrals()
        self.summary["green_residual"] = green_identity_residual(
            q, 5.0, cfg.green_y_max, cfg.green_layers
        )
        bump = even_bump(grid)
        self.summary["gn_ratio_soliton"] = gn_ratio(q)
        self.summary["claim_tech"] = monitors.claim_tech_bounds(bump, 4.0)
        self.summary["weight_comparability"] = {
            f"{A:g}": profiles.weight_comparability(A) for A in (2.0, 10.0, 50.0)
        }

    def linear_liouville(self):
        cfg = self.cfg
        grid = self.grid
        q = profiles.soliton(SolitonParams(), grid)
        q1 = profiles.soliton_derivative(SolitonParams(), grid)
        w0 = _orthogonalize(even_bump(grid, center=3.0), [q, q1])
        w0 = (cfg.perturbation_amplitude or 1.0) / w0.norm() * w0
        self.store.store_field("w0", w0)

        traj = evolution.run_linearized_w(w0, cfg.T, cfg.stepper, cfg.cadence, beta_mode=cfg.beta_mode)
        self.store.store_field("w_final", traj.snapshots[-1])
        virial = monitors.virial_linear_w(traj, A=cfg.virial_A)
        series = [monitors.MonitorSeries(k, traj.times, v) for k, v in traj.invariants.items()]
        if traj.beta_series is not None:
            series.append(monitors.MonitorSeries("beta", traj.times, traj.beta_series))
        series.extend(virial.series())
        self.store.emit_metrics(series)

        energy = traj.energy
        self.summary.update({
            "quadratic_energy_drift": float(np.max(np.abs(energy - energy[0]))),
            "max_w_dot_q": float(np.max(np.abs(traj.invariants["w_dot_q"]))),
            "max_w_dot_q_prime": float(np.max(np.abs(traj.invariants["w_dot_q_prime"]))),
            "virial_residual": virial.residual,
            "virial_dispersive_max": float(np.max(virial.dispersive_term)),
        })


def _orthogonalize(f: Field, basis: List[Field]) -> Field:
    """Remove the span of `basis` from f (Gram solve in the grid inner product)"""
    gram = np.array([[a.inner(b) for b in basis] for a in basis])
    rhs = np.array([f.inner(b) for b in basis])
    coefficients = np.linalg.solve(gram, rhs)
    for coefficient, direction in zip(coefficients, basis):
        f = f - coefficient * direction
    return f


def _plain(value):
    """numpy scalars and arrays to plain Python for the manifest"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def run_experiment(cfg: ExperimentConfig, out_dir: Path) -> RunManifest:
    return ExperimentRunner(cfg, Path(out_dir)).run()
