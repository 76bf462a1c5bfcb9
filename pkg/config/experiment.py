"""Experiment configuration: a flat key=value file validated by pydantic.

Every key has a default, so an empty file is a valid configuration. Keys are
documented in docs/config.md.
"""
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from config.settings import (
    DEFAULT_DT,
    DEFAULT_GRID_LENGTH,
    DEFAULT_GRID_N,
    ERRORS,
    MIN_GRID_N,
    MIN_SEPARATION,
    MIN_SPECTRUM_GRID_N,
)
from core.errors import ConfigError
from core.profiles import SolitonParams
from services.evolution import BetaMode, Scheme, StepperConfig
from services.initial_data import PerturbationKind


class ExperimentTag(str, Enum):
    SOLITON_TRANSLATE = "soliton_translate"
    STABILITY = "stability"
    ASYMPTOTIC = "asymptotic"
    MULTISOLITON = "multisoliton"
    SPECTRUM = "spectrum"
    MONOTONICITY_SWEEP = "monotonicity_sweep"
    IDENTITY_SUITE = "identity_suite"
    LINEAR_LIOUVILLE = "linear_liouville"


def _split_floats(value) -> Tuple[float, ...]:
    if isinstance(value, str):
        return tuple(float(part) for part in value.split(",") if part.strip())
    return tuple(value)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    experiment: ExperimentTag = ExperimentTag.SOLITON_TRANSLATE

    # grid and stepping
    grid_n: int = DEFAULT_GRID_N
    grid_length: float = Field(default=DEFAULT_GRID_LENGTH, gt=0)
    dt: float = Field(default=DEFAULT_DT, gt=0)
    scheme: Scheme = Scheme.ETDRK4
    dealias: bool = True
    frame_speed: float = 0.0
    T: float = Field(default=10.0, gt=0)
    cadence: float = Field(default=0.5, gt=0)

    # soliton and initial perturbation
    c: float = Field(default=1.0, gt=0)
    soliton_center: float = 0.0
    perturbation_kind: PerturbationKind = PerturbationKind.RANDOM_BANDLIMITED
    perturbation_amplitude: float = Field(default=0.01, ge=0)
    orthogonalize: bool = True
    seed: Optional[int] = 1

    # weights and monotonicity
    A: float = Field(default=20.0, gt=1)
    lam: float = Field(default=0.5, gt=0, lt=1)
    x0_list: Tuple[float, ...] = (5.0, 10.0, 20.0)
    cplus_weight_scale: float = Field(default=2.0, gt=1)
    cplus_tail_fraction: float = Field(default=1.0 / 3.0, gt=0, le=1)
    decay_y0_list: Tuple[float, ...] = (10.0, 20.0)
    bound_A_list: Tuple[float, ...] = (2.0, 8.0, 32.0)

    # multi-soliton
    solitons: Tuple[SolitonParams, ...] = (
        SolitonParams(c=1.0, x0=-120.0),
        SolitonParams(c=2.0, x0=-20.0),
    )
    min_separation: float = Field(default=MIN_SEPARATION, gt=0)

    # spectrum and identities
    spectrum_n: int = 2048
    n_lowest: int = Field(default=8, ge=1)
    traversal_eps: Tuple[float, ...] = (0.01, 0.1)
    green_y_max: float = Field(default=40.0, gt=0)
    green_layers: int = Field(default=96, ge=1)

    # linear w-flow
    beta_mode: BetaMode = BetaMode.CLOSED_LOOP
    virial_A: Optional[float] = None

    @field_validator("x0_list", "decay_y0_list", "bound_A_list", "traversal_eps", mode="before")
    @classmethod
    def _parse_float_list(cls, value):
        return _split_floats(value)

    @field_validator("solitons", mode="before")
    @classmethod
    def _parse_solitons(cls, value):
        if isinstance(value, str):
            entries = []
            for part in value.split(";"):
                if not part.strip():
                    continue
                speed, _, center = part.partition("@")
                entries.append(SolitonParams(c=float(speed), x0=float(center or 0.0)))
            return tuple(entries)
        return value

    @field_validator("seed", "virial_A", mode="before")
    @classmethod
    def _empty_is_none(cls, value):
        return None if value == "" else value

    @model_validator(mode="after")
    def _check(self):
        if self.grid_n % 2 or self.grid_n < MIN_GRID_N:
            raise ValueError(ERRORS["grid_size"].format(MIN_GRID_N, self.grid_n))
        if self.spectrum_n % 2 or self.spectrum_n < MIN_SPECTRUM_GRID_N:
            raise ValueError(ERRORS["spectrum_grid"].format(MIN_SPECTRUM_GRID_N, self.spectrum_n))
        if self.perturbation_kind is PerturbationKind.RANDOM_BANDLIMITED and self.seed is None:
            raise ValueError(ERRORS["missing_seed"].format(self.perturbation_kind.value))
        centers = [s.x0 for s in self.solitons]
        if any(b - a < self.min_separation for a, b in zip(centers, centers[1:])):
            raise ValueError(ERRORS["unordered"].format(self.min_separation, centers))
        if any(x0 <= 1 for x0 in self.x0_list):
            raise ValueError(f"x0_list entries must exceed 1: got {self.x0_list}")
        return self

    @property
    def stepper(self) -> StepperConfig:
        return StepperConfig(
            dt=self.dt, scheme=self.scheme, dealias=self.dealias, frame_speed=self.frame_speed
        )

    @property
    def soliton(self) -> SolitonParams:
        return SolitonParams(c=self.c, x0=self.soliton_center)


def _render(value) -> str:
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        if value and isinstance(value[0], SolitonParams):
            return ";".join(f"{s.c!r}@{s.x0!r}" for s in value)
        return ",".join(_render(v) for v in value)
    return str(value)


def dump_experiment_config(cfg: ExperimentConfig) -> str:
    lines = [f"{name}={_render(getattr(cfg, name))}" for name in ExperimentConfig.model_fields]
    return "\n".join(lines) + "\n"


def parse_overrides(overrides: Iterable[str]) -> Dict[str, str]:
    parsed = {}
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(ERRORS["config_parse"].format(f"override {item!r} is not key=value"))
        parsed[key.strip()] = value.strip()
    return parsed


def build_experiment_config(values: Dict[str, object]) -> ExperimentConfig:
    unknown = sorted(set(values) - set(ExperimentConfig.model_fields))
    if unknown:
        raise ConfigError(ERRORS["unknown_key"].format(", ".join(unknown)))
    try:
        return ExperimentConfig(**values)
    except ValidationError as e:
        raise ConfigError(ERRORS["config_parse"].format(str(e))) from e


def load_experiment_config(
    path: Optional[Path] = None,
    overrides: Iterable[str] = (),
    seed: Optional[int] = None,
) -> ExperimentConfig:
    """File values, then --override pairs, then --seed; later sources win."""
    values: Dict[str, object] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(ERRORS["config_parse"].format(f"no such file {path}"))
        values.update({k: ("" if v is None else v) for k, v in dotenv_values(path).items()})
    values.update(parse_overrides(overrides))
    if seed is not None:
        values["seed"] = seed
    return build_experiment_config(values)
