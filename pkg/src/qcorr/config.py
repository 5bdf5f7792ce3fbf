"""Declarative job documents (YAML or JSON) and their translation to ensembles."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .analytic import collective_rate
from .cloud import CloudConfig, DetectionGeometry
from .dynamics import DriveParams
from .ensemble import EnsembleSpec


class ConfigError(ValueError):
    """Invalid or unreadable job configuration."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TauGrid(_Strict):
    start: float = 0.0
    stop: float = Field(gt=0)
    num: int = Field(ge=2)

    @field_validator("start")
    @classmethod
    def _starts_at_zero(cls, v):
        if v != 0.0:
            raise ValueError("delay grids must start at 0")
        return v


class LogSpace(_Strict):
    start: float = Field(gt=0)
    stop: float = Field(gt=0)
    num: int = Field(ge=1)


class SweepConfig(_Strict):
    parameter: Literal["sigma", "theta_deg", "detuning", "n_atoms"]
    values: Optional[list[float]] = None
    logspace: Optional[LogSpace] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.values is None) == (self.logspace is None):
            raise ValueError("give exactly one of 'values' or 'logspace'")
        return self

    def resolved(self) -> list[float]:
        if self.values is not None:
            return [float(v) for v in self.values]
        ls = self.logspace
        return [float(v) for v in np.logspace(math.log10(ls.start), math.log10(ls.stop), ls.num)]


class JobConfig(_Strict):
    """One simulation job.  Defaults: phi = 0, min_separation = 1e-3, ratio-of-averages."""

    name: str = "job"
    preset: Optional[str] = None
    model: Literal["single_excitation", "product", "classical", "analytic_td", "analytic_eberly"]
    quantity: Literal["g2", "g1", "r_factor"] = "g2"
    n_atoms: int = Field(ge=1)
    sigma: float = Field(ge=0)
    min_separation: float = Field(1e-3, gt=0)
    rabi: float = Field(0.01, ge=0)
    detuning: float = 0.0
    detuning_units: Literal["gamma", "gamma_n"] = "gamma"
    theta_deg: float = Field(90.0, ge=0, le=180)
    phi_deg: float = Field(0.0, ge=0, lt=360)
    t: Union[float, Literal["inf"]] = "inf"
    tau: Union[TauGrid, list[float]]
    tau_units: Literal["gamma", "gamma_n"] = "gamma"
    n_realizations: int = Field(1, ge=1)
    master_seed: int = Field(0, ge=0, lt=2**64)
    r_source: Literal["analytic", "numeric"] = "analytic"
    product_initial: Literal["operator", "element"] = "operator"
    gamma_n: Optional[float] = Field(None, gt=0)
    r_factor: Optional[float] = Field(None, ge=0)
    q_factor: Optional[float] = None
    sweep: Optional[SweepConfig] = None
    analytic_column: bool = False
    estimator: Literal["ratio_of_averages"] = "ratio_of_averages"
    workers: int = Field(1, ge=1)
    output_dir: str = "."

    @field_validator("t")
    @classmethod
    def _t_nonnegative(cls, v):
        if v != "inf" and not (v >= 0 and math.isfinite(v)):
            raise ValueError("t must be a finite non-negative number or 'inf'")
        return v

    @field_validator("tau")
    @classmethod
    def _tau_list(cls, v):
        if isinstance(v, list):
            arr = np.asarray(v, dtype=float)
            if arr.size == 0 or arr[0] != 0.0 or np.any(np.diff(arr) <= 0):
                raise ValueError("delay list must start at 0 and increase strictly")
        return v

    @model_validator(mode="after")
    def _units_need_rate(self):
        uses_rate = "gamma_n" in (self.detuning_units, self.tau_units)
        if uses_rate and self.gamma_n is None and self.sigma <= 0:
            raise ValueError("gamma_n units need sigma > 0 or an explicit gamma_n")
        return self

    # --- derived quantities -------------------------------------------------

    @property
    def t_value(self) -> float:
        return math.inf if self.t == "inf" else float(self.t)

    def collective(self, n_atoms=None, sigma=None) -> float:
        if self.gamma_n is not None:
            return float(self.gamma_n)
        return collective_rate(n_atoms or self.n_atoms, self.sigma if sigma is None else sigma)

    def tau_grid(self, gamma_n: float) -> np.ndarray:
        if isinstance(self.tau, list):
            grid = np.asarray(self.tau, dtype=float)
        else:
            grid = np.linspace(self.tau.start, self.tau.stop, self.tau.num)
        return grid / gamma_n if self.tau_units == "gamma_n" else grid

    def sweep_points(self) -> list[Optional[float]]:
        return [None] if self.sweep is None else self.sweep.resolved()

    def ensemble_spec(self, sweep_value: Optional[float] = None) -> EnsembleSpec:
        """Ensemble for one sweep point, with unit conversions applied."""
        fields = {
            "n_atoms": self.n_atoms,
            "sigma": self.sigma,
            "theta_deg": self.theta_deg,
            "detuning": self.detuning,
        }
        if sweep_value is not None:
            key = self.sweep.parameter
            fields[key] = int(sweep_value) if key == "n_atoms" else sweep_value
        uses_rate = "gamma_n" in (self.detuning_units, self.tau_units)
        rate = self.collective(fields["n_atoms"], fields["sigma"]) if uses_rate else 1.0
        detuning = fields["detuning"] * (rate if self.detuning_units == "gamma_n" else 1.0)
        return EnsembleSpec(
            cloud_config=CloudConfig(fields["n_atoms"], fields["sigma"], self.min_separation),
            drive=DriveParams(self.rabi, detuning),
            geometry=DetectionGeometry(math.radians(fields["theta_deg"]), math.radians(self.phi_deg)),
            model=self.model,
            t=self.t_value,
            tau_grid=self.tau_grid(rate),
            n_realizations=self.n_realizations,
            master_seed=self.master_seed,
            quantity=self.quantity,
            r_source=self.r_source,
            product_initial=self.product_initial,
            gamma_n=self.gamma_n,
            r_factor=self.r_factor,
            q_factor=self.q_factor,
        )


def format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "\n".join(lines)


def parse_config(data) -> JobConfig:
    """Validate a mapping; metadata sidecars are accepted through their ``config`` entry."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a key-value mapping")
    if "config" in data and "software" in data:
        data = data["config"]
    try:
        return JobConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(format_validation_error(exc)) from None


def load_config(path) -> JobConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"{path}: malformed document at {where}") from None
    try:
        return parse_config(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}:\n{exc}") from None


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``key=value`` strings (dotted keys for nesting; values parsed as YAML)."""
    data = yaml.safe_load(yaml.safe_dump(data))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError:
            raise ConfigError(f"override {item!r}: cannot parse value") from None
        target = data
        parts = key.strip().split(".")
        for part in parts[:-1]:
            nxt = target.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                target[part] = nxt
            target = nxt
        target[parts[-1]] = value
    return data
