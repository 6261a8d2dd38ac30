"""Experiment configuration: a single YAML file with nested sections.

Layout (keys are normative, sections optional unless a command needs them):

    model: exact            # amplitude provider: exact | wvo | rit | rit-packet
    system:                 # two-qubit form ...
      omega_s: 1.0
      omega_u: 1.0
      j_x: 1.0
      j_y: 0.0
      mass: 0.1
      length: 50.0
    # ... or the generic form: e_unit + e_system (+ h_us), or h0_diag + h_us
    reservoir:
      t_kin: 1.0
      t_int: 1.0
    sweep:
      variable: kinetic_energy   # kinetic_energy | p0 | temperature | t_kin
      start: 0.05
      stop: 30.0
      steps: 60                  # or an explicit strictly increasing `values:` list
      transition_from: "00"      # transition-prob only
      transition_to: "11"
    run:
      seed: 1
      trajectories: 500
      collisions: 2000
      burn_in: 0.5
      rit_packet_j_y: [1.0, 0.0, -1.0]   # thermalize only
    output:
      path: results.csv
      format: csv               # csv | json
      plot: true

Everything is validated at parse time (the model is actually built once);
parsing the serialized form of a parsed config yields the same config, and
the canonical serialization is what gets hashed into output headers.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .model import InternalModel, TwoQubitParams, build_two_qubit
from .thermostats import PROVIDER_KINDS

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "SweepConfig",
    "ReservoirConfig",
    "RunConfig",
    "OutputConfig",
    "parse_config",
    "load_config",
    "serialize_config",
    "config_hash",
]

SWEEP_VARIABLES = ("kinetic_energy", "p0", "temperature", "t_kin")


class ConfigError(ValueError):
    pass


def _require(data: dict, key: str, section: str):
    if key not in data:
        raise ConfigError(f"missing key '{key}' in section '{section}'")
    return data[key]


def _number(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class SystemConfig:
    kind: str                      # "two_qubit" | "generic"
    params: dict

    def build(self) -> InternalModel:
        p = self.params
        if self.kind == "two_qubit":
            return build_two_qubit(
                TwoQubitParams(
                    omega_s=p["omega_s"], omega_u=p["omega_u"],
                    j_x=p["j_x"], j_y=p["j_y"],
                ),
                mass=p["mass"], length=p["length"],
            )
        allow = bool(p.get("allow_broken_time_reversal", False))
        h_us = np.asarray(p["h_us"], dtype=complex)
        if "h_us_imag" in p:
            h_us = h_us + 1j * np.asarray(p["h_us_imag"], dtype=float)
        if "h0_diag" in p:
            return InternalModel.from_h0_diag(
                p["h0_diag"], h_us, mass=p["mass"], length=p["length"],
                allow_broken_time_reversal=allow,
            )
        return InternalModel(
            unit_energies=p["e_unit"], system_energies=p["e_system"],
            h_us=h_us, mass=p["mass"], length=p["length"],
            allow_broken_time_reversal=allow,
        )

    def to_dict(self) -> dict:
        return dict(self.params)


def _parse_system(data: dict) -> SystemConfig:
    if not isinstance(data, dict):
        raise ConfigError("'system' must be a mapping")
    mass = _number(_require(data, "mass", "system"), "mass")
    length = _number(_require(data, "length", "system"), "length")
    if mass <= 0 or length <= 0:
        raise ConfigError("mass and length must be positive")
    if "omega_s" in data or "omega_u" in data:
        params = {
            "omega_s": _number(_require(data, "omega_s", "system"), "omega_s"),
            "omega_u": _number(_require(data, "omega_u", "system"), "omega_u"),
            "j_x": _number(data.get("j_x", 0.0), "j_x"),
            "j_y": _number(data.get("j_y", 0.0), "j_y"),
            "mass": mass,
            "length": length,
        }
        return SystemConfig(kind="two_qubit", params=params)
    params: dict = {"mass": mass, "length": length}
    if "h_us_imag" in data and not data.get("allow_broken_time_reversal"):
        raise ConfigError("'h_us_imag' requires allow_broken_time_reversal: true")
    if "h0_diag" in data:
        params["h0_diag"] = [float(x) for x in data["h0_diag"]]
        params["h_us"] = [[float(x) for x in row] for row in _require(data, "h_us", "system")]
    elif "e_unit" in data and "e_system" in data:
        params["e_unit"] = [float(x) for x in data["e_unit"]]
        params["e_system"] = [float(x) for x in data["e_system"]]
        dim = len(params["e_unit"]) * len(params["e_system"])
        h_us = data.get("h_us")
        if h_us is None:
            h_us = [[0.0] * dim for _ in range(dim)]
        params["h_us"] = [[float(x) for x in row] for row in h_us]
    else:
        raise ConfigError(
            "system section needs either two-qubit keys (omega_s, omega_u, j_x, j_y), "
            "or e_unit + e_system (+ h_us), or h0_diag + h_us"
        )
    if "h_us_imag" in data:
        params["h_us_imag"] = [[float(x) for x in row] for row in data["h_us_imag"]]
    if data.get("allow_broken_time_reversal"):
        params["allow_broken_time_reversal"] = True
    return SystemConfig(kind="generic", params=params)


@dataclass(frozen=True)
class ReservoirConfig:
    t_kin: float
    t_int: float

    def to_dict(self) -> dict:
        return {"t_kin": self.t_kin, "t_int": self.t_int}


@dataclass(frozen=True)
class SweepConfig:
    variable: str
    values: tuple
    transition_from: str | None = None
    transition_to: str | None = None

    def to_dict(self) -> dict:
        out = {"variable": self.variable, "values": list(self.values)}
        if self.transition_from is not None:
            out["transition_from"] = self.transition_from
            out["transition_to"] = self.transition_to
        return out


@dataclass(frozen=True)
class RunConfig:
    seed: int = 1
    trajectories: int = 500
    collisions: int = 2000
    burn_in: float = 0.5
    rit_packet_j_y: tuple | None = None

    def to_dict(self) -> dict:
        out = {
            "seed": self.seed,
            "trajectories": self.trajectories,
            "collisions": self.collisions,
            "burn_in": self.burn_in,
        }
        if self.rit_packet_j_y is not None:
            out["rit_packet_j_y"] = list(self.rit_packet_j_y)
        return out


@dataclass(frozen=True)
class OutputConfig:
    path: str | None = None
    format: str = "csv"
    plot: bool = True

    def to_dict(self) -> dict:
        out: dict = {"format": self.format, "plot": self.plot}
        if self.path is not None:
            out["path"] = self.path
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    provider_kind: str
    system: SystemConfig
    reservoir: ReservoirConfig | None
    sweep: SweepConfig | None
    run: RunConfig
    output: OutputConfig

    def build_model(self) -> InternalModel:
        return self.system.build()

    def to_dict(self) -> dict:
        out: dict = {
            "model": self.provider_kind,
            "system": self.system.to_dict(),
            "run": self.run.to_dict(),
            "output": self.output.to_dict(),
        }
        if self.reservoir is not None:
            out["reservoir"] = self.reservoir.to_dict()
        if self.sweep is not None:
            out["sweep"] = self.sweep.to_dict()
        return out


def _parse_sweep(data: dict) -> SweepConfig:
    if not isinstance(data, dict):
        raise ConfigError("'sweep' must be a mapping")
    variable = _require(data, "variable", "sweep")
    if variable not in SWEEP_VARIABLES:
        raise ConfigError(
            f"unknown sweep variable {variable!r}; expected one of {SWEEP_VARIABLES}"
        )
    if "values" in data:
        values = [_number(v, "values") for v in data["values"]]
    else:
        start = _number(_require(data, "start", "sweep"), "start")
        stop = _number(_require(data, "stop", "sweep"), "stop")
        steps = data["steps"] if "steps" in data else None
        if not isinstance(steps, int) or steps < 1:
            raise ConfigError("'steps' must be a positive integer")
        values = list(np.linspace(start, stop, steps))
    arr = np.asarray(values, dtype=float)
    if arr.size < 1 or not np.all(np.isfinite(arr)):
        raise ConfigError("sweep values must be finite and non-empty")
    if arr.size > 1 and not np.all(np.diff(arr) > 0):
        raise ConfigError("sweep values must be strictly increasing")
    return SweepConfig(
        variable=variable,
        values=tuple(float(v) for v in arr),
        transition_from=data.get("transition_from"),
        transition_to=data.get("transition_to"),
    )


def parse_config(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(data) - {"model", "system", "reservoir", "sweep", "run", "output"}
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    provider_kind = str(data.get("model", "exact")).lower().replace("_", "-")
    if provider_kind not in PROVIDER_KINDS:
        raise ConfigError(
            f"unknown provider kind {provider_kind!r} for key 'model'; "
            f"expected one of {PROVIDER_KINDS}"
        )
    system = _parse_system(_require(data, "system", "config"))
    try:
        system.build()  # validate the physical parameters now
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"invalid system parameters: {exc}") from exc

    reservoir = None
    if "reservoir" in data:
        res = data["reservoir"]
        t_kin = _number(_require(res, "t_kin", "reservoir"), "t_kin")
        t_int = _number(res.get("t_int", t_kin), "t_int")
        if t_kin <= 0 or t_int <= 0:
            raise ConfigError("reservoir temperatures must be positive")
        reservoir = ReservoirConfig(t_kin=t_kin, t_int=t_int)

    sweep = _parse_sweep(data["sweep"]) if "sweep" in data else None

    run_data = data.get("run", {}) or {}
    seed = run_data.get("seed", 1)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("'seed' must be a non-negative integer")
    trajectories = run_data.get("trajectories", 500)
    collisions = run_data.get("collisions", 2000)
    for name, v in (("trajectories", trajectories), ("collisions", collisions)):
        if not isinstance(v, int) or v < 1:
            raise ConfigError(f"'{name}' must be a positive integer")
    burn_in = _number(run_data.get("burn_in", 0.5), "burn_in")
    if not 0.0 <= burn_in < 1.0:
        raise ConfigError("'burn_in' must be in [0, 1)")
    packet_jy = run_data.get("rit_packet_j_y")
    if packet_jy is not None:
        if system.kind != "two_qubit":
            raise ConfigError("'rit_packet_j_y' requires a two-qubit system section")
        packet_jy = tuple(_number(v, "rit_packet_j_y") for v in packet_jy)
    run = RunConfig(
        seed=seed, trajectories=trajectories, collisions=collisions,
        burn_in=burn_in, rit_packet_j_y=packet_jy,
    )

    out_data = data.get("output", {}) or {}
    fmt = str(out_data.get("format", "csv")).lower()
    if fmt not in ("csv", "json"):
        raise ConfigError(f"output format must be 'csv' or 'json', got {fmt!r}")
    output = OutputConfig(
        path=out_data.get("path"),
        format=fmt,
        plot=bool(out_data.get("plot", True)),
    )
    return ExperimentConfig(
        provider_kind=provider_kind, system=system, reservoir=reservoir,
        sweep=sweep, run=run, output=output,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return parse_config(data)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical YAML form: sorted keys, normalized sweep values."""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True, default_flow_style=False)


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()[:16]
