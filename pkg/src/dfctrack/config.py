"""JSON experiment configuration with strict validation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import DelayedFeedbackController, Plant
from .signals import Signal
from .tuner import TuneSpec

SECTIONS = {"plant", "controller", "signals", "sim", "tune", "output"}
KEYS = {
    "plant": {"A", "B", "C"},
    "controller": {"K", "K1", "K2", "tau", "tau_q", "p"},
    "signals": {"r", "d1", "d2"},
    "sim": {"horizon", "step"},
    "tune": {"free_parameters", "bounds", "couplings", "threshold", "max_iterations", "seed",
             "schedule", "chain_length", "step_fraction"},
    "output": {"directory", "plots"},
}
PIECE_KEYS = {"t_start", "coeffs", "direction"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    plant: Plant
    controller: DelayedFeedbackController | None = None
    signals: dict[str, Signal] = field(default_factory=dict)
    horizon: float = 60.0
    step: float | None = None
    tune: TuneSpec | None = None
    output_dir: str = "out"
    plots: bool = False


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")


def _matrix(value, where) -> np.ndarray:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return np.array([[float(value)]])
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{where}: expected a non-empty numeric array")
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        return np.array([value], dtype=float)
    if not all(isinstance(row, list) for row in value):
        raise ConfigError(f"{where}: mixes numbers and rows")
    widths = {len(row) for row in value}
    if len(widths) != 1:
        raise ConfigError(f"{where}: ragged rows (lengths {sorted(widths)})")
    for row in value:
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in row):
            raise ConfigError(f"{where}: entries must be numbers")
    return np.array(value, dtype=float)


def _number(obj, key, where, default=None, positive=False):
    if key not in obj:
        if default is None:
            raise ConfigError(f"{where}.{key}: required")
        return default
    v = obj[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{where}.{key}: expected a number")
    if positive and not v > 0:
        raise ConfigError(f"{where}.{key}: must be positive")
    return v


def parse_plant(obj) -> Plant:
    _check_keys(obj, KEYS["plant"], "plant")
    mats = {}
    for key in ("A", "B", "C"):
        if key not in obj:
            raise ConfigError(f"plant.{key}: required")
        mats[key] = _matrix(obj[key], f"plant.{key}")
    B = mats["B"]
    n = mats["A"].shape[0]
    # a single row of n numbers is read as a column for single-input plants
    if B.shape[0] == 1 and B.shape[1] == n and n > 1:
        B = B.T
    try:
        return Plant(mats["A"], B, mats["C"])
    except ValueError as exc:
        raise ConfigError(f"plant: {exc}") from exc


def parse_controller(obj, plant: Plant) -> DelayedFeedbackController:
    where = "controller"
    _check_keys(obj, KEYS[where], where)
    for key in ("K", "K1", "tau"):
        if key not in obj:
            raise ConfigError(f"{where}.{key}: required")
    K2 = _matrix(obj["K2"], f"{where}.K2") if "K2" in obj else np.zeros((plant.m, plant.m))
    p = obj.get("p", 1)
    if not isinstance(p, int) or isinstance(p, bool) or p < 0:
        raise ConfigError(f"{where}.p: expected a nonnegative integer")
    try:
        ctrl = DelayedFeedbackController(
            _matrix(obj["K"], f"{where}.K"), _matrix(obj["K1"], f"{where}.K1"), K2,
            _number(obj, "tau", where), _number(obj, "tau_q", where, 0.0), p)
        ctrl.check_against(plant)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    return ctrl


def parse_signal(pieces, dim, where) -> Signal:
    if not isinstance(pieces, list):
        raise ConfigError(f"{where}: expected a list of pieces")
    for i, piece in enumerate(pieces):
        _check_keys(piece, PIECE_KEYS, f"{where}[{i}]")
        if not PIECE_KEYS <= set(piece):
            raise ConfigError(f"{where}[{i}]: needs t_start, coeffs and direction")
        if len(piece["direction"]) != dim:
            raise ConfigError(f"{where}[{i}].direction: expected length {dim}")
    try:
        return Signal.from_dict(dim, pieces)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_tune(obj) -> TuneSpec:
    where = "tune"
    _check_keys(obj, KEYS[where], where)
    if "free_parameters" not in obj or "bounds" not in obj:
        raise ConfigError(f"{where}: free_parameters and bounds are required")
    kwargs = dict(free_parameters=tuple(obj["free_parameters"]),
                  bounds=tuple(tuple(b) for b in obj["bounds"]),
                  couplings=tuple(obj.get("couplings", ())))
    for key in ("threshold", "step_fraction"):
        if key in obj:
            kwargs[key] = float(_number(obj, key, where))
    for key in ("max_iterations", "seed", "chain_length"):
        if key in obj:
            if not isinstance(obj[key], int) or isinstance(obj[key], bool):
                raise ConfigError(f"{where}.{key}: expected an integer")
            kwargs[key] = obj[key]
    if "schedule" in obj:
        _check_keys(obj["schedule"], {"T0", "gamma"}, f"{where}.schedule")
        kwargs["T0"] = float(_number(obj["schedule"], "T0", f"{where}.schedule", 1.0))
        kwargs["gamma"] = float(_number(obj["schedule"], "gamma", f"{where}.schedule", 0.97))
    try:
        return TuneSpec(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_config(data: dict) -> ExperimentConfig:
    _check_keys(data, SECTIONS, "config")
    if "plant" not in data:
        raise ConfigError("plant: required")
    plant = parse_plant(data["plant"])
    cfg = ExperimentConfig(plant)
    if "controller" in data:
        cfg.controller = parse_controller(data["controller"], plant)
    if "signals" in data:
        _check_keys(data["signals"], KEYS["signals"], "signals")
        dims = {"r": plant.m, "d1": plant.n, "d2": plant.n}
        for key, pieces in data["signals"].items():
            cfg.signals[key] = parse_signal(pieces, dims[key], f"signals.{key}")
    if "sim" in data:
        _check_keys(data["sim"], KEYS["sim"], "sim")
        cfg.horizon = float(_number(data["sim"], "horizon", "sim", 60.0, positive=True))
        if data["sim"].get("step") is not None:
            cfg.step = float(_number(data["sim"], "step", "sim", positive=True))
    if "tune" in data:
        cfg.tune = parse_tune(data["tune"])
    if "output" in data:
        _check_keys(data["output"], KEYS["output"], "output")
        out = data["output"]
        cfg.output_dir = str(out.get("directory", cfg.output_dir))
        cfg.plots = bool(out.get("plots", False))
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config(data)


def plant_to_dict(plant: Plant) -> dict:
    return {"A": plant.A.tolist(), "B": plant.B.tolist(), "C": plant.C.tolist()}


def controller_to_dict(ctrl: DelayedFeedbackController) -> dict:
    return {"K": ctrl.K.tolist(), "K1": ctrl.K1.tolist(), "K2": ctrl.K2.tolist(),
            "tau": ctrl.tau, "tau_q": ctrl.tau_q, "p": ctrl.p}
