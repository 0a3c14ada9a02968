"""Run configuration: YAML (or JSON) file <-> validated parameter objects.

Schema (every key optional; omitted keys take the reference parameter set)::

    field:
      b0_gauss: 4.0
      b_grad_gauss_per_cm: 15.0
      zeeman_coeff_mhz_per_gauss: -2.45
      axis_offset_y_um: 0.0
      axis_offset_z_um: 15.0
    atoms:
      positions_um: [-40, -20, 0, 20, 40]
    thermal:
      temperature_uk: 80.0
      radial_freq_khz: 1.6
      trials: 100000
      seed: 0
    detection:
      eps_0_as_1: 0.01
      eps_1_as_0: 0.01
    shapes:
      g70: {kind: gaussian, sigma_us: 35.35, truncation: 4}
      sq: {kind: square, length_us: 15.625}
    rabi_khz: 32.0
    dead_time_us: 1.0
    pump_fidelity: 1.0
    seed: 0
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from dataclasses import field as dc_field
from pathlib import Path
from typing import Any

import yaml

from atomreg.bloch import GAUSSIAN, SQUARE, PulseShape, calibrate_pi_pulse
from atomreg.dephasing import ThermalConfig
from atomreg.errors import ConfigError
from atomreg.fieldmap import AtomGeometry, FieldConfig, make_geometry
from atomreg.register import DetectionModel

PAPER_POSITIONS = (-40.0, -20.0, 0.0, 20.0, 40.0)

# Gaussian spectrum presets: 2*sigma = 17.7, 35.4, 70.7 us
SPECTRUM_PRESETS = {"a": 17.7 / 2, "b": 35.4 / 2, "c": 70.7 / 2}


def default_shapes() -> dict[str, PulseShape]:
    return {
        "g17": calibrate_pi_pulse(GAUSSIAN, SPECTRUM_PRESETS["a"]),
        "g35": calibrate_pi_pulse(GAUSSIAN, SPECTRUM_PRESETS["b"]),
        "g70": calibrate_pi_pulse(GAUSSIAN, SPECTRUM_PRESETS["c"]),
        "sq": PulseShape(SQUARE, 32.0, 1.0 / (2 * 32.0) * 1e3),
    }


@dataclass(frozen=True)
class RunConfig:
    field: FieldConfig = dc_field(default_factory=FieldConfig)
    positions: tuple[float, ...] = PAPER_POSITIONS
    thermal: ThermalConfig = dc_field(default_factory=ThermalConfig)
    detection: DetectionModel = dc_field(default_factory=DetectionModel)
    shapes: dict = dc_field(default_factory=default_shapes)
    rabi_khz: float = 32.0
    dead_time_us: float = 1.0
    pump_fidelity: float = 1.0
    seed: int = 0

    @property
    def geometry(self) -> list[AtomGeometry]:
        return make_geometry(self.positions)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=seed, thermal=replace(self.thermal, seed=seed))

    def with_trials(self, trials: int) -> "RunConfig":
        return replace(self, thermal=replace(self.thermal, trials=trials))

    def describe(self) -> dict[str, Any]:
        """Flat parameter listing, echoed into output file headers."""
        f, t, d = self.field, self.thermal, self.detection
        return {
            "b0_gauss": f.b0,
            "b_grad_gauss_per_cm": f.b_grad,
            "zeeman_coeff_mhz_per_gauss": f.zeeman_coeff,
            "axis_offset_y_um": f.axis_offset_y,
            "axis_offset_z_um": f.axis_offset_z,
            "positions_um": list(self.positions),
            "temperature_uk": t.temperature,
            "radial_freq_khz": t.radial_freq,
            "trials": t.trials,
            "thermal_seed": t.seed,
            "eps_0_as_1": d.eps_0_as_1,
            "eps_1_as_0": d.eps_1_as_0,
            "rabi_khz": self.rabi_khz,
            "dead_time_us": self.dead_time_us,
            "pump_fidelity": self.pump_fidelity,
            "seed": self.seed,
        }


def paper_defaults() -> RunConfig:
    """B0=4 G, B'=15 G/cm, -2.45 MHz/G, 32 kHz Rabi, 80 uK, 1.6 kHz, 15 um offset, eps=0.01."""
    return RunConfig()


def _take(block: dict, key: str, default, section: str):
    value = block.pop(key, default)
    if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if type(value) is not type(default) and not (isinstance(default, tuple) and isinstance(value, list)):
        raise ConfigError(f"{section}.{key}: expected {type(default).__name__}, got {value!r}")
    return value


def _section(data: dict, name: str) -> dict:
    block = data.pop(name, {}) or {}
    if not isinstance(block, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    return dict(block)


def _no_leftovers(block: dict, section: str):
    if block:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(sorted(block))}")


def _shape(name: str, spec: dict) -> PulseShape:
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == GAUSSIAN:
        duration = _take(spec, "sigma_us", 0.0, f"shapes.{name}")
        truncation = _take(spec, "truncation", 4.0, f"shapes.{name}")
    elif kind == SQUARE:
        duration = _take(spec, "length_us", 0.0, f"shapes.{name}")
        truncation = 4.0
    else:
        raise ConfigError(f"shapes.{name}.kind must be 'square' or 'gaussian', got {kind!r}")
    _no_leftovers(spec, f"shapes.{name}")
    return calibrate_pi_pulse(kind, duration, truncation)


def config_from_dict(data: dict) -> RunConfig:
    data = dict(data or {})
    base = RunConfig()

    f = _section(data, "field")
    fd = base.field
    fieldcfg = FieldConfig(
        b0=_take(f, "b0_gauss", fd.b0, "field"),
        b_grad=_take(f, "b_grad_gauss_per_cm", fd.b_grad, "field"),
        zeeman_coeff=_take(f, "zeeman_coeff_mhz_per_gauss", fd.zeeman_coeff, "field"),
        axis_offset_y=_take(f, "axis_offset_y_um", fd.axis_offset_y, "field"),
        axis_offset_z=_take(f, "axis_offset_z_um", fd.axis_offset_z, "field"),
    )
    _no_leftovers(f, "field")

    a = _section(data, "atoms")
    positions = tuple(float(x) for x in _take(a, "positions_um", base.positions, "atoms"))
    _no_leftovers(a, "atoms")
    make_geometry(positions)

    t = _section(data, "thermal")
    td = base.thermal
    thermal = ThermalConfig(
        temperature=_take(t, "temperature_uk", td.temperature, "thermal"),
        radial_freq=_take(t, "radial_freq_khz", td.radial_freq, "thermal"),
        trials=_take(t, "trials", td.trials, "thermal"),
        seed=_take(t, "seed", td.seed, "thermal"),
    )
    _no_leftovers(t, "thermal")

    d = _section(data, "detection")
    dd = base.detection
    detection = DetectionModel(
        _take(d, "eps_0_as_1", dd.eps_0_as_1, "detection"),
        _take(d, "eps_1_as_0", dd.eps_1_as_0, "detection"),
    )
    _no_leftovers(d, "detection")

    shapes = dict(base.shapes)
    for name, spec in _section(data, "shapes").items():
        if not isinstance(spec, dict):
            raise ConfigError(f"shapes.{name} must be a mapping")
        shapes[str(name)] = _shape(str(name), spec)

    cfg = RunConfig(
        field=fieldcfg,
        positions=positions,
        thermal=thermal,
        detection=detection,
        shapes=shapes,
        rabi_khz=_take(data, "rabi_khz", base.rabi_khz, "config"),
        dead_time_us=_take(data, "dead_time_us", base.dead_time_us, "config"),
        pump_fidelity=_take(data, "pump_fidelity", base.pump_fidelity, "config"),
        seed=_take(data, "seed", base.seed, "config"),
    )
    _no_leftovers(data, "config")
    if not cfg.rabi_khz > 0:
        raise ConfigError("rabi_khz must be positive")
    if not 0 <= cfg.pump_fidelity <= 1:
        raise ConfigError("pump_fidelity must be a probability")
    return cfg


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(data or {})


def config_to_dict(cfg: RunConfig) -> dict:
    """Inverse of :func:`config_from_dict` (shapes by envelope, not amplitude)."""
    shapes = {}
    for name, s in cfg.shapes.items():
        if s.kind == GAUSSIAN:
            shapes[name] = {"kind": GAUSSIAN, "sigma_us": s.duration, "truncation": s.truncation}
        else:
            shapes[name] = {"kind": SQUARE, "length_us": s.duration}
    th = asdict(cfg.thermal)
    return {
        "field": {
            "b0_gauss": cfg.field.b0,
            "b_grad_gauss_per_cm": cfg.field.b_grad,
            "zeeman_coeff_mhz_per_gauss": cfg.field.zeeman_coeff,
            "axis_offset_y_um": cfg.field.axis_offset_y,
            "axis_offset_z_um": cfg.field.axis_offset_z,
        },
        "atoms": {"positions_um": list(cfg.positions)},
        "thermal": {
            "temperature_uk": th["temperature"],
            "radial_freq_khz": th["radial_freq"],
            "trials": th["trials"],
            "seed": th["seed"],
        },
        "detection": {"eps_0_as_1": cfg.detection.eps_0_as_1, "eps_1_as_0": cfg.detection.eps_1_as_0},
        "shapes": shapes,
        "rabi_khz": cfg.rabi_khz,
        "dead_time_us": cfg.dead_time_us,
        "pump_fidelity": cfg.pump_fidelity,
        "seed": cfg.seed,
    }
