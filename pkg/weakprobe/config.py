"""
Simulation Configuration Manager
Loads run settings from YAML or INI files and turns them into typed run blocks
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Union
import configparser
import logging
import math
import os

import numpy as np
import yaml

from .channels import PRESETS, QuantumChannel, make_preset
from .core import (
    DensityOperator,
    Observable,
    PureState,
    StateLike,
    pauli_x,
    pauli_y,
    pauli_z,
    projector_observable,
)
from .errors import ConfigError
from .utils import matrix_from_pairs, pair_to_complex, vector_from_pairs

logger = logging.getLogger(__name__)

DEFAULT_COUPLING = 0.01
OUTPUT_FORMATS = ("csv", "json")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

NAMED_STATES = {
    "0": [1.0, 0.0],
    "1": [0.0, 1.0],
    "+": [1.0, 1.0],
    "-": [1.0, -1.0],
    "+i": [1.0, 1.0j],
    "-i": [1.0, -1.0j],
}

NAMED_OBSERVABLES = {
    "X": pauli_x,
    "Y": pauli_y,
    "Z": pauli_z,
    "P0": lambda: projector_observable(0, 2),
    "P1": lambda: projector_observable(1, 2),
}


class SimulationConfig:
    """Simulation configuration manager that supports YAML and INI files"""

    _config: Optional[Dict[str, Any]] = None
    _config_file: Optional[str] = None

    SEARCH_PATH = (
        'weakprobe.yml',
        'weakprobe.yaml',
        'config/weakprobe.yml',
    )

    @classmethod
    def load(cls, config_file: Optional[str] = None) -> Dict[str, Any]:
        """Load configuration from file"""

        if cls._config is not None and config_file == cls._config_file:
            return cls._config

        if config_file is None:
            for file_path in cls.SEARCH_PATH:
                if os.path.exists(file_path):
                    config_file = file_path
                    break

        if not config_file or not os.path.exists(config_file):
            raise FileNotFoundError(
                'Simulation configuration file not found. '
                'Please create weakprobe.yml from config/weakprobe.example.yml'
            )

        file_ext = Path(config_file).suffix.lower()

        if file_ext in ['.yml', '.yaml']:
            config = cls._load_yaml(config_file)
        elif file_ext == '.ini':
            config = cls._load_ini(config_file)
        else:
            raise ConfigError('Unsupported configuration file format. Use .yml, .yaml, or .ini')

        if not isinstance(config, dict):
            raise ConfigError(f'{config_file}: top level must be a mapping')

        cls._config = config
        cls._config_file = config_file
        logger.debug("loaded configuration from %s", config_file)
        return cls._config

    @classmethod
    def reset(cls) -> None:
        """Forget the cached configuration"""
        cls._config = None
        cls._config_file = None

    @classmethod
    def _load_yaml(cls, file_path: str) -> Dict[str, Any]:
        """Load YAML configuration"""
        try:
            with open(file_path, 'r', encoding='utf-8') as f:
                return yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f'{file_path}: invalid YAML: {e}')

    @classmethod
    def _load_ini(cls, file_path: str) -> Dict[str, Any]:
        """
        Load INI configuration

        Only scalar settings fit in INI files; values are parsed as YAML
        scalars so numbers and booleans keep their type.
        """
        config = configparser.ConfigParser()
        config.read(file_path, encoding='utf-8')

        result: Dict[str, Any] = {}
        for section_name in config.sections():
            section = {key: yaml.safe_load(value) for key, value in config[section_name].items()}
            if section_name == 'run':
                result.update(section)
            else:
                result[section_name] = section

        return result

    @classmethod
    def _section(cls, name: str) -> Dict[str, Any]:
        return dict(cls.load(cls._config_file).get(name) or {})

    @classmethod
    def get_setup_config(cls) -> Dict[str, Any]:
        """Get setup configuration"""
        return SetupConfig.from_dict(cls._section('setup')).to_dict()

    @classmethod
    def get_channel_config(cls) -> Dict[str, Any]:
        """Get probe noise configuration"""
        return ChannelsConfig.from_dict(cls._section('channels')).to_dict()

    @classmethod
    def get_sweep_config(cls) -> Dict[str, Any]:
        """Get sweep configuration"""
        return SweepConfig.from_dict(cls._section('sweep')).to_dict()

    @classmethod
    def get_montecarlo_config(cls) -> Dict[str, Any]:
        """Get Monte Carlo configuration"""
        return MonteCarloConfig.from_dict(cls._section('montecarlo')).to_dict()

    @classmethod
    def get_flowfield_config(cls) -> Dict[str, Any]:
        """Get flow field configuration"""
        return FlowFieldConfig.from_dict(cls._section('flowfield')).to_dict()

    @classmethod
    def get_verify_config(cls) -> Dict[str, Any]:
        """Get property check configuration"""
        return VerifyConfig.from_dict(cls._section('verify')).to_dict()

    @classmethod
    def get_logging_config(cls) -> Dict[str, Any]:
        """Get logging configuration"""
        return LoggingConfig.from_dict(cls._section('logging')).to_dict()

    @classmethod
    def get_run_config(cls, config_file: Optional[str] = None) -> "RunConfig":
        """Parse the whole file into a RunConfig"""
        return RunConfig.from_dict(cls.load(config_file))


# Value checks

def _reject_unknown(block: str, data: Dict[str, Any], allowed) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"{block}: expected a mapping, got {type(data).__name__}")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"{block}: unknown keys {', '.join(map(str, unknown))}")


def _float(block: str, key: str, value: Any, low: float = -math.inf, high: float = math.inf,
           open_low: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{block}.{key}: expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{block}.{key}: must be finite")
    if value < low or value > high or (open_low and value == low):
        bracket = "(" if open_low else "["
        raise ConfigError(f"{block}.{key}: {value} outside {bracket}{low}, {high}]")
    return value


def _int(block: str, key: str, value: Any, low: int = 0) -> int:
    if (
        isinstance(value, bool)
        or not isinstance(value, (int, float))
        or not math.isfinite(value)
        or float(value) != int(value)
    ):
        raise ConfigError(f"{block}.{key}: expected an integer, got {value!r}")
    if int(value) < low:
        raise ConfigError(f"{block}.{key}: must be at least {low}, got {value}")
    return int(value)


def _pair(value: Any) -> List[float]:
    c = pair_to_complex(value)
    return [c.real, c.imag]


def _vector_pairs(block: str, value: Any) -> List[List[float]]:
    return [_pair(v) for v in _as_list(block, "vector", value)]


def _matrix_pairs(block: str, value: Any) -> List[List[List[float]]]:
    rows = [_vector_pairs(block, row) for row in _as_list(block, "matrix", value)]
    if any(len(row) != len(rows) for row in rows):
        raise ConfigError(f"{block}: matrix must be square")
    return rows


def _as_list(block: str, key: str, value: Any) -> List[Any]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{block}.{key}: expected a non-empty list")
    return list(value)


# State, observable and channel specs

def normalize_state_spec(block: str, spec: Any) -> Any:
    """
    Canonical form of a state entry.

    Accepted forms: a name ('0', '1', '+', '-', '+i', '-i', 'mixed'), a list
    of [re, im] amplitudes, {'bloch': [x, y, z]} or {'density': matrix}.
    """
    if isinstance(spec, str):
        if spec not in NAMED_STATES and spec != "mixed":
            raise ConfigError(f"{block}: unknown state '{spec}'")
        return spec
    if isinstance(spec, dict):
        if set(spec) == {"bloch"}:
            vec = [_float(block, "bloch", v) for v in _as_list(block, "bloch", spec["bloch"])]
            if len(vec) != 3 or sum(v * v for v in vec) > 1.0 + 1e-12:
                raise ConfigError(f"{block}.bloch: expected 3 components with norm <= 1")
            return {"bloch": vec}
        if set(spec) == {"density"}:
            return {"density": _matrix_pairs(f"{block}.density", spec["density"])}
        raise ConfigError(f"{block}: a state mapping needs exactly one of 'bloch' or 'density'")
    return _vector_pairs(block, spec)


def build_state(spec: Any, block: str = "state") -> StateLike:
    if isinstance(spec, str):
        if spec == "mixed":
            return DensityOperator.maximally_mixed(2)
        return PureState.from_amplitudes(NAMED_STATES[spec])
    if isinstance(spec, dict):
        if "bloch" in spec:
            return DensityOperator.from_bloch(*spec["bloch"])
        return DensityOperator(matrix_from_pairs(spec["density"]))
    try:
        return PureState.from_amplitudes(vector_from_pairs(spec))
    except ValueError as e:
        raise ConfigError(f"{block}: {e}")


def build_density(spec: Any, block: str = "state") -> DensityOperator:
    state = build_state(spec, block)
    return state.to_density() if isinstance(state, PureState) else state


def normalize_observable_spec(block: str, spec: Any) -> Any:
    if isinstance(spec, str):
        if spec not in NAMED_OBSERVABLES:
            raise ConfigError(
                f"{block}: unknown observable '{spec}'; choose one of {', '.join(NAMED_OBSERVABLES)}"
            )
        return spec
    return _matrix_pairs(block, spec)


def build_observable(spec: Any) -> Observable:
    if isinstance(spec, str):
        return NAMED_OBSERVABLES[spec]()
    return Observable(matrix_from_pairs(spec))


def normalize_channel_spec(block: str, spec: Any) -> Optional[Dict[str, Any]]:
    """
    Canonical form of a channel entry.

    Accepted forms: null, 'phase-flip 0.3', {'preset': name, 'value': v} or
    {'kraus': [matrix, ...]}.
    """
    if spec is None:
        return None
    if isinstance(spec, str):
        parts = spec.split()
        name = parts[0] if parts else ""
        value = yaml.safe_load(parts[1]) if len(parts) == 2 else None
        if len(parts) > 2:
            raise ConfigError(f"{block}: expected '<preset> [value]', got '{spec}'")
        spec = {"preset": name} if value is None else {"preset": name, "value": value}
    if not isinstance(spec, dict):
        raise ConfigError(f"{block}: expected a preset string or mapping")
    if "kraus" in spec:
        _reject_unknown(block, spec, ("kraus",))
        return {"kraus": [_matrix_pairs(f"{block}.kraus", k) for k in _as_list(block, "kraus", spec["kraus"])]}
    _reject_unknown(block, spec, ("preset", "value"))
    name = spec.get("preset")
    if name not in PRESETS:
        raise ConfigError(f"{block}: unknown channel preset '{name}'; choose one of {', '.join(sorted(PRESETS))}")
    out: Dict[str, Any] = {"preset": name}
    if spec.get("value") is not None:
        out["value"] = _float(block, "value", spec["value"])
    elif name != "identity":
        raise ConfigError(f"{block}: preset '{name}' needs a value")
    return out


def build_channel(spec: Optional[Dict[str, Any]]) -> Optional[QuantumChannel]:
    if spec is None:
        return None
    if "kraus" in spec:
        return QuantumChannel(tuple(matrix_from_pairs(k) for k in spec["kraus"]))
    return make_preset(spec["preset"], spec.get("value"))


# Run blocks

class _Block:
    """Shared from_dict/to_dict plumbing for the config blocks."""

    block_name = ""

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]):
        data = {} if data is None else data
        _reject_unknown(cls.block_name, data, [f.name for f in fields(cls)])
        return cls(**cls._parse(data))

    @classmethod
    def _parse(cls, data: Dict[str, Any]) -> Dict[str, Any]:
        raise NotImplementedError

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class SetupConfig(_Block):
    """
    Weak measurement setup.

    kind 'mach-zehnder' builds the interferometer from delta and visibility;
    kind 'custom' takes pre, post, A and K explicitly. hwp_angle, when set,
    replaces coupling by the plate-angle equivalent -2 * hwp_angle.
    """

    block_name = "setup"

    kind: str = "mach-zehnder"
    delta: float = math.pi / 2
    visibility: float = 1.0
    coupling: float = DEFAULT_COUPLING
    hwp_angle: Optional[float] = None
    probe: Any = "mixed"
    pre: Any = None
    post: Any = None
    A: Any = None
    K: Any = None

    @classmethod
    def _parse(cls, data):
        b = cls.block_name
        kind = data.get("kind", "mach-zehnder")
        if kind not in ("mach-zehnder", "custom"):
            raise ConfigError(f"setup.kind: expected 'mach-zehnder' or 'custom', got {kind!r}")
        out = {
            "kind": kind,
            "delta": _float(b, "delta", data.get("delta", math.pi / 2)),
            "visibility": _float(b, "visibility", data.get("visibility", 1.0), 0.0, 1.0),
            "coupling": _float(b, "coupling", data.get("coupling", DEFAULT_COUPLING)),
            "hwp_angle": None,
            "probe": normalize_state_spec("setup.probe", data.get("probe", "mixed")),
            "pre": None,
            "post": None,
            "A": None,
            "K": None,
        }
        if data.get("hwp_angle") is not None:
            out["hwp_angle"] = _float(b, "hwp_angle", data["hwp_angle"])
        if kind == "custom":
            for key in ("pre", "post", "A", "K"):
                if data.get(key) is None:
                    raise ConfigError(f"setup.{key}: required for a custom setup")
            out["pre"] = normalize_state_spec("setup.pre", data["pre"])
            out["post"] = normalize_state_spec("setup.post", data["post"])
            out["A"] = normalize_observable_spec("setup.A", data["A"])
            out["K"] = normalize_observable_spec("setup.K", data["K"])
        else:
            extra = [k for k in ("pre", "post", "A", "K") if data.get(k) is not None]
            if extra:
                raise ConfigError(f"setup: {', '.join(extra)} only apply to kind 'custom'")
        return out

    @property
    def effective_coupling(self) -> float:
        if self.hwp_angle is not None:
            return -2.0 * self.hwp_angle
        return self.coupling


@dataclass
class ChannelsConfig(_Block):
    """Probe noise before (pre_noise) and after (post_noise) the interaction."""

    block_name = "channels"

    pre_noise: Optional[Dict[str, Any]] = None
    post_noise: Optional[Dict[str, Any]] = None

    @classmethod
    def _parse(cls, data):
        return {
            "pre_noise": normalize_channel_spec("channels.pre_noise", data.get("pre_noise")),
            "post_noise": normalize_channel_spec("channels.post_noise", data.get("post_noise")),
        }


@dataclass
class SweepConfig(_Block):
    """
    Post-selection phase sweep. ``deltas`` is either an explicit list or
    {start, stop, num} expanded by numpy.linspace.
    """

    block_name = "sweep"

    deltas: Any = field(default_factory=lambda: {"start": 0.0, "stop": 2.8, "num": 57})
    half_width_deg: float = 2.0
    points: int = 9
    fit_order: int = 1
    workers: int = 1

    @classmethod
    def _parse(cls, data):
        b = cls.block_name
        deltas = data.get("deltas", {"start": 0.0, "stop": 2.8, "num": 57})
        if isinstance(deltas, dict):
            _reject_unknown("sweep.deltas", deltas, ("start", "stop", "num"))
            for key in ("start", "stop", "num"):
                if key not in deltas:
                    raise ConfigError(f"sweep.deltas.{key}: required")
            deltas = {
                "start": _float("sweep.deltas", "start", deltas["start"]),
                "stop": _float("sweep.deltas", "stop", deltas["stop"]),
                "num": _int("sweep.deltas", "num", deltas["num"], 1),
            }
        else:
            deltas = [_float(b, "deltas", d) for d in _as_list(b, "deltas", deltas)]
        fit_order = _int(b, "fit_order", data.get("fit_order", 1), 1)
        if fit_order not in (1, 3):
            raise ConfigError(f"sweep.fit_order: expected 1 or 3, got {fit_order}")
        return {
            "deltas": deltas,
            "half_width_deg": _float(b, "half_width_deg", data.get("half_width_deg", 2.0), 0.0, 45.0, open_low=True),
            "points": _int(b, "points", data.get("points", 9), 2),
            "fit_order": fit_order,
            "workers": _int(b, "workers", data.get("workers", 1), 1),
        }

    def delta_values(self) -> List[float]:
        if isinstance(self.deltas, dict):
            d = self.deltas
            return [float(v) for v in np.linspace(d["start"], d["stop"], d["num"])]
        return list(self.deltas)


@dataclass
class MonteCarloConfig(_Block):
    block_name = "montecarlo"

    shots: int = 1_000_000
    observable: Optional[Any] = None
    workers: int = 1
    chunk_size: int = 1 << 16

    @classmethod
    def _parse(cls, data):
        b = cls.block_name
        observable = data.get("observable")
        return {
            "shots": _int(b, "shots", data.get("shots", 1_000_000), 1),
            "observable": None if observable is None else normalize_observable_spec("montecarlo.observable", observable),
            "workers": _int(b, "workers", data.get("workers", 1), 1),
            "chunk_size": _int(b, "chunk_size", data.get("chunk_size", 1 << 16), 1),
        }


@dataclass
class FlowFieldConfig(_Block):
    """Grid of qubit probe states for the Bloch flow export."""

    block_name = "flowfield"

    grid: str = "equatorial"
    radii: List[float] = field(default_factory=lambda: [0.25, 0.5, 0.75, 1.0])
    angles: int = 12
    step: float = 0.25
    theta: float = 1.0

    @classmethod
    def _parse(cls, data):
        b = cls.block_name
        grid = data.get("grid", "equatorial")
        if grid not in ("equatorial", "ball"):
            raise ConfigError(f"flowfield.grid: expected 'equatorial' or 'ball', got {grid!r}")
        radii = [_float(b, "radii", r, 0.0, 1.0) for r in _as_list(b, "radii", data.get("radii", [0.25, 0.5, 0.75, 1.0]))]
        return {
            "grid": grid,
            "radii": radii,
            "angles": _int(b, "angles", data.get("angles", 12), 1),
            "step": _float(b, "step", data.get("step", 0.25), 0.0, 1.0, open_low=True),
            "theta": _float(b, "theta", data.get("theta", 1.0)),
        }


@dataclass
class VerifyConfig(_Block):
    """Sizes of the property-check batteries."""

    block_name = "verify"

    noise_setups: int = 200
    scaling_setups: int = 50
    random_probes: int = 1000
    unital_channels: int = 100
    montecarlo_seeds: int = 5
    montecarlo_shots: int = 1_000_000
    inject_fault: Optional[str] = None

    @classmethod
    def _parse(cls, data):
        b = cls.block_name
        fault = data.get("inject_fault")
        if fault is not None and not isinstance(fault, str):
            raise ConfigError("verify.inject_fault: expected a fault name")
        out = {"inject_fault": fault}
        for f in fields(cls):
            if f.name != "inject_fault":
                out[f.name] = _int(b, f.name, data.get(f.name, f.default), 1)
        return out


@dataclass
class LoggingConfig(_Block):
    block_name = "logging"

    level: str = "INFO"
    file: Optional[str] = None

    @classmethod
    def _parse(cls, data):
        level = str(data.get("level", "INFO")).upper()
        if level not in LOG_LEVELS:
            raise ConfigError(f"logging.level: expected one of {', '.join(LOG_LEVELS)}, got {level}")
        log_file = data.get("file")
        return {"level": level, "file": None if log_file is None else str(log_file)}


_BLOCKS = {
    "setup": SetupConfig,
    "channels": ChannelsConfig,
    "sweep": SweepConfig,
    "montecarlo": MonteCarloConfig,
    "flowfield": FlowFieldConfig,
    "verify": VerifyConfig,
    "logging": LoggingConfig,
}


@dataclass
class RunConfig:
    """Every setting of one CLI invocation."""

    setup: SetupConfig = field(default_factory=SetupConfig)
    channels: ChannelsConfig = field(default_factory=ChannelsConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    montecarlo: MonteCarloConfig = field(default_factory=MonteCarloConfig)
    flowfield: FlowFieldConfig = field(default_factory=FlowFieldConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)
    seed: int = 0
    format: Optional[str] = None
    output_path: Optional[str] = None

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "RunConfig":
        """
        Parse a nested mapping, rejecting unknown keys and out-of-range values.

        Raises:
            ConfigError: on the first invalid entry
        """
        data = {} if data is None else data
        _reject_unknown("config", data, [f.name for f in fields(cls)])
        kwargs: Dict[str, Any] = {
            name: block.from_dict(data.get(name)) for name, block in _BLOCKS.items()
        }
        kwargs["seed"] = _int("config", "seed", data.get("seed", 0), 0)
        fmt = data.get("format")
        if fmt is not None and fmt not in OUTPUT_FORMATS:
            raise ConfigError(f"config.format: expected one of {', '.join(OUTPUT_FORMATS)}, got {fmt!r}")
        kwargs["format"] = fmt
        out = data.get("output_path")
        kwargs["output_path"] = None if out is None else str(out)
        return cls(**kwargs)

    def to_dict(self) -> Dict[str, Any]:
        result: Dict[str, Any] = {name: getattr(self, name).to_dict() for name in _BLOCKS}
        result.update(seed=self.seed, format=self.format, output_path=self.output_path)
        return result

    # Builders

    def measured_selections(self):
        """(pre, post, A, K) for the configured setup."""
        from .experiment import MzConfig, mz_setup

        s = self.setup
        if s.kind == "custom":
            return (
                build_state(s.pre, "setup.pre"),
                build_state(s.post, "setup.post"),
                build_observable(s.A),
                build_observable(s.K),
            )
        base = mz_setup(MzConfig(delta=s.delta, visibility=s.visibility))
        return base.pre, base.post, base.A, base.K

    def build_setup(self):
        """WeakSetup for weakvalue and montecarlo; pre_noise is left to the caller."""
        from .engine import WeakSetup

        pre, post, A, K = self.measured_selections()
        return WeakSetup(
            pre=pre,
            post=post,
            A=A,
            K=K,
            theta=self.setup.effective_coupling,
            probe=build_density(self.setup.probe, "setup.probe"),
        )

    def build_mz_config(self, delta: Optional[float] = None):
        """Interferometer settings for the sweep."""
        from .experiment import MzConfig
        from .utils import degree_grid

        if self.setup.kind != "mach-zehnder":
            raise ConfigError("sweep needs setup.kind 'mach-zehnder'")
        return MzConfig(
            delta=self.setup.delta if delta is None else delta,
            visibility=self.setup.visibility,
            theta_grid=tuple(degree_grid(self.sweep.half_width_deg, self.sweep.points)),
            probe=build_density(self.setup.probe, "setup.probe"),
            fit_order=self.sweep.fit_order,
            probe_noise=build_channel(self.channels.pre_noise),
            output_noise=build_channel(self.channels.post_noise),
        )

    def pre_noise(self) -> Optional[QuantumChannel]:
        return build_channel(self.channels.pre_noise)

    def post_noise(self) -> Optional[QuantumChannel]:
        return build_channel(self.channels.post_noise)


def load_run_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """RunConfig from ``path``, from the search path, or the defaults when neither exists."""
    if path is None:
        try:
            return SimulationConfig.get_run_config()
        except FileNotFoundError:
            logger.debug("no configuration file found, using defaults")
            return RunConfig()
    return SimulationConfig.get_run_config(str(path))
