"""Experiment configuration: a flat, diff-friendly ``key = value`` format."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .algorithms import STEPPER_REGISTRY, known_params

__all__ = [
    "AlgorithmSpec",
    "ExperimentConfig",
    "ConfigError",
    "parse_config",
    "serialize_config",
    "load_config",
]

_KINDS = ("synthetic_constrained", "logistic")


class ConfigError(ValueError):
    """Malformed or invalid experiment configuration."""


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    params: tuple[tuple[str, float], ...] = ()

    def params_dict(self) -> dict[str, float]:
        return dict(self.params)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; round-trips losslessly through the file format."""

    kind: str
    m: int
    M: int
    algorithms: tuple[AlgorithmSpec, ...]
    samples_per_node: int = 0
    edge_prob: float = 0.3
    graph_seed: int = 0
    graph_file: str | None = None
    instance_seed: int = 0
    x_init_seed: int = 0
    iterations: int = 1000
    trace_every: int = 10
    output_dir: str = "out"
    ref_iters: int = 200_000
    ref_tol: float = 1e-12
    ref_step: float | None = None
    workers: int = 1
    consensus_nodes: int = 0
    consensus_reference_node: int = 0

    def validate(self) -> None:
        if self.kind not in _KINDS:
            raise ConfigError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        for name in ("m", "M", "iterations", "trace_every", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.kind == "logistic" and self.samples_per_node < 1:
            raise ConfigError("logistic experiments need samples_per_node >= 1")
        if not 0.0 <= self.edge_prob <= 1.0:
            raise ConfigError("edge_prob must lie in [0, 1]")
        if not self.algorithms:
            raise ConfigError("at least one [algorithm.<name>] section is required")
        for spec in self.algorithms:
            if spec.name not in STEPPER_REGISTRY:
                raise ConfigError(
                    f"unknown algorithm {spec.name!r}; known: {sorted(STEPPER_REGISTRY)}"
                )
        if self.consensus_nodes < 0:
            raise ConfigError("consensus_nodes must be >= 0")
        if not 0 <= self.consensus_reference_node < self.M:
            raise ConfigError("consensus_reference_node must be a valid node index")


# key -> (converter, required)
_TOP_KEYS: dict[str, tuple] = {
    "kind": (str, True),
    "m": (int, True),
    "M": (int, True),
    "samples_per_node": (int, False),
    "edge_prob": (float, False),
    "graph_seed": (int, False),
    "graph_file": (str, False),
    "instance_seed": (int, False),
    "x_init_seed": (int, False),
    "iterations": (int, False),
    "trace_every": (int, False),
    "output_dir": (str, False),
    "ref_iters": (int, False),
    "ref_tol": (float, False),
    "ref_step": (float, False),
    "workers": (int, False),
    "consensus_nodes": (int, False),
    "consensus_reference_node": (int, False),
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse the flat config format.

    Lines are ``key = value`` pairs, optionally under an
    ``[algorithm.<name>]`` section that collects that method's
    hyperparameters.  ``#`` starts a comment.  Unknown keys and sections are
    rejected with their line number.
    """
    top: dict[str, object] = {}
    algo_order: list[str] = []
    algo_params: dict[str, dict[str, float]] = {}
    section: str | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {lineno}: unterminated section header")
            header = line[1:-1].strip()
            if not header.startswith("algorithm."):
                raise ConfigError(f"line {lineno}: unknown section [{header}]")
            name = header[len("algorithm.") :]
            if name not in STEPPER_REGISTRY:
                raise ConfigError(
                    f"line {lineno}: unknown algorithm {name!r}; "
                    f"known: {sorted(STEPPER_REGISTRY)}"
                )
            if name in algo_params:
                raise ConfigError(f"line {lineno}: duplicate section [algorithm.{name}]")
            algo_order.append(name)
            algo_params[name] = {}
            section = name
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if section is None:
            if key not in _TOP_KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in top:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            conv = _TOP_KEYS[key][0]
            try:
                top[key] = conv(value)
            except ValueError:
                raise ConfigError(
                    f"line {lineno}: cannot parse {key} value {value!r} as {conv.__name__}"
                ) from None
        else:
            if key not in known_params(section):
                raise ConfigError(
                    f"line {lineno}: unknown hyperparameter {key!r} for algorithm "
                    f"{section!r}; known: {sorted(known_params(section))}"
                )
            if key in algo_params[section]:
                raise ConfigError(f"line {lineno}: duplicate hyperparameter {key!r}")
            try:
                algo_params[section][key] = float(value)
            except ValueError:
                raise ConfigError(
                    f"line {lineno}: cannot parse {key} value {value!r} as float"
                ) from None

    for key, (_, required) in _TOP_KEYS.items():
        if required and key not in top:
            raise ConfigError(f"missing required key {key!r}")

    specs = tuple(
        AlgorithmSpec(name, tuple(sorted(algo_params[name].items()))) for name in algo_order
    )
    config = ExperimentConfig(algorithms=specs, **top)  # type: ignore[arg-type]
    config.validate()
    return config


def serialize_config(config: ExperimentConfig) -> str:
    """Render a config back to the flat file format; parsing it recovers equality."""
    lines = []
    defaults = ExperimentConfig(
        kind=config.kind, m=config.m, M=config.M, algorithms=config.algorithms
    )
    for key in _TOP_KEYS:
        value = getattr(config, key)
        if value is None:
            continue
        required = _TOP_KEYS[key][1]
        if not required and value == getattr(defaults, key):
            continue
        lines.append(f"{key} = {value}")
    for spec in config.algorithms:
        lines.append(f"[algorithm.{spec.name}]")
        for pkey, pval in spec.params:
            lines.append(f"{pkey} = {pval!r}")
    return "\n".join(lines) + "\n"


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
