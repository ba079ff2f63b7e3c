"""Experiment configuration: a JSON document checked against a published schema."""
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, message, path=""):
        super().__init__("%s: %s" % (path or "<root>", message))
        self.path = path


@dataclass
class ModelConfig:
    n: int = 4
    r: int = 1
    s: int = 3
    period: float = 2 * np.pi
    eps0: float = 0.5


@dataclass
class DeformationConfig:
    kind: str = "conformal"
    eps: float = 0.05
    order: int = 2
    phi: str = "exp"
    eps_sweep: list = field(default_factory=lambda: [0.2, 0.1, 0.05])


@dataclass
class IntegrationConfig:
    step: float = 5e-4
    jacobi_horizon: float = 10.0
    lyapunov_horizon: float = 20.0
    lyapunov_transient: float = 150.0
    qr_window: float = 0.5
    cone_horizon: float = 2 * np.pi


@dataclass
class ScanConfig:
    grid_points: int = 41
    t_points: int = 16
    random_planes: int = 32
    refine_points: int = 21
    seeds_per_class: int = 64
    directions: int = 32
    theta: float = 0.1
    opening: float = 0.9
    angle_samples: int = 200
    oracle_points: int = 100


@dataclass
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    deformation: DeformationConfig = field(default_factory=DeformationConfig)
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)
    seed: int = 0

    def to_dict(self):
        return dataclasses.asdict(self)

    def digest(self):
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def schema():
    return json.loads(resources.files("fermitube").joinpath("config_schema.json").read_text())


def _path(err):
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "required":
        missing = err.message.split("'")[1]
        parts.append(missing)
    return ".".join(parts)


def validate(doc):
    """Schema and cross-field checks; raises ConfigError naming the field path.

    With several missing fields all of them are named in one message.
    """
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(e.absolute_path), e.message))
    if errors:
        missing = [_path(e) for e in errors if e.validator == "required"]
        if missing:
            raise ConfigError("missing required field(s) " + ", ".join(missing), missing[0])
        err = errors[0]
        raise ConfigError(err.message, _path(err))
    m, d, sc = doc["model"], doc["deformation"], doc["scan"]
    if m["s"] > m["n"] - 1 or m["s"] < m["r"] + 1:
        raise ConfigError("s must lie in [r + 1, n - 1]", "model.s")
    for i, eps in enumerate([d["eps"]] + list(d["eps_sweep"])):
        where = "deformation.eps" if i == 0 else "deformation.eps_sweep.%d" % (i - 1)
        if eps >= m["eps0"]:
            raise ConfigError("eps must be smaller than eps0", where)
    if d["eps"] / sc["theta"] > m["eps0"]:
        raise ConfigError("eps / theta must not exceed eps0", "scan.theta")


def from_dict(doc):
    validate(doc)
    return ExperimentConfig(model=ModelConfig(**doc["model"]),
                            deformation=DeformationConfig(**doc["deformation"]),
                            integration=IntegrationConfig(**doc["integration"]),
                            scan=ScanConfig(**doc["scan"]), seed=doc["seed"])


def load(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("not valid JSON (%s)" % exc) from exc
    return from_dict(doc)
