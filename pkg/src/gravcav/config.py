"""Run configuration: a JSON document with sections material, density,
solver, sweep, critical and output.  Every key has a default, so an empty
document (or none at all) reproduces the reference experiments.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .energy_model import paper_model
from .errors import ConfigError
from .gravity import DensityProfile

__all__ = [
    "MaterialConfig",
    "DensityConfig",
    "SolverConfig",
    "SweepConfig",
    "CriticalConfig",
    "OutputConfig",
    "RunConfig",
    "load_config",
]


@dataclass
class MaterialConfig:
    p: float = 2.0
    kappa: float = 1.0
    C: float = 1.0
    gamma: float = 2.0
    delta: float = 2.0
    D: Optional[float] = None  # None selects the stress-free value

    def build(self):
        return paper_model(self.p, self.kappa, self.C, self.gamma, self.delta, self.D)


@dataclass
class DensityConfig:
    rho0: float = 1.0
    csv: Optional[str] = None  # two-column R,rho0 file; overrides rho0

    def build(self):
        if self.csv:
            return DensityProfile.from_csv(self.csv)
        return DensityProfile.constant(self.rho0)


@dataclass
class SolverConfig:
    epsilon: float = 1e-3
    method: str = "hybrid"
    n_nodes: int = 2001
    grid_ratio: float = 1e-3
    rtol: float = 1e-10
    atol: float = 1e-12
    tol: float = 1e-8
    max_iter: int = 100
    flow_dt: float = 1e-3
    flow_max_steps: int = 8000
    flow_stop_tol: float = 1e-8
    consistency_tol: float = 1e-2

    def __post_init__(self):
        if self.method not in ("hybrid", "shoot", "flow"):
            raise ConfigError(f"unknown method {self.method!r} (hybrid, shoot or flow)")
        if not 0.0 < self.epsilon <= 0.1:
            raise ConfigError("epsilon must lie in (0, 0.1]")
        if self.n_nodes < 3:
            raise ConfigError("n_nodes must be at least 3")


@dataclass
class SweepConfig:
    lambda_min: float = 0.9
    lambda_max: float = 1.2
    n_lambda: int = 13
    rho0_min: float = 0.5
    rho0_max: float = 1.5
    n_rho0: int = 11
    workers: Optional[int] = None

    def __post_init__(self):
        if self.n_lambda < 2 or self.n_rho0 < 2:
            raise ConfigError("a sweep needs at least two points per axis")


@dataclass
class CriticalConfig:
    lambda_lo: float = 1.0
    lambda_hi: float = 1.2
    c_tol: float = 1e-2
    tol: float = 1e-3
    n_scan: int = 5


@dataclass
class OutputConfig:
    dir: str = "out"
    profiles: bool = True
    trace: bool = False


_SECTIONS = {
    "material": MaterialConfig,
    "density": DensityConfig,
    "solver": SolverConfig,
    "sweep": SweepConfig,
    "critical": CriticalConfig,
    "output": OutputConfig,
}


@dataclass
class RunConfig:
    material: MaterialConfig = field(default_factory=MaterialConfig)
    density: DensityConfig = field(default_factory=DensityConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    critical: CriticalConfig = field(default_factory=CriticalConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(doc) - set(_SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
        parts = {}
        for name, kind in _SECTIONS.items():
            sec = doc.get(name, {})
            if not isinstance(sec, dict):
                raise ConfigError(f"section {name!r} must be an object")
            allowed = {f.name for f in fields(kind)}
            bad = set(sec) - allowed
            if bad:
                raise ConfigError(f"unknown key(s) in {name!r}: {', '.join(sorted(bad))}")
            try:
                parts[name] = kind(**sec)
            except TypeError as exc:
                raise ConfigError(f"section {name!r}: {exc}") from exc
        return cls(**parts)

    def to_dict(self):
        return asdict(self)

    def override(self, section, key, value):
        """Set one key, re-running that section's validation."""
        sec = getattr(self, section)
        data = asdict(sec)
        data[key] = value
        setattr(self, section, type(sec)(**data))


def load_config(path=None):
    """Read a JSON config file; ``None`` gives all defaults."""
    if path is None:
        return RunConfig()
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return RunConfig.from_dict(doc)
