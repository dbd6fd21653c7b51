"""Run configuration: a flat JSON object, overridable from the command line."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .kernels import TuningParams, get_scheme
from .presets import SCENARIOS, get_tuning

_TUNING_KEYS = ("met_prop_sd", "met_repeats", "sigma2_shift", "c_range", "c_rate")


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a set of chains.

    ``scenario`` names an embedded data set; ``data`` is a CSV path and takes
    precedence. Tuning starts from the ``tuning`` preset (default: the
    scenario's) and any explicit field below replaces the preset value.
    """

    scenario: str | None = "intermediate"
    data: str | None = None
    scheme: str = "all"
    tuning: str | None = None
    met_prop_sd: tuple | None = None
    met_repeats: int | None = None
    sigma2_shift: float | None = None
    c_range: float | None = None
    c_rate: float | None = None
    iterations: int = 10_000
    chains: int = 5
    burn_in: float = 0.1
    thin: int = 1
    seed: int | None = 0
    jobs: int = 1
    out: str = "run"
    plot_points: int = 4000

    def __post_init__(self):
        if self.met_prop_sd is not None:
            object.__setattr__(self, "met_prop_sd", tuple(float(s) for s in self.met_prop_sd))
        get_scheme(self.scheme)
        if self.data is None and self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS} unless a data file is given")
        if int(self.iterations) < 1:
            raise ValueError("iterations must be > 0")
        if int(self.chains) < 1:
            raise ValueError("chains must be >= 1")
        if not 0.0 <= float(self.burn_in) <= 0.5:
            raise ValueError("burn_in must lie in [0, 0.5]")
        if int(self.thin) < 1 or int(self.plot_points) < 1:
            raise ValueError("thin and plot_points must be >= 1")
        if math.floor(self.burn_in * self.iterations) >= self.iterations:
            raise ValueError("burn_in leaves no draws")

    def tuning_params(self) -> TuningParams:
        name = self.tuning or self.scenario
        if name is None:
            if self.met_prop_sd is None:
                raise ValueError("give a tuning preset or met_prop_sd when running on a data file")
            base = {}
        else:
            base = asdict(get_tuning(name))
        for key in _TUNING_KEYS:
            val = getattr(self, key)
            if val is not None:
                base[key] = val
        return TuningParams(**base)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["met_prop_sd"] is not None:
            d["met_prop_sd"] = list(d["met_prop_sd"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def updated(self, **overrides) -> "RunConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})
