"""Experiment configuration: strict JSON schema with unknown-key rejection.

A config names a grid, a generator, a stepper, an optional weak-bound
evaluator, an output directory, and a list of named checks.  Parsing is
strict — unknown keys are errors, because silent typos would invalidate
tolerance-sensitive experiments — and the emitted echo re-parses to an
identical config.
"""

import json
from dataclasses import asdict, dataclass, field

from .errors import ConfigurationError
from .flow import SCHEMES, StepperConfig
from .generators import FAMILIES, GeneratorSpec
from .grid import GridSpec

_GRID_KEYS = {"dim", "points_per_axis", "period"}
_GENERATOR_KEYS = {"family", "amplitude", "seed", "eta", "mollify_scales", "kappa_target"}
_STEPPER_KEYS = {
    "scheme",
    "cfl_safety",
    "T",
    "snapshot_times",
    "series_stride",
    "eps_run",
    "track_derivatives",
}
_EVALUATOR_KEYS = {"beta", "C_grid", "t_grid", "points", "kappa"}
_TOP_KEYS = {"name", "grid", "generator", "stepper", "evaluator", "outputs", "checks", "solver"}

_SOLVERS = ("rdt", "perturbation", "ricci")


def _reject_unknown(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigurationError(f"{where} must be a mapping")
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigurationError(f"unknown key(s) in {where}: {', '.join(unknown)}")


@dataclass
class ExperimentConfig:
    name: str
    grid: dict
    generator: dict
    stepper: dict = field(default_factory=dict)
    evaluator: dict = field(default_factory=dict)
    outputs: str = "runs"
    checks: tuple = ()
    solver: str = "rdt"

    def __post_init__(self):
        if not self.name or not isinstance(self.name, str):
            raise ConfigurationError("config needs a non-empty name")
        _reject_unknown(self.grid, _GRID_KEYS, "grid")
        _reject_unknown(self.generator, _GENERATOR_KEYS, "generator")
        _reject_unknown(self.stepper, _STEPPER_KEYS, "stepper")
        _reject_unknown(self.evaluator, _EVALUATOR_KEYS, "evaluator")
        if self.solver not in _SOLVERS:
            raise ConfigurationError(f"unknown solver {self.solver!r}")
        self.checks = tuple(self.checks)
        # fail fast on module-level preconditions before any compute
        self.grid_spec()
        self.generator_spec()
        self.stepper_config()
        family = self.generator.get("family")
        if family not in FAMILIES:
            raise ConfigurationError(f"unknown generator family {family!r}")
        scheme = self.stepper.get("scheme", "explicit-rk2")
        if scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {scheme!r}")

    def grid_spec(self) -> GridSpec:
        return GridSpec(**self.grid)

    def generator_spec(self) -> GeneratorSpec:
        kw = dict(self.generator)
        if "mollify_scales" in kw:
            kw["mollify_scales"] = tuple(kw["mollify_scales"])
        return GeneratorSpec(**kw)

    def stepper_config(self) -> StepperConfig:
        kw = dict(self.stepper)
        if "snapshot_times" in kw:
            kw["snapshot_times"] = tuple(kw["snapshot_times"])
        return StepperConfig(**kw)

    def evaluator_params(self):
        ev = dict(self.evaluator)
        ev.setdefault("beta", 0.4)
        ev.setdefault("C_grid", [0.25, 0.5, 1.0, 2.0, 4.0])
        ev.setdefault("t_grid", None)
        ev.setdefault("points", 5)
        ev.setdefault("kappa", None)
        return ev

    def to_dict(self):
        d = asdict(self)
        d["checks"] = list(self.checks)
        return d

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            with open(path, "w") as f:
                f.write(text)
        return text

    @classmethod
    def from_dict(cls, d):
        _reject_unknown(d, _TOP_KEYS, "config")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as f:
                d = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"{path}: invalid JSON ({e})") from e
        except OSError as e:
            raise ConfigurationError(f"{path}: {e}") from e
        return cls.from_dict(d)
