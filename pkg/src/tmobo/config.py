"""Experiment configuration: TOML parsing, validation and serialization."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .problems import make_problem
from .surrogate import Family, FitConfig

__all__ = ["ConfigError", "AcqBudget", "FitSettings", "ExperimentConfig", "load_config", "FAMILIES"]

FAMILIES = ("StudentT", "Gaussian", "Both")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class AcqBudget:
    """Acquisition search effort. ``n_random = 0`` means ``2000 * d``."""

    n_random: int = 0
    topk: int = 5
    refine_evals: int = 100
    unit_variance_cdf: bool = True

    def random_samples(self, d):
        return self.n_random if self.n_random > 0 else 2000 * d


@dataclass(frozen=True)
class FitSettings:
    n_starts: int = 10
    seed: int = 0
    standardize: bool = True
    isotropic: bool = False
    maxiter: int = 200
    bounds: dict = field(default_factory=dict)

    def fit_config(self, family, seed) -> FitConfig:
        return FitConfig(
            family=Family.parse(family), n_starts=self.n_starts, seed=seed, bounds=dict(self.bounds),
            standardize=self.standardize, isotropic=self.isotropic, maxiter=self.maxiter,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "dtlz1"
    family: str = "Both"
    n_init: int = 10
    n_acq: int = 30
    reps: int = 10
    seed: int = 0
    ref_point: tuple = (400.0, 400.0, 400.0)
    noise_sd: float = 1.0
    output_dir: str = "results"
    lhs_candidates: int = 1000
    warm_start: bool = False
    ideal_point: tuple = ()
    fit: FitSettings = field(default_factory=FitSettings)
    acq: AcqBudget = field(default_factory=AcqBudget)

    def __post_init__(self):
        object.__setattr__(self, "ref_point", tuple(float(v) for v in self.ref_point))
        object.__setattr__(self, "ideal_point", tuple(float(v) for v in self.ideal_point))
        self.validate()

    def validate(self):
        if self.family not in FAMILIES:
            raise ConfigError("family", f"must be one of {FAMILIES}, got {self.family!r}")
        try:
            problem = make_problem(self.problem)
        except ValueError as exc:
            raise ConfigError("problem", str(exc)) from None
        for name, lo in (("n_init", 2), ("n_acq", 0), ("reps", 1), ("lhs_candidates", 1)):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < lo:
                raise ConfigError(name, f"must be an integer >= {lo}, got {v!r}")
        if len(self.ref_point) != problem.dim_out:
            raise ConfigError("ref_point", f"needs {problem.dim_out} entries, got {len(self.ref_point)}")
        if self.ideal_point and len(self.ideal_point) != problem.dim_out:
            raise ConfigError("ideal_point", f"needs {problem.dim_out} entries or none")
        if not self.noise_sd >= 0:
            raise ConfigError("noise_sd", "must be non-negative")
        if self.fit.n_starts < 1:
            raise ConfigError("fit.n_starts", "must be >= 1")
        try:
            self.fit.fit_config(Family.STUDENT_T, 0)
        except ValueError as exc:
            raise ConfigError("fit.bounds", str(exc)) from None
        if self.acq.topk < 0 or self.acq.refine_evals < 0 or self.acq.n_random < 0:
            raise ConfigError("acq", "budgets must be non-negative")

    @property
    def families(self):
        if self.family == "Both":
            return [Family.STUDENT_T, Family.GAUSSIAN]
        return [Family.parse(self.family)]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["ref_point"] = list(self.ref_point)
        d["ideal_point"] = list(self.ideal_point)
        d["fit"]["bounds"] = {k: list(v) for k, v in self.fit.bounds.items()}
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        fit_raw = raw.pop("fit", {})
        acq_raw = raw.pop("acq", {})
        _check_keys(raw, cls, "", skip={"fit", "acq"})
        _check_keys(fit_raw, FitSettings, "fit.")
        _check_keys(acq_raw, AcqBudget, "acq.")
        bounds = fit_raw.get("bounds", {})
        for k, v in bounds.items():
            if k not in ("lengthscale", "signal_variance", "noise_variance", "nu"):
                raise ConfigError(f"fit.bounds.{k}", "unknown key")
            if len(v) != 2 or not v[0] <= v[1]:
                raise ConfigError(f"fit.bounds.{k}", f"need [lo, hi] with lo <= hi, got {v}")
        fit_raw = {**fit_raw, "bounds": {k: tuple(float(x) for x in v) for k, v in bounds.items()}}
        try:
            return cls(**raw, fit=FitSettings(**fit_raw), acq=AcqBudget(**acq_raw))
        except TypeError as exc:
            raise ConfigError("config", str(exc)) from None

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("config", f"not valid TOML: {exc}") from None
        return cls.from_dict(raw)


def _check_keys(raw, cls, prefix, skip=()):
    known = {f.name for f in dataclasses.fields(cls)} - set(skip)
    for key in raw:
        if key not in known:
            raise ConfigError(prefix + key, "unknown key")


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from None
    return ExperimentConfig.loads(text)
