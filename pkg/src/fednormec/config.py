"""YAML experiment specs.

Grammar (schema version 1)::

    name: demo                   # output subdirectory
    algorithm: fed-alpha-normec  # or dp-fedavg
    replicates: 1                # replicate r runs with seed run.seed + r
    output: null                 # overrides the output root
    problem: {family, clients, samples, dim, heterogeneity, curvature_floor, x0_scale, seed}
    run: {gamma, beta, eta, alpha, p, sigma_dp, K, local_mode, local_steps, private,
          server_normalize, init, init_offset, seed, theory_mode}
    privacy: {epsilon, delta, c, sigma}   # optional; sigma is theory | experiment
    schedule: {name, D1, D2, T, B_hat, R}   # optional corollary schedule
    sweep: {p: [...], beta: [...]}          # optional grid over run fields

``run.gamma: null`` means ``1/(2L)``; ``run.eta: null`` means the step-size
cap ``eta_max`` (needs a nonzero initial memory error). Unknown keys, wrong
types and violated constraints raise :class:`ConfigError` with the dotted path
of the offending key. Exponent literals such as ``1e-05`` are read as numbers.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field

import yaml

from .core import ConfigError, RunConfig
from .privacy import SCHEDULES
from .problems import FAMILIES, SuiteSpec

SCHEMA_VERSION = 1
ALGORITHMS = ("fed-alpha-normec", "dp-fedavg")

RUN_DEFAULTS = {
    "gamma": None, "beta": 0.01, "eta": 0.01, "alpha": 0.01, "p": 1.0, "sigma_dp": 0.0, "K": 300,
    "local_mode": "gd", "local_steps": 1, "private": False, "server_normalize": True,
    "init": "exact-residual", "init_offset": 0.0, "seed": 0, "theory_mode": False,
}
PRIVACY_DEFAULTS = {"epsilon": 8.0, "delta": 1e-5, "c": 1.0, "sigma": "theory"}
SCHEDULE_DEFAULTS = {"name": "manual", "D1": 1.0, "D2": 0.5, "T": 2, "B_hat": None, "R": None}
NULLABLE = {"run.gamma", "run.eta", "schedule.B_hat", "schedule.R", "output"}


@dataclass
class ExperimentSpec:
    name: str = "experiment"
    algorithm: str = "fed-alpha-normec"
    replicates: int = 1
    output: str | None = None
    problem: SuiteSpec = field(default_factory=SuiteSpec)
    run: dict = field(default_factory=lambda: dict(RUN_DEFAULTS))
    privacy: dict | None = None
    schedule: dict | None = None
    sweep: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"schema_version": SCHEMA_VERSION, "name": self.name, "algorithm": self.algorithm,
               "replicates": self.replicates, "output": self.output,
               "problem": asdict(self.problem), "run": dict(self.run)}
        if self.privacy is not None:
            out["privacy"] = dict(self.privacy)
        if self.schedule is not None:
            out["schedule"] = dict(self.schedule)
        if self.sweep:
            out["sweep"] = {k: list(v) for k, v in self.sweep.items()}
        return out

    def spec_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def with_run(self, **changes) -> "ExperimentSpec":
        new = copy.deepcopy(self)
        new.run.update(changes)
        return new


def _typed(path, value, default):
    """Coerce ``value`` to the type of ``default`` or raise."""
    if value is None:
        if path in NULLABLE:
            return None
        raise ConfigError(path, "must not be null")
    proto = default
    if proto is None:
        proto = 0.0
    if isinstance(proto, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected a boolean, got {value!r}")
        return value
    if isinstance(proto, int) and not isinstance(proto, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if isinstance(proto, float):
        if isinstance(value, str):
            # YAML 1.1 reads exponents without a dot (1e-05) as strings
            try:
                value = float(value)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(proto, str):
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    return value


def _section(path, raw, defaults):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(path, f"expected a mapping, got {type(raw).__name__}")
    unknown = sorted(set(raw) - set(defaults))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}", "unknown key")
    out = dict(defaults)
    for key, val in raw.items():
        out[key] = _typed(f"{path}.{key}", val, defaults[key])
    return out


def _validate_run(run: dict):
    probe = {k: v for k, v in run.items()}
    for key in ("gamma", "eta"):
        if probe[key] is None:
            probe[key] = 1.0
    try:
        RunConfig(**probe)
    except ConfigError as exc:
        raise ConfigError(f"run.{exc.key}", str(exc).split(": ", 1)[1]) from None


def spec_from_dict(doc) -> ExperimentSpec:
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "expected a mapping at the top level")
    top = {"schema_version", "name", "algorithm", "replicates", "output", "problem", "run",
           "privacy", "schedule", "sweep"}
    unknown = sorted(set(doc) - top)
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version!r}")
    name = _typed("name", doc.get("name", "experiment"), "")
    algorithm = _typed("algorithm", doc.get("algorithm", "fed-alpha-normec"), "")
    if algorithm not in ALGORITHMS:
        raise ConfigError("algorithm", f"must be one of {ALGORITHMS}, got {algorithm!r}")
    replicates = _typed("replicates", doc.get("replicates", 1), 1)
    if replicates < 1:
        raise ConfigError("replicates", "must be >= 1")
    output = doc.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output", f"expected a string, got {output!r}")

    prob = _section("problem", doc.get("problem"), asdict(SuiteSpec()))
    if prob["family"] not in FAMILIES:
        raise ConfigError("problem.family", f"must be one of {FAMILIES}, got {prob['family']!r}")
    for key in ("clients", "samples", "dim"):
        if prob[key] < 1:
            raise ConfigError(f"problem.{key}", "must be >= 1")
    for key in ("heterogeneity", "curvature_floor"):
        if prob[key] < 0:
            raise ConfigError(f"problem.{key}", "must be >= 0")

    run = _section("run", doc.get("run"), RUN_DEFAULTS)
    _validate_run(run)

    privacy = None
    if doc.get("privacy") is not None:
        privacy = _section("privacy", doc["privacy"], PRIVACY_DEFAULTS)
        if not privacy["epsilon"] > 0:
            raise ConfigError("privacy.epsilon", "must be > 0")
        if not 0 < privacy["delta"] < 1:
            raise ConfigError("privacy.delta", "must lie in (0, 1)")
        if not privacy["c"] > 0:
            raise ConfigError("privacy.c", "must be > 0")
        if privacy["sigma"] not in ("theory", "experiment"):
            raise ConfigError("privacy.sigma", "must be 'theory' or 'experiment'")

    schedule = None
    if doc.get("schedule") is not None:
        schedule = _section("schedule", doc["schedule"], SCHEDULE_DEFAULTS)
        if schedule["name"] not in SCHEDULES:
            raise ConfigError("schedule.name", f"must be one of {SCHEDULES}")

    sweep = doc.get("sweep") or {}
    if not isinstance(sweep, dict):
        raise ConfigError("sweep", "expected a mapping of run field -> list")
    clean = {}
    for key, values in sweep.items():
        path = f"sweep.{key}"
        if key not in RUN_DEFAULTS:
            raise ConfigError(path, "unknown run field")
        if not isinstance(values, list) or not values:
            raise ConfigError(path, "expected a non-empty list")
        clean[key] = [_typed(path, v, RUN_DEFAULTS[key]) for v in values]
        for v in clean[key]:
            try:
                _validate_run({**run, key: v})
            except ConfigError as exc:
                raise ConfigError(path, str(exc).split(": ", 1)[1]) from None

    return ExperimentSpec(name, algorithm, replicates, output, SuiteSpec(**prob), run, privacy,
                          schedule, clean)


def parse_config(text: str) -> ExperimentSpec:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<document>", f"malformed YAML: {exc}") from None
    return spec_from_dict(doc)


def load_config(path) -> ExperimentSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize(spec: ExperimentSpec) -> str:
    return yaml.safe_dump(spec.to_dict(), sort_keys=False, default_flow_style=False)


__all__ = ["ALGORITHMS", "ConfigError", "ExperimentSpec", "load_config", "parse_config",
           "serialize", "spec_from_dict", "SCHEMA_VERSION"]
