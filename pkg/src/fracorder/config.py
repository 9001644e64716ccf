"""Run configuration: a flat, typed, dotted key=value file (JSON accepted).

Example::

    seed = 1234
    problem.dim = 1
    problem.lengths = 1.0
    problem.n = 63
    problem.a11 = 1
    problem.b1 = 4.0
    problem.c = 0
    problem.initial = sin(pi*x)
    problem.x0 = 0.5
    problem.alpha = 0.5
    solver.method = spectral
    solver.t_min = 0.01
    solver.t_max = 1e5
    recovery.window = auto
    output.directory = out

Unknown keys are rejected; parse -> serialize -> parse is the identity.
The JSON form is the same flat mapping, e.g. {"problem.dim": 1, ...}.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .operator import ProblemSpec


def _as_float_list(v):
    if isinstance(v, (list, tuple)):
        return [float(x) for x in v]
    return [float(p) for p in str(v).split(",") if p.strip() != ""]


def _as_int_list(v):
    return [int(round(x)) for x in _as_float_list(v)]


def _as_str_list(v):
    if isinstance(v, (list, tuple)):
        return [str(x) for x in v]
    return [p.strip() for p in str(v).split(",") if p.strip() != ""]


def _as_window(v):
    if isinstance(v, str) and v.strip() == "auto":
        return "auto"
    vals = _as_float_list(v)
    if len(vals) != 2:
        raise ConfigError(f"window must be 'auto' or 't_lo,t_hi', got {v!r}")
    return (vals[0], vals[1])


@dataclass
class RunConfig:
    """Validated run description; one flat namespace of typed fields."""

    seed: int = 1234
    problem_dim: int = 1
    problem_lengths: list = field(default_factory=lambda: [1.0])
    problem_n: list = field(default_factory=lambda: [63])
    problem_a11: str = "1"
    problem_a12: str = "0"
    problem_a22: str = "1"
    problem_b1: str = "0"
    problem_b2: str = "0"
    problem_c: str = "0"
    problem_div_b: str = ""
    problem_initial: str = "sin(pi*x)"
    problem_x0: list = field(default_factory=lambda: [0.5])
    problem_alpha: float = 0.5
    solver_method: str = "spectral"
    solver_t_min: float = 0.01
    solver_t_max: float = 1e5
    solver_points_per_decade: int = 64
    solver_n_steps: int = 2048
    solver_grading: float = 0.0   # 0 = automatic (2-alpha)/alpha
    solver_t_final: float = 1.0
    recovery_window: object = "auto"
    recovery_noise: float = 0.0
    recovery_seeds: int = 1
    output_directory: str = "out"
    output_formats: list = field(default_factory=lambda: ["csv", "json"])


_CASTERS = {
    "seed": int,
    "problem.dim": int,
    "problem.lengths": _as_float_list,
    "problem.n": _as_int_list,
    "problem.a11": str,
    "problem.a12": str,
    "problem.a22": str,
    "problem.b1": str,
    "problem.b2": str,
    "problem.c": str,
    "problem.div_b": str,
    "problem.initial": str,
    "problem.x0": _as_float_list,
    "problem.alpha": float,
    "solver.method": str,
    "solver.t_min": float,
    "solver.t_max": float,
    "solver.points_per_decade": int,
    "solver.n_steps": int,
    "solver.grading": float,
    "solver.t_final": float,
    "recovery.window": _as_window,
    "recovery.noise": float,
    "recovery.seeds": int,
    "output.directory": str,
    "output.formats": _as_str_list,
}


def _attr(key: str) -> str:
    return key.replace(".", "_")


def parse_config(text: str) -> RunConfig:
    """Parse the key=value form; '#' starts a comment; keys must be known."""
    cfg = RunConfig()
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CASTERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            setattr(cfg, _attr(key), _CASTERS[key](value))
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    _validate(cfg)
    return cfg


def parse_config_mapping(mapping: dict) -> RunConfig:
    cfg = RunConfig()
    for key, value in mapping.items():
        if key not in _CASTERS:
            raise ConfigError(f"unknown key {key!r}")
        try:
            setattr(cfg, _attr(key), _CASTERS[key](value))
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from exc
    _validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    with open(path) as fh:
        text = fh.read()
    if str(path).endswith(".json"):
        try:
            mapping = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from exc
        if not isinstance(mapping, dict):
            raise ConfigError("JSON config must be a flat object")
        return parse_config_mapping(mapping)
    return parse_config(text)


def serialize_config(cfg: RunConfig) -> str:
    lines = []
    for key, caster in _CASTERS.items():
        v = getattr(cfg, _attr(key))
        if isinstance(v, (list, tuple)):
            v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
        lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"


def config_digest(cfg: RunConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()


def _validate(cfg: RunConfig) -> None:
    if cfg.problem_dim not in (1, 2):
        raise ConfigError("problem.dim must be 1 or 2")
    if cfg.solver_method not in ("spectral", "l1"):
        raise ConfigError("solver.method must be 'spectral' or 'l1'")
    if not (0.0 < cfg.problem_alpha < 1.0):
        raise ConfigError("problem.alpha must lie in (0, 1)")
    if not set(cfg.output_formats) <= {"csv", "json"}:
        raise ConfigError("output.formats entries must be csv or json")
    if cfg.solver_t_min <= 0 or cfg.solver_t_max <= cfg.solver_t_min:
        raise ConfigError("need 0 < solver.t_min < solver.t_max")
    if cfg.recovery_seeds < 1:
        raise ConfigError("recovery.seeds must be >= 1")
    if cfg.recovery_noise < 0:
        raise ConfigError("recovery.noise must be >= 0")
    if len(cfg.problem_lengths) != cfg.problem_dim:
        raise ConfigError("problem.lengths must match problem.dim")
    if len(cfg.problem_n) != cfg.problem_dim:
        raise ConfigError("problem.n must match problem.dim")
    if len(cfg.problem_x0) != cfg.problem_dim:
        raise ConfigError("problem.x0 must match problem.dim")


def to_problem_spec(cfg: RunConfig) -> ProblemSpec:
    """Materialize the ProblemSpec; structural violations surface as
    SpecError (reported as configuration errors by the CLI)."""
    kw = dict(
        dim=cfg.problem_dim,
        lengths=tuple(cfg.problem_lengths),
        n=tuple(cfg.problem_n),
        a11=cfg.problem_a11,
        c=cfg.problem_c,
        initial=cfg.problem_initial,
        x0=tuple(cfg.problem_x0),
        alpha=cfg.problem_alpha,
    )
    if cfg.problem_div_b.strip():
        kw["div_b"] = cfg.problem_div_b
    if cfg.problem_dim == 1:
        kw["b"] = (cfg.problem_b1,)
    else:
        kw["a12"] = cfg.problem_a12
        kw["a22"] = cfg.problem_a22
        kw["b"] = (cfg.problem_b1, cfg.problem_b2)
    return ProblemSpec(**kw)
