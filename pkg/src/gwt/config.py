"""Experiment configuration: a TOML file with nested sections.

Numbers may be written as TOML numbers or as short arithmetic strings over
``pi`` (``"-2*pi"``, ``"1/256"``, ``"4*pi/1024"``) which are evaluated once at
parse time.  Complex scalars are ``[re, im]`` pairs; complex matrices are split
into ``*_re`` / ``*_im`` entries and a scalar means a multiple of the identity.

A minimal file::

    name = "example1"
    eps = "1/256"
    T = 0.5

    [model]
    name = "example1"

    [initial]
    kind = "gaussian"
    x0 = ["pi/4"]
    p0 = [-0.5]
    C_im = 1.0

    [eta]
    bounds = [["-2*pi", "2*pi"]]
    N = [1024]

    [scheme]
    name = "SL-TS3"
    dt = ["1/8", "1/16", "1/32"]
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import tomli
import tomli_w

from .potentials import MODELS
from .wsolver import COMPOSITIONS, ORDERINGS, QUADRATURES, SCHEMES, TRACERS

INITIAL_KINDS = ("gaussian", "general")
GENERAL_BUILTINS = ("example2", "gaussian")
REPORTS = ("w", "psi", "diagnostics", "observables", "trajectory")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


# --- numeric expressions ------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
           ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def _eval_node(node):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        return _UNOPS[type(node.op)](_eval_node(node.operand))
    raise ValueError("unsupported expression")


def parse_number(value, where: str = "value") -> float:
    if isinstance(value, bool):
        raise ConfigError(where, "expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            out = _eval_node(ast.parse(value.strip(), mode="eval"))
        except (SyntaxError, ValueError, ZeroDivisionError) as exc:
            raise ConfigError(where, f"cannot evaluate {value!r} ({exc})") from None
        return float(out)
    raise ConfigError(where, f"expected a number, got {type(value).__name__}")


def _numbers(value, where: str) -> tuple[float, ...]:
    if isinstance(value, list):
        return tuple(parse_number(v, f"{where}[{i}]") for i, v in enumerate(value))
    return (parse_number(value, where),)


def _complex(value, where: str) -> complex:
    if isinstance(value, list):
        if len(value) != 2:
            raise ConfigError(where, "complex values are written as [re, im]")
        return complex(parse_number(value[0], where), parse_number(value[1], where))
    return complex(parse_number(value, where))


def _matrix(value, where: str):
    """Scalar or nested list -> float or tuple of tuples."""
    if isinstance(value, list):
        return tuple(_numbers(row, f"{where}[{i}]") for i, row in enumerate(value))
    return parse_number(value, where)


# --- sections -----------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    name: str = "example1"
    params: dict = field(default_factory=dict)
    require_divergence_free: bool = False


@dataclass(frozen=True)
class InitialSpec:
    """Gaussian data (``x0``, ``p0``, ``C``, ``gamma0``) or a named general profile."""

    kind: str = "gaussian"
    x0: tuple[float, ...] = (0.0,)
    p0: tuple[float, ...] = (0.0,)
    C_re: Any = 0.0
    C_im: Any = 1.0
    gamma0: complex = 0j
    normalize: bool = True
    builtin: str | None = None


@dataclass(frozen=True)
class GridSpec:
    """Periodic box; either fixed ``N`` per axis or ``dx_over_eps`` (``dx = dx_over_eps * eps``)."""

    bounds: tuple[tuple[float, float], ...] = ((-math.pi, math.pi),)
    N: tuple[int, ...] | None = None
    dx_over_eps: float | None = None


@dataclass(frozen=True)
class SchemeSpec:
    name: str = "SL-TS3"
    composition: str = "strang"
    dt: tuple[float, ...] = (1 / 32,)
    packet_ratio: int = 40
    quadrature: str = "trapezoid"
    tracer: str = "heun"
    ordering: str = "K-outer"
    half_quadratic: bool = True


@dataclass(frozen=True)
class ReferenceSpec:
    """Direct solver resolution (``dt = dt_over_eps * eps``)."""

    dt_over_eps: float = 1 / 32


@dataclass(frozen=True)
class SpaceStudySpec:
    """Spatial study: sweep eta point counts against a fine self-run at the same ``dt``."""

    N: tuple[int, ...] = (4, 8, 16, 32, 64)
    reference_N: int = 8192
    dt: float = 1 / 2048


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"
    reports: tuple[str, ...] = ("w", "psi", "diagnostics")
    observe_every: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    eps: tuple[float, ...] = (1 / 256,)
    T: float = 0.5
    seed: int = 0
    model: ModelSpec = field(default_factory=ModelSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    eta: GridSpec = field(default_factory=lambda: GridSpec(((-2 * math.pi, 2 * math.pi),), (1024,)))
    x: GridSpec | None = None
    scheme: SchemeSpec = field(default_factory=SchemeSpec)
    reference: ReferenceSpec = field(default_factory=ReferenceSpec)
    space: SpaceStudySpec | None = None
    outputs: OutputSpec = field(default_factory=OutputSpec)

    @property
    def dim(self) -> int:
        return len(self.eta.bounds)

    def __post_init__(self):
        validate(self)


def _even_count(n, where: str) -> int:
    if isinstance(n, bool) or not float(n).is_integer():
        raise ConfigError(where, f"point counts must be integers, got {n!r}")
    n = int(n)
    if n < 4 or n % 2:
        raise ConfigError(where, f"point counts must be even and >= 4, got {n}")
    return n


def validate(cfg: ExperimentConfig) -> None:
    if not cfg.eps:
        raise ConfigError("eps", "at least one value is required")
    for i, e in enumerate(cfg.eps):
        if not 0 < e <= 1:
            raise ConfigError(f"eps[{i}]", f"must lie in (0, 1], got {e}")
    # T = 0 is allowed: every pipeline then returns the initial data
    if not cfg.T >= 0:
        raise ConfigError("T", f"must be non-negative, got {cfg.T}")
    if cfg.model.name not in MODELS:
        raise ConfigError("model.name", f"unknown model {cfg.model.name!r}; known: {sorted(MODELS)}")
    d = cfg.dim
    for label, g in (("eta", cfg.eta), ("x", cfg.x)):
        if g is None:
            continue
        if len(g.bounds) != d:
            raise ConfigError(f"{label}.bounds", f"expected {d} axes, got {len(g.bounds)}")
        for i, (a, b) in enumerate(g.bounds):
            if not b > a:
                raise ConfigError(f"{label}.bounds[{i}]", f"upper bound must exceed lower ({a}, {b})")
        if g.N is None and g.dx_over_eps is None:
            raise ConfigError(label, "give either N or dx_over_eps")
        if g.N is not None:
            if len(g.N) != d:
                raise ConfigError(f"{label}.N", f"expected {d} entries, got {len(g.N)}")
            for i, n in enumerate(g.N):
                _even_count(n, f"{label}.N[{i}]")
        if g.dx_over_eps is not None and not g.dx_over_eps > 0:
            raise ConfigError(f"{label}.dx_over_eps", "must be positive")
    if cfg.eta.N is None:
        raise ConfigError("eta.N", "the eta grid needs explicit point counts")
    ini = cfg.initial
    if ini.kind not in INITIAL_KINDS:
        raise ConfigError("initial.kind", f"must be one of {INITIAL_KINDS}, got {ini.kind!r}")
    if ini.kind == "general" and ini.builtin not in GENERAL_BUILTINS:
        raise ConfigError("initial.builtin", f"must be one of {GENERAL_BUILTINS}, got {ini.builtin!r}")
    if len(ini.x0) != d or len(ini.p0) != d:
        raise ConfigError("initial", f"x0 and p0 need {d} components")
    for name in ("C_re", "C_im"):
        m = getattr(ini, name)
        if isinstance(m, tuple) and (len(m) != d or any(len(r) != d for r in m)):
            raise ConfigError(f"initial.{name}", f"expected a scalar or a {d}x{d} matrix")
    s = cfg.scheme
    for value, allowed, label in (
        (s.name, SCHEMES, "scheme.name"),
        (s.composition, COMPOSITIONS, "scheme.composition"),
        (s.quadrature, QUADRATURES, "scheme.quadrature"),
        (s.tracer, TRACERS, "scheme.tracer"),
        (s.ordering, ORDERINGS, "scheme.ordering"),
    ):
        if value not in allowed:
            raise ConfigError(label, f"must be one of {allowed}, got {value!r}")
    if not s.dt:
        raise ConfigError("scheme.dt", "at least one value is required")
    for i, h in enumerate(s.dt):
        if not h > 0:
            raise ConfigError(f"scheme.dt[{i}]", f"must be positive, got {h}")
    if int(s.packet_ratio) != s.packet_ratio or s.packet_ratio < 1:
        raise ConfigError("scheme.packet_ratio", "must be a positive integer")
    if not cfg.reference.dt_over_eps > 0:
        raise ConfigError("reference.dt_over_eps", "must be positive")
    if cfg.space is not None:
        if not cfg.space.N:
            raise ConfigError("space.N", "at least one value is required")
        for i, n in enumerate(cfg.space.N):
            _even_count(n, f"space.N[{i}]")
        _even_count(cfg.space.reference_N, "space.reference_N")
        if not cfg.space.dt > 0:
            raise ConfigError("space.dt", "must be positive")
    for r in cfg.outputs.reports:
        if r not in REPORTS:
            raise ConfigError("outputs.reports", f"unknown report {r!r}; known: {REPORTS}")
    if cfg.outputs.observe_every < 1:
        raise ConfigError("outputs.observe_every", "must be >= 1")


# --- parsing ------------------------------------------------------------------------


def _take(table: dict, where: str, allowed: set[str]) -> dict:
    if not isinstance(table, dict):
        raise ConfigError(where, "expected a table")
    extra = set(table) - allowed
    if extra:
        raise ConfigError(f"{where}.{sorted(extra)[0]}" if where else sorted(extra)[0], "unknown key")
    return table


def _grid(table: dict, where: str) -> GridSpec:
    t = _take(table, where, {"bounds", "N", "dx_over_eps"})
    if "bounds" not in t:
        raise ConfigError(f"{where}.bounds", "required")
    bounds = []
    for i, pair in enumerate(t["bounds"]):
        ab = _numbers(pair, f"{where}.bounds[{i}]")
        if len(ab) != 2:
            raise ConfigError(f"{where}.bounds[{i}]", "expected [lower, upper]")
        bounds.append(ab)
    N = None
    if "N" in t:
        raw = t["N"] if isinstance(t["N"], list) else [t["N"]] * len(bounds)
        N = tuple(_even_count(n, f"{where}.N[{i}]") for i, n in enumerate(raw))
    dx = parse_number(t["dx_over_eps"], f"{where}.dx_over_eps") if "dx_over_eps" in t else None
    return GridSpec(tuple(bounds), N, dx)


def from_dict(data: dict) -> ExperimentConfig:
    top = _take(data, "", {"name", "eps", "T", "seed", "model", "initial", "eta", "x", "scheme",
                           "reference", "space", "outputs"})
    kw: dict[str, Any] = {}
    if "name" in top:
        kw["name"] = str(top["name"])
    if "eps" in top:
        kw["eps"] = _numbers(top["eps"], "eps")
    if "T" in top:
        kw["T"] = parse_number(top["T"], "T")
    if "seed" in top:
        kw["seed"] = int(top["seed"])
    if "model" in top:
        m = _take(top["model"], "model", {"name", "params", "require_divergence_free"})
        params = {k: (v if isinstance(v, bool) else parse_number(v, f"model.params.{k}"))
                  for k, v in dict(m.get("params", {})).items()}
        kw["model"] = ModelSpec(str(m.get("name", "example1")), params, bool(m.get("require_divergence_free", False)))
    if "initial" in top:
        i = _take(top["initial"], "initial", {f.name for f in fields(InitialSpec)})
        kw["initial"] = InitialSpec(
            kind=str(i.get("kind", "gaussian")),
            x0=_numbers(i.get("x0", [0.0]), "initial.x0"),
            p0=_numbers(i.get("p0", [0.0]), "initial.p0"),
            C_re=_matrix(i.get("C_re", 0.0), "initial.C_re"),
            C_im=_matrix(i.get("C_im", 1.0), "initial.C_im"),
            gamma0=_complex(i.get("gamma0", 0.0), "initial.gamma0"),
            normalize=bool(i.get("normalize", True)),
            builtin=i.get("builtin"),
        )
    if "eta" in top:
        kw["eta"] = _grid(top["eta"], "eta")
    if "x" in top:
        kw["x"] = _grid(top["x"], "x")
    if "scheme" in top:
        s = _take(top["scheme"], "scheme", {f.name for f in fields(SchemeSpec)})
        base = SchemeSpec()
        kw["scheme"] = SchemeSpec(
            name=str(s.get("name", base.name)),
            composition=str(s.get("composition", base.composition)),
            dt=_numbers(s.get("dt", list(base.dt)), "scheme.dt"),
            packet_ratio=int(s.get("packet_ratio", base.packet_ratio)),
            quadrature=str(s.get("quadrature", base.quadrature)),
            tracer=str(s.get("tracer", base.tracer)),
            ordering=str(s.get("ordering", base.ordering)),
            half_quadratic=bool(s.get("half_quadratic", base.half_quadratic)),
        )
    if "reference" in top:
        r = _take(top["reference"], "reference", {"dt_over_eps"})
        kw["reference"] = ReferenceSpec(parse_number(r.get("dt_over_eps", 1 / 32), "reference.dt_over_eps"))
    if "space" in top:
        s = _take(top["space"], "space", {"N", "reference_N", "dt"})
        base = SpaceStudySpec()
        kw["space"] = SpaceStudySpec(
            N=tuple(_even_count(n, f"space.N[{i}]") for i, n in enumerate(s.get("N", list(base.N)))),
            reference_N=_even_count(s.get("reference_N", base.reference_N), "space.reference_N"),
            dt=parse_number(s.get("dt", base.dt), "space.dt"),
        )
    if "outputs" in top:
        o = _take(top["outputs"], "outputs", {"dir", "reports", "observe_every"})
        kw["outputs"] = OutputSpec(
            dir=str(o.get("dir", "out")),
            reports=tuple(str(r) for r in o.get("reports", list(OutputSpec().reports))),
            observe_every=int(o.get("observe_every", 1)),
        )
    return ExperimentConfig(**kw)


def loads(text: str) -> ExperimentConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError("<file>", f"TOML syntax error: {exc}") from None
    return from_dict(data)


def load(path: str | Path) -> ExperimentConfig:
    return loads(Path(path).read_text())


# --- serialization ------------------------------------------------------------------


def _plain(value):
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


def to_dict(cfg: ExperimentConfig) -> dict:
    out: dict[str, Any] = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if hasattr(value, "__dataclass_fields__"):
            section = {k: _plain(v) for k, v in asdict(value).items() if v is not None}
            out[f.name] = section
        else:
            out[f.name] = _plain(value)
    return out


def dumps(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(to_dict(cfg))


def dump(cfg: ExperimentConfig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(cfg))
    return path


def with_overrides(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(cfg, **changes)
