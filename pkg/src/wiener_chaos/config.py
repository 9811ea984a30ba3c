"""Run configuration (JSON) for the command line front end."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .cm_basis import HFunction, TimeInterval, project
from .errors import DomainError
from .expr import parse_expr
from .parabolic1d import CoefficientSet, SpatialGrid
from .presets import PRESETS, preset

Scalar = Union[float, str]


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Coefficients(_Block):
    a: Optional[Scalar] = None
    b: Optional[Scalar] = None
    c: Optional[Scalar] = None
    rho: Optional[Scalar] = None
    sigma: Optional[Scalar] = None
    nu: Optional[Scalar] = None

    @field_validator("*")
    @classmethod
    def _parses(cls, v):
        if isinstance(v, str):
            parse_expr(v)
        return v


class Equation(_Block):
    preset: Optional[str] = None
    coefficients: Coefficients = Field(default_factory=Coefficients)
    v: Optional[Scalar] = None
    f: Optional[Scalar] = None
    g: Optional[Scalar] = None

    @field_validator("preset")
    @classmethod
    def _known(cls, v):
        if v is not None and v not in PRESETS:
            raise ValueError(f"unknown preset {v!r}; available: {sorted(PRESETS)}")
        return v

    @field_validator("v", "f", "g")
    @classmethod
    def _parses(cls, v):
        if isinstance(v, str):
            parse_expr(v)
        return v

    @model_validator(mode="after")
    def _complete(self):
        if self.preset is None:
            if self.coefficients.a is None:
                raise ValueError("coefficient 'a' is required without a preset")
            if self.v is None:
                raise ValueError("initial datum 'v' is required without a preset")
        return self


class Grid(_Block):
    L: float = Field(20.0, gt=0)
    n_x: int = Field(1024, ge=16, le=1 << 16)
    mode: Literal["periodic", "bounded"] = "periodic"
    fd_order: Literal[2, 4] = 2


class Time(_Block):
    T: float = Field(1.0, gt=0, le=100)
    dt: float = Field(1e-3, gt=0)

    @model_validator(mode="after")
    def _steps(self):
        n = self.T / self.dt
        if abs(n - round(n)) > 1e-9 * n:
            raise ValueError(f"dt={self.dt} does not divide T={self.T}")
        return self


class Truncation(_Block):
    N: int = Field(6, ge=0, le=20)
    K: int = Field(16, ge=1, le=64)


class Outputs(_Block):
    dir: str = "out"
    formats: list[Literal["csv", "json"]] = ["csv"]
    record: Union[Literal["final", "all"], list[float]] = "final"
    spatial_norm: Literal["l2", "h1", "h-1"] = "l2"
    integrated: bool = False


class Mc(_Block):
    M: int = Field(100_000, ge=1)
    steps: int = Field(1000, ge=2)
    seed: int = Field(20240601, ge=0, lt=2 ** 64)


class HSpec(_Block):
    coeffs: Optional[list[float]] = None
    expr: Optional[str] = None
    K: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _one(self):
        if (self.coeffs is None) == (self.expr is None):
            raise ValueError("give exactly one of 'coeffs' or 'expr'")
        if self.expr is not None:
            parse_expr(self.expr)
        return self


class RunConfig(_Block):
    equation: Equation
    grid: Grid = Field(default_factory=Grid)
    time: Time = Field(default_factory=Time)
    truncation: Truncation = Field(default_factory=Truncation)
    weights: list[tuple[float, float]] = [(0.0, 0.0)]
    outputs: Outputs = Field(default_factory=Outputs)
    mc: Mc = Field(default_factory=Mc)
    h: Optional[HSpec] = None

    # -- builders ---------------------------------------------------------
    def spatial_grid(self) -> SpatialGrid:
        return SpatialGrid(self.grid.L, self.grid.n_x, self.grid.mode, self.grid.fd_order)

    def interval(self) -> TimeInterval:
        return TimeInterval.from_dt(self.time.T, self.time.dt)

    def problem(self):
        """(CoefficientSet, v array, f, g) with preset values overridden by explicit keys."""
        base = preset(self.equation.preset) if self.equation.preset else \
            {"coefficients": {}, "v": None, "f": None, "g": None}
        coeffs = dict(base["coefficients"])
        for name, value in self.equation.coefficients.model_dump().items():
            if value is not None:
                coeffs[name] = parse_expr(value)
        grid = self.spatial_grid()
        v = parse_expr(self.equation.v) if self.equation.v is not None else base["v"]
        v_arr = v(0.0, grid.x) if callable(v) else np.full(grid.n_x, float(v))
        f = parse_expr(self.equation.f) if self.equation.f is not None else base["f"]
        g = parse_expr(self.equation.g) if self.equation.g is not None else base["g"]
        f, g = (_as_forcing(z) for z in (f, g))
        return CoefficientSet(**coeffs), np.array(v_arr, dtype=float), f, g

    def h_function(self) -> HFunction:
        if self.h is None:
            raise DomainError("config has no 'h' block")
        if self.h.coeffs is not None:
            return HFunction(np.array(self.h.coeffs))
        e = parse_expr(self.h.expr)
        K = self.h.K or self.truncation.K
        return project(lambda t: e(t, np.zeros_like(t)) if callable(e) else e, K, self.interval())

    def is_paper_example(self) -> bool:
        if self.equation.preset != "paper-example":
            return False
        return all(v is None for v in (*self.equation.coefficients.model_dump().values(),
                                       self.equation.v, self.equation.f, self.equation.g))

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.model_dump(mode="json"), sort_keys=True)
                              .encode()).hexdigest()

    def header(self) -> str:
        g = self.grid
        return (f"config_sha256={self.digest()} N={self.truncation.N} K={self.truncation.K} "
                f"grid=L{g.L:g}:n_x{g.n_x}:{g.mode} dt={self.time.dt:g}")


def _as_forcing(z):
    if z is None:
        return None
    if callable(z):
        return z
    if z == 0:
        return None
    return lambda t, x, c=float(z): np.full(np.shape(x), c)


class ConfigError(Exception):
    """Unreadable or schema-invalid configuration."""


def _describe(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg} (line {exc.lineno})") from None
    return parse_config(raw)


def parse_config(raw: dict) -> RunConfig:
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_describe(exc)) from None
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    try:
        cfg.spatial_grid()
        cfg.interval()
        cfg.problem()
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    return cfg
