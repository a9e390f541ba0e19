"""JSON experiment configs: one document describes space, K, bifunction and run."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from .axioms import CorruptedMetric
from .bifunctions import (
    Bifunction,
    Property,
    SamplerConfig,
    constant_map,
    frechet_bifunction,
    half_squared_distance,
    identity_map,
    make_vi_bifunction,
    projection_map,
    scaling_map,
    segment_distance_bifunction,
    zero_bifunction,
)
from .sets import Ball, ConvexSet, Segment
from .solvers import SolveConfig
from .spaces import Point, Space


class ConfigError(ValueError):
    """The experiment description is malformed or inconsistent."""


class Algorithm(str, Enum):
    PPA = "PPA"
    HALPERN = "HALPERN"
    RESOLVENT_PATH = "RESOLVENT_PATH"


BIFUNCTIONS = ("half_squared_distance", "frechet", "segment_distance", "zero", "vi")
MAPS = ("identity", "constant", "ball_projection", "segment_projection", "scale")


def build_map(space: Space, desc: dict):
    name = desc.get("name")
    if name == "identity":
        return identity_map()
    if name == "constant":
        return constant_map(space, space.parse_point(desc["point"]))
    if name == "ball_projection":
        return projection_map(space, Ball(space.parse_point(desc["center"]), float(desc["radius"])))
    if name == "segment_projection":
        return projection_map(space, Segment(space.parse_point(desc["a"]), space.parse_point(desc["b"])))
    if name == "scale":
        return scaling_map(space, space.parse_point(desc["center"]), float(desc["factor"]))
    raise ConfigError(f"unknown map {name!r}; expected one of {MAPS}")


def build_bifunction(space: Space, desc: dict) -> Bifunction:
    name = desc.get("name")
    p = desc.get("params", {})
    if name == "half_squared_distance":
        return half_squared_distance(space, space.parse_point(p["a"]))
    if name == "frechet":
        return frechet_bifunction(space, [space.parse_point(a) for a in p["anchors"]], p.get("weights"))
    if name == "segment_distance":
        seg = Segment(space.parse_point(p["a"]), space.parse_point(p["b"]))
        return segment_distance_bifunction(space, seg, float(p.get("weight", 1.0)))
    if name == "zero":
        return zero_bifunction(space)
    if name == "vi":
        theta = p.get("theta")
        return make_vi_bifunction(space, build_map(space, p["map"]), theta=None if theta is None else float(theta))
    raise ConfigError(f"unknown bifunction {name!r}; expected one of {BIFUNCTIONS}")


@dataclass
class ExperimentConfig:
    """Parsed experiment document.

    The raw sections are kept as JSON so that ``to_json`` reproduces the
    input (after defaults are filled in) and sidecars re-parse to an equal
    config.
    """

    space: dict
    K: dict = field(default_factory=lambda: {"kind": "whole_space"})
    bifunction: Optional[dict] = None
    algorithm: Algorithm = Algorithm.PPA
    solve: Optional[dict] = None
    lambdas: Optional[list] = None
    reference: Optional[dict] = None
    checks: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    corrupt_metric: Optional[float] = None
    seed: int = 0
    output: dict = field(default_factory=lambda: {"dir": ".", "prefix": "trace"})

    # -- (de)serialization ------------------------------------------

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict) or "space" not in data:
            raise ConfigError("config must be a JSON object with a 'space' section")
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        data = copy.deepcopy(data)
        try:
            cfg = cls(**{k: v for k, v in data.items() if k != "algorithm"})
            cfg.algorithm = Algorithm(str(data.get("algorithm", "PPA")).upper())
            cfg.seed = int(cfg.seed)
            cfg.output = {"dir": ".", "prefix": "trace", **(cfg.output or {})}
            cfg.validate()
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc!r}") from exc
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_json(data)

    def to_json(self) -> dict:
        return {
            "space": self.space,
            "K": self.K,
            "bifunction": self.bifunction,
            "algorithm": self.algorithm.value,
            "solve": self.solve,
            "lambdas": self.lambdas,
            "reference": self.reference,
            "checks": self.checks,
            "sweep": self.sweep,
            "corrupt_metric": self.corrupt_metric,
            "seed": self.seed,
            "output": self.output,
        }

    def override(self, seed: Optional[int] = None, out: Optional[str] = None) -> "ExperimentConfig":
        cfg = copy.deepcopy(self)
        if seed is not None:
            cfg.seed = int(seed)
        if out is not None:
            cfg.output["dir"] = out
        return cfg

    # -- builders -------------------------------------------------------

    def validate(self) -> None:
        """Parse every section that is present, so errors surface before any work."""
        space = self.build_space()
        self.build_set(space)
        if self.bifunction is not None:
            self.build_bifunction(space)
        if self.solve is not None:
            self.build_solve(space)
        if self.reference is not None:
            space.parse_point(self.reference)
        if self.lambdas is not None and not all(float(v) > 0 for v in self.lambdas):
            raise ConfigError("lambdas must be positive")
        for p in self.checks.get("properties", []):
            Property(p)

    def build_space(self) -> Space:
        space = Space.from_json(self.space)
        if self.corrupt_metric is not None:
            space = CorruptedMetric(space, float(self.corrupt_metric))
        return space

    def build_set(self, space: Space) -> ConvexSet:
        return ConvexSet.from_json(space, self.K)

    def build_bifunction(self, space: Space) -> Bifunction:
        if self.bifunction is None:
            raise ConfigError("config has no 'bifunction' section")
        return build_bifunction(space, self.bifunction)

    def build_solve(self, space: Space) -> SolveConfig:
        if self.solve is None:
            raise ConfigError("config has no 'solve' section")
        cfg = SolveConfig.from_json(space, self.solve)
        cfg.rng_seed = self.seed
        return cfg

    def build_reference(self, space: Space) -> Optional[Point]:
        return None if self.reference is None else space.parse_point(self.reference)

    def sampler(self, space: Space) -> SamplerConfig:
        c = self.checks
        center = c.get("center")
        return SamplerConfig(
            samples=int(c.get("samples", 1000)),
            seed=self.seed,
            radius=float(c.get("radius", 2.0)),
            center=None if center is None else space.parse_point(center),
            tol=float(c.get("tol", 1e-8)),
        )


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)
