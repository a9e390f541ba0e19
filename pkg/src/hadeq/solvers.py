"""Outer algorithms: inexact proximal point and Halpern regularization.

Both drive :func:`hadeq.resolvent.solve_resolvent` and record an
:class:`IterateTrace`. Parameter sequences are described by
:class:`Schedule` objects, validated for the role they play (regularization
parameters, inexactness errors, Halpern weights) before anything runs.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .bifunctions import Bifunction, Property, PropertyReport, SamplerConfig, check_property
from .resolvent import ResolventError, ResolventRequest, Strategy, solve_resolvent
from .sets import ConvexSet
from .spaces import Point, Space

CSV_HEADER = ("k", "step", "residual", "dist_to_ref", "lambda_k", "alpha_k", "e_k")


class ScheduleError(ValueError):
    """A schedule does not satisfy the hypotheses of the role it is used in."""


class ScheduleKind(str, Enum):
    CONSTANT = "constant"
    GEOMETRIC = "geometric"
    HARMONIC = "harmonic"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Schedule:
    """A real sequence indexed by k = 0, 1, 2, ...

    CONSTANT gives ``c``; GEOMETRIC gives ``a * q**k``; HARMONIC gives
    ``1 / (k + 1)``; CUSTOM reads ``values[k]`` and holds the last entry
    beyond the end of the list.
    """

    kind: ScheduleKind
    c: float = 0.0
    a: float = 1.0
    q: float = 0.5
    values: tuple = ()

    @classmethod
    def constant(cls, c: float) -> "Schedule":
        return cls(ScheduleKind.CONSTANT, c=float(c))

    @classmethod
    def geometric(cls, a: float, q: float) -> "Schedule":
        return cls(ScheduleKind.GEOMETRIC, a=float(a), q=float(q))

    @classmethod
    def harmonic(cls) -> "Schedule":
        return cls(ScheduleKind.HARMONIC)

    @classmethod
    def custom(cls, values: Sequence[float]) -> "Schedule":
        if len(values) == 0:
            raise ScheduleError("custom schedule needs at least one value")
        return cls(ScheduleKind.CUSTOM, values=tuple(float(v) for v in values))

    def value(self, k: int) -> float:
        if self.kind is ScheduleKind.CONSTANT:
            return self.c
        if self.kind is ScheduleKind.GEOMETRIC:
            return self.a * self.q**k
        if self.kind is ScheduleKind.HARMONIC:
            return 1.0 / (k + 1)
        return self.values[min(k, len(self.values) - 1)]

    def head(self, n: int, start: int = 0) -> np.ndarray:
        return np.array([self.value(k) for k in range(start, start + n)])

    # -- role validation ----------------------------------------------

    def validate_lambda(self, theta: float, lambda_max: float, n: int) -> None:
        """Every value used in the first ``n`` steps lies in (theta, lambda_max]."""
        vals = self.head(n)
        if not np.all(np.isfinite(vals)):
            raise ScheduleError("lambda schedule has non-finite values")
        if np.any(vals <= theta):
            raise ScheduleError(f"lambda schedule must stay above theta={theta}, min is {vals.min():g}")
        if np.any(vals > lambda_max):
            raise ScheduleError(f"lambda schedule exceeds its bound {lambda_max:g}")

    def error_sum_bound(self) -> float:
        """Certified upper bound on sum_k e_k; raises if summability cannot be certified."""
        if self.kind is ScheduleKind.CONSTANT:
            if self.c != 0.0:
                raise ScheduleError("a constant error schedule is summable only when it is 0")
            return 0.0
        if self.kind is ScheduleKind.GEOMETRIC:
            if self.a < 0 or not 0.0 <= self.q < 1.0:
                raise ScheduleError("geometric error schedule needs a >= 0 and 0 <= q < 1")
            return self.a / (1.0 - self.q)
        if self.kind is ScheduleKind.CUSTOM:
            vals = np.asarray(self.values)
            if np.any(vals < 0) or not np.all(np.isfinite(vals)):
                raise ScheduleError("custom error schedule must be finite and non-negative")
            if vals[-1] != 0.0:
                raise ScheduleError("custom error schedule must end in 0 (the last value is held forever)")
            return float(vals.sum())
        raise ScheduleError("harmonic errors are not summable")

    def validate_alpha(self) -> None:
        """Halpern weights must lie in (0, 1), vanish, and have divergent sum."""
        if self.kind is not ScheduleKind.HARMONIC:
            raise ScheduleError(
                f"{self.kind.value} alpha schedule rejected: only harmonic weights are certified "
                "to vanish with divergent sum"
            )

    # -- serialization --------------------------------------------------

    def to_json(self) -> dict:
        if self.kind is ScheduleKind.CONSTANT:
            return {"kind": "constant", "c": self.c}
        if self.kind is ScheduleKind.GEOMETRIC:
            return {"kind": "geometric", "a": self.a, "q": self.q}
        if self.kind is ScheduleKind.HARMONIC:
            return {"kind": "harmonic"}
        return {"kind": "custom", "values": list(self.values)}

    @classmethod
    def from_json(cls, data: dict) -> "Schedule":
        kind = ScheduleKind(data["kind"])
        if kind is ScheduleKind.CONSTANT:
            return cls.constant(data["c"])
        if kind is ScheduleKind.GEOMETRIC:
            return cls.geometric(data["a"], data["q"])
        if kind is ScheduleKind.HARMONIC:
            return cls.harmonic()
        return cls.custom(data["values"])


def default_lambda_schedule(f: Bifunction) -> Schedule:
    return Schedule.constant(max(1.0, 2.0 * (f.theta or 0.0)))


@dataclass
class SolveConfig:
    x0: Point
    lambda_schedule: Optional[Schedule] = None  # None: constant max(1, 2 theta)
    error_schedule: Schedule = field(default_factory=lambda: Schedule.constant(0.0))
    alpha_schedule: Schedule = field(default_factory=Schedule.harmonic)
    anchor_u: Optional[Point] = None
    max_outer: int = 1000
    tol_step: float = 1e-8
    lambda_max: float = math.inf
    strategy: Optional[Strategy] = None
    resolvent_tol: float = 1e-12
    max_inner: int = 10_000
    residual_samples: int = 200
    residual_tol: float = 1e-6
    rng_seed: int = 0

    def validate(self, f: Bifunction, halpern: bool = False) -> Schedule:
        """Check the config against ``f``; returns the effective lambda schedule."""
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        for name in ("tol_step", "resolvent_tol", "residual_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        f.space.coords_of(self.x0)
        lam = self.lambda_schedule or default_lambda_schedule(f)
        lam.validate_lambda(f.theta or 0.0, self.lambda_max, self.max_outer)
        if halpern:
            if self.anchor_u is None:
                raise ValueError("Halpern iteration needs an anchor u")
            f.space.coords_of(self.anchor_u)
            self.alpha_schedule.validate_alpha()
            if self.error_schedule.error_sum_bound() != 0.0:
                raise ScheduleError("Halpern iteration uses exact resolvents; the error schedule must be 0")
        else:
            self.error_schedule.error_sum_bound()
        return lam

    def to_json(self) -> dict:
        return {
            "x0": self.x0.to_json(),
            "lambda_schedule": None if self.lambda_schedule is None else self.lambda_schedule.to_json(),
            "error_schedule": self.error_schedule.to_json(),
            "alpha_schedule": self.alpha_schedule.to_json(),
            "anchor_u": None if self.anchor_u is None else self.anchor_u.to_json(),
            "max_outer": self.max_outer,
            "tol_step": self.tol_step,
            "lambda_max": None if math.isinf(self.lambda_max) else self.lambda_max,
            "strategy": None if self.strategy is None else Strategy(self.strategy).value,
            "resolvent_tol": self.resolvent_tol,
            "max_inner": self.max_inner,
            "residual_samples": self.residual_samples,
            "residual_tol": self.residual_tol,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_json(cls, space: Space, data: dict) -> "SolveConfig":
        def sched(key, default):
            raw = data.get(key)
            return default if raw is None else Schedule.from_json(raw)

        u = data.get("anchor_u")
        lam_max = data.get("lambda_max")
        strategy = data.get("strategy")
        return cls(
            x0=space.parse_point(data["x0"]),
            lambda_schedule=sched("lambda_schedule", None),
            error_schedule=sched("error_schedule", Schedule.constant(0.0)),
            alpha_schedule=sched("alpha_schedule", Schedule.harmonic()),
            anchor_u=None if u is None else space.parse_point(u),
            max_outer=int(data.get("max_outer", 1000)),
            tol_step=float(data.get("tol_step", 1e-8)),
            lambda_max=math.inf if lam_max is None else float(lam_max),
            strategy=None if strategy is None else Strategy(strategy),
            resolvent_tol=float(data.get("resolvent_tol", 1e-12)),
            max_inner=int(data.get("max_inner", 10_000)),
            residual_samples=int(data.get("residual_samples", 200)),
            residual_tol=float(data.get("residual_tol", 1e-6)),
            rng_seed=int(data.get("rng_seed", 0)),
        )


class Status(str, Enum):
    CONVERGED = "CONVERGED"
    MAX_ITER = "MAX_ITER"
    SUBPROBLEM_FAILED = "SUBPROBLEM_FAILED"


@dataclass
class IterateRecord:
    k: int
    point: Point
    step: float
    residual: float
    dist_to_ref: Optional[float]
    lambda_k: float
    alpha_k: Optional[float]
    e_k: float


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


@dataclass
class IterateTrace:
    """Iterates x_1, x_2, ... of one run (x_0 is kept separately)."""

    algorithm: str
    space: Space
    x0: Point
    records: list[IterateRecord] = field(default_factory=list)
    status: Status = Status.MAX_ITER
    message: str = ""

    @property
    def final_point(self) -> Point:
        return self.records[-1].point if self.records else self.x0

    def points(self) -> list[Point]:
        return [self.x0] + [r.point for r in self.records]

    def steps(self) -> np.ndarray:
        return np.array([r.step for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.records:
            w.writerow(
                [_fmt(r.k), _fmt(r.step), _fmt(r.residual), _fmt(r.dist_to_ref),
                 _fmt(r.lambda_k), _fmt(r.alpha_k), _fmt(r.e_k)]
            )
        return buf.getvalue()

    def sidecar(self, config: dict, seed: int) -> dict:
        return {
            "algorithm": self.algorithm,
            "space": self.space.to_json(),
            "config": config,
            "seed": seed,
            "status": self.status.value,
            "message": self.message,
            "iterations": len(self.records),
            "final_point": self.final_point.to_json(),
        }

    def write(self, csv_path, json_path, config: dict, seed: int) -> None:
        with open(csv_path, "w", newline="") as fh:
            fh.write(self.to_csv())
        with open(json_path, "w") as fh:
            json.dump(self.sidecar(config, seed), fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_trace_csv(text: str) -> list[dict]:
    """Parse a trace CSV back into rows of floats (None for blank cells)."""
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        rows.append({k: (None if v == "" else (int(v) if k == "k" else float(v))) for k, v in row.items()})
    return rows


def _perturb(space: Space, rng: np.random.Generator, x: np.ndarray, e: float) -> np.ndarray:
    """Move from x toward a seeded random probe by min(e, distance to probe)."""
    if e <= 0.0:
        return x
    probe = space.sample_ball(rng, 1, space.wrap(x), 1.0 + e)[0]
    d = float(space.dist(x, probe))
    if d == 0.0:
        return x
    return space.geodesic(x, probe, min(e, d) / d)


def _request(f, space, K, anchor, lam, cfg: SolveConfig) -> ResolventRequest:
    return ResolventRequest(
        f, space, K, anchor, lam,
        strategy=cfg.strategy,
        tol=cfg.resolvent_tol,
        max_inner=cfg.max_inner,
        residual_samples=cfg.residual_samples,
        residual_tol=cfg.residual_tol,
        seed=cfg.rng_seed,
    )


def _converged(step: float, res: float, cfg: SolveConfig) -> bool:
    return step <= cfg.tol_step and res >= -10.0 * cfg.residual_tol


def run_ppa(
    f: Bifunction,
    space: Space,
    K: ConvexSet,
    config: SolveConfig,
    reference: Optional[Point] = None,
) -> IterateTrace:
    """Inexact proximal point method.

    Given x_k, pick y_k with d(x_k, y_k) <= e_k and set x_{k+1} = J_{lam_k}(y_k).
    ``reference`` only feeds the ``dist_to_ref`` column.
    """
    lam_sched = config.validate(f)
    rng = np.random.default_rng(config.rng_seed)
    ref = None if reference is None else space.coords_of(reference)
    x = space.coords_of(config.x0)
    trace = IterateTrace("ppa", space, config.x0)
    for k in range(config.max_outer):
        lam, e = lam_sched.value(k), config.error_schedule.value(k)
        y = _perturb(space, rng, x, e)
        try:
            res = solve_resolvent(_request(f, space, K, space.wrap(y), lam, config))
        except ResolventError as exc:
            trace.status, trace.message = Status.SUBPROBLEM_FAILED, f"{exc.code}: {exc}"
            return trace
        x_new = space.coords_of(res.point)
        step = float(space.dist(x, x_new))
        x = x_new
        trace.records.append(
            IterateRecord(
                k + 1, res.point, step, res.residual,
                None if ref is None else float(space.dist(x, ref)),
                lam, None, e,
            )
        )
        if _converged(step, res.residual, config):
            trace.status = Status.CONVERGED
            return trace
    trace.status = Status.MAX_ITER
    return trace


def run_halpern(
    f: Bifunction,
    space: Space,
    K: ConvexSet,
    config: SolveConfig,
    reference: Optional[Point] = None,
) -> IterateTrace:
    """Halpern-regularized proximal iteration.

    y_k = J_{lam_{k-1}}(x_{k-1}), then x_k = alpha_k u + (1 - alpha_k) y_k
    along the geodesic from y_k to u. Stops once both the step and alpha_k
    are at most ``tol_step``.
    """
    lam_sched = config.validate(f, halpern=True)
    ref = None if reference is None else space.coords_of(reference)
    u = space.coords_of(config.anchor_u)
    x = space.coords_of(config.x0)
    trace = IterateTrace("halpern", space, config.x0)
    for k in range(1, config.max_outer + 1):
        lam, alpha = lam_sched.value(k - 1), config.alpha_schedule.value(k)
        try:
            res = solve_resolvent(_request(f, space, K, space.wrap(x), lam, config))
        except ResolventError as exc:
            trace.status, trace.message = Status.SUBPROBLEM_FAILED, f"{exc.code}: {exc}"
            return trace
        y = space.coords_of(res.point)
        x_new = space.geodesic(y, u, alpha)
        step = float(space.dist(x, x_new))
        x = x_new
        trace.records.append(
            IterateRecord(
                k, space.wrap(x), step, res.residual,
                None if ref is None else float(space.dist(x, ref)),
                lam, alpha, 0.0,
            )
        )
        if alpha <= config.tol_step and _converged(step, res.residual, config):
            trace.status = Status.CONVERGED
            return trace
    trace.status = Status.MAX_ITER
    return trace


@dataclass
class FejerReport:
    passed: bool
    violations: list[int]
    max_excess: float
    distances: list[float]
    steps_vanish: bool
    slack: float

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "violations": self.violations,
            "max_excess": self.max_excess,
            "steps_vanish": self.steps_vanish,
            "slack": self.slack,
        }


def fejer_report(
    trace: IterateTrace,
    solution: Point,
    error_schedule: Optional[Schedule] = None,
    slack: float = 1e-8,
) -> FejerReport:
    """Check d(x_{k+1}, x*) <= d(x_k, x*) + e_k along the trace.

    ``violations`` lists the indices k+1 where the inequality fails. Errors
    come from ``error_schedule`` when given, else from the recorded e_k.
    The step check compares the mean of the last quarter of the steps with
    the mean of the first quarter.
    """
    pts = trace.points()
    space = trace.space
    xs = space.coords_of(solution)
    dists = [float(space.dist(space.coords_of(p), xs)) for p in pts]
    violations, max_excess = [], -math.inf
    for k, rec in enumerate(trace.records):
        e = rec.e_k if error_schedule is None else error_schedule.value(k)
        excess = dists[k + 1] - dists[k] - e
        max_excess = max(max_excess, excess)
        if excess > slack:
            violations.append(rec.k)
    steps = trace.steps()
    q = max(len(steps) // 4, 1)
    steps_vanish = bool(len(steps) == 0 or steps[-q:].mean() <= steps[:q].mean())
    return FejerReport(not violations and steps_vanish, violations, max_excess, dists, steps_vanish, slack)


class StrongMode(str, Enum):
    STRONG_PSEUDO = "STRONG_PSEUDO"
    STRONG_CONVEX_Y = "STRONG_CONVEX_Y"
    STRONG_CONCAVE_X = "STRONG_CONCAVE_X"


@dataclass
class StrongModeReport:
    mode: StrongMode
    property_report: PropertyReport
    final_distance: float
    threshold: float
    trace: IterateTrace = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.property_report.estimate is not None and self.property_report.estimate > 0 and (
            self.final_distance <= self.threshold
        )

    def to_json(self) -> dict:
        return {
            "mode": self.mode.value,
            "property": self.property_report.to_json(),
            "final_distance": self.final_distance,
            "threshold": self.threshold,
            "status": self.trace.status.value,
            "passed": self.passed,
        }


def strong_mode_check(
    f: Bifunction,
    space: Space,
    K: ConvexSet,
    config: SolveConfig,
    mode: StrongMode | str,
    solution: Point,
    threshold: float = 1e-6,
    sampler: Optional[SamplerConfig] = None,
) -> StrongModeReport:
    """Confirm the declared strong-convergence hypothesis on samples, then run PPA.

    Passes when the sampled modulus (beta, or the convexity/concavity
    modulus) is positive and the last iterate is within ``threshold`` of
    ``solution``.
    """
    mode = StrongMode(mode)
    prop = Property(mode.value)
    report = check_property(f, space, K, prop, sampler)
    trace = run_ppa(f, space, K, config, reference=solution)
    final = space.distance(trace.final_point, solution)
    return StrongModeReport(mode, report, final, threshold, trace)


def run_resolvent_path(
    f: Bifunction,
    space: Space,
    K: ConvexSet,
    config: SolveConfig,
    lambdas: Sequence[float],
    reference: Optional[Point] = None,
) -> IterateTrace:
    """Trace of J_{lam_j}(x0) along a strictly decreasing lambda sequence.

    Row j (1-based) holds J_{lam_{j-1}}(x0); ``step`` is the distance to the
    previous row (to x0 for the first). CONVERGED means every resolvent
    solved and verified.
    """
    lambdas = [float(v) for v in lambdas]
    if not lambdas or any(v <= 0 for v in lambdas) or any(b >= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambdas must be non-empty, positive and strictly decreasing")
    Schedule.custom(lambdas).validate_lambda(f.theta or 0.0, config.lambda_max, len(lambdas))
    ref = None if reference is None else space.coords_of(reference)
    prev = space.coords_of(config.x0)
    trace = IterateTrace("resolvent_path", space, config.x0)
    for j, lam in enumerate(lambdas, start=1):
        try:
            res = solve_resolvent(_request(f, space, K, config.x0, lam, config))
        except ResolventError as exc:
            trace.status, trace.message = Status.SUBPROBLEM_FAILED, f"{exc.code}: {exc}"
            return trace
        z = space.coords_of(res.point)
        trace.records.append(
            IterateRecord(
                j, res.point, float(space.dist(prev, z)), res.residual,
                None if ref is None else float(space.dist(z, ref)),
                lam, None, 0.0,
            )
        )
        prev = z
    trace.status = Status.CONVERGED
    return trace
