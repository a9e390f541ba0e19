"""Defect functions for the CAT(0) inequalities, plus a seeded sweep over them.

Each defect is signed so that a non-negative value means the inequality holds;
equalities report ``-|lhs - rhs|``. A sweep records the smallest defect seen
for every check together with the sample that produced it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spaces import Kind, Point, Space


def cat0_defect(space: Space, x, y, z, t) -> np.ndarray:
    """(1-t)d²(x,z) + t d²(y,z) - t(1-t)d²(x,y) - d²((1-t)x+ty, z)."""
    t = np.asarray(t, dtype=float)
    m = space.geodesic(x, y, t)
    return (
        (1 - t) * space.dist2(x, z)
        + t * space.dist2(y, z)
        - t * (1 - t) * space.dist2(x, y)
        - space.dist2(m, z)
    )


def cauchy_schwarz_defect(space: Space, a, b, c, d) -> np.ndarray:
    return space.dist(a, b) * space.dist(c, d) - space.qlin(a, b, c, d)


def check_cat0_inequality(space: Space, x: Point, y: Point, z: Point, t: float) -> float:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"geodesic parameter must lie in [0, 1], got {t}")
    return float(cat0_defect(space, *(space.coords_of(p) for p in (x, y, z)), t))


def check_cauchy_schwarz(space: Space, a: Point, b: Point, c: Point, d: Point) -> float:
    return float(cauchy_schwarz_defect(space, *(space.coords_of(p) for p in (a, b, c, d))))


class CorruptedMetric(Space):
    """Test hook: scales distances between pairs that both lie in one region.

    The region is "first spatial coordinate > 0" (for the star tree: ray 1).
    Geodesics are left untouched, so the result is no longer CAT(0) and the
    sweeps must notice.
    """

    def __init__(self, inner: Space, factor: float):
        self.inner = inner
        self.factor = float(factor)
        self.kind = inner.kind
        self.is_manifold = inner.is_manifold

    def __repr__(self):
        return f"CorruptedMetric({self.inner!r}, factor={self.factor})"

    @property
    def coord_dim(self):
        return self.inner.coord_dim

    def origin(self):
        return self.inner.origin()

    def to_json(self):
        return {**self.inner.to_json(), "corrupt_metric": self.factor}

    def _marked(self, a):
        a = np.asarray(a, dtype=float)
        if self.kind is Kind.STAR_TREE:
            return (a[..., 0] == 1) & (a[..., 1] > 0)
        return a[..., 1 if self.kind is Kind.HYPERBOLOID else 0] > 0

    def dist(self, a, b):
        both = self._marked(a) & self._marked(b)
        return np.where(both, self.factor, 1.0) * self.inner.dist(a, b)

    def geodesic(self, a, b, t):
        return self.inner.geodesic(a, b, t)

    def normalize(self, a):
        return self.inner.normalize(a)

    def sample_ball(self, rng, n, center, radius):
        return self.inner.sample_ball(rng, n, center, radius)


@dataclass
class CheckResult:
    name: str
    worst: float
    passed: bool
    witness: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"name": self.name, "worst": self.worst, "passed": self.passed, "witness": self.witness}


@dataclass
class AxiomReport:
    space: dict
    samples: int
    tol: float
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def to_json(self) -> dict:
        return {
            "space": self.space,
            "samples": self.samples,
            "tol": self.tol,
            "passed": self.passed,
            "checks": [c.to_json() for c in self.checks],
        }


def sweep_axioms(
    space: Space,
    samples: int = 10_000,
    seed: int = 0,
    radius: float = 2.0,
    tol: float = 1e-9,
) -> AxiomReport:
    """Evaluate the metric, CAT(0) and quasi-linearization identities on random samples.

    Points are drawn from the ball of ``radius`` around the space's origin.
    Flat-only identities (equality in the CAT(0) inequality, affinity of the
    quasi-linearization) are added for Euclidean spaces.
    """
    rng = np.random.default_rng(seed)
    o = space.origin()
    a, b, c, d, x = (space.sample_ball(rng, samples, o, radius) for _ in range(5))
    t = rng.random(samples)
    s = rng.random(samples)
    pts = {"a": a, "b": b, "c": c, "d": d, "x": x}

    dist = space.dist
    m_t = space.geodesic(a, b, t)
    m_s = space.geodesic(a, b, s)
    ql = space.qlin

    defects = {
        "metric_symmetry": -np.abs(dist(a, b) - dist(b, a)),
        "metric_identity": -dist(a, a),
        "metric_triangle": dist(a, b) + dist(b, c) - dist(a, c),
        "geodesic_endpoints": -np.maximum(
            np.abs(dist(a, m_t) - t * dist(a, b)), np.abs(dist(b, m_t) - (1 - t) * dist(a, b))
        ),
        "convexity_of_distance": (1 - t) * dist(a, c) + t * dist(b, c) - dist(m_t, c),
        "geodesic_isometry": -np.abs(dist(m_t, m_s) - np.abs(t - s) * dist(a, b)),
        "geodesic_contraction": t * dist(a, b) - dist(space.geodesic(c, a, t), space.geodesic(c, b, t)),
        "cat0_inequality": cat0_defect(space, a, b, c, t),
        "qlin_symmetry": -np.abs(ql(a, b, c, d) - ql(c, d, a, b)),
        "qlin_antisymmetry": -np.abs(ql(a, b, c, d) + ql(b, a, c, d)),
        "qlin_additivity": -np.abs(ql(a, x, c, d) + ql(x, b, c, d) - ql(a, b, c, d)),
        "cauchy_schwarz": cauchy_schwarz_defect(space, a, b, c, d),
    }
    if space.kind is Kind.EUCLIDEAN:
        defects["flat_cat0_equality"] = -np.abs(cat0_defect(space, a, b, c, t))
        # <xy, x(lam z + (1-lam) u)> with z=c, u=d, y=b, x=a
        w = space.geodesic(c, d, 1 - t)
        defects["flat_affinity"] = -np.abs(
            ql(a, b, a, w) - t * ql(a, b, a, c) - (1 - t) * ql(a, b, a, d)
        )

    checks = []
    for name, defect in defects.items():
        defect = np.where(np.isnan(defect), -np.inf, defect)
        i = int(np.argmin(defect))
        worst = float(defect[i])
        passed = worst >= -tol
        witness = []
        if not passed:
            witness = [{k: space.wrap(v[i]).to_json() for k, v in pts.items()}]
            witness[0]["t"] = float(t[i])
            witness[0]["s"] = float(s[i])
        checks.append(CheckResult(name, worst, passed, witness))
    return AxiomReport(space.to_json(), samples, tol, checks)
