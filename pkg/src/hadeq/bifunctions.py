"""Bifunctions f: K x K -> R, built-in instances, and sampled property checks.

A :class:`Bifunction` wraps a vectorized kernel ``fn(X, Y)`` acting on
coordinate arrays (broadcast over leading axes) together with optional
structure hints that the resolvent strategies can exploit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .sets import ConvexSet, Segment, Ball, WholeSpace
from .spaces import Point, Space

ArrayFn = Callable[[np.ndarray], np.ndarray]
# (anchor coords, lambda, K) -> resolvent coords, or None when no closed form applies to K
AnalyticResolvent = Callable[[np.ndarray, float, ConvexSet], Optional[np.ndarray]]


@dataclass(frozen=True)
class PointMap:
    """A self-map T of the space, vectorized over coordinate arrays."""

    name: str
    fn: ArrayFn
    params: dict = field(default_factory=dict)
    constant: Optional[np.ndarray] = None

    def __call__(self, X):
        return self.fn(np.asarray(X, dtype=float))


@dataclass(frozen=True)
class Bifunction:
    space: Space
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = "custom"
    theta: Optional[float] = None
    phi: Optional[ArrayFn] = None
    grad_phi: Optional[ArrayFn] = None
    map_T: Optional[PointMap] = None
    analytic_resolvent: Optional[AnalyticResolvent] = None

    def __call__(self, x: Point, y: Point) -> float:
        return float(self.fn(self.space.coords_of(x), self.space.coords_of(y)))

    def evaluate(self, X, Y) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        out = self.fn(X, Y)
        return np.broadcast_to(out, np.broadcast_shapes(X.shape[:-1], Y.shape[:-1]))


def make_minimization_bifunction(
    space: Space,
    phi: ArrayFn,
    grad: Optional[ArrayFn] = None,
    *,
    name: str = "minimization",
    analytic_resolvent: Optional[AnalyticResolvent] = None,
) -> Bifunction:
    """f(x, y) = phi(y) - phi(x); its equilibria are the minimizers of phi on K.

    ``phi`` must broadcast over coordinate arrays. ``grad`` returns the
    Riemannian gradient of phi at a single point as an ambient tangent vector.
    """
    return Bifunction(
        space,
        lambda X, Y: phi(Y) - phi(X),
        name=name,
        theta=0.0,
        phi=phi,
        grad_phi=grad,
        analytic_resolvent=analytic_resolvent,
    )


def make_vi_bifunction(space: Space, T: PointMap, *, theta: Optional[float] = None) -> Bifunction:
    """f(x, y) = <(Tx)x, xy>, the variational-inequality bifunction of a map T."""

    def fn(X, Y):
        return space.qlin(T(X), X, X, Y)

    analytic = None
    if T.name == "identity":
        def analytic(anchor, lam, K):
            return K.project_coords(space, anchor)
    elif T.constant is not None:
        c = T.constant

        def analytic(anchor, lam, K):
            if not isinstance(K, WholeSpace):
                return None
            return space.geodesic(c, anchor, lam / (1.0 + lam))

    return Bifunction(space, fn, name=f"vi[{T.name}]", theta=theta, map_T=T, analytic_resolvent=analytic)


def zero_bifunction(space: Space) -> Bifunction:
    """f = 0, for which every point of K is an equilibrium and the resolvent is P_K."""

    def fn(X, Y):
        return np.zeros(np.broadcast_shapes(np.shape(X)[:-1], np.shape(Y)[:-1]))

    return Bifunction(
        space,
        fn,
        name="zero",
        theta=0.0,
        analytic_resolvent=lambda anchor, lam, K: K.project_coords(space, anchor),
    )


def half_squared_distance(space: Space, a: Point) -> Bifunction:
    """Minimization bifunction of phi = d²(., a) / 2."""
    ac = space.coords_of(a)

    def phi(X):
        return 0.5 * space.dist2(X, ac)

    grad = (lambda x: -space.log(x, ac)) if space.is_manifold else None

    def analytic(anchor, lam, K):
        if not isinstance(K, WholeSpace):
            return None
        return space.geodesic(anchor, ac, 1.0 / (1.0 + lam))

    return make_minimization_bifunction(
        space, phi, grad, name="half_squared_distance", analytic_resolvent=analytic
    )


def frechet_bifunction(space: Space, anchors: Sequence[Point], weights: Optional[Sequence[float]] = None) -> Bifunction:
    """Minimization bifunction of phi = sum_i w_i d²(., a_i) / 2 (weighted Fréchet mean)."""
    A = np.stack([space.coords_of(p) for p in anchors])
    w = np.ones(len(A)) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (len(A),) or np.any(w < 0):
        raise ValueError("weights must be non-negative, one per anchor")

    def phi(X):
        X = np.asarray(X, dtype=float)[..., None, :]
        return 0.5 * np.sum(w * space.dist2(X, A), axis=-1)

    def grad(x):
        return -np.sum(w[:, None] * space.log(x, A), axis=0)

    return make_minimization_bifunction(space, phi, grad if space.is_manifold else None, name="frechet")


def segment_distance_bifunction(space: Space, segment: Segment, weight: float = 1.0) -> Bifunction:
    """Minimization bifunction of phi = (w/2) d²(., S) for a geodesic segment S.

    The solution set is S itself. On the whole space the resolvent has the
    closed form: the point at fraction lam/(w+lam) from P_S(anchor) toward
    the anchor.
    """
    segment.validate(space)

    def phi(X):
        return 0.5 * weight * space.dist2(X, segment.project_coords(space, X))

    def grad(x):
        return -weight * space.log(x, segment.project_coords(space, x))

    def analytic(anchor, lam, K):
        if not isinstance(K, WholeSpace):
            return None
        p = segment.project_coords(space, anchor)
        return space.geodesic(p, anchor, lam / (weight + lam))

    return make_minimization_bifunction(
        space, phi, grad if space.is_manifold else None, name="segment_distance", analytic_resolvent=analytic
    )


def auxiliary_bifunction(f: Bifunction, anchor: Point, lam: float) -> Bifunction:
    """f(x, y) + lam <(anchor)x, xy>: the regularized bifunction whose equilibrium is the resolvent."""
    space = f.space
    xb = space.coords_of(anchor)

    def fn(X, Y):
        return f.fn(X, Y) + lam * space.qlin(xb, X, X, Y)

    return Bifunction(space, fn, name=f"aux[{f.name}]")


# -- self-maps for VI bifunctions ----------------------------------------


def identity_map() -> PointMap:
    return PointMap("identity", lambda X: X)


def constant_map(space: Space, c: Point) -> PointMap:
    cc = space.coords_of(c)
    return PointMap(
        "constant",
        lambda X: np.broadcast_to(cc, np.shape(X)),
        {"point": c.to_json()},
        constant=cc,
    )


def projection_map(space: Space, K: ConvexSet) -> PointMap:
    """The metric projection P_K, a firmly nonexpansive map."""
    K.validate(space)
    name = {Ball: "ball_projection", Segment: "segment_projection"}.get(type(K), "projection")
    return PointMap(name, lambda X: K.project_coords(space, X), {"set": K.to_json()})


def scaling_map(space: Space, center: Point, factor: float) -> PointMap:
    """x -> exp_c(factor * log_c x); expansive when |factor| > 1.

    On the star tree only factors in [0, 1] are available (geodesic shrink).
    """
    cc = space.coords_of(center)
    if space.is_manifold:
        fn = lambda X: space.exp(cc, factor * space.log(cc, X))  # noqa: E731
    elif 0.0 <= factor <= 1.0:
        fn = lambda X: space.geodesic(cc, X, factor)  # noqa: E731
    else:
        raise ValueError("star-tree scaling needs a factor in [0, 1]")
    return PointMap("scale", fn, {"center": center.to_json(), "factor": factor})


# -- sampled property checks ---------------------------------------------


class Property(str, Enum):
    P1 = "P1"
    P4_MONOTONE = "P4_MONOTONE"
    P4STAR_PSEUDO = "P4STAR_PSEUDO"
    P4BULLET_UNDER = "P4BULLET_UNDER"
    STRONG_MONO = "STRONG_MONO"
    STRONG_PSEUDO = "STRONG_PSEUDO"
    CYCLIC_MONO = "CYCLIC_MONO"
    PROPERLY_QUASI_MONO = "PROPERLY_QUASI_MONO"
    CONVEX_Y = "CONVEX_Y"
    STRONG_CONVEX_Y = "STRONG_CONVEX_Y"
    STRONG_CONCAVE_X = "STRONG_CONCAVE_X"
    FIRMLY_NONEXPANSIVE = "FIRMLY_NONEXPANSIVE"


@dataclass
class SamplerConfig:
    samples: int = 1000
    seed: int = 0
    radius: float = 2.0
    center: Optional[Point] = None
    tol: float = 1e-8
    min_dist: float = 1e-6
    max_cycle: int = 6
    hull_size: int = 4
    hull_rounds: int = 3


@dataclass
class PropertyReport:
    """Outcome of one sampled check.

    ``worst_violation <= tol`` means no violation was found. For the
    constant-estimating properties ``estimate`` carries the fitted constant
    (theta, alpha, beta or the convexity modulus).
    """

    property: Property
    samples: int
    worst_violation: float
    witnesses: list = field(default_factory=list)
    estimate: Optional[float] = None
    tol: float = 1e-8

    @property
    def passed(self) -> bool:
        return self.worst_violation <= self.tol

    def to_json(self) -> dict:
        out = {
            "property": self.property.value,
            "samples": self.samples,
            "worst_violation": self.worst_violation,
            "witnesses": self.witnesses,
            "passed": self.passed,
        }
        if self.estimate is not None:
            out["estimate"] = self.estimate
        return out


def _witness(space, *arrays, i):
    return [space.wrap(a[i]).to_json() for a in arrays]


def _worst(values, mask=None):
    """Index and value of the largest violation (or None if nothing qualifies)."""
    v = np.where(np.isnan(values), np.inf, values)
    if mask is not None:
        v = np.where(mask, v, -np.inf)
    i = int(np.argmax(v))
    if not np.isfinite(v[i]) and v[i] < 0:
        return None, 0.0
    return i, float(v[i])


def check_property(
    f: Bifunction,
    space: Space,
    K: ConvexSet,
    prop: Property | str,
    config: Optional[SamplerConfig] = None,
) -> PropertyReport:
    """Evaluate the defining inequality of ``prop`` on seeded samples from K."""
    cfg = config or SamplerConfig()
    prop = Property(prop)
    rng = np.random.default_rng(cfg.seed)
    n = cfg.samples

    def draw(m=n):
        return K.sample(space, rng, m, cfg.center, cfg.radius)

    def report(i, worst, arrays, estimate=None):
        wit = [] if i is None else [_witness(space, *arrays, i=i)]
        return PropertyReport(prop, n, worst, wit, estimate, cfg.tol)

    F = f.evaluate
    if prop is Property.P1:
        X = draw()
        i, worst = _worst(np.abs(F(X, X)))
        return report(i, worst, (X,))

    if prop in (Property.CONVEX_Y, Property.STRONG_CONVEX_Y, Property.STRONG_CONCAVE_X):
        X, Y, Z = draw(), draw(), draw()
        if prop is Property.CONVEX_Y:
            mid = space.geodesic(Y, Z, 0.5)
            i, worst = _worst(F(X, mid) - 0.5 * F(X, Y) - 0.5 * F(X, Z))
            return report(i, worst, (X, Y, Z))
        t = rng.uniform(0.05, 0.95, n)
        g = space.geodesic(Y, Z, t)
        d2 = space.dist2(Y, Z)
        ok = d2 > cfg.min_dist**2
        if prop is Property.STRONG_CONVEX_Y:
            gap = (1 - t) * F(X, Y) + t * F(X, Z) - F(X, g)
        else:
            # concavity of f(., x) along the geodesic Y -> Z, second argument X
            gap = F(g, X) - (1 - t) * F(Y, X) - t * F(Z, X)
        i, worst = _worst(-gap / np.where(ok, t * (1 - t) * d2, 1.0), ok)
        return report(i, worst, (X, Y, Z), estimate=-worst)

    if prop is Property.CYCLIC_MONO:
        total = np.full(n, -np.inf)
        lengths = rng.integers(2, cfg.max_cycle + 1, n)
        cycles = [draw() for _ in range(cfg.max_cycle)]
        for m in range(2, cfg.max_cycle + 1):
            s = sum(F(cycles[j], cycles[(j + 1) % m]) for j in range(m))
            total = np.where(lengths == m, s, total)
        i, worst = _worst(total)
        wit = [] if i is None else [[space.wrap(c[i]).to_json() for c in cycles[: lengths[i]]]]
        return PropertyReport(prop, n, worst, wit, None, cfg.tol)

    if prop is Property.PROPERLY_QUASI_MONO:
        return _check_properly_quasi_monotone(f, space, K, cfg, rng)

    X, Y = draw(), draw()
    fxy, fyx = F(X, Y), F(Y, X)
    if prop is Property.P4_MONOTONE:
        i, worst = _worst(fxy + fyx)
        return report(i, worst, (X, Y))
    if prop is Property.P4STAR_PSEUDO:
        # premise f(x,y) >= 0 must force f(y,x) <= 0, in both orientations
        v = np.maximum(np.where(fxy >= 0, fyx, -np.inf), np.where(fyx >= 0, fxy, -np.inf))
        i, worst = _worst(v)
        return report(i, worst, (X, Y))

    d2 = space.dist2(X, Y)
    ok = d2 > cfg.min_dist**2
    safe = np.where(ok, d2, 1.0)
    if prop is Property.STRONG_PSEUDO:
        r1 = np.where(ok & (fxy >= 0), -fyx / safe, np.inf)
        r2 = np.where(ok & (fyx >= 0), -fxy / safe, np.inf)
        ratio = np.minimum(r1, r2)
        i, worst = _worst(-ratio, np.isfinite(ratio))
        return report(i, worst, (X, Y), estimate=-worst)

    ratio = (fxy + fyx) / safe
    i, sup = _worst(ratio, ok)
    if prop is Property.P4BULLET_UNDER:
        theta_hat = max(0.0, sup)
        return report(i, theta_hat - (f.theta or 0.0), (X, Y), estimate=theta_hat)
    if prop is Property.STRONG_MONO:
        return report(i, sup, (X, Y), estimate=-sup)
    raise ValueError(f"unhandled property {prop}")


def _check_properly_quasi_monotone(f, space, K, cfg, rng) -> PropertyReport:
    """min_{x in A} f(x, y) <= 0 for y in the iterated geodesic hull of A."""
    n = cfg.samples
    m = int(rng.integers(1, cfg.hull_size + 1))
    A = np.stack([K.sample(space, rng, n, cfg.center, cfg.radius) for _ in range(m)], axis=1)
    pool = A
    rows = np.arange(n)[:, None]
    for _ in range(cfg.hull_rounds):
        q = pool.shape[1]
        i = rng.integers(0, q, (n, q))
        j = rng.integers(0, q, (n, q))
        t = rng.random((n, q))
        new = space.geodesic(pool[rows, i], pool[rows, j], t)
        pool = np.concatenate([pool, new], axis=1)
    y = pool[np.arange(n), rng.integers(m, pool.shape[1], n)]
    vals = f.evaluate(A, y[:, None, :]).min(axis=1)
    k, worst = _worst(vals)
    wit = [] if k is None else [[space.wrap(a).to_json() for a in A[k]] + [space.wrap(y[k]).to_json()]]
    return PropertyReport(Property.PROPERLY_QUASI_MONO, n, worst, wit, None, cfg.tol)
