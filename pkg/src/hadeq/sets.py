"""Closed convex subsets of the model spaces and metric projections onto them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spaces import Point, Space, StarTree

SEGMENT_MAX_ITER = 200
SEGMENT_WIDTH = 1e-12
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class InvalidSetError(ValueError):
    """The set description is empty, degenerate or foreign to the space."""


class ConvexSet:
    """Feasible set K. Array methods broadcast over leading axes."""

    def validate(self, space: Space) -> None:
        pass

    def project_coords(self, space: Space, X) -> np.ndarray:
        raise NotImplementedError

    def contains_coords(self, space: Space, X, tol: float = 1e-9) -> np.ndarray:
        raise NotImplementedError

    def sample(self, space: Space, rng: np.random.Generator, n: int, center=None, radius: float = 1.0) -> np.ndarray:
        """``n`` points of K. ``center``/``radius`` only matter for unbounded sets."""
        raise NotImplementedError

    def probes(self, space: Space) -> list[np.ndarray]:
        """Structured members of K (endpoints, centers) used to catch boundary effects."""
        return []

    def to_json(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_json(space: Space, data: dict) -> "ConvexSet":
        kind = data["kind"]
        if kind == "whole_space":
            return WholeSpace()
        if kind == "ball":
            K = Ball(space.parse_point(data["center"]), float(data["radius"]))
        elif kind == "segment":
            K = Segment(space.parse_point(data["a"]), space.parse_point(data["b"]))
        elif kind == "subtree":
            cap = data.get("cap")
            K = Subtree(tuple(int(r) for r in data["rays"]), math.inf if cap is None else float(cap))
        else:
            raise InvalidSetError(f"unknown convex set kind {kind!r}")
        K.validate(space)
        return K

    def project(self, space: Space, x: Point) -> Point:
        return space.wrap(self.project_coords(space, space.coords_of(x)))

    def contains(self, space: Space, x: Point, tol: float = 1e-9) -> bool:
        return bool(self.contains_coords(space, space.coords_of(x), tol))


def project(space: Space, K: ConvexSet, x: Point) -> Point:
    """Metric projection of ``x`` onto ``K``."""
    return K.project(space, x)


@dataclass(frozen=True)
class WholeSpace(ConvexSet):
    def project_coords(self, space, X):
        return np.asarray(X, dtype=float)

    def contains_coords(self, space, X, tol=1e-9):
        return np.ones(np.shape(X)[:-1], dtype=bool)

    def sample(self, space, rng, n, center=None, radius=1.0):
        c = space.origin() if center is None else center
        return space.sample_ball(rng, n, c, radius)

    def to_json(self):
        return {"kind": "whole_space"}


@dataclass(frozen=True)
class Ball(ConvexSet):
    center: Point
    radius: float

    def validate(self, space):
        space.coords_of(self.center)
        if not self.radius > 0:
            raise InvalidSetError("ball radius must be positive")

    def project_coords(self, space, X):
        X = np.asarray(X, dtype=float)
        c = self.center.coords
        d = space.dist(c, X)
        outside = d > self.radius
        t = np.where(outside, self.radius / np.where(outside, d, 1.0), 1.0)
        return np.where(outside[..., None], space.geodesic(c, X, t), X)

    def contains_coords(self, space, X, tol=1e-9):
        return space.dist(self.center.coords, X) <= self.radius + tol

    def sample(self, space, rng, n, center=None, radius=1.0):
        return space.sample_ball(rng, n, self.center, self.radius)

    def probes(self, space):
        return [np.array(self.center.coords)]

    def to_json(self):
        return {"kind": "ball", "center": self.center.to_json(), "radius": self.radius}


@dataclass(frozen=True)
class Segment(ConvexSet):
    """Geodesic segment [a, b]."""

    a: Point
    b: Point

    def validate(self, space):
        if space.distance(self.a, self.b) <= 0.0:
            raise InvalidSetError("segment endpoints must be distinct")

    def param_of(self, space, X) -> np.ndarray:
        """Geodesic parameter of the nearest segment point.

        Uses the space's closed form when it has one, else a bracketing search.
        """
        t = space.segment_param(self.a.coords, self.b.coords, X)
        return self.search_param(space, X) if t is None else t

    def search_param(self, space, X) -> np.ndarray:
        """Golden-section search on ``t -> d(gamma(t), x)``.

        The function is convex in any CAT(0) space, so this works for every
        space, but comparing nearly equal distances only pins the minimizer
        down to about sqrt(machine epsilon). The bracket shrinks by a fixed
        factor, so the round count needed for ``SEGMENT_WIDTH`` is known up
        front.
        """
        X = np.asarray(X, dtype=float)
        a, b = self.a.coords, self.b.coords

        def f(t):
            return space.dist(space.geodesic(a, b, t), X)

        lo = np.zeros(X.shape[:-1])
        hi = np.ones(X.shape[:-1])
        rounds = min(SEGMENT_MAX_ITER, math.ceil(math.log(SEGMENT_WIDTH) / math.log(_INVPHI)))
        m1 = hi - _INVPHI * (hi - lo)
        m2 = lo + _INVPHI * (hi - lo)
        f1, f2 = f(m1), f(m2)
        for _ in range(rounds):
            left = f1 < f2
            hi = np.where(left, m2, hi)
            lo = np.where(left, lo, m1)
            # the surviving interior point keeps its value; one new evaluation per round
            new = np.where(left, hi - _INVPHI * (hi - lo), lo + _INVPHI * (hi - lo))
            fn = f(new)
            m1, m2, f1, f2 = (
                np.where(left, new, m2),
                np.where(left, m1, new),
                np.where(left, fn, f2),
                np.where(left, f1, fn),
            )
        # the endpoints are never evaluated by the interior search
        t = 0.5 * (lo + hi)
        t = np.where(lo == 0.0, np.where(f(np.zeros_like(t)) <= f(t), 0.0, t), t)
        t = np.where(hi == 1.0, np.where(f(np.ones_like(t)) <= f(t), 1.0, t), t)
        return t

    def project_coords(self, space, X):
        return space.geodesic(self.a.coords, self.b.coords, self.param_of(space, X))

    def contains_coords(self, space, X, tol=1e-9):
        a, b = self.a.coords, self.b.coords
        return space.dist(a, X) + space.dist(X, b) <= space.dist(a, b) + tol

    def sample(self, space, rng, n, center=None, radius=1.0):
        return space.geodesic(self.a.coords, self.b.coords, rng.random(n))

    def probes(self, space):
        return [
            np.array(self.a.coords),
            np.array(self.b.coords),
            space.geodesic(self.a.coords, self.b.coords, 0.5),
        ]

    def to_json(self):
        return {"kind": "segment", "a": self.a.to_json(), "b": self.b.to_json()}


@dataclass(frozen=True)
class Subtree(ConvexSet):
    """Union of the chosen rays of a star tree, each truncated at ``cap``."""

    rays: tuple[int, ...]
    cap: float = math.inf

    def validate(self, space):
        if not isinstance(space, StarTree):
            raise InvalidSetError("subtrees only exist in star-tree spaces")
        if not self.rays:
            raise InvalidSetError("subtree needs at least one ray")
        if any(not 0 <= r < space.rays for r in self.rays):
            raise InvalidSetError(f"subtree rays {self.rays} outside [0, {space.rays})")
        if not self.cap > 0:
            raise InvalidSetError("subtree cap must be positive")

    def _on_rays(self, X):
        return np.isin(np.asarray(X)[..., 0], self.rays)

    def project_coords(self, space, X):
        X = np.asarray(X, dtype=float)
        keep = self._on_rays(X)
        radius = np.where(keep, np.minimum(X[..., 1], self.cap), 0.0)
        ray = np.where(keep, X[..., 0], 0.0)
        return space.normalize(np.stack([ray, radius], axis=-1))

    def contains_coords(self, space, X, tol=1e-9):
        X = np.asarray(X, dtype=float)
        return (X[..., 1] <= tol) | (self._on_rays(X) & (X[..., 1] <= self.cap + tol))

    def sample(self, space, rng, n, center=None, radius=1.0):
        reach = min(self.cap, radius)
        rays = np.asarray(self.rays)[rng.integers(0, len(self.rays), n)]
        return space.normalize(np.column_stack([rays, reach * rng.random(n)]))

    def probes(self, space):
        out = [np.zeros(2)]
        if math.isfinite(self.cap):
            out += [np.array([r, self.cap], dtype=float) for r in self.rays]
        return out

    def to_json(self):
        return {
            "kind": "subtree",
            "rays": list(self.rays),
            "cap": None if math.isinf(self.cap) else self.cap,
        }

