"""Concrete Hadamard spaces.

Three model spaces cover the curvature spectrum the solvers care about:

- ``Euclidean(n)``: flat, geodesics are straight lines.
- ``Hyperboloid(n)``: hyperbolic n-space in the hyperboloid model
  ``{x in R^{n+1} : -x0^2 + x1^2 + ... + xn^2 = -1, x0 > 0}``.
- ``StarTree(k)``: k half-lines glued at a common origin; a CAT(0) space
  that is not a manifold.

Every space exposes two layers. The *array kernels* (``dist``, ``geodesic``,
``qlin``, ``log``, ``exp``) act on raw coordinate arrays and broadcast over
leading dimensions, so sweeps over thousands of samples stay vectorized. The
*point API* (``distance``, ``geodesic_point``, ``quasilinearization``, ...)
takes and returns :class:`Point` objects and enforces that points belong to
the space they are handed to.

Star-tree points are stored as the coordinate pair ``(ray, radius)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

HYPERBOLOID_ATOL = 1e-9


class Kind(str, Enum):
    EUCLIDEAN = "euclidean"
    HYPERBOLOID = "hyperboloid"
    STAR_TREE = "star_tree"


class SpaceMismatchError(ValueError):
    """A point does not belong to the space it was passed to."""


class UnsupportedOperationError(NotImplementedError):
    """The operation has no meaning in this space (e.g. exp map on a tree)."""


@dataclass(frozen=True, eq=False)
class Point:
    """An immutable point of one of the model spaces.

    ``coords`` is a read-only float array: ``n`` reals for Euclidean space,
    ``n + 1`` ambient reals for the hyperboloid, ``(ray, radius)`` for the
    star tree.
    """

    kind: Kind
    coords: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coords, dtype=float)
        if arr.ndim != 1:
            raise ValueError("point coordinates must be a flat vector")
        arr.setflags(write=False)
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "coords", arr)

    @property
    def ray(self) -> int:
        self._require_tree()
        return int(self.coords[0])

    @property
    def radius(self) -> float:
        self._require_tree()
        return float(self.coords[1])

    def _require_tree(self):
        if self.kind is not Kind.STAR_TREE:
            raise AttributeError("ray/radius are only defined for star-tree points")

    def to_json(self) -> dict:
        if self.kind is Kind.STAR_TREE:
            return {"kind": self.kind.value, "ray": self.ray, "radius": self.radius}
        return {"kind": self.kind.value, "coords": [float(c) for c in self.coords]}

    @classmethod
    def from_json(cls, data: dict) -> "Point":
        kind = Kind(data["kind"])
        if kind is Kind.STAR_TREE:
            return cls(kind, [int(data["ray"]), float(data["radius"])])
        return cls(kind, data["coords"])

    def __eq__(self, other):
        if not isinstance(other, Point):
            return NotImplemented
        return self.kind is other.kind and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash((self.kind, self.coords.tobytes()))

    def __repr__(self):
        if self.kind is Kind.STAR_TREE:
            return f"Point(star_tree, ray={self.ray}, radius={self.radius!r})"
        return f"Point({self.kind.value}, {self.coords.tolist()!r})"


class Space:
    """Geometry contract shared by the model spaces."""

    kind: Kind
    is_manifold = True

    # -- array kernels -------------------------------------------------

    def dist(self, a, b) -> np.ndarray:
        raise NotImplementedError

    def geodesic(self, a, b, t) -> np.ndarray:
        raise NotImplementedError

    def normalize(self, a) -> np.ndarray:
        return np.asarray(a, dtype=float)

    def log(self, base, target) -> np.ndarray:
        raise UnsupportedOperationError(f"log map is not defined on {self.kind.value}")

    def exp(self, base, v) -> np.ndarray:
        raise UnsupportedOperationError(f"exp map is not defined on {self.kind.value}")

    def inner(self, base, u, v) -> np.ndarray:
        raise UnsupportedOperationError(f"tangent spaces are not defined on {self.kind.value}")

    def dist2(self, a, b) -> np.ndarray:
        d = self.dist(a, b)
        return d * d

    def qlin(self, a, b, c, d) -> np.ndarray:
        """Quasi-linearization <ab, cd> on coordinate arrays."""
        return 0.5 * (self.dist2(a, d) + self.dist2(b, c) - self.dist2(a, c) - self.dist2(b, d))

    def sample_ball(self, rng: np.random.Generator, n: int, center, radius: float) -> np.ndarray:
        raise NotImplementedError

    def segment_param(self, a, b, X):
        """Exact geodesic parameter of the nearest point of [a, b] to X, or None if unknown."""
        return None

    def canonical(self, a) -> np.ndarray:
        """Canonical form of validated input coordinates (``normalize`` by default)."""
        return self.normalize(a)

    # -- point API -----------------------------------------------------

    @property
    def coord_dim(self) -> int:
        raise NotImplementedError

    def origin(self) -> Point:
        raise NotImplementedError

    def coords_of(self, p) -> np.ndarray:
        """Coordinates of ``p`` after checking that it belongs to this space."""
        if isinstance(p, Point):
            if p.kind is not self.kind:
                raise SpaceMismatchError(f"{p.kind.value} point passed to {self!r}")
            arr = p.coords
        else:
            arr = np.asarray(p, dtype=float)
        if arr.shape[-1:] != (self.coord_dim,):
            raise SpaceMismatchError(
                f"expected {self.coord_dim} coordinates for {self!r}, got shape {arr.shape}"
            )
        return arr

    def wrap(self, coords) -> Point:
        """Wrap kernel output (trusted, already canonical) as a Point."""
        return Point(self.kind, coords)

    def point(self, coords) -> Point:
        """Validate raw coordinates and build a canonical Point."""
        arr = self.coords_of(np.asarray(coords, dtype=float))
        self._validate_coords(arr)
        return self.wrap(self.canonical(arr))

    def parse_point(self, data: dict) -> Point:
        p = Point.from_json(data)
        if p.kind is not self.kind:
            raise SpaceMismatchError(f"{p.kind.value} point in a {self.kind.value} space")
        return self.point(p.coords)

    def _validate_coords(self, arr: np.ndarray) -> None:
        if not np.all(np.isfinite(arr)):
            raise ValueError("point coordinates must be finite")

    def distance(self, p: Point, q: Point) -> float:
        return float(self.dist(self.coords_of(p), self.coords_of(q)))

    def geodesic_point(self, p: Point, q: Point, t: float) -> Point:
        """The point ``(1 - t) p + t q`` at fraction ``t`` along the geodesic."""
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"geodesic parameter must lie in [0, 1], got {t}")
        return self.wrap(self.geodesic(self.coords_of(p), self.coords_of(q), t))

    def quasilinearization(self, a: Point, b: Point, c: Point, d: Point) -> float:
        return float(self.qlin(*(self.coords_of(x) for x in (a, b, c, d))))

    def log_map(self, base: Point, target: Point) -> np.ndarray:
        return self.log(self.coords_of(base), self.coords_of(target))

    def exp_map(self, base: Point, v) -> Point:
        return self.wrap(self.exp(self.coords_of(base), np.asarray(v, dtype=float)))

    def norm(self, base: Point, v) -> float:
        b = self.coords_of(base)
        return float(np.sqrt(max(float(self.inner(b, v, v)), 0.0)))

    def to_json(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_json(data: dict) -> "Space":
        kind = Kind(data["kind"])
        if kind is Kind.EUCLIDEAN:
            return Euclidean(int(data["dim"]))
        if kind is Kind.HYPERBOLOID:
            return Hyperboloid(int(data["dim"]))
        return StarTree(int(data["rays"]))

    def __eq__(self, other):
        return type(self) is type(other) and self.to_json() == other.to_json()

    def __hash__(self):
        return hash((type(self).__name__, tuple(sorted(self.to_json().items()))))


class Euclidean(Space):
    """Flat space R^n."""

    kind = Kind.EUCLIDEAN

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        self.dim = int(dim)

    def __repr__(self):
        return f"Euclidean({self.dim})"

    @property
    def coord_dim(self) -> int:
        return self.dim

    def origin(self) -> Point:
        return self.wrap(np.zeros(self.dim))

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "dim": self.dim}

    def dist(self, a, b):
        diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        return np.sqrt(np.sum(diff * diff, axis=-1))

    def dist2(self, a, b):
        diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        return np.sum(diff * diff, axis=-1)

    def geodesic(self, a, b, t):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        t = np.asarray(t, dtype=float)[..., None]
        return (1.0 - t) * a + t * b

    def log(self, base, target):
        return np.asarray(target, dtype=float) - np.asarray(base, dtype=float)

    def exp(self, base, v):
        return np.asarray(base, dtype=float) + np.asarray(v, dtype=float)

    def inner(self, base, u, v):
        return np.sum(np.asarray(u) * np.asarray(v), axis=-1)

    def segment_param(self, a, b, X):
        a = np.asarray(a, dtype=float)
        u = np.asarray(b, dtype=float) - a
        t = np.sum((np.asarray(X, dtype=float) - a) * u, axis=-1) / np.sum(u * u)
        return np.clip(t, 0.0, 1.0)

    def sample_ball(self, rng, n, center, radius):
        c = self.coords_of(center)
        g = rng.standard_normal((n, self.dim))
        g /= np.linalg.norm(g, axis=-1, keepdims=True)
        r = radius * rng.random(n) ** (1.0 / self.dim)
        return c + r[:, None] * g


def minkowski(a, b) -> np.ndarray:
    """Lorentzian form -a0*b0 + sum_i ai*bi, broadcast over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return -a[..., 0] * b[..., 0] + np.sum(a[..., 1:] * b[..., 1:], axis=-1)


class Hyperboloid(Space):
    """Hyperbolic n-space (curvature -1), hyperboloid model."""

    kind = Kind.HYPERBOLOID

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        self.dim = int(dim)

    def __repr__(self):
        return f"Hyperboloid({self.dim})"

    @property
    def coord_dim(self) -> int:
        return self.dim + 1

    def origin(self) -> Point:
        o = np.zeros(self.dim + 1)
        o[0] = 1.0
        return self.wrap(o)

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "dim": self.dim}

    def lift(self, v) -> Point:
        """Point with spatial coordinates ``v`` (x0 chosen to land on the sheet)."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise SpaceMismatchError(f"expected {self.dim} spatial coordinates")
        return self.wrap(np.concatenate([[math.sqrt(1.0 + float(v @ v))], v]))

    def _validate_coords(self, arr):
        super()._validate_coords(arr)
        if arr[0] <= 0:
            raise SpaceMismatchError("hyperboloid point must lie on the upper sheet (x0 > 0)")
        defect = abs(float(minkowski(arr, arr)) + 1.0)
        if defect > HYPERBOLOID_ATOL * max(1.0, float(arr[0]) ** 2):
            raise SpaceMismatchError(f"point is off the hyperboloid: |m(x,x) + 1| = {defect:.3g}")

    def normalize(self, a):
        a = np.asarray(a, dtype=float)
        return a / np.sqrt(-minkowski(a, a))[..., None]

    def canonical(self, a):
        # validated input is already on the sheet to 1e-9; rescaling would only perturb bits
        return np.array(a, dtype=float)

    def segment_param(self, a, b, X):
        # along gamma(s) = cosh(s) a + sinh(s) u, cosh d(gamma(s), x) = A cosh s + B sinh s,
        # minimized where tanh s = -B / A
        a = np.asarray(a, dtype=float)
        L = float(self.dist(a, b))
        u = self.log(a, b) / L
        X = np.asarray(X, dtype=float)
        A = -minkowski(a, X)
        B = -minkowski(u, X)
        s = np.arctanh(np.clip(-B / A, -1.0, 1.0))
        return np.clip(s / L, 0.0, 1.0)

    def dist(self, a, b):
        # chordal form 2 asinh(|a - b|_M / 2) avoids the cancellation in acosh(-m(a, b)) near 1
        diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        s = np.maximum(minkowski(diff, diff), 0.0)
        return 2.0 * np.arcsinh(0.5 * np.sqrt(s))

    def geodesic(self, a, b, t):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        t = np.asarray(t, dtype=float)
        d = self.dist(a, b)
        small = d < 1e-9
        sd = np.where(small, 1.0, np.sinh(d))
        wa = np.where(small, 1.0 - t, np.sinh((1.0 - t) * d) / sd)
        wb = np.where(small, t, np.sinh(t * d) / sd)
        return self.normalize(wa[..., None] * a + wb[..., None] * b)

    def log(self, base, target):
        base = np.asarray(base, dtype=float)
        target = np.asarray(target, dtype=float)
        d = self.dist(base, target)
        u = target + minkowski(base, target)[..., None] * base
        nu = np.sqrt(np.maximum(minkowski(u, u), 0.0))
        scale = np.where(nu > 0.0, d / np.where(nu > 0.0, nu, 1.0), 0.0)
        return scale[..., None] * u

    def exp(self, base, v):
        base = np.asarray(base, dtype=float)
        v = np.asarray(v, dtype=float)
        v = v + minkowski(base, v)[..., None] * base
        nv = np.sqrt(np.maximum(minkowski(v, v), 0.0))
        sinhc = np.where(nv > 1e-12, np.sinh(nv) / np.where(nv > 1e-12, nv, 1.0), 1.0)
        return self.normalize(np.cosh(nv)[..., None] * base + sinhc[..., None] * v)

    def inner(self, base, u, v):
        return minkowski(u, v)

    def sample_ball(self, rng, n, center, radius):
        c = self.coords_of(center)
        g = rng.standard_normal((n, self.dim + 1))
        g = g + minkowski(c, g)[:, None] * c
        g /= np.sqrt(minkowski(g, g))[:, None]
        r = radius * rng.random(n) ** (1.0 / self.dim)
        return self.exp(c, r[:, None] * g)


class StarTree(Space):
    """``k`` rays of infinite length glued at a common origin.

    Coordinates are ``(ray, radius)``; the origin is canonically ray 0.
    """

    kind = Kind.STAR_TREE
    is_manifold = False

    def __init__(self, rays: int):
        if rays < 2:
            raise ValueError("a star tree needs at least two rays")
        self.rays = int(rays)

    def __repr__(self):
        return f"StarTree({self.rays})"

    @property
    def coord_dim(self) -> int:
        return 2

    def origin(self) -> Point:
        return self.wrap(np.zeros(2))

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "rays": self.rays}

    def at(self, ray: int, radius: float) -> Point:
        return self.point([ray, radius])

    def _validate_coords(self, arr):
        super()._validate_coords(arr)
        ray, radius = arr
        if ray != int(ray) or not 0 <= ray < self.rays:
            raise SpaceMismatchError(f"ray index {ray} outside [0, {self.rays})")
        if radius < 0:
            raise SpaceMismatchError("star-tree radius must be non-negative")

    def normalize(self, a):
        a = np.array(a, dtype=float)
        at_origin = a[..., 1] <= 0.0
        a[..., 0] = np.where(at_origin, 0.0, a[..., 0])
        a[..., 1] = np.where(at_origin, 0.0, a[..., 1])
        return a

    def dist(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        ra, rb = a[..., 1], b[..., 1]
        return np.where(a[..., 0] == b[..., 0], np.abs(ra - rb), ra + rb)

    def geodesic(self, a, b, t):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        t = np.asarray(t, dtype=float)
        ray_a, ra = a[..., 0], a[..., 1]
        ray_b, rb = b[..., 0], b[..., 1]
        same = ray_a == ray_b
        s = t * (ra + rb)
        first_leg = s <= ra
        ray = np.where(same | first_leg, ray_a, ray_b)
        radius = np.where(same, ra + t * (rb - ra), np.where(first_leg, ra - s, s - ra))
        out = np.stack(np.broadcast_arrays(ray, radius), axis=-1)
        return self.normalize(out)

    def segment_param(self, a, b, X):
        (ia, ra), (ib, rb) = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        X = np.asarray(X, dtype=float)
        ix, rx = X[..., 0], X[..., 1]
        if ia == ib and ra > 0 and rb > 0:
            lo, hi = min(ra, rb), max(ra, rb)
            r = np.where((ix == ia) & (rx > 0), np.clip(rx, lo, hi), lo)
            return np.abs(r - ra) / abs(rb - ra)
        # the path runs down ray ia to the origin, then out along ray ib
        s = np.full(X.shape[:-1], ra)
        s = np.where((rx > 0) & (ix == ia) & (ra > 0), ra - np.minimum(rx, ra), s)
        s = np.where((rx > 0) & (ix == ib) & (rb > 0), ra + np.minimum(rx, rb), s)
        return s / (ra + rb)

    def sample_ball(self, rng, n, center, radius):
        c = self.coords_of(center)
        reach = c[1] + radius
        out = np.empty((0, 2))
        while len(out) < n:
            m = 2 * (n - len(out)) + 8
            cand = np.column_stack([rng.integers(0, self.rays, m), reach * rng.random(m)])
            cand = self.normalize(cand)
            out = np.vstack([out, cand[self.dist(c, cand) <= radius]])
        return out[:n]


def estimate_asymptotic_center(space: Space, tail: Sequence[Point], candidates: Sequence[Point]) -> Point:
    """Candidate minimizing ``x -> max_n d(x, x_n)`` over the sequence tail.

    A finite surrogate for the asymptotic center: the true center is an
    infimum over the whole space, which cannot be searched, so the answer is
    only as good as the supplied candidate set.
    """
    if len(tail) == 0:
        raise ValueError("tail must be non-empty")
    if len(candidates) == 0:
        raise ValueError("candidate set must be non-empty")
    T = np.stack([space.coords_of(p) for p in tail])
    C = np.stack([space.coords_of(p) for p in candidates])
    radii = space.dist(C[:, None, :], T[None, :, :]).max(axis=1)
    return candidates[int(np.argmin(radii))]
