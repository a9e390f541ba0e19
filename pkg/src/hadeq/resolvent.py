"""Resolvent of a bifunction.

For an anchor ``xb`` and ``lam > 0`` the resolvent ``J_lam(xb)`` is the point
``z`` of K with

    f(z, y) + lam * <(xb)z, zy> >= 0    for every y in K.

Convention: ``lam`` multiplies the regularization term, so large ``lam``
keeps ``z`` near the anchor and ``lam -> 0`` removes the regularization. The
classical proximal map ``argmin phi + d²(., xb) / (2 mu)`` is the resolvent
with ``lam = 1 / mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .bifunctions import Bifunction, Property, PropertyReport
from .sets import ConvexSet
from .spaces import Point, Space

ARMIJO_C = 1e-4
BACKTRACK = 0.5
MAX_BACKTRACKS = 50
GOLDEN_WIDTH = 1e-10
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class Strategy(str, Enum):
    ANALYTIC = "analytic"
    FIXED_POINT = "fixed_point"
    PROX_DESCENT = "prox_descent"


class ResolventError(RuntimeError):
    code = "RESOLVENT_ERROR"


class NoStrategyError(ResolventError):
    code = "NO_STRATEGY"


class InnerDivergedError(ResolventError):
    code = "INNER_DIVERGED"


class LambdaTooSmallError(ResolventError):
    code = "LAMBDA_TOO_SMALL"


@dataclass
class ResolventRequest:
    f: Bifunction
    space: Space
    K: ConvexSet
    anchor: Point
    lam: float
    strategy: Optional[Strategy] = None  # None: first applicable
    tol: float = 1e-12
    max_inner: int = 10_000
    residual_samples: int = 200
    residual_tol: float = 1e-6
    seed: int = 0
    start: Optional[Point] = None
    known_solution: Optional[Point] = None


@dataclass
class ResolventResult:
    point: Point
    residual: float
    inner_iterations: int
    strategy_used: Strategy
    steps: list[float] = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "point": self.point.to_json(),
            "residual": self.residual,
            "inner_iterations": self.inner_iterations,
            "strategy_used": self.strategy_used.value,
        }


def applicable_strategies(f: Bifunction, space: Space) -> list[Strategy]:
    out = []
    if f.analytic_resolvent is not None:
        out.append(Strategy.ANALYTIC)
    if f.map_T is not None:
        out.append(Strategy.FIXED_POINT)
    if f.phi is not None and (f.grad_phi is not None or not space.is_manifold):
        out.append(Strategy.PROX_DESCENT)
    return out


def _check_lambda(f: Bifunction, lam: float) -> None:
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if f.theta is not None and lam <= f.theta:
        raise LambdaTooSmallError(f"lambda={lam} must exceed the undermonotonicity constant {f.theta}")


def solve_resolvent(req: ResolventRequest) -> ResolventResult:
    """Compute ``J_lam(anchor)`` and verify it on sampled points of K."""
    f, space, K = req.f, req.space, req.K
    _check_lambda(f, req.lam)
    xb = space.coords_of(req.anchor)
    options = applicable_strategies(f, space)
    if req.strategy is None:
        if not options:
            raise NoStrategyError(f"no resolvent strategy available for {f.name}")
        candidates = options
    else:
        strategy = Strategy(req.strategy)
        if strategy not in options:
            raise NoStrategyError(f"{strategy.value} is not applicable to {f.name}")
        candidates = [strategy]

    z = None
    for strategy in candidates:
        if strategy is Strategy.ANALYTIC:
            z = f.analytic_resolvent(xb, req.lam, K)
            iters, steps = 0, []
            if z is None:
                if req.strategy is not None or strategy is candidates[-1]:
                    raise NoStrategyError(f"no closed-form resolvent of {f.name} on {type(K).__name__}")
                continue
        elif strategy is Strategy.FIXED_POINT:
            z0 = K.project_coords(space, xb if req.start is None else space.coords_of(req.start))
            z, iters, steps = _fixed_point(f, space, K, xb, req.lam, z0, req.tol, req.max_inner)
        else:
            z, iters, steps = _prox_descent(f, space, K, xb, req.lam, req)
        break

    point = space.wrap(z)
    res = residual(
        f, space, K, point, req.anchor, req.lam,
        samples=req.residual_samples, seed=req.seed, known_solution=req.known_solution,
    )
    if res < -req.residual_tol:
        raise InnerDivergedError(
            f"{strategy.value} resolvent failed verification: residual {res:.3g} < -{req.residual_tol:g}"
        )
    return ResolventResult(point, res, iters, strategy, steps)


def _fixed_point(f, space, K, xb, lam, z, tol, max_inner):
    """Iterate z <- P_K((1/(1+lam)) T z + (lam/(1+lam)) xb), a 1/(1+lam)-contraction.

    Works on a batch of anchors at once (leading axes of ``xb``).
    """
    w = lam / (1.0 + lam)
    steps = []
    for it in range(1, max_inner + 1):
        z_new = K.project_coords(space, space.geodesic(f.map_T(z), xb, w))
        step = space.dist(z, z_new)
        z = z_new
        worst = float(np.max(step))
        steps.append(worst)
        if worst <= tol:
            return z, it, steps
    raise InnerDivergedError(f"fixed-point iteration did not reach step <= {tol:g} in {max_inner} iterations")


def _prox_descent(f, space, K, xb, lam, req):
    if space.is_manifold:
        return _prox_descent_manifold(f, space, K, xb, lam, req)
    return _prox_golden_rays(f, space, K, xb, lam, req)


def _prox_descent_manifold(f, space, K, xb, lam, req):
    """Projected Riemannian gradient descent on phi + (lam/2) d²(., xb)."""

    def psi(y):
        return float(f.phi(y) + 0.5 * lam * space.dist2(y, xb))

    def grad(y):
        return f.grad_phi(y) - lam * space.log(y, xb)

    y = K.project_coords(space, xb if req.start is None else space.coords_of(req.start))
    py, g = psi(y), grad(y)
    steps = []
    # once psi stops resolving decreases, the gradient norm becomes the merit for good;
    # mixing the two merits can cycle
    floor = False
    for it in range(1, req.max_inner + 1):
        gnorm = math.sqrt(max(float(space.inner(y, g, g)), 0.0))
        if gnorm == 0.0:
            return y, it - 1, steps
        s = 1.0
        for _ in range(MAX_BACKTRACKS):
            cand = K.project_coords(space, space.exp(y, -s * g))
            pc = psi(cand)
            step = float(space.dist(y, cand))
            if not floor and pc < py and pc <= py - ARMIJO_C / s * step * step:
                g_cand = grad(cand)
                break
            if floor or abs(pc - py) <= 1e-12 * max(1.0, abs(py)):
                g_cand = grad(cand)
                if math.sqrt(max(float(space.inner(cand, g_cand, g_cand)), 0.0)) < (1 - ARMIJO_C) * gnorm:
                    floor = True
                    break
            s *= BACKTRACK
        else:
            # no representable decrease left: y is optimal to machine precision
            return y, it, steps
        y, py, g = cand, pc, g_cand
        steps.append(step)
        if step <= req.tol:
            return y, it, steps
    raise InnerDivergedError(f"prox descent did not reach step <= {req.tol:g} in {req.max_inner} iterations")


def _prox_golden_rays(f, space, K, xb, lam, req):
    """Star tree: golden-section search along every admissible ray, keep the best."""
    rays = np.arange(space.rays, dtype=float)
    probe = K.project_coords(space, np.column_stack([rays, np.full_like(rays, 1e-3)]))
    rays = np.unique(probe[probe[:, 1] > 0, 0])
    if rays.size == 0:
        rays = np.array([0.0])
    cap = getattr(K, "cap", math.inf)

    def psi(r):
        Y = space.normalize(np.column_stack([rays, r]))
        return f.phi(Y) + 0.5 * lam * space.dist2(Y, xb)

    hi = np.full(rays.shape, float(cap))
    if not math.isfinite(cap):
        hi[:] = 1.0 + xb[1]
        for _ in range(64):
            grow = psi(2.0 * hi) <= psi(hi)
            if not np.any(grow):
                break
            hi = np.where(grow, 2.0 * hi, hi)
        hi = 2.0 * hi
    lo = np.zeros_like(hi)
    a = hi - _INVPHI * (hi - lo)
    b = lo + _INVPHI * (hi - lo)
    fa, fb = psi(a), psi(b)
    iters = 0
    while np.max(hi - lo) > GOLDEN_WIDTH and iters < req.max_inner:
        iters += 1
        left = fa < fb
        hi = np.where(left, b, hi)
        lo = np.where(left, lo, a)
        b_new = np.where(left, a, lo + _INVPHI * (hi - lo))
        a_new = np.where(left, hi - _INVPHI * (hi - lo), b)
        a, b = a_new, b_new
        # one of the two interior values carries over
        fa, fb = np.where(left, psi(a), fb), np.where(left, fa, psi(b))
    if np.max(hi - lo) > GOLDEN_WIDTH:
        raise InnerDivergedError("golden-section search did not shrink to tolerance")
    Z = K.project_coords(space, space.normalize(np.column_stack([rays, 0.5 * (lo + hi)])))
    vals = f.phi(Z) + 0.5 * lam * space.dist2(Z, xb)
    return Z[int(np.argmin(vals))], iters, []


def _probe_points(space, K, z, anchor, samples, seed, known_solution, radius=None):
    rng = np.random.default_rng(seed)
    probes = [np.asarray(z), K.project_coords(space, anchor)] + K.probes(space)
    if known_solution is not None:
        probes.append(space.coords_of(known_solution))
    if radius is None:
        radius = max(1.0, 2.0 * float(space.dist(z, anchor)))
    n_rand = max(samples - len(probes), 0)
    draws = K.sample(space, rng, n_rand, space.wrap(z), radius)
    return np.vstack([np.stack(probes), draws]) if n_rand else np.stack(probes)


def residual(
    f: Bifunction,
    space: Space,
    K: ConvexSet,
    z: Point,
    anchor: Point,
    lam: float,
    samples: int = 200,
    seed: int = 0,
    known_solution: Optional[Point] = None,
    radius: Optional[float] = None,
) -> float:
    """min over sampled y in K of f(z, y) + lam <(anchor)z, zy>.

    ``z`` itself is always among the probes, so the value is at most 0; a
    true resolvent gives a value >= -tol. With ``lam = 0`` this is the plain
    equilibrium residual of ``f`` at ``z``.
    """
    zc = space.coords_of(z)
    xb = space.coords_of(anchor)
    Y = _probe_points(space, K, zc, xb, samples, seed, known_solution, radius)
    vals = f.evaluate(zc, Y) + lam * space.qlin(xb, zc, zc, Y)
    return float(np.min(vals))


def resolve_many(
    f: Bifunction,
    space: Space,
    K: ConvexSet,
    anchors: np.ndarray,
    lam: float,
    strategy: Optional[Strategy] = None,
    tol: float = 1e-12,
    max_inner: int = 10_000,
) -> np.ndarray:
    """Resolvents of many anchors (rows of ``anchors``), unverified.

    ANALYTIC and FIXED_POINT run vectorized; PROX_DESCENT falls back to one
    solve per anchor.
    """
    _check_lambda(f, lam)
    anchors = np.asarray(anchors, dtype=float)
    options = applicable_strategies(f, space)
    strategy = Strategy(strategy) if strategy is not None else (options[0] if options else None)
    if strategy not in options:
        raise NoStrategyError(f"{strategy} is not applicable to {f.name}")
    if strategy is Strategy.ANALYTIC:
        out = f.analytic_resolvent(anchors, lam, K)
        if out is None:
            raise NoStrategyError(f"no closed-form resolvent of {f.name} on {type(K).__name__}")
        return out
    if strategy is Strategy.FIXED_POINT:
        return _fixed_point(f, space, K, anchors, lam, K.project_coords(space, anchors), tol, max_inner)[0]
    rows = []
    for xb in anchors:
        req = ResolventRequest(f, space, K, space.wrap(xb), lam, strategy, tol, max_inner)
        rows.append(_prox_descent(f, space, K, xb, lam, req)[0])
    return np.stack(rows)


@dataclass
class FirmnessReport(PropertyReport):
    """Firm nonexpansiveness plus the weaker plain nonexpansiveness."""

    nonexpansive_violation: float = 0.0

    def to_json(self) -> dict:
        return {**super().to_json(), "nonexpansive_violation": self.nonexpansive_violation}


def check_firmly_nonexpansive(
    f: Bifunction,
    space: Space,
    K: ConvexSet,
    lam: float,
    pairs: tuple[np.ndarray, np.ndarray] | Sequence[tuple[Point, Point]],
    strategy: Optional[Strategy] = None,
    tol: float = 1e-6,
) -> FirmnessReport:
    """Worst of d²(Jx, Jz) - <xz, (Jx)(Jz)> over the pairs (must be <= tol)."""
    if isinstance(pairs, tuple) and len(pairs) == 2 and isinstance(pairs[0], np.ndarray):
        X, Z = (np.asarray(p, dtype=float) for p in pairs)
    else:
        X = np.stack([space.coords_of(x) for x, _ in pairs])
        Z = np.stack([space.coords_of(z) for _, z in pairs])
    JX = resolve_many(f, space, K, X, lam, strategy)
    JZ = resolve_many(f, space, K, Z, lam, strategy)
    firm = space.dist2(JX, JZ) - space.qlin(X, Z, JX, JZ)
    nonexp = space.dist(JX, JZ) - space.dist(X, Z)
    i = int(np.argmax(firm))
    witnesses = [[space.wrap(a[i]).to_json() for a in (X, Z, JX, JZ)]]
    return FirmnessReport(
        Property.FIRMLY_NONEXPANSIVE,
        len(X),
        float(firm[i]),
        witnesses,
        None,
        tol,
        nonexpansive_violation=float(np.max(nonexp)),
    )


def resolvent_path(
    f: Bifunction,
    space: Space,
    K: ConvexSet,
    x: Point,
    lambdas: Sequence[float],
    strategy: Optional[Strategy] = None,
    **request_kw,
) -> list[ResolventResult]:
    """``J_lam(x)`` along a strictly decreasing sequence of ``lam``.

    For monotone f with a non-empty solution set the path tends to the
    projection of ``x`` onto the solution set as ``lam -> 0``.
    """
    lambdas = [float(v) for v in lambdas]
    if any(v <= 0 for v in lambdas) or any(b >= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambdas must be positive and strictly decreasing")
    return [solve_resolvent(ResolventRequest(f, space, K, x, lam, strategy, **request_kw)) for lam in lambdas]
