from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from hadeq import (
    Euclidean,
    Hyperboloid,
    Kind,
    Point,
    Space,
    SpaceMismatchError,
    StarTree,
    UnsupportedOperationError,
    estimate_asymptotic_center,
)
from strategies import SPACES, points, unit


# -- distance -------------------------------------------------------------


def test_euclidean_distance_pythagoras():
    E = Euclidean(2)
    assert E.distance(E.point([0, 0]), E.point([3, 4])) == 5.0


def test_star_tree_distances():
    T = StarTree(3)
    assert T.distance(T.at(0, 1.0), T.at(1, 2.0)) == 3.0
    assert T.distance(T.at(0, 1.0), T.at(0, 2.5)) == 1.5


def test_hyperboloid_distance_matches_arclength():
    H = Hyperboloid(2)
    p = H.point([1.0, 0.0, 0.0])
    q = H.point([math.cosh(1.0), math.sinh(1.0), 0.0])
    assert H.distance(p, q) == pytest.approx(1.0, abs=1e-12)
    assert O.hyp_arclength(p.coords, q.coords) == pytest.approx(1.0, abs=1e-9)


def test_hyperboloid_distance_random_pairs_against_arclength(rng):
    H = Hyperboloid(2)
    for _ in range(5):
        p, q = (H.lift(rng.normal(size=2)) for _ in range(2))
        assert H.distance(p, q) == pytest.approx(O.hyp_arclength(p.coords, q.coords), abs=1e-8)


def test_hyperboloid_distance_near_coincident_points():
    # arccosh(-m) loses half the digits here; the package must not
    H = Hyperboloid(2)
    p = H.lift([0.3, -0.2])
    u = H.log_map(p, H.lift([1.0, 0.5]))
    v = 1e-9 * u / H.norm(p, u)
    q = H.exp_map(p, v)
    assert H.distance(p, q) == pytest.approx(1e-9, rel=1e-6)


def test_distance_rejects_foreign_points():
    E, T = Euclidean(2), StarTree(3)
    with pytest.raises(SpaceMismatchError):
        E.distance(E.origin(), T.origin())
    with pytest.raises(SpaceMismatchError):
        Euclidean(3).distance(E.origin(), E.origin())


# -- geodesics ------------------------------------------------------------


@pytest.mark.parametrize("S", SPACES, ids=repr)
def test_geodesic_endpoints(S, rng):
    p, q = (S.wrap(c) for c in S.sample_ball(rng, 2, S.origin(), 2.0))
    assert S.distance(S.geodesic_point(p, q, 0.0), p) <= 1e-12
    assert S.distance(S.geodesic_point(p, q, 1.0), q) <= 1e-12


def test_euclidean_geodesic_is_linear():
    E = Euclidean(2)
    g = E.geodesic_point(E.point([0, 0]), E.point([2, 4]), 0.25)
    np.testing.assert_allclose(g.coords, [0.5, 1.0])


def test_star_tree_geodesic_crosses_origin():
    T = StarTree(3)
    g = T.geodesic_point(T.at(0, 2.0), T.at(1, 1.0), 0.5)
    assert (g.ray, g.radius) == (0, 0.5)
    # brute force over the two-leg path parametrization
    path = O.tree_path((0, 2.0), (1, 1.0), 30_001)
    assert path[15_000] == (0, pytest.approx(0.5))


def test_geodesic_parameter_is_checked():
    E = Euclidean(1)
    with pytest.raises(ValueError):
        E.geodesic_point(E.point([0]), E.point([1]), 1.5)


@pytest.mark.parametrize("S", SPACES, ids=repr)
@settings(max_examples=60, deadline=None)
@given(data=st.data(), t=unit)
def test_geodesic_splits_distance(S, data, t):
    p, q = data.draw(points(S, 2))
    m = S.geodesic(p, q, t)
    d = S.dist(p, q)
    assert abs(S.dist(p, m) - t * d) <= 1e-9
    assert abs(S.dist(m, q) - (1 - t) * d) <= 1e-9


# -- point invariants -----------------------------------------------------


@settings(max_examples=80, deadline=None)
@given(pts=points(Hyperboloid(3), 2), t=unit)
def test_hyperboloid_outputs_stay_on_sheet(pts, t):
    H = Hyperboloid(3)
    p, q = pts
    outs = [H.geodesic(p, q, t), H.exp(p, 0.7 * H.log(p, q)), H.normalize(p * 1.0000001)]
    for x in outs:
        assert abs(float(O.mink(x, x)) + 1.0) <= 1e-9 * max(1.0, x[0] ** 2)
        assert x[0] > 0


def test_hyperboloid_rejects_off_sheet_points():
    H = Hyperboloid(2)
    with pytest.raises(SpaceMismatchError):
        H.point([2.0, 1.0, 1.0])
    with pytest.raises(SpaceMismatchError):
        H.point([-1.0, 0.0, 0.0])


def test_star_tree_origin_is_canonical():
    T = StarTree(4)
    assert T.point([3, 0.0]) == T.origin()
    assert T.geodesic_point(T.at(2, 1.0), T.at(3, 1.0), 0.5) == T.origin()
    with pytest.raises(SpaceMismatchError):
        T.point([4, 1.0])
    with pytest.raises(SpaceMismatchError):
        T.point([1, -0.5])


@pytest.mark.parametrize(
    "p",
    [
        Point(Kind.EUCLIDEAN, [1.0, -2.5]),
        Point(Kind.HYPERBOLOID, [1.0, 0.0, 0.0]),
        Point(Kind.STAR_TREE, [2, 0.75]),
    ],
)
def test_point_json_round_trip(p):
    assert Point.from_json(p.to_json()) == p


def test_star_tree_json_schema():
    assert StarTree(3).at(2, 1.5).to_json() == {"kind": "star_tree", "ray": 2, "radius": 1.5}


@pytest.mark.parametrize("S", SPACES, ids=repr)
def test_space_json_round_trip(S):
    assert Space.from_json(S.to_json()) == S


def test_points_are_immutable():
    p = Euclidean(2).point([1, 2])
    with pytest.raises(ValueError):
        p.coords[0] = 5.0


# -- quasi-linearization --------------------------------------------------


def test_quasilinearization_orthogonal_vectors():
    E = Euclidean(2)
    a, b, c, d = (E.point(v) for v in ([0, 0], [1, 0], [0, 0], [0, 1]))
    assert E.quasilinearization(a, b, c, d) == 0.0


@pytest.mark.parametrize("S", SPACES, ids=repr)
@settings(max_examples=50, deadline=None)
@given(data=st.data())
def test_quasilinearization_identities(S, data):
    a, b, c, d = data.draw(points(S, 4))
    assert S.qlin(a, b, a, b) == pytest.approx(S.dist2(a, b), abs=1e-9)
    assert S.qlin(a, b, c, d) == pytest.approx(-S.qlin(b, a, c, d), abs=1e-9)


def test_quasilinearization_is_dot_product_in_flat_space(rng):
    E = Euclidean(3)
    a, b, c, d = rng.normal(size=(4, 3))
    assert E.qlin(a, b, c, d) == pytest.approx((b - a) @ (d - c), abs=1e-12)


# -- log / exp ------------------------------------------------------------


def test_log_of_base_is_zero():
    for S in (Euclidean(2), Hyperboloid(2)):
        p = S.origin()
        assert np.all(S.log_map(p, p) == 0.0)


def test_euclidean_log_is_difference():
    E = Euclidean(2)
    np.testing.assert_array_equal(E.log_map(E.point([1, 1]), E.point([3, 0])), [2.0, -1.0])


def test_hyperboloid_log_exp_round_trip(rng):
    H = Hyperboloid(2)
    B = H.sample_ball(rng, 1000, H.origin(), 3.0)
    T = H.sample_ball(rng, 1000, H.origin(), 3.0)
    V = H.log(B, T)
    assert np.max(H.dist(H.exp(B, V), T)) <= 1e-8
    assert np.max(np.abs(np.sqrt(H.inner(B, V, V)) - H.dist(B, T))) <= 1e-8


def test_log_exp_unsupported_on_tree():
    T = StarTree(3)
    with pytest.raises(UnsupportedOperationError):
        T.log_map(T.origin(), T.at(1, 1.0))
    with pytest.raises(UnsupportedOperationError):
        T.exp_map(T.origin(), [0.0, 1.0])


# -- asymptotic center ----------------------------------------------------


def test_asymptotic_center_constant_tail():
    E = Euclidean(2)
    p = E.point([1, 1])
    assert estimate_asymptotic_center(E, [p, p, p], [E.origin(), p]) == p


def test_asymptotic_center_grid():
    E = Euclidean(2)
    tail = [E.point([-1, 0]), E.point([1, 0])]
    g = np.linspace(-2, 2, 41)
    cands = [E.point([x, y]) for x in g for y in g]
    c = estimate_asymptotic_center(E, tail, cands)
    assert np.max(np.abs(c.coords)) <= 0.1 / 2 + 1e-12


def test_asymptotic_center_singleton_and_errors():
    E = Euclidean(1)
    q = E.point([7])
    assert estimate_asymptotic_center(E, [E.origin()], [q]) == q
    with pytest.raises(ValueError):
        estimate_asymptotic_center(E, [], [q])
    with pytest.raises(ValueError):
        estimate_asymptotic_center(E, [q], [])
