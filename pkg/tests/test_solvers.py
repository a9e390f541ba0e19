from __future__ import annotations

import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from hadeq import (
    Ball,
    Euclidean,
    Hyperboloid,
    Schedule,
    Segment,
    SolveConfig,
    StarTree,
    Status,
    WholeSpace,
    fejer_report,
    frechet_bifunction,
    half_squared_distance,
    make_vi_bifunction,
    residual,
    run_halpern,
    run_ppa,
    run_resolvent_path,
    segment_distance_bifunction,
    strong_mode_check,
    zero_bifunction,
)
from hadeq.bifunctions import constant_map, scaling_map
from hadeq.solvers import (
    CSV_HEADER,
    IterateRecord,
    ScheduleError,
    StrongMode,
    read_trace_csv,
)

E1 = Euclidean(1)


def _halving(max_outer=20, **kw):
    f = half_squared_distance(E1, E1.origin())
    cfg = SolveConfig(E1.point([1.0]), Schedule.constant(1.0), max_outer=max_outer, **kw)
    return run_ppa(f, E1, WholeSpace(), cfg, reference=E1.origin())


# -- schedules ------------------------------------------------------------


def test_schedule_values():
    assert Schedule.constant(2.0).head(3).tolist() == [2.0, 2.0, 2.0]
    assert Schedule.geometric(0.1, 0.5).head(3).tolist() == [0.1, 0.05, 0.025]
    assert Schedule.harmonic().head(3).tolist() == [1.0, 0.5, 1.0 / 3.0]
    assert Schedule.custom([3.0, 1.0]).head(4).tolist() == [3.0, 1.0, 1.0, 1.0]


@pytest.mark.parametrize(
    "s", [Schedule.constant(0.5), Schedule.geometric(2.0, 0.25), Schedule.harmonic(), Schedule.custom([1.0, 0.0])]
)
def test_schedule_json_round_trip(s):
    assert Schedule.from_json(s.to_json()) == s


def test_lambda_schedule_bounds():
    Schedule.constant(1.0).validate_lambda(0.5, 2.0, 10)
    with pytest.raises(ScheduleError):
        Schedule.constant(0.5).validate_lambda(0.5, 2.0, 10)
    with pytest.raises(ScheduleError):
        Schedule.constant(3.0).validate_lambda(0.0, 2.0, 10)
    # geometric decay eventually drops below theta
    with pytest.raises(ScheduleError):
        Schedule.geometric(1.0, 0.5).validate_lambda(0.1, math.inf, 10)


def test_error_schedule_summability():
    assert Schedule.constant(0.0).error_sum_bound() == 0.0
    assert Schedule.geometric(0.1, 0.5).error_sum_bound() == pytest.approx(0.2)
    assert Schedule.custom([0.3, 0.1, 0.0]).error_sum_bound() == pytest.approx(0.4)
    for bad in (Schedule.constant(0.1), Schedule.geometric(0.1, 1.0), Schedule.harmonic(),
                Schedule.custom([0.1, 0.1]), Schedule.custom([-0.1, 0.0])):
        with pytest.raises(ScheduleError):
            bad.error_sum_bound()


def test_alpha_schedule_validation():
    Schedule.harmonic().validate_alpha()
    for bad in (Schedule.geometric(0.5, 0.5), Schedule.constant(0.5), Schedule.custom([0.5])):
        with pytest.raises(ScheduleError):
            bad.validate_alpha()


@settings(max_examples=50, deadline=None)
@given(a=st.floats(0.0, 10.0), q=st.floats(0.0, 0.99))
def test_geometric_bound_dominates_partial_sums(a, q):
    s = Schedule.geometric(a, q)
    assert s.head(500).sum() <= s.error_sum_bound() * (1 + 1e-12) + 1e-300


def test_config_validation():
    f = half_squared_distance(E1, E1.origin())
    x0 = E1.point([1.0])
    with pytest.raises(ValueError):
        SolveConfig(x0, max_outer=0).validate(f)
    with pytest.raises(ValueError):
        SolveConfig(x0, tol_step=0.0).validate(f)
    with pytest.raises(ScheduleError):
        SolveConfig(x0, error_schedule=Schedule.constant(0.1)).validate(f)
    with pytest.raises(ValueError):
        SolveConfig(x0).validate(f, halpern=True)
    with pytest.raises(ScheduleError):
        SolveConfig(x0, anchor_u=x0, error_schedule=Schedule.geometric(0.1, 0.5)).validate(f, halpern=True)
    # default lambda follows the hinted theta
    g = make_vi_bifunction(E1, scaling_map(E1, E1.origin(), 3.0), theta=2.0)
    assert SolveConfig(x0).validate(g) == Schedule.constant(4.0)


def test_solve_config_json_round_trip():
    H = Hyperboloid(2)
    cfg = SolveConfig(
        H.lift([0.1, 0.2]), Schedule.constant(2.0), Schedule.geometric(0.1, 0.5),
        anchor_u=H.origin(), max_outer=7, lambda_max=5.0, rng_seed=3,
    )
    assert SolveConfig.from_json(H, cfg.to_json()) == cfg


# -- PPA ------------------------------------------------------------------


def test_ppa_halving():
    tr = _halving()
    xs = np.array([r.point.coords[0] for r in tr.records])
    assert len(xs) == 20
    np.testing.assert_allclose(xs, 2.0 ** -np.arange(1, 21), rtol=0, atol=1e-10)
    assert abs(xs[-1]) <= 1e-6
    assert tr.status is Status.MAX_ITER
    assert [r.k for r in tr.records] == list(range(1, 21))


def test_ppa_halving_converges_by_step():
    tr = _halving(max_outer=200, tol_step=1e-8)
    assert tr.status is Status.CONVERGED
    # x_{k-1} - x_k = 2^-k <= 1e-8 first holds at k = 27
    assert len(tr.records) == 27


def test_ppa_zero_bifunction_on_ball():
    H = Hyperboloid(2)
    K = Ball(H.lift([0.2, 0.0]), 0.5)
    x0 = H.lift([2.0, 1.0])
    tr = run_ppa(zero_bifunction(H), H, K, SolveConfig(x0, max_outer=5, tol_step=1e-15))
    p = K.project(H, x0)
    assert tr.records[0].point == p
    assert all(r.point == p for r in tr.records)
    assert tr.status is Status.CONVERGED and len(tr.records) == 2


def _frechet_instance():
    H = Hyperboloid(2)
    raw = [[1.0, 0.0], [-0.5, 0.8], [0.2, -1.1]]
    anchors = [H.lift(v) for v in raw]
    xstar = O.hyp_frechet_mean([O.hyp_lift(v) for v in raw], O.hyp_lift([0.0, 0.0]))
    return H, frechet_bifunction(H, anchors), H.wrap(xstar)


def test_ppa_frechet_mean_inexact():
    H, f, xstar = _frechet_instance()
    cfg = SolveConfig(H.lift([1.5, 1.5]), Schedule.constant(1.0), Schedule.geometric(0.1, 0.5), max_outer=500)
    tr = run_ppa(f, H, WholeSpace(), cfg, reference=xstar)
    assert tr.records[-1].dist_to_ref <= 1e-4
    rep = fejer_report(tr, xstar)
    assert rep.passed, rep.to_json()
    # the record carries e_k with the 1-based index shifted to the schedule's 0-based one
    assert all(r.e_k == pytest.approx(0.1 * 0.5 ** (r.k - 1)) for r in tr.records)


def test_ppa_limit_solves_problem():
    H, f, xstar = _frechet_instance()
    tr = run_ppa(f, H, WholeSpace(), SolveConfig(H.lift([-1.0, 2.0]), max_outer=500))
    assert tr.status is Status.CONVERGED
    assert residual(f, H, WholeSpace(), tr.final_point, tr.final_point, 0.0) >= -1e-4
    steps = tr.steps()
    tail = steps[-max(len(steps) // 10, 1):]
    assert tail.max() <= 10 * 1e-8


def test_ppa_bounded_by_telescoped_errors():
    H, f, xstar = _frechet_instance()
    e = Schedule.geometric(0.2, 0.7)
    x0 = H.lift([2.0, -1.0])
    tr = run_ppa(f, H, WholeSpace(), SolveConfig(x0, error_schedule=e, max_outer=300), reference=xstar)
    bound = H.distance(x0, xstar) + e.error_sum_bound() + 1e-6
    assert max(r.dist_to_ref for r in tr.records) <= bound


def test_ppa_perturbation_is_within_budget():
    # with f = 0 on the whole space, x_{k+1} = J(y_k) = y_k, so each step is the perturbation itself
    T = StarTree(3)
    e = Schedule.geometric(0.3, 0.5)
    tr = run_ppa(zero_bifunction(T), T, WholeSpace(), SolveConfig(T.at(1, 0.2), error_schedule=e, max_outer=12))
    for r in tr.records:
        assert r.step == pytest.approx(r.e_k, abs=1e-12)


def test_ppa_subproblem_failure():
    E = Euclidean(1)
    f = make_vi_bifunction(E, scaling_map(E, E.origin(), -1.0))
    tr = run_ppa(f, E, WholeSpace(), SolveConfig(E.point([1.0]), max_inner=2))
    assert tr.status is Status.SUBPROBLEM_FAILED
    assert tr.message.startswith("INNER_DIVERGED") and tr.records == []


def test_ppa_is_deterministic():
    H, f, xstar = _frechet_instance()
    cfg = SolveConfig(H.lift([1.5, 1.5]), error_schedule=Schedule.geometric(0.1, 0.5), max_outer=40, rng_seed=11)
    a = run_ppa(f, H, WholeSpace(), cfg, reference=xstar).to_csv()
    b = run_ppa(f, H, WholeSpace(), cfg, reference=xstar).to_csv()
    assert a == b
    c = run_ppa(f, H, WholeSpace(), dataclasses.replace(cfg, rng_seed=12), reference=xstar).to_csv()
    assert c != a


# -- Halpern --------------------------------------------------------------


def test_halpern_shared_target_is_monotone():
    H = Hyperboloid(2)
    a = H.lift([0.4, -0.3])
    cfg = SolveConfig(H.lift([2.0, 1.0]), Schedule.constant(1.0), anchor_u=a, max_outer=50)
    tr = run_halpern(half_squared_distance(H, a), H, WholeSpace(), cfg, reference=a)
    d = [H.distance(H.lift([2.0, 1.0]), a)] + [r.dist_to_ref for r in tr.records]
    assert all(y < x for x, y in zip(d, d[1:]) if x > 1e-12)


@pytest.mark.parametrize("S", [Euclidean(2), StarTree(3)], ids=repr)
def test_halpern_identifies_projection_of_anchor(S):
    if isinstance(S, Euclidean):
        K = Segment(S.point([-1.0, 0.0]), S.point([1.0, 0.0]))
        u, x0 = S.point([0.3, 1.0]), S.point([2.0, 2.0])
        target = O.euclid_segment_projection(K.a.coords, K.b.coords, u.coords)
    else:
        K = Segment(S.at(0, 1.0), S.at(1, 1.0))
        u, x0 = S.at(0, 0.5), S.at(2, 2.0)
        target = S.normalize(np.array(O.tree_segment_projection((0, 1.0), (1, 1.0), (0, 0.5)), dtype=float))
    tr = run_halpern(zero_bifunction(S), S, K, SolveConfig(x0, anchor_u=u, max_outer=300))
    assert float(S.dist(tr.final_point.coords, target)) <= 1e-2
    assert all(r.alpha_k == pytest.approx(1.0 / (r.k + 1)) for r in tr.records)


def test_halpern_anchor_in_solution_set():
    E = Euclidean(2)
    K = Segment(E.point([-1.0, 0.0]), E.point([1.0, 0.0]))
    u = E.point([0.5, 0.0])
    tr = run_halpern(zero_bifunction(E), E, K, SolveConfig(E.point([-3.0, 4.0]), anchor_u=u, max_outer=2000))
    assert E.distance(tr.final_point, u) <= 1e-3


def test_halpern_stopping_requires_small_alpha():
    E = Euclidean(1)
    cfg = SolveConfig(E.origin(), anchor_u=E.origin(), max_outer=100, tol_step=0.02)
    tr = run_halpern(zero_bifunction(E), E, WholeSpace(), cfg)
    # steps are 0 throughout, but alpha_k = 1/(k+1) first drops to 0.02 at k = 49
    assert tr.status is Status.CONVERGED and len(tr.records) == 49


# -- Fejér ----------------------------------------------------------------


def test_fejer_strict_decrease_on_halving():
    tr = _halving()
    rep = fejer_report(tr, E1.origin())
    assert rep.passed and rep.violations == []
    assert all(b < a for a, b in zip(rep.distances, rep.distances[1:]))


def test_fejer_flags_injected_jump():
    tr = _halving()
    r = tr.records[9]
    tr.records[9] = IterateRecord(r.k, E1.point([0.5]), r.step, r.residual, None, r.lambda_k, None, 0.0)
    rep = fejer_report(tr, E1.origin())
    assert not rep.passed and rep.violations == [10]
    assert rep.max_excess == pytest.approx(0.5 - 2.0 ** -9)


def test_fejer_uses_supplied_error_schedule():
    tr = _halving()
    r = tr.records[4]
    tr.records[4] = IterateRecord(r.k, E1.point([2.0 ** -4 + 0.01]), r.step, r.residual, None, 1.0, None, 0.0)
    assert fejer_report(tr, E1.origin()).violations == [5]
    assert fejer_report(tr, E1.origin(), Schedule.constant(0.02)).violations == []


# -- strong convergence modes ---------------------------------------------


def test_strong_convex_mode():
    H = Hyperboloid(2)
    a = H.lift([0.5, 0.5])
    cfg = SolveConfig(H.lift([-1.0, 0.0]), Schedule.constant(1.0), max_outer=60)
    rep = strong_mode_check(half_squared_distance(H, a), H, WholeSpace(), cfg, StrongMode.STRONG_CONVEX_Y, a)
    assert rep.passed, rep.to_json()


def test_strong_pseudo_mode():
    E = Euclidean(1)
    c = E.point([0.25])
    f = make_vi_bifunction(E, constant_map(E, c))
    cfg = SolveConfig(E.point([3.0]), Schedule.constant(1.0), max_outer=60)
    rep = strong_mode_check(f, E, WholeSpace(), cfg, StrongMode.STRONG_PSEUDO, c)
    assert rep.passed and rep.property_report.estimate >= 1.0 - 1e-9


def test_strong_concave_mode():
    E = Euclidean(2)
    a = E.point([1.0, -1.0])
    cfg = SolveConfig(E.point([0.0, 0.0]), max_outer=60)
    rep = strong_mode_check(half_squared_distance(E, a), E, WholeSpace(), cfg, "STRONG_CONCAVE_X", a)
    assert rep.passed


def test_strong_mode_start_at_solution():
    E = Euclidean(2)
    a = E.point([1.0, -1.0])
    cfg = SolveConfig(a, max_outer=5)
    rep = strong_mode_check(half_squared_distance(E, a), E, WholeSpace(), cfg, StrongMode.STRONG_CONVEX_Y, a)
    assert rep.final_distance == 0.0 and all(r.point == a for r in rep.trace.records)


def test_strong_mode_fails_without_modulus():
    # the zero bifunction has no strong convexity; the check must not pass
    E = Euclidean(1)
    rep = strong_mode_check(zero_bifunction(E), E, WholeSpace(), SolveConfig(E.point([1.0])),
                            StrongMode.STRONG_CONVEX_Y, E.point([1.0]))
    assert not rep.passed


# -- resolvent path trace -------------------------------------------------


def test_resolvent_path_trace():
    E = Euclidean(2)
    S = Segment(E.point([-1.0, 0.0]), E.point([1.0, 0.0]))
    x0 = E.point([0.4, 2.0])
    ref = E.point([0.4, 0.0])
    lams = [2.0 ** -j for j in range(13)]
    tr = run_resolvent_path(segment_distance_bifunction(E, S, 2.0), E, WholeSpace(), SolveConfig(x0), lams, ref)
    assert tr.status is Status.CONVERGED and len(tr.records) == 13
    assert [r.lambda_k for r in tr.records] == lams
    d = [r.dist_to_ref for r in tr.records]
    assert all(b <= a + 1e-8 for a, b in zip(d, d[1:])) and d[-1] <= 1e-3
    with pytest.raises(ValueError):
        run_resolvent_path(zero_bifunction(E), E, WholeSpace(), SolveConfig(x0), [])


# -- trace files ----------------------------------------------------------


def test_csv_format():
    tr = _halving(max_outer=3)
    lines = tr.to_csv().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[1].split(",")[:2] == ["1", "0.5"]
    # alpha is blank for PPA
    assert lines[1].split(",")[5] == ""
    rows = read_trace_csv(tr.to_csv())
    assert rows[2]["k"] == 3 and rows[2]["alpha_k"] is None
    assert rows[2]["dist_to_ref"] == 0.125


def test_csv_round_trips_full_precision(rng):
    tr = _halving(max_outer=3)
    vals = rng.normal(size=3)
    for r, v in zip(tr.records, vals):
        r.residual = float(v)
    rows = read_trace_csv(tr.to_csv())
    assert [row["residual"] for row in rows] == vals.tolist()


def test_sidecar(tmp_path):
    tr = _halving(max_outer=2)
    tr.write(tmp_path / "t.csv", tmp_path / "t.json", {"x": 1}, 5)
    side = json.loads((tmp_path / "t.json").read_text())
    assert side["status"] == "MAX_ITER" and side["iterations"] == 2 and side["seed"] == 5
    assert side["final_point"] == {"kind": "euclidean", "coords": [0.25]}
    assert (tmp_path / "t.csv").read_text() == tr.to_csv()
