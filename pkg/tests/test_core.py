import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from robust_mssg.abf import Abf
from robust_mssg.core import (
    CoalitionStructure,
    build_core_solution,
    build_subset_resistant,
    check_gamma_deviation,
    constructive_revenge,
    core_constants,
    core_lp,
    default_gamma_deviation,
    gamma_deviation,
    level_structure,
    proper_subsets,
    realize_distribution,
    revenge_candidates,
    sweep_attack_distributions,
    verify_alpha_core,
)
from robust_mssg.equilibrium import PreconditionError, calc_ne
from robust_mssg.game import (
    GameSpec,
    attack_distribution,
    defender_target_utilities,
    defender_utilities,
    level_coverage,
    min_max_height,
)
from robust_mssg.lp import InfeasibleError
from robust_mssg.oracle import example, lattice


@pytest.fixture(scope="module")
def table1():
    ex = example("table1_unstable")
    return ex.game, ex.abf


@pytest.fixture(scope="module")
def table1_solution(table1):
    g, abf = table1
    return build_core_solution(g, abf)


@pytest.fixture(scope="module")
def table2():
    ex = example("table2_gamma_empty")
    return ex.game, ex.abf


def test_structure_validation_and_round_trip():
    g = example("table1_unstable").game
    cs = CoalitionStructure.grand(g, [0.5, 0.5, 0.5])
    doc = json.loads(json.dumps(cs.to_dict()))
    back = CoalitionStructure.from_dict(doc)
    assert back.partition == cs.partition
    assert np.array_equal(back.strategies, cs.strategies)
    with pytest.raises(ValueError):
        CoalitionStructure([[0], [0, 1]], np.zeros((2, 3)), [1, 2])
    with pytest.raises(ValueError):
        CoalitionStructure([[0, 1]], np.full((1, 3), 0.9), [2])


def test_product_of_coalitions():
    cs = CoalitionStructure([[0], [1]], np.array([[0.5, 0.0], [0.5, 0.5]]), [1.0, 1.0])
    assert np.allclose(cs.coverage, [0.75, 0.5])


def test_core_constants_table1():
    g = example("table1_unstable").game
    c = core_constants(g, 2)
    # unit ranges: S = 3, A = 1 + 3/1, delta0 = 1/3; spread on t3 is 0
    assert (c.A, c.delta0, c.epsilon0) == (4.0, 1 / 3, 1 / 3)
    assert c.B == 0.0 and c.C == 303.0


def test_subset_resistant_table1(table1):
    g, abf = table1
    sr = build_subset_resistant(g, abf)
    assert sr.u_bar == pytest.approx(1 / 3, abs=1e-5)
    assert sr.t_star == 2
    cov = sr.structure.coverage
    lvl = level_coverage(sr.u_bar - sr.constants.A * abf.delta, g)
    assert cov[:2] == pytest.approx(lvl[:2], abs=1e-9)
    assert cov[2] < lvl[2] - 1e-6
    assert sr.u_hat == pytest.approx([2, 2], abs=1e-6)
    # defender 1 covers t1 then part of t3, defender 2 covers t2 then t3
    x = sr.allocations
    assert x[0, 1] == 0 and x[1, 0] == 0 and x[0, 2] > 0 and x[1, 2] > 0


def test_subset_resistant_worked_fixture():
    ex = example("worked_robust")
    sr = build_subset_resistant(ex.game, ex.abf)
    assert sr.u_hat[0] >= (1 - ex.abf.epsilon) * 2.49


def test_single_defender_pools_like_calc_ne():
    ex = example("worked_robust")
    g = ex.game
    abf = Abf.certified(0.005, 0.1)
    sr = build_subset_resistant(g, abf)
    ne = calc_ne(g, abf)
    # the pooled margin differs (A is 3 vs 16) but both steer toward t1 and spend k=1
    assert sr.structure.coverage.sum() == pytest.approx(1.0)
    assert ne.profile.allocations.sum() == pytest.approx(1.0)
    assert sr.t_star == ne.t_star == 0


def test_subset_resistant_preconditions(table1):
    g, _ = table1
    with pytest.raises(PreconditionError, match="delta0"):
        build_subset_resistant(g, Abf.certified(0.4, 0.1))
    with pytest.raises(PreconditionError, match="epsilon0"):
        build_subset_resistant(g, Abf.certified(0.01, 0.5))
    full = GameSpec([2.0, 2.0], [1, 1], [0, 0], [[1, 1], [1, 1]], [[0, 0], [0, 0]])
    with pytest.raises(PreconditionError, match="saturated"):
        build_subset_resistant(full, Abf.certified(0.01, 0.1))


def test_core_lp_table1(table1):
    g, _ = table1
    sol = core_lp(level_coverage(1 / 3, g), [2, 2], g)
    p = sol.distribution
    assert p[2] <= 1e-9
    assert 1 / 299 - 1e-12 <= p[0] <= 298 / 299 + 1e-12
    assert sol.objective == pytest.approx(301, abs=1e-6)
    M = defender_target_utilities(level_coverage(1 / 3, g), g)
    assert np.all(M @ p >= 2 - 1e-7)
    assert sol.binding_constraints in ([0], [1])


def test_core_lp_matches_scipy(table1):
    g, _ = table1
    c = level_coverage(1 / 3, g)
    M = defender_target_utilities(c, g)
    ref = linprog(-M.sum(0), A_ub=-M, b_ub=[-2, -2], A_eq=np.ones((1, 3)), b_eq=[1], method="highs")
    assert core_lp(c, [2, 2], g).objective == pytest.approx(-ref.fun, abs=1e-9)


def test_core_lp_infeasible(table1):
    g, _ = table1
    with pytest.raises(InfeasibleError) as info:
        core_lp(level_coverage(1 / 3, g), [200, 200], g)
    assert info.value.infeasibility > 0


def test_core_lp_single_defender_point_mass():
    g = GameSpec([1.0], [1, 1, 1], [0, 0, 0], [[1, 5, 2]], [[0, 0, 0]])
    c = np.array([0.2, 0.3, 0.5])
    sol = core_lp(c, [0.0], g)
    M = defender_target_utilities(c, g)[0]
    assert np.argmax(sol.distribution) == np.argmax(M)
    assert sol.distribution.max() == pytest.approx(1.0)


def test_core_lp_tight_bounds_give_unique_vertex():
    g = GameSpec([1.0, 1.0], [1, 1], [0, 0], [[4, 0], [0, 4]], [[0, 0], [0, 0]])
    c = np.ones(2)
    # each defender demands its full share of a 50/50 split
    sol = core_lp(c, [2, 2], g)
    assert sol.distribution == pytest.approx([0.5, 0.5], abs=1e-9)
    assert sol.binding_constraints == [0, 1]


@settings(max_examples=40)
@given(
    st.integers(2, 4).flatmap(
        lambda m: st.tuples(
            st.integers(1, 3).flatmap(
                lambda n: st.lists(
                    st.lists(st.floats(0, 10, allow_nan=False), min_size=m, max_size=m), min_size=n, max_size=n
                )
            ),
            st.floats(0, 1),
        )
    )
)
def test_core_lp_vertex_and_constraints(data):
    rows, frac = data
    M = np.array(rows)
    n, m = M.shape
    g = GameSpec(np.ones(n), np.full(m, 1.0), np.zeros(m), M, np.zeros_like(M))
    # full coverage makes the per-target utilities equal the rewards
    c = np.ones(m)
    # a feasible lower bound: a fraction of the utilities under the uniform attack
    u_hat = frac * M.mean(axis=1)
    sol = core_lp(c, u_hat, g)
    p = sol.distribution
    assert p.sum() == pytest.approx(1.0, abs=1e-12) and np.all(p >= -1e-12)
    assert np.all(M @ p >= u_hat - 1e-7)
    # vertex: support size at most the number of tight constraints plus the simplex row
    assert np.count_nonzero(p > 1e-9) <= len(sol.binding_constraints) + 1
    ref = linprog(-M.sum(0), A_ub=-M, b_ub=-u_hat, A_eq=np.ones((1, m)), b_eq=[1], method="highs")
    assert sol.objective == pytest.approx(-ref.fun, abs=1e-6)


def test_core_lp_pareto_on_grid(table1):
    g, _ = table1
    c = level_coverage(1 / 3, g)
    M = defender_target_utilities(c, g)
    u_hat = np.array([2.0, 2.0])
    got = M @ core_lp(c, u_hat, g).distribution
    vals = lattice(0.005)
    Q = np.array([[a, b, 1 - a - b] for a in vals for b in vals if a + b <= 1 + 1e-12])
    Q = np.clip(Q, 0, 1)
    U = Q @ M.T
    feasible = np.all(U >= u_hat - 1e-12, axis=1)
    better = np.all(U > got + 1e-7, axis=1)
    assert not np.any(feasible & better)


def test_build_core_solution_table1(table1, table1_solution):
    g, abf = table1
    cs, rep = table1_solution
    assert rep.zeta == pytest.approx(0.303)
    m = g.num_targets
    assert np.max(np.abs(rep.realized - rep.lp.distribution)) <= m * m * abf.epsilon
    assert rep.realized[2] < 1e-6
    assert np.all(rep.utilities >= rep.u_hat - rep.zeta)
    assert cs.coverage.sum() <= g.total_resources + 1e-9
    doc = json.loads(json.dumps(rep.as_dict()))
    assert doc["lp"]["objective"] == pytest.approx(301)


def test_realize_distribution_rejects_overspend(table1):
    g, abf = table1
    poor = GameSpec([0.1, 0.1], g.attacker_reward, g.attacker_penalty, g.defender_reward, g.defender_penalty)
    with pytest.raises(PreconditionError, match="resources"):
        realize_distribution([1 / 3, 1 / 3, 1 / 3], poor, abf, 1 / 3)


def test_verify_alpha_core_table1(table1, table1_solution):
    g, abf = table1
    cs, rep = table1_solution
    v = verify_alpha_core(cs, rep.zeta, g, abf, 0.02)
    assert v.passed
    assert [d["deviators"] for d in v.deviations] == [[0], [1], [0, 1]]


def test_core_interval_inside_and_outside(table1, table1_solution):
    g, abf = table1
    _, rep = table1_solution
    inside = realize_distribution([0.5, 0.5, 0], g, abf, rep.u_bar)
    assert verify_alpha_core(inside, rep.zeta, g, abf, 0.02).passed
    outside = realize_distribution([1, 0, 0], g, abf, rep.u_bar)
    v = verify_alpha_core(outside, rep.zeta, g, abf, 0.02)
    assert not v.passed
    hit = [d for d in v.deviations if d["successful"]]
    assert [d["deviators"] for d in hit] == [[0]]
    # defender 1 gets about 1 at (1,0,0) and about 2 by deviating
    assert hit[0]["gain"] == pytest.approx(1.0, abs=0.05)
    assert hit[0]["witness"] is not None


def test_null_deviation_is_refuted(table1, table1_solution):
    g, abf = table1
    cs, rep = table1_solution
    X = cs.strategies[0][None] * 0.5
    xr = constructive_revenge([0], X, cs, g, abf, rep.u_bar)
    assert np.all(xr.sum(axis=1) <= g.resources[1] + 1e-9)
    # replaying the structure's own split: revenge keeps the deviator within zeta of its baseline
    sr = build_subset_resistant(g, abf)
    X0 = sr.allocations[0][None]
    base = defender_utilities(cs.coverage, abf, g)[0]
    worst = min(
        defender_utilities(1 - (1 - X0) * (1 - r), abf, g)[:, 0].item()
        for r in revenge_candidates([0], X0, cs, g, abf, rep.u_bar)
    )
    assert worst <= base + rep.zeta


def test_revenge_all_but_one_table2(table2):
    g, abf = table2
    cs = level_structure(g)
    D = [0, 1, 2]
    x = default_gamma_deviation(g, D)
    X = x[None]
    resp = revenge_candidates(D, X, cs, g, abf)
    assert all(r.shape == X.shape and r.sum() <= g.resources[3] + 1e-9 for r in resp)
    base = defender_utilities(cs.coverage, abf, g)[D]
    xr = constructive_revenge(D, X, cs, g, abf)
    after = defender_utilities(1 - (1 - X[0]) * (1 - xr[0]), abf, g)[D]
    # the constructive response alone leaves some deviator no better off than before
    assert np.min(after - base) <= 0


def test_proper_subsets():
    assert proper_subsets(3) == [(0,), (1,), (2,), (0, 1), (0, 2), (1, 2)]


def test_level_structure_table2(table2):
    g, abf = table2
    cs = level_structure(g)
    assert min_max_height(g) == pytest.approx(1 / 3, abs=1e-9)
    assert defender_utilities(cs.coverage, abf, g) == pytest.approx(np.full(4, 19 / 6), abs=1e-6)
    assert default_gamma_deviation(g, [0, 1]) == pytest.approx([2 / 3] * 3 + [0] * 3)


@pytest.mark.slow
def test_gamma_deviation_table2(table2):
    g, abf = table2
    cs = level_structure(g)
    x = np.array([2 / 3] * 3 + [0] * 3)
    ev = gamma_deviation(cs, [0, 1], x, g, abf, 0.1)
    assert ev.confirmed
    assert min(ev.worst_utilities) >= 4 - 0.05
    assert check_gamma_deviation(cs, [2, 3], x[::-1], g, abf, 0.1)


def test_gamma_null_deviation_is_not_a_gain(table2):
    g, abf = table2
    cs = level_structure(g)
    assert not check_gamma_deviation(cs, [0, 1, 2, 3], cs.coverage, g, abf, 0.1)


def test_gamma_rejects_bad_input(table2):
    g, abf = table2
    cs = level_structure(g)
    with pytest.raises(ValueError):
        gamma_deviation(cs, [], np.zeros(6), g, abf, 0.1)
    with pytest.raises(ValueError):
        gamma_deviation(cs, [0], np.ones(6), g, abf, 0.1)


def test_gamma_emptiness_sweep(table2):
    g, _ = table2
    out = sweep_attack_distributions(g, 0.05)
    assert out["distributions"] == math.comb(20 + 5, 5)
    assert out["best_min_upper_bound"] < 4


def test_core_verification_handles_single_defender():
    ex = example("worked_robust")
    cs, rep = build_core_solution(ex.game, ex.abf)
    v = verify_alpha_core(cs, rep.zeta, ex.game, ex.abf, 0.01)
    assert v.passed
    assert [d["deviators"] for d in v.deviations] == [[0]]
    assert attack_distribution(cs.coverage, ex.abf, ex.game).sum() == pytest.approx(1.0)
