import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from robust_mssg.game import (
    GameError,
    GameSpec,
    StrategyProfile,
    attacker_utilities,
    attacker_utility,
    check_saturation,
    combine_coverage,
    defender_target_utility,
    defender_utilities,
    expected_defender_utility,
    height,
    level_coverage,
    min_max_height,
    preference_order,
)
from robust_mssg.abf import Abf
from robust_mssg.oracle import example


@st.composite
def games(draw, max_n=3, max_m=5):
    n = draw(st.integers(1, max_n))
    m = draw(st.integers(2, max_m))
    box = st.floats(0, 10, allow_nan=False)
    pa = np.array(draw(st.lists(box, min_size=m, max_size=m)))
    gap = np.array(draw(st.lists(st.floats(0.1, 5), min_size=m, max_size=m)))
    pd = np.array(draw(st.lists(st.lists(box, min_size=m, max_size=m), min_size=n, max_size=n)))
    gd = np.array(draw(st.lists(st.lists(st.floats(0, 5), min_size=m, max_size=m), min_size=n, max_size=n)))
    k = draw(st.lists(st.floats(0, 2), min_size=n, max_size=n))
    return GameSpec(k, pa + gap, pa, pd + gd, pd)


def test_worked_fixture_utilities():
    g = example("worked_robust").game
    c = [0.49, 0.51]
    assert attacker_utility(c, 0, g) == pytest.approx(0.51)
    assert defender_target_utility(c, 0, 0, g) == pytest.approx(0.49 * 3 + 0.51 * 2)
    assert defender_target_utility(c, 1, 0, g) == pytest.approx(0.51)
    assert height(c, g) == pytest.approx(0.51)


def test_index_errors():
    g = example("worked_robust").game
    with pytest.raises(IndexError):
        attacker_utility([0.5, 0.5], 2, g)
    with pytest.raises(IndexError):
        defender_target_utility([0.5, 0.5], 0, 1, g)


@pytest.mark.parametrize(
    "kwargs, msg",
    [
        (dict(resources=[1], attacker_reward=[1, 0], attacker_penalty=[0, 0]), "exceed penalty"),
        (dict(resources=[-1], attacker_reward=[1, 1], attacker_penalty=[0, 0]), "non-negative"),
        (dict(resources=[1], attacker_reward=[1], attacker_penalty=[0]), "two targets"),
    ],
)
def test_invalid_games(kwargs, msg):
    m = len(kwargs["attacker_reward"])
    with pytest.raises(GameError, match=msg):
        GameSpec(defender_reward=[[1] * m], defender_penalty=[[0] * m], **kwargs)


def test_defender_reward_below_penalty_rejected():
    with pytest.raises(GameError, match="defender reward"):
        GameSpec([1], [1, 1], [0, 0], [[0, 1]], [[1, 0]])


def test_json_schema_is_strict():
    g = example("table1_unstable").game
    doc = g.to_dict()
    assert GameSpec.from_dict(doc).to_json() == g.to_json()
    doc["extra"] = 1
    with pytest.raises(GameError):
        GameSpec.from_dict(doc)
    bad = g.to_dict()
    bad["defenders"][0]["reward"] = [1.0, 2.0]
    with pytest.raises(GameError, match="length"):
        GameSpec.from_dict(bad)
    with pytest.raises(GameError):
        GameSpec.from_json(json.dumps({"defenders": [], "attacker": {"reward": [], "penalty": []}}))


@given(games())
def test_json_round_trip(g):
    h = GameSpec.from_json(g.to_json())
    for name in ("resources", "attacker_reward", "attacker_penalty", "defender_reward", "defender_penalty"):
        np.testing.assert_array_equal(getattr(h, name), getattr(g, name))


@given(arrays(float, (3, 4), elements=st.floats(0, 1)))
def test_combination_rules(x):
    ind = combine_coverage(x, "independent")
    add = combine_coverage(x, "additive")
    assert np.all(ind >= x.max(axis=0) - 1e-12)
    assert np.all(ind <= add + 1e-12)
    assert np.all((0 <= ind) & (ind <= 1)) and np.all((0 <= add) & (add <= 1))


def test_combination_examples():
    x = np.array([[0.5, 0.0], [0.5, 1.0]])
    np.testing.assert_allclose(combine_coverage(x), [0.75, 1.0])
    np.testing.assert_allclose(combine_coverage(x, "additive"), [1.0, 1.0])
    with pytest.raises(ValueError):
        combine_coverage(x, "max")


@given(games(), st.floats(0, 1), st.floats(0, 1))
def test_utilities_are_affine_in_coverage(g, s, lam):
    m = g.num_targets
    a, b = np.zeros(m), np.ones(m) * s
    mid = lam * a + (1 - lam) * b
    np.testing.assert_allclose(
        attacker_utilities(mid, g), lam * attacker_utilities(a, g) + (1 - lam) * attacker_utilities(b, g), atol=1e-9
    )


@given(games(), st.floats(-1, 16))
def test_level_coverage_levels_heights(g, u):
    c = level_coverage(u, g)
    ua = attacker_utilities(c, g)
    inner = (c > 0) & (c < 1)
    np.testing.assert_allclose(ua[inner], u, atol=1e-9)
    assert np.all(ua[c == 0] <= u + 1e-9)
    assert np.all(ua[c == 1] >= u - 1e-9)


def test_min_max_height_values():
    assert min_max_height(example("worked_robust").game) == pytest.approx(0.5, abs=1e-9)
    assert min_max_height(example("table1_unstable").game) == pytest.approx(1 / 3, abs=1e-9)
    # three unit targets, one defender with two resources: 3(1-u) = 2
    g = GameSpec([2], [1, 1, 1], [0, 0, 0], [[1, 1, 1]], [[0, 0, 0]])
    assert min_max_height(g) == pytest.approx(1 / 3, abs=1e-9)
    # enough to cover everything: the height floors at the largest penalty
    g = GameSpec([5], [1, 2], [0, 0.5], [[1, 1]], [[0, 0]])
    assert min_max_height(g) == pytest.approx(0.5)


@given(games())
def test_min_max_height_is_feasible_and_tight(g):
    u = min_max_height(g, tol=1e-10)
    need = level_coverage(u, g).sum()
    assert need <= g.total_resources + 1e-7
    if u > g.attacker_penalty.max() + 1e-6:
        assert level_coverage(u - 1e-6, g).sum() > g.total_resources - 1e-9


@given(games(), st.floats(0, 12))
def test_preference_order_sorted(g, u):
    for i in range(g.num_defenders):
        pref = preference_order(i, u, g)
        order = list(pref)
        assert sorted(order) == list(range(g.num_targets))
        vals = (g.defender_penalty[i] + level_coverage(u, g) * (g.defender_reward[i] - g.defender_penalty[i]))
        for a, b in zip(order, order[1:]):
            assert vals[a] < vals[b] or (vals[a] == vals[b] and a < b)


def test_preference_tie_break_by_index():
    g = GameSpec([1], [1, 1, 1], [0, 0, 0], [[2, 1, 2]], [[2, 1, 2]])
    assert tuple(preference_order(0, 0.5, g)) == (1, 0, 2)


def test_expected_utility_matches_manual_sum():
    ex = example("worked_robust")
    g, abf = ex.game, ex.abf
    c = np.array([0.49, 0.51])
    w = abf(attacker_utilities(c, g))
    manual = sum(w[t] * defender_target_utility(c, t, 0, g) for t in range(2))
    assert expected_defender_utility(c, 0, abf, g) == pytest.approx(manual)
    assert defender_utilities(c, abf, g).shape == (1,)


def test_profile_validation():
    with pytest.raises(GameError, match="budget"):
        StrategyProfile([[0.7, 0.7]], [1.0])
    with pytest.raises(GameError):
        StrategyProfile([[1.5, 0.0]], [2.0])
    p = StrategyProfile([[0.25, 0.5]], [1.0])
    np.testing.assert_allclose(p.residual, [0.25])
    assert StrategyProfile.from_dict(p.to_dict()).to_dict() == p.to_dict()


def test_saturation_detection():
    abf = Abf(250.0, 0.01, 0.1)
    assert not check_saturation(example("worked_robust").game, abf, 0.16)
    # large budget: one target can be near fully covered and the other still drags the attack to it
    g = GameSpec([1.9], [1, 1], [0, 0], [[1, 1]], [[0, 0]])
    assert check_saturation(g, abf, 0.16)
    with pytest.raises(ValueError):
        check_saturation(g, abf, 1.5)
