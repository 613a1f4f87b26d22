"""Brute-force deviation search and the reference example games.

The grid engine here is deliberately simple: enumerate every allocation on
a per-target value set whose total fits the budget, evaluate utilities in
vectorised chunks, reduce deterministically. Everything else in the package
that claims a deviation is (or is not) profitable goes through it.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .abf import Abf
from .game import (
    GameSpec,
    StrategyProfile,
    combine_coverage,
    defender_utilities,
    level_coverage,
    min_max_height,
)

GRID_LIMIT = 10_000_000
JOINT_LIMIT = 100_000_000
CHUNK = 1 << 16
SUM_TOL = 1e-9


class GridTooLargeError(ValueError):
    pass


# ---------------------------------------------------------------- fixtures


@dataclass(frozen=True)
class ExampleGame:
    id: str
    game: GameSpec
    abf: Abf | None
    notes: str
    reference: dict = field(default_factory=dict)


def _no_nse() -> ExampleGame:
    g = GameSpec([2.0], [1.0, 1.0], [0.0, 0.0], [[3.0, 1.0]], [[2.0, 0.0]])
    return ExampleGame(
        "no_nse", g, None,
        "one defender that can cover both targets; under a best-responding attacker the"
        " defender's utility approaches 3 as coverage of t1 tends to 1 but drops at full coverage",
    )


def _worked_robust() -> ExampleGame:
    g = GameSpec([1.0], [1.0, 1.0], [0.0, 0.0], [[3.0, 1.0]], [[2.0, 0.0]])
    return ExampleGame(
        "worked_robust", g, Abf(250.0, 0.01, 0.1),
        "single defender with one resource, softmax attacker with scale 250 certified (0.01, 0.1);"
        " hand analysis gives the profile (0.49, 0.51) with zeta = 2.5 eps + 1.5 delta",
        {"profile": [[0.49, 0.51]], "zeta": 0.265, "alpha": 0.01},
    )


def _table1() -> ExampleGame:
    d = [[1.0, 300.0, 2.0], [300.0, 1.0, 2.0]]
    g = GameSpec([1.0, 1.0], [1.0, 1.0, 1.0], [0.0, 0.0, 0.0], d, d)
    return ExampleGame(
        "table1_unstable", g, Abf.certified(1e-3, 1e-4),
        "two defenders, coverage-independent values; pooled water-filling steers the attack to t3"
        " where both get about 2, far from the jointly better split between t1 and t2",
    )


def _table2() -> ExampleGame:
    lo_r, lo_p = [1.0, 1.0, 1.0, 6.0, 6.0, 6.0], [0.0, 0.0, 0.0, 5.0, 5.0, 5.0]
    hi_r, hi_p = lo_r[3:] + lo_r[:3], lo_p[3:] + lo_p[:3]
    g = GameSpec(
        [1.0] * 4, [1.0] * 6, [0.0] * 6,
        [lo_r, lo_r, hi_r, hi_r], [lo_p, lo_p, hi_p, hi_p],
    )
    delta = (7.0 - 3.0 * math.sqrt(5.0)) / 12.0
    return ExampleGame(
        "table2_gamma_empty", g, Abf.certified(delta, 1.0 / 15.0),
        "four defenders in two mirrored pairs; each pair can secure about 4 against any"
        " non-cooperative response, which no single attack distribution allows for both pairs",
    )


_FIXTURES = {
    "no_nse": _no_nse,
    "worked_robust": _worked_robust,
    "table1_unstable": _table1,
    "table2_gamma_empty": _table2,
}
EXAMPLE_IDS = tuple(_FIXTURES)


def example(id: str) -> ExampleGame:
    try:
        return _FIXTURES[id]()
    except KeyError:
        raise KeyError(f"unknown example {id!r}; choose one of {', '.join(EXAMPLE_IDS)}") from None


# ---------------------------------------------------------------- grids


def lattice(step: float) -> np.ndarray:
    """Multiples of ``step`` in [0, 1], with 1 always included."""
    if not step > 0:
        raise ValueError("grid step must be positive")
    k = int(math.floor(1.0 / step + 1e-9))
    return np.unique(np.append(np.arange(k + 1) * step, 1.0))


def coordinate_values(step: float, m: int, extras=None) -> list:
    """Per-target candidate values: the lattice, 0 and 1, plus any extra values for that target."""
    base = lattice(step)
    out = []
    for t in range(m):
        vals = base
        if extras is not None:
            e = np.asarray(extras, dtype=float).reshape(-1, m)[:, t]
            e = e[(e >= 0) & (e <= 1)]
            vals = np.unique(np.concatenate([base, e]))
        out.append(vals)
    return out


def _prefixes(values: Sequence[np.ndarray], budget: float, limit: int | None = None) -> np.ndarray:
    """All feasible prefixes over the first ``m - 1`` coordinates.

    Every prefix extends by 0, so the size of each level bounds the final
    count from below; exceeding ``limit`` at any level aborts early.
    """
    pre = np.zeros((1, 0))
    sums = np.zeros(1)
    for vals in values[:-1]:
        cnt = np.searchsorted(vals, budget + SUM_TOL - sums, side="right")
        total = int(cnt.sum())
        if limit is not None:
            guard(total, limit)
        start = np.repeat(np.cumsum(cnt) - cnt, cnt)
        add = vals[np.arange(total) - start]
        pre = np.column_stack([np.repeat(pre, cnt, axis=0), add])
        sums = np.repeat(sums, cnt) + add
    return pre


def count_points(values: Sequence[np.ndarray], budget: float, limit: int | None = None) -> int:
    pre = _prefixes(values, budget, limit)
    left = budget + SUM_TOL - pre.sum(axis=1)
    return int(np.searchsorted(values[-1], left, side="right").sum())


def iter_points(values: Sequence[np.ndarray], budget: float, chunk: int = CHUNK) -> Iterator[np.ndarray]:
    """Allocations with coordinates from ``values`` and total at most ``budget``, in lexicographic order."""
    pre = _prefixes(values, budget)
    last = values[-1]
    per = max(1, chunk // last.size)
    for s in range(0, pre.shape[0], per):
        block = pre[s:s + per]
        rows = np.repeat(block, last.size, axis=0)
        col = np.tile(last, block.shape[0])
        keep = rows.sum(axis=1) + col <= budget + SUM_TOL
        yield np.column_stack([rows[keep], col[keep]])


def min_max_extras(g: GameSpec) -> np.ndarray:
    """Level coverage at the pooled mini-max height, as one extra grid row."""
    return level_coverage(min_max_height(g), g)[None]


def guard(count: int, limit: int, what: str = "grid") -> None:
    if count > limit:
        raise GridTooLargeError(f"{what} has {count} points (limit {limit}); use a coarser grid step")


def thread_count() -> int:
    env = os.environ.get("MSSG_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(4, os.cpu_count() or 1))


def _map(fn, items, threads: int | None):
    threads = thread_count() if threads is None else threads
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # map keeps submission order, so the reduction below is deterministic
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- search


@dataclass
class DeviationSearch:
    gain: float
    witness: np.ndarray | None
    response: np.ndarray | None
    points: int
    utilities: np.ndarray | None = None

    def as_dict(self) -> dict:
        arr = lambda a: None if a is None else np.asarray(a).tolist()
        return {
            "gain": float(self.gain),
            "witness": arr(self.witness),
            "response": arr(self.response),
            "points": int(self.points),
            "utilities": arr(self.utilities),
        }


def batch_utilities(c: np.ndarray, players: Sequence[int], abf, g: GameSpec) -> np.ndarray:
    """Expected utilities of the listed defenders for a batch of coverages, shape ``(B, len(players))``."""
    players = list(players)
    ua = g.attacker_reward - c * g.attacker_range
    w = abf(ua)
    p = g.defender_penalty[players]
    span = g.defender_reward[players] - p
    return w @ p.T + (c * w) @ span.T


def _utilities_by_target(cT: np.ndarray, players, abf, g: GameSpec) -> np.ndarray:
    """Same as :func:`batch_utilities` on a targets-first batch ``(m, B)``; returns ``(len(players), B)``.

    Reductions over the short target axis vectorise across the batch in this layout.
    """
    players = list(players)
    uaT = g.attacker_reward[:, None] - cT * g.attacker_range[:, None]
    if isinstance(abf, Abf):
        z = abf.scale * uaT
        z -= z.max(axis=0)
        np.exp(z, out=z)
        z /= z.sum(axis=0)
        w = z
    else:
        w = np.ascontiguousarray(np.asarray(abf(uaT.T)).T)
    p = g.defender_penalty[players]
    span = g.defender_reward[players] - p
    return p @ w + span @ (cT * w)


def grid_best_deviation(
    actors,
    base: StrategyProfile,
    g: GameSpec,
    abf,
    grid_step: float,
    revenge_mode: str = "none",
    *,
    revenge: Callable | None = None,
    candidates=None,
    extras=None,
    limit: int = GRID_LIMIT,
    joint_limit: int = JOINT_LIMIT,
    threads: int | None = None,
) -> DeviationSearch:
    """Largest guaranteed gain the actor set can secure by a grid deviation.

    The actors pool their resources (additively) into one allocation. The gain
    of a deviation is the smallest gain among the actors, and under a response
    mode it is also minimised over the responses:

    ``none``
        players not containing actors keep their allocations from ``base``;
    ``constructive``
        ``revenge(X)`` returns a list of pooled responses of all other
        defenders for each row of ``X``;
    ``grid_noncooperative``
        every other defender answers independently from its own lattice grid,
        combined by the product rule.

    ``candidates`` replaces the deviation grid by an explicit list.
    """
    actors = sorted(set(int(i) for i in actors))
    m = g.num_targets
    if not actors:
        return DeviationSearch(0.0, None, None, 0)
    baseline = defender_utilities(combine_coverage(base.allocations), abf, g)[actors]
    budget = float(g.resources[actors].sum())

    if revenge_mode == "none":
        fixed = np.ones(m)
        for p, mem in enumerate(base.members):
            inside = set(mem) & set(actors)
            if inside and inside != set(mem):
                raise ValueError(f"actors {actors} split player {list(mem)}")
            if not inside:
                fixed = fixed * (1.0 - base.allocations[p])
    elif revenge_mode == "constructive":
        if revenge is None:
            raise ValueError("constructive mode needs a revenge callable")
    elif revenge_mode != "grid_noncooperative":
        raise ValueError(f"unknown revenge mode {revenge_mode!r}")

    if candidates is not None:
        cand = np.atleast_2d(np.asarray(candidates, dtype=float))
        chunks = [cand[s:s + CHUNK] for s in range(0, cand.shape[0], CHUNK)]
        n_points = cand.shape[0]
    else:
        values = coordinate_values(grid_step, m, extras)
        n_points = count_points(values, budget, limit)
        guard(n_points, limit)
        chunks = list(iter_points(values, budget))

    if revenge_mode == "grid_noncooperative":
        rest = [j for j in range(g.num_defenders) if j not in actors]
        grids = []
        joint = n_points
        for j in rest:
            vals = coordinate_values(grid_step, m)
            joint *= count_points(vals, float(g.resources[j]), joint_limit)
            guard(joint, joint_limit, "joint response grid")
            grids.append(np.concatenate(list(iter_points(vals, float(g.resources[j])))))
        return _noncooperative(chunks, n_points, grids, actors, baseline, g, abf, threads)

    def evaluate(X):
        if revenge_mode == "none":
            c = 1.0 - (1.0 - X) * fixed
            gains = (batch_utilities(c, actors, abf, g) - baseline).min(axis=1)
            return gains, None
        worst = np.full(X.shape[0], np.inf)
        resp = np.zeros_like(X)
        for xr in revenge(X):
            c = 1.0 - (1.0 - X) * (1.0 - xr)
            gains = (batch_utilities(c, actors, abf, g) - baseline).min(axis=1)
            better = gains < worst
            worst = np.where(better, gains, worst)
            resp[better] = xr[better]
        return worst, resp

    def reduce_chunk(X):
        gains, resp = evaluate(X)
        k = int(np.argmax(gains))
        return float(gains[k]), X[k], None if resp is None else resp[k]

    best = DeviationSearch(-np.inf, None, None, n_points)
    for gain, x, r in _map(reduce_chunk, chunks, threads):
        if gain > best.gain:
            best.gain, best.witness, best.response = gain, x, r
    if best.witness is not None:
        c = 1.0 - (1.0 - best.witness) * (fixed if revenge_mode == "none" else 1.0 - best.response)
        best.utilities = batch_utilities(c[None], actors, abf, g)[0]
    return best


def _noncooperative(chunks, n_points, grids, actors, baseline, g, abf, threads) -> DeviationSearch:
    factors = [1.0 - G for G in grids]
    sizes = [G.shape[0] for G in grids]
    total = int(np.prod(sizes)) if sizes else 1
    m = g.num_targets
    inner = factors[-1] if factors else np.ones((1, m))
    innerT = np.ascontiguousarray(inner.T)
    outer_sizes = sizes[:-1]
    n_outer = int(np.prod(outer_sizes)) if outer_sizes else 1
    per = max(1, (1 << 20) // inner.shape[0])

    def block(args):
        keep, s = args
        flat = np.arange(s, min(n_outer, s + per))
        pre = np.broadcast_to(keep, (flat.size, m)).copy()
        if outer_sizes:
            for f, ix in zip(factors[:-1], np.unravel_index(flat, outer_sizes)):
                pre *= f[ix]
        cT = 1.0 - (pre.T[:, :, None] * innerT[:, None, :]).reshape(m, -1)
        gains = (_utilities_by_target(cT, actors, abf, g) - baseline[:, None]).min(axis=0)
        k = int(np.argmin(gains))
        return float(gains[k]), int(s * inner.shape[0] + k)

    xs = [x for X in chunks for x in X]
    best = DeviationSearch(-np.inf, None, None, n_points * total)
    for x in xs:
        parts = _map(block, [(1.0 - x, s) for s in range(0, n_outer, per)], threads)
        # first minimum in enumeration order
        gain, arg = min(parts, key=lambda r: r[0])
        if gain > best.gain:
            best.gain, best.witness = gain, x
            if sizes:
                idx = np.unravel_index(arg, sizes)
                best.response = np.stack([G[i] for G, i in zip(grids, idx)])
    if best.witness is not None:
        prod = 1.0 - best.witness
        if best.response is not None:
            prod = prod * np.prod(1.0 - best.response, axis=0)
        best.utilities = batch_utilities((1.0 - prod)[None], actors, abf, g)[0]
    return best
