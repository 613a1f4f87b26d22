"""Cooperative solutions: pooled water-filling, the attack-distribution LP,
realisation of a target distribution, and coalition-deviation checks."""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass

import numpy as np

from .abf import Abf, induce_distribution
from .alloc import NoLevelPointError, gc_alloc, find_level_input
from .equilibrium import PreconditionError
from .game import (
    GameError,
    GameSpec,
    StrategyProfile,
    attack_distribution,
    attacker_utilities,
    check_saturation,
    combine_coverage,
    defender_target_utilities,
    defender_utilities,
    level_coverage,
    min_max_height,
)
from .lp import simplex
from .oracle import GRID_LIMIT, grid_best_deviation, iter_points, lattice

LP_TOL = 1e-7


@dataclass(frozen=True)
class CoalitionStructure:
    """A partition of the defenders with one pooled coverage vector per coalition."""

    partition: tuple
    strategies: np.ndarray
    budgets: np.ndarray

    def __post_init__(self):
        part = tuple(tuple(sorted(int(i) for i in p)) for p in self.partition)
        x = np.array(self.strategies, dtype=float)
        k = np.array(self.budgets, dtype=float)
        members = sorted(i for p in part for i in p)
        if members != list(range(len(members))) or any(len(p) == 0 for p in part):
            raise GameError("partition must split defenders 0..n-1 into disjoint non-empty coalitions")
        if x.ndim != 2 or x.shape[0] != len(part) or k.shape != (len(part),):
            raise GameError("need one strategy and one budget per coalition")
        object.__setattr__(self, "partition", part)
        # StrategyProfile does the range and budget checks
        prof = StrategyProfile(x, k, part)
        object.__setattr__(self, "strategies", prof.allocations)
        object.__setattr__(self, "budgets", prof.budgets)

    @classmethod
    def grand(cls, g: GameSpec, coverage) -> "CoalitionStructure":
        return cls((tuple(range(g.num_defenders)),), [np.asarray(coverage, dtype=float)], [g.total_resources])

    def profile(self) -> StrategyProfile:
        return StrategyProfile(self.strategies, self.budgets, self.partition)

    @property
    def coverage(self) -> np.ndarray:
        return combine_coverage(self.strategies)

    def to_dict(self) -> dict:
        return {
            "partition": [list(p) for p in self.partition],
            "strategies": self.strategies.tolist(),
            "budgets": self.budgets.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CoalitionStructure":
        return cls(tuple(tuple(p) for p in doc["partition"]), doc["strategies"], doc["budgets"])


@dataclass(frozen=True)
class CoreConstants:
    A: float
    B: float
    C: float
    delta0: float
    epsilon0: float
    eps_coef: float
    delta_coef: float

    def zeta(self, delta: float, epsilon: float) -> float:
        return self.eps_coef * epsilon + self.delta_coef * delta


def core_constants(g: GameSpec, t_star: int) -> CoreConstants:
    """Constants of the pooled construction.

    The error budget adds the LP realisation loss (``m^2 eps`` of probability
    mass on payoffs of size at most ``max |payoff|``) and the coverage shift of
    at most ``2 m delta`` attacker utility per target to the base constants.
    """
    m = g.num_targets
    inv = 1.0 / g.attacker_range
    S = float(inv.sum())
    span = g.defender_reward - g.defender_penalty
    spread = float(span[:, t_star].max())
    rt = float(g.attacker_range[t_star])
    A = 1.0 + S / float(inv.min())
    B = spread * (1.0 / rt + S + S * S / rt)
    C = float(g.defender_reward.sum(axis=1).max())
    absmax = float(np.maximum(np.abs(g.defender_reward), np.abs(g.defender_penalty)).sum(axis=1).max())
    eps_coef = C + m * m * absmax
    delta_coef = B + 2 * m * float((span * inv).max())
    return CoreConstants(A, B, C, 1.0 / S, 1.0 / m, eps_coef, delta_coef)


@dataclass
class SubsetResistant:
    structure: CoalitionStructure
    u_hat: np.ndarray
    u_bar: float
    t_star: int
    constants: CoreConstants
    allocations: np.ndarray


def build_subset_resistant(g: GameSpec, abf: Abf) -> SubsetResistant:
    """Grand coalition water-filled to ``u_bar - A delta`` with preferences read at ``u_bar``."""
    d, eps = abf.delta, abf.epsilon
    try:
        u_bar = find_level_input(g, "additive", tol=d * d)
    except NoLevelPointError as exc:
        raise PreconditionError(f"no pooled level point; the game looks saturated ({exc})") from exc
    pre = core_constants(g, 0)
    if not d < pre.delta0:
        raise PreconditionError(f"delta = {d:.6g} must be below delta0 = {pre.delta0:.6g}")
    if not eps < pre.epsilon0:
        raise PreconditionError(f"epsilon = {eps:.6g} must be below epsilon0 = 1/m = {pre.epsilon0:.6g}")
    alpha = pre.A * d / float(g.attacker_range.min())
    if not alpha < 1:
        raise PreconditionError(f"saturation margin A*delta/b = {alpha:.6g} must be below 1")
    if check_saturation(g, abf, alpha):
        raise PreconditionError(f"game is saturated at margin alpha = {alpha:.6g}")
    res = gc_alloc(u_bar - pre.A * d, u_bar, g)
    t_star = 0 if res.last_target is None else int(res.last_target)
    cs = CoalitionStructure.grand(g, res.coverage)
    u_hat = defender_utilities(res.coverage, abf, g)
    return SubsetResistant(cs, u_hat, float(u_bar), t_star, core_constants(g, t_star), res.profile.allocations)


@dataclass
class CoreLpSolution:
    distribution: np.ndarray
    objective: float
    binding_constraints: list

    def as_dict(self) -> dict:
        return {
            "distribution": self.distribution.tolist(),
            "objective": self.objective,
            "binding_constraints": self.binding_constraints,
        }


def core_lp(c_hat, u_hat, g: GameSpec) -> CoreLpSolution:
    """Attack distribution maximising total defender utility at coverage ``c_hat``
    while keeping every defender at or above ``u_hat``."""
    M = defender_target_utilities(np.asarray(c_hat, dtype=float), g)
    u_hat = np.asarray(u_hat, dtype=float)
    m = g.num_targets
    res = simplex(M.sum(axis=0), A_ub=-M, b_ub=-u_hat, A_eq=np.ones((1, m)), b_eq=[1.0])
    p = res.x / res.x.sum()
    got = M @ p
    binding = [int(i) for i in np.flatnonzero(np.abs(got - u_hat) <= LP_TOL)]
    return CoreLpSolution(p, float(M.sum(axis=0) @ p), binding)


def realize_distribution(p, g: GameSpec, abf: Abf, u_base: float | None = None) -> CoalitionStructure:
    """Grand-coalition coverage whose attack distribution approximates ``p``."""
    u_base = min_max_height(g) if u_base is None else u_base
    target = induce_distribution(p, u_base, abf)
    c = np.clip((g.attacker_reward - target) / g.attacker_range, 0.0, 1.0)
    if c.sum() > g.total_resources + 1e-9:
        raise PreconditionError(
            f"realising the distribution needs {c.sum():.6g} resources, only {g.total_resources:.6g} available"
        )
    return CoalitionStructure.grand(g, c)


@dataclass
class CoreReport:
    zeta: float
    constants: CoreConstants
    lp: CoreLpSolution
    u_hat: np.ndarray
    u_bar: float
    t_star: int
    realized: np.ndarray
    utilities: np.ndarray
    abf: Abf
    verification: dict | None = None

    def as_dict(self) -> dict:
        doc = {
            "zeta": self.zeta,
            "constants": asdict(self.constants),
            "lp": self.lp.as_dict(),
            "u_hat": self.u_hat.tolist(),
            "u_bar": self.u_bar,
            "t_star": self.t_star,
            "realized_distribution": self.realized.tolist(),
            "utilities": self.utilities.tolist(),
            "abf": self.abf.to_dict(),
        }
        if self.verification is not None:
            doc["verification"] = self.verification
        return doc


def build_core_solution(g: GameSpec, abf: Abf) -> tuple[CoalitionStructure, CoreReport]:
    base = build_subset_resistant(g, abf)
    lp = core_lp(base.structure.coverage, base.u_hat, g)
    cs = realize_distribution(lp.distribution, g, abf, base.u_bar)
    realized = attack_distribution(cs.coverage, abf, g)
    utilities = defender_utilities(cs.coverage, abf, g)
    zeta = base.constants.zeta(abf.delta, abf.epsilon)
    return cs, CoreReport(zeta, base.constants, lp, base.u_hat, base.u_bar, base.t_star, realized, utilities, abf)


# ---------------------------------------------------------------- revenge


def _response(X: np.ndarray, need: np.ndarray) -> np.ndarray:
    """Extra independent coverage lifting ``X`` to at least ``need``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(X >= 1.0, 0.0, (need - X) / (1.0 - X))
    return np.clip(r, 0.0, 1.0)


def _fit_budget(xr: np.ndarray, budget: float) -> np.ndarray:
    cost = xr.sum(axis=1, keepdims=True)
    scale = np.where(cost > budget, budget / np.maximum(cost, 1e-300), 1.0)
    return xr * scale


def _isolate(X: np.ndarray, t0: int, gap, g: GameSpec) -> np.ndarray:
    """Response holding every target other than ``t0`` at least ``gap`` below it."""
    h = g.attacker_reward[t0] - X[:, t0] * g.attacker_range[t0]
    gap = np.broadcast_to(np.asarray(gap, dtype=float), h.shape)
    need = np.clip((g.attacker_reward - (h - gap)[:, None]) / g.attacker_range, 0.0, 1.0)
    xr = _response(X, need)
    xr[:, t0] = 0.0
    return xr


def _max_isolation(X, t0, budget, g, iters=40):
    lo = np.zeros(X.shape[0])
    hi = np.full(X.shape[0], float(g.attacker_range.max()))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        ok = _isolate(X, t0, mid, g).sum(axis=1) <= budget
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    # rows where even a zero gap is unaffordable come back scaled down
    return _fit_budget(_isolate(X, t0, lo, g), budget)


def _water_fill(X, budget, g, iters=50):
    lo = np.full(X.shape[0], float(g.attacker_penalty.min()))
    hi = np.full(X.shape[0], float(g.attacker_reward.max()))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        need = np.clip((g.attacker_reward - mid[:, None]) / g.attacker_range, 0.0, 1.0)
        ok = _response(X, need).sum(axis=1) <= budget
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    need = np.clip((g.attacker_reward - hi[:, None]) / g.attacker_range, 0.0, 1.0)
    return _fit_budget(_response(X, need), budget)


def constructive_revenge(deviators, X, cs: CoalitionStructure, g: GameSpec, abf: Abf, u_bar=None) -> np.ndarray:
    """The punishing response of the other defenders, pooled, for each deviation row of ``X``.

    Targets the deviators leave alone are covered to ``u_bar - delta``. Among
    the deviator-touched targets still attacked with probability at least eps,
    ``t0`` is the one worst for the first deviator at the level coverage of
    ``u_bar`` (lowest index on ties); the remaining budget pushes the other
    likely targets ``delta`` below ``t0``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    D = sorted(int(i) for i in deviators)
    rest = [j for j in range(g.num_defenders) if j not in D]
    budget = float(g.resources[rest].sum())
    u_bar = min_max_height(g) if u_bar is None else u_bar
    d = abf.delta
    B, m = X.shape
    touched = X > 1e-12
    lvl = np.broadcast_to(level_coverage(u_bar - d, g), X.shape)
    xr = _fit_budget(np.where(touched, 0.0, _response(X, lvl)), budget)

    c = 1.0 - (1.0 - X) * (1.0 - xr)
    w = attack_distribution(c, abf, g)
    likely = w >= abf.epsilon
    ref = defender_target_utilities(level_coverage(u_bar, g), g)[D[0]]
    cand = likely & touched
    score = np.where(cand, ref[None, :], np.inf)
    # fall back to the most likely target when no touched target is likely
    t0 = np.where(cand.any(axis=1), np.argmin(score, axis=1), np.argmax(w, axis=1))
    rows = np.arange(B)
    ua = attacker_utilities(c, g)
    h = ua[rows, t0] - d
    need = np.clip((g.attacker_reward - h[:, None]) / g.attacker_range, 0.0, 1.0)
    push = np.maximum(_response(X, need) - xr, 0.0)
    push[rows, t0] = 0.0
    push = np.where(likely, push, 0.0)
    left = np.maximum(budget - xr.sum(axis=1), 0.0)
    # spend what is left in target order
    for t in range(m):
        give = np.minimum(push[:, t], left)
        xr[:, t] += give
        left -= give
    return _fit_budget(xr, budget)


def revenge_candidates(deviators, X, cs: CoalitionStructure, g: GameSpec, abf: Abf, u_bar=None) -> list:
    """Responses tried against each deviation; the deviation counts only if it beats all of them."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    D = set(int(i) for i in deviators)
    budget = float(sum(g.resources[j] for j in range(g.num_defenders) if j not in D))
    out = [np.zeros_like(X), constructive_revenge(deviators, X, cs, g, abf, u_bar)]
    if budget <= 0:
        return out
    for t0 in range(g.num_targets):
        out.append(_fit_budget(_isolate(X, t0, abf.delta, g), budget))
        out.append(_max_isolation(X, t0, budget, g))
    out.append(_water_fill(X, budget, g))
    return out


def proper_subsets(n: int) -> list:
    return [s for r in range(1, n) for s in itertools.combinations(range(n), r)]


@dataclass
class CoreVerification:
    passed: bool
    zeta: float
    slack: float
    grid_step: float
    deviations: list
    points: int

    def as_dict(self) -> dict:
        return asdict(self)


def verify_alpha_core(
    cs: CoalitionStructure,
    zeta: float,
    g: GameSpec,
    abf: Abf,
    grid_step: float,
    limit: int = GRID_LIMIT,
    threads: int | None = None,
) -> CoreVerification:
    """Search every coalition for a deviation that survives all tried revenge responses."""
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    n = g.num_defenders
    slack = grid_step * float(np.max((g.defender_reward - g.defender_penalty).sum(axis=1)))
    u_bar = min_max_height(g)
    extras = np.vstack([cs.strategies, level_coverage(u_bar, g)[None]])
    base = cs.profile()
    rows, points = [], 0
    for D in proper_subsets(n) + [tuple(range(n))]:
        if len(D) < n:
            res = grid_best_deviation(
                D, base, g, abf, grid_step, "constructive",
                revenge=lambda X, D=D: revenge_candidates(D, X, cs, g, abf, u_bar),
                extras=extras, limit=limit, threads=threads,
            )
        else:
            res = grid_best_deviation(
                D, CoalitionStructure.grand(g, cs.coverage).profile(), g, abf, grid_step, "none",
                extras=extras, limit=limit, threads=threads,
            )
        points += res.points
        doc = res.as_dict()
        doc["deviators"] = list(D)
        doc["successful"] = bool(res.gain > zeta + slack)
        rows.append(doc)
    return CoreVerification(not any(r["successful"] for r in rows), float(zeta), slack, float(grid_step), rows, points)


# ---------------------------------------------------------------- gamma core


@dataclass
class GammaEvidence:
    confirmed: bool
    worst_gain: float
    worst_utilities: list
    baseline: list
    response: list | None
    profiles: int

    def as_dict(self) -> dict:
        return asdict(self)


def gamma_deviation(cs, deviators, x_D, g: GameSpec, abf, grid_step: float, threads: int | None = None) -> GammaEvidence:
    """Worst case of a fixed coalition deviation over independent grid responses of everyone else."""
    D = sorted(int(i) for i in deviators)
    x_D = np.asarray(x_D, dtype=float)
    if not D or any(not 0 <= i < g.num_defenders for i in D):
        raise ValueError("deviators must be a non-empty set of defender indices")
    if x_D.sum() > g.resources[D].sum() + 1e-9 or np.any(x_D < 0) or np.any(x_D > 1):
        raise ValueError("deviation must lie in [0, 1]^m within the deviators' pooled budget")
    base = cs.profile()
    res = grid_best_deviation(D, base, g, abf, grid_step, "grid_noncooperative", candidates=[x_D], threads=threads)
    baseline = defender_utilities(cs.coverage, abf, g)[D]
    return GammaEvidence(
        confirmed=bool(res.gain > 0),
        worst_gain=float(res.gain),
        worst_utilities=np.asarray(res.utilities).tolist(),
        baseline=baseline.tolist(),
        response=None if res.response is None else res.response.tolist(),
        profiles=int(res.points),
    )


def check_gamma_deviation(cs, deviators, x_D, g: GameSpec, abf, grid_step: float) -> bool:
    return gamma_deviation(cs, deviators, x_D, g, abf, grid_step).confirmed


def level_structure(g: GameSpec) -> CoalitionStructure:
    """Grand coalition at the level coverage of the pooled mini-max height."""
    return CoalitionStructure.grand(g, level_coverage(min_max_height(g), g))


def default_gamma_deviation(g: GameSpec, deviators) -> np.ndarray:
    """Spread the deviators' pooled budget evenly over the targets they value least at the level coverage."""
    D = sorted(int(i) for i in deviators)
    vals = defender_target_utilities(level_coverage(min_max_height(g), g), g)[D].mean(axis=0)
    low = vals < vals.mean() - 1e-12
    if not low.any():
        low = np.ones_like(low)
    x = np.where(low, min(1.0, float(g.resources[D].sum()) / low.sum()), 0.0)
    return x


def sweep_attack_distributions(g: GameSpec, step: float = 0.05) -> dict:
    """Best attainable minimum defender utility over a grid of attack distributions.

    Each defender's utility under distribution ``q`` is bounded above by
    ``sum_t q_t r^d_i(t)`` whatever the coverage; the sweep reports the
    largest minimum of these bounds over the grid.
    """
    m = g.num_targets
    vals = [lattice(step)] * m
    best, arg, count = -np.inf, None, 0
    for Q in iter_points(vals, 1.0):
        Q = Q[np.abs(Q.sum(axis=1) - 1.0) <= 1e-9]
        if not Q.size:
            continue
        count += Q.shape[0]
        low = (Q @ g.defender_reward.T).min(axis=1)
        k = int(np.argmax(low))
        if low[k] > best:
            best, arg = float(low[k]), Q[k]
    return {"best_min_upper_bound": best, "argmax": None if arg is None else arg.tolist(), "distributions": count}


def to_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2)
