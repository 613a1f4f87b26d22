"""Approximate Nash equilibrium by shifted water-filling, and its grid verification."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .abf import Abf
from .alloc import NoLevelPointError, alloc, find_level_input
from .game import (
    GameSpec,
    StrategyProfile,
    attacker_utilities,
    check_saturation,
    combine_coverage,
    level_coverage,
)
from .oracle import GRID_LIMIT, DeviationSearch, grid_best_deviation, min_max_extras


class PreconditionError(ValueError):
    """A construction was asked to run outside the regime where its guarantee holds."""


class ConstructionError(RuntimeError):
    """The construction ran but its output violates a property it should have."""


@dataclass(frozen=True)
class NeConstants:
    A: float
    B: float
    C: float
    delta0: float
    epsilon0: float
    a: float
    b: float
    g: float

    def zeta(self, delta: float, epsilon: float) -> float:
        return self.B * delta + self.C * epsilon


@dataclass
class NeVerification:
    passed: bool
    max_gain: float
    zeta: float
    slack: float
    grid_step: float
    defender: int | None
    witness: list | None
    gains: list
    points: int

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolveReport:
    profile: StrategyProfile
    zeta: float
    constants: NeConstants
    t_star: int
    u_star: float
    abf: Abf
    verification: NeVerification | None = None
    reference: dict = field(default_factory=dict)
    under_covered: list = field(default_factory=list)

    def as_dict(self) -> dict:
        doc = {
            "profile": self.profile.to_dict(),
            "zeta": self.zeta,
            "constants": asdict(self.constants),
            "t_star": self.t_star,
            "under_covered": self.under_covered,
            "u_star": self.u_star,
            "abf": self.abf.to_dict(),
            "defender_order": "ascending index",
        }
        if self.verification is not None:
            doc["verification"] = self.verification.as_dict()
        if self.reference:
            doc["reference"] = self.reference
        return doc

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2)


def ne_constants(g: GameSpec, u_star: float, t_star: int) -> NeConstants:
    m = g.num_targets
    rng = g.attacker_range
    a, b = float(rng.max()), float(rng.min())
    gg = float(np.min(u_star - g.attacker_penalty))
    if gg <= 0:
        raise PreconditionError(
            f"g = min_t (u* - p^a(t)) = {gg:.6g} <= 0: the level point sits on a penalty,"
            " which is the fully covered boundary case"
        )
    A = 4 * m * a**2 / (b * gg)
    spread = float(np.max(g.defender_reward[:, t_star] - g.defender_penalty[:, t_star]))
    B = spread * (8 * m * a**3 * float(rng.sum()) / (b * gg**2) + A)
    C = float(np.max(g.defender_reward[:, t_star]) + np.max(g.defender_reward.sum(axis=1)))
    return NeConstants(A, B, C, b * gg**2 / (8 * m * a**2), 1.0 / m, a, b, gg)


def calc_ne(g: GameSpec, abf: Abf, require_unique: bool = True) -> SolveReport:
    """Water-fill at ``u* - A delta`` using preferences read at the level point ``u*``.

    The walk is expected to leave exactly one target, t*, below level. When
    defenders walk disjoint groups of targets several can end short; that is
    an error unless ``require_unique`` is false, in which case the report
    lists all of them.
    """
    d, eps = abf.delta, abf.epsilon
    try:
        u_star = find_level_input(g, "independent", tol=d * d)
    except NoLevelPointError as exc:
        raise PreconditionError(f"no level point; the game looks saturated ({exc})") from exc
    # A does not depend on t*, so the bounds can be checked before the walk
    pre = ne_constants(g, u_star, 0)
    if not d < pre.delta0:
        raise PreconditionError(f"delta = {d:.6g} must be below delta0 = {pre.delta0:.6g}")
    if not eps < pre.epsilon0:
        raise PreconditionError(f"epsilon = {eps:.6g} must be below epsilon0 = 1/m = {pre.epsilon0:.6g}")
    alpha = pre.A * d / pre.b
    if not alpha < 1:
        raise PreconditionError(f"saturation margin A*delta/b = {alpha:.6g} must be below 1")
    if check_saturation(g, abf, alpha):
        raise PreconditionError(f"game is saturated at margin alpha = {alpha:.6g}")

    u = u_star - pre.A * d
    res = alloc(u, u_star, g)
    if res.last_target is None:
        raise ConstructionError("the walk allocated nothing")
    t_star = res.last_target
    consts = ne_constants(g, u_star, t_star)

    target = level_coverage(u, g)
    under = np.flatnonzero((res.coverage < target - 1e-9) & (target < 1.0))
    if require_unique and under.tolist() != [t_star]:
        raise ConstructionError(
            f"expected t*={t_star} to be the only under-covered target, found {under.tolist()}"
        )
    if np.any(res.residual > 1e-6):
        raise ConstructionError(f"profile is not efficient: residual {res.residual.tolist()}")
    return SolveReport(
        res.profile, consts.zeta(d, eps), consts, int(t_star), float(u_star), abf,
        under_covered=[int(t) for t in under],
    )


def verify_ne(
    profile: StrategyProfile,
    zeta: float,
    g: GameSpec,
    abf,
    grid_step: float,
    limit: int = GRID_LIMIT,
    threads: int | None = None,
) -> NeVerification:
    """Exhaustive unilateral-deviation search on a simplex grid for every defender."""
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    slack = grid_step * float(np.max((g.defender_reward - g.defender_penalty).sum(axis=1)))
    extras = np.vstack([profile.allocations, min_max_extras(g)])
    gains, best = [], None
    points = 0
    for i in range(g.num_defenders):
        res: DeviationSearch = grid_best_deviation(
            [i], profile, g, abf, grid_step, "none", extras=extras, limit=limit, threads=threads
        )
        gains.append(float(res.gain))
        points += res.points
        if best is None or res.gain > best[1].gain:
            best = (i, res)
    i, res = best
    return NeVerification(
        passed=bool(res.gain <= zeta + slack),
        max_gain=float(res.gain),
        zeta=float(zeta),
        slack=slack,
        grid_step=float(grid_step),
        defender=i,
        witness=None if res.witness is None else res.witness.tolist(),
        gains=gains,
        points=points,
    )


def heights_gap(profile: StrategyProfile, g: GameSpec, t_star: int) -> float:
    """Attacker utility on ``t_star`` minus the best other target that carries coverage."""
    c = combine_coverage(profile.allocations)
    ua = attacker_utilities(c, g)
    others = [t for t in range(g.num_targets) if t != t_star and c[t] > 0]
    if not others:
        return np.inf
    return float(ua[t_star] - ua[others].max())
