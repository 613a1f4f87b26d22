"""Greedy water-filling allocation (ALLOC, GC-ALLOC) and the level-input search."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import GameSpec, StrategyProfile, combine_coverage, level_coverage, preference_order

EPS_ALLOC = 1e-12


class NoLevelPointError(RuntimeError):
    """No input exhausts every resource while levelling all targets."""


@dataclass(frozen=True)
class AllocResult:
    profile: StrategyProfile
    last_target: int | None
    residual: np.ndarray
    coverage: np.ndarray
    mode: str


def _walk(u: float, u_tilde: float, g: GameSpec, mode: str) -> AllocResult:
    m, n = g.num_targets, g.num_defenders
    target = level_coverage(u, g)
    x = np.zeros((n, m))
    c = np.zeros(m)
    gap = target.copy()
    t_star = None
    for i in range(n):
        left = float(g.resources[i])
        for t in preference_order(i, u_tilde, g):
            if left <= EPS_ALLOC:
                break
            give = min(max(gap[t], 0.0), left)
            if give <= EPS_ALLOC:
                continue
            x[i, t] = give
            left -= give
            if mode == "independent":
                c[t] = 1.0 - (1.0 - c[t]) * (1.0 - give)
                gap[t] = 0.0 if c[t] >= 1.0 else (target[t] - c[t]) / (1.0 - c[t])
            else:
                c[t] = min(1.0, c[t] + give)
                gap[t] = 0.0 if c[t] >= 1.0 else target[t] - c[t]
            t_star = t
    profile = StrategyProfile(x, g.resources)
    return AllocResult(profile, t_star, profile.residual, combine_coverage(x, mode), mode)


def alloc(u: float, u_tilde: float, g: GameSpec) -> AllocResult:
    """Non-cooperative walk: coverage combines by the product rule."""
    return _walk(u, u_tilde, g, "independent")


def gc_alloc(u: float, u_tilde: float, g: GameSpec) -> AllocResult:
    """Grand-coalition walk: allocations pool additively (clamped at 1)."""
    return _walk(u, u_tilde, g, "additive")


def find_level_input(g: GameSpec, mode: str = "independent", tol: float = 1e-9, max_iter: int = 200) -> float:
    """Binary search for the input at which the walk levels every target and spends everything."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    walk = alloc if mode == "independent" else gc_alloc
    left = float(g.attacker_penalty.min())
    right = float(g.attacker_reward.max())
    if g.total_resources <= 0:
        return right
    for _ in range(max_iter):
        if right - left <= tol:
            break
        u = 0.5 * (left + right)
        res = walk(u, u, g)
        short = np.any(res.coverage < level_coverage(u, g) - 1e-12)
        if short:
            left = u
        else:
            right = u
    u = right
    res = walk(u, u, g)
    check = max(1e-6, 10 * tol * float(np.sum(1.0 / g.attacker_range)))
    gap = float(np.max(level_coverage(u, g) - res.coverage))
    if res.residual.sum() > check or gap > check:
        raise NoLevelPointError(
            f"no level point: at u={u:.6g} residual={res.residual.sum():.3g}, level gap={gap:.3g}; "
            "check saturation first"
        )
    return u
