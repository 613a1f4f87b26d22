"""Multi-defender security game model and per-target utility arithmetic."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

ATOL = 1e-9


class GameError(ValueError):
    """Raised when a game description violates a model invariant."""


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise GameError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GameError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GameSpec:
    """The tuple (N, T, K, R, P).

    Defender payoffs are ``(n, m)`` arrays, attacker payoffs ``(m,)``.
    Attacker rewards must strictly exceed penalties. Defender rewards must be
    at least the penalties (equality is allowed so that payoff tables with
    coverage-independent defender values can be expressed).
    """

    resources: np.ndarray
    attacker_reward: np.ndarray
    attacker_penalty: np.ndarray
    defender_reward: np.ndarray
    defender_penalty: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "resources", _frozen(self.resources, 1, "resources"))
        object.__setattr__(self, "attacker_reward", _frozen(self.attacker_reward, 1, "attacker reward"))
        object.__setattr__(self, "attacker_penalty", _frozen(self.attacker_penalty, 1, "attacker penalty"))
        object.__setattr__(self, "defender_reward", _frozen(self.defender_reward, 2, "defender reward"))
        object.__setattr__(self, "defender_penalty", _frozen(self.defender_penalty, 2, "defender penalty"))
        n, m = self.num_defenders, self.num_targets
        if n < 1:
            raise GameError("need at least one defender (n >= 1)")
        if m < 2:
            raise GameError("need at least two targets (m >= 2)")
        if self.attacker_penalty.shape != (m,):
            raise GameError("attacker reward and penalty must have the same length")
        for name, arr in (("defender reward", self.defender_reward), ("defender penalty", self.defender_penalty)):
            if arr.shape != (n, m):
                raise GameError(f"{name} must have shape ({n}, {m}), got {arr.shape}")
        if np.any(self.resources < 0):
            raise GameError("resources must be non-negative (k_i >= 0)")
        bad = np.flatnonzero(self.attacker_reward <= self.attacker_penalty)
        if bad.size:
            raise GameError(f"attacker reward must exceed penalty (r^a(t) > p^a(t)) on targets {bad.tolist()}")
        bad = np.argwhere(self.defender_reward < self.defender_penalty)
        if bad.size:
            raise GameError(f"defender reward must be >= penalty (r^d_i(t) >= p^d_i(t)) at (i, t) {bad.tolist()}")

    @property
    def num_defenders(self) -> int:
        return int(self.resources.shape[0])

    @property
    def num_targets(self) -> int:
        return int(self.attacker_reward.shape[0])

    @property
    def total_resources(self) -> float:
        return float(self.resources.sum())

    @property
    def attacker_range(self) -> np.ndarray:
        """r^a(t) - p^a(t), strictly positive."""
        return self.attacker_reward - self.attacker_penalty

    def to_dict(self) -> dict:
        return {
            "defenders": [
                {
                    "resources": float(self.resources[i]),
                    "reward": self.defender_reward[i].tolist(),
                    "penalty": self.defender_penalty[i].tolist(),
                }
                for i in range(self.num_defenders)
            ],
            "attacker": {
                "reward": self.attacker_reward.tolist(),
                "penalty": self.attacker_penalty.tolist(),
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GameSpec":
        if not isinstance(doc, dict) or set(doc) != {"defenders", "attacker"}:
            raise GameError('game document must have exactly the keys "defenders" and "attacker"')
        defenders, attacker = doc["defenders"], doc["attacker"]
        if not isinstance(defenders, list) or not defenders:
            raise GameError('"defenders" must be a non-empty list')
        if not isinstance(attacker, dict) or set(attacker) != {"reward", "penalty"}:
            raise GameError('"attacker" must have exactly the keys "reward" and "penalty"')
        for j, d in enumerate(defenders):
            if not isinstance(d, dict) or set(d) != {"resources", "reward", "penalty"}:
                raise GameError(f'defender {j} must have exactly the keys "resources", "reward", "penalty"')
            if not isinstance(d["resources"], (int, float)) or isinstance(d["resources"], bool):
                raise GameError(f"defender {j} resources must be a number")
        m = len(attacker["reward"])
        for j, d in enumerate(defenders):
            if len(d["reward"]) != m or len(d["penalty"]) != m:
                raise GameError(f"defender {j} payoff lists must have length m={m}")
        try:
            return cls(
                resources=[d["resources"] for d in defenders],
                attacker_reward=attacker["reward"],
                attacker_penalty=attacker["penalty"],
                defender_reward=[d["reward"] for d in defenders],
                defender_penalty=[d["penalty"] for d in defenders],
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, GameError):
                raise
            raise GameError(f"malformed game document: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GameSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class StrategyProfile:
    """One coverage vector per player, with the player's budget.

    Players are single defenders for non-cooperative play. ``members`` maps
    each player to the defenders it represents.
    """

    allocations: np.ndarray
    budgets: np.ndarray
    members: tuple = field(default=None)

    def __post_init__(self):
        x = np.array(self.allocations, dtype=float)
        k = np.array(self.budgets, dtype=float)
        if x.ndim != 2 or k.shape != (x.shape[0],):
            raise GameError("allocations must be (players, m) with one budget per player")
        if np.any(x < -ATOL) or np.any(x > 1 + ATOL):
            raise GameError("allocations must lie in [0, 1]")
        if np.any(x.sum(axis=1) > k + 1e-7):
            raise GameError("an allocation exceeds its player's budget")
        x = np.clip(x, 0.0, 1.0)
        x.setflags(write=False)
        k.setflags(write=False)
        object.__setattr__(self, "allocations", x)
        object.__setattr__(self, "budgets", k)
        if self.members is None:
            object.__setattr__(self, "members", tuple((i,) for i in range(x.shape[0])))
        else:
            object.__setattr__(self, "members", tuple(tuple(int(j) for j in p) for p in self.members))

    @property
    def residual(self) -> np.ndarray:
        return self.budgets - self.allocations.sum(axis=1)

    def to_dict(self) -> dict:
        return {
            "allocations": self.allocations.tolist(),
            "budgets": self.budgets.tolist(),
            "members": [list(p) for p in self.members],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "StrategyProfile":
        return cls(doc["allocations"], doc["budgets"], doc.get("members"))


def as_coverage(c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if np.any(c < -ATOL) or np.any(c > 1 + ATOL):
        raise GameError("coverage entries must lie in [0, 1]")
    return np.clip(c, 0.0, 1.0)


def _check_target(t: int, g: GameSpec) -> None:
    if not 0 <= t < g.num_targets:
        raise IndexError(f"target index {t} out of range for m={g.num_targets}")


def _check_defender(i: int, g: GameSpec) -> None:
    if not 0 <= i < g.num_defenders:
        raise IndexError(f"defender index {i} out of range for n={g.num_defenders}")


def attacker_utility(c, t: int, g: GameSpec) -> float:
    _check_target(t, g)
    ct = as_coverage(c)[t]
    return float((1 - ct) * g.attacker_reward[t] + ct * g.attacker_penalty[t])


def defender_target_utility(c, t: int, i: int, g: GameSpec) -> float:
    _check_target(t, g)
    _check_defender(i, g)
    ct = as_coverage(c)[t]
    return float(ct * g.defender_reward[i, t] + (1 - ct) * g.defender_penalty[i, t])


def attacker_utilities(c, g: GameSpec) -> np.ndarray:
    """Vectorised attacker utility; ``c`` has shape ``(..., m)``."""
    c = np.asarray(c, dtype=float)
    return g.attacker_reward - c * g.attacker_range


def defender_target_utilities(c, g: GameSpec) -> np.ndarray:
    """Per-target defender utilities, shape ``(..., n, m)``."""
    c = np.asarray(c, dtype=float)[..., None, :]
    return g.defender_penalty + c * (g.defender_reward - g.defender_penalty)


def combine_coverage(x, mode: str = "independent") -> np.ndarray:
    """Overall coverage of a stack of allocations along axis -2.

    ``independent`` is the product rule across uncoordinated players;
    ``additive`` pools resources inside a coalition and clamps at one.
    """
    if isinstance(x, StrategyProfile):
        x = x.allocations
    x = np.asarray(x, dtype=float)
    if mode == "independent":
        return 1.0 - np.prod(1.0 - x, axis=-2)
    if mode == "additive":
        return np.minimum(1.0, x.sum(axis=-2))
    raise ValueError(f"unknown combination mode {mode!r}")


def attack_distribution(c, abf, g: GameSpec) -> np.ndarray:
    return abf(attacker_utilities(c, g))


def defender_utilities(c, abf, g: GameSpec) -> np.ndarray:
    """Expected utility of every defender, shape ``(..., n)``."""
    w = attack_distribution(c, abf, g)
    return np.einsum("...nm,...m->...n", defender_target_utilities(c, g), w)


def expected_defender_utility(c, i: int, abf, g: GameSpec) -> float:
    _check_defender(i, g)
    return float(defender_utilities(as_coverage(c), abf, g)[i])


def height(c, g: GameSpec) -> float:
    return float(np.max(attacker_utilities(as_coverage(c), g)))


def level_coverage(u: float, g: GameSpec) -> np.ndarray:
    """Coverage holding every coverable target at attacker utility ``u``.

    Targets with ``u >= r^a(t)`` stay uncovered; targets with ``u < p^a(t)``
    are fully covered and so sit at ``p^a(t)``.
    """
    return np.clip((g.attacker_reward - u) / g.attacker_range, 0.0, 1.0)


def level_for_budget(budget: float, reward, penalty, tol: float = 1e-9, max_iter: int = 200) -> float:
    """Smallest height reachable with ``budget`` pooled resources on the given targets."""
    reward = np.asarray(reward, dtype=float)
    penalty = np.asarray(penalty, dtype=float)
    span = reward - penalty
    lo, hi = float(penalty.min()), float(reward.max())
    if np.clip((reward - lo) / span, 0, 1).sum() <= budget:
        return lo
    for _ in range(max_iter):
        if hi - lo < tol:
            break
        mid = 0.5 * (lo + hi)
        if np.clip((reward - mid) / span, 0, 1).sum() <= budget:
            hi = mid
        else:
            lo = mid
    return hi


def min_max_height(g: GameSpec, tol: float = 1e-9) -> float:
    """Mini-max attacker height reachable with all resources pooled."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    u = level_for_budget(g.total_resources, g.attacker_reward, g.attacker_penalty, tol)
    # full coverage floors every target at its penalty
    return max(u, float(g.attacker_penalty.max()))


@dataclass(frozen=True)
class PreferenceOrder:
    defender: int
    level: float
    order: tuple

    def __iter__(self):
        return iter(self.order)


def preference_order(i: int, u: float, g: GameSpec) -> PreferenceOrder:
    """Targets ascending by defender ``i``'s utility at the level coverage of ``u``."""
    _check_defender(i, g)
    vals = defender_target_utilities(level_coverage(u, g), g)[i]
    # lexsort: last key is primary; ties fall back to target index
    order = np.lexsort((np.arange(g.num_targets), vals))
    return PreferenceOrder(i, float(u), tuple(int(t) for t in order))


def check_saturation(g: GameSpec, abf, alpha: float) -> bool:
    """Whether some target can be covered to ``1 - alpha`` yet still draw an attack w.p. >= eps."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    K = g.total_resources
    m = g.num_targets
    for t in range(m):
        ct = 1.0 - alpha
        if ct > K + ATOL:
            continue
        rest = [s for s in range(m) if s != t]
        r, p = g.attacker_reward[rest], g.attacker_penalty[rest]
        lvl = level_for_budget(K - ct, r, p)
        c = np.empty(m)
        c[t] = ct
        c[rest] = np.clip((r - lvl) / (r - p), 0.0, 1.0)
        if attack_distribution(c, abf, g)[t] >= abf.epsilon:
            return True
    return False
