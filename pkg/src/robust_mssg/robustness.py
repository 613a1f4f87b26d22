"""Distances between games, bounded random perturbations and empirical robustness checks."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np

from .abf import Abf, lipschitz_bound
from .core import verify_alpha_core
from .equilibrium import verify_ne
from .game import GameSpec, defender_utilities

PROBE_SAMPLES = 2000


@dataclass(frozen=True)
class PerturbationSpec:
    eta: float
    perturb_rewards: bool = True
    perturb_penalties: bool = True
    perturb_abf: bool = True
    rng_seed: int = 0

    def __post_init__(self):
        if not self.eta >= 0:
            raise ValueError("eta must be non-negative")
        if self.eta > 0 and not (self.perturb_rewards or self.perturb_penalties or self.perturb_abf):
            raise ValueError("a positive eta needs at least one perturbation flag")


def _box(g1, g2, pad: float = 0.0):
    lo = np.minimum(g1.attacker_penalty, g2.attacker_penalty) - pad
    hi = np.maximum(g1.attacker_reward, g2.attacker_reward) + pad
    return lo, hi


def game_distance(g1, abf1, g2, abf2, abf_probe_samples: int = PROBE_SAMPLES, rng_seed: int = 0) -> float:
    """Sup-norm distance over rewards, penalties and a probe-sampled gap between the two ABFs."""
    if (g1.num_defenders, g1.num_targets) != (g2.num_defenders, g2.num_targets):
        raise ValueError("games must have the same numbers of defenders and targets")
    d = max(
        float(np.max(np.abs(g1.attacker_reward - g2.attacker_reward))),
        float(np.max(np.abs(g1.attacker_penalty - g2.attacker_penalty))),
        float(np.max(np.abs(g1.defender_reward - g2.defender_reward))),
        float(np.max(np.abs(g1.defender_penalty - g2.defender_penalty))),
    )
    if abf1 is None or abf2 is None or abf1 == abf2:
        return d
    lo, hi = _box(g1, g2)
    rng = np.random.default_rng(rng_seed)
    u = rng.uniform(lo, hi, size=(abf_probe_samples, g1.num_targets))
    return max(d, float(np.max(np.abs(abf1(u) - abf2(u)))))


def _shift(rng, shape, eta, on):
    return rng.uniform(-eta, eta, size=shape) if on else np.zeros(shape)


def _shrink(r, p, sr, sp, strict: bool):
    """Scale a shift pair down wherever it would invert the reward/penalty order."""
    gap = r - p
    closing = sp - sr
    bad = (gap - closing <= 0) if strict else (gap - closing < 0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        lam = np.where(bad, gap / closing * (0.5 if strict else 1.0), 1.0)
    lam = np.clip(lam, 0.0, 1.0)
    return sr * lam, sp * lam


def perturb_game(g, abf: Abf | None, spec: PerturbationSpec):
    """An ``eta``-near copy of ``(g, abf)`` drawn from uniform payoff shifts and a scale jitter."""
    if spec.eta == 0:
        return g, abf
    rng = np.random.default_rng(spec.rng_seed)
    eta, m, n = spec.eta, g.num_targets, g.num_defenders
    sra = _shift(rng, m, eta, spec.perturb_rewards)
    spa = _shift(rng, m, eta, spec.perturb_penalties)
    srd = _shift(rng, (n, m), eta, spec.perturb_rewards)
    spd = _shift(rng, (n, m), eta, spec.perturb_penalties)
    sra, spa = _shrink(g.attacker_reward, g.attacker_penalty, sra, spa, strict=True)
    srd, spd = _shrink(g.defender_reward, g.defender_penalty, srd, spd, strict=False)
    pd = g.defender_penalty + spd
    # the shrunk shift can still cross by rounding when a defender gap is tiny
    rd = np.maximum(g.defender_reward + srd, pd)
    h = GameSpec(g.resources, g.attacker_reward + sra, g.attacker_penalty + spa, rd, pd)
    new_abf = abf
    if abf is not None and spec.perturb_abf:
        lo, hi = _box(g, h, eta)
        # d omega_t / d scale = omega_t (u_t - E_omega[u]), bounded by the width of the box
        width = float(hi.max() - lo.min())
        jitter = rng.uniform(-1.0, 1.0) * eta / width
        scale = max(abf.scale + jitter, 1e-12)
        delta = max(abf.delta, 1.000001 * math.log(1.0 / abf.epsilon) / scale)
        new_abf = Abf(scale, delta, abf.epsilon)
    return h, new_abf


def robustness_bound(lipschitz: float, m: int, defender_abs_sums) -> float:
    """``b = 2 max_i (1 + (1 + K sqrt(m)) sum_t max(|r^d_i(t)|, |p^d_i(t)|))``."""
    s = np.asarray(defender_abs_sums, dtype=float)
    return float(2.0 * np.max(1.0 + (1.0 + lipschitz * math.sqrt(m)) * s))


def robustness_constant(g, abf: Abf, eta: float, samples: int = 2000, rng_seed: int = 0) -> float:
    if eta < 0:
        raise ValueError("eta must be non-negative")
    K = lipschitz_bound(abf, g, eta, samples=samples, rng_seed=rng_seed)
    sums = np.maximum(np.abs(g.defender_reward), np.abs(g.defender_penalty)).sum(axis=1)
    return robustness_bound(K, g.num_targets, sums)


def utility_gap(c, g, abf, h, habf) -> float:
    """Largest change of any defender's expected utility at coverage ``c`` between two games."""
    return float(np.max(np.abs(defender_utilities(c, abf, g) - defender_utilities(c, habf, h))))


@dataclass
class SampleResult:
    seed: int
    distance: float
    max_gain: float
    passed: bool


@dataclass
class RobustEvidence:
    passed: bool
    threshold: float
    b: float
    eta: float
    max_gain: float
    samples: list

    def as_dict(self) -> dict:
        return asdict(self)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["seed", "distance", "max_gain", "pass"])
        for s in self.samples:
            w.writerow([s.seed, repr(s.distance), repr(s.max_gain), int(s.passed)])
        return buf.getvalue()


def certify_robust(
    solution,
    zeta: float,
    g,
    abf: Abf,
    eta: float,
    samples: int,
    grid_step: float,
    kind: str = "ne",
    rng_seed: int = 0,
    threads: int | None = None,
) -> RobustEvidence:
    """Re-verify ``solution`` on ``samples`` perturbed games at threshold ``zeta + b eta``.

    ``solution`` is a :class:`StrategyProfile` for ``kind="ne"`` and a
    coalition structure for ``kind="alpha_core"``. Sample ``i`` uses seed
    ``rng_seed + i``.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    if kind not in ("ne", "alpha_core"):
        raise ValueError(f"unknown solution kind {kind!r}")
    b = robustness_constant(g, abf, eta) if eta > 0 else 0.0
    threshold = zeta + b * eta
    rows = []
    for i in range(samples):
        seed = rng_seed + i
        h, habf = perturb_game(g, abf, PerturbationSpec(eta, rng_seed=seed))
        if kind == "ne":
            v = verify_ne(solution, threshold, h, habf, grid_step, threads=threads)
            gain, ok = v.max_gain, v.passed
        else:
            v = verify_alpha_core(solution, threshold, h, habf, grid_step, threads=threads)
            gain = max(d["gain"] for d in v.deviations)
            ok = v.passed
        dist = game_distance(g, abf, h, habf, rng_seed=seed)
        rows.append(SampleResult(seed, dist, float(gain), bool(ok)))
    return RobustEvidence(
        all(r.passed for r in rows), threshold, b, float(eta), max(r.max_gain for r in rows), rows
    )
