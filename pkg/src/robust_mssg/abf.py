"""Attacker behaviour functions: scaled softmax, axiom checks, (delta, eps) certificates."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class AbfError(ValueError):
    pass


def derive_scale(delta: float, epsilon: float) -> int:
    """Smallest integer n with n > ln(1/eps)/delta, so softmax(n u) is a (delta, eps)-ABF."""
    if not delta > 0:
        raise AbfError("delta must be positive")
    if not 0 < epsilon < 1:
        raise AbfError("epsilon must lie in (0, 1)")
    x = math.log(1.0 / epsilon) / delta
    k = round(x)
    n = k + 1 if abs(x - k) < 1e-9 else math.floor(x) + 1
    return int(n)


@dataclass(frozen=True)
class Abf:
    """Softmax behaviour ``omega(u) = softmax(scale * u)`` with its (delta, eps) certificate."""

    scale: float
    delta: float
    epsilon: float
    kind: str = field(default="softmax")

    def __post_init__(self):
        if self.kind != "softmax":
            raise AbfError(f"unsupported ABF kind {self.kind!r}")
        if not self.scale > 0:
            raise AbfError("scale must be positive")
        if not self.delta > 0:
            raise AbfError("certified delta must be positive")
        if not 0 < self.epsilon < 1:
            raise AbfError("certified epsilon must lie in (0, 1)")
        if not math.exp(-self.scale * self.delta) < self.epsilon:
            raise AbfError(
                f"exp(-scale*delta) = {math.exp(-self.scale * self.delta):.6g} is not below "
                f"epsilon = {self.epsilon:.6g}; the certificate does not hold"
            )

    @classmethod
    def certified(cls, delta: float, epsilon: float, scale: float | None = None) -> "Abf":
        return cls(float(scale if scale is not None else derive_scale(delta, epsilon)), delta, epsilon)

    def __call__(self, u) -> np.ndarray:
        return evaluate(self, u)

    def log_probs(self, u) -> np.ndarray:
        """Log attack probabilities, accurate even when a probability rounds to 1."""
        z = self.scale * _finite(u)
        top = np.argmax(z, axis=-1)[..., None]
        zmax = np.take_along_axis(z, top, axis=-1)
        e = np.exp(z - zmax)
        np.put_along_axis(e, top, 0.0, axis=-1)
        return z - zmax - np.log1p(e.sum(axis=-1, keepdims=True))

    def jacobian(self, u) -> np.ndarray:
        """d omega_t / d u_s = n * omega_t * (1[t=s] - omega_s), shape ``(..., m, m)``."""
        w = evaluate(self, u)
        return self.scale * (w[..., :, None] * np.eye(w.shape[-1]) - w[..., :, None] * w[..., None, :])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "scale": self.scale, "delta": self.delta, "epsilon": self.epsilon}

    @classmethod
    def from_dict(cls, doc: dict) -> "Abf":
        if not isinstance(doc, dict) or set(doc) != {"kind", "scale", "delta", "epsilon"}:
            raise AbfError('ABF document needs exactly "kind", "scale", "delta", "epsilon"')
        return cls(float(doc["scale"]), float(doc["delta"]), float(doc["epsilon"]), doc["kind"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _finite(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise AbfError("attacker utilities must be finite")
    return u


def evaluate(abf: Abf, u) -> np.ndarray:
    """Attack distribution over the last axis of ``u`` (max-subtracted softmax)."""
    z = abf.scale * _finite(u)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class AxiomCheck:
    passed: bool
    worst: float
    detail: str = ""


@dataclass
class AxiomReport:
    simplex: AxiomCheck
    monotone: AxiomCheck
    independence: AxiomCheck
    sensitivity: AxiomCheck

    @property
    def passed(self) -> bool:
        return all(c.passed for c in (self.simplex, self.monotone, self.independence, self.sensitivity))

    def as_dict(self) -> dict:
        return {k: vars(getattr(self, k)) for k in ("simplex", "monotone", "independence", "sensitivity")}


def check_axioms(
    abf: Callable,
    m: int,
    trials: int,
    rng_seed: int = 0,
    delta: float | None = None,
    epsilon: float | None = None,
    low: float = 0.0,
    high: float = 1.0,
) -> AxiomReport:
    """Randomised check of the ABF axioms and the (delta, eps) sensitivity bound.

    ``abf`` may be any callable mapping ``(..., m)`` utilities to ``(..., m)``
    outputs. Monotonicity is judged on log-probabilities when the callable
    offers ``log_probs`` (probabilities near one stop moving in float64).
    """
    if m < 2 or trials < 1:
        raise ValueError("need m >= 2 and trials >= 1")
    delta = getattr(abf, "delta", None) if delta is None else delta
    epsilon = getattr(abf, "epsilon", None) if epsilon is None else epsilon
    rng = np.random.default_rng(rng_seed)
    u = rng.uniform(low, high, size=(trials, m))
    w = np.asarray(abf(u), dtype=float)

    sum_err = np.abs(w.sum(axis=-1) - 1.0)
    range_err = np.maximum(np.maximum(-w, w - 1.0), 0.0).max(axis=-1)
    worst = float(np.max(np.maximum(sum_err, range_err)))
    simplex = AxiomCheck(worst <= 1e-12, worst, "max |sum - 1| or distance outside [0,1]")

    score = getattr(abf, "log_probs", None) or (lambda v: np.asarray(abf(v), dtype=float))
    t = rng.integers(0, m, size=trials)
    rows = np.arange(trials)
    bumped = u.copy()
    bumped[rows, t] += 0.01
    before = score(u)[rows, t]
    after = score(bumped)[rows, t]
    rise = after - before
    monotone = AxiomCheck(bool(np.all(rise > 0)), float(-rise.min()) if rise.min() <= 0 else 0.0,
                          "largest non-increase after raising one coordinate by 0.01")

    worst_ratio = 0.0
    for k in range(trials):
        size = int(rng.integers(1, m))
        S = rng.choice(m, size=size, replace=False)
        out = np.setdiff1d(np.arange(m), S)
        v = u[k].copy()
        v[out] = rng.uniform(low, high, size=out.size)
        p0, p1 = np.asarray(abf(u[k]), dtype=float), np.asarray(abf(v), dtype=float)
        r0 = p0[S] / p0[S].sum()
        r1 = p1[S] / p1[S].sum()
        worst_ratio = max(worst_ratio, float(np.max(np.abs(r0 - r1))))
    independence = AxiomCheck(worst_ratio <= 1e-9, worst_ratio, "max change of conditional within S")

    if delta is None or epsilon is None:
        sensitivity = AxiomCheck(False, float("nan"), "no (delta, eps) certificate supplied")
    else:
        base = rng.uniform(low, high, size=(trials, m))
        top = rng.integers(0, m, size=trials)
        adv = base.copy()
        adv[rows, top] = base.max(axis=-1) + delta * (1 + 1e-9)
        wa = np.asarray(abf(adv), dtype=float)
        below = adv < adv.max(axis=-1, keepdims=True) - delta
        # random vectors as well as the adversarial ones
        wr = w
        below_r = u < u.max(axis=-1, keepdims=True) - delta
        viol = np.concatenate([wa[below], wr[below_r]]) - epsilon
        count = int(np.sum(viol >= 0))
        sensitivity = AxiomCheck(count == 0, float(max(viol.max(initial=-np.inf), 0.0)) if count else 0.0,
                                 f"{count} targets delta below the top with probability >= eps")
    return AxiomReport(simplex, monotone, independence, sensitivity)


def lipschitz_bound(abf: Abf, g, eta: float = 0.0, samples: int = 2000, rng_seed: int = 0) -> float:
    """Sampled upper estimate of the spectral norm of the softmax Jacobian over the payoff box.

    The box is ``prod_t [max(0, p^a(t) - eta), r^a(t) + eta]``. Besides random
    points it probes every pair of targets tied at a common high value, where
    the softmax Jacobian peaks. The maximum is inflated by 10%.
    """
    if eta < 0:
        raise ValueError("eta must be non-negative")
    lo = np.maximum(0.0, g.attacker_penalty - eta)
    hi = g.attacker_reward + eta
    m = lo.size
    rng = np.random.default_rng(rng_seed)
    pts = [rng.uniform(lo, hi, size=(samples, m))]
    for s in range(m):
        for t in range(s + 1, m):
            tie = min(hi[s], hi[t])
            if tie >= max(lo[s], lo[t]):
                v = lo.copy()
                v[s] = v[t] = tie
                pts.append(v[None])
    common_lo, common_hi = lo.max(), hi.min()
    if common_lo <= common_hi:
        pts.append(np.full((1, m), 0.5 * (common_lo + common_hi)))
    P = np.concatenate(pts)
    J = abf.jacobian(P)
    norms = np.abs(np.linalg.eigvalsh(J)).max(axis=-1)
    return 1.1 * float(norms.max())


class InduceError(AbfError):
    pass


def induce_distribution(p, u_base: float, abf: Abf, iters: int = 80) -> np.ndarray:
    """Attacker utilities in ``[u_base, u_base + 2 m delta)`` whose attack distribution approximates ``p``.

    Targets are placed one by one, largest probability first at
    ``u_base + m delta``; each further target is bisected so its conditional
    probability among the placed targets matches that of ``p``. Targets with
    zero probability sit at ``u_base``.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
        raise InduceError("p must be a probability distribution")
    p = np.clip(p, 0.0, None)
    m = p.size
    d = abf.delta
    top = u_base + 2 * m * d * (1 - 1e-9)
    u = np.full(m, float(u_base))
    order = [int(t) for t in np.lexsort((np.arange(m), -p)) if p[t] > 0]
    if not order:
        raise InduceError("p has no positive mass")
    u[order[0]] = u_base + m * d
    placed = [order[0]]
    for t in order[1:]:
        placed.append(t)
        want = p[t] / p[placed].sum()

        def conditional(x):
            v = u.copy()
            v[t] = x
            w = abf(v)[placed]
            return w[-1] / w.sum()

        lo, hi = float(u_base), top
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if conditional(mid) < want:
                lo = mid
            else:
                hi = mid
        u[t] = lo if abs(conditional(lo) - want) <= abs(conditional(hi) - want) else hi
    return u
