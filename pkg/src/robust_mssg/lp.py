"""Dense two-phase simplex with Bland's rule.

Small dense problems only (a few hundred variables). Solves

    maximize c @ x  subject to  A_ub @ x <= b_ub,  A_eq @ x == b_eq,  x >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-9


class InfeasibleError(ValueError):
    def __init__(self, msg: str, infeasibility: float, certificate: np.ndarray):
        super().__init__(msg)
        self.infeasibility = infeasibility
        # dual multipliers of the phase-one problem, one per original row (ub rows first)
        self.certificate = certificate


class UnboundedError(ValueError):
    pass


@dataclass
class LpResult:
    x: np.ndarray
    objective: float
    basis: list
    iterations: int


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]


def _run(T: np.ndarray, basis: list, cost: np.ndarray, allowed: int, max_iter: int) -> int:
    """Minimise ``cost @ x`` on the canonical tableau; columns >= ``allowed`` never enter."""
    it = 0
    while True:
        reduced = cost[:allowed] - cost[basis] @ T[:, :allowed]
        enter = next((j for j in range(allowed) if reduced[j] < -PIVOT_TOL), None)
        if enter is None:
            return it
        col = T[:, enter]
        rows = np.flatnonzero(col > PIVOT_TOL)
        if rows.size == 0:
            raise UnboundedError("objective is unbounded")
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        leave = min(ties, key=lambda r: basis[r])
        _pivot(T, leave, enter)
        basis[leave] = enter
        it += 1
        if it > max_iter:
            raise RuntimeError("simplex iteration limit reached")


def simplex(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, max_iter: int = 10_000) -> LpResult:
    c = np.asarray(c, dtype=float)
    nvar = c.size
    A_ub = np.zeros((0, nvar)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    A_eq = np.zeros((0, nvar)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    n_ub, n_eq = A_ub.shape[0], A_eq.shape[0]
    rows = n_ub + n_eq

    # columns: original | slack/surplus (one per ub row) | artificial (one per row)
    n_slack = n_ub
    width = nvar + n_slack + rows
    T = np.zeros((rows, width + 1))
    sign = np.ones(rows)
    T[:n_ub, :nvar] = A_ub
    T[:n_ub, nvar:nvar + n_slack] = np.eye(n_ub)
    T[:n_ub, -1] = b_ub
    T[n_ub:, :nvar] = A_eq
    T[n_ub:, -1] = b_eq
    neg = T[:, -1] < 0
    sign[neg] = -1.0
    T[neg] *= -1.0
    basis = []
    for r in range(rows):
        if r < n_ub and not neg[r]:
            basis.append(nvar + r)
        else:
            T[r, nvar + n_slack + r] = 1.0
            basis.append(nvar + n_slack + r)

    art_cost = np.zeros(width)
    art_cost[nvar + n_slack:] = 1.0
    it = _run(T, basis, art_cost, width, max_iter)
    infeas = float(art_cost[basis] @ T[:, -1])
    if infeas > 1e-8:
        full = np.zeros((rows, width))
        full[:n_ub, :nvar] = A_ub
        full[:n_ub, nvar:nvar + n_slack] = np.eye(n_ub)
        full[n_ub:, :nvar] = A_eq
        full = full * sign[:, None]
        full[:, nvar + n_slack:] = np.eye(rows)
        Bmat = full[:, basis]
        y = np.linalg.lstsq(Bmat.T, art_cost[basis], rcond=None)[0] * sign
        raise InfeasibleError(f"LP infeasible: minimum total violation {infeas:.3g}", infeas, y)

    # drive zero-level artificials out of the basis; drop redundant rows
    keep = []
    for r in range(rows):
        if basis[r] >= nvar + n_slack:
            cand = np.flatnonzero(np.abs(T[r, :nvar + n_slack]) > PIVOT_TOL)
            if cand.size:
                _pivot(T, r, int(cand[0]))
                basis[r] = int(cand[0])
                keep.append(r)
        else:
            keep.append(r)
    T = T[keep]
    basis = [basis[r] for r in keep]

    cost = np.zeros(width)
    cost[:nvar] = -c
    it += _run(T, basis, cost, nvar + n_slack, max_iter)
    x = np.zeros(width)
    x[basis] = T[:, -1]
    x = np.clip(x[:nvar], 0.0, None)
    return LpResult(x, float(c @ x), sorted(b for b in basis if b < nvar), it)
