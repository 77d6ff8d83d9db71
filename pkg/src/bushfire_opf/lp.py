"""Dense bounded-variable linear programming.

The built-in solver is a two-phase revised simplex method working on

    minimise c @ x  subject to  A_eq @ x == b_eq,  A_ub @ x <= b_ub,  lower <= x <= upper

Inequality rows receive slack columns; phase one adds one artificial column
per row that the slack crash cannot cover.  Pricing is Dantzig's rule,
switching to Bland's rule after a run of degenerate pivots.  The basis inverse
is kept explicitly and refreshed from scratch every ``refactor_every`` pivots.

Solutions carry the final basis so a later solve of a problem with the same
constraints (only ``c`` changed) can start phase two directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL = "numerical"
ITERATION_LIMIT = "iteration_limit"


class LpError(RuntimeError):
    pass


@dataclass
class LinearProgram:
    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    names: list[str] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        if not np.all(np.isfinite(self.c)):
            raise ValueError("objective coefficients must be finite")

        def rows(A, b):
            if A is None:
                return np.zeros((0, n)), np.zeros(0)
            A = np.atleast_2d(np.asarray(A, dtype=float))
            b = np.atleast_1d(np.asarray(b, dtype=float))
            if A.shape[1] != n or A.shape[0] != b.size:
                raise ValueError(f"constraint block has shape {A.shape} for {n} variables and {b.size} rows")
            return A, b

        self.A_eq, self.b_eq = rows(self.A_eq, self.b_eq)
        self.A_ub, self.b_ub = rows(self.A_ub, self.b_ub)
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).copy()
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).copy()
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError("bounds must have one entry per variable")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def n_vars(self) -> int:
        return self.c.size

    def objective(self, x) -> float:
        return float(self.c @ x)

    def max_violation(self, x) -> float:
        x = np.asarray(x, dtype=float)
        v = [0.0]
        if self.A_eq.size:
            v.append(np.max(np.abs(self.A_eq @ x - self.b_eq)))
        if self.A_ub.size:
            v.append(np.max(self.A_ub @ x - self.b_ub))
        v.append(np.max(self.lower - x))
        v.append(np.max(x - self.upper))
        return float(max(v))


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    objective: float = float("nan")
    duals_eq: np.ndarray | None = None
    duals_ub: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    iterations: int = 0
    basis: tuple | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


class SimplexSolver:
    """Two-phase revised simplex for bounded variables."""

    def __init__(self, tol: float = 1e-9, refactor_every: int = 40, degenerate_limit: int = 25,
                 max_iter: int | None = None):
        self.tol = tol
        self.refactor_every = refactor_every
        self.degenerate_limit = degenerate_limit
        self.max_iter = max_iter

    # ------------------------------------------------------------------ setup
    def _standard_form(self, lp: LinearProgram):
        me, mi, n = lp.A_eq.shape[0], lp.A_ub.shape[0], lp.n_vars
        m = me + mi
        A = np.zeros((m, n + mi))
        A[:me, :n] = lp.A_eq
        A[me:, :n] = lp.A_ub
        A[me:, n:] = np.eye(mi)
        b = np.concatenate([lp.b_eq, lp.b_ub])
        lo = np.concatenate([lp.lower, np.zeros(mi)])
        hi = np.concatenate([lp.upper, np.full(mi, np.inf)])
        c = np.concatenate([lp.c, np.zeros(mi)])
        return A, b, c, lo, hi, me, mi

    def solve(self, lp: LinearProgram, warm_basis: tuple | None = None) -> LpSolution:
        A, b, c, lo, hi, me, mi = self._standard_form(lp)
        m, ns = A.shape
        n = lp.n_vars
        # artificials occupy columns ns .. ns+m-1
        state = None
        if warm_basis is not None:
            state = self._warm_state(A, b, lo, hi, warm_basis)
        iters = 0
        if state is None:
            state, iters, ok = self._phase_one(A, b, lo, hi)
            if not ok:
                return LpSolution(INFEASIBLE, iterations=iters)
        Aext, lo_e, hi_e, x, basis, Binv = state
        c_ext = np.concatenate([c, np.zeros(m)])
        status, it2, x, basis, Binv = self._iterate(Aext, b, c_ext, lo_e, hi_e, x, basis, Binv)
        iters += it2
        if status != OPTIMAL:
            return LpSolution(status, iterations=iters)

        Binv = np.linalg.inv(Aext[:, basis])
        nb = np.ones(Aext.shape[1], dtype=bool)
        nb[basis] = False
        x[basis] = Binv @ (b - Aext[:, nb] @ x[nb])
        xs = x[:n].copy()
        # snap tiny bound violations from round-off
        xs = np.minimum(np.maximum(xs, lp.lower), lp.upper)
        scale = 1.0 + np.max(np.abs(b)) if b.size else 1.0
        if lp.max_violation(xs) > 1e-7 * scale or np.any(np.abs(x[ns:]) > 1e-7 * scale):
            return LpSolution(NUMERICAL, iterations=iters)
        y = c_ext[basis] @ Binv
        d = c - y @ A
        at_upper = tuple(int(j) for j in np.flatnonzero(nb[:ns] & (x[:ns] == hi) & (hi > lo)))
        return LpSolution(
            OPTIMAL,
            x=xs,
            objective=float(lp.c @ xs),
            duals_eq=y[:me].copy(),
            duals_ub=y[me:].copy(),
            reduced_costs=d[:n].copy(),
            iterations=iters,
            basis=(tuple(int(j) for j in basis), at_upper),
        )

    def _nonbasic_start(self, lo, hi):
        x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
        return x

    def _warm_state(self, A, b, lo, hi, warm_basis):
        m, ns = A.shape
        basis, at_upper = warm_basis
        basis = list(basis)
        if len(basis) != m or any(j >= ns for j in basis):
            return None
        Aext = np.hstack([A, np.eye(m)])
        lo_e = np.concatenate([lo, np.zeros(m)])
        hi_e = np.concatenate([hi, np.zeros(m)])
        x = np.concatenate([self._nonbasic_start(lo, hi), np.zeros(m)])
        for j in at_upper:
            if j < ns and np.isfinite(hi[j]):
                x[j] = hi[j]
        try:
            Binv = np.linalg.inv(Aext[:, basis])
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(Binv)):
            return None
        nb = np.ones(ns + m, dtype=bool)
        nb[basis] = False
        xb = Binv @ (b - Aext[:, nb] @ x[nb])
        ftol = 1e-9 * (1.0 + np.max(np.abs(b), initial=0.0))
        if np.any(xb < lo_e[basis] - ftol) or np.any(xb > hi_e[basis] + ftol):
            return None
        x[basis] = xb
        return Aext, lo_e, hi_e, x, basis, Binv

    def _phase_one(self, A, b, lo, hi):
        m, ns = A.shape
        x = np.concatenate([self._nonbasic_start(lo, hi), np.zeros(m)])
        r = b - A @ x[:ns]
        signs = np.where(r >= 0, 1.0, -1.0)
        Aext = np.hstack([A, np.diag(signs)])
        lo_e = np.concatenate([lo, np.zeros(m)])
        hi_e = np.concatenate([hi, np.full(m, np.inf)])
        basis = []
        # crash: a column that is a unit vector in row i and sits at a zero lower bound
        for i in range(m):
            j = None
            if r[i] >= 0:
                col = np.flatnonzero((A[i] == 1.0) & (lo == 0.0) & (hi == np.inf))
                for cand in col:
                    if np.count_nonzero(A[:, cand]) == 1 and cand not in basis:
                        j = int(cand)
                        break
            if j is None:
                basis.append(ns + i)
                x[ns + i] = abs(r[i])
            else:
                basis.append(j)
                x[j] = r[i]
                hi_e[ns + i] = 0.0
        Binv = np.linalg.inv(Aext[:, basis])
        cost = np.concatenate([np.zeros(ns), np.ones(m)])
        status, iters, x, basis, Binv = self._iterate(Aext, b, cost, lo_e, hi_e, x, basis, Binv)
        if status not in (OPTIMAL,):
            return None, iters, False
        infeas = float(np.sum(x[ns:]))
        if infeas > 1e-8 * (1.0 + np.max(np.abs(b), initial=0.0)):
            return None, iters, False
        hi_e[ns:] = 0.0
        x[ns:] = np.where(np.isin(np.arange(m) + ns, basis), x[ns:], 0.0)
        basis, Binv = self._drive_out_artificials(Aext, lo_e, hi_e, basis, Binv, ns)
        return (Aext, lo_e, hi_e, x, basis, Binv), iters, True

    def _drive_out_artificials(self, Aext, lo_e, hi_e, basis, Binv, ns):
        basic = set(basis)
        for r, j in enumerate(list(basis)):
            if j < ns:
                continue
            row = Binv[r] @ Aext[:, :ns]
            cand = [k for k in np.argsort(-np.abs(row)) if abs(row[k]) > 1e-7 and k not in basic]
            if not cand:
                continue  # redundant row; the artificial stays basic at zero
            q = int(cand[0])
            Binv = self._update_inverse(Binv, Binv @ Aext[:, q], r)
            basic.discard(j)
            basic.add(q)
            basis[r] = q
        return basis, Binv

    @staticmethod
    def _update_inverse(Binv, w, r):
        piv = w[r]
        Binv = Binv.copy()
        row = Binv[r] / piv
        Binv -= np.outer(w, row)
        Binv[r] = row
        return Binv

    # --------------------------------------------------------------- pivoting
    def _iterate(self, A, b, cost, lo, hi, x, basis, Binv):
        m, ntot = A.shape
        tol = self.tol
        max_iter = self.max_iter or 50 * (m + ntot) + 1000
        basis = list(basis)
        is_basic = np.zeros(ntot, dtype=bool)
        is_basic[basis] = True
        movable = hi > lo
        free = np.isneginf(lo) & np.isposinf(hi)
        degenerate_run = 0
        since_refactor = 0
        for it in range(max_iter):
            y = cost[basis] @ Binv
            d = cost - y @ A
            at_lo = x <= lo
            at_hi = x >= hi
            inc = movable & ~is_basic & (d < -tol) & (~at_hi | free) & (at_lo | free | ~at_hi)
            dec = movable & ~is_basic & (d > tol) & (~at_lo | free)
            inc &= ~at_hi
            cand = inc | dec
            if not cand.any():
                return OPTIMAL, it, x, basis, Binv
            use_bland = degenerate_run >= self.degenerate_limit
            idx = np.flatnonzero(cand)
            q = int(idx[0]) if use_bland else int(idx[np.argmax(np.abs(d[idx]))])
            s = 1.0 if inc[q] else -1.0

            w = Binv @ A[:, q]
            delta = s * w
            xb = x[basis]
            lb = lo[basis]
            ub = hi[basis]
            ratios = np.full(m, np.inf)
            pos = delta > tol
            neg = delta < -tol
            ratios[pos] = (xb[pos] - lb[pos]) / delta[pos]
            ratios[neg] = (ub[neg] - xb[neg]) / (-delta[neg])
            ratios = np.maximum(ratios, 0.0)
            flip = hi[q] - lo[q]
            r_min = ratios.min() if m else np.inf
            if not np.isfinite(r_min) and not np.isfinite(flip):
                return UNBOUNDED, it, x, basis, Binv
            if flip <= r_min:
                theta = flip
                leave = -1
            else:
                theta = r_min
                ties = np.flatnonzero(ratios <= r_min + 1e-12)
                if use_bland:
                    leave = int(ties[np.argmin(np.asarray(basis)[ties])])
                else:
                    leave = int(ties[np.argmax(np.abs(delta[ties]))])

            x[q] += s * theta
            x[basis] = xb - theta * delta
            if leave < 0:
                x[q] = hi[q] if s > 0 else lo[q]
                degenerate_run = 0 if theta > 1e-12 else degenerate_run + 1
                continue
            out = basis[leave]
            x[out] = lo[out] if delta[leave] > 0 else hi[out]
            if not np.isfinite(x[out]):
                x[out] = 0.0
            Binv = self._update_inverse(Binv, w, leave)
            basis[leave] = q
            is_basic[out] = False
            is_basic[q] = True
            degenerate_run = degenerate_run + 1 if theta <= 1e-12 else 0
            since_refactor += 1
            if since_refactor >= self.refactor_every:
                since_refactor = 0
                try:
                    Binv = np.linalg.inv(A[:, basis])
                except np.linalg.LinAlgError:
                    return NUMERICAL, it, x, basis, Binv
                nb = ~is_basic
                x[basis] = Binv @ (b - A[:, nb] @ x[nb])
        return ITERATION_LIMIT, max_iter, x, basis, Binv


_DEFAULT_SOLVER = SimplexSolver()


def solve_highs(lp: LinearProgram) -> LpSolution:
    """External backend (scipy's HiGHS); same contract as the built-in solver."""
    from scipy.optimize import linprog

    bounds = list(zip(np.where(np.isinf(lp.lower), None, lp.lower), np.where(np.isinf(lp.upper), None, lp.upper)))
    res = linprog(lp.c, A_ub=lp.A_ub if lp.A_ub.size else None, b_ub=lp.b_ub if lp.b_ub.size else None,
                  A_eq=lp.A_eq if lp.A_eq.size else None, b_eq=lp.b_eq if lp.b_eq.size else None,
                  bounds=bounds, method="highs")
    if res.status == 0:
        return LpSolution(OPTIMAL, x=res.x, objective=float(res.fun),
                          duals_eq=getattr(res.eqlin, "marginals", None),
                          duals_ub=getattr(res.ineqlin, "marginals", None),
                          iterations=int(res.nit))
    status = {2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, NUMERICAL)
    return LpSolution(status, iterations=int(getattr(res, "nit", 0)))


def solve_lp(lp: LinearProgram, method: str = "simplex", warm_basis=None) -> LpSolution:
    if method == "simplex":
        return _DEFAULT_SOLVER.solve(lp, warm_basis)
    if method == "highs":
        return solve_highs(lp)
    raise ValueError(f"unknown LP method {method!r}")


def write_mps(lp: LinearProgram, path: str | Path, name: str = "LP") -> None:
    """Fixed-format MPS dump (equality rows ``E*``, inequality rows ``L*``)."""
    n = lp.n_vars
    cols = lp.names or [f"X{j}" for j in range(n)]
    eq_rows = [f"E{i}" for i in range(lp.A_eq.shape[0])]
    ub_rows = [f"L{i}" for i in range(lp.A_ub.shape[0])]

    def num(v):
        return f"{v:.12g}"

    lines = [f"NAME          {name}", "ROWS", " N  COST"]
    lines += [f" E  {r}" for r in eq_rows] + [f" L  {r}" for r in ub_rows]
    lines.append("COLUMNS")
    for j in range(n):
        entries = [("COST", lp.c[j])] if lp.c[j] else []
        entries += [(eq_rows[i], v) for i, v in enumerate(lp.A_eq[:, j]) if v]
        entries += [(ub_rows[i], v) for i, v in enumerate(lp.A_ub[:, j]) if v]
        if not entries:
            entries = [("COST", 0.0)]
        for row, v in entries:
            lines.append(f"    {cols[j]:<8}  {row:<8}  {num(v):>12}")
    lines.append("RHS")
    for rows, vals in ((eq_rows, lp.b_eq), (ub_rows, lp.b_ub)):
        for r, v in zip(rows, vals):
            if v:
                lines.append(f"    RHS       {r:<8}  {num(v):>12}")
    lines.append("BOUNDS")
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if np.isneginf(lo) and np.isposinf(hi):
            lines.append(f" FR BND       {cols[j]:<8}")
            continue
        if lo == hi:
            lines.append(f" FX BND       {cols[j]:<8}  {num(lo):>12}")
            continue
        if np.isneginf(lo):
            lines.append(f" MI BND       {cols[j]:<8}")
        elif lo != 0:
            lines.append(f" LO BND       {cols[j]:<8}  {num(lo):>12}")
        if np.isfinite(hi):
            lines.append(f" UP BND       {cols[j]:<8}  {num(hi):>12}")
    lines.append("ENDATA")
    Path(path).write_text("\n".join(lines) + "\n")
