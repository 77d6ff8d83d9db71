"""Per-period maximum likelihood estimates of spread/containment probabilities.

A single transition ``B_t -> B_{t+1}`` is summarised per area ``h`` by

* ``ignited[h, m]`` / ``spared[h, m]``: how many frontier nodes of area ``h``
  with ``m`` burning neighbours did / did not catch fire,
* ``extinguished[h]`` / ``survived[h]``: how many of area ``h``'s burning
  nodes went out / kept burning.

The spread log-likelihood of an area is
``sum_m ignited[m] * log(1 - (1-p)^m) + spared[m] * m * log(1-p)`` and the
containment log-likelihood is ``a * log(q) + b * log(1-q)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _kernels
from .fire import FireState, ParamSchedule, SpreadParams, advance_fire
from .grid import GridMap, neighbor_count

EPS = 1e-6
GOLDEN_TOL = 1e-8
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class StepObservation:
    ignited: np.ndarray       # (H, 9) int, column m = number of burning neighbours
    spared: np.ndarray        # (H, 9) int
    extinguished: np.ndarray  # (H,) int
    survived: np.ndarray      # (H,) int

    @property
    def n_areas(self) -> int:
        return len(self.extinguished)

    @property
    def frontier_size(self) -> np.ndarray:
        """``|N(B_t) ∩ G_h|`` per area."""
        return self.ignited.sum(axis=1) + self.spared.sum(axis=1)

    @classmethod
    def empty(cls, n_areas: int) -> "StepObservation":
        z = np.zeros((n_areas, 9), dtype=np.int64)
        return cls(z, z.copy(), np.zeros(n_areas, np.int64), np.zeros(n_areas, np.int64))

    @classmethod
    def single_area(cls, ignited_m=(), spared_m=(), extinguished=0, survived=0) -> "StepObservation":
        """Build a one-area observation from lists of per-node neighbour counts."""
        ig = np.bincount(np.asarray(ignited_m, dtype=int), minlength=9)[None, :9]
        sp = np.bincount(np.asarray(spared_m, dtype=int), minlength=9)[None, :9]
        return cls(ig.astype(np.int64), sp.astype(np.int64),
                   np.array([extinguished]), np.array([survived]))

    def scaled(self, k: int) -> "StepObservation":
        return StepObservation(self.ignited * k, self.spared * k, self.extinguished * k, self.survived * k)


def observe(g: GridMap, before: np.ndarray, after: np.ndarray) -> StepObservation:
    """Sufficient statistics of one transition.

    A frontier node belongs to the area it lies in; its neighbour count
    includes burning neighbours from any area.
    """
    h = g.n_areas
    m = neighbor_count(before).ravel().astype(np.int64)
    b0 = before.ravel()
    b1 = after.ravel()
    area = g.area_of.ravel().astype(np.int64)

    frontier = ~b0 & (m > 0)
    new = frontier & b1
    kept = frontier & ~b1
    ign = np.bincount(area[new] * 9 + m[new], minlength=h * 9).reshape(h, 9)
    spr = np.bincount(area[kept] * 9 + m[kept], minlength=h * 9).reshape(h, 9)
    ext = np.bincount(area[b0 & ~b1], minlength=h)
    sur = np.bincount(area[b0 & b1], minlength=h)
    return StepObservation(ign, spr, ext, sur)


def step_and_observe(g: GridMap, burning: np.ndarray, params: SpreadParams,
                     rng: np.random.Generator) -> tuple[np.ndarray, StepObservation]:
    """Advance the fire one period and return the new burning set with its statistics."""
    nxt, (ign, spr, ext, sur) = advance_fire(g, burning, params, rng)
    return nxt, StepObservation(ign, spr, ext, sur)


def _xlogy(n, p):
    if n == 0:
        return 0.0
    if p <= 0.0:
        return -math.inf
    return n * math.log(p)


def _terms(ignited, spared):
    """Nonzero ``(m, ignited, spared)`` triples for ``m >= 1``."""
    return [(m, int(ignited[m]), int(spared[m])) for m in range(1, 9) if ignited[m] or spared[m]]


def _loglik_terms(p: float, terms) -> float:
    q = 1.0 - p
    total = 0.0
    for m, ig, sp in terms:
        if ig:
            total += _xlogy(ig, 1.0 - q ** m)
        if sp:
            total += _xlogy(sp * m, q)
    return total


def loglik_plus(p: float, ignited: np.ndarray, spared: np.ndarray) -> float:
    """Spread log-likelihood of one area."""
    return _loglik_terms(p, _terms(ignited, spared))


def loglik_minus(p: float, extinguished: int, survived: int) -> float:
    return _xlogy(extinguished, p) + _xlogy(survived, 1.0 - p)


def log_likelihood(p_plus, p_minus, obs: StepObservation) -> float:
    """Joint log-likelihood of all areas' parameters for one transition."""
    pp = np.broadcast_to(np.asarray(p_plus, dtype=float), (obs.n_areas,))
    pm = np.broadcast_to(np.asarray(p_minus, dtype=float), (obs.n_areas,))
    total = 0.0
    for h in range(obs.n_areas):
        total += loglik_plus(pp[h], obs.ignited[h], obs.spared[h])
        total += loglik_minus(pm[h], obs.extinguished[h], obs.survived[h])
    return total


def golden_section_max(f, lo: float, hi: float, tol: float = GOLDEN_TOL) -> float:
    """Maximiser of a unimodal ``f`` on ``[lo, hi]``; the end points are checked explicitly."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    best, fbest = x, f(x)
    for edge in (lo, hi):
        fe = f(edge)
        if fe >= fbest:
            best, fbest = edge, fe
    return best


def info_plus(p: float, ignited: np.ndarray, spared: np.ndarray) -> float:
    """Observed information ``-d²ℓ/dp²`` of the spread terms."""
    q = 1.0 - p
    total = 0.0
    for m, ig, sp in _terms(ignited, spared):
        if ig:
            qm = q ** m
            total += ig * (m * (m - 1) * q ** (m - 2) * (1.0 - qm) + m * m * q ** (2 * m - 2)) / (1.0 - qm) ** 2
        if sp:
            total += sp * m / q ** 2
    return total


def info_minus(p: float, extinguished: int, survived: int) -> float:
    return extinguished / p ** 2 + survived / (1.0 - p) ** 2


@dataclass(frozen=True)
class StepEstimate:
    """Per-area MLEs and variance proxies; ``nan`` / ``inf`` mark areas without data."""

    p_plus: np.ndarray
    p_minus: np.ndarray
    nu_plus: np.ndarray
    nu_minus: np.ndarray

    @property
    def has_plus(self) -> np.ndarray:
        return ~np.isnan(self.p_plus)

    @property
    def has_minus(self) -> np.ndarray:
        return ~np.isnan(self.p_minus)


def mle_plus(ignited: np.ndarray, spared: np.ndarray, eps: float = EPS) -> float:
    if not ignited[1:].any():
        return float("nan") if not spared[1:].any() else eps
    if not spared[1:].any():
        return 1.0 - eps
    return float(_kernels.golden_plus(np.asarray(ignited, np.float64), np.asarray(spared, np.float64),
                                      eps, 1.0 - eps, GOLDEN_TOL))


def mle_minus(extinguished: int, survived: int, eps: float = EPS) -> float:
    n = extinguished + survived
    if n == 0:
        return float("nan")
    return min(max(extinguished / n, eps), 1.0 - eps)


def mle_step(obs: StepObservation, eps: float = EPS) -> StepEstimate:
    h = obs.n_areas
    pp = np.array([mle_plus(obs.ignited[k], obs.spared[k], eps) for k in range(h)])
    pm = np.array([mle_minus(int(obs.extinguished[k]), int(obs.survived[k]), eps) for k in range(h)])
    nup, num = variance_proxy(obs, pp, pm)
    return StepEstimate(pp, pm, nup, num)


def variance_proxy(obs: StepObservation, p_plus, p_minus) -> tuple[np.ndarray, np.ndarray]:
    """Inverse observed information at the (clamped) estimates; ``inf`` without information."""
    h = obs.n_areas
    nup = np.full(h, np.inf)
    num = np.full(h, np.inf)
    for k in range(h):
        if not np.isnan(p_plus[k]):
            info = info_plus(float(p_plus[k]), obs.ignited[k], obs.spared[k])
            if info > 0:
                nup[k] = 1.0 / info
        if not np.isnan(p_minus[k]):
            info = info_minus(float(p_minus[k]), int(obs.extinguished[k]), int(obs.survived[k]))
            if info > 0:
                num[k] = 1.0 / info
    return nup, num


def interval_average(values, nus, times, t1: int, t2: int) -> tuple[float, float, int]:
    """Mean estimate and summed variance proxy over data periods ``t1 <= t <= t2``.

    Periods without data are simply absent from ``times``.
    """
    if t1 > t2:
        raise ValueError("t1 must not exceed t2")
    times = np.asarray(times)
    sel = (times >= t1) & (times <= t2)
    if not sel.any():
        raise ValueError(f"no data periods in [{t1}, {t2}]")
    v = np.asarray(values)[sel]
    return float(v.mean()), float(np.asarray(nus)[sel].sum()), int(sel.sum())


@dataclass
class QQResult:
    times: np.ndarray
    residuals: np.ndarray
    theoretical: np.ndarray   # standard normal quantiles
    sample: np.ndarray        # sorted residuals
    ks_statistic: float
    ks_pvalue: float


def estimate_trajectory(g: GridMap, states: list[FireState]) -> list[StepEstimate]:
    """Step estimates for transitions ``(B_1,B_2), ..., (B_{T-1},B_T)``."""
    return [mle_step(observe(g, a.burning, b.burning)) for a, b in zip(states, states[1:])]


def residual_analysis(g: GridMap, states: list[FireState], schedule: ParamSchedule,
                      estimates: list[StepEstimate] | None = None) -> dict[tuple[int, str], QQResult]:
    """Standardised estimation errors ``(p_hat - p) / sqrt(nu)`` and their normal Q-Q pairs.

    Keys are ``(area, "plus" | "minus")``; streams that never produced data
    are left out.
    """
    if estimates is None:
        estimates = estimate_trajectory(g, states)
    out = {}
    for h in range(g.n_areas):
        for name in ("plus", "minus"):
            times, res = [], []
            for k, est in enumerate(estimates):
                t = states[k].t
                val = getattr(est, f"p_{name}")[h]
                nu = getattr(est, f"nu_{name}")[h]
                if np.isnan(val) or not np.isfinite(nu):
                    continue
                truth = getattr(schedule, name)[t - 1, h]
                times.append(t)
                res.append((val - truth) / math.sqrt(nu))
            if not res:
                continue
            res = np.asarray(res)
            n = res.size
            theo = stats.norm.ppf((np.arange(1, n + 1) - 0.5) / n)
            ks = stats.kstest(res, "norm")
            out[(h, name)] = QQResult(np.asarray(times), res, theo, np.sort(res),
                                      float(ks.statistic), float(ks.pvalue))
    return out
