"""Online estimation with change-point restarts, and the comparison learners.

Every learner keeps one stream per area and parameter (spread ``plus`` and
containment ``minus``).  A stream receives the per-period MLE and its
variance proxy whenever the period produced data, and reports the value to
plan with.  Streams differ only in which past estimates they average:

* ``AdaptiveStream``: the current episode; a new episode starts when some
  sub-interval average moves away from the episode average by more than both
  concentration radii combined,
* ``LatestStream``: the newest estimate only,
* ``GlobalStream``: everything seen so far,
* ``LRStream``: the current episode, restarted at the best split point when
  a two-sample mean-shift statistic exceeds a threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimation import StepEstimate
from .fire import ParamSchedule, SpreadParams

PRIOR = 0.5
EXHAUSTIVE = "exhaustive"
GEOMETRIC = "geometric"


@dataclass(frozen=True)
class DetectorConfig:
    log_factor: str = "2HT"          # "2HT" or "2T"
    interval_policy: str = GEOMETRIC
    lr_threshold: float = 21.6

    def __post_init__(self):
        if self.log_factor not in ("2HT", "2T"):
            raise ValueError("log_factor must be '2HT' or '2T'")
        if self.interval_policy not in (EXHAUSTIVE, GEOMETRIC):
            raise ValueError(f"interval policy must be {EXHAUSTIVE!r} or {GEOMETRIC!r}")
        if not self.lr_threshold > 0:
            raise ValueError("lr_threshold must be positive")

    def log_term(self, n_areas: int, horizon: int) -> float:
        return math.log(2 * n_areas * horizon) if self.log_factor == "2HT" else math.log(2 * horizon)


class Stream:
    """History of one parameter stream; ``start`` indexes the first estimate of the current episode."""

    def __init__(self):
        self.times: list[int] = []
        self.values: list[float] = []
        self.nus: list[float] = []
        self.start = 0
        self.restarts: list[int] = []

    def push(self, t: int, value: float, nu: float) -> bool:
        """Record one estimate; returns True when a new episode was started."""
        if math.isnan(value) or not math.isfinite(nu):
            return False
        self.times.append(t)
        self.values.append(float(value))
        self.nus.append(float(nu))
        return self._after_push()

    def _after_push(self) -> bool:
        return False

    def _restart(self, index: int) -> None:
        self.start = index
        self.restarts.append(self.times[index])

    @property
    def episode_start(self) -> int | None:
        """Period of the first estimate in the current episode."""
        return self.times[self.start] if self.start < len(self.times) else None

    def value(self) -> float:
        ep = self.values[self.start:]
        return float(np.mean(ep)) if ep else PRIOR


class LatestStream(Stream):
    def value(self) -> float:
        return self.values[-1] if self.values else PRIOR


class GlobalStream(Stream):
    pass


def _prefix(x):
    return np.concatenate([[0.0], np.cumsum(x)])


def change_detected(values, nus, log_term: float, policy: str = EXHAUSTIVE):
    """Check whether some interval of an episode departs from the episode average.

    Returns the first offending ``(a, b)`` (inclusive, zero-based within the
    episode) or ``None``.
    """
    v = np.asarray(values, dtype=float)
    w = np.asarray(nus, dtype=float)
    n = v.size
    if n < 2:
        return None
    cv, cw = _prefix(v), _prefix(w)
    avg = cv[-1] / n
    radius_ep = 4.0 * math.sqrt(cw[-1] * log_term) / n
    if policy == EXHAUSTIVE:
        a, b = np.triu_indices(n)
        length = b - a + 1
        mean = (cv[b + 1] - cv[a]) / length
        rad = 4.0 * np.sqrt((cw[b + 1] - cw[a]) * log_term) / length
        hit = np.flatnonzero(np.abs(avg - mean) >= radius_ep + rad)
        return (int(a[hit[0]]), int(b[hit[0]])) if hit.size else None
    lengths = 2 ** np.arange(int(math.log2(n)) + 1)
    lengths = lengths[lengths <= n]
    a = np.concatenate([n - lengths, np.zeros(lengths.size, int)])
    b = np.concatenate([np.full(lengths.size, n - 1), lengths - 1])
    length = b - a + 1
    mean = (cv[b + 1] - cv[a]) / length
    rad = 4.0 * np.sqrt((cw[b + 1] - cw[a]) * log_term) / length
    hit = np.flatnonzero(np.abs(avg - mean) >= radius_ep + rad)
    return (int(a[hit[0]]), int(b[hit[0]])) if hit.size else None


class AdaptiveStream(Stream):
    def __init__(self, log_term: float, policy: str = GEOMETRIC):
        super().__init__()
        self.log_term = log_term
        self.policy = policy

    def _after_push(self) -> bool:
        found = change_detected(self.values[self.start:], self.nus[self.start:], self.log_term, self.policy)
        if found is None:
            return False
        # the new episode keeps only the newest estimate
        self._restart(len(self.values) - 1)
        return True


def lr_statistic(values, nus) -> tuple[int, float]:
    """Best split ``k`` (second part starts at ``k``) and its variance-standardised mean-shift statistic."""
    v = np.asarray(values, dtype=float)
    n = v.size
    if n < 2:
        return 0, 0.0
    cv = _prefix(v)
    k = np.arange(1, n)
    m1 = cv[k] / k
    m2 = (cv[n] - cv[k]) / (n - k)
    gamma = (m1 - m2) ** 2 / (1.0 / k + 1.0 / (n - k))
    j = int(np.argmax(gamma))
    scale = float(np.mean(nus))
    return int(k[j]), float(gamma[j] / scale) if scale > 0 else math.inf


class LRStream(Stream):
    def __init__(self, threshold: float):
        super().__init__()
        self.threshold = threshold

    def _after_push(self) -> bool:
        k, stat = lr_statistic(self.values[self.start:], self.nus[self.start:])
        if stat > self.threshold:
            self._restart(self.start + k)
            return True
        return False


class Learner:
    """Per-area pair of streams; ``params()`` gives the plug-in estimate for planning."""

    name = "learner"

    def __init__(self, n_areas: int):
        self.n_areas = n_areas
        self.plus = [self._stream() for _ in range(n_areas)]
        self.minus = [self._stream() for _ in range(n_areas)]

    def _stream(self) -> Stream:
        raise NotImplementedError

    def observe(self, t: int, est: StepEstimate) -> tuple[int, int]:
        """Feed the estimate from the transition ending at period ``t``; returns restarts (plus, minus)."""
        dp = sum(s.push(t, est.p_plus[h], est.nu_plus[h]) for h, s in enumerate(self.plus))
        dm = sum(s.push(t, est.p_minus[h], est.nu_minus[h]) for h, s in enumerate(self.minus))
        return dp, dm

    def params(self, t: int | None = None) -> SpreadParams:
        return SpreadParams(np.array([s.value() for s in self.plus]), np.array([s.value() for s in self.minus]))

    def episode_starts(self) -> tuple[list, list]:
        return [s.episode_start for s in self.plus], [s.episode_start for s in self.minus]


class AdaptiveLearner(Learner):
    name = "algorithm1"

    def __init__(self, n_areas: int, horizon: int, config: DetectorConfig = DetectorConfig()):
        self.log_term = config.log_term(n_areas, horizon)
        self.policy = config.interval_policy
        super().__init__(n_areas)

    def _stream(self):
        return AdaptiveStream(self.log_term, self.policy)


class NaiveLearner(Learner):
    name = "naive"

    def _stream(self):
        return LatestStream()


class GlobalAverageLearner(Learner):
    name = "global_average"

    def _stream(self):
        return GlobalStream()


class LRLearner(Learner):
    name = "likelihood_ratio"

    def __init__(self, n_areas: int, threshold: float):
        self.threshold = threshold
        super().__init__(n_areas)

    def _stream(self):
        return LRStream(self.threshold)


class ClairvoyantLearner(Learner):
    """Plans with the true parameters in force when the fire last moved."""

    name = "clairvoyant"

    def __init__(self, schedule: ParamSchedule):
        self.schedule = schedule
        super().__init__(schedule.n_areas)

    def _stream(self):
        return GlobalStream()

    def params(self, t: int | None = None) -> SpreadParams:
        if t is None:
            raise ValueError("the clairvoyant learner needs the planning period")
        return self.schedule.at(max(t - 1, 1))


ALGORITHMS = ("algorithm1", "naive", "global_average", "likelihood_ratio")


def make_learner(name: str, n_areas: int, horizon: int, config: DetectorConfig = DetectorConfig(),
                 schedule: ParamSchedule | None = None) -> Learner:
    if name == "algorithm1":
        return AdaptiveLearner(n_areas, horizon, config)
    if name == "naive":
        return NaiveLearner(n_areas)
    if name == "global_average":
        return GlobalAverageLearner(n_areas)
    if name == "likelihood_ratio":
        return LRLearner(n_areas, config.lr_threshold)
    if name == "clairvoyant":
        if schedule is None:
            raise ValueError("clairvoyant learner needs the true schedule")
        return ClairvoyantLearner(schedule)
    raise ValueError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS + ('clairvoyant',))}")


def calibrate_lr_threshold(horizon: int, reps: int, rng: np.random.Generator, level: float = 0.05,
                           nu: float = 1e-3) -> float:
    """Threshold giving a false-alarm probability ``level`` over one null episode of length ``horizon``.

    The statistic is standardised by the mean variance proxy, so the noise
    scale ``nu`` cancels; it is kept to make the simulated streams realistic.
    """
    maxima = np.empty(reps)
    for r in range(reps):
        x = 0.4 + math.sqrt(nu) * rng.standard_normal(horizon)
        cv = _prefix(x)
        best = 0.0
        for n in range(2, horizon + 1):
            k = np.arange(1, n)
            g = (cv[k] / k - (cv[n] - cv[k]) / (n - k)) ** 2 / (1.0 / k + 1.0 / (n - k))
            best = max(best, float(g.max()) / nu)
        maxima[r] = best
    return float(np.quantile(maxima, 1.0 - level))
