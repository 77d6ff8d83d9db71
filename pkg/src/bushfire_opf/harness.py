"""Regret experiments: scenario generation, replication and aggregation.

Randomness comes from one master seed.  Parameter sequence ``s`` draws its
schedule from ``SeedSequence(seed, spawn_key=(s,))``; replication ``r`` of
that sequence draws origins and fire from ``SeedSequence(seed, spawn_key=(s, r))``.
Replications therefore do not depend on execution order, and results are
sorted by ``(s, r)`` before aggregation.
"""

from __future__ import annotations

import configparser
import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .estimation import mle_step, step_and_observe
from .fire import ParamSchedule, generate_schedule, random_origins
from .grid import GridMap
from .network import ExposureModel, PowerNetwork, all_scenario_weights, load_network, lipschitz_constants
from .online import ALGORITHMS, DetectorConfig, make_learner
from .opf import StochasticOPF, static_opf


class ConfigError(ValueError):
    pass


def data_path(name: str) -> Path:
    return Path(str(resources.files("bushfire_opf") / "data" / name))


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    network: str
    width: int
    height: int
    n_areas: int = 1
    partition: str = "blocks"        # "blocks" or a path to a per-node area file
    d_bar: int | None = None         # overrides the network file when set
    horizon: int = 2000
    changes_plus: int = 50
    changes_minus: int = 50
    plus_range: tuple[float, float] = (0.2, 0.6)
    minus_range: tuple[float, float] = (0.1, 0.4)
    origins: int = 1
    sequences: int = 5
    reps: int = 20
    seed: int = 0
    algorithms: tuple[str, ...] = ALGORITHMS
    shed_cost: float = 20.0
    log_factor: str = "2HT"
    interval_policy: str = "geometric"
    lr_threshold: float = 21.6
    include_center: bool = False
    lp_method: str = "simplex"
    checkpoints: tuple[int, ...] = (500, 1000, 1500, 2000)
    full_sequences: int = 100
    full_reps: int = 1000
    nu_cap: float | None = None

    def __post_init__(self):
        if self.horizon < 2:
            raise ConfigError("horizon must be at least 2")
        if self.sequences < 1 or self.reps < 1:
            raise ConfigError("sequences and reps must be at least 1")
        if self.origins < 1:
            raise ConfigError("need at least one fire origin")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}; choose from {', '.join(ALGORITHMS)}")
        if max(self.changes_plus, self.changes_minus) >= self.horizon:
            raise ConfigError("number of change points must be below the horizon")
        DetectorConfig(self.log_factor, self.interval_policy, self.lr_threshold)

    @property
    def detector(self) -> DetectorConfig:
        return DetectorConfig(self.log_factor, self.interval_policy, self.lr_threshold)

    def grid(self) -> GridMap:
        if self.partition == "blocks":
            return GridMap.blocks(self.width, self.height, self.n_areas)
        g = GridMap.from_file(self.partition, self.n_areas)
        if (g.width, g.height) != (self.width, self.height):
            raise ConfigError("partition file does not match the grid size")
        return g

    def load_network(self) -> PowerNetwork:
        net = load_network(self.network)
        if self.d_bar is not None and self.d_bar != net.d_bar:
            net = PowerNetwork(net.buses, net.lines, self.d_bar, net.degree_cap)
        return net

    def full_scale(self) -> "ExperimentConfig":
        return replace(self, sequences=self.full_sequences, reps=self.full_reps)


_INT = ("width", "height", "n_areas", "d_bar", "horizon", "changes_plus", "changes_minus", "origins",
        "sequences", "reps", "seed", "full_sequences", "full_reps")
_FLOAT = ("shed_cost", "lr_threshold", "nu_cap")
_RANGE = ("plus_range", "minus_range")


def _parse_value(sec, key: str, raw: str):
    if key in _INT:
        return int(raw)
    if key in _FLOAT:
        return float(raw)
    if key in _RANGE:
        lo, hi = (float(v) for v in raw.split(","))
        return (lo, hi)
    if key == "include_center":
        return sec.getboolean(key)
    if key in ("algorithms", "checkpoints"):
        items = [v.strip() for v in raw.split(",") if v.strip()]
        return tuple(int(v) for v in items) if key == "checkpoints" else tuple(items)
    return raw


def load_config(path: str | Path) -> ExperimentConfig:
    """Read an INI file with one ``[experiment]`` section.

    Relative ``network`` and ``partition`` paths resolve against the config
    file's directory, then against the packaged data directory.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if "experiment" not in cp:
        raise ConfigError(f"{path}: missing [experiment] section")
    sec = cp["experiment"]
    known = set(ExperimentConfig.__dataclass_fields__)
    kw = {}
    for key, raw in sec.items():
        if key not in known:
            raise ConfigError(f"{path}: unknown key {key!r}")
        raw = raw.strip()
        try:
            kw[key] = _parse_value(sec, key, raw)
        except ValueError as exc:
            raise ConfigError(f"{path}: bad value for {key!r}: {raw!r}") from exc
    for key in ("network", "partition"):
        if key in kw and kw[key] != "blocks":
            kw[key] = str(_resolve(kw[key], path.parent))
    if "network" not in kw:
        raise ConfigError(f"{path}: 'network' is required")
    kw.setdefault("name", path.stem)
    try:
        return ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _resolve(name: str, base: Path) -> Path:
    p = Path(name)
    if p.is_absolute() and p.exists():
        return p
    if (base / p).exists():
        return base / p
    if data_path(name).exists():
        return data_path(name)
    raise ConfigError(f"file {name} not found next to the config or in the packaged data")


def ieee_configs() -> dict[str, ExperimentConfig]:
    """The packaged 11-bus and 57-bus experiment configurations."""
    return {name: load_config(data_path(f"{name}.cfg")) for name in ("ieee11", "ieee57")}


# ----------------------------------------------------------------- running

@dataclass
class ReplicationResult:
    sequence: int
    rep: int
    regret: dict[str, np.ndarray]           # per-step increments, index t-1
    step_log: list[tuple] = field(default_factory=list)
    lp_solves: int = 0
    incidents: int = 0
    max_nu_plus: float = 0.0
    max_nu_minus: float = 0.0


def sequence_schedule(cfg: ExperimentConfig, sequence: int, n_areas: int) -> ParamSchedule:
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(sequence,)))
    return generate_schedule(n_areas, cfg.horizon, cfg.changes_plus, cfg.plus_range, cfg.minus_range, rng,
                             n_changes_minus=cfg.changes_minus)


def run_replication(cfg: ExperimentConfig, sequence: int, rep: int, log_steps: bool = False,
                    _cache: dict | None = None) -> ReplicationResult:
    """One fire trajectory with every configured learner planning alongside the clairvoyant."""
    if _cache is not None and "setup" in _cache:
        g, net, expo, opf = _cache["setup"]
    else:
        g = cfg.grid()
        net = cfg.load_network()
        expo = ExposureModel(net, g, cfg.include_center)
        opf = StochasticOPF(net, cfg.shed_cost, cfg.lp_method)
        if _cache is not None:
            _cache["setup"] = (g, net, expo, opf)
    schedule = sequence_schedule(cfg, sequence, g.n_areas)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(sequence, rep)))
    burning = g.mask(random_origins(g, cfg.origins, rng))

    T = cfg.horizon
    learners = {a: make_learner(a, g.n_areas, T, cfg.detector) for a in cfg.algorithms}
    regret = {a: np.zeros(T) for a in cfg.algorithms}
    log = []
    solves0, inc0 = opf.lp_solves, opf.incidents
    max_nup = max_num = 0.0
    if log_steps:
        base = static_opf(net, method=cfg.lp_method)[0]
        cost1 = base.generation_cost(net)
        for a in cfg.algorithms:
            log.append((1, a, 0, 0, "", "", cost1, 0.0))
    changes = {a: (0, 0) for a in cfg.algorithms}

    for t in range(2, T + 1):
        ex = expo.exposure(burning)
        bf, lf = ~ex.bus_ok, ~ex.line_ok
        if not bf.all():
            truth = schedule.at(t - 1)
            p_bus, p_line = ex.probabilities(truth)
            rho = all_scenario_weights(net, p_line)
            best = opf.solve(p_bus, rho, bf, lf)
            best_cost = opf.expected_cost(best, p_bus, rho)
            for a, lr in learners.items():
                est_bus, est_line = ex.probabilities(lr.params(t))
                strat = opf.solve(est_bus, all_scenario_weights(net, est_line), bf, lf)
                cost = opf.expected_cost(strat, p_bus, rho)
                regret[a][t - 1] = cost - best_cost
                if log_steps:
                    sp, sm = lr.episode_starts()
                    log.append((t, a, changes[a][0], changes[a][1], _fmt_starts(sp), _fmt_starts(sm),
                                cost, cost - best_cost))
        elif log_steps:
            for a, lr in learners.items():
                sp, sm = lr.episode_starts()
                log.append((t, a, changes[a][0], changes[a][1], _fmt_starts(sp), _fmt_starts(sm), 0.0, 0.0))

        nxt, obs = step_and_observe(g, burning, schedule.at(t - 1), rng)
        est = mle_step(obs)
        fin = np.isfinite(est.nu_plus)
        if fin.any():
            max_nup = max(max_nup, float(est.nu_plus[fin].max()))
        fin = np.isfinite(est.nu_minus)
        if fin.any():
            max_num = max(max_num, float(est.nu_minus[fin].max()))
        for a, lr in learners.items():
            dp, dm = lr.observe(t - 1, est)
            changes[a] = (changes[a][0] + dp, changes[a][1] + dm)
        burning = nxt

    return ReplicationResult(sequence, rep, regret, log, opf.lp_solves - solves0, opf.incidents - inc0,
                             max_nup, max_num)


def _fmt_starts(starts) -> str:
    return ";".join("" if s is None else str(s) for s in starts)


def _worker(args):
    cfg, seq, rep, log_steps = args
    cache = _WORKER_CACHE.setdefault(id(cfg), {})
    return run_replication(cfg, seq, rep, log_steps, cache)


_WORKER_CACHE: dict = {}


@dataclass
class RegretRecord:
    algorithms: tuple[str, ...]
    mean: dict[str, np.ndarray]      # cumulative regret, index t-1
    se: dict[str, np.ndarray]
    n: int
    replications: list[ReplicationResult]
    runtime: float = 0.0

    @property
    def horizon(self) -> int:
        return len(next(iter(self.mean.values())))

    def at(self, algorithm: str, t: int) -> tuple[float, float]:
        return float(self.mean[algorithm][t - 1]), float(self.se[algorithm][t - 1])

    def cumulative(self, algorithm: str) -> np.ndarray:
        """``(replications, T)`` cumulative regret."""
        return np.array([np.cumsum(r.regret[algorithm]) for r in self.replications])


def aggregate(cfg: ExperimentConfig, results: list[ReplicationResult], runtime: float = 0.0) -> RegretRecord:
    results = sorted(results, key=lambda r: (r.sequence, r.rep))
    mean, se = {}, {}
    n = len(results)
    for a in cfg.algorithms:
        cum = np.array([np.cumsum(r.regret[a]) for r in results])
        mean[a] = cum.mean(axis=0)
        se[a] = cum.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(cum.shape[1])
    return RegretRecord(tuple(cfg.algorithms), mean, se, n, results, runtime)


def run_experiment(cfg: ExperimentConfig, threads: int = 1, log_steps: bool = False, progress=None) -> RegretRecord:
    """Every (sequence, replication) pair, serially or in a process pool."""
    tasks = [(cfg, s, r, log_steps) for s in range(cfg.sequences) for r in range(cfg.reps)]
    t0 = time.perf_counter()
    results = []
    if threads <= 1:
        cache: dict = {}
        for _, s, r, ls in tasks:
            results.append(run_replication(cfg, s, r, ls, cache))
            if progress:
                progress(len(results), len(tasks))
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for res in pool.map(_worker, tasks, chunksize=1):
                results.append(res)
                if progress:
                    progress(len(results), len(tasks))
    return aggregate(cfg, results, time.perf_counter() - t0)


def summary_rows(rec: RegretRecord, checkpoints=None) -> list[tuple]:
    T = rec.horizon
    cps = sorted({c for c in (checkpoints or ()) if c <= T} | {T})
    rows = []
    for a in rec.algorithms:
        for t in cps:
            m, s = rec.at(a, t)
            rows.append((a, t, m, s, m / t))
    return rows


def write_summary(rec: RegretRecord, path: str | Path, checkpoints=None) -> None:
    """Deterministic summary: algorithm, T, mean cumulative regret, SE, mean regret per period."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["algorithm", "T", "mean_regret", "se", "regret_per_period"])
        for a, t, m, s, r in summary_rows(rec, checkpoints):
            w.writerow([a, t, f"{m:.10g}", f"{s:.10g}", f"{r:.10g}"])


def write_regret_curve(rec: RegretRecord, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "algorithm", "mean_regret", "se"])
        for t in range(1, rec.horizon + 1):
            for a in rec.algorithms:
                m, s = rec.at(a, t)
                w.writerow([t, a, f"{m:.10g}", f"{s:.10g}"])


def write_runtime(rec: RegretRecord, path: str | Path) -> None:
    lp = sum(r.lp_solves for r in rec.replications)
    inc = sum(r.incidents for r in rec.replications)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replications", "runtime_seconds", "lp_solves", "lp_incidents"])
        w.writerow([rec.n, f"{rec.runtime:.3f}", lp, inc])


def write_step_logs(rec: RegretRecord, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sequence", "rep", "t", "algorithm", "detected_changes_plus", "detected_changes_minus",
                    "episode_starts_plus", "episode_starts_minus", "expected_cost", "regret_increment"])
        for r in rec.replications:
            for row in r.step_log:
                t, a, dp, dm, sp, sm, c, g = row
                w.writerow([r.sequence, r.rep, t, a, dp, dm, sp, sm, f"{c:.10g}", f"{g:.10g}"])


# ------------------------------------------------------------------- bound

def regret_bound(k_plus: float, k_minus: float, changes_plus, changes_minus, nu_plus, nu_minus,
                   horizon: int) -> float:
    """Regret bound of the adaptive learner from per-area change counts and variance caps."""
    lp = max(math.sqrt(l * v) for l, v in zip(np.atleast_1d(changes_plus), np.atleast_1d(nu_plus)))
    lm = max(math.sqrt(l * v) for l, v in zip(np.atleast_1d(changes_minus), np.atleast_1d(nu_minus)))
    T = horizon
    return 12.0 * (k_plus * lp + k_minus * lm) * math.sqrt(T * math.log(2 * T)) + 2.0 * (k_plus + k_minus) / T


def bound_report(cfg: ExperimentConfig, nu_plus: float | None = None, nu_minus: float | None = None) -> dict:
    """Constants and bound for a configuration.

    Without explicit variance caps, one replication (sequence 0, rep 0) is
    simulated and the largest per-period proxies it produced are used.
    """
    net = cfg.load_network()
    kp, km = lipschitz_constants(net, cfg.shed_cost)
    if nu_plus is None or nu_minus is None:
        if cfg.nu_cap is not None:
            nu_plus = nu_plus if nu_plus is not None else cfg.nu_cap
            nu_minus = nu_minus if nu_minus is not None else cfg.nu_cap
        else:
            res = run_replication(replace(cfg, algorithms=()), 0, 0)
            nu_plus = res.max_nu_plus if nu_plus is None else nu_plus
            nu_minus = res.max_nu_minus if nu_minus is None else nu_minus
    H = cfg.n_areas
    b = regret_bound(kp, km, [cfg.changes_plus] * H, [cfg.changes_minus] * H, [nu_plus] * H, [nu_minus] * H,
                       cfg.horizon)
    return {"K_plus": kp, "K_minus": km, "nu_plus_max": nu_plus, "nu_minus_max": nu_minus,
            "changes_plus": cfg.changes_plus, "changes_minus": cfg.changes_minus, "T": cfg.horizon, "bound": b}
