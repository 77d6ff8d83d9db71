"""Simulate a fire on the 11-bus grid and compare per-period MLEs with the truth.

    python3 demos/fire_estimates.py [horizon]
"""

import sys

import numpy as np

from bushfire_opf.estimation import estimate_trajectory
from bushfire_opf.fire import random_origins, simulate_trajectory
from bushfire_opf.harness import ieee_configs, sequence_schedule


def main(horizon: int = 60) -> None:
    cfg = ieee_configs()["ieee11"]
    g = cfg.grid()
    schedule = sequence_schedule(cfg, 0, g.n_areas)
    rng = np.random.default_rng(1)
    states = simulate_trajectory(g, random_origins(g, 1, rng), schedule, horizon, rng)
    estimates = estimate_trajectory(g, states)
    print(" t  burning  p+ true  p+ hat   p- true  p- hat")
    for st, est in zip(states[1:], estimates[1:]):
        truth = schedule.at(st.t - 1)
        print(f"{st.t:3d} {st.count:8d}  {truth.p_plus[0]:.3f}   {est.p_plus[0]:.3f}    "
              f"{truth.p_minus[0]:.3f}   {est.p_minus[0]:.3f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 60)
