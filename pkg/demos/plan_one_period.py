"""Plan the 11-bus feeder one period ahead with a fire burning next to bus 1.

Prints the functional probabilities, the chosen dispatch, and how the plan
changes when the spread probability is misjudged.  Bus 1 is the slack of
the feeder; the planning LP carries no balance row, so once bus 1 is likely
to fail the optimal plan routes the system deficit through it instead of
generating.

    python3 demos/plan_one_period.py
"""

import numpy as np

from bushfire_opf.fire import SpreadParams
from bushfire_opf.harness import ieee_configs
from bushfire_opf.network import ExposureModel, all_scenario_weights
from bushfire_opf.opf import StochasticOPF


def main() -> None:
    cfg = ieee_configs()["ieee11"]
    net, g = cfg.load_network(), cfg.grid()
    x, y = net.buses[0].node
    burning = g.mask([(x + 4, y), (x + 4, y + 1), (x + 5, y)])
    ex = ExposureModel(net, g).exposure(burning)
    model = StochasticOPF(net, cfg.shed_cost)
    truth = SpreadParams.constant(0.5, 0.2)
    p_bus, p_line = ex.probabilities(truth)
    rho = all_scenario_weights(net, p_line)
    print("bus functional probabilities:", np.round(p_bus, 3))
    best = model.solve(p_bus, rho, ~ex.bus_ok, ~ex.line_ok)
    print("dispatch with the true parameters:", np.round(best.alpha, 3),
          f"expected cost {model.expected_cost(best, p_bus, rho):.3f}")
    for guess in (0.05, 0.95):
        gb, gl = ex.probabilities(SpreadParams.constant(guess, 0.2))
        plan = model.solve(gb, all_scenario_weights(net, gl), ~ex.bus_ok, ~ex.line_ok)
        print(f"dispatch assuming p+={guess}:", np.round(plan.alpha, 3),
              f"expected cost under the truth {model.expected_cost(plan, p_bus, rho):.3f}")


if __name__ == "__main__":
    main()
