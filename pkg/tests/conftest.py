import numpy as np
import pytest

from bushfire_opf.network import network_from_dict


def make_network(buses, lines, d_bar=1):
    """``buses``: (id, x, y, kind, load, cap, cost); ``lines``: (a, b, reactance, flow_cap[, path])."""
    data = {
        "d_bar": d_bar,
        "buses": [dict(id=i, x=x, y=y, kind=k, load=l, capacity=u, cost=c) for i, x, y, k, l, u, c in buses],
        "lines": [
            {"from": ln[0], "to": ln[1], "reactance": ln[2], "flow_cap": ln[3], "line_cost": 1.0,
             "path": ln[4] if len(ln) > 4 else "auto"}
            for ln in lines
        ],
    }
    return network_from_dict(data)


@pytest.fixture
def pair_net():
    """One generator (cap 4, cost 10) feeding one consumer (load 3) over a cap-4 line."""
    return make_network([(1, 2, 5, "generator", 0.0, 4.0, 10.0), (2, 8, 5, "consumer", 3.0, 0.0, 0.0)],
                        [(1, 2, 0.1, 4.0)])


@pytest.fixture
def three_bus_net():
    """Generator at bus 1 serving consumers 2 and 3 along a chain of two lines."""
    return make_network(
        [(1, 3, 5, "generator", 0.0, 8.0, 6.0), (2, 8, 5, "consumer", 2.0, 0.0, 0.0),
         (3, 13, 5, "consumer", 1.5, 0.0, 0.0)],
        [(1, 2, 0.1, 4.0), (2, 3, 0.2, 4.0)],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
