"""Built-in four-agent example (sampled at h = 0.37, |u| <= 1)."""

from __future__ import annotations

import numpy as np

H = 0.37

A = [
    [[1, 0.3548, 0.0594], [0, 0.8812, 0.2954], [0, -0.5908, 0.5858]],
    [[1, 0.3538, 0.0263], [0, 0.8946, 0.09], [0, -0.3614, -0.0089]],
    [[1, 0.3036, 0.0487], [0, 0.5134, 0.2062], [0, -2.0623, 0.1009]],
    [[1, 0.363, 0.0537], [0, 0.9463, 0.2556], [0, -0.2556, 0.4352]],
]
B = [
    [0.0076, 0.0594, 0.2954],
    [0.0081, 0.0527, 0.1951],
    [0.0066, 0.0487, 0.2062],
    [0.007, 0.0537, 0.2556],
]
C = [1.0, 0.0, 0.0]
K = [
    [-2.3923, -4.99, -4.4074],
    [-3.8504, -8.9397, -2.9527],
    [-3.1011, 0.9655, -3.8339],
    [-2.7975, -7.1542, -4.4122],
]
Q = [[1.0, 0.0]]

# Values printed alongside the data; kept for comparison only.
PRINTED_PI = [[1, 0], [0, 1], [0, 0]]
PRINTED_GAMMA = [[0, 2], [0, 2], [0, 10], [0, 1]]
PRINTED_L = [[2.3923, 6.999], [3.8504, 10.9397], [3.1011, 9.0345], [2.7975, 8.1542]]
PRINTED_W2 = [0.5, 0.5, 0.1, 1.0]

# Cyclic graphs: (receiver, sender, weight), 1-based as printed.
GRAPHS = [
    [(2, 3, 0.4)],
    [(3, 4, 0.4)],
    [(4, 1, 0.4)],
    [(1, 2, 0.4)],
]

X0_S1 = [
    [23, -0.5, -0.2],
    [22, -0.3, -0.1],
    [35, -0.3, 0.22],
    [54.5327, -33.0192, 28.2356],
]
W0 = [
    [32.4774, 0.3968],
    [9.4451, 0.4],
    [28.9, 0.0793],
    [42.6538, 0.8],
]
X3_S2 = [47, -45, -32]


def initial_states(name: str) -> list[list[float]]:
    x0 = [list(map(float, x)) for x in X0_S1]
    if name == "paper-s2":
        x0[2] = list(map(float, X3_S2))
    elif name != "paper-s1":
        raise KeyError(f"unknown built-in scenario {name!r}")
    return x0


def config_dict(name: str = "paper-s1", horizon: int = 500) -> dict:
    """The built-in scenario as a run-config document (see config schema)."""
    x0 = initial_states(name)
    return {
        "name": name,
        "reference": {"h": H, "Q": Q},
        "agents": [
            {
                "name": f"agent{i + 1}",
                "A": A[i],
                "B": [[b] for b in B[i]],
                "C": [C],
                "u_bounds": {"lo": [-1.0], "hi": [1.0]},
                "K": [K[i]],
                "x0": x0[i],
                "w0": W0[i],
            }
            for i in range(4)
        ],
        "mcai": {"eps": 0.01, "delta": 0.005, "max_horizon": 1000},
        "graph": {
            "n_nodes": 4,
            "graphs": [[{"to": a, "from": b, "weight": w} for a, b, w in g] for g in GRAPHS],
            "switching": {"kind": "cyclic", "period": 1},
            "window": 4,
            "weight_floor": 0.1,
        },
        "horizon": horizon,
        "seed": 0,
        "settle_steps": 20,
    }


def printed_arrays():
    return (np.array(PRINTED_PI, dtype=float),
            [np.array([g], dtype=float) for g in PRINTED_GAMMA],
            [np.array([l], dtype=float) for l in PRINTED_L])
