import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from alaam.network import BIPARTITE, DIRECTED, UNDIRECTED, AttributeTable, Network  # noqa: E402


def random_network(rng, kind, n, p=0.3):
    if kind == BIPARTITE:
        m = max(1, min(n - 1, n // 2))
        edges = [(i, j) for i in range(m) for j in range(m, n) if rng.random() < p]
        return Network(kind, n, edges, mode_a_size=m)
    if kind == DIRECTED:
        edges = [(i, j) for i in range(n) for j in range(n) if i != j and rng.random() < p]
    else:
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return Network(kind, n, edges)


def random_attrs(rng, n, na_rate=0.1):
    b = (rng.random(n) < 0.5).astype(float)
    c = rng.normal(size=n)
    g = rng.integers(0, 3, size=n)
    b[rng.random(n) < na_rate] = np.nan
    c[rng.random(n) < na_rate] = np.nan
    g[rng.random(n) < na_rate] = -1
    return AttributeTable(n, binary={"b": b}, continuous={"c": c}, categorical={"g": g})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_undirected():
    # 0-1-2 triangle plus pendant 3 on 2 and isolated 4
    return Network(UNDIRECTED, 5, [(0, 1), (1, 2), (0, 2), (2, 3)])


@pytest.fixture
def tiny_directed():
    return Network(DIRECTED, 4, [(0, 1), (1, 0), (1, 2), (3, 2)])


def catalogue_effects(kind):
    """Every catalogue effect that binds to a ``kind`` network with random_attrs."""
    from alaam.effects import CATALOGUE, EffectSpec

    attr_for = {"binary": "b", "continuous": "c", "categorical": "g"}
    out = []
    for name, info in CATALOGUE.items():
        if kind not in info.networks:
            continue
        if info.attr_kind:
            out.append(EffectSpec(name, attr_for[info.attr_kind]))
        elif info.decay:
            out.append(EffectSpec(name, decay=0.7))
        else:
            out.append(EffectSpec(name))
    # keep Density first so no intercept warning fires
    return sorted(out, key=lambda e: e.kind != "Density")


def random_outcome(rng, net, na_rate=0.0):
    from alaam.network import FIXED_NA

    y = (rng.random(net.num_nodes) < 0.5).astype(np.int8)
    y[rng.random(net.num_nodes) < na_rate] = FIXED_NA
    if net.kind == BIPARTITE:
        y[net.mode_a_size:] = FIXED_NA
    return y


def ten_node_problem():
    """Fixed 10-node undirected problem with its exact-enumeration oracle."""
    from alaam.effects import EffectSpec, Model
    from alaam.network import OutcomeVector
    from oracles import Enumeration

    rng = np.random.default_rng(5)
    n = 10
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.35]
    net = Network(UNDIRECTED, n, edges)
    attrs = AttributeTable(n, binary={"b": (rng.random(n) < 0.5).astype(float)})
    effects = [EffectSpec("Density"), EffectSpec("Contagion"), EffectSpec("oOb", "b")]
    model = Model(effects, net, attrs)
    y = np.zeros(n, np.int8)
    y[rng.choice(n, 4, replace=False)] = 1
    observed = OutcomeVector(y)
    enum = Enumeration(net, attrs, effects, y, range(n))
    return model, observed, enum


def write_problem(directory):
    """Write the 10-node problem as input files; returns common CLI flags."""
    from alaam.network import write_attributes, write_network, write_outcome

    model, observed, _ = ten_node_problem()
    write_network(model.net, directory / "net.txt")
    write_attributes(model.attrs.binary, "binary", directory / "bin.txt")
    write_outcome(observed, directory / "y.txt")
    return ["--network", str(directory / "net.txt"), "--kind", "undirected", "--outcome", str(directory / "y.txt"),
            "--attrs", f"binary={directory / 'bin.txt'}", "--model", "Density, Contagion, oOb:b"]


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    log = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})"
        log.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
