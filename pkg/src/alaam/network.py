"""Network, attribute, outcome and snowball-zone data model.

Graphs are stored as a list of per-node dictionaries mapping neighbour id to
``True`` (a "dictionary of dictionaries"), giving O(1) expected edge tests and
O(degree) neighbour iteration.  Node ids are dense ``0..N-1`` internally; all
file formats use 1-based ids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import (
    BipartiteEdgeError,
    DataError,
    HeaderError,
    NodeIdError,
    SelfLoopError,
)

UNDIRECTED = "undirected"
DIRECTED = "directed"
BIPARTITE = "bipartite"
KINDS = (UNDIRECTED, DIRECTED, BIPARTITE)

FIXED_NA = -1
NA_TOKEN = "NA"


class Network:
    """Immutable simple graph: undirected, directed, or two-mode (bipartite).

    For bipartite networks nodes ``0..mode_a_size-1`` are mode A and the rest
    are mode B; edges only join the two modes.
    """

    def __init__(
        self,
        kind: str,
        num_nodes: int,
        edges: Iterable[tuple[int, int]] = (),
        mode_a_size: int | None = None,
    ):
        if kind not in KINDS:
            raise ValueError(f"unknown network kind {kind!r}")
        if num_nodes < 1:
            raise ValueError("network must have at least one node")
        if kind == BIPARTITE:
            if mode_a_size is None or not 0 < mode_a_size < num_nodes:
                raise ValueError("bipartite network needs 0 < mode_a_size < num_nodes")
        elif mode_a_size is not None:
            raise ValueError("mode_a_size is only meaningful for bipartite networks")
        self._kind = kind
        self._n = int(num_nodes)
        self._mode_a = None if mode_a_size is None else int(mode_a_size)
        self._out: list[dict[int, bool]] = [{} for _ in range(self._n)]
        # undirected graphs share one map for both directions
        self._in = [{} for _ in range(self._n)] if kind == DIRECTED else self._out
        for i, j in edges:
            self._add(int(i), int(j))
        self._num_edges = sum(len(d) for d in self._out)
        if kind != DIRECTED:
            self._num_edges //= 2

    def _add(self, i: int, j: int) -> None:
        n = self._n
        if not (0 <= i < n and 0 <= j < n):
            raise NodeIdError(f"node id out of range in edge ({i}, {j})")
        if i == j:
            raise SelfLoopError(f"self-loop on node {i}")
        if self._kind == BIPARTITE and self.is_mode_a(i) == self.is_mode_a(j):
            raise BipartiteEdgeError(f"edge ({i}, {j}) joins two nodes of the same mode")
        self._out[i][j] = True
        self._in[j][i] = True

    @property
    def kind(self) -> str:
        return self._kind

    @property
    def directed(self) -> bool:
        return self._kind == DIRECTED

    @property
    def num_nodes(self) -> int:
        return self._n

    @property
    def mode_a_size(self) -> int | None:
        return self._mode_a

    @property
    def num_edges(self) -> int:
        return self._num_edges

    def is_mode_a(self, i: int) -> bool:
        return self._mode_a is None or i < self._mode_a

    def is_edge(self, i: int, j: int) -> bool:
        """True if ``i`` and ``j`` are adjacent (for digraphs: arc ``i -> j``)."""
        return j in self._out[i]

    is_arc = is_edge

    def neighbours(self, i: int):
        """Neighbours of ``i`` (out-neighbours for a digraph)."""
        return self._out[i].keys()

    def out_neighbours(self, i: int):
        return self._out[i].keys()

    def in_neighbours(self, i: int):
        return self._in[i].keys()

    def degree(self, i: int) -> int:
        if self._kind == DIRECTED:
            return len(self._out[i]) + len(self._in[i])
        return len(self._out[i])

    def out_degree(self, i: int) -> int:
        return len(self._out[i])

    def in_degree(self, i: int) -> int:
        return len(self._in[i])

    def edges(self) -> Iterator[tuple[int, int]]:
        """Edges in sorted order; undirected edges are reported once as (min, max)."""
        for i in range(self._n):
            for j in sorted(self._out[i]):
                if self._kind == DIRECTED or i < j:
                    yield i, j

    def __repr__(self) -> str:
        extra = f", mode_a_size={self._mode_a}" if self._mode_a is not None else ""
        return f"Network({self._kind!r}, num_nodes={self._n}, edges={self._num_edges}{extra})"


class TwoPathMatrix:
    """Sparse counts of two-paths between node pairs, built once per network.

    For undirected and bipartite networks ``count(i, j) = |N(i) & N(j)|``;
    for directed networks it is the number of paths ``i -> k -> j``.  Zero
    entries are not stored.
    """

    def __init__(self, net: Network):
        counts: list[dict[int, int]] = [{} for _ in range(net.num_nodes)]
        for k in range(net.num_nodes):
            if net.directed:
                tails, heads = list(net.in_neighbours(k)), list(net.out_neighbours(k))
            else:
                tails = heads = list(net.neighbours(k))
            for i in tails:
                row = counts[i]
                for j in heads:
                    if i != j:
                        row[j] = row.get(j, 0) + 1
        self._counts = counts

    def count(self, i: int, j: int) -> int:
        return self._counts[i].get(j, 0)

    def row(self, i: int) -> dict[int, int]:
        """Non-zero entries ``{j: count}`` for row ``i`` (read-only by contract)."""
        return self._counts[i]

    def nnz(self) -> int:
        return sum(len(r) for r in self._counts)


@dataclass(frozen=True)
class AttributeTable:
    """Nodal covariates by kind.

    Binary and continuous values are float arrays using NaN for NA; categorical
    values are int arrays using -1 for NA.
    """

    num_nodes: int
    binary: dict[str, np.ndarray] = field(default_factory=dict)
    continuous: dict[str, np.ndarray] = field(default_factory=dict)
    categorical: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for table in (self.binary, self.continuous, self.categorical):
            for name, values in table.items():
                if name in seen:
                    raise DataError(f"duplicate attribute name {name!r}")
                seen.add(name)
                if len(values) != self.num_nodes:
                    raise DataError(
                        f"attribute {name!r} has {len(values)} values, expected {self.num_nodes}"
                    )

    def kind_of(self, name: str) -> str | None:
        for kind, table in self._tables():
            if name in table:
                return kind
        return None

    def _tables(self):
        return (("binary", self.binary), ("continuous", self.continuous), ("categorical", self.categorical))

    def merge(self, other: "AttributeTable") -> "AttributeTable":
        if other.num_nodes != self.num_nodes:
            raise DataError("attribute tables have different node counts")
        # duplicate names across either table are rejected by __post_init__
        for (_, mine), (_, theirs) in zip(self._tables(), other._tables()):
            dup = set(mine) & set(theirs)
            if dup:
                raise DataError(f"duplicate attribute name(s) {sorted(dup)}")
        return AttributeTable(
            self.num_nodes,
            {**self.binary, **other.binary},
            {**self.continuous, **other.continuous},
            {**self.categorical, **other.categorical},
        )


class OutcomeVector:
    """Binary outcome per node with structural NA entries.

    ``values`` holds 0, 1 or ``FIXED_NA``.  ``free_nodes`` are the nodes a
    sampler may toggle: never NA nodes and, under snowball conditioning, never
    nodes of the outermost wave.
    """

    def __init__(self, values, free_nodes=None):
        values = np.asarray(values, dtype=np.int8).copy()
        if values.ndim != 1:
            raise ValueError("outcome must be one-dimensional")
        if not np.isin(values, (0, 1, FIXED_NA)).all():
            raise ValueError("outcome values must be 0, 1 or FIXED_NA")
        if free_nodes is None:
            free_nodes = np.flatnonzero(values != FIXED_NA)
        free_nodes = np.unique(np.asarray(free_nodes, dtype=np.int64))
        if free_nodes.size and (values[free_nodes] == FIXED_NA).any():
            raise ValueError("FIXED_NA nodes cannot be free")
        self.values = values
        self.free_nodes = free_nodes

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, OutcomeVector)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.free_nodes, other.free_nodes)
        )

    @property
    def active(self) -> np.ndarray:
        """Ids of nodes with outcome 1."""
        return np.flatnonzero(self.values == 1)

    def indicator(self) -> np.ndarray:
        """0/1 int8 vector with NA mapped to 0."""
        return (self.values == 1).astype(np.int8)

    def incidence(self) -> float:
        """Fraction of free nodes with outcome 1 (0.0 when nothing is free)."""
        if not self.free_nodes.size:
            return 0.0
        return float((self.values[self.free_nodes] == 1).mean())

    def with_values(self, values) -> "OutcomeVector":
        """Same free set, different values (NA positions must not change)."""
        values = np.asarray(values, dtype=np.int8)
        if not np.array_equal(values == FIXED_NA, self.values == FIXED_NA):
            raise ValueError("NA pattern must be preserved")
        return OutcomeVector(values, self.free_nodes)

    def __repr__(self) -> str:
        return f"OutcomeVector(n={len(self)}, active={int((self.values == 1).sum())}, free={self.free_nodes.size})"


@dataclass(frozen=True)
class ZoneAssignment:
    """Snowball wave index of each node (0 = seeds)."""

    zone: np.ndarray

    @property
    def max_zone(self) -> int:
        return int(self.zone.max()) if self.zone.size else 0

    def inner_nodes(self) -> np.ndarray:
        """Nodes whose outcome is free under snowball conditioning."""
        return np.flatnonzero(self.zone < self.max_zone)

    def validate(self, net: Network) -> None:
        if len(self.zone) != net.num_nodes:
            raise DataError(f"zone file has {len(self.zone)} rows, network has {net.num_nodes} nodes")
        for i, j in net.edges():
            if abs(int(self.zone[i]) - int(self.zone[j])) > 1:
                raise DataError(
                    f"edge ({i + 1}, {j + 1}) spans zones {self.zone[i]} and {self.zone[j]}"
                )


def bind_outcome(net: Network, outcome: OutcomeVector, zones: ZoneAssignment | None = None) -> OutcomeVector:
    """Check an outcome against a network and apply snowball conditioning.

    Bipartite outcomes must be NA on every mode-B node.  With zones, only
    nodes of waves before the outermost remain free.
    """
    if len(outcome) != net.num_nodes:
        raise DataError(f"outcome has {len(outcome)} entries, network has {net.num_nodes} nodes")
    if net.kind == BIPARTITE:
        mode_b = outcome.values[net.mode_a_size:]
        if (mode_b != FIXED_NA).any():
            first = net.mode_a_size + int(np.flatnonzero(mode_b != FIXED_NA)[0])
            raise DataError(f"bipartite outcome must be NA on mode B (node {first + 1} is not)")
    free = outcome.free_nodes
    if zones is not None:
        zones.validate(net)
        free = np.intersect1d(free, zones.inner_nodes())
    return OutcomeVector(outcome.values, free)


# ---------------------------------------------------------------------------
# file formats


def _content_lines(path):
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            yield lineno, line


def load_network(path, kind: str) -> Network:
    """Read a Pajek-style edge list.

    ``*vertices N`` (``*vertices N M`` for bipartite, M = mode-A size), then
    ``*edges`` (undirected, bipartite) or ``*arcs`` (directed), then one
    1-based ``i j`` pair per line.
    """
    if kind not in KINDS:
        raise DataError(f"unknown network kind {kind!r}", path)
    lines = _content_lines(path)
    try:
        lineno, line = next(lines)
    except StopIteration:
        raise HeaderError("empty network file", path) from None
    tokens = line.split()
    if tokens[0].lower() != "*vertices" or len(tokens) not in (2, 3):
        raise HeaderError(f"expected '*vertices N', got {line!r}", path, lineno)
    try:
        sizes = [int(t) for t in tokens[1:]]
    except ValueError:
        raise HeaderError(f"non-integer vertex count in {line!r}", path, lineno) from None
    n = sizes[0]
    if n < 1:
        raise HeaderError("vertex count must be positive", path, lineno)
    mode_a = None
    if kind == BIPARTITE:
        if len(sizes) != 2 or not 0 < sizes[1] < n:
            raise HeaderError("bipartite network needs '*vertices N M' with 0 < M < N", path, lineno)
        mode_a = sizes[1]
    elif len(sizes) != 1:
        raise HeaderError(f"'*vertices N M' is only valid for bipartite networks", path, lineno)

    try:
        lineno, line = next(lines)
    except StopIteration:
        raise HeaderError("missing '*edges' or '*arcs' line", path) from None
    want = "*arcs" if kind == DIRECTED else "*edges"
    if line.lower() != want:
        raise HeaderError(f"expected {want!r} for a {kind} network, got {line!r}", path, lineno)

    net = Network(kind, n, mode_a_size=mode_a)
    for lineno, line in lines:
        tokens = line.split()
        if len(tokens) != 2:
            raise DataError(f"expected 'i j', got {line!r}", path, lineno)
        try:
            i, j = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise DataError(f"non-integer node id in {line!r}", path, lineno) from None
        for v in (i, j):
            if not 1 <= v <= n:
                raise NodeIdError(f"node id {v} outside 1..{n}", path, lineno)
        try:
            net._add(i - 1, j - 1)
        except SelfLoopError:
            raise SelfLoopError(f"self-loop on node {i}", path, lineno) from None
        except BipartiteEdgeError:
            raise BipartiteEdgeError(f"edge ({i}, {j}) joins two nodes of the same mode", path, lineno) from None
    net._num_edges = sum(len(d) for d in net._out) // (1 if kind == DIRECTED else 2)
    return net


def write_network(net: Network, path) -> None:
    with open(path, "w") as f:
        if net.kind == BIPARTITE:
            f.write(f"*vertices {net.num_nodes} {net.mode_a_size}\n")
        else:
            f.write(f"*vertices {net.num_nodes}\n")
        f.write("*arcs\n" if net.directed else "*edges\n")
        for i, j in net.edges():
            f.write(f"{i + 1} {j + 1}\n")


def _parse_value(token: str, kind: str):
    if token == NA_TOKEN:
        return math.nan if kind != "categorical" else -1
    if kind == "binary":
        if token not in ("0", "1"):
            raise ValueError(f"binary value must be 0, 1 or NA, got {token!r}")
        return float(token)
    if kind == "continuous":
        value = float(token)
        if not math.isfinite(value):
            raise ValueError(f"continuous value must be finite, got {token!r}")
        return value
    value = int(token)
    if value < 0:
        raise ValueError(f"categorical value must be a non-negative integer, got {token!r}")
    return value


def load_attributes(path, kind: str, num_nodes: int | None = None) -> AttributeTable:
    """Read a whitespace-separated attribute table: header line, one row per node."""
    if kind not in ("binary", "continuous", "categorical"):
        raise DataError(f"unknown attribute kind {kind!r}", path)
    lines = list(_content_lines(path))
    if not lines:
        raise DataError("empty attribute file", path)
    header_line, header = lines[0]
    names = header.split()
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise DataError(f"duplicate column name(s) {dup}", path, header_line)
    columns: list[list] = [[] for _ in names]
    for lineno, line in lines[1:]:
        tokens = line.split()
        if len(tokens) != len(names):
            raise DataError(f"expected {len(names)} values, got {len(tokens)}", path, lineno)
        for col, token in zip(columns, tokens):
            try:
                col.append(_parse_value(token, kind))
            except ValueError as e:
                raise DataError(str(e), path, lineno) from None
    rows = len(lines) - 1
    if num_nodes is not None and rows != num_nodes:
        raise DataError(f"attribute file has {rows} rows, network has {num_nodes} nodes", path)
    dtype = np.int64 if kind == "categorical" else np.float64
    table = {name: np.array(col, dtype=dtype) for name, col in zip(names, columns)}
    return AttributeTable(rows, **{kind: table})


def write_attributes(table: dict[str, np.ndarray], kind: str, path) -> None:
    names = list(table)
    with open(path, "w") as f:
        f.write(" ".join(names) + "\n")
        n = len(table[names[0]]) if names else 0
        for i in range(n):
            f.write(" ".join(_format_attr(table[name][i], kind) for name in names) + "\n")


def _format_attr(value, kind: str) -> str:
    if kind == "categorical":
        return NA_TOKEN if value < 0 else str(int(value))
    if math.isnan(value):
        return NA_TOKEN
    if kind == "binary":
        return str(int(value))
    return repr(float(value))


def _single_column(path, what):
    values = []
    for lineno, line in _content_lines(path):
        tokens = line.split()
        if len(tokens) != 1:
            raise DataError(f"{what} file must have one value per line, got {line!r}", path, lineno)
        values.append((lineno, tokens[0]))
    return values


def load_outcome(path, num_nodes: int | None = None) -> OutcomeVector:
    """Read a one-column outcome file of 0 / 1 / NA tokens."""
    values = []
    for lineno, token in _single_column(path, "outcome"):
        if token == NA_TOKEN:
            values.append(FIXED_NA)
        elif token in ("0", "1"):
            values.append(int(token))
        else:
            raise DataError(f"outcome value must be 0, 1 or NA, got {token!r}", path, lineno)
    if num_nodes is not None and len(values) != num_nodes:
        raise DataError(f"outcome file has {len(values)} rows, network has {num_nodes} nodes", path)
    return OutcomeVector(values)


def write_outcome(outcome: OutcomeVector, path) -> None:
    with open(path, "w") as f:
        for v in outcome.values:
            f.write(NA_TOKEN + "\n" if v == FIXED_NA else f"{int(v)}\n")


def load_zones(path, num_nodes: int | None = None) -> ZoneAssignment:
    """Read a one-column file of non-negative snowball wave indices."""
    values = []
    for lineno, token in _single_column(path, "zone"):
        try:
            z = int(token)
        except ValueError:
            raise DataError(f"zone must be a non-negative integer, got {token!r}", path, lineno) from None
        if z < 0:
            raise DataError(f"zone must be a non-negative integer, got {token!r}", path, lineno)
        values.append(z)
    if num_nodes is not None and len(values) != num_nodes:
        raise DataError(f"zone file has {len(values)} rows, network has {num_nodes} nodes", path)
    return ZoneAssignment(np.array(values, dtype=np.int64))


def build_two_path_matrix(net: Network) -> TwoPathMatrix:
    return TwoPathMatrix(net)


def load_attribute_files(specs: Iterable[tuple[str, str | Path]], num_nodes: int) -> AttributeTable:
    """Load and merge several ``(kind, path)`` attribute files."""
    table = AttributeTable(num_nodes)
    for kind, path in specs:
        table = table.merge(load_attributes(path, kind, num_nodes))
    return table
