"""Model specification and change statistics.

Every change statistic is a function ``change_X(net, A, i)`` returning the
change in statistic X when the outcome of node ``i`` is switched from 0 to 1.
It is a precondition that ``A[i] == 0``.  ``A`` is an outcome value array in
which ``FIXED_NA`` entries never count as having the outcome.  Effects that
need an attribute, a decay value, or the two-path cache get them bound with
:func:`functools.partial` so that every bound function has the same
``(net, A, i)`` signature.

For the compiled sampler each effect is also decomposed as::

    delta_k(i) = static[i, k] + sum_u L_k(i, u) y_u + sum_{u<v} Q_k(i, u, v) y_u y_v

(see :class:`CompiledModel`); the decomposition is tested against the
reference functions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property, partial
from typing import Callable, Sequence

import numpy as np

from .errors import ModelError
from .network import (
    BIPARTITE,
    DIRECTED,
    FIXED_NA,
    UNDIRECTED,
    AttributeTable,
    Network,
    OutcomeVector,
    TwoPathMatrix,
)

ChangeStat = Callable[[Network, np.ndarray, int], float]


# ---------------------------------------------------------------------------
# structural change statistics


def change_density(net, A, i):
    """Density (incidence): number of nodes with the outcome.

        O
    """
    return 1


def change_activity(net, A, i):
    """Activity: outcome node weighted by its degree.

        O--o
    """
    return net.degree(i)


def change_contagion(net, A, i):
    """Contagion: adjacent pairs both with the outcome.

        O--O

    On digraphs every arc between two outcome nodes counts once, so a mutual
    pair counts twice.
    """
    if net.directed:
        return (sum(1 for u in net.out_neighbours(i) if A[u] == 1)
                + sum(1 for u in net.in_neighbours(i) if A[u] == 1))
    return sum(1 for u in net.neighbours(i) if A[u] == 1)


def change_gw_activity(alpha, net, A, i):
    """Geometrically weighted activity with decay ``alpha``.

    The change is exp(alpha) * (1 - (1 - exp(-alpha))**d_i), which grows with
    the degree but is bounded above by exp(alpha).
    """
    return math.exp(alpha) * (1.0 - (1.0 - math.exp(-alpha)) ** net.degree(i))


def change_triangle_t1(net, A, i, twopath=None):
    """TriangleT1: triangles in which the ego has the outcome.

          o
         / \\
        O---o
    """
    if twopath is not None:
        return sum(twopath.count(i, u) for u in net.neighbours(i)) // 2
    nbrs = list(net.neighbours(i))
    count = 0
    for a in range(len(nbrs)):
        u = nbrs[a]
        for v in nbrs[a + 1:]:
            if net.is_edge(u, v):
                count += 1
    return count


def change_triangle_t2(net, A, i, twopath=None):
    """TriangleT2: triangles counted by their edges joining two outcome nodes.

          O
         / \\
        O---o
    """
    if twopath is not None:
        return sum(twopath.count(i, u) for u in net.neighbours(i) if A[u] == 1)
    count = 0
    for u in net.neighbours(i):
        if A[u] == 1:
            count += sum(1 for v in net.neighbours(i) if v != u and net.is_edge(u, v))
    return count


def change_triangle_t3(net, A, i, twopath=None):
    """TriangleT3: triangles in which all three nodes have the outcome.

          O
         / \\
        O---O
    """
    active = [u for u in net.neighbours(i) if A[u] == 1]
    count = 0
    for a in range(len(active)):
        u = active[a]
        if twopath is not None and twopath.count(i, u) == 0:
            continue
        for v in active[a + 1:]:
            if net.is_edge(u, v):
                count += 1
    return count


def change_sender(net, A, i):
    """Sender: out-arcs from outcome nodes.  O->o"""
    return net.out_degree(i)


def change_receiver(net, A, i):
    """Receiver: in-arcs to outcome nodes.  O<-o"""
    return net.in_degree(i)


def change_ego_in_two_star(net, A, i):
    """EgoInTwoStar: pairs of in-arcs to an outcome node.  o->O<-o"""
    d = net.in_degree(i)
    return d * (d - 1) // 2


def change_ego_out_two_star(net, A, i):
    """EgoOutTwoStar: pairs of out-arcs from an outcome node.  o<-O->o"""
    d = net.out_degree(i)
    return d * (d - 1) // 2


def change_reciprocity(net, A, i):
    """Reciprocity: mutual ties of outcome nodes.  O<->o"""
    delta = 0
    for u in net.out_neighbours(i):
        if net.is_arc(u, i):
            delta += 1
    return delta


def change_contagion_reciprocity(net, A, i):
    """Contagion reciprocity (mutual contagion): mutual ties between outcome nodes.  O<->O"""
    delta = 0
    for u in net.out_neighbours(i):
        if net.is_arc(u, i) and A[u] == 1:
            delta += 1
    return delta


def change_two_path_contagion(twopath, net, A, i):
    """Bipartite two-path contagion: mode-A pairs with the outcome, weighted
    by the number of shared mode-B neighbours.

        O--b--O
    """
    return sum(c for u, c in twopath.row(i).items() if A[u] == 1)


# ---------------------------------------------------------------------------
# attribute change statistics (bind the value array with partial)


def _value(values, u):
    v = values[u]
    return 0.0 if v != v else v  # NaN is NA


def change_oOb(values, net, A, i):
    """Outcome with a binary covariate on the same node (NA counts 0)."""
    return _value(values, i)


def change_oOc(values, net, A, i):
    """Outcome with a continuous covariate on the same node (NA counts 0)."""
    return _value(values, i)


def _tie_neighbours(net, i):
    if net.directed:
        yield from net.out_neighbours(i)
        yield from net.in_neighbours(i)
    else:
        yield from net.neighbours(i)


def change_partner_oOc(values, net, A, i):
    """Outcome node weighted by the sum of its partners' continuous covariate.

    NA partner values count 0; on digraphs each arc counts once.
    """
    return sum(_value(values, u) for u in _tie_neighbours(net, i))


def change_oO_Osame(categories, net, A, i):
    """Adjacent outcome nodes with the same categorical covariate.

        O--O  (same category)

    NA matches nothing; on digraphs each arc counts once.
    """
    ci = categories[i]
    if ci < 0:
        return 0
    return sum(1 for u in _tie_neighbours(net, i) if A[u] == 1 and categories[u] == ci)


# ---------------------------------------------------------------------------
# catalogue


@dataclass(frozen=True)
class _Kind:
    func: Callable
    networks: tuple[str, ...]
    attr_kind: str | None = None
    decay: bool = False
    two_path: bool = False


CATALOGUE: dict[str, _Kind] = {
    "Density": _Kind(change_density, (UNDIRECTED, DIRECTED, BIPARTITE)),
    "Activity": _Kind(change_activity, (UNDIRECTED, BIPARTITE)),
    "Contagion": _Kind(change_contagion, (UNDIRECTED, DIRECTED)),
    "oOb": _Kind(change_oOb, (UNDIRECTED, DIRECTED, BIPARTITE), attr_kind="binary"),
    "oOc": _Kind(change_oOc, (UNDIRECTED, DIRECTED, BIPARTITE), attr_kind="continuous"),
    "oO_Osame": _Kind(change_oO_Osame, (UNDIRECTED, DIRECTED), attr_kind="categorical"),
    "partner-oOc": _Kind(change_partner_oOc, (UNDIRECTED, DIRECTED), attr_kind="continuous"),
    "GWActivity": _Kind(change_gw_activity, (UNDIRECTED,), decay=True),
    "TriangleT1": _Kind(change_triangle_t1, (UNDIRECTED,), two_path=True),
    "TriangleT2": _Kind(change_triangle_t2, (UNDIRECTED,), two_path=True),
    "TriangleT3": _Kind(change_triangle_t3, (UNDIRECTED,), two_path=True),
    "Sender": _Kind(change_sender, (DIRECTED,)),
    "Receiver": _Kind(change_receiver, (DIRECTED,)),
    "EgoInTwoStar": _Kind(change_ego_in_two_star, (DIRECTED,)),
    "EgoOutTwoStar": _Kind(change_ego_out_two_star, (DIRECTED,)),
    "Reciprocity": _Kind(change_reciprocity, (DIRECTED,)),
    "ContagionReciprocity": _Kind(change_contagion_reciprocity, (DIRECTED,)),
    "TwoPathContagion": _Kind(change_two_path_contagion, (BIPARTITE,), two_path=True),
}


@dataclass(frozen=True)
class EffectSpec:
    """One model term: effect kind plus optional attribute name or decay."""

    kind: str
    attr: str | None = None
    decay: float | None = None

    def __post_init__(self):
        info = CATALOGUE.get(self.kind)
        if info is None:
            raise ModelError(f"unknown effect {self.kind!r}")
        if (info.attr_kind is not None) != (self.attr is not None):
            if self.attr is None:
                raise ModelError(f"effect {self.kind} needs an attribute name ({self.kind}:name)")
            raise ModelError(f"effect {self.kind} takes no attribute")
        if info.decay != (self.decay is not None):
            if self.decay is None:
                raise ModelError(f"effect {self.kind} needs a decay value ({self.kind}:alpha)")
            raise ModelError(f"effect {self.kind} takes no decay value")
        if self.decay is not None and not (self.decay > 0 and math.isfinite(self.decay)):
            raise ModelError(f"decay must be positive, got {self.decay}")

    @property
    def name(self) -> str:
        if self.attr is not None:
            return f"{self.kind}:{self.attr}"
        if self.decay is not None:
            return f"{self.kind}:{self.decay!r}"
        return self.kind

    def __str__(self) -> str:
        return self.name


def parse_effect(token: str) -> EffectSpec:
    """Parse ``Kind[:attrName][:decay]``, e.g. ``oOc:age`` or ``GWActivity:2.0``."""
    parts = token.strip().split(":")
    kind = parts[0]
    info = CATALOGUE.get(kind)
    if info is None:
        raise ModelError(f"unknown effect {kind!r}")
    attr = decay = None
    rest = parts[1:]
    if info.attr_kind is not None and rest:
        attr = rest.pop(0)
        if not attr:
            raise ModelError(f"empty attribute name in {token!r}")
    if info.decay and rest:
        try:
            decay = float(rest.pop(0))
        except ValueError:
            raise ModelError(f"decay must be a number in {token!r}") from None
    if rest:
        raise ModelError(f"unexpected field(s) in effect token {token!r}")
    return EffectSpec(kind, attr, decay)


def parse_model_text(text: str) -> list[EffectSpec]:
    """Comma-separated effect tokens, order preserved."""
    tokens = [t for t in (s.strip() for s in text.split(",")) if t]
    if not tokens:
        raise ModelError("empty model")
    return [parse_effect(t) for t in tokens]


class Model:
    """An ordered effect list bound to a network and its attributes.

    Binding validates every effect against the network kind and attribute
    table and builds the two-path cache if any effect needs it.
    """

    def __init__(self, effects: Sequence[EffectSpec | str], net: Network, attrs: AttributeTable | None = None):
        effects = [parse_effect(e) if isinstance(e, str) else e for e in effects]
        if not effects:
            raise ModelError("model has no effects")
        if len(set(effects)) != len(effects):
            raise ModelError("model contains duplicate effects")
        if effects[0].kind != "Density":
            warnings.warn("first effect is not Density; the model has no intercept term", stacklevel=2)
        attrs = attrs if attrs is not None else AttributeTable(net.num_nodes)
        if attrs.num_nodes != net.num_nodes:
            raise ModelError("attribute table and network have different node counts")
        self.effects: tuple[EffectSpec, ...] = tuple(effects)
        self.net = net
        self.attrs = attrs
        needs_two_path = any(CATALOGUE[e.kind].two_path for e in effects)
        self.two_path: TwoPathMatrix | None = TwoPathMatrix(net) if needs_two_path else None
        self.funcs: list[ChangeStat] = [self._bind(e) for e in effects]

    @classmethod
    def parse(cls, text: str, net: Network, attrs: AttributeTable | None = None) -> "Model":
        return cls(parse_model_text(text), net, attrs)

    def _bind(self, e: EffectSpec) -> ChangeStat:
        info = CATALOGUE[e.kind]
        if self.net.kind not in info.networks:
            raise ModelError(f"effect {e.kind} is not defined for {self.net.kind} networks")
        if info.attr_kind is not None:
            found = self.attrs.kind_of(e.attr)
            if found is None:
                raise ModelError(f"effect {e.name}: no attribute named {e.attr!r}")
            if found != info.attr_kind:
                raise ModelError(f"effect {e.name} needs a {info.attr_kind} attribute, {e.attr!r} is {found}")
            return partial(info.func, getattr(self.attrs, found)[e.attr])
        if info.decay:
            return partial(info.func, e.decay)
        if e.kind == "TwoPathContagion":
            return partial(info.func, self.two_path)
        if info.two_path:
            return partial(info.func, twopath=self.two_path)
        return info.func

    @property
    def p(self) -> int:
        return len(self.effects)

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.effects]

    def extended(self, extra: Sequence[EffectSpec | str]) -> "Model":
        """This model with further effects appended (e.g. for goodness of fit)."""
        extra = [parse_effect(e) if isinstance(e, str) else e for e in extra]
        extra = [e for e in extra if e not in self.effects]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return Model(list(self.effects) + extra, self.net, self.attrs)

    def change_statistics(self, A: np.ndarray, i: int) -> np.ndarray:
        """Vector of change statistics for switching node ``i`` from 0 to 1."""
        assert A[i] == 0, "change statistics require A[i] == 0"
        return np.array([f(self.net, A, i) for f in self.funcs], dtype=np.float64)

    def observed_stats(self, outcome: OutcomeVector | np.ndarray, order: Sequence[int] | None = None) -> np.ndarray:
        """Statistics of an outcome vector, summed from change statistics.

        Starts from the all-zero vector (NA entries stay NA) and adds the
        outcome nodes one at a time, in ``order`` if given.
        """
        values = outcome.values if isinstance(outcome, OutcomeVector) else np.asarray(outcome)
        work = np.where(values == FIXED_NA, FIXED_NA, 0).astype(np.int8)
        active = np.flatnonzero(values == 1) if order is None else order
        z = np.zeros(self.p)
        for i in active:
            z += self.change_statistics(work, i)
            work[i] = 1
        return z

    @cached_property
    def compiled(self) -> "CompiledModel":
        return CompiledModel(self)

    def __repr__(self) -> str:
        return f"Model([{', '.join(self.names)}], {self.net!r})"


def change_statistics(model: Model, A: np.ndarray, i: int) -> np.ndarray:
    return model.change_statistics(A, i)


def compute_observed_stats(model: Model, outcome) -> np.ndarray:
    return model.observed_stats(outcome)


# ---------------------------------------------------------------------------
# additive decomposition for the compiled sampler


def _terms(model: Model, e: EffectSpec):
    """(static vector, {(i, u): weight}, [(i, u, v)]) for one effect."""
    net = model.net
    n = net.num_nodes
    static = np.zeros(n)
    linear: dict[tuple[int, int], float] = {}
    quad: list[tuple[int, int, int]] = []
    kind = e.kind
    if kind in ("Density", "Activity", "GWActivity", "TriangleT1", "Sender", "Receiver",
                "EgoInTwoStar", "EgoOutTwoStar", "Reciprocity", "oOb", "oOc", "partner-oOc"):
        # no dependence on other outcomes: evaluate the reference at all-zero
        f = model.funcs[model.effects.index(e)]
        zero = np.zeros(n, dtype=np.int8)
        static[:] = [f(net, zero, i) for i in range(n)]
    elif kind == "Contagion":
        for i in range(n):
            for u in _tie_neighbours(net, i):
                linear[i, u] = linear.get((i, u), 0.0) + 1.0
    elif kind == "oO_Osame":
        cats = model.attrs.categorical[e.attr]
        for i in range(n):
            if cats[i] < 0:
                continue
            for u in _tie_neighbours(net, i):
                if cats[u] == cats[i]:
                    linear[i, u] = linear.get((i, u), 0.0) + 1.0
    elif kind == "ContagionReciprocity":
        for i in range(n):
            for u in net.out_neighbours(i):
                if net.is_arc(u, i):
                    linear[i, u] = 1.0
    elif kind == "TriangleT2":
        tp = model.two_path
        for i in range(n):
            for u in net.neighbours(i):
                c = tp.count(i, u)
                if c:
                    linear[i, u] = float(c)
    elif kind == "TwoPathContagion":
        tp = model.two_path
        for i in range(n):
            for u, c in tp.row(i).items():
                linear[i, u] = float(c)
    elif kind == "TriangleT3":
        for i in range(n):
            nbrs = sorted(net.neighbours(i))
            for a, u in enumerate(nbrs):
                for v in nbrs[a + 1:]:
                    if net.is_edge(u, v):
                        quad.append((i, u, v))
    else:  # pragma: no cover - guarded by the catalogue
        raise ModelError(f"no decomposition for {kind}")
    return static, linear, quad


class CompiledModel:
    """Flat arrays describing every change statistic of a bound model.

    ``static`` is N x p; the linear part is CSR (``lin_ptr``, ``lin_idx``,
    ``lin_w`` with one weight row of length p per stored pair); the quadratic
    part lists node pairs ``(q_u, q_v)`` per ego with weight rows ``q_w``.
    """

    def __init__(self, model: Model):
        n, p = model.net.num_nodes, model.p
        self.p = p
        self.num_nodes = n
        self.static = np.zeros((n, p))
        lin_rows: list[dict[int, np.ndarray]] = [{} for _ in range(n)]
        quad_rows: list[dict[tuple[int, int], np.ndarray]] = [{} for _ in range(n)]
        for k, e in enumerate(model.effects):
            static, linear, quad = _terms(model, e)
            self.static[:, k] = static
            for (i, u), w in linear.items():
                row = lin_rows[i].setdefault(u, np.zeros(p))
                row[k] += w
            for i, u, v in quad:
                row = quad_rows[i].setdefault((u, v), np.zeros(p))
                row[k] += 1.0
        self.lin_ptr, self.lin_idx, self.lin_w = _csr(lin_rows, p, width=1)
        self.q_ptr, q_idx, self.q_w = _csr(quad_rows, p, width=2)
        self.q_u = np.ascontiguousarray(q_idx[:, 0])
        self.q_v = np.ascontiguousarray(q_idx[:, 1])

    def arrays(self):
        """Positional arguments shared by every kernel."""
        return (self.static, self.lin_ptr, self.lin_idx, self.lin_w,
                self.q_ptr, self.q_u, self.q_v, self.q_w)


def _csr(rows, p, width):
    ptr = np.zeros(len(rows) + 1, dtype=np.int64)
    keys, weights = [], []
    for i, row in enumerate(rows):
        for key in sorted(row):
            keys.append(key)
            weights.append(row[key])
        ptr[i + 1] = len(keys)
    if width == 1:
        idx = np.array(keys, dtype=np.int64).reshape(-1)
    else:
        idx = np.array(keys, dtype=np.int64).reshape(-1, width)
    w = np.array(weights, dtype=np.float64).reshape(-1, p)
    return ptr, idx, w
