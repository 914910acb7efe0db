"""Simulation-study harness: bias, RMSE, coverage and error rates.

Every random quantity is derived from the master seed through
``numpy.random.SeedSequence``: child ``i`` of the master sequence drives the
generation of sample ``i`` and supplies the seed for its estimation runs.
Results are aggregated by sample index, so running samples in worker
processes gives the same report as running them in order.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .ee import EEConfig, run_ee, summarize_run
from .effects import EffectSpec, Model, parse_model_text
from .errors import DegenerateModel, Diverged, NoConvergedRuns, StudyError
from .inference import Z95, pool_runs
from .network import DIRECTED, UNDIRECTED, AttributeTable, Network, OutcomeVector
from .sa import SAConfig, estimate_sa
from .sampler import ChainState, run_chain


def erdos_renyi(num_nodes: int, mean_degree: float, seed: int, directed: bool = False) -> Network:
    """G(n, p) graph with p chosen to give the requested mean (out-)degree."""
    rng = np.random.default_rng(seed)
    p = mean_degree / (num_nodes - 1)
    mask = rng.random((num_nodes, num_nodes)) < p
    if directed:
        np.fill_diagonal(mask, False)
    else:
        mask = np.triu(mask, 1)
    i, j = np.nonzero(mask)
    return Network(DIRECTED if directed else UNDIRECTED, num_nodes, zip(i.tolist(), j.tolist()))


def generate_synthetic_attributes(net: Network, seed: int, binary: str = "binaryAttribute",
                                  continuous: str = "continuousAttribute") -> AttributeTable:
    """Binary attribute equal to 1 on exactly half the nodes (rounded down); N(0,1) continuous."""
    rng = np.random.default_rng(seed)
    n = net.num_nodes
    b = np.zeros(n)
    b[rng.permutation(n)[: n // 2]] = 1.0
    return AttributeTable(n, binary={binary: b}, continuous={continuous: rng.standard_normal(n)})


def wilson_interval(k: int, n: int, conf: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion k/n."""
    if n < 1 or not 0 <= k <= n:
        raise ValueError("need n >= 1 and 0 <= k <= n")
    z = NormalDist().inv_cdf(0.5 + conf / 2)
    phat = k / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z / denom * np.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n))
    low = 0.0 if k == 0 else max(0.0, centre - half)
    high = 1.0 if k == n else min(1.0, centre + half)
    return low, high


def simulate_outcome(model: Model, theta, rng: np.random.Generator, start_incidence: float = 0.15,
                     burnin: int | None = None) -> OutcomeVector:
    """One draw from the model: random start at the given incidence, then burn-in.

    The default burn-in is 1000 N proposals.
    """
    n = model.net.num_nodes
    y = np.zeros(n, dtype=np.int8)
    y[rng.permutation(n)[: int(round(start_incidence * n))]] = 1
    state = ChainState.start(model, OutcomeVector(y), theta, rng)
    run_chain(model, state, 1000 * n if burnin is None else burnin)
    return state.outcome()


@dataclass(frozen=True)
class StudyConfig:
    """One study arm.  ``theta`` gives the generating value per effect."""

    net: Network
    attrs: AttributeTable | None
    effects: tuple[EffectSpec, ...]
    theta: tuple[float, ...]
    sampleCount: int = 20
    runsPerSample: int = 20
    estimator: str = "EE"
    ee: EEConfig = field(default_factory=EEConfig)
    sa: SAConfig = field(default_factory=SAConfig)
    seed: int = 1
    label: str = "main"

    def __post_init__(self):
        if self.sampleCount < 1 or self.runsPerSample < 1:
            raise ValueError("sampleCount and runsPerSample must be at least 1")
        if len(self.theta) != len(self.effects):
            raise ValueError("need one generating value per effect")
        if self.estimator not in ("EE", "SA"):
            raise ValueError("estimator must be EE or SA")

    @classmethod
    def from_text(cls, net, attrs, model_text: str, theta: Sequence[float], **kw) -> "StudyConfig":
        return cls(net, attrs, tuple(parse_model_text(model_text)), tuple(float(t) for t in theta), **kw)

    def model(self) -> Model:
        return Model(list(self.effects), self.net, self.attrs)

    def null_arm(self, effect: str, overrides: dict[str, float] | None = None) -> "StudyConfig":
        """Arm with ``effect`` generated at zero; ``overrides`` reset other values."""
        names = [e.name for e in self.effects]
        if effect not in names:
            raise KeyError(effect)
        theta = list(self.theta)
        theta[names.index(effect)] = 0.0
        for k, v in (overrides or {}).items():
            theta[names.index(k)] = float(v)
        return replace(self, theta=tuple(theta), label=f"null_{effect}")


@dataclass
class SampleResult:
    index: int
    converged: bool
    theta: np.ndarray
    stdError: np.ndarray
    runsConverged: int


@dataclass
class StudyRow:
    effect: str
    trueValue: float
    bias: float
    rmse: float
    mcse: float
    rateName: str
    rate: float
    rateLow: float
    rateHigh: float
    coverage: float
    samplesConverged: int
    meanRunsConverged: float
    runsPerSample: int


@dataclass
class StudyReport:
    label: str
    rows: list[StudyRow]
    samples: list[SampleResult]

    def row(self, effect: str) -> StudyRow:
        return next(r for r in self.rows if r.effect == effect)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["effect", "bias", "RMSE", "rate", "rateCILow", "rateCIHigh", "coverage",
                        "samplesConverged", "meanRunsConverged", "runsPerSample"])
            for r in self.rows:
                w.writerow([r.effect, repr(r.bias), repr(r.rmse), repr(r.rate), repr(r.rateLow),
                            repr(r.rateHigh), repr(r.coverage), r.samplesConverged,
                            repr(r.meanRunsConverged), r.runsPerSample])


def _sample_seeds(seed: int, count: int) -> list[tuple[int, int]]:
    """(generation seed, estimation seed) per sample."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [tuple(int(x) for x in c.generate_state(2, np.uint32)) for c in children]


def _estimate_sample(config: StudyConfig, index: int, gen_seed: int, est_seed: int) -> SampleResult:
    model = config.model()
    outcome = simulate_outcome(model, np.array(config.theta), np.random.default_rng(gen_seed))
    p = model.p
    nan = np.full(p, np.nan)
    if config.estimator == "SA":
        try:
            res = estimate_sa(model, outcome, config.sa, seed=est_seed)
        except (DegenerateModel, Diverged):
            return SampleResult(index, False, nan, nan, 0)
        return SampleResult(index, res.converged, res.theta, res.stdError, int(res.converged))
    runs = [summarize_run(run_ee(model, outcome, config.ee, est_seed, j), config.ee)
            for j in range(config.runsPerSample)]
    try:
        pooled = pool_runs(runs)
    except NoConvergedRuns:
        return SampleResult(index, False, nan, nan, 0)
    return SampleResult(index, True, pooled.theta, pooled.stdError, pooled.Nc)


def _run_one(args):
    return _estimate_sample(*args)


def run_study(config: StudyConfig, workers: int = 1) -> StudyReport:
    """Simulate ``sampleCount`` outcomes at the generating values and estimate each."""
    tasks = [(config, i, g, e) for i, (g, e) in enumerate(_sample_seeds(config.seed, config.sampleCount))]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    results.sort(key=lambda r: r.index)
    return summarize_study(config, results)


def summarize_study(config: StudyConfig, results: list[SampleResult]) -> StudyReport:
    ok = [r for r in results if r.converged]
    if not ok:
        raise StudyError(f"no sample converged in arm {config.label}")
    est = np.array([r.theta for r in ok])
    se = np.array([r.stdError for r in ok])
    true = np.array(config.theta)
    low, high = est - Z95 * se, est + Z95 * se
    covered = (low <= true) & (true <= high)
    excludes_zero = (low > 0) | (high < 0)
    n = len(ok)
    rows = []
    for j, e in enumerate(config.effects):
        err = est[:, j] - true[j]
        if true[j] == 0:
            name, k = "FPR", int(excludes_zero[:, j].sum())
        else:
            name, k = "FNR", int((~excludes_zero[:, j]).sum())
        w_low, w_high = wilson_interval(k, n)
        rows.append(StudyRow(
            effect=e.name, trueValue=float(true[j]),
            bias=float(err.mean()), rmse=float(np.sqrt(np.mean(err**2))),
            mcse=float(est[:, j].std(ddof=1) / np.sqrt(n)) if n > 1 else float("nan"),
            rateName=name, rate=100.0 * k / n, rateLow=100.0 * w_low, rateHigh=100.0 * w_high,
            coverage=100.0 * float(covered[:, j].mean()), samplesConverged=n,
            meanRunsConverged=float(np.mean([r.runsConverged for r in ok])),
            runsPerSample=config.runsPerSample if config.estimator == "EE" else 1,
        ))
    return StudyReport(config.label, rows, results)


LIFESTYLE_MODEL = "Density, Sender, Receiver, Contagion, oOc:alcohol"


def lifestyle_like_dataset(seed: int = 1, theta=(-3.5, 0.0, 0.0, 0.5, 0.6), max_nominations: int = 4,
                           reciprocation: float = 0.3):
    """Synthetic stand-in for a 50-pupil friendship excerpt.

    Directed friendship nominations (1 to ``max_nominations`` per pupil,
    each reciprocated with probability ``reciprocation``), alcohol use on a 1-5 scale, sport on 1-2, and a
    binary smoking outcome drawn from ``LIFESTYLE_MODEL`` at ``theta``.
    Returns (network, attributes, outcome).
    """
    rng = np.random.default_rng(seed)
    n = 50
    arcs = set()
    for i in range(n):
        k = int(rng.integers(1, max_nominations + 1))
        for j in rng.choice(np.delete(np.arange(n), i), size=k, replace=False):
            arcs.add((i, int(j)))
    for i, j in list(arcs):
        if rng.random() < reciprocation:
            arcs.add((j, i))
    net = Network(DIRECTED, n, sorted(arcs))
    alcohol = rng.integers(1, 6, size=n).astype(float)
    sport = rng.integers(1, 3, size=n).astype(float)
    attrs = AttributeTable(n, binary={}, continuous={"alcohol": alcohol, "sport": sport})
    model = Model.parse(LIFESTYLE_MODEL, net, attrs)
    outcome = simulate_outcome(model, np.array(theta, dtype=float), rng)
    return net, attrs, outcome
