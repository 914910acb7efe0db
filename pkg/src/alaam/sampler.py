"""Basic ALAAM Metropolis sampler and simulation driver.

The proposal picks a free node uniformly at random and toggles its outcome;
the proposal is symmetric, so a move is accepted with probability
``min(1, exp(theta . delta))`` where ``delta`` is the signed change-statistic
vector of the toggle.

Random numbers come from numpy's PCG64 bit generator.  Independent runs of
one invocation use seed ``seed ^ run_index``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .effects import Model
from .network import FIXED_NA, OutcomeVector

# proposals generated per kernel call; bounds memory for long burn-ins
_CHUNK = 1 << 20


def make_rng(seed: int, run_index: int = 0) -> np.random.Generator:
    """PCG64 generator for run ``run_index`` of master ``seed``."""
    return np.random.Generator(np.random.PCG64(int(seed) ^ int(run_index)))


@dataclass
class ChainState:
    """Mutable state of one Markov chain.

    ``y`` is the 0/1 outcome (NA nodes held at 0, never toggled) and
    ``z_rel`` the statistics accumulated since the chain started.
    """

    y: np.ndarray
    na_mask: np.ndarray
    free: np.ndarray
    theta: np.ndarray
    rng: np.random.Generator
    z_rel: np.ndarray
    accept_count: int = 0
    proposal_count: int = 0
    z_start: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def start(cls, model: Model, outcome: OutcomeVector, theta, rng: np.random.Generator,
              z_start: np.ndarray | None = None) -> "ChainState":
        theta = np.asarray(theta, dtype=np.float64).copy()
        if theta.shape != (model.p,):
            raise ValueError(f"theta has length {theta.size}, model has {model.p} effects")
        return cls(
            y=outcome.indicator(),
            na_mask=outcome.values == FIXED_NA,
            free=outcome.free_nodes.astype(np.int64),
            theta=theta,
            rng=rng,
            z_rel=np.zeros(model.p),
            z_start=z_start,
        )

    def outcome(self) -> OutcomeVector:
        values = np.where(self.na_mask, FIXED_NA, self.y).astype(np.int8)
        return OutcomeVector(values, self.free)

    @property
    def z(self) -> np.ndarray:
        """Absolute statistics (requires ``z_start``)."""
        return self.z_start + self.z_rel

    @property
    def acceptance_rate(self) -> float:
        return self.accept_count / self.proposal_count if self.proposal_count else 0.0

    def draws(self, steps: int) -> tuple[np.ndarray, np.ndarray]:
        nodes = self.rng.integers(0, self.free.size, size=steps)
        uniforms = self.rng.random(steps)
        return nodes, uniforms


def run_chain(model: Model, state: ChainState, steps: int) -> ChainState:
    """Perform exactly ``steps`` Metropolis proposals on ``state`` (in place)."""
    if steps <= 0:
        return state
    if state.free.size == 0:
        state.proposal_count += steps
        return state
    arrays = model.compiled.arrays()
    remaining = steps
    while remaining:
        chunk = min(remaining, _CHUNK)
        nodes, uniforms = state.draws(chunk)
        state.accept_count += int(_kernels.metropolis_run(
            state.y, state.free, state.theta, state.z_rel, nodes, uniforms, *arrays))
        state.proposal_count += chunk
        remaining -= chunk
    return state


def metropolis_step(model: Model, state: ChainState) -> bool:
    """One proposal; True if it was accepted."""
    before = state.accept_count
    run_chain(model, state, 1)
    return state.accept_count > before


@dataclass(frozen=True)
class SimOptions:
    burnin: int
    interval: int
    sample_count: int

    def __post_init__(self):
        if self.burnin < 0 or self.sample_count < 0:
            raise ValueError("burnin and sample_count must be non-negative")
        if self.interval < 1:
            raise ValueError("interval must be at least 1")

    @classmethod
    def default(cls, num_nodes: int) -> "SimOptions":
        """1000 N burn-in proposals, 10 N between samples, 100 samples."""
        return cls(burnin=1000 * num_nodes, interval=10 * num_nodes, sample_count=100)


@dataclass
class SimResult:
    """Retained samples: statistics rows, per-sample acceptance rates, step index."""

    stats: np.ndarray
    accept_rates: np.ndarray
    steps: np.ndarray
    final: OutcomeVector

    def __iter__(self):
        return iter(zip(self.stats, self.accept_rates))

    def __len__(self) -> int:
        return len(self.accept_rates)


def simulate_outcomes(model: Model, theta, opts: SimOptions, init: OutcomeVector, seed: int,
                      run_index: int = 0) -> SimResult:
    """Burn in, then keep one statistics vector every ``opts.interval`` proposals.

    Statistics are absolute: those of ``init`` are computed once and then
    tracked through the accepted change statistics.
    """
    state = ChainState.start(model, init, theta, make_rng(seed, run_index), z_start=model.observed_stats(init))
    run_chain(model, state, opts.burnin)
    stats = np.zeros((opts.sample_count, model.p))
    rates = np.zeros(opts.sample_count)
    steps = np.zeros(opts.sample_count, dtype=np.int64)
    for s in range(opts.sample_count):
        acc0 = state.accept_count
        run_chain(model, state, opts.interval)
        stats[s] = state.z
        rates[s] = (state.accept_count - acc0) / opts.interval
        steps[s] = state.proposal_count
    return SimResult(stats, rates, steps, state.outcome())


def write_samples_csv(result: SimResult, names, path) -> None:
    """``t,<effect names...>,acceptRate``; one row per retained sample."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", *names, "acceptRate"])
        for t, row, rate in zip(result.steps, result.stats, result.accept_rates):
            w.writerow([int(t), *(repr(float(v)) for v in row), repr(float(rate))])
