"""Three-phase Robbins-Monro stochastic approximation for ALAAMs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .effects import Model
from .errors import DegenerateModel, Diverged
from .network import OutcomeVector
from .sampler import ChainState, make_rng, run_chain

# condition number above which a covariance matrix counts as singular
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class SAConfig:
    """Tuning constants.  ``M1=None`` means 7 + 3p.

    ``schedule`` selects the phase-2 iteration counts for subphase k:
    ``"rm"`` runs 2^(4(k-1)/3) (7+p) + 200 iterations, or with ``earlyStop``
    stops once past 2^(4(k-1)/3) (7+p) if every component's summed products
    of successive deviations is negative; ``"fixed"`` runs 7 + p k.
    """

    M1: int | None = None
    subphases: int = 5
    a0: float = 0.01
    M3: int = 1000
    sampleIntervalFactor: int = 10
    burninFactor: int | None = None
    maxRestarts: int = 2
    tConvergence: float = 0.1
    schedule: str = "rm"
    earlyStop: bool = False

    def __post_init__(self):
        for name in ("subphases", "M3", "sampleIntervalFactor"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.M1 is not None and self.M1 < 2:
            raise ValueError("M1 must be at least 2")
        if self.a0 <= 0:
            raise ValueError("a0 must be positive")
        if self.maxRestarts < 0:
            raise ValueError("maxRestarts must be non-negative")
        if not 0 < self.tConvergence < 1:
            raise ValueError("tConvergence must lie in (0, 1)")
        if self.schedule not in ("rm", "fixed"):
            raise ValueError(f"unknown schedule {self.schedule!r}")

    def m1(self, p: int) -> int:
        return 7 + 3 * p if self.M1 is None else self.M1

    def burnin(self, num_nodes: int) -> int:
        """Phase-3 burn-in proposals (M3 N unless overridden as a factor of N)."""
        return (self.M3 if self.burninFactor is None else self.burninFactor) * num_nodes

    def step_sizes(self) -> list[float]:
        return [self.a0 / 2**k for k in range(self.subphases)]

    def iteration_bounds(self, p: int, k: int) -> tuple[int, int]:
        """(min, max) phase-2 iterations in subphase k = 1..subphases."""
        if self.schedule == "fixed":
            n = 7 + p * k
            return n, n
        n = int(2 ** (4 * (k - 1) / 3) * (7 + p))
        return n, n + 200


@dataclass
class SAResult:
    theta: np.ndarray
    stdError: np.ndarray
    tRatios: np.ndarray
    converged: bool
    covMatrix: np.ndarray
    restartsUsed: int
    samples: np.ndarray = field(repr=False)
    names: list[str] = field(default_factory=list)

    def report(self) -> str:
        return format_report(self.names, self.theta, self.stdError, self.tRatios)


def estimate_covariance(samples) -> np.ndarray:
    """(1/M) U'U with U the mean-centred sample rows."""
    Z = np.asarray(samples, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] < 2:
        raise ValueError("need at least two sample rows")
    U = Z - Z.mean(axis=0)
    return U.T @ U / Z.shape[0]


def t_ratios(samples, observed) -> np.ndarray:
    """(mean - observed) / sd per column; sd uses denominator M."""
    Z = np.asarray(samples, dtype=np.float64)
    mean = Z.mean(axis=0)
    sd = Z.std(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (mean - np.asarray(observed, dtype=np.float64)) / sd
    return np.where(sd > 0, t, np.where(mean == observed, 0.0, np.inf))


def checked_inverse(D: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(D)) or np.linalg.cond(D) > _COND_LIMIT:
        raise DegenerateModel(f"{what} covariance matrix is singular; the model may be degenerate")
    return np.linalg.inv(D)


def default_theta0(model: Model, outcome: OutcomeVector) -> np.ndarray:
    """Zeros, with a logit-incidence start for Density when present."""
    theta = np.zeros(model.p)
    names = [e.kind for e in model.effects]
    if "Density" in names:
        n = outcome.free_nodes.size or outcome.values.size
        k = int(np.sum(outcome.values[outcome.free_nodes] == 1)) if outcome.free_nodes.size else 0
        q = min(max(k / n, 0.5 / n), 1 - 0.5 / n)
        theta[names.index("Density")] = np.log(q / (1 - q))
    return theta


def _draw(model, state, count, interval):
    out = np.empty((count, model.p))
    for s in range(count):
        run_chain(model, state, interval)
        out[s] = state.z
    return out


def _phase2(model, state, Dinv, z_obs, config, interval):
    theta = state.theta
    for k, a in enumerate(config.step_sizes(), start=1):
        n_min, n_max = config.iteration_bounds(model.p, k)
        history = np.zeros((n_max, model.p))
        prev = None
        prod_sum = np.zeros(model.p)
        n = 0
        while n < n_max:
            run_chain(model, state, interval)
            dev = state.z - z_obs
            theta -= a * (Dinv @ dev)
            if not np.all(np.isfinite(theta)):
                raise Diverged("parameters became non-finite in phase 2")
            history[n] = theta
            n += 1
            if prev is not None:
                prod_sum += prev * dev
            prev = dev
            if config.schedule == "rm" and config.earlyStop and n >= n_min and np.all(prod_sum < 0):
                break
        theta[:] = history[:n].mean(axis=0)


def estimate_sa(model: Model, observed: OutcomeVector, config: SAConfig | None = None,
                theta0=None, seed: int = 0, run_index: int = 0) -> SAResult:
    """Method-of-moments estimate by stochastic approximation.

    The sampler chain starts at the observed outcome and persists across
    all phases and restarts.
    """
    config = config or SAConfig()
    N = observed.values.size
    interval = config.sampleIntervalFactor * N
    z_obs = model.observed_stats(observed)
    theta = default_theta0(model, observed) if theta0 is None else np.asarray(theta0, dtype=np.float64)
    if theta.shape != (model.p,) or not np.all(np.isfinite(theta)):
        raise ValueError("theta0 must be a finite vector with one entry per effect")
    state = ChainState.start(model, observed, theta, make_rng(seed, run_index), z_start=z_obs)

    restarts = 0
    while True:
        D1 = estimate_covariance(_draw(model, state, config.m1(model.p), interval))
        Dinv = checked_inverse(D1, "phase 1")
        _phase2(model, state, Dinv, z_obs, config, interval)
        run_chain(model, state, config.burnin(N))
        samples = _draw(model, state, config.M3, interval)
        D3 = estimate_covariance(samples)
        cov = checked_inverse(D3, "phase 3")
        t = t_ratios(samples, z_obs)
        converged = bool(np.all(np.abs(t) < config.tConvergence))
        if converged or restarts >= config.maxRestarts:
            break
        restarts += 1

    return SAResult(
        theta=state.theta.copy(),
        stdError=np.sqrt(np.diag(cov)),
        tRatios=t,
        converged=converged,
        covMatrix=cov,
        restartsUsed=restarts,
        samples=samples,
        names=model.names,
    )


def format_report(names, theta, se, t=None) -> str:
    """Fixed-width table; ``*`` marks |estimate/stdError| > 1.96."""
    width = max([len("Effect"), *(len(n) for n in names)])
    header = f"{'Effect':<{width}}  {'Estimate':>12}  {'StdError':>12}"
    if t is not None:
        header += f"  {'t-ratio':>9}"
    lines = [header]
    for j, name in enumerate(names):
        star = "*" if se[j] > 0 and abs(theta[j] / se[j]) > 1.96 else " "
        row = f"{name:<{width}}  {theta[j]:>12.6f}  {se[j]:>12.6f}"
        if t is not None:
            row += f"  {t[j]:>9.4f}"
        lines.append(row + " " + star)
    return "\n".join(lines) + "\n"
