"""Equilibrium-expectation estimation with contrastive-divergence start.

Each run is a pure function of (model, observed outcome, config, seed,
run index).  Runs are summarised independently and combined later by
inverse-variance pooling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .effects import Model
from .errors import DataError, InsufficientData
from .network import OutcomeVector
from .sampler import make_rng

# proposals generated per kernel call
_CHUNK = 1 << 21

DIVERGED = "Diverged"
DEGENERATE = "DegenerateModel"
DZ_NOT_ZERO = "DzNotZero"


@dataclass(frozen=True)
class EEConfig:
    Ms: int = 1000
    Mee: int = 50000
    r: float = 0.01
    c: float = 0.01
    burninIters: int = 1000
    thinInterval: int = 100
    initSteps: int = 100
    maxAbsTheta: float = 1e10
    dzRatioLimit: float = 0.3

    def __post_init__(self):
        for name in ("Ms", "Mee", "thinInterval"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.burninIters < 0 or self.initSteps < 0:
            raise ValueError("burninIters and initSteps must be non-negative")
        if self.burninIters >= self.Mee:
            raise ValueError("burninIters must be less than Mee")
        if self.r <= 0 or self.c <= 0 or self.maxAbsTheta <= 0 or self.dzRatioLimit <= 0:
            raise ValueError("r, c, maxAbsTheta and dzRatioLimit must be positive")

    @property
    def Nm(self) -> int:
        return len(range(self.burninIters, self.Mee, self.thinInterval))


@dataclass
class EEChain:
    """Per-iteration traces.  Row t: parameters used, d_z after, acceptance rate."""

    thetaTrace: np.ndarray
    dzTrace: np.ndarray
    acceptanceRates: np.ndarray
    theta0: np.ndarray
    failReason: str | None = None
    names: list[str] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return self.failReason is not None

    def final_theta(self, config: EEConfig) -> np.ndarray:
        """Parameters after the last recorded update."""
        theta = self.thetaTrace[-1].copy()
        _kernels._ee_update(theta, self.dzTrace[-1], config.r, config.c)
        return theta


@dataclass
class RunEstimate:
    theta: np.ndarray
    stdError: np.ndarray
    T: np.ndarray | None
    V: np.ndarray | None
    Nm: int
    converged: bool
    failReason: str | None = None
    dzRatio: np.ndarray | None = None


def _draw_rows(rng, rows, nfree, ms):
    return rng.integers(0, nfree, size=(rows, ms)), rng.random((rows, ms))


def algorithm_s(model: Model, observed: OutcomeVector, config: EEConfig,
                rng: np.random.Generator, theta_start=None) -> np.ndarray:
    """Contrastive-divergence start: EE updates with moves never applied.

    Every update step evaluates ``Ms`` proposals against the observed
    outcome; d_z restarts from zero at each step.
    """
    theta = np.zeros(model.p) if theta_start is None else np.array(theta_start, dtype=np.float64)
    free = observed.free_nodes.astype(np.int64)
    if config.initSteps == 0 or free.size == 0:
        return theta
    y = observed.indicator()
    arrays = model.compiled.arrays()
    step_rows = max(1, _CHUNK // config.Ms)
    done = 0
    while done < config.initSteps:
        rows = min(step_rows, config.initSteps - done)
        nodes, unif = _draw_rows(rng, rows, free.size, config.Ms)
        _kernels.contrastive_steps(y, free, theta, config.r, config.c, nodes, unif, *arrays)
        done += rows
    return theta


def run_ee(model: Model, observed: OutcomeVector, config: EEConfig | None = None,
           seed: int = 0, run_index: int = 0, theta_start=None) -> EEChain:
    """Algorithm S followed by ``Mee`` EE iterations of ``Ms`` proposals each.

    The outcome chain starts at the observed vector and is never reset.
    A run whose parameters diverge stops early with truncated traces.
    """
    config = config or EEConfig()
    rng = make_rng(seed, run_index)
    theta = algorithm_s(model, observed, config, rng, theta_start)
    theta0 = theta.copy()
    p = model.p
    theta_trace = np.zeros((config.Mee, p))
    dz_trace = np.zeros((config.Mee, p))
    accept = np.zeros(config.Mee)
    free = observed.free_nodes.astype(np.int64)
    y = observed.indicator()
    dz = np.zeros(p)
    fail = None
    if free.size == 0:
        theta_trace[:] = theta
        return EEChain(theta_trace, dz_trace, accept, theta0, None, model.names)
    arrays = model.compiled.arrays()
    step_rows = max(1, _CHUNK // config.Ms)
    row = 0
    while row < config.Mee:
        rows = min(step_rows, config.Mee - row)
        nodes, unif = _draw_rows(rng, rows, free.size, config.Ms)
        done, status = _kernels.ee_iterations(
            y, free, theta, dz, config.r, config.c, config.maxAbsTheta, nodes, unif,
            theta_trace, dz_trace, accept, row, *arrays)
        row += done
        if status:
            fail = DIVERGED
            break
    return EEChain(theta_trace[:row], dz_trace[:row], accept[:row], theta0, fail, model.names)


def batch_means_cov(trace) -> tuple[np.ndarray, np.ndarray]:
    """Overall mean and multivariate batch-means asymptotic covariance.

    Batch size floor(sqrt(n)); the trailing partial batch is dropped.
    """
    Y = np.asarray(trace, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    n = Y.shape[0]
    b = int(np.floor(np.sqrt(n))) if n else 0
    a = n // b if b else 0
    if a < 2:
        raise InsufficientData(f"batch means needs at least two batches (trace length {n})")
    mean = Y.mean(axis=0)
    batch = Y[: a * b].reshape(a, b, -1).mean(axis=1)
    U = batch - mean
    return mean, b / (a - 1) * (U.T @ U)


def summarize_run(chain: EEChain, config: EEConfig) -> RunEstimate:
    """Point estimate, standard errors and convergence flags of one run."""
    p = chain.thetaTrace.shape[1]
    nan = np.full(p, np.nan)
    if chain.failed:
        theta = chain.thetaTrace[-1] if len(chain.thetaTrace) else nan
        return RunEstimate(theta.copy(), nan, None, None, 0, False, chain.failReason)
    if len(chain.thetaTrace) < config.Mee:
        raise InsufficientData(f"chain has {len(chain.thetaTrace)} of {config.Mee} iterations")
    keep = slice(config.burninIters, config.Mee, config.thinInterval)
    th = chain.thetaTrace[keep]
    dz = chain.dzTrace[keep]
    Nm = th.shape[0]
    theta, T = batch_means_cov(th)
    _, V = batch_means_cov(dz)
    sd = dz.std(axis=0, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(np.where(sd > 0, dz.mean(axis=0) / sd, np.where(dz.mean(axis=0) == 0, 0.0, np.inf)))
    if not np.all(np.isfinite(V)) or np.linalg.cond(V) > 1e12:
        return RunEstimate(theta, nan, T, V, Nm, False, DEGENERATE, ratio)
    W = T / Nm + np.linalg.inv(V / Nm)
    W = (W + W.T) / 2
    se = np.sqrt(np.diag(W))
    fail = None
    if not np.all(np.isfinite(theta)) or np.any(np.abs(theta) > config.maxAbsTheta):
        fail = DIVERGED
    elif np.any(ratio > config.dzRatioLimit):
        fail = DZ_NOT_ZERO
    return RunEstimate(theta, se, T, V, Nm, fail is None, fail, ratio)


def run_file(out_dir, run_index: int) -> Path:
    return Path(out_dir) / f"run_{run_index}.csv"


def status_file(out_dir, run_index: int) -> Path:
    return Path(out_dir) / f"run_{run_index}.status"


def write_run_csv(chain: EEChain, names, path) -> None:
    """``t,theta_<e>...,dz_<e>...,acceptRate``; one row per EE iteration."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", *(f"theta_{n}" for n in names), *(f"dz_{n}" for n in names), "acceptRate"])
        for t in range(len(chain.acceptanceRates)):
            w.writerow([t, *map(repr, map(float, chain.thetaTrace[t])),
                        *map(repr, map(float, chain.dzTrace[t])), repr(float(chain.acceptanceRates[t]))])


def write_status(estimate: RunEstimate, path) -> None:
    with open(path, "w") as f:
        f.write(f"converged = {str(estimate.converged).lower()}\n")
        f.write(f"failReason = {estimate.failReason or ''}\n")


def read_status(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def read_run_csv(path) -> EEChain:
    """Inverse of :func:`write_run_csv`; a sidecar fail reason is attached if present."""
    path = Path(path)
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise DataError("empty run file", path)
    header = rows[0]
    names = [h[len("theta_"):] for h in header if h.startswith("theta_")]
    p = len(names)
    if header != ["t", *(f"theta_{n}" for n in names), *(f"dz_{n}" for n in names), "acceptRate"]:
        raise DataError("unexpected run file header", path, 1)
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64).reshape(-1, 2 * p + 2)
    except ValueError as exc:
        raise DataError(f"malformed run file: {exc}", path) from None
    # other failure reasons are recomputed from the traces
    sidecar = path.with_suffix(".status")
    fail = DIVERGED if sidecar.exists() and read_status(sidecar).get("failReason") == DIVERGED else None
    return EEChain(data[:, 1:p + 1], data[:, p + 1:2 * p + 1], data[:, -1], np.full(p, np.nan), fail, names)
