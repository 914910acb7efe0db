"""Pooling of EE runs, goodness-of-fit t-ratios and degeneracy checks."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .ee import RunEstimate
from .effects import EffectSpec, Model
from .errors import NoConvergedRuns
from .network import OutcomeVector
from .sa import t_ratios
from .sampler import SimOptions, simulate_outcomes, write_samples_csv

Z95 = 1.96
GOF_THRESHOLDS = (2.0, 1.645, 1.0, 0.3)
IN_MODEL_THRESHOLD = 0.1


@dataclass
class PooledEstimate:
    names: list[str]
    theta: np.ndarray
    stdError: np.ndarray
    Nc: int
    totalRuns: int

    @property
    def ci95Low(self) -> np.ndarray:
        return self.theta - Z95 * self.stdError

    @property
    def ci95High(self) -> np.ndarray:
        return self.theta + Z95 * self.stdError

    @property
    def significant(self) -> np.ndarray:
        return (self.ci95Low > 0) | (self.ci95High < 0)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["effect", "estimate", "stdError", "ci95Low", "ci95High", "Nc", "totalRuns", "significant"])
            for j, name in enumerate(self.names):
                w.writerow([name, repr(float(self.theta[j])), repr(float(self.stdError[j])),
                            repr(float(self.ci95Low[j])), repr(float(self.ci95High[j])),
                            self.Nc, self.totalRuns, str(bool(self.significant[j])).lower()])


def pool_estimates(thetas, ses) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-variance weighted mean and its standard error, per column."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    w = 1.0 / np.atleast_2d(np.asarray(ses, dtype=np.float64)) ** 2
    total = w.sum(axis=0)
    return (w * thetas).sum(axis=0) / total, 1.0 / np.sqrt(total)


def pool_runs(estimates: Sequence[RunEstimate], names=None) -> PooledEstimate:
    """Pool the converged runs; raises NoConvergedRuns if there are none."""
    conv = [e for e in estimates if e.converged]
    if not conv:
        raise NoConvergedRuns(f"none of {len(estimates)} runs converged")
    theta, se = pool_estimates([e.theta for e in conv], [e.stdError for e in conv])
    names = list(names) if names is not None else [f"theta{j}" for j in range(theta.size)]
    return PooledEstimate(names, theta, se, len(conv), len(estimates))


@dataclass
class GofRow:
    name: str
    observed: float
    mean: float
    sd: float
    tRatio: float
    inModel: bool

    @property
    def degenerate(self) -> bool:
        return not self.sd > 0


@dataclass
class GofReport:
    rows: list[GofRow]
    threshold: float = 2.0

    def flagged(self) -> list[GofRow]:
        """Rows that fail their threshold (or have zero simulated spread)."""
        out = []
        for r in self.rows:
            limit = IN_MODEL_THRESHOLD if r.inModel else self.threshold
            if r.degenerate or abs(r.tRatio) >= limit:
                out.append(r)
        return out

    def text(self) -> str:
        width = max([len("Effect"), *(len(r.name) for r in self.rows)])
        head = f"{'Effect':<{width}}  {'Observed':>12}  {'Mean':>12}  {'StdDev':>12}  {'t-ratio':>9}"
        bad = {id(r) for r in self.flagged()}
        lines = []
        for title, in_model in (("Effects in model (|t| < 0.1)", True),
                                (f"Effects not in model (|t| < {self.threshold:g})", False)):
            lines += [title, head]
            for r in self.rows:
                if r.inModel != in_model:
                    continue
                t = "degenerate" if r.degenerate else f"{r.tRatio:9.4f}"
                mark = " *" if id(r) in bad else ""
                lines.append(f"{r.name:<{width}}  {r.observed:>12.4f}  {r.mean:>12.4f}  {r.sd:>12.4f}  {t:>9}{mark}")
            lines.append("")
        return "\n".join(lines)


def gof_report_from_samples(names, samples, observed, in_model, threshold=2.0) -> GofReport:
    samples = np.asarray(samples, dtype=np.float64)
    t = t_ratios(samples, observed)
    mean, sd = samples.mean(axis=0), samples.std(axis=0)
    rows = [GofRow(n, float(observed[j]), float(mean[j]), float(sd[j]),
                   float(t[j]) if sd[j] > 0 else float("nan"), bool(in_model[j]))
            for j, n in enumerate(names)]
    return GofReport(rows, threshold)


def gof_test(model: Model, extra: Sequence[EffectSpec], observed: OutcomeVector, theta_hat,
             opts: SimOptions, seed: int, threshold: float = 2.0, run_index: int = 0) -> GofReport:
    """Simulate at ``theta_hat`` and compare all statistics with the observed ones.

    Extra effects are tracked with parameter zero.
    """
    if threshold not in GOF_THRESHOLDS:
        raise ValueError(f"threshold must be one of {GOF_THRESHOLDS}")
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    if theta_hat.shape != (model.p,):
        raise ValueError("theta_hat must have one entry per fitted effect")
    full = model.extended(extra)
    theta = np.concatenate([theta_hat, np.zeros(full.p - model.p)])
    sim = simulate_outcomes(full, theta, opts, observed, seed, run_index)
    in_model = [j < model.p for j in range(full.p)]
    return gof_report_from_samples(full.names, sim.stats, full.observed_stats(observed), in_model, threshold)


@dataclass
class DegeneracySummary:
    names: list[str]
    observed: np.ndarray
    low: np.ndarray
    high: np.ndarray

    @property
    def inside(self) -> np.ndarray:
        return (self.observed >= self.low) & (self.observed <= self.high)

    def text(self) -> str:
        lines = ["effect,observed,band2.5,band97.5,inside"]
        for j, n in enumerate(self.names):
            lines.append(f"{n},{self.observed[j]!r},{self.low[j]!r},{self.high[j]!r},{str(bool(self.inside[j])).lower()}")
        return "\n".join(lines) + "\n"


def degeneracy_check(model: Model, observed: OutcomeVector, theta_hat, opts: SimOptions, seed: int,
                     out_dir=None, run_index: int = 0) -> DegeneracySummary:
    """Simulated 2.5%-97.5% band per statistic versus the observed value.

    With ``out_dir`` the sample trace and the summary are written as
    ``degeneracy_trace.csv`` and ``degeneracy_summary.csv``.
    """
    sim = simulate_outcomes(model, theta_hat, opts, observed, seed, run_index)
    z = model.observed_stats(observed)
    if len(sim):
        low, high = np.percentile(sim.stats, [2.5, 97.5], axis=0)
    else:
        low = high = np.full(model.p, np.nan)
    summary = DegeneracySummary(model.names, z, low, high)
    if out_dir is not None:
        out_dir = Path(out_dir)
        write_samples_csv(sim, model.names, out_dir / "degeneracy_trace.csv")
        (out_dir / "degeneracy_summary.csv").write_text(summary.text())
    return summary
