"""Monte-Carlo evaluation harness: error-rate grids, CLT coverage and
consistency-at-scale checks.

Replicate i of an experiment draws from stream i of the experiment seed,
so reruns reproduce every count exactly and experiments with equal seeds
share their underlying randomness cell by cell (useful for paired
comparisons across grid cells).  Results are plain row containers with CSV
emitters; plotting stays outside the package.
"""

from __future__ import annotations

import csv
import io as _io
import math
from dataclasses import dataclass

import numpy as np

from .inference import covariance_mle, fit_linkage
from .lrt import _norm_quantile, run_test
from .model import EMISSION_STANDARD, INFINITY, ParameterPoint
from .simulate import (
    SimulationConfig,
    config_map,
    generate_frequencies,
    simulate_admixture,
    simulate_linkage,
)

GENERATING_ADMIXTURE = "admixture"
GENERATING_LINKAGE = "linkage"


def _write_rows(path_or_none, header, rows) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    text = buf.getvalue()
    if path_or_none is not None:
        with open(path_or_none, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


@dataclass(frozen=True)
class GridCell:
    """One (generating model, r, d) cell of the error-rate grid."""

    generating_model: str
    r: float
    d: float
    M: int
    replicates: int
    rejections: int

    @property
    def error_type(self) -> str:
        return "type1" if self.generating_model == GENERATING_ADMIXTURE else "type2"

    @property
    def error_rate(self) -> float:
        if self.replicates == 0:
            return math.nan
        if self.generating_model == GENERATING_ADMIXTURE:
            return self.rejections / self.replicates
        return (self.replicates - self.rejections) / self.replicates

    @property
    def mc_stderr(self) -> float:
        if self.replicates == 0:
            return math.nan
        p = self.error_rate
        return math.sqrt(p * (1.0 - p) / self.replicates)


@dataclass(frozen=True)
class ErrorGridResult:
    cells: tuple[GridCell, ...]
    M: int
    alpha: float
    seed: int

    HEADER = ("generating_model", "r", "d", "M", "replicates", "rejections",
              "error_type", "error_rate", "mc_stderr")

    def rows(self):
        for c in self.cells:
            yield (c.generating_model, repr(c.r), repr(c.d), c.M, c.replicates,
                   c.rejections, c.error_type, repr(c.error_rate),
                   repr(c.mc_stderr))

    def to_csv(self, path=None) -> str:
        return _write_rows(path, self.HEADER, self.rows())

    def cell(self, generating_model: str, r: float, d: float) -> GridCell:
        for c in self.cells:
            if (c.generating_model == generating_model and c.r == r and c.d == d):
                return c
        raise KeyError((generating_model, r, d))

    def pooled_type1(self) -> tuple[int, int]:
        """(rejections, replicates) pooled over all null-generated cells."""
        cells = [c for c in self.cells
                 if c.generating_model == GENERATING_ADMIXTURE]
        return (sum(c.rejections for c in cells),
                sum(c.replicates for c in cells))


def _base_config(M, K, q0, d, r0, seed, stream, mode) -> SimulationConfig:
    return SimulationConfig(
        q0=tuple(q0) if q0 is not None else tuple(np.full(K, 1.0 / K)),
        r0=r0,
        markers_per_chromosome=(M,),
        distance=float(d),
        seed=seed,
        stream=stream,
        emission_mode=mode,
    )


def error_rate_experiment(d_values=(0.1, 0.5, 1.0, 2.0, 5.0, 10.0),
                          r_values=(1.0, 10.0, 100.0), M: int = 100,
                          replicates: int = 100, alpha: float = 0.05,
                          seed: int = 0, K: int = 2, q0=None,
                          n_starts: int = 8,
                          mode: str = EMISSION_STANDARD) -> ErrorGridResult:
    """Rejection counts over the (d, r) grid.

    Null-generated cells (one per d; data has no r) estimate the type-1
    error, linkage-generated cells at each (r, d) the type-2 error.
    Replicate i uses stream i, so all cells of all experiments with the
    same seed share their randomness replicate for replicate.
    """
    cells = []
    for d in d_values:
        rejections = 0
        for rep in range(replicates):
            cfg = _base_config(M, K, q0, d, INFINITY, seed, rep, mode)
            data = simulate_admixture(cfg)
            res = run_test(data, generate_frequencies(cfg), config_map(cfg),
                           alpha=alpha, mode=mode, n_starts=n_starts)
            rejections += int(res.reject)
        cells.append(GridCell(GENERATING_ADMIXTURE, INFINITY, float(d), M,
                              replicates, rejections))
    for d in d_values:
        for r in r_values:
            rejections = 0
            for rep in range(replicates):
                cfg = _base_config(M, K, q0, d, float(r), seed, rep, mode)
                data, _ = simulate_linkage(cfg)
                res = run_test(data, generate_frequencies(cfg),
                               config_map(cfg), alpha=alpha, mode=mode,
                               n_starts=n_starts)
                rejections += int(res.reject)
            cells.append(GridCell(GENERATING_LINKAGE, float(r), float(d), M,
                                  replicates, rejections))
    return ErrorGridResult(tuple(cells), M, alpha, seed)


@dataclass(frozen=True)
class CoverageResult:
    """Empirical coverage of nominal 95% intervals theta_hat +- z * se."""

    theta0: ParameterPoint
    M: int
    replicates: int
    used: int
    boundary_count: int
    coverage_q: tuple[float, ...]
    coverage_r: float
    mean_width_q: tuple[float, ...]
    mean_width_r: float

    HEADER = ("parameter", "coverage", "mean_width", "replicates_used",
              "boundary_count")

    def rows(self):
        for k, (cov, w) in enumerate(zip(self.coverage_q, self.mean_width_q)):
            yield (f"q{k + 1}", repr(cov), repr(w), self.used,
                   self.boundary_count)
        yield ("r", repr(self.coverage_r), repr(self.mean_width_r), self.used,
               self.boundary_count)

    def to_csv(self, path=None) -> str:
        return _write_rows(path, self.HEADER, self.rows())


def _default_interval_fitter(n_starts, seed):
    def fitter(data, freqs, gmap):
        fit = fit_linkage(data, freqs, gmap, n_starts=n_starts, seed=seed)
        if fit.boundary:
            return fit.theta_hat, None, True
        cov = covariance_mle(fit, data, freqs, gmap)
        return fit.theta_hat, cov.stderrs, False

    return fitter


def coverage_experiment(theta0: ParameterPoint | None = None, M: int = 2000,
                        replicates: int = 200, d: float = 1.0, seed: int = 0,
                        n_starts: int = 8, fitter=None) -> CoverageResult:
    """Monte-Carlo check of the CLT-based intervals.

    Per replicate: simulate at theta0, fit the linkage model, build the
    per-coordinate 95% intervals theta_hat +- z_{0.975} * se and record
    whether they contain theta0.  Boundary MLEs are counted separately and
    excluded from the coverage denominator.  ``fitter`` may replace the
    fit+covariance step (test hook); it must return
    (ParameterPoint, stderr vector over (q..., r), boundary_flag).
    """
    if theta0 is None:
        theta0 = ParameterPoint(np.array([0.6, 0.4]), 1.0)
    if fitter is None:
        fitter = _default_interval_fitter(n_starts, seed)
    K = theta0.K
    z = _norm_quantile(0.975)
    hits_q = np.zeros(K)
    width_q = np.zeros(K)
    hits_r = 0.0
    width_r = 0.0
    used = 0
    boundary = 0
    for rep in range(replicates):
        cfg = _base_config(M, K, theta0.q, d, theta0.r, seed, rep,
                           EMISSION_STANDARD)
        data, _ = simulate_linkage(cfg)
        theta_hat, se, is_boundary = fitter(data, generate_frequencies(cfg),
                                            config_map(cfg))
        if is_boundary or se is None:
            boundary += 1
            continue
        used += 1
        lo_q = theta_hat.q - z * se[:K]
        hi_q = theta_hat.q + z * se[:K]
        hits_q += (lo_q <= theta0.q) & (theta0.q <= hi_q)
        width_q += hi_q - lo_q
        lo_r = theta_hat.r - z * se[K]
        hi_r = theta_hat.r + z * se[K]
        hits_r += float(lo_r <= theta0.r <= hi_r)
        width_r += hi_r - lo_r
    denom = max(used, 1)
    return CoverageResult(
        theta0=theta0,
        M=M,
        replicates=replicates,
        used=used,
        boundary_count=boundary,
        coverage_q=tuple(hits_q / denom),
        coverage_r=hits_r / denom,
        mean_width_q=tuple(width_q / denom),
        mean_width_r=width_r / denom,
    )


@dataclass(frozen=True)
class ConsistencyRow:
    M: int
    replicates: int
    median_q_err: float
    median_r_err: float
    boundary_fraction: float
    large_r_fraction: float  # r_hat = INFINITY or r_hat > 100


@dataclass(frozen=True)
class ConsistencyResult:
    theta0: ParameterPoint
    rows: tuple[ConsistencyRow, ...]

    HEADER = ("M", "replicates", "median_q_abs_err", "median_r_abs_err",
              "boundary_fraction", "large_r_fraction")

    def to_csv(self, path=None) -> str:
        return _write_rows(
            path, self.HEADER,
            ((r.M, r.replicates, repr(r.median_q_err), repr(r.median_r_err),
              repr(r.boundary_fraction), repr(r.large_r_fraction))
             for r in self.rows),
        )


def consistency_experiment(theta0: ParameterPoint | None = None,
                           M_schedule=(250, 1000, 4000), replicates: int = 50,
                           d: float = 1.0, seed: int = 0,
                           n_starts: int = 8) -> ConsistencyResult:
    """Median absolute estimation error of (q_1, r) by marker count.

    r errors for boundary fits (r_hat = INFINITY) enter as +inf, which the
    median absorbs as long as boundary hits stay below half the replicates;
    the boundary fraction itself is reported per level.
    """
    if theta0 is None:
        theta0 = ParameterPoint(np.array([0.6, 0.4]), 1.0)
    rows = []
    for M in M_schedule:
        q_err, r_err, boundary, large_r = [], [], 0, 0
        for rep in range(replicates):
            cfg = _base_config(int(M), theta0.K, theta0.q, d, theta0.r, seed,
                               rep, EMISSION_STANDARD)
            data, _ = simulate_linkage(cfg)
            fit = fit_linkage(data, generate_frequencies(cfg),
                              config_map(cfg), n_starts=n_starts, seed=seed)
            q_err.append(float(np.abs(fit.theta_hat.q[0] - theta0.q[0])))
            r_hat = fit.theta_hat.r
            boundary += int(fit.theta_hat.is_admixture)
            large_r += int(r_hat == INFINITY or r_hat > 100.0)
            if theta0.r == INFINITY:
                r_err.append(0.0 if r_hat == INFINITY else math.inf)
            else:
                r_err.append(math.inf if r_hat == INFINITY
                             else abs(r_hat - theta0.r))
        rows.append(ConsistencyRow(int(M), replicates,
                                   float(np.median(q_err)),
                                   float(np.median(r_err)),
                                   boundary / max(replicates, 1),
                                   large_r / max(replicates, 1)))
    return ConsistencyResult(theta0, tuple(rows))
