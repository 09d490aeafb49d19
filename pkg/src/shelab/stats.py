"""Statistics on height-residual ensembles.

The covariance estimator averages lagged products over spatial translates
within each replicate (valid because the residual law is translation
invariant in the bulk) and over replicates.  Standard errors come from the
per-replicate block means only: translates inside one replicate carry the
very long-range correlation under study, so per-translate errors would be
badly anticonservative.

Accumulators are mergeable by construction: each replicate contributes an
immutable record keyed by replicate_id, merging is a disjoint union, and
finalize reduces the records in canonical replicate_id order.  Merged
partials from any worker layout are therefore bit-identical to single-pass
accumulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

__all__ = [
    "CovarianceEstimate",
    "SpatialAverageSample",
    "TestReport",
    "CovarianceAccumulator",
    "estimate_height_covariance",
    "spatial_average",
    "ks_normality",
    "fdd_covariance",
]


@dataclass
class CovarianceEstimate:
    t: float
    lags: np.ndarray
    cov: np.ndarray
    se: np.ndarray
    n_effective: np.ndarray

    def __post_init__(self):
        if not (len(self.lags) == len(self.cov) == len(self.se) == len(self.n_effective)):
            raise ValueError("lags, cov, se, n_effective must share length")


@dataclass
class SpatialAverageSample:
    """One realization of (N log N)^(-1/2) * integral_0^N (h - mean) dx."""

    t: float
    N: float
    value: float


@dataclass
class TestReport:
    name: str
    statistic: float
    p_value: float
    sample_size: int
    significance: float

    @property
    def reject(self) -> bool:
        return self.p_value < self.significance


class CovarianceAccumulator:
    """Mergeable accumulator of residual rows over a common bulk window.

    add() stores one replicate's residual values on the window (with a
    validity mask); merge() unions disjoint replicate sets; finalize()
    computes the translate-averaged covariance at the requested lags.
    Centering uses the per-cell ensemble mean, which makes the estimate
    exactly invariant to adding any deterministic profile f(x).
    """

    def __init__(self, window_positions: np.ndarray):
        self.positions = np.asarray(window_positions, dtype=float)
        self._rows = {}

    @property
    def count(self) -> int:
        return len(self._rows)

    def add(self, replicate_id: int, values: np.ndarray, valid=None):
        if replicate_id in self._rows:
            raise ValueError(f"duplicate replicate_id {replicate_id}")
        values = np.asarray(values, dtype=float)
        if values.shape != self.positions.shape:
            raise ValueError("row length does not match the window")
        if valid is None:
            valid = np.isfinite(values)
        self._rows[replicate_id] = (values, np.asarray(valid, dtype=bool))

    def merge(self, other: "CovarianceAccumulator") -> "CovarianceAccumulator":
        if not np.array_equal(self.positions, other.positions):
            raise ValueError("cannot merge accumulators over different windows")
        dup = set(self._rows) & set(other._rows)
        if dup:
            raise ValueError(f"replicate ids present in both partials: {sorted(dup)[:4]}")
        out = CovarianceAccumulator(self.positions)
        out._rows = {**self._rows, **other._rows}
        return out

    def matrix(self):
        """(replicates x window) values and mask in replicate_id order."""
        ids = sorted(self._rows)
        vals = np.stack([self._rows[i][0] for i in ids])
        ok = np.stack([self._rows[i][1] for i in ids])
        return ids, vals, ok

    def finalize(self, t: float, lags, decorrelation_window: float = 1.0) -> CovarianceEstimate:
        ids, vals, ok = self.matrix()
        m = len(ids)
        if m < 2:
            raise ValueError("need at least 2 replicates")
        dx = self.positions[1] - self.positions[0]
        nwin = vals.shape[1]
        work = np.where(ok, vals, 0.0)
        counts = ok.sum(axis=0)
        if np.any(counts == 0):
            raise ValueError("window contains cells with no valid replicate")
        mu = work.sum(axis=0) / counts
        dev = np.where(ok, vals - mu, 0.0)

        span = self.positions[-1] - self.positions[0]
        lags = np.asarray(lags, dtype=float)
        cov = np.empty(lags.size)
        se = np.empty(lags.size)
        neff = np.empty(lags.size)
        bessel = m / (m - 1)
        for i, lag in enumerate(lags):
            lc = round(lag / dx)
            if abs(lag / dx - lc) > 1e-6:
                raise ValueError(f"lag {lag} is not a multiple of dx={dx}")
            if lc >= nwin:
                raise ValueError(f"lag {lag} exceeds the window span")
            a = dev[:, lc:] if lc else dev
            b = dev[:, : nwin - lc] if lc else dev
            pair_ok = ok[:, lc:] & ok[:, : nwin - lc] if lc else ok
            n_tr = pair_ok.sum(axis=1)
            if np.any(n_tr == 0):
                raise ValueError("a replicate has no valid translate at some lag")
            per_rep = (a * b * pair_ok).sum(axis=1) / n_tr
            cov[i] = per_rep.mean() * bessel
            se[i] = per_rep.std(ddof=1) / math.sqrt(m) * bessel
            neff[i] = m * max(1.0, (span - lag) / decorrelation_window)
        return CovarianceEstimate(t=t, lags=lags, cov=cov, se=se, n_effective=neff)


def estimate_height_covariance(residuals, t: float, lags, bulk_window,
                               decorrelation_window: float = 1.0) -> CovarianceEstimate:
    """Translate-averaged spatial covariance of the height residual.

    residuals: sequence of HeightResidual replicates (or (values, valid)
    pairs on a shared grid).  bulk_window is (lo, hi) in position units.
    Covariance of h equals covariance of r exactly: the two differ by the
    deterministic profile log p_t, which per-cell centering removes.
    """
    lo, hi = bulk_window
    first = residuals[0]
    pos = first.grid.positions()
    sel = (pos >= lo - 1e-9) & (pos <= hi + 1e-9)
    if not sel.any():
        raise ValueError("empty bulk window")
    acc = CovarianceAccumulator(pos[sel])
    for i, r in enumerate(residuals):
        if abs(r.time - t) > 1e-9:
            raise ValueError("residual ensemble mixes times")
        acc.add(i, r.values[sel], r.valid[sel])
    return acc.finalize(t, lags, decorrelation_window)


def spatial_average(residual, mean_residual, N: float) -> SpatialAverageSample:
    """Normalized spatial average (N ln N)^(-1/2) * integral_0^N (r - m) dx.

    mean_residual is the stationary mean estimate: a scalar (grand mean from
    a disjoint calibration set) or a per-cell profile over [0, N].  The h-
    and r-centerings coincide because log p_t cancels in h - E[h].  Natural
    logarithm; N >= 3 so log N > 1.
    """
    if N < 3:
        raise ValueError("N must be >= 3 so that log N > 1")
    g = residual.grid
    i0 = g.origin_index
    iN = g.index_of(float(N))
    window = slice(i0, iN + 1)
    vals = residual.values[window]
    if not residual.valid[window].all():
        raise ValueError("invalid (underflowed) cells inside [0, N]")
    centered = vals - np.asarray(mean_residual)
    integral = np.trapezoid(centered, dx=g.dx)
    return SpatialAverageSample(
        t=residual.time, N=float(N),
        value=float(integral / math.sqrt(N * math.log(N))))


def ks_normality(samples, significance: float = 0.001) -> TestReport:
    """Kolmogorov-Smirnov test of standardized samples against N(0,1).

    Standardization uses the sample mean/SD.  Fewer than 50 samples raises
    (underpowered); constant input reports a degenerate rejection with
    statistic 0.5.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 50:
        raise ValueError("ks_normality needs at least 50 samples")
    sd = x.std(ddof=1)
    if sd == 0.0:
        return TestReport(name="ks_normality", statistic=0.5, p_value=0.0,
                          sample_size=int(x.size), significance=significance)
    res = sps.kstest((x - x.mean()) / sd, "norm")
    return TestReport(name="ks_normality", statistic=float(res.statistic),
                      p_value=float(res.pvalue), sample_size=int(x.size),
                      significance=significance)


def fdd_covariance(samples_t1, samples_t2):
    """Sample covariance of paired spatial-average samples, jackknife SE.

    Pairs must come from the same replicate.  Returns (cov, se).  For
    identical inputs this equals the sample variance exactly.
    """
    a = np.asarray(samples_t1, dtype=float)
    b = np.asarray(samples_t2, dtype=float)
    if a.shape != b.shape:
        raise ValueError("paired sample arrays must have equal length")
    n = a.size
    if n < 2:
        raise ValueError("need at least 2 pairs")
    cov = float(np.cov(a, b, ddof=1)[0, 1])
    if n < 3:
        return cov, float("nan")
    # leave-one-out covariances
    ma = (a.sum() - a) / (n - 1)
    mb = (b.sum() - b) / (n - 1)
    loo = ((a * b).sum() - a * b - (n - 1) * ma * mb) / (n - 2)
    se = math.sqrt((n - 1) / n * ((loo - loo.mean()) ** 2).sum())
    return cov, se
