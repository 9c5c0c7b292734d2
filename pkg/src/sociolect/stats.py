"""Shared statistical machinery: percentiles, z-scores, U-tests, correlations, OLS."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy import stats as _scipy_stats


def percentile_cutoff(values: Sequence[float], p: float = 98.0) -> float:
    """Nearest-rank percentile (no interpolation) of the pooled values."""
    vals = sorted(values)
    if not vals:
        raise ValueError("empty value list")
    if not 0 < p <= 100:
        raise ValueError("percentile must be in (0, 100]")
    # guard against float fuzz like 0.98 * 100 = 98.000000000000014
    rank = math.ceil(p * len(vals) / 100.0 - 1e-9)
    rank = min(max(rank, 1), len(vals))
    return vals[rank - 1]


def zscore(values: Sequence[float]) -> np.ndarray:
    """Standardize to mean 0, population sd 1. Constant input is an error."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        raise ValueError("need at least two values to standardize")
    sd = arr.std()
    if sd == 0:
        raise ValueError("cannot z-score a constant sequence")
    return (arr - arr.mean()) / sd


def _midranks(pooled: Sequence[float]) -> list[float]:
    n = len(pooled)
    order = sorted(range(n), key=lambda i: pooled[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        mid = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


@dataclass(frozen=True)
class UTestResult:
    u: float
    p: float


def mann_whitney_u(a: Sequence[float], b: Sequence[float]) -> UTestResult:
    """Two-sided Mann-Whitney U test.

    Exact enumeration of all group labelings when len(a) + len(b) <= 20,
    otherwise the normal approximation with tie and continuity corrections.
    U counts pairs where a beats b (ties count half).
    """
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise ValueError("both samples must be non-empty")
    pooled = list(a) + list(b)
    ranks = _midranks(pooled)
    u = sum(ranks[:n]) - n * (n + 1) / 2.0
    mean = n * m / 2.0
    total_n = n + m
    if total_n <= 20:
        dev = abs(u - mean)
        extreme = 0
        count = 0
        base = n * (n + 1) / 2.0
        for idx in combinations(range(total_n), n):
            ru = sum(ranks[i] for i in idx) - base
            count += 1
            if abs(ru - mean) >= dev - 1e-12:
                extreme += 1
        return UTestResult(u=u, p=extreme / count)
    tie_term = sum(t ** 3 - t for t in Counter(pooled).values())
    var = n * m / 12.0 * ((total_n + 1) - tie_term / (total_n * (total_n - 1)))
    if var <= 0:
        return UTestResult(u=u, p=1.0)
    z = max(abs(u - mean) - 0.5, 0.0) / math.sqrt(var)
    p = min(1.0, math.erfc(z / math.sqrt(2.0)))
    return UTestResult(u=u, p=p)


def correlations(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """(Pearson r, Spearman r_s). Spearman is Pearson over midranks."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape or xa.size < 2:
        raise ValueError("need two equal-length sequences of length >= 2")
    pearson = _pearson(xa, ya)
    spearman = _pearson(np.array(_midranks(list(xa))), np.array(_midranks(list(ya))))
    return pearson, spearman


def _pearson(xa: np.ndarray, ya: np.ndarray) -> float:
    xc = xa - xa.mean()
    yc = ya - ya.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0:
        raise ValueError("zero variance input")
    return float(xc @ yc) / denom


class RankDeficientError(ValueError):
    def __init__(self, columns: list[str]):
        self.columns = columns
        super().__init__(f"design matrix is rank deficient; collinear columns: {columns}")


@dataclass(frozen=True)
class Coefficient:
    name: str
    estimate: float
    stderr: float
    p_value: float

    @property
    def stars(self) -> str:
        if self.p_value < 0.001:
            return "***"
        if self.p_value < 0.01:
            return "**"
        if self.p_value < 0.05:
            return "*"
        return ""


@dataclass(frozen=True)
class RegressionResult:
    intercept: Coefficient
    coefficients: tuple[Coefficient, ...]
    r_squared: float
    adj_r_squared: float
    n: int


def ols(
    X: Sequence[Sequence[float]],
    y: Sequence[float],
    feature_names: Sequence[str] | None = None,
) -> RegressionResult:
    """Ordinary least squares with an intercept.

    Standard errors use the unbiased residual variance; p-values come from
    the t distribution with n - k - 1 degrees of freedom.
    """
    Xa = np.asarray(X, dtype=float)
    if Xa.ndim == 1:
        Xa = Xa.reshape(-1, 1)
    ya = np.asarray(y, dtype=float)
    n, k = Xa.shape
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(k)]
    if len(names) != k:
        raise ValueError("feature_names length must match the number of columns")
    if n < k + 2:
        raise ValueError("need at least #features + 2 observations")
    design = np.column_stack([np.ones(n), Xa])
    if np.linalg.matrix_rank(design) < k + 1:
        bad = []
        for j in range(1, k + 1):
            if np.linalg.matrix_rank(design[:, : j + 1]) == np.linalg.matrix_rank(design[:, :j]):
                bad.append(names[j - 1])
        raise RankDeficientError(bad)
    xtx = design.T @ design
    beta = np.linalg.solve(xtx, design.T @ ya)
    resid = ya - design @ beta
    rss = float(resid @ resid)
    dof = n - (k + 1)
    sigma2 = rss / dof
    cov = sigma2 * np.linalg.inv(xtx)
    se = np.sqrt(np.diag(cov))
    tvals = np.divide(beta, se, out=np.zeros_like(beta), where=se > 0)
    pvals = 2.0 * _scipy_stats.t.sf(np.abs(tvals), dof)
    tss = float(((ya - ya.mean()) ** 2).sum())
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    adj = 1.0 - (1.0 - r2) * (n - 1) / dof
    coeffs = tuple(
        Coefficient(names[j - 1], float(beta[j]), float(se[j]), float(pvals[j]))
        for j in range(1, k + 1)
    )
    intercept = Coefficient("intercept", float(beta[0]), float(se[0]), float(pvals[0]))
    return RegressionResult(intercept=intercept, coefficients=coeffs,
                            r_squared=r2, adj_r_squared=adj, n=n)
