"""Estimators and hypothesis tests shared by the acceptance experiments.

Thin, deterministic wrappers around scipy: ensemble means with normal
confidence intervals, two-sample Kolmogorov-Smirnov, chi-square uniformity.
The repo-wide conventions are three-sigma intervals and p > 0.01 acceptance
thresholds; ``make_report`` freezes both into a JSON-serializable record.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _sps

from .errors import ConfigError, TooFewSamples

#: repo-wide significance floor for distributional tests
P_THRESHOLD = 0.01
#: repo-wide confidence level for normal intervals (three sigma)
SIGMA_LEVEL = 3.0


@dataclass(frozen=True)
class Ensemble:
    """Scalar samples from independent runs, with their seeds."""

    values: tuple
    seeds: tuple = ()
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if self.seeds:
            if len(self.seeds) != len(vals):
                raise ConfigError("one seed per sample required")
            if len(set(self.seeds)) != len(self.seeds):
                raise ConfigError("seeds must be distinct")

    def __len__(self):
        return len(self.values)

    def as_array(self):
        return np.asarray(self.values, dtype=float)


def mean_ci(e, level=SIGMA_LEVEL):
    """Sample mean and half-width of the +-level-sigma normal interval.

    ``level`` is in standard errors (the repo convention is 3).  Requires
    at least two samples so the variance estimate exists; constant samples
    give half-width zero.
    """
    x = e.as_array() if isinstance(e, Ensemble) else np.asarray(e, dtype=float)
    if x.size < 2:
        raise TooFewSamples(f"need >= 2 samples for a variance, got {x.size}")
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / np.sqrt(x.size))
    return mean, level * se


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov statistic and p-value."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise TooFewSamples("KS test needs nonempty samples")
    res = _sps.ks_2samp(a, b)
    return float(res.statistic), float(res.pvalue)


def ks_one_sample(a, cdf):
    """One-sample Kolmogorov-Smirnov test of ``a`` against a callable CDF."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        raise TooFewSamples("KS test needs a nonempty sample")
    res = _sps.ks_1samp(a, cdf)
    return float(res.statistic), float(res.pvalue)


def chi2_uniformity(counts, expected=None):
    """Pearson chi-square statistic and p-value for observed cell counts.

    ``expected`` defaults to equal cells summing to the observed total.
    At least two cells are required (one cell has zero degrees of freedom).
    """
    counts = np.asarray(counts, dtype=float)
    if counts.size < 2:
        raise TooFewSamples("chi-square needs >= 2 cells")
    if expected is None:
        expected = np.full(counts.size, counts.sum() / counts.size)
    else:
        expected = np.asarray(expected, dtype=float)
        if expected.shape != counts.shape:
            raise ConfigError("counts and expected must have the same shape")
    if np.any(expected <= 0):
        raise ConfigError("expected counts must be positive")
    res = _sps.chisquare(counts, expected)
    return float(res.statistic), float(res.pvalue)


def make_report(name, statistic, p, threshold=P_THRESHOLD):
    """Pass/fail record for one distributional test, JSON-serializable."""
    return {
        "name": str(name),
        "statistic": float(statistic),
        "p": float(p),
        "pass": bool(p > threshold),
    }


def write_reports(reports, path):
    """Write a list of test reports as a JSON array."""
    with open(path, "w") as f:
        json.dump(list(reports), f, indent=2)
        f.write("\n")
