"""
File: adequacy.py
Description:  Chi-squared adequacy of tomography results. Rows of each LO
setting are grouped until every bin expects at least min_expected events,
then chi2 = sum (expected - observed)^2 / expected is compared with a
chi-square law whose degrees of freedom depend on what is compared:

  theory vs experiment   nu_ad = n_bar - m
  model vs experiment    nu_ad = n_bar - m - nu
  theory vs model        nu_ad = nu
"""

import enum
import logging

from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from rootomo.tomography.errors import PhaseTooSparse, ZeroExpectedBin, NonPositiveDof

MIN_EXPECTED = 5.0
SIGNIFICANCE_LEVELS = (0.01, 0.05, 0.1)


class AdequacyMode(enum.Enum):
    THEORY_VS_EXPERIMENT = 'theory_vs_experiment'
    MODEL_VS_EXPERIMENT = 'model_vs_experiment'
    THEORY_VS_MODEL = 'theory_vs_model'


@dataclass
class GroupedBins:
    """ per setting: the row indices of every bin and its expected and
    observed totals """
    members: list
    expected: list
    observed: list

    @property
    def n_bar(self):
        return sum(len(values) for values in self.expected)

    @property
    def m(self):
        return len(self.expected)

    def summary(self):
        return {'n_bar': self.n_bar, 'bins_per_setting': [len(values) for values in self.expected]}


def _row_values(values):
    counts = getattr(values, 'counts', values)
    return [np.asarray(row, dtype=float) for row in counts]


def group_bins(expected, observed, min_expected=MIN_EXPECTED):
    """ greedy accumulation in row order until a bin expects min_expected
    events; an undersized remainder joins the last bin """
    expected = _row_values(expected)
    observed = _row_values(observed)
    members, expected_totals, observed_totals = [], [], []
    for index, (row_expected, row_observed) in enumerate(zip(expected, observed)):
        if len(row_expected) != len(row_observed):
            raise ValueError("setting %d: %d expected rows, %d observed"
                             % (index, len(row_expected), len(row_observed)))
        if row_expected.sum() < 2 * min_expected:
            raise PhaseTooSparse("setting %d expects %.3f events in total"
                                 % (index, row_expected.sum()))
        bins, current, accumulated = [], [], 0.0
        for row, value in enumerate(row_expected):
            current.append(row)
            accumulated += value
            if accumulated >= min_expected:
                bins.append(current)
                current, accumulated = [], 0.0
        if current:
            bins[-1].extend(current)
        members.append([np.array(rows) for rows in bins])
        expected_totals.append(np.array([row_expected[rows].sum() for rows in bins]))
        observed_totals.append(np.array([row_observed[rows].sum() for rows in bins]))
    grouped = GroupedBins(members, expected_totals, observed_totals)
    logging.debug("grouped into %d bins over %d settings", grouped.n_bar, grouped.m)
    return grouped


def chi2_statistic(bins):
    expected = np.concatenate(bins.expected)
    observed = np.concatenate(bins.observed)
    if np.any(expected <= 0):
        raise ZeroExpectedBin("a bin expects no events")
    return float(np.sum((expected - observed) ** 2 / expected))


def degrees_of_freedom(mode, n_bar, m, nu):
    mode = AdequacyMode(mode)
    if mode is AdequacyMode.THEORY_VS_EXPERIMENT:
        dof = n_bar - m
    elif mode is AdequacyMode.MODEL_VS_EXPERIMENT:
        dof = n_bar - m - nu
    else:
        dof = nu
    if dof <= 0:
        raise NonPositiveDof("%s leaves %d degrees of freedom (n_bar=%d, m=%d, nu=%d)"
                             % (mode.value, dof, n_bar, m, nu))
    return int(dof)


def alpha_crit(chi2, nu_ad):
    """ chi-square survival function, the regularized upper incomplete gamma """
    return float(special.gammaincc(nu_ad / 2.0, chi2 / 2.0))


@dataclass
class AdequacyReport:
    mode: AdequacyMode
    chi2: float
    nu_ad: int
    alpha_crit: float
    n_bar: int
    grouping: dict

    def to_dict(self):
        return {'mode': self.mode.value, 'chi2': self.chi2, 'nu_ad': self.nu_ad,
                'alpha_crit': self.alpha_crit, 'n_bar': self.n_bar, 'grouping': self.grouping}


def adequacy_report(mode, expected, observed, nu, min_expected=MIN_EXPECTED):
    """ grouping, statistic, dof and alpha_crit in one step """
    mode = AdequacyMode(mode)
    bins = group_bins(expected, observed, min_expected)
    chi2 = chi2_statistic(bins)
    nu_ad = degrees_of_freedom(mode, bins.n_bar, bins.m, nu)
    return AdequacyReport(mode, chi2, nu_ad, alpha_crit(chi2, nu_ad), bins.n_bar,
                          bins.summary())


def is_adequate(report, alpha0=0.05):
    return report.alpha_crit > alpha0


def ks_against_loss(samples, distribution):
    """ Kolmogorov-Smirnov statistic and p-value of observed losses """
    result = stats.kstest(np.asarray(samples, dtype=float),
                          lambda x: distribution.cdf(x))
    return float(result.statistic), float(result.pvalue)


def loss_histogram_adequacy(samples, distribution, min_expected=MIN_EXPECTED, max_bins=10):
    """ chi-squared agreement of observed fidelity losses with the theoretical
    loss distribution, over bins of equal theoretical probability """
    samples = np.asarray(samples, dtype=float)
    n_bins = int(min(max_bins, len(samples) // min_expected))
    if n_bins < 2:
        raise PhaseTooSparse("%d losses cannot fill two bins of %g" % (len(samples), min_expected))
    edges = distribution.ppf(np.arange(1, n_bins) / n_bins)
    observed = np.bincount(np.searchsorted(edges, samples, side='right'),
                           minlength=n_bins).astype(float)
    expected = np.full(n_bins, len(samples) / n_bins)
    chi2 = float(np.sum((expected - observed) ** 2 / expected))
    nu_ad = degrees_of_freedom(AdequacyMode.THEORY_VS_EXPERIMENT, n_bins, 1, 0)
    return AdequacyReport(AdequacyMode.THEORY_VS_EXPERIMENT, chi2, nu_ad,
                          alpha_crit(chi2, nu_ad), n_bins, {'n_bar': n_bins,
                                                            'bins_per_setting': [n_bins]})
