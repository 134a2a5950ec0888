"""
File: sampler.py
Description:  Synthetic count records. Each LO phase is measured by n
events drawn from the multinomial distribution of the protocol rows.
Every run gets its own PCG64 stream derived from (master_seed, run_index).
"""

import logging

from dataclasses import dataclass, field

import numpy as np

from rootomo.tomography.protocol import outcome_probabilities, regroup_rows
from rootomo.tomography.errors import NegativeProbability, DimensionMismatch

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
PILOT_RUN_INDEX = (1 << 32) - 1
INVERSION_LIMIT = 10 ** 4
PROBABILITY_TOLERANCE = 1e-8


def mix_seed(master_seed, run_index):
    """ SplitMix64 finaliser of master_seed ^ golden * (run_index + 1) """
    z = (int(master_seed) ^ (GOLDEN_GAMMA * (int(run_index) + 1))) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class RunSeed:
    master_seed: int
    run_index: int = 0

    def generator(self):
        return np.random.Generator(np.random.PCG64(mix_seed(self.master_seed, self.run_index)))

    def to_dict(self):
        return {'master_seed': int(self.master_seed), 'run_index': int(self.run_index)}


@dataclass
class CountRecord:
    """ observed counts k_j per setting, aligned with the protocol rows """
    counts: list
    labels: list
    protocol_hash: str = ''
    seed: RunSeed = None
    totals: list = field(init=False)

    def __post_init__(self):
        self.counts = [np.asarray(values, dtype=np.int64) for values in self.counts]
        self.labels = list(self.labels)
        if len(self.counts) != len(self.labels):
            raise DimensionMismatch("%d count vectors for %d label lists"
                                    % (len(self.counts), len(self.labels)))
        for values, labels in zip(self.counts, self.labels):
            if len(values) != len(labels):
                raise DimensionMismatch("%d counts for %d labels" % (len(values), len(labels)))
            if len(values) and values.min() < 0:
                raise ValueError("counts must be nonnegative")
        self.totals = [int(values.sum()) for values in self.counts]

    @property
    def m(self):
        return len(self.counts)

    @property
    def n(self):
        """ events per setting, the common value when all settings agree """
        totals = set(self.totals)
        return self.totals[0] if len(totals) == 1 else None

    def frequencies(self):
        return [values / max(total, 1) for values, total in zip(self.counts, self.totals)]

    def regroup(self, mapping, target):
        """ the same events counted on the rows of another protocol """
        counts = regroup_rows(self.counts, mapping, target)
        return CountRecord([np.rint(values).astype(np.int64) for values in counts],
                           [setting.labels for setting in target.settings],
                           target.hash, self.seed)


def _generator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, RunSeed):
        return seed.generator()
    return RunSeed(int(seed)).generator()


def multinomial_sample(p, n, seed):
    """ counts ~ multinomial(n, p); CDF inversion per event up to 10^4
    events, conditional binomials above """
    p = np.asarray(p, dtype=float)
    if len(p) and p.min() < -PROBABILITY_TOLERANCE:
        raise NegativeProbability("probability %.3e below zero" % p.min())
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if not total > 0:
        raise NegativeProbability("probabilities sum to %.3e" % total)
    if abs(total - 1.0) > PROBABILITY_TOLERANCE:
        logging.debug("renormalizing probabilities summing to %.12f", total)
    p = p / total
    rng = _generator(seed)
    if n <= INVERSION_LIMIT:
        cumulative = np.cumsum(p)
        cumulative[-1] = 1.0
        picks = np.searchsorted(cumulative, rng.random(n), side='right')
        return np.bincount(np.minimum(picks, len(p) - 1), minlength=len(p)).astype(np.int64)
    counts = np.zeros(len(p), dtype=np.int64)
    remaining, mass = int(n), 1.0
    for index, value in enumerate(p[:-1]):
        if remaining == 0 or mass <= 0:
            break
        draw = rng.binomial(remaining, min(1.0, value / mass))
        counts[index] = draw
        remaining -= draw
        mass -= value
    counts[-1] += remaining
    return counts


def run_protocol_simulation(protocol, true_state, seed, n=None):
    """ one multinomial draw of n events (protocol.n by default) per setting """
    n = protocol.n if n is None else n
    rng = _generator(seed)
    counts = [multinomial_sample(p, n, rng) for p in outcome_probabilities(protocol, true_state)]
    labels = [setting.labels for setting in protocol.settings]
    record = CountRecord(counts, labels, protocol.hash,
                         seed if isinstance(seed, RunSeed) else None)
    logging.debug("simulated %d settings x %d events", protocol.m, n)
    return record
