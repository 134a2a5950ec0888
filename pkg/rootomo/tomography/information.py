"""
File: information.py
Description:  Fidelity, the information matrix of a protocol at a state,
the split of its spectrum into the normalization value, the physical
values and the gauge zeros, the asymptotic distribution of the fidelity
loss and the protocol efficiency.

Realification: vec(c) stacks the columns of c and a complex vector v is
embedded as the real vector [Re v; Im v].
"""

import math
import logging
import warnings

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import integrate, optimize, special, stats

from rootomo.tomography.errors import (NotAState, ZeroProbabilityRow,
                                       SpectrumClassificationFailed, NonPositiveEigenvalue)

ZERO_RATIO = 1e-6
ROW_P_FLOOR = 1e-14
STATE_TOLERANCE = 1e-8
OVERLAP_THRESHOLD = 0.999
MONTE_CARLO_SAMPLES = 10 ** 6


def realify(c):
    """ [Re vec(c); Im vec(c)], columns of c stacked """
    flat = np.asarray(c, dtype=complex).T.ravel()
    return np.concatenate([flat.real, flat.imag])


def check_state(rho, what='density matrix', tolerance=STATE_TOLERANCE):
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise NotAState("%s must be square, got %s" % (what, rho.shape))
    if np.max(np.abs(rho - rho.conj().T)) > tolerance:
        raise NotAState("%s is not Hermitian" % what)
    if abs(np.trace(rho).real - 1.0) > 1e-6:
        raise NotAState("%s has trace %.8f" % (what, np.trace(rho).real))
    if np.linalg.eigvalsh(rho)[0] < -tolerance:
        raise NotAState("%s is not positive" % what)
    return rho


def _sqrt_psd(rho):
    values, vectors = np.linalg.eigh(rho)
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.conj().T


def fidelity(rho0, rho):
    """ F = (Tr sqrt(sqrt(rho0) rho sqrt(rho0)))^2 """
    rho0 = check_state(rho0, 'reference state')
    rho = check_state(rho, 'compared state')
    if rho0.shape != rho.shape:
        raise NotAState("states of dimension %d and %d" % (rho0.shape[0], rho.shape[0]))
    root = _sqrt_psd(0.5 * (rho0 + rho0.conj().T))
    inner = root @ rho @ root
    values = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.clip(np.sum(np.sqrt(np.clip(values, 0.0, None))) ** 2, 0.0, 1.0))


def pure_fidelity(ket, rho):
    """ <psi|rho|psi> for a pure reference """
    ket = np.asarray(ket, dtype=complex).ravel()
    return float(np.clip(np.vdot(ket, np.asarray(rho) @ ket).real, 0.0, 1.0))


@dataclass
class InfoMatrix:
    H: np.ndarray
    n: int
    m: int
    s: int
    r: int
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        asymmetry = float(np.max(np.abs(self.H - self.H.T)))
        if asymmetry > 1e-10 * max(1.0, float(np.max(np.abs(self.H)))):
            logging.warning("information matrix asymmetric by %.3e", asymmetry)
        self.H = 0.5 * (self.H + self.H.T)


def information_matrix(c, protocol, p_floor=ROW_P_FLOOR):
    """ H = 2n sum_j v_j v_j^T / p_j, v_j the realified (Lambda_j (x) I_r) vec(c),
    accumulated over every row of every setting """
    c = np.asarray(getattr(c, 'c', c), dtype=complex)
    if c.ndim == 1:
        c = c[:, None]
    s, r = c.shape
    H = np.zeros((2 * r * s, 2 * r * s))
    skipped = 0
    for setting in protocol.settings:
        p, images = setting.apply(c)
        small = p < p_floor
        if np.any(small):
            leaked = np.linalg.norm(images[small].reshape(int(small.sum()), -1), axis=1)
            if np.any(leaked > 1e-6):
                raise ZeroProbabilityRow("row with Lambda c != 0 but p = %.3e" % p[small].min())
            skipped += int(np.sum(small & (leaked > 0)))
        keep = ~small
        flat = images[keep].transpose(0, 2, 1).reshape(int(keep.sum()), r * s)
        rows = np.concatenate([flat.real, flat.imag], axis=1) / np.sqrt(p[keep])[:, None]
        H += rows.T @ rows
    if skipped:
        logging.warning("skipped %d rows with probability below %.0e", skipped, p_floor)
    return InfoMatrix(2.0 * protocol.n * H, protocol.n, protocol.m, s, r,
                      dict(protocol.descriptor))


@dataclass
class InfoSpectrum:
    """ eigenvalues of H split into norm, physical and gauge parts """
    eigenvalues: np.ndarray
    norm_value: float
    physical: np.ndarray
    gauge: np.ndarray
    s: int
    r: int
    n: int
    m: int
    complete: bool = True

    @property
    def nu(self):
        return len(self.physical)

    @property
    def nu_h(self):
        return (2 * self.s - self.r) * self.r

    @property
    def trace(self):
        return float(np.sum(self.eigenvalues))


def classify_spectrum(info, c, zero_ratio=ZERO_RATIO):
    """ the norm value is the eigenvalue whose eigenspace holds c~, the r^2
    smallest of the rest are gauge, the remaining nu are physical """
    c = np.asarray(getattr(c, 'c', c), dtype=complex)
    if c.ndim == 1:
        c = c[:, None]
    values, vectors = np.linalg.eigh(info.H)
    target = realify(c)
    target = target / np.linalg.norm(target)
    rayleigh = float(target @ info.H @ target)
    nearest = int(np.argmin(np.abs(values - rayleigh)))
    scale = max(abs(values[-1]), 1e-300)
    cluster = np.abs(values - values[nearest]) <= 1e-6 * scale
    overlap = float(np.linalg.norm(vectors[:, cluster].T @ target))
    if overlap < OVERLAP_THRESHOLD:
        raise SpectrumClassificationFailed("state overlaps the norm eigenspace by %.4f" % overlap)
    rest = np.sort(np.delete(values, nearest))[::-1]
    r = c.shape[1]
    gauge, physical = rest[len(rest) - r * r:], rest[:len(rest) - r * r]
    threshold = zero_ratio * scale
    complete = bool(np.all(physical > threshold) and np.all(np.abs(gauge) <= threshold))
    expected_norm = 2.0 * info.n * info.m
    if abs(values[nearest] - expected_norm) > 1e-6 * expected_norm:
        logging.warning("norm eigenvalue %.6f differs from 2nm = %.1f", values[nearest],
                        expected_norm)
    if not complete:
        logging.warning("protocol is not informationally complete on this model "
                        "(%d values below %.3e)", int(np.sum(rest <= threshold)), threshold)
    return InfoSpectrum(np.sort(values)[::-1], float(values[nearest]), physical, gauge,
                        c.shape[0], r, info.n, info.m, complete)


@dataclass(frozen=True)
class FidelityLossModel:
    """ 1 - F ~ sum_j d_j xi_j^2 with xi_j standard normal """
    weights: tuple

    @property
    def nu(self):
        return len(self.weights)

    @property
    def mean(self):
        return float(np.sum(self.weights))

    @property
    def variance(self):
        return 2.0 * float(np.sum(np.square(self.weights)))


def fidelity_loss_model(spectrum):
    """ d_j = 1 / (2 h_j) per physical eigenvalue """
    physical = np.asarray(getattr(spectrum, 'physical', spectrum), dtype=float)
    if np.any(physical <= 0):
        raise NonPositiveEigenvalue("physical eigenvalue %.3e is not positive" % physical.min())
    return FidelityLossModel(tuple(float(value) for value in 0.5 / physical))


def _imhof_theta(u, weights, x):
    return 0.5 * np.sum(np.arctan(np.outer(u, weights)), axis=-1) - 0.5 * x * u


def _imhof_rho(u, weights):
    return np.prod((1.0 + np.outer(u, weights) ** 2) ** 0.25, axis=-1)


class LossDistribution(object):
    """ distribution of a positively weighted sum of 1-dof chi-squares """
    def __init__(self, model, seed=0):
        if not isinstance(model, FidelityLossModel):
            model = FidelityLossModel(tuple(model))
        self.model = model
        self.weights = np.asarray(model.weights, dtype=float)
        self.seed = seed
        self._empirical = None
        if np.allclose(self.weights, self.weights[0], rtol=1e-12, atol=0):
            self._exact = stats.chi2(df=len(self.weights), scale=self.weights[0])
        else:
            self._exact = None

    @property
    def mean(self):
        return self.model.mean

    @property
    def variance(self):
        return self.model.variance

    def _empirical_samples(self):
        if self._empirical is None:
            logging.warning("falling back to %d Monte Carlo samples", MONTE_CARLO_SAMPLES)
            self._empirical = np.sort(self.sample(MONTE_CARLO_SAMPLES, self.seed))
        return self._empirical

    def _quad(self, integrand, what):
        with warnings.catch_warnings():
            warnings.simplefilter('error', integrate.IntegrationWarning)
            try:
                value, error = integrate.quad(integrand, 0.0, np.inf, limit=400,
                                              epsabs=1e-9, epsrel=1e-9)
            except integrate.IntegrationWarning as err:
                logging.debug("%s quadrature: %s", what, err)
                return None
        return value if error < 1e-6 else None

    def _bessel_pdf(self, x):
        first, second = self.weights
        scale = 4.0 * first * second
        # ive(0, z) = exp(-|z|) I0(z) keeps the product finite for large x
        z = (first - second) * x / scale
        return (np.exp(-(first + second) * x / scale + abs(z)) * special.ive(0, z)
                / (2.0 * math.sqrt(first * second)))

    def pdf(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self._exact is not None:
            return self._exact.pdf(x)
        if len(self.weights) == 2:
            return np.where(x > 0, self._bessel_pdf(np.clip(x, 0, None)), 0.0)
        values = []
        for point in x:
            if point <= 0:
                values.append(0.0)
                continue
            value = self._quad(lambda u: math.cos(_imhof_theta(np.array([u]), self.weights,
                                                                point)[0])
                               / _imhof_rho(np.array([u]), self.weights)[0], 'pdf')
            if value is None:
                samples = self._empirical_samples()
                width = 0.01 * self.mean
                value = np.pi * np.sum(np.abs(samples - point) < width) / (len(samples) * width)
            values.append(value / (2.0 * math.pi))
        return np.clip(np.array(values), 0.0, None)

    def cdf(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self._exact is not None:
            return self._exact.cdf(x)
        values = []
        for point in x:
            if point <= 0:
                values.append(0.0)
                continue
            if len(self.weights) == 2:
                value = integrate.quad(self._bessel_pdf, 0.0, point, limit=200)[0]
                values.append(value)
                continue
            value = self._quad(lambda u: math.sin(_imhof_theta(np.array([u]), self.weights,
                                                                point)[0])
                               / (u * _imhof_rho(np.array([u]), self.weights)[0])
                               if u > 0 else 0.5 * (np.sum(self.weights) - point), 'cdf')
            if value is None:
                values.append(np.searchsorted(self._empirical_samples(), point, side='right')
                              / MONTE_CARLO_SAMPLES)
            else:
                values.append(0.5 - value / math.pi)
        return np.clip(np.array(values), 0.0, 1.0)

    def ppf(self, q):
        q = np.atleast_1d(np.asarray(q, dtype=float))
        if self._exact is not None:
            return self._exact.ppf(q)
        upper = self.mean + 10.0 * math.sqrt(self.variance)
        while self.cdf(upper)[0] < max(q):
            upper *= 2.0
        return np.array([optimize.brentq(lambda x, level=level: self.cdf(x)[0] - level,
                                         0.0, upper, xtol=1e-14) for level in q])

    def sample(self, size, seed=None):
        """ direct simulation of sum_j d_j xi_j^2 """
        if isinstance(seed, np.random.Generator):
            rng = seed
        else:
            rng = np.random.Generator(np.random.PCG64(self.seed if seed is None else seed))
        return rng.chisquare(1.0, size=(size, len(self.weights))) @ self.weights


def loss_distribution(model, seed=0):
    return LossDistribution(model, seed)


def minimal_mean_loss(s, r, n, m):
    """ nu^2 / (4 n m (s - 1)): total physical information 2nm(s - 1)
    spread evenly over the nu physical directions """
    nu = (2 * s - r) * r - 1
    return nu ** 2 / (4.0 * n * m * (s - 1))


def protocol_efficiency(spectrum, s=None, r=None, n=None, m=None):
    """ e_P = <1 - F>_min / <1 - F> """
    s = spectrum.s if s is None else s
    r = spectrum.r if r is None else r
    n = spectrum.n if n is None else n
    m = spectrum.m if m is None else m
    mean_loss = fidelity_loss_model(spectrum).mean
    return minimal_mean_loss(s, r, n, m) / mean_loss


def complete_information(spectrum):
    """ physical-part trace and full trace of H """
    return {'physical': float(np.sum(spectrum.physical)), 'total': spectrum.trace}


def ideal_reference_spectrum(s, r, n, m):
    """ physical eigenvalues of the ideal protocol, all equal to 2nm(s - 1) / nu """
    nu = (2 * s - r) * r - 1
    return np.full(nu, 2.0 * n * m * (s - 1) / nu)


def loss_curve(distribution, points=200, upper_quantile=0.999):
    """ loss, pdf, cdf table from zero to a high quantile """
    upper = float(distribution.ppf([upper_quantile])[0])
    loss = np.linspace(0.0, upper, points)
    return pd.DataFrame({'loss': loss, 'pdf': distribution.pdf(loss),
                         'cdf': distribution.cdf(loss)})


def spectrum_report(spectrum):
    """ JSON-able summary of a classified spectrum """
    model = fidelity_loss_model(spectrum)
    return {
        'eigenvalues': [float(value) for value in spectrum.eigenvalues],
        'norm_value': spectrum.norm_value,
        'physical': [float(value) for value in spectrum.physical],
        'gauge': [float(value) for value in spectrum.gauge],
        'nu': spectrum.nu,
        'nu_h': spectrum.nu_h,
        'complete': spectrum.complete,
        'e_p': protocol_efficiency(spectrum),
        'mean_loss': model.mean,
        'mean_loss_min': minimal_mean_loss(spectrum.s, spectrum.r, spectrum.n, spectrum.m),
        'information': complete_information(spectrum),
    }
