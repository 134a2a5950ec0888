"""
File: estimator.py
Description:  Root-approach maximum likelihood. The state is kept as its
purification c (s x r, Tr cc^dagger = 1) and the likelihood equation
I_tot c = J(c) c is solved by a damped fixed-point iteration. Also the
zero approximation (a squeezed coherent state fitted to the data, whose
displaced Fock family becomes the model basis) and the reduction of a
large model to its principal components.
"""

import logging

from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

from rootomo.tomography import fock
from rootomo.tomography.protocol import outcome_probabilities
from rootomo.tomography.errors import (NotAState, DimensionMismatch, NotConverged,
                                       SingularItot, LeakageExceeded)

P_FLOOR = 1e-300
MISFIT_THRESHOLD = 1e-12
NORM_TOLERANCE = 1e-10
MAX_REJECTIONS = 20
LIKELIHOOD_NOISE = 1e-12


@dataclass
class PurifiedState:
    """ c with rho = c c^dagger """
    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=complex)
        if c.ndim == 1:
            c = c[:, None]
        if c.ndim != 2 or c.shape[1] > c.shape[0]:
            raise DimensionMismatch("purification must be s x r with r <= s, got %s"
                                    % (c.shape,))
        norm = np.vdot(c, c).real
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise NotAState("Tr(cc^dagger) = %.12f" % norm)
        self.c = c

    @classmethod
    def normalized(cls, c):
        c = np.asarray(c, dtype=complex)
        return cls(c / np.linalg.norm(c))

    @classmethod
    def from_density(cls, rho, rank=None):
        """ the rank-r purification built from the leading eigenvectors """
        values, vectors = np.linalg.eigh(0.5 * (rho + np.conj(rho).T))
        order = np.argsort(values)[::-1]
        rank = rank or int(np.sum(values > 1e-12)) or 1
        keep = order[:rank]
        return cls.normalized(vectors[:, keep] * np.sqrt(np.clip(values[keep], 0, None)))

    @property
    def s(self):
        return self.c.shape[0]

    @property
    def r(self):
        return self.c.shape[1]

    @property
    def rho(self):
        return self.c @ self.c.conj().T


@dataclass(frozen=True)
class ReconstructionSettings:
    rank: int = 1
    max_iterations: int = 20000
    tolerance: float = 1e-10
    residual_tolerance: float = 1e-8
    mixing: float = 0.3
    restarts: int = 0
    seed: int = 0
    p_floor: float = P_FLOOR

    def __post_init__(self):
        if self.tolerance <= 0 or self.residual_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if not 0.0 <= self.mixing < 1.0:
            raise ValueError("mixing parameter must lie in [0, 1), got %r" % self.mixing)
        if self.rank < 1:
            raise ValueError("rank must be at least 1")


@dataclass
class ReconstructionResult:
    state: PurifiedState
    log_likelihood: float
    iterations: int
    converged: bool
    residual: float

    @property
    def c_hat(self):
        return self.state.c

    @property
    def rho_hat(self):
        return self.state.rho


class LikelihoodProblem(object):
    """ the rows with k_j > 0 of every setting, as padded factor tensors,
    together with I_tot = sum over settings of n_setting * sum_j Lambda_j """
    def __init__(self, counts, protocol, p_floor=P_FLOOR):
        if counts.m != protocol.m:
            raise DimensionMismatch("%d count vectors for %d settings" % (counts.m, protocol.m))
        self.p_floor = p_floor
        self.factors = []
        self.counts = []
        self.itot = np.zeros((protocol.dim, protocol.dim), dtype=complex)
        for setting, values, total in zip(protocol.settings, counts.counts, counts.totals):
            if len(values) != setting.n_rows:
                raise DimensionMismatch("%d counts for %d protocol rows"
                                        % (len(values), setting.n_rows))
            rows = np.flatnonzero(values)
            self.factors.append(setting.row_factors(rows))
            self.counts.append(values[rows].astype(float))
            self.itot += total * setting.completeness()
        self.dim = protocol.dim

    def probabilities(self, c):
        return [np.sum(np.abs(np.einsum('jax,xr->jar', factors, c)) ** 2, axis=(1, 2))
                for factors in self.factors]

    def log_likelihood(self, c):
        return sum(float(np.dot(counts, np.log(np.maximum(p, self.p_floor))))
                   for counts, p in zip(self.counts, self.probabilities(c)))

    def j_apply(self, c):
        """ J(c) c = sum_j (k_j / p_j) Lambda_j c """
        result = np.zeros_like(c)
        for factors, counts in zip(self.factors, self.counts):
            amplitudes = np.einsum('jax,xr->jar', factors, c)
            p = np.sum(np.abs(amplitudes) ** 2, axis=(1, 2))
            weights = counts / np.maximum(p, self.p_floor)
            result += np.einsum('j,jax,jar->xr', weights, factors.conj(), amplitudes)
        return result

    def misfit_rows(self, c, threshold=MISFIT_THRESHOLD):
        return sum(int(np.sum(p < threshold)) for p in self.probabilities(c))


def log_likelihood(c, counts, protocol, p_floor=P_FLOOR):
    """ sum_j k_j ln p_j(c) over the rows with k_j > 0 """
    c = getattr(c, 'c', c)
    c = np.asarray(c, dtype=complex)
    if c.ndim == 1:
        c = c[:, None]
    if c.shape[0] != protocol.dim:
        raise DimensionMismatch("state of dimension %d on a %d-dim protocol"
                                % (c.shape[0], protocol.dim))
    if counts.m != protocol.m:
        raise DimensionMismatch("%d count vectors for %d settings" % (counts.m, protocol.m))
    total = 0.0
    misfit = 0
    for values, setting in zip(counts.counts, protocol.settings):
        p = np.clip(setting.probabilities(c), 0.0, None)
        if len(values) != len(p):
            raise DimensionMismatch("%d counts for %d protocol rows" % (len(values), len(p)))
        observed = values > 0
        misfit += int(np.sum(observed & (p < MISFIT_THRESHOLD)))
        total += float(np.dot(values[observed], np.log(np.maximum(p[observed], p_floor))))
    if misfit:
        logging.warning("%d observed outcomes have model probability below %.0e",
                        misfit, MISFIT_THRESHOLD)
    return total


def initial_state(s, r, seed=0, noise=1e-3):
    """ I_{s x r} / sqrt(r) plus seeded complex noise, normalized """
    rng = np.random.Generator(np.random.PCG64(seed))
    c = np.eye(s, r, dtype=complex) / np.sqrt(r)
    c += noise * (rng.standard_normal((s, r)) + 1j * rng.standard_normal((s, r)))
    return PurifiedState.normalized(c)


def random_state(s, r, rng):
    """ Ginibre-distributed purification """
    return PurifiedState.normalized(rng.standard_normal((s, r))
                                    + 1j * rng.standard_normal((s, r)))


def _factor_itot(itot):
    try:
        factor = linalg.lu_factor(itot, check_finite=True)
    except (linalg.LinAlgError, ValueError) as err:
        logging.error("total information operator: %s", err)
        raise SingularItot(str(err)) from err
    if np.linalg.cond(itot) > 1e12:
        raise SingularItot("total information operator has condition number %.3e"
                           % np.linalg.cond(itot))
    return factor


def _residual(jc, itot_c):
    return float(np.linalg.norm(jc - itot_c) / np.linalg.norm(itot_c))


def ml_fixed_point(counts, protocol, settings=None, init=None):
    """ iterate c <- (1 - mu) I_tot^{-1} J(c) c + mu c, renormalized.
    A step that lowers the likelihood is rejected and the step length
    1 - mu halved; the best iterate is returned even without convergence. """
    settings = settings or ReconstructionSettings()
    problem = LikelihoodProblem(counts, protocol, settings.p_floor)
    factor = _factor_itot(problem.itot)
    init = init or initial_state(protocol.dim, settings.rank, settings.seed)
    if init.s != protocol.dim:
        raise DimensionMismatch("initial state of dimension %d on a %d-dim protocol"
                                % (init.s, protocol.dim))
    c = init.c / np.linalg.norm(init.c)
    likelihood = problem.log_likelihood(c)
    jc = problem.j_apply(c)
    residual = _residual(jc, problem.itot @ c)
    step = 1.0 - settings.mixing
    rejections = 0
    converged = False
    iteration = 0
    for iteration in range(1, settings.max_iterations + 1):
        candidate = step * linalg.lu_solve(factor, jc) + (1.0 - step) * c
        candidate /= np.linalg.norm(candidate)
        candidate_likelihood = problem.log_likelihood(candidate)
        # decreases within rounding of log L are not rejections
        if candidate_likelihood < likelihood - LIKELIHOOD_NOISE * max(abs(likelihood), 1.0):
            rejections += 1
            step /= 2.0
            logging.debug("iteration %d: likelihood decreased, step now %.3e", iteration, step)
            if rejections >= MAX_REJECTIONS:
                break
            continue
        rejections = 0
        change = abs(candidate_likelihood - likelihood) / max(abs(likelihood), 1.0)
        c, likelihood = candidate, candidate_likelihood
        jc = problem.j_apply(c)
        residual = _residual(jc, problem.itot @ c)
        if iteration % 100 == 0:
            logging.debug("iteration %d: log L = %.10f, residual %.3e", iteration,
                          likelihood, residual)
        if change < settings.tolerance and residual < settings.residual_tolerance:
            converged = True
            break
    if not converged:
        logging.warning("fixed point not converged after %d iterations (residual %.3e)",
                        iteration, residual)
    misfit = problem.misfit_rows(c)
    if misfit:
        logging.warning("%d observed outcomes have model probability below %.0e",
                        misfit, MISFIT_THRESHOLD)
    return ReconstructionResult(PurifiedState.normalized(c), likelihood, iteration,
                                converged, residual)


def reconstruct(counts, protocol, settings=None, init=None):
    """ ml_fixed_point from init plus settings.restarts seeded random starts,
    keeping the highest likelihood """
    settings = settings or ReconstructionSettings()
    best = ml_fixed_point(counts, protocol, settings, init)
    rng = np.random.Generator(np.random.PCG64(settings.seed + 1))
    for restart in range(settings.restarts):
        result = ml_fixed_point(counts, protocol, settings,
                                random_state(protocol.dim, settings.rank, rng))
        logging.debug("restart %d: log L = %.10f", restart, result.log_likelihood)
        if result.log_likelihood > best.log_likelihood:
            best = result
    return best


def embed(c, basis_vectors):
    """ B c c^dagger B^dagger, the reconstruction as a Fock-space density """
    c = getattr(c, 'c', c)
    amplitudes = np.asarray(basis_vectors) @ np.asarray(c)
    return amplitudes @ amplitudes.conj().T


@dataclass(frozen=True)
class AdaptedFit:
    params: fock.ModeParams
    log_likelihood: float
    grid_params: fock.ModeParams
    grid_log_likelihood: float


def _family_likelihood(values, counts, protocol, system_basis):
    alpha = complex(values[0], values[1])
    xi = complex(values[2], values[3])
    try:
        ket = fock.basis_state(fock.ModeParams(alpha, xi), system_basis)
    except LeakageExceeded:
        return -np.inf
    total = 0.0
    for values_k, p in zip(counts.counts, outcome_probabilities(protocol, ket)):
        observed = values_k > 0
        total += float(np.dot(values_k[observed], np.log(np.maximum(p[observed], P_FLOOR))))
    return total


def fit_adapted_basis(counts, protocol, system_basis, alpha_range=3.0, alpha_step=0.5,
                      xi_radii=(0.0, 0.15, 0.3, 0.5, 0.75), xi_angles=8):
    """ best |alpha, xi, 0> for single-mode data: a grid over alpha at xi = 0,
    a grid over xi at the best alpha, then Nelder-Mead on all four reals """
    if protocol.n_modes != 1:
        raise DimensionMismatch("the adapted basis is fitted on single-mode data")

    def objective(values):
        return -_family_likelihood(values, counts, protocol, system_basis)

    axis = np.arange(-alpha_range, alpha_range + alpha_step / 2, alpha_step)
    best_values, best = None, np.inf
    for re in axis:
        for im in axis:
            value = objective((re, im, 0.0, 0.0))
            if value < best:
                best_values, best = (re, im, 0.0, 0.0), value
    for radius in xi_radii[1:]:
        for angle in 2 * np.pi * np.arange(xi_angles) / xi_angles:
            candidate = (best_values[0], best_values[1],
                         radius * np.cos(angle), radius * np.sin(angle))
            value = objective(candidate)
            if value < best:
                best_values, best = candidate, value
    if not np.isfinite(best):
        raise NotConverged("no member of the squeezed coherent family fits inside the truncation")
    logging.debug("grid optimum alpha=%s xi=%s log L=%.6f",
                  complex(*best_values[:2]), complex(*best_values[2:]), -best)
    refined = optimize.minimize(objective, np.array(best_values), method='Nelder-Mead',
                                options={'xatol': 1e-6, 'fatol': 1e-9, 'maxiter': 4000})
    values, value = refined.x, refined.fun
    if value > best:
        if not refined.success:
            raise NotConverged("adapted basis refinement failed: %s" % refined.message)
        values, value = np.array(best_values), best
    grid = fock.ModeParams(complex(*best_values[:2]), complex(*best_values[2:]))
    params = fock.ModeParams(complex(values[0], values[1]), complex(values[2], values[3]))
    logging.info("adapted basis alpha=%.4f%+.4fj xi=%.4f%+.4fj", params.alpha.real,
                 params.alpha.imag, params.xi.real, params.xi.imag)
    return AdaptedFit(params, -value, grid, -best)


@dataclass(frozen=True)
class PrincipalComponents:
    """ orthonormal columns spanning the reduced model """
    vectors: np.ndarray
    eigenvalues: np.ndarray
    retained_weight: float
    degenerate: bool


def principal_component_reduction(pilot_rho, s_target, tie_tolerance=1e-10):
    """ the s_target leading eigenvectors of the pilot density. Eigenvalues
    tied across the cut (zeros included) are resolved by projecting the
    lowest-index basis vectors onto the tied eigenspace. """
    pilot_rho = np.asarray(pilot_rho, dtype=complex)
    s_big = pilot_rho.shape[0]
    if not 1 <= s_target <= s_big:
        raise DimensionMismatch("cannot keep %d components of a %d-dim model" % (s_target, s_big))
    values, vectors = np.linalg.eigh(0.5 * (pilot_rho + pilot_rho.conj().T))
    order = np.argsort(-values, kind='stable')
    values, vectors = values[order], vectors[:, order]
    scale = max(abs(values[0]), 1e-300)
    cut = values[s_target - 1]
    tied = np.abs(values - cut) <= tie_tolerance * scale
    above = (values > cut) & ~tied
    kept = vectors[:, above]
    degenerate = s_target < s_big and bool(tied[s_target])
    if degenerate:
        logging.warning("pilot spectrum is degenerate at the cut (eigenvalue %.3e)", cut)
        pool = vectors[:, tied]
        columns = [kept[:, index] for index in range(kept.shape[1])]
        for index in range(s_big):
            if len(columns) == s_target:
                break
            candidate = pool @ (pool.conj().T[:, index])
            for column in columns:
                candidate = candidate - column * np.vdot(column, candidate)
            norm = np.linalg.norm(candidate)
            if norm > 1e-8:
                columns.append(candidate / norm)
        kept = np.column_stack(columns)
    else:
        kept = vectors[:, :s_target]
    retained = float(np.sum(values[:s_target]))
    logging.info("principal components %d -> %d retain weight %.6f", s_big, s_target, retained)
    return PrincipalComponents(kept, values, retained, degenerate)
