"""
File: fock.py
Description:  Truncated Fock-space numerics. Ladder operators, displacement,
squeezing and beamsplitter unitaries built by dense matrix exponentials,
the displaced/squeezed Fock family |alpha, xi, k> = S(xi) D(alpha) |k>,
tensor products (mode A slow, mode B fast), the Husimi Q-function and
harmonic-oscillator position wavefunctions.

Kets are complex numpy vectors of length n_max + 1 and operators are
complex (n_max + 1) x (n_max + 1) arrays.
"""

import math
import logging
import functools

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from rootomo.tomography.errors import LeakageExceeded, DimensionMismatch, NumericalError

LEAKAGE_TOLERANCE = 1e-10
UNITARITY_TOLERANCE = 1e-8


@dataclass(frozen=True)
class BasisTruncation:
    """ photon-number cutoff of one mode, dimension n_max + 1 """
    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise ValueError("n_max must be a nonnegative integer, got %r" % (self.n_max,))

    @property
    def dim(self):
        return self.n_max + 1

    def padded(self):
        """ a wider truncation used to measure what leaks out of this one """
        return BasisTruncation(2 * self.n_max + 20)


@dataclass(frozen=True)
class ModeParams:
    """ parameters of one member |alpha, xi, k> of the basis family """
    alpha: complex = 0j
    xi: complex = 0j
    k: int = 0


def auto_truncation(alpha=0j, xi=0j, k=0):
    """ cutoff for which a Poisson tail bound keeps the leakage of
    |alpha, xi, k> far below 1e-10 """
    squeeze = math.exp(2.0 * abs(xi))
    n_eff = (abs(alpha) ** 2 + k) * squeeze + math.sinh(abs(xi)) ** 2
    return BasisTruncation(int(math.ceil(n_eff + 10.0 * math.sqrt(n_eff + 1.0) + 20.0)))


def fock_ket(k, basis):
    """ the Fock state |k> """
    if k > basis.n_max:
        raise DimensionMismatch("Fock index %d above cutoff %d" % (k, basis.n_max))
    ket = np.zeros(basis.dim, dtype=complex)
    ket[k] = 1.0
    return ket


def norm_leakage(ket, basis):
    """ 1 - (norm of the part of ket that lies inside basis), both squared """
    total = np.vdot(ket, ket).real
    inside = np.vdot(ket[:basis.dim], ket[:basis.dim]).real
    return max(0.0, 1.0 - inside / total)


def check_leakage(leakage, tolerance, what):
    """ raise if a construction lost too much norm """
    if leakage > tolerance:
        logging.error("%s leaks %.3e of its norm (tolerance %.1e)", what, leakage, tolerance)
        raise LeakageExceeded("%s leaks %.3e of its norm, increase n_max" % (what, leakage))
    return leakage


def ladder_operators(basis):
    """ annihilation a (a[k-1, k] = sqrt(k)) and creation a_dagger """
    lowering = np.diag(np.sqrt(np.arange(1, basis.dim, dtype=float)), k=1).astype(complex)
    return lowering, lowering.conj().T


def check_unitary(unitary, what='operator', tolerance=UNITARITY_TOLERANCE):
    """ max-norm of U^dagger U - I, raising above tolerance """
    deviation = np.max(np.abs(unitary.conj().T @ unitary - np.eye(unitary.shape[0])))
    if deviation > tolerance:
        raise NumericalError("%s is not unitary (deviation %.3e)" % (what, deviation))
    return deviation


def _displacement_generator(alpha, basis):
    lowering, raising = ladder_operators(basis)
    return alpha * raising - np.conj(alpha) * lowering


def _squeeze_generator(xi, basis):
    lowering, raising = ladder_operators(basis)
    return 0.5 * (np.conj(xi) * (lowering @ lowering) - xi * (raising @ raising))


def _exponentiate(generator, what):
    unitary = expm(generator)
    check_unitary(unitary, what)
    return unitary


def displacement_operator(alpha, basis, tolerance=LEAKAGE_TOLERANCE):
    """ D(alpha) = exp(alpha a^dagger - alpha^* a) on the truncated space """
    padded = basis.padded()
    image = _exponentiate(_displacement_generator(alpha, padded), 'D(alpha)')[:, 0]
    check_leakage(norm_leakage(image, basis), tolerance, 'D(%s)|0>' % (alpha,))
    return _exponentiate(_displacement_generator(alpha, basis), 'D(alpha)')


def squeeze_operator(xi, basis, tolerance=LEAKAGE_TOLERANCE):
    """ S(xi) = exp((xi^* a^2 - xi a^dagger^2) / 2) on the truncated space """
    padded = basis.padded()
    image = _exponentiate(_squeeze_generator(xi, padded), 'S(xi)')[:, 0]
    check_leakage(norm_leakage(image, basis), tolerance, 'S(%s)|0>' % (xi,))
    return _exponentiate(_squeeze_generator(xi, basis), 'S(xi)')


def basis_states(alpha, xi, ks, basis, tolerance=LEAKAGE_TOLERANCE):
    """ columns S(xi) D(alpha) |k> for every k in ks, computed on a padded
    truncation, checked for leakage and renormalized inside basis """
    ks = list(ks)
    if ks and max(ks) > basis.n_max:
        raise DimensionMismatch("Fock index %d above cutoff %d" % (max(ks), basis.n_max))
    padded = basis.padded()
    squeeze = _exponentiate(_squeeze_generator(xi, padded), 'S(xi)')
    displace = _exponentiate(_displacement_generator(alpha, padded), 'D(alpha)')
    images = squeeze @ displace[:, ks]
    states = np.zeros((basis.dim, len(ks)), dtype=complex)
    for col, k in enumerate(ks):
        check_leakage(norm_leakage(images[:, col], basis), tolerance,
                      '|%s, %s, %d>' % (alpha, xi, k))
        truncated = images[:basis.dim, col]
        states[:, col] = truncated / np.linalg.norm(truncated)
    return states


def basis_state(params, basis, tolerance=LEAKAGE_TOLERANCE):
    """ |alpha, xi, k> = S(xi) D(alpha) |k>, renormalized """
    return basis_states(params.alpha, params.xi, [params.k], basis, tolerance)[:, 0]


def adapted_basis(alpha, xi, s, basis, tolerance=LEAKAGE_TOLERANCE):
    """ d x s isometry whose columns are |alpha, xi, k>, k = 0..s-1 """
    return basis_states(alpha, xi, range(s), basis, tolerance)


@functools.lru_cache(maxsize=1024)
def _beamsplitter_block(total, theta, phi, low, high):
    """ U restricted to {|n1, total - n1> : low <= n1 <= high}; the generator
    is tridiagonal there. Rows and columns are indexed by n1 - low. """
    n1 = np.arange(low, high + 1)
    size = len(n1)
    generator = np.zeros((size, size), dtype=complex)
    # a1^dagger a2 |n1, n2> = sqrt((n1 + 1) n2) |n1 + 1, n2 - 1>
    up = np.sqrt((n1[:-1] + 1.0) * (total - n1[:-1]))
    generator[np.arange(1, size), np.arange(size - 1)] = -theta * np.exp(-1j * phi) * up
    # a1 a2^dagger |n1, n2> = sqrt(n1 (n2 + 1)) |n1 - 1, n2 + 1>
    down = np.sqrt(n1[1:] * (total - n1[1:] + 1.0))
    generator[np.arange(size - 1), np.arange(1, size)] = theta * np.exp(1j * phi) * down
    block = expm(generator)
    block.setflags(write=False)
    return block


def beamsplitter_block(total, theta=math.pi / 4, phi=0.0, n1_max=None, n2_max=None):
    """ block of U_BS = exp(-theta (e^{-i phi} a1^dagger a2 - e^{i phi} a1 a2^dagger))
    on total photon number `total`, rows/columns ordered by n1 ascending.
    Optional per-mode cutoffs restrict the block to the states they admit. """
    low = 0 if n2_max is None else max(0, total - n2_max)
    high = total if n1_max is None else min(total, n1_max)
    return _beamsplitter_block(int(total), float(theta), float(phi), low, high), low


def beamsplitter_unitary(theta, phi, joint_basis):
    """ U_BS on a two-mode truncation (mode A index slow, B fast). The operator
    is block diagonal over N = n1 + n2; blocks cut by the truncation are
    exponentiated on the states that remain so U stays unitary. """
    first, second = joint_basis
    unitary = np.zeros((first.dim * second.dim, first.dim * second.dim), dtype=complex)
    for total in range(first.n_max + second.n_max + 1):
        block, low = beamsplitter_block(total, theta, phi, first.n_max, second.n_max)
        n1 = np.arange(low, low + block.shape[0])
        index = n1 * second.dim + (total - n1)
        unitary[np.ix_(index, index)] = block
    return unitary


def tensor_product(first, second):
    """ Kronecker product, first mode slow, second mode fast """
    return np.kron(first, second)


def coherent_amplitudes(betas, dim):
    """ <n|beta> for n < dim, one row per beta """
    betas = np.atleast_1d(np.asarray(betas, dtype=complex))
    steps = betas[:, None] / np.sqrt(np.arange(1, dim, dtype=float))[None, :]
    amplitudes = np.ones((len(betas), dim), dtype=complex)
    amplitudes[:, 1:] = np.cumprod(steps, axis=1)
    return amplitudes * np.exp(-np.abs(betas) ** 2 / 2.0)[:, None]


def q_function(rho, grid):
    """ Husimi Q(beta) = <beta|rho|beta> / pi on a list of complex points """
    rho = np.asarray(rho, dtype=complex)
    amplitudes = coherent_amplitudes(grid, rho.shape[0])
    values = np.einsum('gi,ij,gj->g', amplitudes.conj(), rho, amplitudes).real / math.pi
    return np.clip(values, 0.0, None)


def quadrature_grid(center=0j, half_width=3.0, points=101):
    """ square grid of complex beta around center, re fast, im slow """
    re_axis = np.linspace(center.real - half_width, center.real + half_width, points)
    im_axis = np.linspace(center.imag - half_width, center.imag + half_width, points)
    re_values, im_values = np.meshgrid(re_axis, im_axis)
    return (re_values + 1j * im_values).ravel(), re_axis, im_axis


def position_wavefunctions(x, dim):
    """ psi_k(x), k < dim, for x = (a + a^dagger) / sqrt(2); rows are k """
    x = np.asarray(x, dtype=float)
    table = np.zeros((dim,) + x.shape)
    table[0] = math.pi ** -0.25 * np.exp(-x ** 2 / 2.0)
    if dim > 1:
        table[1] = math.sqrt(2.0) * x * table[0]
    for k in range(1, dim - 1):
        table[k + 1] = (math.sqrt(2.0 / (k + 1)) * x * table[k]
                        - math.sqrt(k / (k + 1.0)) * table[k - 1])
    return table
