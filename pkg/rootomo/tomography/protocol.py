"""
File: protocol.py
Description:  Photon-counting homodyne POVMs. A coherent local oscillator
|alpha_1 e^{i theta}> enters beamsplitter port 1, the signal enters port 2
and both outputs are photon counted. Detector inefficiency is a binomial
thinning kernel on the operators, difference statistics sum operators of
equal n1 - n2, and projection restricts everything to a model subspace.

Every POVM element is stored as factor rows F with Lambda = F^dagger F.
Ideal full-statistics elements have a single row. Two-mode settings keep
one element list per mode and never materialise joint operators except
through MeasurementProtocol.rows.
"""

import math
import logging

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from rootomo.util import stable_hash
from rootomo.tomography import fock
from rootomo.tomography.errors import (InvalidEta, NonOrthonormalBasis, DimensionMismatch,
                                       NumericalError, ZeroLO, ConfigError)

POOL_CUTOFF = 1e-12
COMPLETENESS_TOLERANCE = 1e-8
PSD_TOLERANCE = 1e-10
FACTOR_FLOOR = 1e-16


@dataclass(frozen=True)
class LocalOscillator:
    """ LO of amplitude |alpha_1| set to m phases theta_j = pi j / m """
    amplitude: float
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ConfigError("the local oscillator needs at least one phase, got m=%r" % self.m)
        if self.amplitude < 0:
            raise ConfigError("LO amplitude is |alpha_1| >= 0, got %r" % self.amplitude)

    @property
    def phases(self):
        return math.pi * np.arange(self.m) / self.m

    def phase(self, index):
        return math.pi * index / self.m

    def state_amplitude(self, index):
        """ alpha_1 e^{i theta_j} """
        return self.amplitude * np.exp(1j * self.phase(index))


@dataclass(frozen=True)
class DetectorEfficiency:
    eta1: float = 1.0
    eta2: float = 1.0

    def __post_init__(self):
        for eta in (self.eta1, self.eta2):
            if not 0.0 < eta <= 1.0:
                raise InvalidEta("detector efficiency must lie in (0, 1], got %r" % eta)

    @property
    def ideal(self):
        return self.eta1 == 1.0 and self.eta2 == 1.0


@dataclass(frozen=True)
class Full:
    """ both photon numbers recorded """
    n1: int
    n2: int

    def __str__(self):
        return 'F:%d:%d' % (self.n1, self.n2)


@dataclass(frozen=True)
class Difference:
    """ only n12 = n1 - n2 recorded """
    d: int

    def __str__(self):
        return 'D:%d' % self.d


@dataclass(frozen=True)
class Overflow:
    """ pooled outcomes of negligible probability """

    def __str__(self):
        return 'OVF'


@dataclass(frozen=True)
class Joint:
    """ one label per mode, mode A first """
    parts: tuple

    def __str__(self):
        return '|'.join(str(part) for part in self.parts)


def parse_label(text):
    """ inverse of str(label) """
    if '|' in text:
        return Joint(tuple(parse_label(part) for part in text.split('|')))
    if text == 'OVF':
        return Overflow()
    kind, _, rest = text.partition(':')
    if kind == 'F':
        first, second = rest.split(':')
        return Full(int(first), int(second))
    if kind == 'D':
        return Difference(int(rest))
    raise ValueError("unknown outcome label %r" % text)


def factorize(operator, floor=FACTOR_FLOOR, what='POVM element'):
    """ rows F with F^dagger F = operator for a PSD operator """
    operator = 0.5 * (operator + operator.conj().T)
    values, vectors = np.linalg.eigh(operator)
    scale = max(1.0, float(np.max(np.abs(values))) if len(values) else 1.0)
    if len(values) and values[0] < -PSD_TOLERANCE * scale:
        raise NumericalError("%s is not positive (eigenvalue %.3e)" % (what, values[0]))
    keep = values > floor
    factors = (np.sqrt(values[keep])[:, None] * vectors[:, keep].conj().T)
    if not len(factors):
        factors = np.zeros((1, operator.shape[0]), dtype=complex)
    return factors


class PovmElement(object):
    """ labelled positive operator Lambda = factors^dagger factors """
    def __init__(self, label, factors):
        factors = np.atleast_2d(np.asarray(factors, dtype=complex))
        if not factors.shape[0]:
            factors = np.zeros((1, factors.shape[1]), dtype=complex)
        self.label = label
        self.factors = factors

    def __repr__(self):
        return f"<PovmElement {self.label} rank<={self.factors.shape[0]} dim={self.dim}>"

    @property
    def dim(self):
        return self.factors.shape[1]

    @property
    def op(self):
        return self.factors.conj().T @ self.factors

    @property
    def trace(self):
        """ bounds the probability of this outcome for any state """
        return float(np.sum(np.abs(self.factors) ** 2))

    def compressed(self):
        """ the same operator with at most dim factor rows """
        if self.factors.shape[0] <= self.dim:
            return self
        return PovmElement(self.label, factorize(self.op, what=str(self.label)))


def completeness_sum(elements):
    """ sum of all element operators """
    stacked = np.vstack([element.factors for element in elements])
    return stacked.conj().T @ stacked


def check_completeness(elements, tolerance=COMPLETENESS_TOLERANCE):
    """ max-norm deviation of sum(Lambda) from the identity """
    total = completeness_sum(elements)
    deviation = float(np.max(np.abs(total - np.eye(total.shape[0]))))
    if deviation > tolerance:
        raise NumericalError("POVM is not complete (deviation %.3e)" % deviation)
    return deviation


def pool_negligible(elements, cutoff=POOL_CUTOFF):
    """ merge elements whose probability can never reach cutoff, and any
    existing overflow, into one Overflow element equal to I - sum(kept) """
    elements = list(elements)
    kept = [element for element in elements
            if not isinstance(element.label, Overflow) and element.trace >= cutoff]
    dim = elements[0].dim
    rest = np.eye(dim, dtype=complex)
    if kept:
        rest -= completeness_sum(kept)
    overflow = PovmElement(Overflow(), factorize(rest, what='overflow element'))
    logging.debug("pooled %d of %d elements below %.1e", len(elements) - len(kept),
                  len(elements), cutoff)
    return kept + [overflow]


def build_full_povm(lo, phase_index, system_basis, lo_basis=None, theta=math.pi / 4,
                    phi=0.0, cutoff=POOL_CUTOFF, tolerance=fock.LEAKAGE_TOLERANCE):
    """ rank-1 elements Lambda_{n1 n2} = A^dagger A of one LO phase where the row
    functional is A(k) = <n1, n2| U_BS (|alpha_1 e^{i theta}> (x) |k>) """
    lo_basis = lo_basis or fock.auto_truncation(lo.amplitude)
    beta = lo.state_amplitude(phase_index)
    lo_state = fock.basis_state(fock.ModeParams(alpha=beta), lo_basis, tolerance)
    dim = system_basis.dim
    elements = []
    for total in range(lo_basis.n_max + system_basis.n_max + 1):
        block, _ = fock.beamsplitter_block(total, theta, phi)
        ks = np.arange(max(0, total - lo_basis.n_max), min(total, system_basis.n_max) + 1)
        rows = np.zeros((total + 1, dim), dtype=complex)
        # photon number is conserved, so |j, k> only reaches block N = j + k
        rows[:, ks] = block[:, total - ks] * lo_state[total - ks][None, :]
        for n1 in range(total + 1):
            elements.append(PovmElement(Full(n1, total - n1), rows[n1:n1 + 1]))
    logging.debug("phase %d: %d raw outcomes for LO %s (LO cutoff %d, system cutoff %d)",
                  phase_index, len(elements), beta, lo_basis.n_max, system_basis.n_max)
    return pool_negligible(elements, cutoff)


def binomial_kernel(eta, size):
    """ K[n, k] = C(k, n) eta^n (1 - eta)^(k - n), columns sum to one """
    counts = np.arange(size)
    return binom.pmf(counts[:, None], counts[None, :], eta)


def apply_detector_loss(povm, eff, cutoff=POOL_CUTOFF):
    """ Lambda'_{n1 n2} = sum_{k1>=n1, k2>=n2} B(n1; k1, eta1) B(n2; k2, eta2) Lambda_{k1 k2} """
    if not isinstance(eff, DetectorEfficiency):
        eff = DetectorEfficiency(*eff)
    povm = list(povm)
    if eff.ideal:
        return povm
    full = [element for element in povm if isinstance(element.label, Full)]
    if any(not isinstance(element.label, (Full, Overflow)) for element in povm):
        raise ValueError("detector loss applies to full-statistics POVMs only")
    dim = povm[0].dim
    size1 = max(element.label.n1 for element in full) + 1
    size2 = max(element.label.n2 for element in full) + 1
    grid = np.zeros((size1, size2, dim, dim), dtype=complex)
    for element in full:
        grid[element.label.n1, element.label.n2] = element.op
    grid = np.tensordot(binomial_kernel(eff.eta1, size1), grid, axes=(1, 0))
    grid = np.tensordot(binomial_kernel(eff.eta2, size2), grid, axes=(1, 1)).swapaxes(0, 1)
    lossy = []
    for n1 in range(size1):
        for n2 in range(size2):
            if np.trace(grid[n1, n2]).real >= cutoff:
                lossy.append(PovmElement(Full(n1, n2),
                                         factorize(grid[n1, n2], what='F:%d:%d' % (n1, n2))))
    logging.debug("detector loss eta=(%s, %s): %d -> %d elements", eff.eta1, eff.eta2,
                  len(full), len(lossy))
    return pool_negligible(lossy + [element for element in povm
                                    if isinstance(element.label, Overflow)], cutoff)


def reduce_to_difference(povm):
    """ Lambda_d = sum over n1 - n2 = d of Lambda_{n1 n2}; overflow kept as is """
    groups = {}
    overflow = []
    for element in povm:
        if isinstance(element.label, Overflow):
            overflow.append(element)
            continue
        if not isinstance(element.label, Full):
            raise ValueError("difference statistics need Full labels, got %s" % element.label)
        groups.setdefault(element.label.n1 - element.label.n2, []).append(element.factors)
    reduced = [PovmElement(Difference(d), np.vstack(groups[d])).compressed()
               for d in sorted(groups)]
    return reduced + overflow


def check_orthonormal(basis_vectors, tolerance=1e-8):
    basis_vectors = np.asarray(basis_vectors, dtype=complex)
    gram = basis_vectors.conj().T @ basis_vectors
    deviation = float(np.max(np.abs(gram - np.eye(gram.shape[0]))))
    if deviation > tolerance:
        raise NonOrthonormalBasis("basis vectors deviate from orthonormal by %.3e" % deviation)
    return deviation


def project_to_subspace(povm, basis_vectors):
    """ Lambda -> B^dagger Lambda B for the d x s isometry B """
    basis_vectors = np.asarray(basis_vectors, dtype=complex)
    if basis_vectors.ndim == 1:
        basis_vectors = basis_vectors[:, None]
    check_orthonormal(basis_vectors)
    povm = list(povm)
    if povm[0].dim != basis_vectors.shape[0]:
        raise DimensionMismatch("POVM dimension %d, basis vectors of length %d"
                                % (povm[0].dim, basis_vectors.shape[0]))
    return [PovmElement(element.label, element.factors @ basis_vectors).compressed()
            for element in povm]


class ModePovm(object):
    """ the element list of one mode at one LO phase, with the factor rows
    stacked for vectorised evaluation """
    def __init__(self, elements, phase=0.0, lo_amplitude=0.0):
        self.elements = tuple(elements)
        self.labels = tuple(element.label for element in self.elements)
        self.phase = phase
        self.lo_amplitude = lo_amplitude
        self.factors = np.vstack([element.factors for element in self.elements])
        sizes = [element.factors.shape[0] for element in self.elements]
        self.starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int)

    def __len__(self):
        return len(self.elements)

    @property
    def dim(self):
        return self.factors.shape[1]

    def completeness(self):
        return self.factors.conj().T @ self.factors

    def overflow_index(self):
        for index, label in enumerate(self.labels):
            if isinstance(label, Overflow):
                return index
        raise ValueError("mode POVM has no overflow element")

    def map(self, func):
        """ new ModePovm with func applied to the element list """
        return ModePovm(func(self.elements), self.phase, self.lo_amplitude)


_UNIT_MODE = ModePovm([PovmElement(Overflow(), np.ones((1, 1)))])


class JointLabels(Sequence):
    """ Joint labels of a two-mode setting, A slow and B fast, built on access """
    def __init__(self, first, second):
        self.first = first
        self.second = second

    def __len__(self):
        return len(self.first) * len(self.second)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[item] for item in range(*index.indices(len(self)))]
        if index < 0:
            index += len(self)
        if not 0 <= index < len(self):
            raise IndexError(index)
        index_a, index_b = divmod(index, len(self.second))
        return Joint((self.first[index_a], self.second[index_b]))


class Setting(object):
    """ one measured distribution: an LO phase per mode """
    def __init__(self, phase_index, modes):
        if len(modes) not in (1, 2):
            raise ConfigError("only single- and two-mode protocols are supported")
        self.phase_index = tuple(phase_index)
        self.modes = tuple(modes)

    @property
    def n_rows(self):
        return int(np.prod([len(mode) for mode in self.modes]))

    @property
    def dims(self):
        return tuple(mode.dim for mode in self.modes)

    @property
    def dim(self):
        return int(np.prod(self.dims))

    @property
    def labels(self):
        if len(self.modes) == 1:
            return self.modes[0].labels
        return JointLabels(self.modes[0].labels, self.modes[1].labels)

    def _pair(self):
        second = self.modes[1] if len(self.modes) == 2 else _UNIT_MODE
        return self.modes[0], second

    def amplitudes(self, c):
        """ Y[a, b, r] = (F_A Psi_r F_B^T)[a, b] for every column Psi_r of c """
        first, second = self._pair()
        tensor = c.reshape(first.dim, second.dim, c.shape[1])
        return np.einsum('ax,xyr,by->abr', first.factors, tensor, second.factors,
                         optimize=True)

    def probabilities(self, c):
        """ Tr(Lambda_j c c^dagger) for every row, A slow and B fast """
        first, second = self._pair()
        weights = np.sum(np.abs(self.amplitudes(c)) ** 2, axis=2)
        weights = np.add.reduceat(weights, first.starts, axis=0)
        weights = np.add.reduceat(weights, second.starts, axis=1)
        return weights.ravel()

    def apply(self, c):
        """ probabilities and Lambda_j c (shape rows x dim x r) for every row """
        first, second = self._pair()
        amplitudes = self.amplitudes(c)
        weights = np.sum(np.abs(amplitudes) ** 2, axis=2)
        weights = np.add.reduceat(np.add.reduceat(weights, first.starts, axis=0),
                                  second.starts, axis=1)
        images = np.einsum('ax,abr,by->abxyr', first.factors.conj(), amplitudes,
                           second.factors.conj(), optimize=True)
        images = np.add.reduceat(np.add.reduceat(images, first.starts, axis=0),
                                 second.starts, axis=1)
        return weights.ravel(), images.reshape(self.n_rows, self.dim, c.shape[1])

    def row_factors(self, rows):
        """ joint factor rows of the given row indices, zero padded to a
        common rank: shape (len(rows), R, dim) """
        first, second = self._pair()
        blocks = []
        for row in rows:
            index_a, index_b = divmod(int(row), len(second))
            blocks.append(np.kron(first.elements[index_a].factors,
                                  second.elements[index_b].factors))
        rank = max(block.shape[0] for block in blocks) if blocks else 1
        padded = np.zeros((len(blocks), rank, self.dim), dtype=complex)
        for index, block in enumerate(blocks):
            padded[index, :block.shape[0]] = block
        return padded

    def completeness(self):
        first, second = self._pair()
        return np.kron(first.completeness(), second.completeness())

    def element(self, row):
        """ the joint PovmElement of one row """
        first, second = self._pair()
        index_a, index_b = divmod(int(row), len(second))
        element_a, element_b = first.elements[index_a], second.elements[index_b]
        if len(self.modes) == 1:
            return element_a
        return PovmElement(Joint((element_a.label, element_b.label)),
                           np.kron(element_a.factors, element_b.factors))


class MeasurementProtocol(object):
    """ all measured distributions, n events each """
    def __init__(self, settings, n, statistics='full', descriptor=None):
        self.settings = tuple(settings)
        self.n = int(n)
        self.statistics = statistics
        self.descriptor = descriptor or {}
        dims = {setting.dim for setting in self.settings}
        if len(dims) != 1:
            raise DimensionMismatch("settings act on different spaces: %s" % sorted(dims))

    def __str__(self):
        return f"<MeasurementProtocol m={self.m} rows={self.n_rows} dim={self.dim} n={self.n}>"

    @property
    def m(self):
        return len(self.settings)

    @property
    def dim(self):
        return self.settings[0].dim

    @property
    def n_modes(self):
        return len(self.settings[0].modes)

    @property
    def n_rows(self):
        return sum(setting.n_rows for setting in self.settings)

    @property
    def hash(self):
        return descriptor_hash(self)

    @property
    def rows(self):
        """ (phase_index, PovmElement) for every row; materialises joint operators """
        for index, setting in enumerate(self.settings):
            for row in range(setting.n_rows):
                yield index, setting.element(row)

    def completeness_deviation(self):
        """ max over settings of the max-norm of sum(Lambda) - I """
        identity = np.eye(self.dim)
        return max(float(np.max(np.abs(setting.completeness() - identity)))
                   for setting in self.settings)


def as_purified(state, dim):
    """ c with rho = c c^dagger from a PurifiedState, a ket or a density matrix """
    c = getattr(state, 'c', None)
    if c is None:
        state = np.asarray(state, dtype=complex)
        if state.ndim == 1:
            c = state[:, None]
        else:
            if state.shape != (dim, dim):
                raise DimensionMismatch("density matrix of shape %s on a %d-dim protocol"
                                        % (state.shape, dim))
            values, vectors = np.linalg.eigh(0.5 * (state + state.conj().T))
            keep = values > 1e-15
            c = vectors[:, keep] * np.sqrt(values[keep])[None, :]
            if not c.shape[1]:
                c = np.zeros((dim, 1), dtype=complex)
    c = np.asarray(c, dtype=complex)
    if c.shape[0] != dim:
        raise DimensionMismatch("state of dimension %d on a %d-dim protocol" % (c.shape[0], dim))
    return c


def outcome_probabilities(protocol, state):
    """ p_j = Tr(Lambda_j rho), clipped at zero, one array per setting """
    c = as_purified(state, protocol.dim)
    probabilities = []
    for setting in protocol.settings:
        values = setting.probabilities(c)
        if np.min(values) < -1e-12:
            logging.warning("negative probability %.3e clipped", np.min(values))
        probabilities.append(np.clip(values, 0.0, None))
    return probabilities


def prune_by_state(elements, marginal, cutoff=POOL_CUTOFF):
    """ keep only the elements this mode's reduced state can reach with
    probability >= cutoff; the rest are pooled into the overflow element """
    elements = list(elements)
    marginal = np.asarray(marginal, dtype=complex)
    kept = [element for element in elements
            if not isinstance(element.label, Overflow)
            and np.einsum('ax,xy,ay->', element.factors, marginal,
                          element.factors.conj()).real >= cutoff]
    rest = np.eye(elements[0].dim, dtype=complex)
    if kept:
        rest -= completeness_sum(kept)
    logging.debug("state reaches %d of %d outcomes", len(kept), len(elements))
    return kept + [PovmElement(Overflow(), factorize(rest, what='overflow element'))]


def build_mode_povms(lo, eff, statistics, system_basis, subspace=None, lo_basis=None,
                     theta=math.pi / 4, phi=0.0, cutoff=POOL_CUTOFF, marginal=None):
    """ the m ModePovms of one mode: loss, then reduction, then projection.
    With a marginal (the reduced density of this mode) outcomes the state
    cannot reach are pooled before the loss kernel is applied. """
    povms = []
    for index in range(lo.m):
        elements = build_full_povm(lo, index, system_basis, lo_basis, theta, phi, cutoff)
        if marginal is not None:
            elements = prune_by_state(elements, marginal, cutoff)
        elements = apply_detector_loss(elements, eff, cutoff)
        if statistics == 'difference':
            elements = reduce_to_difference(elements)
        if subspace is not None:
            elements = pool_negligible(project_to_subspace(elements, subspace), cutoff)
        povms.append(ModePovm(elements, lo.phase(index), lo.amplitude))
    return povms


def build_protocol(los, eff, statistics, system_bases, n, subspaces=None, lo_bases=None,
                   theta=math.pi / 4, phi=0.0, cutoff=POOL_CUTOFF, marginals=None):
    """ all m phases of a single-mode protocol, or all m_A m_B phase pairs of a
    two-mode protocol with elements Lambda^A (x) Lambda^B. marginals, one reduced
    density per mode, restrict the outcomes to those the state can reach. """
    if isinstance(los, LocalOscillator):
        los = [los]
    if isinstance(system_bases, fock.BasisTruncation):
        system_bases = [system_bases]
    if subspaces is None or isinstance(subspaces, np.ndarray):
        subspaces = [subspaces] * len(los)
    if not isinstance(eff, (list, tuple)):
        eff = [eff] * len(los)
    lo_bases = lo_bases or [None] * len(los)
    marginals = marginals or [None] * len(los)
    if statistics not in ('full', 'difference'):
        raise ConfigError("statistics must be 'full' or 'difference', got %r" % statistics)
    if not len(los) == len(system_bases) == len(subspaces) == len(eff):
        raise ConfigError("one LO, detector pair, truncation and subspace per mode")
    per_mode = [build_mode_povms(lo, mode_eff, statistics, basis, subspace, lo_basis,
                                 theta, phi, cutoff, marginal)
                for lo, mode_eff, basis, subspace, lo_basis, marginal
                in zip(los, eff, system_bases, subspaces, lo_bases, marginals)]
    if len(per_mode) == 1:
        settings = [Setting((index,), (povm,)) for index, povm in enumerate(per_mode[0])]
    else:
        settings = [Setting((index_a, index_b), (povm_a, povm_b))
                    for index_a, povm_a in enumerate(per_mode[0])
                    for index_b, povm_b in enumerate(per_mode[1])]
    descriptor = {
        'modes': [{'lo_amplitude': float(lo.amplitude), 'm': int(lo.m),
                   'eta': [float(mode_eff.eta1), float(mode_eff.eta2)],
                   'system_n_max': int(basis.n_max),
                   'lo_n_max': int((lo_basis or fock.auto_truncation(lo.amplitude)).n_max),
                   'subspace': None if subspace is None else _array_digest(subspace),
                   'pruned_by': None if marginal is None else _array_digest(marginal)}
                  for lo, mode_eff, basis, subspace, lo_basis, marginal
                  in zip(los, eff, system_bases, subspaces, lo_bases, marginals)],
        'statistics': statistics,
        'n': int(n),
        'beamsplitter': [float(theta), float(phi)],
        'pool_cutoff': float(cutoff),
    }
    protocol = MeasurementProtocol(settings, n, statistics, descriptor)
    logging.debug("built %s", protocol)
    return protocol


def project_protocol(protocol, subspaces, cutoff=POOL_CUTOFF):
    """ the protocol restricted to per-mode model subspaces; outcomes that
    became negligible there are pooled into the overflow element """
    if isinstance(subspaces, np.ndarray):
        subspaces = [subspaces]
    if len(subspaces) != protocol.n_modes:
        raise DimensionMismatch("one subspace per mode is needed")
    projected = {}
    settings = []
    for setting in protocol.settings:
        modes = []
        for index, mode in enumerate(setting.modes):
            key = (index, id(mode))
            if key not in projected:
                projected[key] = mode.map(lambda elements, basis=subspaces[index]:
                                          pool_negligible(project_to_subspace(elements, basis),
                                                          cutoff))
            modes.append(projected[key])
        settings.append(Setting(setting.phase_index, modes))
    descriptor = dict(protocol.descriptor)
    descriptor['modes'] = [dict(mode, subspace=_array_digest(basis))
                           for mode, basis in zip(descriptor.get('modes', []), subspaces)]
    return MeasurementProtocol(settings, protocol.n, protocol.statistics, descriptor)


def label_map(source, target):
    """ per setting, the target row of every source row: same label, or the
    target overflow when the label was pooled away """
    if source.m != target.m:
        raise DimensionMismatch("protocols have %d and %d settings" % (source.m, target.m))
    mappings = []
    for setting_s, setting_t in zip(source.settings, target.settings):
        per_mode = []
        for mode_s, mode_t in zip(setting_s.modes, setting_t.modes):
            lookup = {label: index for index, label in enumerate(mode_t.labels)}
            overflow = mode_t.overflow_index()
            per_mode.append(np.array([lookup.get(label, overflow) for label in mode_s.labels]))
        if len(per_mode) == 1:
            mappings.append(per_mode[0])
        else:
            mappings.append((per_mode[0][:, None] * len(setting_t.modes[1])
                             + per_mode[1][None, :]).ravel())
    return mappings


def regroup_rows(values, mapping, target):
    """ sum per-row values of each setting onto the target protocol rows """
    return [np.bincount(index, weights=np.asarray(value, dtype=float),
                        minlength=setting.n_rows)
            for value, index, setting in zip(values, mapping, target.settings)]


def quadrature_values(labels, lo_amplitude):
    """ X = n12 / (sqrt(2) |alpha_1|) per Difference label. With U_BS as defined
    here n12 estimates the quadrature at LO phase theta + pi. """
    if lo_amplitude == 0:
        raise ZeroLO("quadrature scaling needs |alpha_1| > 0")
    values = []
    for label in labels:
        if isinstance(label, Difference):
            values.append(label.d / (math.sqrt(2.0) * abs(lo_amplitude)))
        elif isinstance(label, Overflow):
            values.append(np.nan)
        else:
            raise ValueError("quadrature values need Difference labels, got %s" % label)
    return np.array(values)


def _array_digest(array):
    array = np.ascontiguousarray(np.round(np.asarray(array, dtype=complex), 12))
    return stable_hash([array.shape, array.real.tolist(), array.imag.tolist()])


def protocol_descriptor(protocol):
    """ JSON-able description from which the operators are rebuilt """
    return dict(protocol.descriptor)


def descriptor_hash(protocol):
    return stable_hash(protocol_descriptor(protocol))
