"""
File: errors.py
Description:  Exceptions raised by the tomography package. Each carries
the process exit code the command line front-end uses for it.
"""

class TomographyError(Exception):
    """ base of all package errors """
    exit_code = 1


class ConfigError(TomographyError):
    """ invalid or inconsistent experiment configuration """
    exit_code = 2


class NumericalError(TomographyError):
    """ a numerical routine could not produce a trustworthy result """
    exit_code = 3


class LeakageExceeded(NumericalError):
    """ too much norm left the Fock truncation """


class InvalidEta(NumericalError):
    """ detector efficiency outside (0, 1] """


class NonOrthonormalBasis(NumericalError):
    """ quadrature eigenbasis lost orthonormality """


class DimensionMismatch(NumericalError):
    """ array shapes disagree with the Fock truncation """


class NegativeProbability(NumericalError):
    """ outcome probabilities are negative or do not sum to a positive total """


class NotConverged(NumericalError):
    """ iteration hit its cap before meeting the tolerance """


class SingularItot(NumericalError):
    """ the total information operator cannot be inverted """


class NotAState(NumericalError):
    """ matrix is not Hermitian, PSD and unit trace """


class ZeroProbabilityRow(NumericalError):
    """ an observed outcome has zero model probability """


class SpectrumClassificationFailed(NumericalError):
    """ information eigenvalues do not split into the expected groups """


class NonPositiveEigenvalue(NumericalError):
    """ a physical information eigenvalue is not strictly positive """


class ZeroLO(NumericalError):
    """ quadrature scaling needs a non-zero local oscillator """


class PhaseTooSparse(NumericalError):
    """ too few phase settings to resolve the truncation """


class ZeroExpectedBin(NumericalError):
    """ a grouped bin has zero expected count """


class NonPositiveDof(NumericalError):
    """ adequacy test has no degrees of freedom left """


class MissingArtifacts(TomographyError):
    """ report asked for run outputs that are not on disk """
    exit_code = 3


class AcceptanceCheckFailed(TomographyError):
    """ campaign statistics fell outside the configured checks """
    exit_code = 4
