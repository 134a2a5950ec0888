import pathlib

import pytest
import numpy as np
from scipy import integrate

from rootomo.tomography import fock, information, campaign, data, estimator
from rootomo.tomography import protocol as homodyne
from rootomo.tomography.information import FidelityLossModel, LossDistribution
from rootomo.tomography.errors import NotAState, NonPositiveEigenvalue

CONFIGS = pathlib.Path(__file__).resolve().parents[2] / 'configs'
BASIS = fock.BasisTruncation(2)
SQUEEZED_PHYSICAL = [3334, 2907, 2093, 1666]


def small_protocol(n=500, m=5):
    return homodyne.build_protocol(homodyne.LocalOscillator(1.0, m),
                                   homodyne.DetectorEfficiency(), 'full', BASIS, n)


def test_realify_order():
    c = np.array([[1 + 2j, 3j], [4, 5 - 1j]])
    np.testing.assert_allclose(information.realify(c), [1, 4, 0, 5, 2, 0, 3, -1])

def test_fidelity():
    first = np.diag([1.0, 0.0])
    second = np.diag([0.0, 1.0])
    mixed = np.eye(2) / 2
    assert information.fidelity(first, first) == pytest.approx(1.0)
    assert information.fidelity(first, second) == pytest.approx(0.0, abs=1e-12)
    assert information.fidelity(first, mixed) == pytest.approx(0.5)
    assert information.pure_fidelity([1.0, 0.0], mixed) == pytest.approx(0.5)
    with pytest.raises(NotAState):
        information.fidelity(np.array([[1.0, 1.0], [0.0, 0.0]]), first)
    with pytest.raises(NotAState):
        information.check_state(np.diag([0.7, 0.7]))

def test_information_matrix_accounting():
    protocol = small_protocol()
    c = np.array([0.6, 0.5 + 0.3j, 0.2 - 0.4j])
    c = c / np.linalg.norm(c)
    info = information.information_matrix(c, protocol)
    np.testing.assert_allclose(info.H, info.H.T, atol=1e-10 * np.abs(info.H).max())
    assert np.linalg.eigvalsh(info.H)[0] > -1e-8 * np.abs(info.H).max()
    spectrum = information.classify_spectrum(info, c)
    assert spectrum.complete
    assert spectrum.nu == 4
    assert spectrum.nu_h == 5
    assert spectrum.norm_value == pytest.approx(2 * 500 * 5, rel=1e-8)
    assert spectrum.trace == pytest.approx(2 * 500 * 5 * 3, rel=1e-6)
    assert np.sum(spectrum.physical) == pytest.approx(2 * 500 * 5 * 2, rel=1e-6)
    assert abs(spectrum.gauge[0]) < 1e-6 * spectrum.norm_value
    report = information.complete_information(spectrum)
    assert report['total'] == pytest.approx(15000, rel=1e-6)

RANDOM_CASES = [(s, r, seed) for s, r in ((2, 1), (3, 1), (3, 2), (4, 2)) for seed in range(5)]

@pytest.mark.parametrize('s, r, seed', RANDOM_CASES)
def test_random_state_spectrum(s, r, seed):
    n, m = 500, s + 1
    protocol = homodyne.build_protocol(homodyne.LocalOscillator(1.0, m),
                                       homodyne.DetectorEfficiency(), 'full',
                                       fock.BasisTruncation(s - 1), n)
    c = estimator.random_state(s, r, np.random.Generator(np.random.PCG64(seed))).c
    info = information.information_matrix(c, protocol)
    spectrum = information.classify_spectrum(info, c)
    assert spectrum.complete
    assert len(spectrum.gauge) == r * r
    assert np.all(np.abs(spectrum.gauge) < 1e-6 * spectrum.norm_value)
    assert spectrum.nu == (2 * s - r) * r - 1
    assert spectrum.norm_value == pytest.approx(2 * n * m, rel=1e-6)
    assert spectrum.trace == pytest.approx(2 * n * m * s, rel=1e-6)
    assert information.protocol_efficiency(spectrum) <= 1.0 + 1e-9
    phase = information.realify(1j * c)
    assert np.linalg.norm(info.H @ phase) <= 1e-8 * spectrum.norm_value * np.linalg.norm(phase)

def test_mixed_state_gauge():
    protocol = small_protocol()
    c = np.array([[0.8, 0.1], [0.3j, 0.2], [0.1, -0.4j]])
    c = c / np.linalg.norm(c)
    spectrum = information.classify_spectrum(information.information_matrix(c, protocol), c)
    assert len(spectrum.gauge) == 4
    assert spectrum.nu == 7
    assert spectrum.nu_h == 8
    assert spectrum.norm_value == pytest.approx(5000, rel=1e-8)

def test_minimal_mean_loss():
    assert information.minimal_mean_loss(3, 1, 500, 5) == pytest.approx(8e-4)
    reference = information.ideal_reference_spectrum(3, 1, 500, 5)
    np.testing.assert_allclose(reference, [2500] * 4)
    assert information.fidelity_loss_model(reference).mean == pytest.approx(8e-4)

def test_loss_model_weights():
    model = information.fidelity_loss_model(np.array(SQUEEZED_PHYSICAL, dtype=float))
    assert model.nu == 4
    assert model.mean == pytest.approx(8.61e-4, rel=1e-3)
    assert model.variance == pytest.approx(2 * sum((0.5 / h) ** 2 for h in SQUEEZED_PHYSICAL))
    with pytest.raises(NonPositiveEigenvalue):
        information.fidelity_loss_model(np.array([100.0, 0.0]))

def test_uniform_distribution_is_scaled_chi2():
    distribution = information.loss_distribution(FidelityLossModel((2e-4,) * 4))
    assert distribution.mean == pytest.approx(8e-4)
    assert distribution.cdf([8e-4])[0] == pytest.approx(0.5940, abs=1e-4)
    assert distribution.ppf(distribution.cdf([5e-4]))[0] == pytest.approx(5e-4)

def test_two_weight_distribution():
    distribution = LossDistribution(FidelityLossModel((1e-4, 3e-4)), seed=1)
    samples = distribution.sample(200000)
    assert samples.mean() == pytest.approx(4e-4, rel=0.01)
    for point in (1e-4, 4e-4, 1e-3):
        assert distribution.cdf([point])[0] == pytest.approx(np.mean(samples <= point), abs=0.005)
    grid = np.linspace(0.0, 6e-3, 20001)
    assert integrate.trapezoid(distribution.pdf(grid), grid) == pytest.approx(1.0, abs=1e-3)

def test_general_distribution():
    weights = tuple(0.5 / h for h in SQUEEZED_PHYSICAL)
    distribution = LossDistribution(FidelityLossModel(weights), seed=2)
    samples = distribution.sample(200000)
    for point in (4e-4, 8.61e-4, 2e-3):
        assert distribution.cdf([point])[0] == pytest.approx(np.mean(samples <= point), abs=0.005)
    median = distribution.ppf([0.5])[0]
    assert distribution.cdf([median])[0] == pytest.approx(0.5, abs=1e-5)
    assert distribution.pdf([-1.0])[0] == 0.0

def test_efficiency_of_ideal_reference():
    reference = information.InfoSpectrum(np.array([5000.0] + [2500.0] * 4 + [0.0]), 5000.0,
                                         np.array([2500.0] * 4), np.array([0.0]),
                                         3, 1, 500, 5)
    assert information.protocol_efficiency(reference) == pytest.approx(1.0)

def test_loss_curve():
    curve = information.loss_curve(LossDistribution(FidelityLossModel((2e-4,) * 4)), points=50)
    assert list(curve.columns) == ['loss', 'pdf', 'cdf']
    assert len(curve) == 50
    assert curve['cdf'].is_monotonic_increasing


def shipped_spectrum(stem):
    return campaign.prepare_campaign(data.load_config(CONFIGS / (stem + '.json'))).spectrum


def squeezed_spectrum(name):
    return shipped_spectrum('squeezed_' + name)


@pytest.mark.slow
def test_squeezed_physical_eigenvalues():
    spectrum = squeezed_spectrum('full_ideal')
    np.testing.assert_allclose(np.sort(spectrum.physical)[::-1], SQUEEZED_PHYSICAL, rtol=0.02)
    assert spectrum.norm_value == pytest.approx(5000, rel=1e-6)
    assert information.fidelity_loss_model(spectrum).mean == pytest.approx(8.61e-4, rel=0.02)


@pytest.mark.slow
@pytest.mark.parametrize('name, total, efficiency', [
    ('full_ideal', 10000, 0.93),
    ('full_lossy', 6233, 0.54),
    ('difference_ideal', 4907, 0.41),
    ('difference_lossy', 3227, 0.25),
])
def test_squeezed_variants(name, total, efficiency):
    spectrum = squeezed_spectrum(name)
    assert np.sum(spectrum.physical) == pytest.approx(total, rel=0.02)
    assert information.protocol_efficiency(spectrum) == pytest.approx(efficiency, abs=0.03)


@pytest.mark.slow
def test_squeezed_stronger_lo():
    spectrum = squeezed_spectrum('strong_lo')
    assert information.protocol_efficiency(spectrum) == pytest.approx(0.95, abs=0.03)


@pytest.mark.slow
def test_superposition_efficiency():
    spectrum = shipped_spectrum('fock_coherent_superposition')
    assert spectrum.s == 9
    assert information.protocol_efficiency(spectrum) == pytest.approx(0.95, abs=0.04)


@pytest.mark.slow
def test_two_mode_efficiency():
    spectrum = shipped_spectrum('two_mode_entangled')
    assert spectrum.s == 9
    assert spectrum.nu == 16
    assert information.protocol_efficiency(spectrum) == pytest.approx(0.90, abs=0.05)
