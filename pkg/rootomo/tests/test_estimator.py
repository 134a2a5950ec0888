import pytest
import numpy as np

from rootomo.tomography import fock, estimator, information, sampler
from rootomo.tomography import protocol as homodyne
from rootomo.tomography.estimator import PurifiedState, ReconstructionSettings
from rootomo.tomography.sampler import CountRecord, RunSeed
from rootomo.tomography.errors import NotAState, SingularItot, DimensionMismatch

BASIS = fock.BasisTruncation(2)
TRUTH = np.array([0.6, 0.5 + 0.3j, 0.2 - 0.4j])
TRUTH = TRUTH / np.linalg.norm(TRUTH)


def small_protocol(n=2000):
    return homodyne.build_protocol(homodyne.LocalOscillator(1.0, 3),
                                   homodyne.DetectorEfficiency(), 'full', BASIS, n)


def expected_counts(protocol, state):
    counts = [np.rint(protocol.n * p).astype(np.int64)
              for p in homodyne.outcome_probabilities(protocol, state)]
    return CountRecord(counts, [setting.labels for setting in protocol.settings], protocol.hash)


def test_purified_state():
    state = PurifiedState.normalized([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    assert (state.s, state.r) == (3, 2)
    assert np.trace(state.rho).real == pytest.approx(1.0)
    with pytest.raises(NotAState):
        PurifiedState(np.array([1.0, 1.0]))
    with pytest.raises(DimensionMismatch):
        PurifiedState(np.ones((2, 3)) / np.sqrt(6))

def test_from_density():
    rho = np.diag([0.7, 0.3, 0.0])
    state = PurifiedState.from_density(rho)
    assert state.r == 2
    np.testing.assert_allclose(state.rho, rho, atol=1e-12)

def test_settings_validation():
    with pytest.raises(ValueError):
        ReconstructionSettings(mixing=1.0)
    with pytest.raises(ValueError):
        ReconstructionSettings(tolerance=0.0)

def test_initial_state():
    first = estimator.initial_state(4, 2, seed=1)
    assert np.vdot(first.c, first.c).real == pytest.approx(1.0)
    assert np.array_equal(first.c, estimator.initial_state(4, 2, seed=1).c)

def test_log_likelihood_matches_problem():
    protocol = small_protocol()
    counts = expected_counts(protocol, TRUTH)
    problem = estimator.LikelihoodProblem(counts, protocol)
    c = TRUTH[:, None]
    assert estimator.log_likelihood(c, counts, protocol) == pytest.approx(
        problem.log_likelihood(c))
    other = estimator.initial_state(3, 1).c
    assert problem.log_likelihood(c) > problem.log_likelihood(other)

def test_total_information_operator():
    protocol = small_protocol()
    problem = estimator.LikelihoodProblem(expected_counts(protocol, TRUTH), protocol)
    total = sum(problem.counts[index].sum() for index in range(protocol.m))
    np.testing.assert_allclose(problem.itot, total * np.eye(3), atol=1e-6 * total)

def test_reconstruction_recovers_state():
    protocol = small_protocol()
    counts = expected_counts(protocol, TRUTH)
    result = estimator.reconstruct(counts, protocol)
    assert result.converged
    assert result.residual < 1e-8
    assert information.pure_fidelity(TRUTH, result.rho_hat) > 0.999
    assert np.trace(result.rho_hat).real == pytest.approx(1.0)

def test_reconstruction_restarts():
    protocol = small_protocol()
    record = sampler.run_protocol_simulation(protocol, TRUTH, RunSeed(4))
    single = estimator.reconstruct(record, protocol, ReconstructionSettings(seed=1))
    restarted = estimator.reconstruct(record, protocol, ReconstructionSettings(seed=1,
                                                                               restarts=2))
    assert restarted.log_likelihood >= single.log_likelihood - 1e-9

def test_mixed_reconstruction():
    protocol = small_protocol(n=5000)
    rho = 0.8 * np.outer(TRUTH, TRUTH.conj()) + 0.2 * np.diag([0.0, 0.0, 1.0])
    counts = expected_counts(protocol, rho)
    result = estimator.reconstruct(counts, protocol, ReconstructionSettings(rank=2))
    assert result.state.r == 2
    assert information.fidelity(rho, result.rho_hat) > 0.995

def test_singular_itot():
    protocol = small_protocol()
    empty = CountRecord([np.zeros(setting.n_rows, dtype=np.int64)
                         for setting in protocol.settings],
                        [setting.labels for setting in protocol.settings])
    with pytest.raises(SingularItot):
        estimator.ml_fixed_point(empty, protocol)

def test_dimension_checks():
    protocol = small_protocol()
    counts = expected_counts(protocol, TRUTH)
    with pytest.raises(DimensionMismatch):
        estimator.log_likelihood(np.ones(4) / 2.0, counts, protocol)
    with pytest.raises(DimensionMismatch):
        estimator.ml_fixed_point(counts, protocol, init=estimator.initial_state(4, 1))

def test_embed():
    vectors = fock.adapted_basis(0.5, 0j, 2, fock.BasisTruncation(15))
    rho = estimator.embed(np.array([[1.0], [0.0]]), vectors)
    assert rho.shape == (16, 16)
    assert np.trace(rho).real == pytest.approx(1.0)

def test_principal_components():
    rho = np.diag([0.5, 0.3, 0.2, 0.0]).astype(complex)
    components = estimator.principal_component_reduction(rho, 2)
    assert not components.degenerate
    assert components.retained_weight == pytest.approx(0.8)
    np.testing.assert_allclose(np.abs(components.vectors[:2, :]), np.eye(2), atol=1e-12)

def test_principal_components_degenerate():
    rho = np.diag([1.0, 0.0, 0.0, 0.0]).astype(complex)
    components = estimator.principal_component_reduction(rho, 2)
    assert components.degenerate
    np.testing.assert_allclose(components.vectors.conj().T @ components.vectors, np.eye(2),
                               atol=1e-10)
    np.testing.assert_allclose(np.abs(components.vectors[:, 1]), [0, 1, 0, 0], atol=1e-10)

def test_principal_components_full_rank_is_unitary():
    rng = np.random.default_rng(0)
    c = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    rho = c @ c.conj().T
    rho /= np.trace(rho)
    components = estimator.principal_component_reduction(rho, 3)
    np.testing.assert_allclose(components.vectors.conj().T @ components.vectors, np.eye(3),
                               atol=1e-10)
    protocol = small_protocol()
    projected = homodyne.project_protocol(protocol, [components.vectors])
    state = components.vectors.conj().T @ TRUTH
    regrouped = homodyne.regroup_rows(homodyne.outcome_probabilities(protocol, TRUTH),
                                      homodyne.label_map(protocol, projected), projected)
    for expected, actual in zip(regrouped, homodyne.outcome_probabilities(projected, state)):
        np.testing.assert_allclose(actual, expected, atol=1e-10)
    with pytest.raises(DimensionMismatch):
        estimator.principal_component_reduction(rho, 4)


@pytest.mark.slow
def test_adapted_basis_fit():
    alpha, xi = 1 - 1j, 0.3 * np.exp(1j * np.pi / 3)
    basis = fock.auto_truncation(alpha, xi)
    ket = fock.basis_state(fock.ModeParams(alpha, xi), basis)
    protocol = homodyne.build_protocol(homodyne.LocalOscillator(2.0, 5),
                                       homodyne.DetectorEfficiency(), 'full', basis, 500,
                                       marginals=[np.outer(ket, ket.conj())])
    record = sampler.run_protocol_simulation(protocol, ket, RunSeed(2018))
    fit = estimator.fit_adapted_basis(record, protocol, basis)
    assert fit.log_likelihood >= fit.grid_log_likelihood
    for estimate, truth in ((fit.params.alpha, alpha), (fit.params.xi, xi)):
        assert abs(estimate.real - truth.real) < 0.1
        assert abs(estimate.imag - truth.imag) < 0.1

def test_likelihood_never_decreases():
    protocol = small_protocol(n=500)
    record = sampler.run_protocol_simulation(protocol, TRUTH, RunSeed(11))
    start = estimator.initial_state(3, 1, seed=2)
    previous = estimator.LikelihoodProblem(record, protocol).log_likelihood(start.c)
    for iterations in range(1, 41):
        result = estimator.ml_fixed_point(record, protocol,
                                          ReconstructionSettings(max_iterations=iterations),
                                          start)
        assert result.log_likelihood >= previous - 1e-12 * abs(previous)
        previous = result.log_likelihood


def qubit_kets(theta, phi):
    """ columns cos(theta / 2) |0> + e^{i phi} sin(theta / 2) |1> """
    return np.array([np.cos(theta / 2) + 0j, np.exp(1j * phi) * np.sin(theta / 2)])


def grid_log_likelihood(problem, kets, chunk=2048):
    values = []
    for start in range(0, kets.shape[1], chunk):
        block = kets[:, start:start + chunk]
        total = np.zeros(block.shape[1])
        for factors, counts in zip(problem.factors, problem.counts):
            p = np.sum(np.abs(np.einsum('jax,xg->jag', factors, block)) ** 2, axis=1)
            total += counts @ np.log(np.maximum(p, problem.p_floor))
        values.append(total)
    return np.concatenate(values)


def grid_maximum(problem, rounds=4, zoom_points=41):
    theta, phi = np.meshgrid(np.linspace(0.0, np.pi, 181),
                             np.linspace(0.0, 2 * np.pi, 360, endpoint=False), indexing='ij')
    theta, phi = theta.ravel(), phi.ravel()
    step = np.pi / 180
    best = np.argmax(grid_log_likelihood(problem, qubit_kets(theta, phi)))
    center = theta[best], phi[best]
    for _ in range(rounds):
        theta_axis = np.clip(np.linspace(center[0] - 2 * step, center[0] + 2 * step,
                                         zoom_points), 0.0, np.pi)
        phi_axis = np.linspace(center[1] - 2 * step, center[1] + 2 * step, zoom_points)
        theta, phi = (grid.ravel() for grid in np.meshgrid(theta_axis, phi_axis, indexing='ij'))
        values = grid_log_likelihood(problem, qubit_kets(theta, phi))
        best = np.argmax(values)
        center = theta[best], phi[best]
        step /= 10
    return qubit_kets(*center), values[best]


@pytest.mark.slow
@pytest.mark.parametrize('seed', [0, 1, 2])
def test_qubit_reconstruction_matches_grid_search(seed):
    protocol = homodyne.build_protocol(homodyne.LocalOscillator(1.0, 3),
                                       homodyne.DetectorEfficiency(), 'full',
                                       fock.BasisTruncation(1), 500)
    truth = estimator.random_state(2, 1, np.random.Generator(np.random.PCG64(seed))).c[:, 0]
    record = sampler.run_protocol_simulation(protocol, truth, RunSeed(seed))
    problem = estimator.LikelihoodProblem(record, protocol)
    ket, grid_value = grid_maximum(problem)
    result = estimator.reconstruct(record, protocol,
                                   ReconstructionSettings(tolerance=1e-14,
                                                          residual_tolerance=1e-10,
                                                          restarts=2))
    assert result.log_likelihood >= grid_value - 1e-6
    assert abs(result.log_likelihood - grid_value) < 1e-6
    assert abs(np.vdot(ket, result.c_hat[:, 0])) ** 2 >= 1 - 1e-4
