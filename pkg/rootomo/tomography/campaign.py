"""
File: campaign.py
Description:  Experiment orchestration behind the command line verbs.
A campaign is prepared once per config: the true state, the simulation
protocol in Fock space, the model basis (optionally fitted on a pilot
record and reduced to principal components), the model protocol and
the information analysis at the true state. Runs then simulate,
reconstruct and test adequacy independently of each other.
"""

import dataclasses
import logging
import pathlib
import multiprocessing

from dataclasses import dataclass

import numpy as np
import pandas as pd

from rootomo.util import to_pair
from rootomo.tomography import fock, data, sampler, estimator, information, adequacy
from rootomo.tomography import protocol as homodyne
from rootomo.tomography.errors import (TomographyError, NumericalError, MissingArtifacts,
                                       AcceptanceCheckFailed)

MAX_FAILURE_FRACTION = 0.1
HISTOGRAM_BINS = 20
ADEQUACY_MODES = [mode.value for mode in adequacy.AdequacyMode]


@dataclass
class Campaign:
    """ immutable context shared by all runs of one config """
    config: data.ExperimentConfig
    truncations: list
    ket: np.ndarray
    simulation: homodyne.MeasurementProtocol
    model: homodyne.MeasurementProtocol
    basis_vectors: np.ndarray
    mapping: list
    projection: np.ndarray
    truth: estimator.PurifiedState
    spectrum: information.InfoSpectrum
    distribution: information.LossDistribution
    p_true: list
    p_true_model: list
    basis_descriptor: dict

    @property
    def model_weight(self):
        """ squared norm of the true state inside the model subspace """
        return float(np.vdot(self.projection, self.projection).real)


def with_overrides(config, seed=None, runs=None, out=None, threads=None):
    """ command line values replace the config ones """
    changes = {key: value for key, value in (('master_seed', seed), ('runs', runs),
                                             ('output', out), ('threads', threads))
               if value is not None}
    return dataclasses.replace(config, **changes)


def reconstruction_settings(config, seed=0):
    wanted = config.reconstruction
    return estimator.ReconstructionSettings(wanted.rank, wanted.max_iterations, wanted.tolerance,
                                            wanted.residual_tolerance, wanted.mixing,
                                            wanted.restarts, seed, config.numerics.p_floor)


def true_centers(config):
    """ (alpha, xi) of the displaced squeezed family each mode of the state
    is built around, and the highest Fock index the state uses there """
    params = config.state.params
    family = config.state.family
    if family == 'squeezed_coherent':
        return [fock.ModeParams(params['alpha'], params['xi'])], [0]
    if family == 'fock_coherent_superposition':
        return [fock.ModeParams(params['alpha'], 0j)], [params['n']]
    if family == 'two_mode_entangled':
        top = max(params['k1'], params['k2'])
        return ([fock.ModeParams(params['alpha_a'], params.get('xi_a', 0j)),
                 fock.ModeParams(params['alpha_b'], params.get('xi_b', 0j))], [top, top])
    dims = params.get('dims', [len(params['amplitudes'])])
    return [fock.ModeParams() for _ in dims], [dim - 1 for dim in dims]


def mode_truncations(config):
    """ per-mode system cutoff: the configured one, else one that holds the
    state and every model basis vector """
    centers, tops = true_centers(config)
    s_needed = ([config.basis.pca.s_big] if config.basis.pca else list(config.basis.s))
    truncations = []
    for center, top, s_mode, n_max in zip(centers, tops, s_needed, config.protocol.system_n_max):
        if n_max is not None:
            truncations.append(fock.BasisTruncation(n_max))
            continue
        k = max(top, s_mode - 1)
        truncations.append(max(fock.auto_truncation(center.alpha, center.xi, k),
                               fock.BasisTruncation(k), key=lambda basis: basis.n_max))
    return truncations


def prepare_state(config, truncations):
    """ the true state as a ket on the joint truncation, mode A slow """
    params = config.state.params
    family = config.state.family
    tolerance = config.numerics.leakage_tolerance
    if family == 'squeezed_coherent':
        return fock.basis_state(fock.ModeParams(params['alpha'], params['xi']), truncations[0],
                                tolerance)
    if family == 'fock_coherent_superposition':
        coherent = fock.basis_state(fock.ModeParams(params['alpha']), truncations[0], tolerance)
        ket = params['c_alpha'] * coherent + params['c_n'] * fock.fock_ket(params['n'],
                                                                           truncations[0])
        return ket / np.linalg.norm(ket)
    if family == 'two_mode_entangled':
        ks = [params['k1'], params['k2']]
        first = fock.basis_states(params['alpha_a'], params.get('xi_a', 0j), ks, truncations[0],
                                  tolerance)
        second = fock.basis_states(params['alpha_b'], params.get('xi_b', 0j), ks,
                                   truncations[1], tolerance)
        ket = (fock.tensor_product(first[:, 0], second[:, 1])
               + fock.tensor_product(first[:, 1], second[:, 0]))
        return ket / np.linalg.norm(ket)
    dims = params.get('dims', [len(params['amplitudes'])])
    amplitudes = np.array(params['amplitudes'], dtype=complex).reshape(dims)
    padded = np.zeros([basis.dim for basis in truncations], dtype=complex)
    padded[tuple(slice(0, dim) for dim in dims)] = amplitudes
    return padded.ravel() / np.linalg.norm(padded)


def reduced_densities(ket, truncations):
    """ one reduced density matrix per mode """
    if len(truncations) == 1:
        return [np.outer(ket, ket.conj())]
    psi = ket.reshape(truncations[0].dim, truncations[1].dim)
    return [psi @ psi.conj().T, psi.T @ psi.conj()]


def build_simulation_protocol(config, truncations, ket):
    setup = config.protocol
    los = [homodyne.LocalOscillator(amplitude, m) for amplitude, m in zip(setup.lo_amplitude,
                                                                           setup.m)]
    lo_bases = [None if n_max is None else fock.BasisTruncation(n_max)
                for n_max in setup.lo_n_max]
    return homodyne.build_protocol(los, homodyne.DetectorEfficiency(*setup.eta), setup.statistics,
                                   truncations, config.n, None, lo_bases, setup.theta, setup.phi,
                                   config.numerics.pool_cutoff,
                                   reduced_densities(ket, truncations))


def _center_descriptor(center):
    return {'alpha': to_pair(center.alpha), 'xi': to_pair(center.xi)}


def model_bases(config, truncations, simulation, ket):
    """ per-mode Fock-space isometries of the model and their descriptor """
    centers, _ = true_centers(config)
    descriptor = {'kind': config.basis.kind, 'center': config.basis.center, 'fit': None,
                  'pca': None, 'r': config.reconstruction.rank}
    tolerance = config.numerics.leakage_tolerance
    pilot = None
    if config.basis.kind == 'fock':
        centers = [fock.ModeParams() for _ in centers]
    elif config.basis.center == 'fit':
        pilot = sampler.run_protocol_simulation(
            simulation, ket, sampler.RunSeed(config.master_seed, sampler.PILOT_RUN_INDEX))
        fit = estimator.fit_adapted_basis(pilot, simulation, truncations[0])
        centers = [fit.params]
        descriptor['fit'] = {'log_likelihood': fit.log_likelihood,
                             'grid': _center_descriptor(fit.grid_params)}
    descriptor['centers'] = [_center_descriptor(center) for center in centers]
    if config.basis.pca is not None:
        center = centers[0]
        big = fock.adapted_basis(center.alpha, center.xi, config.basis.pca.s_big,
                                 truncations[0], tolerance)
        stage = homodyne.project_protocol(simulation, [big], config.numerics.pool_cutoff)
        if pilot is None:
            pilot = sampler.run_protocol_simulation(
                simulation, ket, sampler.RunSeed(config.master_seed, sampler.PILOT_RUN_INDEX))
        counts = pilot.regroup(homodyne.label_map(simulation, stage), stage)
        result = estimator.reconstruct(counts, stage, reconstruction_settings(config))
        components = estimator.principal_component_reduction(result.rho_hat,
                                                             config.basis.pca.s_target)
        descriptor['pca'] = {'s_big': config.basis.pca.s_big,
                             's_target': config.basis.pca.s_target,
                             'retained_weight': components.retained_weight,
                             'degenerate': components.degenerate,
                             'pilot_converged': result.converged}
        bases = [big @ components.vectors]
    elif config.basis.kind == 'fock':
        bases = [np.eye(basis.dim, s_mode, dtype=complex)
                 for basis, s_mode in zip(truncations, config.basis.s)]
    else:
        bases = [fock.adapted_basis(center.alpha, center.xi, s_mode, basis, tolerance)
                 for center, s_mode, basis in zip(centers, config.basis.s, truncations)]
    descriptor['s'] = [int(basis.shape[1]) for basis in bases]
    return bases, descriptor


def prepare_campaign(config):
    """ everything the runs share; deterministic given the config """
    truncations = mode_truncations(config)
    ket = prepare_state(config, truncations)
    simulation = build_simulation_protocol(config, truncations, ket)
    logging.info("simulation protocol %s", simulation)
    bases, descriptor = model_bases(config, truncations, simulation, ket)
    model = homodyne.project_protocol(simulation, bases, config.numerics.pool_cutoff)
    logging.info("model protocol %s", model)
    basis_vectors = bases[0] if len(bases) == 1 else fock.tensor_product(bases[0], bases[1])
    projection = basis_vectors.conj().T @ ket
    truth = estimator.PurifiedState.normalized(projection)
    spectrum = information.classify_spectrum(information.information_matrix(truth, model), truth,
                                             config.numerics.zero_ratio)
    distribution = information.LossDistribution(information.fidelity_loss_model(spectrum),
                                                config.master_seed)
    mapping = homodyne.label_map(simulation, model)
    p_true = homodyne.outcome_probabilities(simulation, ket)
    campaign = Campaign(config, truncations, ket, simulation, model, basis_vectors, mapping,
                        projection, truth, spectrum, distribution, p_true,
                        homodyne.regroup_rows(p_true, mapping, model), descriptor)
    descriptor['model_weight'] = campaign.model_weight
    logging.info("model keeps weight %.8f of the true state, e_P = %.4f",
                 campaign.model_weight, information.protocol_efficiency(spectrum))
    return campaign


def adequacy_reports(campaign, counts, model_counts, result):
    """ the three adequacy comparisons of one reconstruction """
    config = campaign.config
    n = config.n
    min_expected = config.adequacy.min_expected
    p_model = homodyne.outcome_probabilities(campaign.model, result.state)
    s, r = result.state.s, result.state.r
    nu = (2 * s - r) * r - 1
    inputs = {
        'theory_vs_experiment': ([n * p for p in campaign.p_true], counts),
        'model_vs_experiment': ([n * p for p in p_model], model_counts),
        'theory_vs_model': ([n * p for p in campaign.p_true_model], [n * p for p in p_model]),
    }
    reports = {}
    for mode, (expected, observed) in inputs.items():
        try:
            reports[mode] = adequacy.adequacy_report(mode, expected, observed, nu, min_expected)
        except NumericalError as err:
            logging.warning("%s adequacy unavailable: %s", mode, err)
            reports[mode] = None
    return reports


def run_once(campaign, run_index, out_dir=None):
    """ simulate, reconstruct and test one run """
    config = campaign.config
    seed = sampler.RunSeed(config.master_seed, run_index)
    counts = sampler.run_protocol_simulation(campaign.simulation, campaign.ket, seed)
    model_counts = counts.regroup(campaign.mapping, campaign.model)
    settings = reconstruction_settings(config, sampler.mix_seed(config.master_seed, run_index)
                                       & 0xFFFFFFFF)
    result = estimator.reconstruct(model_counts, campaign.model, settings)
    fidelity = information.pure_fidelity(campaign.projection, result.rho_hat)
    reports = adequacy_reports(campaign, counts, model_counts, result)
    row = {'run_index': run_index, 'fidelity': fidelity, 'loss': 1.0 - fidelity,
           'log_likelihood': result.log_likelihood, 'iterations': result.iterations,
           'converged': result.converged, 'residual': result.residual, 'error': ''}
    for mode in ADEQUACY_MODES:
        report = reports[mode]
        row['chi2_' + mode] = report.chi2 if report else np.nan
        row['nu_' + mode] = report.nu_ad if report else np.nan
        row['alpha_crit_' + mode] = report.alpha_crit if report else np.nan
    if out_dir is not None:
        runs = pathlib.Path(out_dir, 'runs')
        data.write_counts(counts, runs / ('counts_%05d.csv' % run_index), config.hash)
        payload = data.result_to_dict(result, campaign.basis_descriptor)
        payload.update({'fidelity': fidelity, 'config_hash': config.hash,
                        'seed': seed.to_dict(),
                        'adequacy': {mode: report.to_dict() if report else None
                                     for mode, report in reports.items()}})
        data.write_json(payload, runs / ('result_%05d.json' % run_index))
    logging.debug("run %d: 1 - F = %.3e after %d iterations", run_index, 1.0 - fidelity,
                  result.iterations)
    return row


_WORKER = {}


def _init_worker(campaign, out_dir):
    _WORKER['campaign'] = campaign
    _WORKER['out_dir'] = out_dir


def _run_worker(run_index):
    try:
        return run_once(_WORKER['campaign'], run_index, _WORKER['out_dir'])
    except TomographyError as err:
        logging.warning("run %d failed: %s", run_index, err)
        return {'run_index': run_index, 'error': str(err) or type(err).__name__}


def run_all(campaign, runs, threads=1, out_dir=None):
    """ rows of all runs sorted by run index """
    indices = list(range(runs))
    if threads <= 1:
        _init_worker(campaign, out_dir)
        rows = [_run_worker(index) for index in indices]
    else:
        with multiprocessing.Pool(processes=threads, initializer=_init_worker,
                                  initargs=(campaign, out_dir)) as pool:
            rows = pool.map(_run_worker, indices)
    return sorted(rows, key=lambda row: row['run_index'])


def _stamp(config, report):
    report = dict(report)
    report.update({'config_hash': config.hash, 'master_seed': config.master_seed})
    return report


def analysis_report(campaign):
    report = information.spectrum_report(campaign.spectrum)
    report.update({'basis': campaign.basis_descriptor, 'protocol_hash': campaign.model.hash,
                   'simulation_protocol_hash': campaign.simulation.hash,
                   'model_weight': campaign.model_weight,
                   'completeness_deviation': campaign.model.completeness_deviation()})
    return _stamp(campaign.config, report)


def write_analysis(campaign, out_dir):
    out_dir = pathlib.Path(out_dir)
    config = campaign.config
    data.write_json(config.to_dict(), out_dir / 'config.json')
    report = analysis_report(campaign)
    data.write_json(report, out_dir / 'spectrum.json')
    data.write_frame(information.loss_curve(campaign.distribution), out_dir / 'loss_curve.csv')
    ideal = information.ideal_reference_spectrum(campaign.spectrum.s, campaign.spectrum.r,
                                                 campaign.spectrum.n, campaign.spectrum.m)
    data.write_frame(information.loss_curve(information.LossDistribution(
        information.fidelity_loss_model(ideal), config.master_seed)),
        out_dir / 'ideal_loss_curve.csv')
    return report


def cmd_analyze(config, out=None, check=False):
    """ information analysis at the true state, no per-run sampling """
    campaign = prepare_campaign(config)
    report = analysis_report(campaign)
    if out is not None:
        write_analysis(campaign, out)
    logging.info("e_P = %.4f, physical eigenvalues %s", report['e_p'],
                 np.round(report['physical'], 1).tolist())
    if check:
        check_summary({'spectrum': report}, config.checks)
    return report


def cmd_simulate(config, run_index=0, out=None):
    """ one count record of the simulation protocol """
    truncations = mode_truncations(config)
    ket = prepare_state(config, truncations)
    simulation = build_simulation_protocol(config, truncations, ket)
    record = sampler.run_protocol_simulation(simulation, ket,
                                             sampler.RunSeed(config.master_seed, run_index))
    path = pathlib.Path(out or config.output, 'counts_%05d.csv' % run_index)
    data.write_counts(record, path, config.hash)
    logging.info("wrote %s", path)
    return path


def cmd_reconstruct(config, counts_path, out=None):
    """ reconstruction of a recorded count file in the configured model """
    campaign = prepare_campaign(config)
    counts = data.read_counts(counts_path, campaign.simulation)
    model_counts = counts.regroup(campaign.mapping, campaign.model)
    result = estimator.reconstruct(model_counts, campaign.model, reconstruction_settings(config))
    payload = data.result_to_dict(result, campaign.basis_descriptor)
    payload.update({'fidelity': information.pure_fidelity(campaign.projection, result.rho_hat),
                    'config_hash': config.hash, 'counts': str(counts_path)})
    path = pathlib.Path(out or config.output, pathlib.Path(counts_path).stem + '_result.json')
    data.write_json(payload, path)
    logging.info("wrote %s", path)
    return payload


def cmd_montecarlo(config, out=None):
    """ R independent simulate / reconstruct / test cycles plus the summary """
    out_dir = pathlib.Path(out or config.output)
    campaign = prepare_campaign(config)
    write_analysis(campaign, out_dir)
    rows = run_all(campaign, config.runs, config.threads, out_dir)
    frame = pd.DataFrame(rows)
    data.write_frame(frame, out_dir / 'fidelity.csv')
    failed = int((frame['error'].fillna('') != '').sum())
    if failed > MAX_FAILURE_FRACTION * config.runs:
        logging.error("%d of %d runs failed", failed, config.runs)
        raise NumericalError("%d of %d runs failed" % (failed, config.runs))
    return cmd_report(out_dir)


def _rates(values, alpha0):
    values = values.dropna()
    if values.empty:
        return None
    return float((values > alpha0).mean())


def summarize(out_dir):
    """ campaign summary computed from the artifacts alone """
    out_dir = pathlib.Path(out_dir)
    if not (out_dir / 'config.json').exists():
        raise MissingArtifacts("missing %s" % (out_dir / 'config.json'))
    config = data.load_config(out_dir / 'config.json')
    spectrum = data.read_json(out_dir / 'spectrum.json')
    frame = data.read_frame(out_dir / 'fidelity.csv')
    good = frame[frame['error'].fillna('') == '']
    if good.empty:
        raise MissingArtifacts("no successful runs in %s" % out_dir)
    distribution = information.LossDistribution(
        information.fidelity_loss_model(np.array(spectrum['physical'])), config.master_seed)
    losses = good['loss'].to_numpy()
    summary = {'runs': int(len(frame)), 'failed': int(len(frame) - len(good)),
               'e_p': spectrum['e_p'], 'mean_loss_theory': spectrum['mean_loss'],
               'mean_loss': float(losses.mean()),
               'mean_fidelity': float(good['fidelity'].mean()),
               'std_fidelity': float(good['fidelity'].std(ddof=1)) if len(good) > 1 else 0.0,
               'converged_fraction': float(good['converged'].astype(bool).mean())}
    if len(losses) > 1:
        statistic, pvalue = adequacy.ks_against_loss(losses, distribution)
        summary['ks'] = {'statistic': statistic, 'pvalue': pvalue}
    try:
        summary['loss_histogram'] = adequacy.loss_histogram_adequacy(
            losses, distribution, config.adequacy.min_expected).to_dict()
    except NumericalError as err:
        logging.debug("loss histogram test skipped: %s", err)
        summary['loss_histogram'] = None
    summary['adequacy'] = {mode: {str(alpha0): _rates(good['alpha_crit_' + mode], alpha0)
                                  for alpha0 in config.adequacy.alpha0}
                           for mode in ADEQUACY_MODES}
    rejection = good['alpha_crit_theory_vs_experiment'].dropna()
    summary['rejection_rate'] = (float((rejection <= config.checks.rejection_alpha0).mean())
                                 if not rejection.empty else None)
    counts, edges = np.histogram(losses, bins=HISTOGRAM_BINS)
    histogram = pd.DataFrame({'left': edges[:-1], 'right': edges[1:], 'count': counts,
                              'density': counts / (len(losses) * np.diff(edges))})
    return _stamp(config, {'summary': summary, 'spectrum': spectrum}), config, histogram


def render_svg(out_dir, histogram, curve):
    """ histogram of the losses against the theoretical density """
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt

    plt.rcParams['svg.hashsalt'] = 'rootomo'
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(histogram['left'], histogram['density'], width=histogram['right'] - histogram['left'],
           align='edge', alpha=0.5, label='runs')
    ax.plot(curve['loss'], curve['pdf'], label='theory')
    ax.set_xlabel('1 - F')
    ax.set_ylabel('density')
    ax.legend()
    path = pathlib.Path(out_dir, 'loss_histogram.svg')
    fig.savefig(path, format='svg', metadata={'Date': None})
    plt.close(fig)
    return path


def cmd_report(out_dir, check=False, svg=False):
    """ summary.json from the artifacts of a campaign, optionally checked """
    out_dir = pathlib.Path(out_dir)
    report, config, histogram = summarize(out_dir)
    data.write_frame(histogram, out_dir / 'fidelity_histogram.csv')
    data.write_json(report, out_dir / 'summary.json')
    if svg:
        render_svg(out_dir, histogram, data.read_frame(out_dir / 'loss_curve.csv'))
    logging.info("summary written to %s", out_dir / 'summary.json')
    if check:
        check_summary(report, config.checks)
    return report


def _close(value, target, relative):
    return abs(value - target) <= relative * abs(target)


def check_summary(report, checks):
    """ compare a report with the acceptance targets of the config """
    failures = []
    spectrum = report.get('spectrum', {})
    summary = report.get('summary')
    if checks.e_p is not None and abs(spectrum['e_p'] - checks.e_p) > checks.e_p_tolerance:
        failures.append("e_P %.4f not within %.3f of %.4f" % (spectrum['e_p'],
                                                              checks.e_p_tolerance, checks.e_p))
    if checks.eigenvalues is not None:
        physical = sorted(spectrum['physical'], reverse=True)
        targets = sorted(checks.eigenvalues, reverse=True)
        if len(physical) != len(targets) or not all(
                _close(value, target, checks.relative_tolerance)
                for value, target in zip(physical, targets)):
            failures.append("physical eigenvalues %s differ from %s"
                            % (np.round(physical, 1).tolist(), targets))
    if checks.information is not None:
        value = spectrum['information']['physical']
        if not _close(value, checks.information, checks.relative_tolerance):
            failures.append("physical information %.1f differs from %.1f"
                            % (value, checks.information))
    if summary is not None:
        if checks.mean_loss is not None and not _close(summary['mean_loss'], checks.mean_loss,
                                                       checks.mean_loss_tolerance):
            failures.append("mean loss %.3e differs from %.3e" % (summary['mean_loss'],
                                                                  checks.mean_loss))
        if checks.ks_pvalue_min is not None and (
                'ks' not in summary or summary['ks']['pvalue'] < checks.ks_pvalue_min):
            failures.append("KS p-value below %g" % checks.ks_pvalue_min)
        if checks.rejection_window is not None:
            rate = summary['rejection_rate']
            low, high = checks.rejection_window
            if rate is None or not low <= rate <= high:
                failures.append("rejection rate %s outside [%g, %g]" % (rate, low, high))
    if failures:
        for failure in failures:
            logging.error(failure)
        raise AcceptanceCheckFailed('; '.join(failures))
    logging.info("all acceptance checks passed")
    return True


def _grid_half_width(config, centers):
    if config.qfunc.half_width is not None:
        return config.qfunc.half_width
    return max(abs(center.alpha) for center in centers) + 3.0


def cmd_qfunc(config, out=None):
    """ Q-function tables of every mode, and the position-space wave
    function of two-mode states """
    out_dir = pathlib.Path(out or config.output)
    truncations = mode_truncations(config)
    ket = prepare_state(config, truncations)
    centers, _ = true_centers(config)
    half_width = _grid_half_width(config, centers)
    grid, _, _ = fock.quadrature_grid(0j, half_width, config.qfunc.points)
    paths = []
    names = ['qfunc.csv'] if len(truncations) == 1 else ['qfunc_a.csv', 'qfunc_b.csv']
    for name, rho in zip(names, reduced_densities(ket, truncations)):
        frame = pd.DataFrame({'re_beta': grid.real, 'im_beta': grid.imag,
                              'q': fock.q_function(rho, grid)})
        paths.append(data.write_frame(frame, out_dir / name))
    if len(truncations) == 2:
        x = np.linspace(-np.sqrt(2.0) * half_width, np.sqrt(2.0) * half_width,
                        config.qfunc.points)
        psi = ket.reshape(truncations[0].dim, truncations[1].dim)
        table = (fock.position_wavefunctions(x, truncations[0].dim).T @ psi
                 @ fock.position_wavefunctions(x, truncations[1].dim))
        x_a, x_b = np.meshgrid(x, x, indexing='ij')
        frame = pd.DataFrame({'x_a': x_a.ravel(), 'x_b': x_b.ravel(), 're': table.real.ravel(),
                              'im': table.imag.ravel(), 'density': np.abs(table.ravel()) ** 2})
        paths.append(data.write_frame(frame, out_dir / 'wavefunction.csv'))
    logging.info("wrote %s", ', '.join(str(path) for path in paths))
    return paths

