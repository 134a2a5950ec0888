"""
File: data.py
Description:  Experiment configuration and artifact files. Configs are
JSON validated against experiment_schema.json; complex numbers are
written as [re, im]. Count records are CSV (phase_index, label, count)
with '#' header lines carrying the protocol hash and the seed.
"""

import json
import logging
import pathlib

from dataclasses import dataclass, field, asdict

import numpy as np
import pandas as pd
import jsonschema

from rootomo.util import from_pair, to_pair, to_pairs, from_pairs, canonical_json, stable_hash
from rootomo.tomography.sampler import CountRecord, RunSeed
from rootomo.tomography.estimator import PurifiedState, ReconstructionResult
from rootomo.tomography.errors import ConfigError, MissingArtifacts, DimensionMismatch

SCHEMA_PATH = pathlib.Path(__file__).with_name('experiment_schema.json')
COMPLEX_KEYS = ('alpha', 'xi', 'c_alpha', 'c_n', 'alpha_a', 'alpha_b', 'xi_a', 'xi_b')


def _per_mode(value, modes, what):
    """ scalar or list config value as a tuple with one entry per mode """
    if value is None:
        return (None,) * modes
    if isinstance(value, (list, tuple)):
        if len(value) == 1:
            return tuple(value) * modes
        if len(value) != modes:
            raise ConfigError("%s needs one value per mode (%d), got %r" % (what, modes, value))
        return tuple(value)
    return (value,) * modes


def _compact(values):
    """ per-mode tuple back to the scalar form when all modes agree """
    if values is None:
        return None
    values = list(values)
    return values[0] if len(set(values)) == 1 else values


@dataclass
class StateSpec:
    family: str
    params: dict = field(default_factory=dict)

    @property
    def modes(self):
        if self.family == 'two_mode_entangled':
            return 2
        if self.family == 'explicit':
            return len(self.params.get('dims', [0]))
        return 1

    @classmethod
    def from_dict(cls, data):
        params = {}
        for key, value in data.items():
            if key == 'family':
                continue
            if key in COMPLEX_KEYS:
                params[key] = from_pair(value)
            elif key == 'amplitudes':
                params[key] = [from_pair(item) for item in value]
            else:
                params[key] = value
        return cls(data['family'], params)

    def to_dict(self):
        data = {'family': self.family}
        for key, value in self.params.items():
            if key in COMPLEX_KEYS:
                data[key] = to_pair(value)
            elif key == 'amplitudes':
                data[key] = [to_pair(item) for item in value]
            else:
                data[key] = value
        return data


@dataclass
class PcaSpec:
    s_big: int
    s_target: int


@dataclass
class BasisSpec:
    s: tuple
    kind: str = 'adapted'
    center: str = 'true'
    pca: PcaSpec = None

    @classmethod
    def from_dict(cls, data, modes):
        pca = data.get('pca')
        return cls(_per_mode(data['s'], modes, 'basis.s'), data.get('kind', 'adapted'),
                   data.get('center', 'true'), PcaSpec(**pca) if pca else None)

    def to_dict(self):
        return {'s': _compact(self.s), 'kind': self.kind, 'center': self.center,
                'pca': asdict(self.pca) if self.pca else None}


@dataclass
class ProtocolSpec:
    lo_amplitude: tuple
    m: tuple
    statistics: str = 'full'
    eta: tuple = (1.0, 1.0)
    system_n_max: tuple = None
    lo_n_max: tuple = None
    theta: float = np.pi / 4
    phi: float = 0.0

    @classmethod
    def from_dict(cls, data, modes):
        return cls(_per_mode(data['lo_amplitude'], modes, 'protocol.lo_amplitude'),
                   _per_mode(data['m'], modes, 'protocol.m'),
                   data.get('statistics', 'full'), tuple(data.get('eta', (1.0, 1.0))),
                   _per_mode(data.get('system_n_max'), modes, 'protocol.system_n_max'),
                   _per_mode(data.get('lo_n_max'), modes, 'protocol.lo_n_max'),
                   data.get('theta', np.pi / 4), data.get('phi', 0.0))

    def to_dict(self):
        return {'lo_amplitude': _compact(self.lo_amplitude), 'm': _compact(self.m),
                'statistics': self.statistics, 'eta': list(self.eta),
                'system_n_max': _compact(self.system_n_max), 'lo_n_max': _compact(self.lo_n_max),
                'theta': self.theta, 'phi': self.phi}


@dataclass
class ReconstructionSpec:
    rank: int = 1
    max_iterations: int = 20000
    tolerance: float = 1e-10
    residual_tolerance: float = 1e-8
    mixing: float = 0.3
    restarts: int = 0


@dataclass
class AdequacySpec:
    min_expected: float = 5.0
    alpha0: tuple = (0.01, 0.05, 0.1)

    def to_dict(self):
        return {'min_expected': self.min_expected, 'alpha0': list(self.alpha0)}


@dataclass
class QfuncSpec:
    points: int = 101
    half_width: float = None


@dataclass
class CheckSpec:
    """ acceptance targets compared by `report --check` """
    e_p: float = None
    e_p_tolerance: float = 0.03
    eigenvalues: list = None
    information: float = None
    relative_tolerance: float = 0.02
    mean_loss: float = None
    mean_loss_tolerance: float = 0.15
    ks_pvalue_min: float = None
    rejection_alpha0: float = 0.05
    rejection_window: list = None


@dataclass
class NumericsSpec:
    leakage_tolerance: float = 1e-10
    pool_cutoff: float = 1e-12
    zero_ratio: float = 1e-6
    p_floor: float = 1e-300


@dataclass
class ExperimentConfig:
    state: StateSpec
    basis: BasisSpec
    protocol: ProtocolSpec
    n: int
    name: str = 'experiment'
    runs: int = 1
    master_seed: int = 0
    output: str = 'output'
    threads: int = 1
    reconstruction: ReconstructionSpec = field(default_factory=ReconstructionSpec)
    adequacy: AdequacySpec = field(default_factory=AdequacySpec)
    qfunc: QfuncSpec = field(default_factory=QfuncSpec)
    checks: CheckSpec = field(default_factory=CheckSpec)
    numerics: NumericsSpec = field(default_factory=NumericsSpec)

    @property
    def modes(self):
        return self.state.modes

    @classmethod
    def from_dict(cls, data):
        state = StateSpec.from_dict(data['state'])
        modes = state.modes
        adequacy = data.get('adequacy', {})
        return cls(state=state,
                   basis=BasisSpec.from_dict(data['basis'], modes),
                   protocol=ProtocolSpec.from_dict(data['protocol'], modes),
                   n=data['n'],
                   name=data.get('name', 'experiment'),
                   runs=data.get('runs', 1),
                   master_seed=data.get('master_seed', 0),
                   output=data.get('output', 'output'),
                   threads=data.get('threads', 1),
                   reconstruction=ReconstructionSpec(**data.get('reconstruction', {})),
                   adequacy=AdequacySpec(adequacy.get('min_expected', 5.0),
                                         tuple(adequacy.get('alpha0', (0.01, 0.05, 0.1)))),
                   qfunc=QfuncSpec(**data.get('qfunc', {})),
                   checks=CheckSpec(**data.get('checks', {})),
                   numerics=NumericsSpec(**data.get('numerics', {})))

    def to_dict(self):
        return {'name': self.name, 'state': self.state.to_dict(), 'basis': self.basis.to_dict(),
                'protocol': self.protocol.to_dict(), 'n': self.n, 'runs': self.runs,
                'master_seed': self.master_seed, 'output': self.output,
                'threads': self.threads, 'reconstruction': asdict(self.reconstruction),
                'adequacy': self.adequacy.to_dict(), 'qfunc': asdict(self.qfunc),
                'checks': asdict(self.checks), 'numerics': asdict(self.numerics)}

    @property
    def hash(self):
        return config_hash(self)


def config_hash(config):
    """ first 16 hex digits of the sha256 of the canonical config json """
    return stable_hash(config.to_dict())


def load_schema():
    with open(SCHEMA_PATH) as handle:
        return json.load(handle)


def _check_consistency(config):
    modes = config.modes
    if modes not in (1, 2):
        raise ConfigError("only one or two modes are supported, got %d" % modes)
    if config.basis.pca is not None:
        if modes != 1:
            raise ConfigError("principal components are supported for single-mode states only")
        if config.basis.pca.s_target > config.basis.pca.s_big:
            raise ConfigError("basis.pca.s_target %d exceeds s_big %d"
                              % (config.basis.pca.s_target, config.basis.pca.s_big))
    if config.basis.center == 'fit' and modes != 1:
        raise ConfigError("the adapted basis is fitted for single-mode states only")
    if config.state.family == 'explicit':
        dims = config.state.params.get('dims', [len(config.state.params['amplitudes'])])
        if int(np.prod(dims)) != len(config.state.params['amplitudes']):
            raise ConfigError("explicit amplitudes do not match dims %s" % (dims,))
    if config.reconstruction.rank > min(config.basis.s) ** modes and config.basis.pca is None:
        raise ConfigError("rank %d exceeds the model dimension" % config.reconstruction.rank)


def parse_config(config):
    """ parses and validates an experiment config from an open file """
    text = config.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        logging.error("config line %d column %d: %s", err.lineno, err.colno, err.msg)
        raise ConfigError("line %d column %d: %s" % (err.lineno, err.colno, err.msg)) from err
    try:
        jsonschema.validate(data, load_schema())
    except jsonschema.ValidationError as err:
        where = '/'.join(str(part) for part in err.absolute_path) or '<root>'
        logging.error("config %s: %s", where, err.message)
        raise ConfigError("%s: %s" % (where, err.message)) from err
    try:
        parsed = ExperimentConfig.from_dict(data)
    except (TypeError, ValueError) as err:
        logging.error(err)
        raise ConfigError(str(err)) from err
    _check_consistency(parsed)
    return parsed


def load_config(path):
    with open(path) as handle:
        return parse_config(handle)


def write_json(obj, path):
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(obj) + '\n')
    return path


def read_json(path):
    path = pathlib.Path(path)
    if not path.exists():
        raise MissingArtifacts("missing %s" % path)
    return json.loads(path.read_text())


def write_frame(frame, path):
    """ comma separated, '.' decimal, header row, LF line endings """
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator='\n', float_format='%.12g')
    return path


def read_frame(path):
    path = pathlib.Path(path)
    if not path.exists():
        raise MissingArtifacts("missing %s" % path)
    frame = pd.read_csv(path, comment='#')
    if frame.empty:
        raise MissingArtifacts("%s holds no rows" % path)
    return frame


def write_counts(record, path, config_id=''):
    """ nonzero counts only; zeros are restored against the protocol on read """
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    phases, labels, counts = [], [], []
    for index, (values, setting_labels) in enumerate(zip(record.counts, record.labels)):
        for row in np.flatnonzero(values):
            phases.append(index)
            labels.append(str(setting_labels[row]))
            counts.append(int(values[row]))
    frame = pd.DataFrame({'phase_index': phases, 'label': labels, 'count': counts})
    seed = record.seed.to_dict() if record.seed is not None else {}
    with open(path, 'w', newline='\n') as handle:
        handle.write('# protocol_hash=%s\n' % record.protocol_hash)
        handle.write('# config_hash=%s\n' % config_id)
        handle.write('# master_seed=%s\n' % seed.get('master_seed', ''))
        handle.write('# run_index=%s\n' % seed.get('run_index', ''))
        frame.to_csv(handle, index=False, lineterminator='\n')
    return path


def read_count_header(path):
    header = {}
    with open(path) as handle:
        for line in handle:
            if not line.startswith('#'):
                break
            key, _, value = line[1:].strip().partition('=')
            header[key] = value
    return header


def read_counts(path, protocol):
    """ CountRecord aligned with the rows of protocol """
    path = pathlib.Path(path)
    if not path.exists():
        raise MissingArtifacts("missing %s" % path)
    header = read_count_header(path)
    if header.get('protocol_hash') and header['protocol_hash'] != protocol.hash:
        logging.warning("%s was recorded with protocol %s, reading against %s", path,
                        header['protocol_hash'], protocol.hash)
    frame = pd.read_csv(path, comment='#', dtype={'label': str})
    counts = [np.zeros(setting.n_rows, dtype=np.int64) for setting in protocol.settings]
    lookups = {}
    for phase, label, count in frame.itertuples(index=False):
        if not 0 <= phase < protocol.m:
            raise DimensionMismatch("phase index %d outside the protocol" % phase)
        if phase not in lookups:
            lookups[phase] = {str(item): row
                              for row, item in enumerate(protocol.settings[phase].labels)}
        if label not in lookups[phase]:
            raise DimensionMismatch("label %s is not an outcome of setting %d" % (label, phase))
        counts[phase][lookups[phase][label]] += int(count)
    seed = None
    if header.get('master_seed') and header.get('run_index'):
        seed = RunSeed(int(header['master_seed']), int(header['run_index']))
    return CountRecord(counts, [setting.labels for setting in protocol.settings],
                       protocol.hash, seed)


def result_to_dict(result, basis):
    """ ReconstructionResult with the descriptor of its model basis """
    return {'c': to_pairs(result.c_hat), 'log_likelihood': result.log_likelihood,
            'iterations': result.iterations, 'converged': result.converged,
            'residual': result.residual, 'basis': basis}


def result_from_dict(data):
    return ReconstructionResult(PurifiedState.normalized(from_pairs(data['c'])),
                                data['log_likelihood'], data['iterations'], data['converged'],
                                data['residual'])
