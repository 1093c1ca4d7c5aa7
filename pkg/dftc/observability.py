"""
Empirical observability Gramians for sensor subsets.

For every base point x0 and state direction j the system is simulated from
x0 + eps*e_j and x0 - eps*e_j; the Gramian entry (j, k) integrates the inner
product of the output differences over the probe horizon, scaled by
1/(4 eps^2). Outputs are kept per channel, so the Gramian of any sensor subset
is a sum over the same probe trajectories.
"""
import itertools
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from adsputils import setup_logging

from dftc import plant, rules
from dftc.baseline import baseline_policy
from dftc.exceptions import (DivergenceError, InvalidInputError,
                             UnobservableError)
from dftc.models import PlantParams, SensorConfig
from dftc.utils import stream_rng

logger = setup_logging(__name__)

CLOSED_LOOP = 'closed_loop'
ZERO_INPUT = 'zero_input'
DET_FLOOR = 1e-300

REFERENCE = 'reference'
OK = 'ok'
UNOBSERVABLE = 'unobservable'


@dataclass(frozen=True)
class GramianConfig:
    epsilon: float = 1e-4
    horizon: float = 4.0
    step: float = 1e-3
    base_points: Tuple[np.ndarray, ...] = ()
    probe_policy: str = CLOSED_LOOP

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise InvalidInputError('Gramian epsilon must lie in (0, 1)')
        if not (self.horizon > 0 and self.step > 0):
            raise InvalidInputError('Gramian horizon and step must be positive')
        if len(self.base_points) == 0:
            raise InvalidInputError('At least one base point is needed')
        if self.probe_policy not in (CLOSED_LOOP, ZERO_INPUT):
            raise InvalidInputError('Unknown probe policy: {0}'.format(self.probe_policy))
        object.__setattr__(self, 'base_points',
                           tuple(np.asarray(b, dtype=float) for b in self.base_points))

    @property
    def n_steps(self):
        return int(round(self.horizon / self.step))


@dataclass(frozen=True)
class GramianResult:
    W: np.ndarray
    J: Optional[float]
    config: SensorConfig


@dataclass(frozen=True)
class RankingRow:
    config: SensorConfig
    J: Optional[float]
    status: str


class PlantProbe(object):
    """Plant with all six sensors, driven by the baseline gain or by zero input"""

    def __init__(self, params, gain=None):
        self.params = params
        self.gain = gain
        self.n_states = rules.N_STATES
        self.n_outputs = rules.N_STATES

    def step(self, x, h):
        if self.gain is None:
            u = np.zeros(x.shape[:-1] + (rules.N_INPUTS,))
        else:
            u = plant.saturate(self.params, baseline_policy(self.gain, x))
        return plant.step_rk4(self.params, x, u, h)

    def outputs(self, x):
        return x


class LinearProbe(object):
    """dx/dt = A x, y = C x"""

    def __init__(self, A, C):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.C = np.atleast_2d(np.asarray(C, dtype=float))
        self.n_states = self.A.shape[0]
        self.n_outputs = self.C.shape[0]

    def step(self, x, h):
        return plant.rk4_step(lambda z: z @ self.A.T, x, h)

    def outputs(self, x):
        return x @ self.C.T


def probe_system(system, cfg, baseline=None):
    if not isinstance(system, PlantParams):
        return system
    if cfg.probe_policy == CLOSED_LOOP:
        if baseline is None:
            raise InvalidInputError('Closed-loop probes need a baseline gain')
        return PlantProbe(system, baseline)
    return PlantProbe(system)


def channel_gramians(system, cfg):
    """
    Per-output-channel Gramian contributions, summed over base points

    :param system: probe system (PlantProbe, LinearProbe)
    :param cfg: GramianConfig
    :return: array (n_outputs, n_states, n_states)
    """
    n = system.n_states
    eps = cfg.epsilon
    base = np.stack(cfg.base_points)
    if base.shape[1] != n:
        raise InvalidInputError('Base points have {0} components, system has {1}'.format(base.shape[1], n))
    n_base = base.shape[0]

    # rows ordered (base point, direction, sign)
    offsets = np.stack([eps * np.eye(n), -eps * np.eye(n)], axis=1)
    x = (base[:, None, None, :] + offsets[None, :, :, :]).reshape(-1, n)

    h = cfg.step
    n_steps = cfg.n_steps
    G = np.zeros((system.n_outputs, n, n))
    for k in range(n_steps + 1):
        y = system.outputs(x).reshape(n_base, n, 2, system.n_outputs)
        d = y[:, :, 0, :] - y[:, :, 1, :]
        weight = 0.5 * h if k in (0, n_steps) else h
        G += weight * np.einsum('bjc,bkc->cjk', d, d)
        if k == n_steps:
            break
        try:
            x_next = system.step(x, h)
        except DivergenceError:
            x_next = None
        if x_next is None or not np.all(np.isfinite(x_next)):
            raise _locate_divergence(system, x, h, cfg)
        x = x_next
    return G / (4.0 * eps ** 2)


def _locate_divergence(system, x, h, cfg):
    n = system.n_states
    row = 0
    for row in range(x.shape[0]):
        try:
            if not np.all(np.isfinite(system.step(x[row:row + 1], h))):
                break
        except DivergenceError:
            break
    b, rest = divmod(row, 2 * n)
    j, s = divmod(rest, 2)
    return DivergenceError(
        'Probe rollout diverged: direction {0}, sign {1}, base point {2} ({3})'.format(
            j + 1, '+' if s == 0 else '-', b, cfg.base_points[b].tolist()),
        state=x[row])


def combine(G, sensors):
    """
    Gramian of a sensor subset from per-channel contributions

    :param G: array (n_outputs, n, n)
    :param sensors: SensorConfig
    :return: symmetric Gramian (n, n)
    """
    W = np.zeros(G.shape[1:])
    for c in sensors.channels:
        if c >= G.shape[0]:
            raise InvalidInputError('Sensor {0} does not exist in this system'.format(c + 1))
        W = W + G[c]
    return 0.5 * (W + W.T)


def observability_measure(W):
    """
    J = log det W, computed from a Cholesky factor

    :param W: symmetric positive semidefinite matrix
    :return: J
    """
    W = np.asarray(W, dtype=float)
    try:
        L = np.linalg.cholesky(W)
    except np.linalg.LinAlgError:
        raise UnobservableError('Gramian is not positive definite')
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    if not math.isfinite(logdet) or logdet <= math.log(DET_FLOOR):
        raise UnobservableError('Gramian determinant below {0}'.format(DET_FLOOR))
    return logdet


def _result(G, sensors):
    W = combine(G, sensors)
    try:
        J = observability_measure(W)
    except UnobservableError:
        logger.warning('Configuration %s is unobservable', sensors.label)
        J = None
    return GramianResult(W, J, sensors)


def empirical_gramian(system, sensors, cfg, baseline=None):
    """
    :param system: PlantParams, or a probe system exposing step/outputs
    :param sensors: SensorConfig naming the usable outputs
    :param cfg: GramianConfig
    :param baseline: LqrGain, needed for closed-loop plant probes
    :return: GramianResult (J is None when W is singular)
    """
    G = channel_gramians(probe_system(system, cfg, baseline), cfg)
    return _result(G, sensors)


def default_configs():
    """Full configuration followed by the six single-sensor drops"""
    return [SensorConfig.full()] + [SensorConfig.drop(i) for i in rules.SENSORS]


def _rank(G, configs):
    rows = []
    for sensors in configs:
        result = _result(G, sensors)
        if result.J is None:
            status = UNOBSERVABLE
        elif sensors.is_full:
            status = REFERENCE
        else:
            status = OK
        rows.append(RankingRow(sensors, result.J, status))
    observable = sorted((r for r in rows if r.J is not None), key=lambda r: -r.J)
    return observable + [r for r in rows if r.J is None]


def rank_configurations(system, configs, cfg, baseline=None, G=None):
    """
    Ranks sensor configurations by J, all computed on one set of probes

    :param system: PlantParams or probe system
    :param configs: list of SensorConfig
    :param cfg: GramianConfig
    :param baseline: LqrGain
    :param G: precomputed channel Gramians, optional
    :return: list of RankingRow, descending J, unobservable rows last
    """
    if G is None:
        G = channel_gramians(probe_system(system, cfg, baseline), cfg)
    return _rank(G, configs)


def best_subsets(system, k, cfg, baseline=None, G=None):
    """
    Ranks every configuration with exactly k sensors

    :return: list of RankingRow, best first
    """
    if G is None:
        G = channel_gramians(probe_system(system, cfg, baseline), cfg)
    configs = [SensorConfig(frozenset(c)) for c in itertools.combinations(rules.SENSORS, k)]
    return _rank(G, configs)


def config_from_section(section, seed):
    """
    :param section: gramian section of the run configuration
    :param seed: global seed
    :return: GramianConfig with base points drawn from the initial-condition box
    """
    rng = stream_rng(seed, 'gramian')
    base_points = plant.sample_states(rng, section['n_base_points'])
    return GramianConfig(epsilon=section['epsilon'], horizon=section['horizon'],
                         step=section['step'], base_points=tuple(base_points),
                         probe_policy=section['probe_policy'])
