"""
Closed-loop evaluation: every controller is rolled out from the same sampled
initial conditions, once without and once with a single abrupt sensor fault,
and its quadratic cost is normalised by the fault-free baseline cost from
the same start.
"""
import os
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from adsputils import setup_logging

from dftc import plant, rules, writer
from dftc.baseline import trajectory_cost
from dftc.dataset import sample_fault
from dftc.exceptions import ConfigError, DivergenceError, InvalidInputError, NumericError
from dftc.models import FaultSpec, Trajectory
from dftc.utils import fmt, fmt_optional, stream_rng

logger = setup_logging(__name__)


@dataclass(frozen=True)
class EvalConfig:
    n_scenarios: int = 100
    duration: float = 4.0
    h: float = 0.01
    fault_mix: str = 'augment'
    controllers: tuple = ('baseline', 'dftc', 'fnn')
    sensor_range: tuple = (np.pi / 2, np.pi / 2, 20.0, 20.0, 400.0, 400.0)
    settle_tol: float = 0.05
    settle_hold: float = 0.5
    divergence_bound: float = 1e6
    max_diverged_fraction: float = 1.0
    timing_calls: int = 1000
    fault_window: tuple = (0.3, 2.0)
    noise_std: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'controllers', tuple(self.controllers))
        object.__setattr__(self, 'sensor_range', tuple(float(v) for v in self.sensor_range))
        object.__setattr__(self, 'fault_window', tuple(float(v) for v in self.fault_window))
        if self.fault_mix not in rules.FAULT_MIXES:
            raise ConfigError('fault_mix must be one of {0}, got {1!r}'.format(rules.FAULT_MIXES, self.fault_mix))
        unknown = set(self.controllers) - set(rules.CONTROLLERS)
        if unknown:
            raise ConfigError('Unknown controllers in eval.controllers: {0}'.format(sorted(unknown)))
        if 'baseline' not in self.controllers:
            raise ConfigError('eval.controllers must include the baseline')
        if len(self.controllers) != len(set(self.controllers)):
            raise ConfigError('eval.controllers lists a controller twice')
        if len(self.sensor_range) != rules.N_STATES:
            raise ConfigError('eval.sensor_range needs 6 entries')
        if self.n_scenarios < 0 or self.timing_calls < 1:
            raise ConfigError('n_scenarios must be >= 0 and timing_calls >= 1')
        if not (self.h > 0 and self.duration >= self.h):
            raise ConfigError('Evaluation needs h > 0 and duration >= h')
        if len(self.fault_window) != 2:
            raise ConfigError('Fault window needs two entries, got {0}'.format(self.fault_window))
        if self.fault_mix != 'none' and not 0 <= self.fault_window[0] <= self.fault_window[1] <= self.duration:
            raise ConfigError('Fault window {0} is not inside the run'.format(self.fault_window))

    @classmethod
    def from_sections(cls, section, augment_section, noise_std=0.0):
        return cls(n_scenarios=section['n_scenarios'], duration=section['duration'], h=section['h'],
                   fault_mix=section['fault_mix'], controllers=section['controllers'],
                   sensor_range=section['sensor_range'], settle_tol=section['settle_tol'],
                   settle_hold=section['settle_hold'], divergence_bound=section['divergence_bound'],
                   max_diverged_fraction=section['max_diverged_fraction'],
                   timing_calls=section['timing_calls'], fault_window=augment_section['fault_window'],
                   noise_std=noise_std)

    @property
    def n_steps(self):
        return int(round(self.duration / self.h))

    @property
    def conditions(self):
        if self.fault_mix == 'none':
            return (rules.NO_FAULT,)
        return rules.CONDITIONS


@dataclass(frozen=True)
class Scenario:
    id: int
    initial_condition: np.ndarray
    fault: Optional[FaultSpec] = None
    duration: float = 4.0
    h: float = 0.01
    seed: int = 0

    @property
    def n_steps(self):
        return int(round(self.duration / self.h))

    def without_fault(self):
        return Scenario(self.id, self.initial_condition, None, self.duration, self.h, self.seed)


@dataclass
class Rollout:
    trajectory: Trajectory
    J: Optional[float]
    diverged: bool
    features: Optional[np.ndarray] = None


@dataclass(frozen=True)
class RunRow:
    controller: str
    scenario: int
    condition: str
    fault: Optional[FaultSpec]
    J: Optional[float]
    rho: Optional[float]
    settled: bool
    diverged: bool
    max_abs_dphi: float

    def toCSV(self):
        fault = self.fault
        return [
            self.controller, str(self.scenario), self.condition,
            str(fault.sensor_index) if fault else '', fault.mode if fault else '',
            fmt(fault.fault_time) if fault else '',
            fmt_optional(self.J), fmt_optional(self.rho),
            'true' if self.settled else 'false', 'true' if self.diverged else 'false',
            fmt(self.max_abs_dphi),
        ]


@dataclass
class EvalReport:
    controllers: List[str]
    conditions: List[str]
    rows: List[RunRow] = field(default_factory=list)
    rollouts: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    n_scenarios: int = 0
    fault_mix: str = 'augment'
    seed: int = 0

    def select(self, controller, condition):
        return [r for r in self.rows if r.controller == controller and r.condition == condition]

    def diverged_fraction(self, controller):
        rows = [r for r in self.rows if r.controller == controller]
        return sum(r.diverged for r in rows) / float(len(rows)) if rows else 0.0


def make_scenarios(cfg, seed):
    """
    Draws initial conditions from the initial-condition box and one fault per
    scenario according to cfg.fault_mix

    :param cfg: EvalConfig
    :param seed: global seed ('eval' stream)
    :return: list of Scenario
    """
    times = np.arange(cfg.n_steps) * cfg.h
    scenarios = []
    for i in range(cfg.n_scenarios):
        rng = stream_rng(seed, 'eval', i)
        x0 = plant.sample_states(rng, 1)[0]
        fault = None
        if cfg.fault_mix == 'augment':
            fault = sample_fault(rng, times, cfg.fault_window)
        elif cfg.fault_mix == 'max_range':
            spec = sample_fault(rng, times, cfg.fault_window)
            fault = FaultSpec(spec.sensor_index, rules.CONSTANT, spec.fault_time,
                              cfg.sensor_range[spec.channel])
        scenarios.append(Scenario(i, x0, fault, cfg.duration, cfg.h, seed))
    return scenarios


def rollout(params, controller, scenario, w, noise_std=0.0, divergence_bound=1e6):
    """
    measure -> fault -> act -> integrate, for the scenario's duration

    :param params: PlantParams
    :param controller: object with act/reset
    :param scenario: Scenario
    :param w: CostWeights for J
    :param noise_std: sensor noise; the noise stream depends only on the scenario
    :param divergence_bound: largest admissible |x| entry
    :return: Rollout (J is None when the run diverged)
    """
    controller.reset()
    spec = None if getattr(controller, 'fault_free', False) else scenario.fault
    record = bool(getattr(controller, 'record_features', False))
    rng = stream_rng(scenario.seed, 'noise', scenario.id) if np.any(np.asarray(noise_std) > 0) else None
    n, h = scenario.n_steps, scenario.h

    states = np.empty((n, rules.N_STATES))
    inputs = np.empty((n, rules.N_INPUTS))
    measurements = np.empty((n, rules.N_STATES))
    features = [] if record else None
    x = np.asarray(scenario.initial_condition, dtype=float)
    previous = None
    history = None
    diverged = False
    recorded = 0
    try:
        for k in range(n):
            t = k * h
            y = plant.measure(x, noise_std, rng)
            if spec is not None and t >= spec.fault_time and history is None:
                history = (previous if previous is not None else y)[spec.channel]
            y_seen = plant.apply_fault(y, history, spec, t)
            u = plant.saturate(params, controller.act(y_seen))
            states[k], inputs[k], measurements[k] = x, u, y_seen
            if record:
                features.append(controller.last_features)
            recorded = k + 1
            previous = y
            if k + 1 < n:
                x = plant.step_rk4(params, x, u, h)
                if np.max(np.abs(x)) > divergence_bound:
                    raise DivergenceError('State left the divergence bound', state=x)
    except (DivergenceError, NumericError) as err:
        diverged = True
        logger.debug('Scenario %s with %s diverged after %s steps: %s', scenario.id,
                     getattr(controller, 'name', controller), recorded, err)

    k = recorded
    traj = Trajectory(id=str(scenario.id), h=h, states=states[:k], inputs=inputs[:k],
                      measurements=measurements[:k], fault=spec, times=np.arange(k) * h)
    J = None if diverged else trajectory_cost(traj, w)
    return Rollout(traj, J, diverged, np.array(features) if record else None)


def settling_check(traj, tol_theta=0.05, hold=0.5):
    """
    :return: True iff |theta1| and |theta2| stay within tol_theta over the
        final ``hold`` seconds
    """
    if traj.length == 0:
        return False
    n_hold = max(1, int(round(hold / traj.h)))
    tail = traj.states[-n_hold:, 0:2]
    return bool(np.all(np.abs(tail) <= tol_theta))


def normalized_cost(J, J_base):
    if J is None or J_base is None:
        return None
    if J_base == 0:
        return 1.0 if J == 0 else None
    return J / J_base


def run_suite(params, controllers, cfg, seed, w, scenarios=None):
    """
    Runs every scenario without and with its fault for every controller

    :param params: PlantParams
    :param controllers: OrderedDict name -> controller; must hold 'baseline'
    :param cfg: EvalConfig
    :param seed: global seed
    :param w: CostWeights
    :param scenarios: optional pre-built scenarios
    :return: EvalReport
    """
    if 'baseline' not in controllers:
        raise InvalidInputError('The suite needs the baseline controller to normalise costs')
    scenarios = make_scenarios(cfg, seed) if scenarios is None else scenarios
    report = EvalReport(list(controllers), list(cfg.conditions), n_scenarios=len(scenarios),
                        fault_mix=cfg.fault_mix, seed=seed)

    for scenario in scenarios:
        base = rollout(params, controllers['baseline'], scenario.without_fault(), w,
                       cfg.noise_std, cfg.divergence_bound)
        if base.diverged:
            logger.warning('Baseline diverged in scenario %s; its rows have no normalised cost', scenario.id)
        for name, controller in controllers.items():
            for condition in cfg.conditions:
                run = scenario if condition == rules.FAULT else scenario.without_fault()
                if name == 'baseline':
                    result = base
                else:
                    result = rollout(params, controller, run, w, cfg.noise_std, cfg.divergence_bound)
                traj = result.trajectory
                report.rows.append(RunRow(
                    controller=name, scenario=scenario.id, condition=condition,
                    fault=run.fault, J=result.J, rho=normalized_cost(result.J, base.J),
                    settled=not result.diverged and settling_check(traj, cfg.settle_tol, cfg.settle_hold),
                    diverged=result.diverged,
                    max_abs_dphi=float(np.max(np.abs(traj.states[:, 4:6]))) if traj.length else 0.0))
                report.rollouts[(name, scenario.id, condition)] = result
        if (scenario.id + 1) % 10 == 0:
            logger.info('Evaluated %s/%s scenarios', scenario.id + 1, len(scenarios))
    return report


def _stats(values):
    if not values:
        return None, None
    a = np.array(values, dtype=float)
    return float(np.mean(a)), float(np.std(a))


def aggregate(rows):
    """
    :param rows: RunRow list of one group
    :return: dict with n, excluded, mean_rho, std_rho, settled_fraction
    """
    rhos = [r.rho for r in rows if not r.diverged and r.rho is not None]
    mean, std = _stats(rhos)
    return OrderedDict([
        ('n', len(rows)),
        ('excluded', len(rows) - len(rhos)),
        ('mean_rho', mean),
        ('std_rho', std),
        ('settled_fraction', (sum(r.settled for r in rows) / float(len(rows))) if rows else None),
    ])


def summarize(report):
    """
    Aggregates per controller x condition, and per faulty sensor kind for
    the fault condition

    :return: JSON-serialisable dict
    """
    keys = ('n', 'excluded', 'mean_rho', 'std_rho', 'settled_fraction')
    summary = OrderedDict([
        ('controllers', report.controllers),
        ('conditions', report.conditions),
        ('fault_mix', report.fault_mix),
        ('n_scenarios', report.n_scenarios),
        ('seed', report.seed),
    ])
    for key in keys:
        summary[key] = OrderedDict((c, OrderedDict()) for c in report.controllers)
    for controller in report.controllers:
        for condition in report.conditions:
            stats = aggregate(report.select(controller, condition))
            for key in keys:
                summary[key][controller][condition] = stats[key]

    by_kind = OrderedDict()
    kinds = list(OrderedDict.fromkeys(rules.SENSOR_KIND[s] for s in rules.SENSORS))
    for controller in report.controllers:
        rows = report.select(controller, rules.FAULT)
        by_kind[controller] = OrderedDict(
            (kind, aggregate([r for r in rows if r.fault is not None and r.fault.sensor_kind == kind]))
            for kind in kinds)
    summary['by_sensor_kind'] = by_kind if rules.FAULT in report.conditions else OrderedDict()
    return summary


def timing_stats(controller, measurements, n_calls=1000):
    """
    Wall-clock latency of controller.act on recorded readings, after one
    warm-up call

    :param measurements: (n, 6) readings, cycled through
    :return: (mean seconds, worst seconds)
    """
    y = np.asarray(measurements, dtype=float)
    if n_calls < 1 or y.shape[0] == 0:
        raise InvalidInputError('Timing needs at least one call and one reading')
    record = getattr(controller, 'record_features', None)
    if record:
        controller.record_features = False
    try:
        controller.reset()
        controller.act(y[0])
        durations = np.empty(n_calls)
        for i in range(n_calls):
            reading = y[i % y.shape[0]]
            start = time.perf_counter()
            controller.act(reading)
            durations[i] = time.perf_counter() - start
    finally:
        if record:
            controller.record_features = record
        controller.reset()
    return float(durations.mean()), float(durations.max())


def time_controllers(report, controllers, n_calls):
    """
    Fills report.timing from the no-fault rollout of the first scenario
    """
    for name, controller in controllers.items():
        result = report.rollouts.get((name, 0, rules.NO_FAULT))
        readings = result.trajectory.measurements if result and result.trajectory.length else np.zeros((1, 6))
        mean, worst = timing_stats(controller, readings, n_calls)
        report.timing[name] = OrderedDict([('mean_s', mean), ('worst_s', worst), ('n_calls', n_calls)])
        logger.info('Inference time of %s: mean %.3g ms, worst %.3g ms', name, mean * 1e3, worst * 1e3)


def trajectory_rows(result):
    traj = result.trajectory
    for k in range(traj.length):
        row = [fmt(traj.times[k])]
        row += [fmt(v) for v in traj.states[k]]
        row += [fmt(v) for v in traj.inputs[k]]
        row += [fmt(v) for v in traj.measurements[k]]
        if result.features is not None:
            row += [fmt(v) for v in result.features[k]]
        yield row


def feature_columns(hidden):
    return ['f{0}_{1}'.format(block, unit) for block in rules.SENSORS for unit in range(hidden)]


def export_report(report, directory, dump_traj=False):
    """
    Writes report.json (aggregates), runs.csv (one row per run), timing.json
    and, with dump_traj, traj_<scenario>_<controller>_<condition>.csv

    :return: list of written file names
    """
    written = []
    report_file = os.path.join(directory, 'report.json')
    writer.write_file(report_file, summarize(report))
    written.append(report_file)

    runs_file = os.path.join(directory, 'runs.csv')
    writer.write_csv(runs_file, rules.RUNS_COLUMNS, [r.toCSV() for r in report.rows])
    written.append(runs_file)

    if report.timing:
        timing_file = os.path.join(directory, 'timing.json')
        writer.write_file(timing_file, report.timing)
        written.append(timing_file)

    if dump_traj:
        for (name, scenario, condition), result in report.rollouts.items():
            header = list(rules.TRAJECTORY_COLUMNS)
            if result.features is not None and result.features.size:
                header += feature_columns(result.features.shape[1] // rules.N_STATES)
            traj_file = os.path.join(directory, 'traj_{0}_{1}_{2}.csv'.format(scenario, name, condition))
            writer.write_csv(traj_file, header, trajectory_rows(result))
            written.append(traj_file)
    logger.info('Wrote %s report files to %s', len(written), directory)
    return written
