"""
Training data: closed-loop trajectories of the baseline controller,
augmented with copies carrying one synthetic abrupt sensor fault each, split
by parent trajectory and cut into fixed-length measurement windows.
"""
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from adsputils import setup_logging

from dftc import plant, reader, rules, writer
from dftc.baseline import simulate_closed_loop
from dftc.exceptions import (ConfigError, DivergenceError, InvalidInputError,
                             ParseError)
from dftc.models import FaultSpec, Normalizer, Trajectory
from dftc.utils import fmt, fmt_optional, stream_rng

logger = setup_logging(__name__)


@dataclass(eq=False)
class Dataset:
    trajectories: List[Trajectory] = field(default_factory=list)
    split_assignment: Dict[str, str] = field(default_factory=dict)
    normalizer: Optional[Normalizer] = None
    excluded: int = 0

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.trajectories == other.trajectories
                and self.split_assignment == other.split_assignment
                and self.normalizer == other.normalizer)

    __hash__ = None

    def __len__(self):
        return len(self.trajectories)

    def subset(self, split):
        return [t for t in self.trajectories if self.split_assignment.get(t.id) == split]

    def originals(self):
        return [t for t in self.trajectories if t.fault is None and not t.is_augmented]

    def counts(self):
        counts = OrderedDict((s, 0) for s in (rules.TRAIN_SPLIT, rules.VAL_SPLIT, rules.TEST_SPLIT))
        for split in self.split_assignment.values():
            counts[split] += 1
        return counts


@dataclass(frozen=True)
class SampleWindow:
    window: np.ndarray
    target: np.ndarray


@dataclass(frozen=True)
class AugmentationConfig:
    copies_per_trajectory: int = 2
    fault_window: Tuple[float, float] = (0.3, 2.0)
    seed: int = 0

    def __post_init__(self):
        if self.copies_per_trajectory < 0:
            raise ConfigError('copies_per_trajectory must be non-negative')
        lo, hi = self.fault_window
        if not 0 <= lo <= hi:
            raise ConfigError('Fault window must satisfy 0 <= start <= end, got {0}'.format(self.fault_window))


def rollout_baseline(params, gain, x0, traj_id, duration=4.0, h=0.01):
    """
    One fault-free closed-loop trajectory of the baseline controller

    :return: Trajectory whose measurements equal its states
    """
    n_steps = int(round(duration / h))
    states, inputs = simulate_closed_loop(params, gain, x0, n_steps, h)
    return Trajectory(id=str(traj_id), h=h, states=states, inputs=inputs,
                      measurements=states.copy())


def generate_trajectories(params, gain, n_traj, seed, duration=4.0, h=0.01):
    """
    Rolls out the baseline from initial conditions drawn uniformly from the
    initial-condition box. Diverging rollouts are excluded and counted.

    :param params: PlantParams
    :param gain: LqrGain
    :param n_traj: number of initial conditions
    :param seed: global seed
    :return: Dataset without split assignment
    """
    ds = Dataset()
    for i in range(n_traj):
        rng = stream_rng(seed, 'gen', i)
        x0 = plant.sample_states(rng, 1)[0]
        try:
            ds.trajectories.append(rollout_baseline(params, gain, x0, i, duration, h))
        except DivergenceError as err:
            ds.excluded += 1
            logger.warning('Trajectory %s from %s diverged and is excluded: %s', i, x0.tolist(), err)
        if (i + 1) % 100 == 0:
            logger.info('Generated %s/%s trajectories', i + 1, n_traj)
    logger.info('Generated %s trajectories, %s excluded', len(ds.trajectories), ds.excluded)
    return ds


def sample_fault(rng, times, fault_window):
    """
    Draws one fault: sensor uniform over 1..6, fault time uniform over the
    sample grid inside the window, mode by sensor kind

    :param rng: numpy Generator
    :param times: sample times of the trajectory
    :param fault_window: (start, end) in seconds
    :return: FaultSpec
    """
    lo, hi = fault_window
    candidates = np.flatnonzero((times >= lo - 1e-9) & (times <= hi + 1e-9))
    if candidates.size == 0:
        raise ConfigError('Fault window {0} holds no sample time'.format(fault_window))
    sensor = int(rng.integers(1, rules.N_STATES + 1))
    k_f = int(candidates[rng.integers(candidates.size)])
    modes = rules.AUGMENT_FAULT_MODES[rules.SENSOR_KIND[sensor]]
    mode = modes[int(rng.integers(len(modes)))]
    value = None
    if mode == rules.CONSTANT:
        value = float(rng.uniform(*rules.POSITION_CONSTANT_RANGE))
    return FaultSpec(sensor, mode, float(times[k_f]), value)


def inject(traj, spec, traj_id):
    """
    Copy of a fault-free trajectory whose measurements carry the fault

    :return: Trajectory
    """
    return Trajectory(id=traj_id, h=traj.h, states=traj.states, inputs=traj.inputs,
                      measurements=plant.apply_fault_series(traj.measurements, traj.times, spec),
                      fault=spec, times=traj.times)


def augment(ds, cfg):
    """
    Appends cfg.copies_per_trajectory faulted copies of every trajectory.
    States and inputs are shared with the parent, so the imitation target
    stays the fault-free baseline action.

    :param ds: Dataset of fault-free trajectories
    :param cfg: AugmentationConfig
    :return: new Dataset
    """
    lo, hi = cfg.fault_window
    for traj in ds.trajectories:
        if traj.fault is not None or traj.is_augmented:
            raise InvalidInputError('Trajectory {0} is already augmented'.format(traj.id))
        last = traj.times[-1]
        if hi > last + 1e-9:
            raise ConfigError('Fault window {0} exceeds trajectory {1} ending at {2} s'.format(cfg.fault_window, traj.id, last))

    augmented = []
    for i, traj in enumerate(ds.trajectories):
        rng = stream_rng(cfg.seed, 'augment', i)
        for c in range(1, cfg.copies_per_trajectory + 1):
            spec = sample_fault(rng, traj.times, (lo, hi))
            augmented.append(inject(traj, spec, '{0}:{1}'.format(traj.id, c)))
    logger.info('Augmented %s trajectories with %s faulted copies', len(ds.trajectories), len(augmented))
    return Dataset(list(ds.trajectories) + augmented, dict(ds.split_assignment), ds.normalizer, ds.excluded)


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def split(ds, seed):
    """
    Assigns train/val/test by parent trajectory (80/10/10 of the parents),
    so an augmented copy always follows its parent. The normalizer is fitted
    on training measurements.

    :param ds: Dataset
    :param seed: global seed
    :return: new Dataset with split_assignment and normalizer
    """
    if len(ds.trajectories) < 10:
        raise ConfigError('Need at least 10 trajectories to split, got {0}'.format(len(ds.trajectories)))
    parents = list(OrderedDict.fromkeys(t.parent_id for t in ds.trajectories))
    order = stream_rng(seed, 'split').permutation(len(parents))
    n_train = _round_half_up(rules.SPLIT_FRACTIONS[rules.TRAIN_SPLIT] * len(parents))
    n_val = _round_half_up(rules.SPLIT_FRACTIONS[rules.VAL_SPLIT] * len(parents))

    parent_split = {}
    for rank, p in enumerate(order):
        if rank < n_train:
            parent_split[parents[p]] = rules.TRAIN_SPLIT
        elif rank < n_train + n_val:
            parent_split[parents[p]] = rules.VAL_SPLIT
        else:
            parent_split[parents[p]] = rules.TEST_SPLIT

    assignment = dict((t.id, parent_split[t.parent_id]) for t in ds.trajectories)
    result = Dataset(list(ds.trajectories), assignment, None, ds.excluded)
    result.normalizer = fit_normalizer(result)
    logger.info('Split %s trajectories: %s', len(ds.trajectories), dict(result.counts()))
    return result


def fit_normalizer(ds):
    train = ds.subset(rules.TRAIN_SPLIT)
    if not train:
        return Normalizer.identity()
    return Normalizer.fit(np.concatenate([t.measurements for t in train]))


def window_samples(traj, m=10):
    """
    :param traj: Trajectory
    :param m: window length in samples
    :return: list of SampleWindow, one per step k >= m - 1
    """
    if m < 1 or traj.length < m:
        raise InvalidInputError('Trajectory {0} has {1} samples, window needs {2}'.format(traj.id, traj.length, m))
    return [SampleWindow(traj.measurements[k - m + 1:k + 1], traj.inputs[k])
            for k in range(m - 1, traj.length)]


class WindowSet(object):
    """
    All windows of a list of trajectories, gathered on demand by index so
    the full window tensor is never materialised.
    """

    def __init__(self, trajectories, m=10, last_row_only=False):
        """
        :param trajectories: list of Trajectory
        :param m: window length
        :param last_row_only: yield (n, 1, 6) windows holding just the final row
        """
        self.m = m
        self.last_row_only = last_row_only
        if trajectories:
            self.measurements = np.concatenate([t.measurements for t in trajectories])
            self.inputs = np.concatenate([t.inputs for t in trajectories])
        else:
            self.measurements = np.zeros((0, rules.N_STATES))
            self.inputs = np.zeros((0, rules.N_INPUTS))
        ends = []
        offset = 0
        for t in trajectories:
            if t.length < m:
                raise InvalidInputError('Trajectory {0} is shorter than the window'.format(t.id))
            ends.append(np.arange(offset + m - 1, offset + t.length))
            offset += t.length
        self.ends = np.concatenate(ends) if ends else np.zeros(0, dtype=int)

    def __len__(self):
        return self.ends.size

    def batch(self, indices):
        """
        :param indices: window numbers
        :return: (windows (b, m, 6), targets (b, 2))
        """
        ends = self.ends[indices]
        if self.last_row_only:
            rows = ends[:, None]
        else:
            rows = ends[:, None] + np.arange(-self.m + 1, 1)[None, :]
        return self.measurements[rows], self.inputs[ends]


def _fault_cells(spec):
    if spec is None:
        return ['', '', '', '']
    return [str(spec.sensor_index), spec.mode, fmt_optional(spec.value), fmt(spec.fault_time)]


def save_dataset(ds, path):
    """
    Writes the dataset as one CSV table, one row per trajectory sample

    :param ds: Dataset
    :param path: output file
    :return: no return
    """
    lines = [','.join(rules.DATASET_COLUMNS)]
    for traj in ds.trajectories:
        tail = ','.join(_fault_cells(traj.fault) + [ds.split_assignment.get(traj.id, '')])
        for k in range(traj.length):
            cells = [traj.id, str(k), fmt(traj.times[k])]
            cells += [fmt(v) for v in traj.states[k]]
            cells += [fmt(v) for v in traj.inputs[k]]
            cells += [fmt(v) for v in traj.measurements[k]]
            lines.append(','.join(cells) + ',' + tail)
    writer.write_file(path, '\n'.join(lines) + '\n', json_format=False)
    logger.info('Saved %s trajectories to %s', len(ds.trajectories), path)


def _parse_fault(row, path, line_number):
    sensor, mode, value, fault_time = row[-5:-1]
    if not sensor:
        return None
    try:
        return FaultSpec(reader.parse_int(sensor, path, line_number, 'fault_sensor'), mode,
                         reader.parse_float(fault_time, path, line_number, 'fault_time'),
                         reader.parse_float(value, path, line_number, 'fault_value') if value else None)
    except InvalidInputError as err:
        raise ParseError('{0}, line {1}: {2}'.format(path, line_number, err))


def load_dataset(path, h=None):
    """
    Reads a dataset written by save_dataset

    :param path: input file
    :param h: sampling interval for single-sample trajectories
    :return: Dataset (normalizer refitted from the training split)
    """
    rows = reader.read_csv(path, rules.DATASET_COLUMNS)
    grouped = OrderedDict()
    for line_number, row in rows:
        grouped.setdefault(row[0], []).append((line_number, row))

    ds = Dataset()
    for traj_id, traj_rows in grouped.items():
        values = []
        for expected_step, (line_number, row) in enumerate(traj_rows):
            step = reader.parse_int(row[1], path, line_number, 'step')
            if step != expected_step:
                raise ParseError('{0}, line {1}: expected step {2}, got {3}'.format(
                    path, line_number, expected_step, step))
            values.append([reader.parse_float(v, path, line_number, rules.DATASET_COLUMNS[c + 2])
                           for c, v in enumerate(row[2:17])])
        first_line, first_row = traj_rows[0]
        split_name = first_row[-1]
        if split_name and split_name not in rules.SPLIT_FRACTIONS:
            raise ParseError('{0}, line {1}: unknown split {2!r}'.format(path, first_line, split_name))
        values = np.array(values)
        times = values[:, 0]
        step_h = times[1] - times[0] if len(times) > 1 else (h or 0.01)
        ds.trajectories.append(Trajectory(
            id=traj_id, h=float(step_h), states=values[:, 1:7], inputs=values[:, 7:9],
            measurements=values[:, 9:15], fault=_parse_fault(first_row, path, first_line), times=times))
        if split_name:
            ds.split_assignment[traj_id] = split_name
    if ds.split_assignment:
        ds.normalizer = fit_normalizer(ds)
    logger.info('Loaded %s trajectories from %s', len(ds.trajectories), path)
    return ds
