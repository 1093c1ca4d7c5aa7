# -*- coding: utf-8 -*-
"""
Value types shared by the pipeline stages. All of them are immutable once
constructed; arrays held by a Trajectory are flagged read-only.
"""
import math
from dataclasses import dataclass, field, fields, asdict
from typing import FrozenSet, Optional, Tuple

import numpy as np

from dftc import rules
from dftc.exceptions import InvalidParamsError, InvalidInputError, ConfigError


@dataclass(frozen=True)
class PlantParams:
    """Physical parameters of the two-axis reaction-wheel pendulum"""
    I_p: float = 0.02
    I_w: float = 5.12e-4
    ml: float = 0.3
    g: float = 9.81
    k_s: float = 5.0
    b_th: float = 0.01
    b_ph: float = 1e-5
    k_T: float = 0.0369
    i_max: float = 5.0
    noise_std: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise InvalidParamsError('Plant parameter {0} is not finite: {1}'.format(f.name, value))
        for name in ('I_p', 'I_w', 'i_max', 'k_T'):
            if getattr(self, name) <= 0:
                raise InvalidParamsError('Plant parameter {0} must be positive'.format(name))
        if self.k_s <= self.ml * self.g:
            raise InvalidParamsError(
                'Spring stiffness k_s={0} must exceed ml*g={1}'.format(self.k_s, self.ml * self.g))
        if self.noise_std < 0:
            raise InvalidParamsError('noise_std must be non-negative')

    @classmethod
    def from_dict(cls, values):
        known = set(f.name for f in fields(cls))
        unknown = set(values) - known
        if unknown:
            raise ConfigError('Unknown plant parameters: {0}'.format(sorted(unknown)))
        return cls(**{k: float(v) for k, v in values.items()})

    @property
    def torque_limit(self):
        return self.k_T * self.i_max

    def toJSON(self):
        return asdict(self)


@dataclass(frozen=True)
class PlantState:
    theta1: float = 0.0
    theta2: float = 0.0
    dtheta1: float = 0.0
    dtheta2: float = 0.0
    dphi1: float = 0.0
    dphi2: float = 0.0

    @classmethod
    def from_array(cls, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (rules.N_STATES,):
            raise InvalidInputError('Expected a state of shape (6,), got {0}'.format(x.shape))
        if not np.all(np.isfinite(x)):
            raise InvalidInputError('State is not finite: {0}'.format(x))
        return cls(*[float(v) for v in x])

    def as_array(self):
        return np.array([self.theta1, self.theta2, self.dtheta1,
                         self.dtheta2, self.dphi1, self.dphi2])

    def __array__(self, dtype=None, copy=None):
        return self.as_array() if dtype is None else self.as_array().astype(dtype)


@dataclass(frozen=True)
class ControlInput:
    i1: float = 0.0
    i2: float = 0.0

    def as_array(self):
        return np.array([self.i1, self.i2])

    def __array__(self, dtype=None, copy=None):
        return self.as_array() if dtype is None else self.as_array().astype(dtype)


@dataclass(frozen=True)
class SensorConfig:
    """Set of sensors (1-based indices) whose readings are usable"""
    active: FrozenSet[int]

    def __post_init__(self):
        active = frozenset(int(i) for i in self.active)
        if not active:
            raise InvalidInputError('A sensor configuration needs at least one sensor')
        if not active <= set(rules.SENSORS):
            raise InvalidInputError('Sensor indices must lie in 1..6, got {0}'.format(sorted(active)))
        object.__setattr__(self, 'active', active)

    @classmethod
    def full(cls):
        return cls(frozenset(rules.SENSORS))

    @classmethod
    def drop(cls, sensor):
        return cls(frozenset(rules.SENSORS) - {sensor})

    @property
    def channels(self):
        """0-based channel indices in ascending order"""
        return [i - 1 for i in sorted(self.active)]

    @property
    def is_full(self):
        return self.active == frozenset(rules.SENSORS)

    @property
    def label(self):
        if self.is_full:
            return 'full'
        missing = sorted(set(rules.SENSORS) - self.active)
        if len(missing) == 1:
            return 'drop_{0}'.format(missing[0])
        return 'k{0}:{1}'.format(len(self.active), '-'.join(str(i) for i in sorted(self.active)))

    def describe(self):
        return ' '.join(str(i) for i in sorted(self.active))


@dataclass(frozen=True)
class FaultSpec:
    """
    A single abrupt sensor fault: from ``fault_time`` on, sensor
    ``sensor_index`` holds its last reading, reads zero, or reads ``value``.
    """
    sensor_index: int
    mode: str
    fault_time: float
    value: Optional[float] = None

    def __post_init__(self):
        if self.sensor_index not in rules.SENSORS:
            raise InvalidInputError('Fault sensor index must lie in 1..6, got {0}'.format(self.sensor_index))
        if self.mode not in rules.FAULT_MODES:
            raise InvalidInputError('Unknown fault mode: {0}'.format(self.mode))
        if not (self.fault_time >= 0 and math.isfinite(self.fault_time)):
            raise InvalidInputError('Fault time must be finite and non-negative, got {0}'.format(self.fault_time))
        if self.mode == rules.CONSTANT:
            if self.value is None or not math.isfinite(self.value):
                raise InvalidInputError('Constant fault needs a finite value')

    @property
    def channel(self):
        return self.sensor_index - 1

    @property
    def sensor_kind(self):
        return rules.SENSOR_KIND[self.sensor_index]

    def toJSON(self):
        return asdict(self)


@dataclass(frozen=True)
class CostWeights:
    Q: Tuple[float, ...] = (5e4, 5e4, 5e2, 1e2, 1e-2, 1e-2)
    R: Tuple[float, ...] = (1e-5, 1e-5)

    def __post_init__(self):
        object.__setattr__(self, 'Q', tuple(float(q) for q in self.Q))
        object.__setattr__(self, 'R', tuple(float(r) for r in self.R))
        if len(self.Q) != rules.N_STATES or len(self.R) != rules.N_INPUTS:
            raise InvalidParamsError('Cost weights need 6 state and 2 input entries')
        if any(q < 0 for q in self.Q):
            raise InvalidParamsError('State weights must be non-negative')
        if any(r <= 0 for r in self.R):
            raise InvalidParamsError('Input weights must be positive')

    @property
    def Q_matrix(self):
        return np.diag(self.Q)

    @property
    def R_matrix(self):
        return np.diag(self.R)

    def scaled(self, c):
        return CostWeights(tuple(c * q for q in self.Q), tuple(c * r for r in self.R))


def _frozen(a, shape_tail):
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[1] != shape_tail:
        raise InvalidInputError('Expected an array of shape (n, {0}), got {1}'.format(shape_tail, a.shape))
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Closed-loop record sampled every ``h`` seconds. ``measurements`` are the
    sensor readings the controller saw, i.e. after fault injection.
    """
    id: str
    h: float
    states: np.ndarray
    inputs: np.ndarray
    measurements: np.ndarray
    fault: Optional[FaultSpec] = None
    times: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, 'id', str(self.id))
        object.__setattr__(self, 'states', _frozen(self.states, rules.N_STATES))
        object.__setattr__(self, 'inputs', _frozen(self.inputs, rules.N_INPUTS))
        object.__setattr__(self, 'measurements', _frozen(self.measurements, rules.N_STATES))
        n = self.states.shape[0]
        if self.inputs.shape[0] != n or self.measurements.shape[0] != n:
            raise InvalidInputError('Trajectory {0}: states, inputs and measurements lengths differ'.format(self.id))
        if self.times is None:
            times = np.arange(n) * self.h
        else:
            times = np.array(self.times, dtype=float)
            if times.shape != (n,):
                raise InvalidInputError('Trajectory {0}: times has the wrong length'.format(self.id))
        times.setflags(write=False)
        object.__setattr__(self, 'times', times)

    @property
    def length(self):
        return self.states.shape[0]

    @property
    def parent_id(self):
        return self.id.split(':')[0]

    @property
    def is_augmented(self):
        return ':' in self.id

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.id == other.id and self.h == other.h and self.fault == other.fault
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.states, other.states)
                and np.array_equal(self.inputs, other.inputs)
                and np.array_equal(self.measurements, other.measurements))

    def __ne__(self, other):
        result = self.__eq__(other)
        return result if result is NotImplemented else not result

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Normalizer:
    """Per-channel mean and standard deviation of sensor readings"""
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        std = np.array(self.std, dtype=float)
        if mean.shape != (rules.N_STATES,) or std.shape != (rules.N_STATES,):
            raise InvalidInputError('Normalizer needs 6 means and 6 standard deviations')
        if not np.all(std > 0):
            raise InvalidInputError('Normalizer standard deviations must be positive')
        mean.setflags(write=False)
        std.setflags(write=False)
        object.__setattr__(self, 'mean', mean)
        object.__setattr__(self, 'std', std)

    @classmethod
    def identity(cls):
        return cls(np.zeros(rules.N_STATES), np.ones(rules.N_STATES))

    @classmethod
    def fit(cls, measurements):
        y = np.asarray(measurements, dtype=float).reshape(-1, rules.N_STATES)
        if y.shape[0] == 0:
            return cls.identity()
        std = y.std(axis=0)
        return cls(y.mean(axis=0), np.where(std > 0, std, 1.0))

    def apply(self, y):
        return (np.asarray(y, dtype=float) - self.mean) / self.std

    def __eq__(self, other):
        if not isinstance(other, Normalizer):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.std, other.std)

    __hash__ = None

    def toJSON(self):
        return {'mean': self.mean.tolist(), 'std': self.std.tolist()}
