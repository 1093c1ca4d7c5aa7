"""
Closed-loop controllers. Every controller maps the current sensor vector to
saturated motor currents through ``act``; ``reset`` returns it to the state
of a freshly built one.
"""
from collections import deque

import numpy as np
from adsputils import setup_logging

from dftc import nn, rules
from dftc.baseline import baseline_policy
from dftc.dataset import Dataset, fit_normalizer
from dftc.exceptions import InvalidInputError, NumericError

logger = setup_logging(__name__)


def _reading(y):
    y = np.asarray(y, dtype=float)
    if y.shape != (rules.N_STATES,):
        raise InvalidInputError('Expected a sensor vector of shape (6,), got {0}'.format(y.shape))
    if not np.all(np.isfinite(y)):
        raise NumericError('Non-finite measurement: {0}'.format(y))
    return y


class BaselineController(object):
    """
    LQR full-state feedback; the sensor vector is taken as the state. The
    evaluation harness never feeds it faulty readings.
    """
    name = 'baseline'
    fault_free = True

    def __init__(self, gain, i_max=None):
        self.gain = gain
        self.i_max = gain.i_max if i_max is None else i_max

    def act(self, y):
        return np.clip(baseline_policy(self.gain, _reading(y)), -self.i_max, self.i_max)

    def reset(self):
        return self


class DftcController(object):
    """
    Recurrent controller over a sliding window of the last m sensor vectors.
    Readings enter raw, faulty or not. Until m readings have arrived the
    window is padded with copies of the first one.
    """
    name = 'dftc'
    fault_free = False

    def __init__(self, model, i_max, record_features=False):
        if model.kind != nn.DFTC:
            raise InvalidInputError('DftcController needs a DFTC model, got {0}'.format(model.kind))
        self.model = model
        self.i_max = i_max
        self.record_features = record_features
        self.buffer = deque(maxlen=model.window)
        self.last_features = None

    def window(self):
        return np.array(self.buffer)

    def act(self, y):
        y = _reading(y)
        if not self.buffer:
            self.buffer.extend([y] * self.model.window)
        else:
            self.buffer.append(y)
        if self.record_features:
            u, features = nn.forward_with_features(self.model, self.window())
            self.last_features = features.reshape(-1)
        else:
            u = nn.model_forward(self.model, self.window())
        return np.clip(u, -self.i_max, self.i_max)

    def reset(self):
        self.buffer.clear()
        self.last_features = None
        return self


class FnnController(object):
    """Fault-naive feedforward controller on the current reading only"""
    name = 'fnn'
    fault_free = False

    def __init__(self, model, i_max):
        if model.kind != nn.FNN:
            raise InvalidInputError('FnnController needs an FNN model, got {0}'.format(model.kind))
        self.model = model
        self.i_max = i_max

    def act(self, y):
        u = nn.model_forward(self.model, _reading(y)[None, :])
        return np.clip(u, -self.i_max, self.i_max)

    def reset(self):
        return self


CONTROLLER_FACTORY = {
    'baseline': BaselineController,
    'dftc': DftcController,
    'fnn': FnnController,
}


def make_controller(name, source, i_max, **kwargs):
    """
    :param name: key of CONTROLLER_FACTORY
    :param source: LqrGain for the baseline, ModelParams otherwise
    :param i_max: current limit
    :return: controller instance
    """
    try:
        ControllerClass = CONTROLLER_FACTORY[name]
    except KeyError:
        raise InvalidInputError('Unknown controller: {0}'.format(name))
    return ControllerClass(source, i_max, **kwargs)


def fault_free_subset(ds):
    """
    The original trajectories of a split dataset with their split labels and
    a normaliser refitted on them

    :param ds: Dataset
    :return: Dataset
    """
    originals = ds.originals()
    subset = Dataset(originals, dict((t.id, ds.split_assignment[t.id]) for t in originals
                                     if t.id in ds.split_assignment))
    subset.normalizer = fit_normalizer(subset)
    return subset


def train_fnn(ds, cfg, i_max, fc_sizes=(64, 64)):
    """
    Fits the FNN to (reading, baseline current) pairs of the fault-free
    trajectories, with the same loss and optimiser as the DFTC network

    :param ds: split Dataset; augmented copies are ignored
    :param cfg: nn.TrainConfig
    :param i_max: current limit of the plant
    :return: (FnnController, learning curve)
    """
    clean = fault_free_subset(ds)
    logger.info('Training FNN on %s fault-free trajectories', len(clean))
    mp = nn.init_model(nn.FNN, cfg.seed, fc_sizes=fc_sizes, normalizer=clean.normalizer)
    mp, curve = nn.train(mp, clean, cfg)
    return FnnController(mp, i_max), curve


def reset(ctrl):
    return ctrl.reset()
