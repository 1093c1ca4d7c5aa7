"""
Recurrent network of the fault tolerant controller, written directly on
numpy: one LSTM block per sensor channel reads that channel's measurement
window, the final hidden states are concatenated and mapped to the two motor
currents by a ReLU fully connected head.

The comparison FNN shares the head and training machinery; it has no LSTM
blocks and reads the normalised current measurement directly.

Parameters are kept as an ordered dict of named arrays. The six LSTM blocks
are stacked on a leading axis so every block advances in one vectorised step:

    lstm_W  (6, 4H, 1)   input weights, gate rows ordered [i, f, g, o]
    lstm_U  (6, 4H, H)   recurrent weights
    lstm_b  (6, 4H)
    fc<k>_W, fc<k>_b     hidden layers of the head
    out_W, out_b         linear output layer
"""
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
from adsputils import setup_logging

from dftc import reader, rules, writer
from dftc.dataset import WindowSet
from dftc.exceptions import (InvalidInputError, NumericError, ParseError,
                             TrainingDivergedError)
from dftc.models import Normalizer
from dftc.utils import fmt, fmt_optional, stream_rng

logger = setup_logging(__name__)

DFTC = 'dftc'
FNN = 'fnn'
KINDS = (DFTC, FNN)
INPUT_DIM = 1


@dataclass(frozen=True)
class LstmParams:
    """A single LSTM block"""
    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    @property
    def hidden(self):
        return self.U.shape[1]


@dataclass(eq=False)
class ModelParams:
    kind: str
    hidden: int
    window: int
    fc_sizes: Tuple[int, ...]
    params: Dict[str, np.ndarray]
    normalizer: Normalizer = field(default_factory=Normalizer.identity)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError('Unknown model kind: {0}'.format(self.kind))
        self.fc_sizes = tuple(int(s) for s in self.fc_sizes)
        expected = param_shapes(self.kind, self.hidden, self.fc_sizes)
        for name, shape in expected.items():
            if name not in self.params:
                raise InvalidInputError('Model is missing parameter {0}'.format(name))
            if np.shape(self.params[name]) != shape:
                raise InvalidInputError('Parameter {0} has shape {1}, expected {2}'.format(
                    name, np.shape(self.params[name]), shape))
        unknown = set(self.params) - set(expected)
        if unknown:
            raise InvalidInputError('Unknown parameters: {0}'.format(sorted(unknown)))
        self.params = OrderedDict((name, np.array(self.params[name], dtype=float)) for name in expected)

    @property
    def param_count(self):
        return int(sum(p.size for p in self.params.values()))

    @property
    def n_layers(self):
        return len(self.fc_sizes)

    def block(self, j):
        """
        :param j: 0-based channel number
        :return: LstmParams of that channel's block
        """
        if self.kind != DFTC:
            raise InvalidInputError('An FNN has no LSTM blocks')
        return LstmParams(self.params['lstm_W'][j], self.params['lstm_U'][j], self.params['lstm_b'][j])

    def copy(self):
        return ModelParams(self.kind, self.hidden, self.window, self.fc_sizes,
                           OrderedDict((k, v.copy()) for k, v in self.params.items()), self.normalizer)

    def with_params(self, params):
        return ModelParams(self.kind, self.hidden, self.window, self.fc_sizes, params, self.normalizer)

    def with_normalizer(self, normalizer):
        return ModelParams(self.kind, self.hidden, self.window, self.fc_sizes, self.params, normalizer)

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return (self.kind == other.kind and self.hidden == other.hidden and self.window == other.window
                and self.fc_sizes == other.fc_sizes and self.normalizer == other.normalizer
                and list(self.params) == list(other.params)
                and all(np.array_equal(self.params[k], other.params[k]) for k in self.params))

    __hash__ = None


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 1024
    lr: float = 1e-3
    lr_drop_epoch: int = 100
    lr_after_drop: float = 5e-4
    l2: float = 1e-3
    rms_decay: float = 0.99
    rms_eps: float = 1e-8
    samples_per_epoch: int = 0
    val_samples: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise InvalidInputError('epochs must be >= 0 and batch_size >= 1')
        if not (self.lr > 0 and self.lr_after_drop > 0 and self.rms_eps > 0):
            raise InvalidInputError('Learning rates and rmsprop epsilon must be positive')
        if self.l2 < 0 or not 0 <= self.rms_decay < 1:
            raise InvalidInputError('l2 must be >= 0 and rms_decay in [0, 1)')
        if self.samples_per_epoch < 0 or self.val_samples < 0:
            raise InvalidInputError('samples_per_epoch and val_samples must be >= 0')

    @classmethod
    def from_section(cls, section, seed):
        return cls(epochs=section['epochs'], batch_size=section['batch_size'], lr=section['lr'],
                   lr_drop_epoch=section['lr_drop_epoch'], lr_after_drop=section['lr_after_drop'],
                   l2=section['l2'], rms_decay=section['rms_decay'], rms_eps=section['rms_eps'],
                   samples_per_epoch=section['samples_per_epoch'], val_samples=section['val_samples'],
                   seed=seed)

    def learning_rate(self, epoch):
        """
        :param epoch: 1-based epoch number
        :return: learning rate used during that epoch
        """
        return self.lr if epoch <= self.lr_drop_epoch else self.lr_after_drop

    def epoch_order(self, rng, n):
        """
        Window indices visited in one epoch: a fresh permutation, cut to
        samples_per_epoch when that is set and smaller than n
        """
        order = rng.permutation(n)
        if self.samples_per_epoch:
            order = order[:self.samples_per_epoch]
        return order


@dataclass(frozen=True)
class LossValue:
    P: float
    P_L2: float


def param_shapes(kind, hidden, fc_sizes):
    """
    :return: OrderedDict of parameter name -> shape, in storage order
    """
    shapes = OrderedDict()
    if kind == DFTC:
        k = rules.N_STATES
        shapes['lstm_W'] = (k, 4 * hidden, INPUT_DIM)
        shapes['lstm_U'] = (k, 4 * hidden, hidden)
        shapes['lstm_b'] = (k, 4 * hidden)
        fan_in = k * hidden
    else:
        fan_in = rules.N_STATES
    for layer, size in enumerate(fc_sizes, start=1):
        shapes['fc{0}_W'.format(layer)] = (size, fan_in)
        shapes['fc{0}_b'.format(layer)] = (size,)
        fan_in = size
    shapes['out_W'] = (rules.N_INPUTS, fan_in)
    shapes['out_b'] = (rules.N_INPUTS,)
    return shapes


def is_weight(name):
    return not name.endswith('_b')


def init_model(kind, seed, hidden=32, window=10, fc_sizes=(64, 64), normalizer=None):
    """
    Seeded initialisation: every weight and the head biases uniform in
    +-1/sqrt(fan_in); LSTM biases zero (forget gate included)

    :param kind: 'dftc' or 'fnn'
    :param seed: global seed, drawn from the 'init' stream
    :return: ModelParams
    """
    if kind == FNN:
        window = 1
    rng = stream_rng(seed, 'init', KINDS.index(kind))
    params = OrderedDict()
    for name, shape in param_shapes(kind, hidden, fc_sizes).items():
        if name == 'lstm_b':
            params[name] = np.zeros(shape)
            continue
        if name.startswith('lstm'):
            fan_in = INPUT_DIM + hidden
        elif name.endswith('_W'):
            fan_in = shape[1]
        else:
            fan_in = params[name[:-2] + '_W'].shape[1]
        bound = 1.0 / math.sqrt(fan_in)
        params[name] = rng.uniform(-bound, bound, size=shape)
    return ModelParams(kind, hidden, window, tuple(fc_sizes), params,
                       normalizer if normalizer is not None else Normalizer.identity())


def sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def _check_finite(value, layer):
    if not np.all(np.isfinite(value)):
        raise NumericError('Non-finite activation in layer {0}'.format(layer))


def _lstm_scan(W, U, b, x):
    """
    Runs k stacked blocks over a batch

    :param W: (k, 4H, D)
    :param U: (k, 4H, H)
    :param b: (k, 4H)
    :param x: (n, k, m, D)
    :return: (hidden states (n, k, m, H), per-step cache)
    """
    n, k, m, _ = x.shape
    H = U.shape[2]
    # block-major layout so each gate product is one batched matmul
    xk = np.transpose(x, (1, 0, 2, 3))
    Wt = np.transpose(W, (0, 2, 1))
    Ut = np.transpose(U, (0, 2, 1))
    bias = b[:, None, :]
    h = np.zeros((k, n, H))
    c = np.zeros((k, n, H))
    hs = np.empty((k, n, m, H))
    cache = []
    for t in range(m):
        x_t = xk[:, :, t, :]
        a = x_t @ Wt + h @ Ut + bias
        i = sigmoid(a[..., :H])
        f = sigmoid(a[..., H:2 * H])
        g = np.tanh(a[..., 2 * H:3 * H])
        o = sigmoid(a[..., 3 * H:])
        c_next = f * c + i * g
        tc = np.tanh(c_next)
        cache.append((x_t, h, c, i, f, g, o, tc))
        h = o * tc
        c = c_next
        hs[:, :, t, :] = h
    return np.transpose(hs, (1, 0, 2, 3)), cache


def _lstm_backward(U, cache, dh_final):
    """
    Backpropagation through time from the gradient on the final hidden state

    :param dh_final: (n, k, H)
    :return: (dW, dU, db)
    """
    k, G, H = U.shape
    dW = np.zeros((k, G, cache[0][0].shape[-1]))
    dU = np.zeros_like(U)
    db = np.zeros((k, G))
    dh = np.transpose(dh_final, (1, 0, 2))
    dc = np.zeros_like(dh)
    for x_t, h_prev, c_prev, i, f, g, o, tc in reversed(cache):
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc ** 2)
        da = np.concatenate([
            dc * g * i * (1.0 - i),
            dc * c_prev * f * (1.0 - f),
            dc * i * (1.0 - g ** 2),
            do * o * (1.0 - o),
        ], axis=-1)
        daT = np.transpose(da, (0, 2, 1))
        dW += daT @ x_t
        dU += daT @ h_prev
        db += da.sum(axis=1)
        dh = da @ U
        dc = dc * f
    return dW, dU, db


def lstm_forward(p, sequence):
    """
    Standard LSTM recursion with h0 = c0 = 0

    :param p: LstmParams
    :param sequence: m scalars, or an (m, D) array
    :return: (outputs (m, H), (h_m, c_m))
    """
    x = np.asarray(sequence, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if not np.all(np.isfinite(x)):
        raise InvalidInputError('LSTM input is not finite')
    W = np.asarray(p.W, dtype=float).reshape(1, -1, x.shape[1])
    U = np.asarray(p.U, dtype=float)[None]
    b = np.asarray(p.b, dtype=float)[None]
    hs, cache = _lstm_scan(W, U, b, x[None, None])
    _, h_prev, c_prev, i, f, g, _, tc = cache[-1]
    c_m = f * c_prev + i * g
    return hs[0, 0], (hs[0, 0, -1], c_m[0, 0])


def _as_windows(mp, windows):
    y = np.asarray(windows, dtype=float)
    if y.ndim == 2:
        y = y[None]
    if y.ndim != 3 or y.shape[1:] != (mp.window, rules.N_STATES):
        raise InvalidInputError('Expected windows of shape (n, {0}, 6), got {1}'.format(mp.window, y.shape))
    if y.shape[0] == 0:
        raise InvalidInputError('Empty batch')
    return y


def _forward(mp, windows):
    """
    :return: (predictions (n, 2), cache for _backward)
    """
    z = mp.normalizer.apply(_as_windows(mp, windows))
    _check_finite(z, 'normalizer')
    p = mp.params
    cache = {}
    if mp.kind == DFTC:
        # (n, m, 6) -> (n, 6 blocks, m, 1)
        x = np.transpose(z, (0, 2, 1))[..., None]
        hs, cache['lstm'] = _lstm_scan(p['lstm_W'], p['lstm_U'], p['lstm_b'], x)
        _check_finite(hs, 'lstm')
        cache['features'] = hs[:, :, -1, :]
        act = cache['features'].reshape(z.shape[0], -1)
    else:
        act = z[:, -1, :]

    cache['acts'] = [act]
    for layer in range(1, mp.n_layers + 1):
        pre = act @ p['fc{0}_W'.format(layer)].T + p['fc{0}_b'.format(layer)]
        act = np.maximum(pre, 0.0)
        _check_finite(act, 'fc{0}'.format(layer))
        cache['acts'].append(act)
    out = act @ p['out_W'].T + p['out_b']
    _check_finite(out, 'out')
    return out, cache


def model_forward(mp, window):
    """
    Network output for one window or a batch of windows

    :param mp: ModelParams
    :param window: (m, 6) or (n, m, 6) raw measurements
    :return: u (2,) or (n, 2)
    """
    single = np.ndim(window) == 2
    out, _ = _forward(mp, window)
    return out[0] if single else out


def forward_with_features(mp, window):
    """
    Network output together with the final hidden state of every LSTM block

    :param mp: DFTC ModelParams
    :param window: (m, 6) raw measurements
    :return: (u (2,), block outputs (6, H))
    """
    if mp.kind != DFTC:
        raise InvalidInputError('An FNN has no LSTM blocks')
    out, cache = _forward(mp, window)
    return out[0], cache['features'][0]


def block_outputs(mp, window):
    return forward_with_features(mp, window)[1]


def loss(preds, targets):
    """
    P = 1/(2n) * sum_i |target_i - pred_i|^2

    :param preds: (n, 2)
    :param targets: (n, 2)
    :return: P
    """
    preds = np.asarray(preds, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if preds.shape != targets.shape:
        raise InvalidInputError('Prediction and target shapes differ: {0} / {1}'.format(preds.shape, targets.shape))
    if preds.shape[0] == 0:
        raise InvalidInputError('Empty batch')
    v = targets - preds
    return float(np.sum(v * v) / (2.0 * preds.shape[0]))


def weight_square_sum(mp):
    return float(sum(np.sum(v * v) for name, v in mp.params.items() if is_weight(name)))


def regularized_loss(P, mp, l2, n):
    """
    P_L2 = P + l2/(2n) * sum of squared weights (biases excluded)
    """
    if l2 < 0:
        raise InvalidInputError('L2 factor must be non-negative')
    if l2 == 0:
        return P
    return P + l2 / (2.0 * n) * weight_square_sum(mp)


def evaluate(mp, windows, targets, l2=0.0):
    """
    :return: LossValue on one batch
    """
    preds = model_forward(mp, windows)
    P = loss(preds, targets)
    return LossValue(P, regularized_loss(P, mp, l2, len(targets)))


def _backward(mp, cache, preds, targets, l2):
    n = preds.shape[0]
    p = mp.params
    grads = OrderedDict((name, np.zeros_like(v)) for name, v in p.items())

    d = (preds - targets) / n
    acts = cache['acts']
    grads['out_W'] = d.T @ acts[-1]
    grads['out_b'] = d.sum(axis=0)
    d = d @ p['out_W']
    for layer in range(mp.n_layers, 0, -1):
        d = d * (acts[layer] > 0)
        grads['fc{0}_W'.format(layer)] = d.T @ acts[layer - 1]
        grads['fc{0}_b'.format(layer)] = d.sum(axis=0)
        d = d @ p['fc{0}_W'.format(layer)]

    if mp.kind == DFTC:
        dh_final = d.reshape(n, rules.N_STATES, mp.hidden)
        grads['lstm_W'], grads['lstm_U'], grads['lstm_b'] = _lstm_backward(p['lstm_U'], cache['lstm'], dh_final)

    if l2:
        for name in grads:
            if is_weight(name):
                grads[name] = grads[name] + (l2 / n) * p[name]

    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError('Non-finite gradient for {0}'.format(name))
    return grads


def backward(mp, windows, targets, l2=0.0):
    """
    Exact gradient of P_L2 by reverse-mode differentiation through the head
    and through time in every LSTM block

    :param mp: ModelParams
    :param windows: (n, m, 6) raw measurements
    :param targets: (n, 2)
    :param l2: L2 factor
    :return: (OrderedDict name -> gradient, LossValue)
    """
    targets = np.asarray(targets, dtype=float)
    preds, cache = _forward(mp, windows)
    P = loss(preds, targets)
    grads = _backward(mp, cache, preds, targets, l2)
    return grads, LossValue(P, regularized_loss(P, mp, l2, preds.shape[0]))


def rmsprop_init(mp):
    return OrderedDict((name, np.zeros_like(v)) for name, v in mp.params.items())


def rmsprop_step(state, mp, grads, lr, decay=0.99, eps=1e-8):
    """
    s <- decay*s + (1 - decay)*g^2;  V <- V - lr*g/(sqrt(s) + eps)

    :param state: accumulators, shaped like mp.params
    :return: (new state, new ModelParams)
    """
    new_state = OrderedDict()
    new_params = OrderedDict()
    for name, v in mp.params.items():
        g = grads[name]
        s = decay * state[name] + (1.0 - decay) * g * g
        new_state[name] = s
        new_params[name] = v - lr * g / (np.sqrt(s) + eps)
    return new_state, mp.with_params(new_params)


def window_set(mp, trajectories):
    return WindowSet(trajectories, m=mp.window)


def dataset_loss(mp, windows, l2=0.0, chunk=4096, indices=None):
    """
    P_L2 over a WindowSet, evaluated in chunks

    :param indices: window indices to score; all windows when None
    :return: P_L2, or None for an empty set
    """
    if indices is None:
        indices = np.arange(len(windows))
    n = len(indices)
    if n == 0:
        return None
    total = 0.0
    for start in range(0, n, chunk):
        idx = indices[start:start + chunk]
        y, u = windows.batch(idx)
        total += evaluate(mp, y, u).P * len(idx)
    return regularized_loss(total / n, mp, l2, n)


def validation_indices(cfg, kind, n):
    """
    Fixed subset of the validation windows scored after every epoch, so the
    curve stays comparable between epochs

    :return: sorted indices, or None for all windows
    """
    if not cfg.val_samples or cfg.val_samples >= n:
        return None
    rng = stream_rng(cfg.seed, 'train', KINDS.index(kind), 1)
    return np.sort(rng.choice(n, size=cfg.val_samples, replace=False))


def train(mp, ds, cfg):
    """
    Minibatch RMSprop on the training split. The batch order comes from the
    'train' stream of the seed, so two runs with the same seed give the same
    curve and weights.

    :param mp: initial ModelParams
    :param ds: split Dataset
    :param cfg: TrainConfig
    :return: (trained ModelParams, learning curve rows (epoch, train P_L2, val P_L2))
    """
    train_set = window_set(mp, ds.subset(rules.TRAIN_SPLIT))
    val_set = window_set(mp, ds.subset(rules.VAL_SPLIT))
    if ds.normalizer is not None:
        mp = mp.with_normalizer(ds.normalizer)
    if cfg.epochs and len(train_set) == 0:
        raise InvalidInputError('The training split holds no windows')

    rng = stream_rng(cfg.seed, 'train', KINDS.index(mp.kind))
    val_idx = validation_indices(cfg, mp.kind, len(val_set))
    state = rmsprop_init(mp)
    curve = []
    logger.info('Training %s model (%s parameters) on %s windows (%s per epoch), %s validation windows',
                mp.kind, mp.param_count, len(train_set), min(cfg.samples_per_epoch or len(train_set), len(train_set)),
                len(val_set) if val_idx is None else len(val_idx))
    for epoch in range(1, cfg.epochs + 1):
        lr = cfg.learning_rate(epoch)
        order = cfg.epoch_order(rng, len(train_set))
        total = 0.0
        for batch, start in enumerate(range(0, len(order), cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            y, u = train_set.batch(idx)
            try:
                grads, value = backward(mp, y, u, cfg.l2)
            except NumericError as err:
                raise TrainingDivergedError('Training diverged in epoch {0}, batch {1}: {2}'.format(
                    epoch, batch, err), epoch=epoch, batch=batch)
            if not math.isfinite(value.P_L2):
                raise TrainingDivergedError('Non-finite loss in epoch {0}, batch {1}'.format(epoch, batch),
                                            epoch=epoch, batch=batch)
            total += value.P_L2 * len(idx)
            state, mp = rmsprop_step(state, mp, grads, lr, cfg.rms_decay, cfg.rms_eps)
        train_loss = total / len(order)
        val_loss = dataset_loss(mp, val_set, cfg.l2, indices=val_idx)
        curve.append((epoch, train_loss, val_loss))
        logger.info('Epoch %s/%s lr %s: train %s, val %s', epoch, cfg.epochs, lr, train_loss, val_loss)
    return mp, curve


def save_curve(curve, path):
    rows = [[str(epoch), fmt(train_loss), fmt_optional(val_loss)] for epoch, train_loss, val_loss in curve]
    writer.write_csv(path, rules.CURVE_COLUMNS, rows)


def toJSON(mp):
    return {
        'arch': {'kind': mp.kind, 'H': mp.hidden, 'm': mp.window, 'fc_sizes': list(mp.fc_sizes)},
        'normalizer': mp.normalizer.toJSON(),
        'params': OrderedDict((name, v.tolist()) for name, v in mp.params.items()),
        'param_count': mp.param_count,
    }


def save_model(mp, path):
    """
    Writes the model as JSON. Floats are written in their shortest
    round-trip form, so loading restores every bit.
    """
    writer.write_file(path, toJSON(mp))
    logger.info('Saved %s model with %s parameters to %s', mp.kind, mp.param_count, path)


def _field(content, key, path):
    if not isinstance(content, dict) or key not in content:
        raise ParseError('{0}: missing field {1}'.format(path, key))
    return content[key]


def load_model(path):
    """
    :param path: model JSON written by save_model
    :return: ModelParams
    """
    content = reader.read_file(path)
    arch = _field(content, 'arch', path)
    stats = _field(content, 'normalizer', path)
    stored = _field(content, 'params', path)
    kind = _field(arch, 'kind', path)
    try:
        hidden = int(_field(arch, 'H', path))
        window = int(_field(arch, 'm', path))
        fc_sizes = tuple(int(s) for s in _field(arch, 'fc_sizes', path))
        normalizer = Normalizer(_field(stats, 'mean', path), _field(stats, 'std', path))
    except (TypeError, ValueError, InvalidInputError) as err:
        raise ParseError('{0}: bad architecture or normalizer: {1}'.format(path, err))
    if kind not in KINDS:
        raise ParseError('{0}: unknown model kind {1!r}'.format(path, kind))

    params = OrderedDict()
    for name, shape in param_shapes(kind, hidden, fc_sizes).items():
        try:
            value = np.array(_field(stored, name, path), dtype=float)
        except (TypeError, ValueError) as err:
            raise ParseError('{0}: parameter {1} is not numeric: {2}'.format(path, name, err))
        if value.shape != shape:
            raise ParseError('{0}: parameter {1} has shape {2}, architecture needs {3}'.format(
                path, name, value.shape, shape))
        params[name] = value
    extra = set(stored) - set(params)
    if extra:
        raise ParseError('{0}: unexpected parameters {1}'.format(path, sorted(extra)))

    mp = ModelParams(kind, hidden, window, fc_sizes, params, normalizer)
    if _field(content, 'param_count', path) != mp.param_count:
        raise ParseError('{0}: param_count {1} does not match the architecture ({2})'.format(
            path, content['param_count'], mp.param_count))
    logger.debug('Loaded %s model from %s', kind, path)
    return mp


def gradient_check(mp, windows, targets, l2=0.0, delta=1e-5, samples=10, seed=0):
    """
    Compares backward() with central differences on a sample of coordinates
    of every parameter array

    :param samples: coordinates checked per array
    :return: dict name -> largest relative error
    """
    targets = np.asarray(targets, dtype=float)
    n = len(targets)
    grads, _ = backward(mp, windows, targets, l2)
    rng = np.random.default_rng(seed)

    def objective(model):
        return regularized_loss(loss(model_forward(model, windows), targets), model, l2, n)

    errors = OrderedDict()
    for name, value in mp.params.items():
        flat = rng.choice(value.size, size=min(samples, value.size), replace=False)
        worst = 0.0
        for index in flat:
            coord = np.unravel_index(index, value.shape)
            probe = mp.copy()
            probe.params[name][coord] = value[coord] + delta
            up = objective(probe)
            probe.params[name][coord] = value[coord] - delta
            down = objective(probe)
            numeric = (up - down) / (2.0 * delta)
            analytic = grads[name][coord]
            worst = max(worst, abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1e-4))
        errors[name] = worst
    return errors
