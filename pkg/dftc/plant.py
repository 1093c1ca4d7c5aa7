"""
Simulation of the two-axis reaction-wheel inverted pendulum.

Each axis obeys

    I_p * ddtheta = ml*g*sin(theta) - k_s*theta - b_th*dtheta - tau + b_ph*dphi
    ddphi        = (tau - b_ph*dphi) / I_w - ddtheta

with tau = sat(k_T * i, +-k_T * i_max). The axes are decoupled. States are
arrays whose last axis is x = [theta1 theta2 dtheta1 dtheta2 dphi1 dphi2];
leading axes are batch dimensions, so many rollouts advance together.
"""
import numpy as np
from adsputils import setup_logging

from dftc import rules
from dftc.exceptions import InvalidInputError, DivergenceError

logger = setup_logging(__name__)


def saturate(params, u):
    """
    Clips motor currents to +-i_max

    :param params: PlantParams
    :param u: currents, last axis of length 2
    :return: saturated currents
    """
    return np.clip(np.asarray(u, dtype=float), -params.i_max, params.i_max)


def dynamics(params, state, u):
    """
    State derivative of the plant

    :param params: PlantParams
    :param state: state array (..., 6) or PlantState
    :param u: currents (..., 2) or ControlInput, already saturated
    :return: [dtheta1, dtheta2, ddtheta1, ddtheta2, ddphi1, ddphi2]
    """
    x = np.asarray(state, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape[-1] != rules.N_STATES or u.shape[-1] != rules.N_INPUTS:
        raise InvalidInputError('Bad state/input shapes {0} / {1}'.format(x.shape, u.shape))
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
        raise InvalidInputError('Non-finite state or input')

    theta = x[..., 0:2]
    dtheta = x[..., 2:4]
    dphi = x[..., 4:6]
    tau = np.clip(params.k_T * u, -params.torque_limit, params.torque_limit)

    ddtheta = (params.ml * params.g * np.sin(theta) - params.k_s * theta
               - params.b_th * dtheta - tau + params.b_ph * dphi) / params.I_p
    ddphi = (tau - params.b_ph * dphi) / params.I_w - ddtheta
    return np.concatenate([dtheta, ddtheta, ddphi], axis=-1)


def rk4_step(f, x, h):
    """
    One classical Runge-Kutta step of dx/dt = f(x)

    :param f: derivative function
    :param x: current state
    :param h: step length
    :return: state after h
    """
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_rk4(params, state, u, h):
    """
    Advances the plant by h with the currents held constant

    :param params: PlantParams
    :param state: state array (..., 6)
    :param u: currents (..., 2)
    :param h: step length (s)
    :return: next state array
    """
    if not h > 0:
        raise InvalidInputError('Step length must be positive, got {0}'.format(h))
    x = np.asarray(state, dtype=float)
    u = np.asarray(u, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
        raise InvalidInputError('Non-finite state or input')
    try:
        nxt = rk4_step(lambda z: dynamics(params, z, u), x, h)
    except InvalidInputError:
        raise DivergenceError('Integration produced a non-finite state', state=x)
    if not np.all(np.isfinite(nxt)):
        raise DivergenceError('Integration produced a non-finite state', state=x)
    return nxt


def measure(state, noise_std=0.0, rng=None):
    """
    Sensor readings: each sensor measures one state component, optionally
    with additive zero-mean Gaussian noise

    :param state: state array (..., 6)
    :param noise_std: scalar or per-channel standard deviation
    :param rng: numpy Generator, required when noise is on
    :return: readings y (..., 6)
    """
    y = np.array(state, dtype=float)
    std = np.broadcast_to(np.asarray(noise_std, dtype=float), (rules.N_STATES,))
    if np.any(std > 0):
        if rng is None:
            raise InvalidInputError('Sensor noise requires a random generator')
        y = y + rng.normal(size=y.shape) * std
    return y


def apply_fault(y, history_value, spec, t):
    """
    Corrupts one sensor reading once the fault is active

    :param y: readings at time t (6,)
    :param history_value: reading of the faulty sensor at the last sample before the fault
    :param spec: FaultSpec or None
    :param t: sample time (s)
    :return: readings as seen by the controller
    """
    y = np.array(y, dtype=float)
    if spec is None or t < spec.fault_time:
        return y
    if spec.mode == rules.HOLD_LAST:
        y[spec.channel] = history_value
    elif spec.mode == rules.ZERO:
        y[spec.channel] = 0.0
    else:
        y[spec.channel] = spec.value
    return y


def energy(params, state):
    """
    Mechanical energy summed over both axes (conserved without damping
    and input)

    :param params: PlantParams
    :param state: state array (..., 6)
    :return: energy
    """
    x = np.asarray(state, dtype=float)
    theta, dtheta, dphi = x[..., 0:2], x[..., 2:4], x[..., 4:6]
    e = (0.5 * params.I_p * dtheta ** 2
         + 0.5 * params.I_w * (dtheta + dphi) ** 2
         + 0.5 * params.k_s * theta ** 2
         + params.ml * params.g * (np.cos(theta) - 1.0))
    return e.sum(axis=-1)


def sample_states(rng, n, box=rules.INITIAL_CONDITION_BOX):
    """
    Draws states uniformly from a box

    :param rng: numpy Generator
    :param n: number of states
    :param box: list of (low, high) per state component
    :return: array (n, 6)
    """
    low = np.array([b[0] for b in box])
    high = np.array([b[1] for b in box])
    return rng.uniform(low, high, size=(n, len(box)))


def apply_fault_series(measurements, times, spec):
    """
    apply_fault over a whole recorded series

    :param measurements: readings (n, 6)
    :param times: sample times (n,)
    :param spec: FaultSpec or None
    :return: faulted readings (n, 6)
    """
    y = np.array(measurements, dtype=float)
    if spec is None:
        return y
    times = np.asarray(times)
    active = times >= spec.fault_time
    if not np.any(active):
        return y
    first = int(np.argmax(active))
    history = y[first - 1, spec.channel] if first > 0 else y[first, spec.channel]
    if spec.mode == rules.HOLD_LAST:
        y[active, spec.channel] = history
    elif spec.mode == rules.ZERO:
        y[active, spec.channel] = 0.0
    else:
        y[active, spec.channel] = spec.value
    return y
