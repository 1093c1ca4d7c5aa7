"""
Full-state-feedback baseline controller: a discrete infinite-horizon LQR on
the linearised one-step map of the plant, and the quadratic trajectory cost
the learned controllers are compared with.
"""
import math
from dataclasses import dataclass

import numpy as np
from adsputils import setup_logging

from dftc import plant, rules
from dftc.models import CostWeights
from dftc.exceptions import (InvalidInputError, NonConvergenceError,
                             InstabilityError)

logger = setup_logging(__name__)


@dataclass(frozen=True)
class LinearizedPlant:
    A_d: np.ndarray
    B_d: np.ndarray
    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise InvalidInputError('Sampling interval must be positive')
        if not (np.all(np.isfinite(self.A_d)) and np.all(np.isfinite(self.B_d))):
            raise InvalidInputError('Linearisation has non-finite entries')


@dataclass(frozen=True)
class LqrGain:
    K: np.ndarray
    P: np.ndarray
    residual: float
    i_max: float = math.inf

    def toJSON(self):
        return {
            'K': self.K.tolist(),
            'P': self.P.tolist(),
            'residual': self.residual,
            'i_max': self.i_max,
        }


def linearize(params, h, delta=1e-6):
    """
    Central-difference Jacobians of the RK4 step map at the origin

    :param params: PlantParams
    :param h: sampling interval (s)
    :param delta: finite-difference step
    :return: LinearizedPlant
    """
    n, m = rules.N_STATES, rules.N_INPUTS
    x0, u0 = np.zeros(n), np.zeros(m)
    A = np.empty((n, n))
    B = np.empty((n, m))
    for j in range(n):
        e = np.zeros(n)
        e[j] = delta
        A[:, j] = (plant.step_rk4(params, x0 + e, u0, h) - plant.step_rk4(params, x0 - e, u0, h)) / (2 * delta)
    for j in range(m):
        e = np.zeros(m)
        e[j] = delta
        B[:, j] = (plant.step_rk4(params, x0, u0 + e, h) - plant.step_rk4(params, x0, u0 - e, h)) / (2 * delta)
    logger.debug('Linearised plant at h=%s', h)
    return LinearizedPlant(A, B, h)


def _weight_matrices(w):
    if hasattr(w, 'Q_matrix'):
        return w.Q_matrix, w.R_matrix
    Q, R = w
    return np.atleast_2d(np.asarray(Q, dtype=float)), np.atleast_2d(np.asarray(R, dtype=float))


def _riccati_map(P, A, B, Q, R):
    BtP = B.T @ P
    K = np.linalg.solve(R + BtP @ B, BtP @ A)
    P_next = Q + A.T @ P @ A - A.T @ P @ B @ K
    return 0.5 * (P_next + P_next.T), K


def solve_riccati(lin, w, tol=1e-12, max_iter=200000):
    """
    Fixed-point iteration of the discrete Riccati recursion

        P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA

    stopped when the largest entry change falls below tol * max(1, |P|max).

    :param lin: LinearizedPlant
    :param w: CostWeights, or a (Q, R) pair of matrices
    :param tol: relative convergence tolerance
    :param max_iter: iteration budget
    :return: LqrGain
    """
    A, B = lin.A_d, lin.B_d
    Q, R = _weight_matrices(w)
    P = Q.copy()
    delta = math.inf
    for iteration in range(1, max_iter + 1):
        P_next, _ = _riccati_map(P, A, B, Q, R)
        delta = np.max(np.abs(P_next - P))
        P = P_next
        if delta < tol * max(1.0, np.max(np.abs(P))):
            break
    else:
        raise NonConvergenceError(
            'Riccati iteration did not converge in {0} iterations (last change {1})'.format(max_iter, delta),
            residual=delta)

    P_check, K = _riccati_map(P, A, B, Q, R)
    residual = float(np.max(np.abs(P - P_check)) / max(1.0, np.max(np.abs(P))))
    radius = spectral_radius(A - B @ K)
    logger.info('Riccati converged after %s iterations, residual %s, closed-loop radius %s',
                iteration, residual, radius)
    if radius >= 1:
        raise InstabilityError('Closed-loop spectral radius {0} >= 1'.format(radius))
    return LqrGain(K, P, residual)


def spectral_radius(M):
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def design_gain(params, h, w, tol=1e-12, max_iter=200000):
    """
    Linearises the plant and solves for the LQR gain, saturating at the
    plant's current limit

    :return: LqrGain
    """
    gain = solve_riccati(linearize(params, h), w, tol=tol, max_iter=max_iter)
    return LqrGain(gain.K, gain.P, gain.residual, params.i_max)


def gain_from_config(params, section):
    """
    :param params: PlantParams
    :param section: baseline section of the run configuration
    :return: LqrGain
    """
    w = CostWeights(tuple(section['Q']), tuple(section['R']))
    return design_gain(params, section['h'], w, tol=section['tol'], max_iter=section['max_iter'])


def baseline_policy(gain, x):
    """
    u = -K x, saturated

    :param gain: LqrGain
    :param x: state (..., 6) or PlantState
    :return: currents (..., 2)
    """
    x = np.asarray(x, dtype=float)
    u = -(x @ gain.K.T)
    return np.clip(u, -gain.i_max, gain.i_max)


def simulate_closed_loop(params, gain, x0, n_steps, h):
    """
    Rolls the plant out under the baseline controller with full state access

    :param params: PlantParams
    :param gain: LqrGain
    :param x0: initial state (6,)
    :param n_steps: number of recorded samples
    :param h: sampling interval
    :return: (states (n_steps, 6), inputs (n_steps, 2))
    """
    states = np.empty((n_steps, rules.N_STATES))
    inputs = np.empty((n_steps, rules.N_INPUTS))
    x = np.asarray(x0, dtype=float)
    for k in range(n_steps):
        u = plant.saturate(params, baseline_policy(gain, x))
        states[k] = x
        inputs[k] = u
        if k + 1 < n_steps:
            x = plant.step_rk4(params, x, u, h)
    return states, inputs


def stage_costs(states, inputs, w):
    Q, R = np.asarray(w.Q), np.asarray(w.R)
    return (np.asarray(states) ** 2) @ Q + (np.asarray(inputs) ** 2) @ R


def trajectory_cost(traj, w):
    """
    J = sum_k (x_k' Q x_k + u_k' R u_k) * h

    :param traj: Trajectory
    :param w: CostWeights
    :return: J
    """
    if traj.length == 0:
        raise InvalidInputError('Cannot evaluate the cost of an empty trajectory')
    return float(np.sum(stage_costs(traj.states, traj.inputs, w)) * traj.h)
