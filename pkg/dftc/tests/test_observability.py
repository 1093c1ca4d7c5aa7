import math
import unittest

import numpy as np
from scipy.linalg import expm, solve_continuous_lyapunov

from dftc import observability
from dftc.exceptions import DivergenceError, InvalidInputError, UnobservableError
from dftc.models import PlantParams, SensorConfig
from dftc.tests import test_base


def linear_config(n, horizon, step, probe_policy=observability.ZERO_INPUT):
    return observability.GramianConfig(epsilon=1e-4, horizon=horizon, step=step,
                                       base_points=(np.zeros(n),), probe_policy=probe_policy)


class TestGramian(test_base.TestUnit):

    def test_frozen_system(self):
        system = observability.LinearProbe([[0.0]], [[1.0]])
        G = observability.channel_gramians(system, linear_config(1, 2.0, 0.01))
        W = observability.combine(G, SensorConfig(frozenset([1])))
        self.assertAlmostEqual(W[0, 0], 2.0, places=9)
        self.assertAlmostEqual(observability.observability_measure(W), math.log(2.0), places=9)

    def test_stable_lti_system_matches_closed_form(self):
        A = np.array([[0.0, 1.0], [-1.0, -1.0]])
        C = np.array([[1.0, 0.0]])
        T = 4.0
        system = observability.LinearProbe(A, C)
        G = observability.channel_gramians(system, linear_config(2, T, 1e-3))
        W = observability.combine(G, SensorConfig(frozenset([1])))
        E = expm(A * T)
        oracle = solve_continuous_lyapunov(A.T, E.T @ C.T @ C @ E - C.T @ C)
        self.assertArrayClose(W, oracle, rtol=1e-4, atol=1e-8)
        self.assertAlmostEqual(observability.observability_measure(W),
                               math.log(np.linalg.det(oracle)), delta=1e-4)

    def test_disconnected_state_is_unobservable(self):
        system = observability.LinearProbe(np.zeros((2, 2)), [[1.0, 0.0]])
        result = observability.empirical_gramian(system, SensorConfig(frozenset([1])),
                                                 linear_config(2, 1.0, 0.01))
        self.assertIsNone(result.J)

    def test_output_scaling(self):
        A = np.array([[0.0, 1.0], [-1.0, -1.0]])
        cfg = linear_config(2, 1.0, 0.01)
        sensors = SensorConfig(frozenset([1, 2]))
        W = observability.empirical_gramian(observability.LinearProbe(A, np.eye(2)), sensors, cfg).W
        W3 = observability.empirical_gramian(observability.LinearProbe(A, 3.0 * np.eye(2)), sensors, cfg).W
        self.assertArrayClose(W3, 9.0 * W, rtol=1e-9, atol=1e-12)

    def test_symmetric(self):
        system = observability.LinearProbe(np.array([[0.0, 1.0], [-2.0, -0.5]]), np.eye(2))
        W = observability.empirical_gramian(system, SensorConfig(frozenset([1, 2])),
                                            linear_config(2, 1.0, 0.01)).W
        self.assertArrayEqual(W, W.T)

    def test_divergent_probe_is_located(self):
        system = observability.LinearProbe([[1000.0]], [[1.0]])
        with self.assertRaises(DivergenceError) as context:
            observability.channel_gramians(system, linear_config(1, 10.0, 0.1))
        self.assertIn('direction 1', str(context.exception))

    def test_closed_loop_probe_needs_gain(self):
        cfg = linear_config(6, 0.1, 0.01, probe_policy=observability.CLOSED_LOOP)
        with self.assertRaises(InvalidInputError):
            observability.empirical_gramian(PlantParams(), SensorConfig.full(), cfg)


class TestMeasure(test_base.TestUnit):

    def test_identity(self):
        self.assertEqual(observability.observability_measure(np.eye(6)), 0.0)

    def test_diagonal(self):
        self.assertAlmostEqual(observability.observability_measure(2.0 * np.eye(6)), 6 * math.log(2.0))

    def test_singular(self):
        with self.assertRaises(UnobservableError):
            observability.observability_measure(np.diag([1.0, 1.0, 1.0, 1.0, 1.0, 0.0]))
        with self.assertRaises(UnobservableError):
            observability.observability_measure(1e-60 * np.eye(6))


class TestRanking(test_base.TestUnit):

    def setUp(self):
        super(TestRanking, self).setUp()
        section = {'epsilon': 1e-4, 'horizon': 0.5, 'step': 1e-3, 'n_base_points': 2,
                   'probe_policy': observability.CLOSED_LOOP}
        self.cfg = observability.config_from_section(section, seed=0)
        self.probe = observability.probe_system(PlantParams(), self.cfg, test_base.default_gain())
        self.G = observability.channel_gramians(self.probe, self.cfg)

    def test_full_configuration_ranks_first(self):
        rows = observability.rank_configurations(self.probe, observability.default_configs(), self.cfg, G=self.G)
        self.assertEqual(len(rows), 7)
        self.assertTrue(rows[0].config.is_full)
        self.assertEqual(rows[0].status, observability.REFERENCE)
        for row in rows[1:]:
            self.assertLessEqual(row.J, rows[0].J)
        self.assertEqual([r.J for r in rows], sorted([r.J for r in rows], reverse=True))

    def test_subset_monotonicity(self):
        J = dict((r.config.label, r.J) for r in observability.rank_configurations(
            self.probe, [SensorConfig.drop(1), SensorConfig(frozenset([2, 3, 4, 5]))], self.cfg, G=self.G))
        self.assertLessEqual(J['k4:2-3-4-5'], J['drop_1'])

    def test_two_sensor_search(self):
        rows = observability.best_subsets(self.probe, 2, self.cfg, G=self.G)
        self.assertEqual(len(rows), 15)
        drops = observability.rank_configurations(self.probe, observability.default_configs()[1:],
                                                  self.cfg, G=self.G)
        dropped = dict((r.config.label, r.J) for r in drops)
        for row in rows:
            if row.J is None:
                continue
            for sensor in set(range(1, 7)) - row.config.active:
                self.assertLessEqual(row.J, dropped['drop_{0}'.format(sensor)])

    def test_wheel_velocity_sensors_carry_the_wheel_states(self):
        drops = dict((r.config.label, r.J) for r in observability.rank_configurations(
            self.probe, observability.default_configs()[1:], self.cfg, G=self.G))
        self.assertTrue(all(J is not None for J in drops.values()))
        link_drops = [drops['drop_{0}'.format(i)] for i in (1, 2, 3, 4)]
        self.assertLess(max(drops['drop_5'], drops['drop_6']), min(link_drops))

        pairs = observability.best_subsets(self.probe, 2, self.cfg, G=self.G)
        self.assertEqual(pairs[0].config.active, frozenset([5, 6]))
        self.assertGreater(pairs[0].J, min(drops['drop_5'], drops['drop_6']))

    def test_same_result_without_precomputed_probes(self):
        config = [SensorConfig.full()]
        self.assertEqual(observability.rank_configurations(PlantParams(), config, self.cfg,
                                                           baseline=test_base.default_gain())[0].J,
                         observability.rank_configurations(self.probe, config, self.cfg, G=self.G)[0].J)


if __name__ == '__main__':
    unittest.main()
