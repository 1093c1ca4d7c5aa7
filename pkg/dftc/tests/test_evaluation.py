import csv
import json
import os
import unittest
from collections import OrderedDict

import numpy as np
from mock import patch

from dftc import evaluation, nn, rules
from dftc.exceptions import ConfigError, InvalidInputError, NumericError
from dftc.models import CostWeights, FaultSpec, PlantParams, Trajectory
from dftc.policy import BaselineController, DftcController
from dftc.tests import test_base


class BrokenController(object):
    """Fails with a non-finite output after a few calls"""
    name = 'broken'

    def __init__(self, calls):
        self.calls = calls
        self.seen = 0

    def act(self, y):
        self.seen += 1
        if self.seen > self.calls:
            raise NumericError('Non-finite output')
        return np.zeros(2)

    def reset(self):
        self.seen = 0
        return self


def held_trajectory(theta):
    states = np.zeros((len(theta), 6))
    states[:, 0] = theta
    return Trajectory(id='0', h=0.01, states=states, inputs=np.zeros((len(theta), 2)), measurements=states)


class EvaluationTestCase(test_base.TestUnit):

    def setUp(self):
        super(EvaluationTestCase, self).setUp()
        self.params = PlantParams()
        self.w = CostWeights()
        self.gain = test_base.default_gain()
        self.model = nn.init_model(nn.DFTC, 0, hidden=3, window=10, fc_sizes=(5,))
        self.cfg = evaluation.EvalConfig(n_scenarios=2, duration=1.0, fault_window=(0.3, 0.6),
                                         controllers=('baseline', 'dftc'), timing_calls=3)

    def controllers(self, record_features=False):
        return OrderedDict([
            ('baseline', BaselineController(self.gain)),
            ('dftc', DftcController(self.model, self.params.i_max, record_features=record_features)),
        ])


class TestRollout(EvaluationTestCase):

    def test_origin_costs_nothing(self):
        scenario = evaluation.Scenario(0, np.zeros(6), duration=1.0)
        result = evaluation.rollout(self.params, BaselineController(self.gain), scenario, self.w)
        self.assertEqual(result.J, 0.0)
        self.assertFalse(result.diverged)
        self.assertEqual(result.trajectory.length, 100)
        self.assertTrue(evaluation.settling_check(result.trajectory))

    def test_baseline_recovers_from_tilt(self):
        scenario = evaluation.Scenario(0, np.array([0.2, 0, 0, 0, 0, 0]), duration=4.0)
        result = evaluation.rollout(self.params, BaselineController(self.gain), scenario, self.w)
        self.assertGreater(result.J, 0.0)
        self.assertTrue(evaluation.settling_check(result.trajectory, 0.05, 0.5))

    def test_fault_free_controller_ignores_the_fault(self):
        fault = FaultSpec(1, rules.ZERO, 0.3)
        scenario = evaluation.Scenario(0, np.array([0.1, 0, 0, 0, 0, 0]), fault, duration=1.0)
        faulty = evaluation.rollout(self.params, BaselineController(self.gain), scenario, self.w)
        clean = evaluation.rollout(self.params, BaselineController(self.gain), scenario.without_fault(), self.w)
        self.assertEqual(faulty.J, clean.J)
        self.assertIsNone(faulty.trajectory.fault)

    def test_runs_agree_until_the_fault(self):
        fault = FaultSpec(3, rules.ZERO, 40 * 0.01)
        x0 = np.array([0.1, -0.1, 0.5, 0.0, 10.0, 0.0])
        scenario = evaluation.Scenario(0, x0, fault, duration=1.0, seed=5)
        ctrl = DftcController(self.model, self.params.i_max)
        for noise in (0.0, 0.01):
            faulty = evaluation.rollout(self.params, ctrl, scenario, self.w, noise_std=noise).trajectory
            clean = evaluation.rollout(self.params, ctrl, scenario.without_fault(), self.w, noise_std=noise).trajectory
            k_f = 40
            self.assertArrayEqual(faulty.states[:k_f + 1], clean.states[:k_f + 1])
            self.assertArrayEqual(faulty.inputs[:k_f], clean.inputs[:k_f])
            self.assertArrayEqual(faulty.measurements[:k_f], clean.measurements[:k_f])
            self.assertTrue(np.all(faulty.measurements[k_f:, 2] == 0.0))
            self.assertEqual(faulty.fault, fault)

    def test_noise_is_reproducible(self):
        scenario = evaluation.Scenario(3, np.array([0.1, 0, 0, 0, 0, 0]), duration=0.5, seed=2)
        a = evaluation.rollout(self.params, BaselineController(self.gain), scenario, self.w, noise_std=0.01)
        b = evaluation.rollout(self.params, BaselineController(self.gain), scenario, self.w, noise_std=0.01)
        self.assertEqual(a.trajectory, b.trajectory)
        self.assertFalse(np.array_equal(a.trajectory.measurements, a.trajectory.states))

    def test_failure_truncates_the_run(self):
        scenario = evaluation.Scenario(0, np.array([0.1, 0, 0, 0, 0, 0]), duration=1.0)
        result = evaluation.rollout(self.params, BrokenController(3), scenario, self.w)
        self.assertTrue(result.diverged)
        self.assertIsNone(result.J)
        self.assertEqual(result.trajectory.length, 3)

    def test_divergence_bound(self):
        scenario = evaluation.Scenario(0, np.array([0.1, 0, 0, 0, 0, 0]), duration=1.0)
        result = evaluation.rollout(self.params, BaselineController(self.gain), scenario, self.w,
                                    divergence_bound=0.05)
        self.assertTrue(result.diverged)
        self.assertEqual(result.trajectory.length, 1)

    def test_features_are_recorded(self):
        scenario = evaluation.Scenario(0, np.array([0.1, 0, 0, 0, 0, 0]), duration=0.2)
        result = evaluation.rollout(self.params, DftcController(self.model, 5.0, record_features=True),
                                    scenario, self.w)
        self.assertEqual(result.features.shape, (20, 18))


class TestScoring(test_base.TestUnit):

    def test_settling(self):
        theta = np.full(400, 0.3)
        theta[-50:] = 0.04
        self.assertTrue(evaluation.settling_check(held_trajectory(theta), 0.05, 0.5))
        theta[-10] = -0.06
        self.assertFalse(evaluation.settling_check(held_trajectory(theta), 0.05, 0.5))
        self.assertFalse(evaluation.settling_check(held_trajectory(np.zeros(0)), 0.05, 0.5))

    def test_normalized_cost(self):
        self.assertEqual(evaluation.normalized_cost(2.0, 4.0), 0.5)
        self.assertEqual(evaluation.normalized_cost(0.0, 0.0), 1.0)
        self.assertIsNone(evaluation.normalized_cost(1.0, 0.0))
        self.assertIsNone(evaluation.normalized_cost(None, 1.0))
        self.assertIsNone(evaluation.normalized_cost(1.0, None))

    def test_aggregate_excludes_diverged_runs(self):
        def row(rho, diverged=False, settled=True):
            return evaluation.RunRow('dftc', 0, rules.FAULT, None, None if diverged else rho, None if diverged else rho,
                                     settled and not diverged, diverged, 0.0)
        stats = evaluation.aggregate([row(1.0), row(3.0), row(None, diverged=True), row(2.0, settled=False)])
        self.assertEqual(stats['n'], 4)
        self.assertEqual(stats['excluded'], 1)
        self.assertEqual(stats['mean_rho'], 2.0)
        self.assertAlmostEqual(stats['std_rho'], np.std([1.0, 3.0, 2.0]))
        self.assertEqual(stats['settled_fraction'], 0.5)
        empty = evaluation.aggregate([])
        self.assertIsNone(empty['mean_rho'])
        self.assertIsNone(empty['settled_fraction'])

    def test_config_errors(self):
        with self.assertRaises(ConfigError):
            evaluation.EvalConfig(controllers=('dftc',))
        with self.assertRaises(ConfigError):
            evaluation.EvalConfig(controllers=('baseline', 'pid'))
        with self.assertRaises(ConfigError):
            evaluation.EvalConfig(fault_mix='random')
        with self.assertRaises(ConfigError):
            evaluation.EvalConfig(duration=1.0, fault_window=(0.3, 2.0))

    def test_fault_free_suite_ignores_the_fault_window(self):
        cfg = evaluation.EvalConfig(n_scenarios=2, duration=1.0, fault_mix='none', fault_window=(0.3, 2.0))
        self.assertEqual(cfg.conditions, (rules.NO_FAULT,))
        self.assertTrue(all(s.fault is None for s in evaluation.make_scenarios(cfg, 0)))

    def test_config_from_sections(self):
        config = self.config
        cfg = evaluation.EvalConfig.from_sections(config['eval'], config['augment'], noise_std=0.02)
        self.assertEqual(cfg.fault_window, tuple(config['augment']['fault_window']))
        self.assertEqual(cfg.noise_std, 0.02)
        self.assertEqual(cfg.n_steps, int(round(config['eval']['duration'] / config['eval']['h'])))


class TestScenarios(EvaluationTestCase):

    def test_deterministic(self):
        cfg = evaluation.EvalConfig(n_scenarios=5, fault_window=(0.3, 2.0))
        a = evaluation.make_scenarios(cfg, 11)
        b = evaluation.make_scenarios(cfg, 11)
        for s, t in zip(a, b):
            self.assertArrayEqual(s.initial_condition, t.initial_condition)
            self.assertEqual(s.fault, t.fault)
        c = evaluation.make_scenarios(cfg, 12)
        self.assertFalse(np.array_equal(a[0].initial_condition, c[0].initial_condition))

    def test_fault_mixes(self):
        none = evaluation.EvalConfig(n_scenarios=4, fault_mix='none')
        self.assertTrue(all(s.fault is None for s in evaluation.make_scenarios(none, 0)))
        self.assertEqual(none.conditions, (rules.NO_FAULT,))

        sensor_range = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
        worst = evaluation.EvalConfig(n_scenarios=20, fault_mix='max_range', sensor_range=sensor_range)
        for s in evaluation.make_scenarios(worst, 0):
            self.assertEqual(s.fault.mode, rules.CONSTANT)
            self.assertEqual(s.fault.value, sensor_range[s.fault.channel])
            self.assertTrue(0.3 - 1e-9 <= s.fault.fault_time <= 2.0 + 1e-9)

        # the same sensors and times are drawn under both fault mixes
        mixed = evaluation.make_scenarios(evaluation.EvalConfig(n_scenarios=20), 0)
        for s, t in zip(mixed, evaluation.make_scenarios(worst, 0)):
            self.assertEqual((s.fault.sensor_index, s.fault.fault_time), (t.fault.sensor_index, t.fault.fault_time))
            self.assertArrayEqual(s.initial_condition, t.initial_condition)


class TestSuite(EvaluationTestCase):

    def test_row_counts(self):
        report = evaluation.run_suite(self.params, self.controllers(), self.cfg, 0, self.w)
        self.assertEqual(len(report.rows), 2 * 2 * 2)
        self.assertEqual(len(report.select('dftc', rules.FAULT)), 2)
        for row in report.select('baseline', rules.FAULT) + report.select('baseline', rules.NO_FAULT):
            if not row.diverged:
                self.assertEqual(row.rho, 1.0)

        cfg = evaluation.EvalConfig(n_scenarios=2, duration=1.0, fault_mix='none',
                                    controllers=('baseline', 'dftc'))
        report = evaluation.run_suite(self.params, self.controllers(), cfg, 0, self.w)
        self.assertEqual(len(report.rows), 4)
        self.assertTrue(all(r.condition == rules.NO_FAULT for r in report.rows))

    def test_baseline_in_every_slot(self):
        controllers = OrderedDict([('baseline', BaselineController(self.gain)),
                                   ('dftc', BaselineController(self.gain))])
        report = evaluation.run_suite(self.params, controllers, self.cfg, 1, self.w)
        summary = evaluation.summarize(report)
        for condition in rules.CONDITIONS:
            if summary['excluded']['dftc'][condition] == 0:
                self.assertEqual(summary['mean_rho']['dftc'][condition], 1.0)
                self.assertEqual(summary['std_rho']['dftc'][condition], 0.0)

    def test_normalised_cost_ignores_weight_scale(self):
        a = evaluation.run_suite(self.params, self.controllers(), self.cfg, 0, self.w)
        b = evaluation.run_suite(self.params, self.controllers(), self.cfg, 0, self.w.scaled(7.0))
        for ra, rb in zip(a.rows, b.rows):
            if ra.rho is None:
                self.assertIsNone(rb.rho)
            else:
                self.assertAlmostEqual(ra.rho, rb.rho, delta=1e-12 * max(1.0, abs(ra.rho)))

    def test_needs_baseline(self):
        with self.assertRaises(InvalidInputError):
            evaluation.run_suite(self.params, OrderedDict([('dftc', BaselineController(self.gain))]),
                                 self.cfg, 0, self.w)

    def test_summary_groups(self):
        report = evaluation.run_suite(self.params, self.controllers(), self.cfg, 0, self.w)
        summary = evaluation.summarize(report)
        self.assertEqual(summary['controllers'], ['baseline', 'dftc'])
        self.assertEqual(set(summary['by_sensor_kind']['dftc']), set(rules.SENSOR_KIND.values()))
        n_by_kind = sum(stats['n'] for stats in summary['by_sensor_kind']['dftc'].values())
        self.assertEqual(n_by_kind, 2)
        self.assertEqual(report.diverged_fraction('baseline'), 0.0)


class TestExport(EvaluationTestCase):

    def read_runs(self):
        with open(os.path.join(self.out, 'runs.csv')) as f:
            return list(csv.DictReader(f))

    def test_empty_report(self):
        cfg = evaluation.EvalConfig(n_scenarios=0, controllers=('baseline', 'dftc'))
        report = evaluation.run_suite(self.params, self.controllers(), cfg, 0, self.w)
        evaluation.export_report(report, self.out)
        with open(os.path.join(self.out, 'runs.csv')) as f:
            self.assertEqual(f.read(), ','.join(rules.RUNS_COLUMNS) + '\n')
        with open(os.path.join(self.out, 'report.json')) as f:
            summary = json.load(f)
        self.assertIsNone(summary['mean_rho']['dftc']['fault'])
        self.assertEqual(summary['n']['dftc']['fault'], 0)

    def test_aggregates_match_runs(self):
        report = evaluation.run_suite(self.params, self.controllers(), self.cfg, 3, self.w)
        written = evaluation.export_report(report, self.out)
        self.assertEqual([os.path.basename(f) for f in written], ['report.json', 'runs.csv'])
        with open(os.path.join(self.out, 'report.json')) as f:
            summary = json.load(f)
        rows = self.read_runs()
        self.assertEqual(len(rows), 8)
        for controller in ('baseline', 'dftc'):
            for condition in rules.CONDITIONS:
                rhos = [float(r['rho']) for r in rows if r['controller'] == controller
                        and r['condition'] == condition and r['diverged'] == 'false' and r['rho']]
                if rhos:
                    self.assertAlmostEqual(summary['mean_rho'][controller][condition], np.mean(rhos), places=12)
        faulted = [r for r in rows if r['condition'] == 'fault']
        self.assertTrue(all(r['fault_sensor'] for r in faulted))
        self.assertTrue(all(not r['fault_sensor'] for r in rows if r['condition'] == 'no_fault'))

    def test_trajectory_dump(self):
        report = evaluation.run_suite(self.params, self.controllers(record_features=True), self.cfg, 0, self.w)
        evaluation.export_report(report, self.out, dump_traj=True)
        names = sorted(f for f in os.listdir(self.out) if f.startswith('traj_'))
        self.assertEqual(len(names), 8)
        with open(os.path.join(self.out, 'traj_0_dftc_fault.csv')) as f:
            header = next(csv.reader(f))
        self.assertEqual(header, list(rules.TRAJECTORY_COLUMNS) + evaluation.feature_columns(3))
        self.assertEqual(header[-1], 'f6_2')
        with open(os.path.join(self.out, 'traj_1_baseline_no_fault.csv')) as f:
            lines = f.read().splitlines()
        self.assertEqual(lines[0].split(','), list(rules.TRAJECTORY_COLUMNS))
        self.assertEqual(len(lines), 101)


class TestTiming(EvaluationTestCase):

    def test_single_call(self):
        ctrl = DftcController(self.model, 5.0)
        mean, worst = evaluation.timing_stats(ctrl, np.zeros((3, 6)), n_calls=1)
        self.assertEqual(mean, worst)
        self.assertGreaterEqual(mean, 0.0)
        self.assertEqual(len(ctrl.window()), 0)
        with self.assertRaises(InvalidInputError):
            evaluation.timing_stats(ctrl, np.zeros((0, 6)))

    def test_features_are_not_timed(self):
        ctrl = DftcController(self.model, 5.0, record_features=True)
        with patch.object(nn, 'forward_with_features', side_effect=AssertionError('features recorded')):
            evaluation.timing_stats(ctrl, np.zeros((3, 6)), n_calls=4)
        self.assertTrue(ctrl.record_features)
        ctrl.act(np.zeros(6))
        self.assertEqual(ctrl.last_features.shape, (6 * self.model.hidden,))

    def test_timing_is_exported(self):
        controllers = self.controllers()
        report = evaluation.run_suite(self.params, controllers, self.cfg, 0, self.w)
        evaluation.time_controllers(report, controllers, 3)
        self.assertEqual(list(report.timing), ['baseline', 'dftc'])
        self.assertEqual(report.timing['dftc']['n_calls'], 3)
        evaluation.export_report(report, self.out)
        with open(os.path.join(self.out, 'timing.json')) as f:
            self.assertEqual(set(json.load(f)), {'baseline', 'dftc'})


if __name__ == '__main__':
    unittest.main()
