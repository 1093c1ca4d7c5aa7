import csv
import json
import os
import unittest

from mock import patch

from dftc import nn, tasks
from dftc.dataset import load_dataset
from dftc.exceptions import DivergenceError, MissingInputError, UnobservableError
from dftc.tests import test_base


class TestWorkers(test_base.TestUnit):
    """
    Runs the pipeline tasks in-process on a small configuration
    """

    def read_csv(self, key):
        with open(self.config.path(key)) as f:
            return list(csv.reader(f))

    def run_data_stages(self):
        payload = self.config.toJSON()
        tasks.task_generate(payload)
        tasks.task_augment(payload)
        return tasks.task_split(payload)

    def test_task_gramian(self):
        self.config.apply(['gramian.extra_configs=[[1, 2, 3, 4]]'])
        summary = tasks.task_gramian(self.config.toJSON())
        self.assertEqual(summary['rows'], 8)
        self.assertEqual(summary['best'], 'full')
        rows = self.read_csv('gramian')
        self.assertEqual(rows[0], ['config', 'active_sensors', 'J', 'status'])
        self.assertEqual(len(rows), 9)
        self.assertIn(['k4:1-2-3-4', '1 2 3 4'], [row[:2] for row in rows])
        with open(self.config.path('gain')) as f:
            gain = json.load(f)
        self.assertEqual(len(gain['K']), 2)

    def test_task_gramian_unobservable(self):
        with patch('dftc.observability.observability_measure', side_effect=UnobservableError('singular')):
            with self.assertRaises(UnobservableError) as context:
                tasks.task_gramian(self.config.toJSON())
        self.assertIn('full', str(context.exception))
        rows = self.read_csv('gramian')
        self.assertEqual(len(rows), 8)
        self.assertTrue(all(row[2] == '' and row[3] == 'unobservable' for row in rows[1:]))

    def test_data_stages(self):
        summary = self.run_data_stages()
        self.assertEqual(summary['trajectories'], 30)
        self.assertEqual(summary['train'], 24)
        self.assertEqual(summary['val'], 3)
        self.assertEqual(summary['test'], 3)

        raw = load_dataset(self.config.path('dataset_raw'))
        self.assertEqual(len(raw), 10)
        self.assertEqual(raw.trajectories[0].length, 250)
        final = load_dataset(self.config.path('dataset'))
        self.assertEqual(len(final.originals()), 10)
        self.assertIsNotNone(final.normalizer)

    def test_missing_input(self):
        with self.assertRaises(MissingInputError):
            tasks.task_augment(self.config.toJSON())
        with self.assertRaises(MissingInputError):
            tasks.task_evaluate(self.config.toJSON())

    def test_train_and_evaluate(self):
        self.run_data_stages()
        payload = self.config.toJSON()
        summary = tasks.task_train(payload, fnn=True)
        self.assertEqual(summary['epochs'], 1)
        self.assertEqual(summary['param_count'], nn.load_model(self.config.path('model')).param_count)
        self.assertEqual(nn.load_model(self.config.path('fnn_model')).kind, nn.FNN)
        self.assertEqual(len(self.read_csv('curve')), 2)
        self.assertEqual(len(self.read_csv('fnn_curve')), 2)

        summary = tasks.task_evaluate(payload, dump_traj=True)
        self.assertEqual(summary['runs'], 2 * 3 * 2)
        report_dir = self.config.path('report')
        for name in ('report.json', 'runs.csv', 'timing.json', 'traj_0_dftc_fault.csv'):
            self.assertTrue(os.path.isfile(os.path.join(report_dir, name)), name)
        with open(os.path.join(report_dir, 'report.json')) as f:
            report = json.load(f)
        self.assertEqual(report['controllers'], ['baseline', 'dftc', 'fnn'])

    def run_pipeline(self, name, seed, model_stages=True):
        out = os.path.join(self.out, name)
        self.config.apply(['paths.out="{0}"'.format(out), 'seed={0}'.format(seed)])
        payload = self.config.toJSON()
        tasks.task_generate(payload)
        tasks.task_augment(payload)
        tasks.task_split(payload)
        if model_stages:
            tasks.task_train(payload, fnn=True)
            tasks.task_evaluate(payload)
        return out

    def read_bytes(self, out, *names):
        contents = []
        for name in names:
            with open(os.path.join(out, name), 'rb') as f:
                contents.append(f.read())
        return contents

    def test_same_seed_gives_identical_files(self):
        names = ['dataset_raw.csv', 'dataset_augmented.csv', 'dataset.csv', 'model_dftc.json',
                 'model_fnn.json', 'curve_dftc.csv', 'curve_fnn.csv', 'gain.json',
                 os.path.join('report', 'report.json'), os.path.join('report', 'runs.csv')]
        first = self.run_pipeline('first', 11)
        second = self.run_pipeline('second', 11)
        self.assertEqual(self.read_bytes(first, *names), self.read_bytes(second, *names))

        other = self.run_pipeline('other', 12, model_stages=False)
        for name in names[:3]:
            self.assertNotEqual(self.read_bytes(first, name), self.read_bytes(other, name), name)

    def test_divergence_limit(self):
        self.run_data_stages()
        self.config.apply(['eval.controllers=["baseline"]', 'eval.divergence_bound=1e-9',
                           'eval.max_diverged_fraction=0.5'])
        with self.assertRaises(DivergenceError):
            tasks.task_evaluate(self.config.toJSON())
        self.assertTrue(os.path.isfile(os.path.join(self.config.path('report'), 'runs.csv')))


if __name__ == '__main__':
    unittest.main()
