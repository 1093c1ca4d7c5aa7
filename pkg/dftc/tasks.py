from __future__ import absolute_import, unicode_literals
import os
from collections import OrderedDict

from kombu import Queue

import dftc.app as app_module
from dftc import checker, evaluation, nn, observability, policy, rules, writer
from dftc.baseline import gain_from_config
from dftc.dataset import (AugmentationConfig, augment, generate_trajectories,
                          load_dataset, save_dataset, split, WindowSet)
from dftc.exceptions import DivergenceError, UnobservableError
from dftc.models import CostWeights, PlantParams, SensorConfig
from dftc.utils import RunConfig, fmt

# ============================= INITIALIZATION ==================================== #

proj_home = os.path.realpath(os.path.join(os.path.dirname(__file__), '../'))
app = app_module.DFTCCelery('dftc-pipeline', proj_home=proj_home)
logger = app.logger


app.conf.CELERY_QUEUES = (
    Queue('gramian', app.exchange, routing_key='gramian'),
    Queue('generate', app.exchange, routing_key='generate'),
    Queue('augment', app.exchange, routing_key='augment'),
    Queue('split', app.exchange, routing_key='split'),
    Queue('train', app.exchange, routing_key='train'),
    Queue('evaluate', app.exchange, routing_key='evaluate'),
)


# ============================= HELPERS =========================================== #


def _plant_and_gain(config):
    params = PlantParams.from_dict(config['plant'])
    gain = gain_from_config(params, config['baseline'])
    writer.write_file(config.path('gain'), gain.toJSON())
    return params, gain


def _weights(config):
    return CostWeights(tuple(config['baseline']['Q']), tuple(config['baseline']['R']))


def _window_count(ds, m):
    return sum(max(t.length - m + 1, 0) for t in ds.trajectories)


# ============================= TASKS ============================================= #


@app.task(queue='gramian')
def task_gramian(payload):
    """
    Ranks the full configuration, every single-sensor drop, the configured
    extra subsets and (if gramian.search_k is set) every k-sensor subset.
    Raises UnobservableError after writing the table when the full or a
    single-drop configuration is unobservable.
    """
    config = RunConfig.fromJSON(payload)
    section = config['gramian']
    params, gain = _plant_and_gain(config)
    cfg = observability.config_from_section(section, config.seed)
    probe = observability.probe_system(params, cfg, gain)
    logger.info('Computing channel Gramians over %s base points', len(cfg.base_points))
    G = observability.channel_gramians(probe, cfg)

    configs = observability.default_configs()
    configs += [SensorConfig(frozenset(sensors)) for sensors in section['extra_configs']]
    rows = observability.rank_configurations(probe, configs, cfg, G=G)
    if section['search_k']:
        rows += observability.best_subsets(probe, section['search_k'], cfg, G=G)

    writer.write_csv(config.path('gramian'), rules.RANKING_COLUMNS,
                     [[r.config.label, r.config.describe(),
                       '' if r.J is None else fmt(r.J), r.status] for r in rows])

    required = set(c.label for c in observability.default_configs())
    failed = [r.config.label for r in rows
              if r.status == observability.UNOBSERVABLE and r.config.label in required]
    if failed:
        raise UnobservableError('Unobservable sensor configurations: {0}'.format(', '.join(failed)))
    return OrderedDict([('rows', len(rows)), ('best', rows[0].config.label if rows else None)])


@app.task(queue='generate')
def task_generate(payload):
    """Rolls out the baseline and writes the raw dataset"""
    config = RunConfig.fromJSON(payload)
    section = config['dataset']
    params, gain = _plant_and_gain(config)
    ds = generate_trajectories(params, gain, section['n_traj'], config.seed,
                               duration=section['duration'], h=section['h'])
    save_dataset(ds, config.path('dataset_raw'))
    return OrderedDict([('trajectories', len(ds)), ('excluded', ds.excluded),
                        ('windows', _window_count(ds, section['window']))])


@app.task(queue='augment')
def task_augment(payload):
    """Appends the faulted copies and writes the augmented dataset"""
    config = RunConfig.fromJSON(payload)
    section = config['augment']
    path = config.path('dataset_raw')
    checker.check_inputs([path], 'augment')
    cfg = AugmentationConfig(section['copies_per_trajectory'], tuple(section['fault_window']), config.seed)
    ds = augment(load_dataset(path), cfg)
    save_dataset(ds, config.path('dataset_augmented'))
    return OrderedDict([('trajectories', len(ds)),
                        ('windows', _window_count(ds, config['dataset']['window']))])


@app.task(queue='split')
def task_split(payload):
    """Assigns train/val/test and writes the final dataset"""
    config = RunConfig.fromJSON(payload)
    path = config.path('dataset_augmented')
    checker.check_inputs([path], 'split')
    ds = split(load_dataset(path), config.seed)
    save_dataset(ds, config.path('dataset'))
    summary = OrderedDict([('trajectories', len(ds))])
    summary.update(ds.counts())
    return summary


@app.task(queue='train')
def task_train(payload, fnn=False):
    """
    Trains the DFTC network (and the FNN when asked) on the split dataset
    and writes model JSON plus learning curve CSV
    """
    config = RunConfig.fromJSON(payload)
    dataset_path = config.path('dataset')
    checker.check_inputs([dataset_path], 'train')
    ds = load_dataset(dataset_path)
    params = PlantParams.from_dict(config['plant'])

    section = config['train']
    cfg = nn.TrainConfig.from_section(section, config.seed)
    mp = nn.init_model(nn.DFTC, config.seed, hidden=section['hidden'], window=config['dataset']['window'],
                       fc_sizes=section['fc_sizes'], normalizer=ds.normalizer)
    mp, curve = nn.train(mp, ds, cfg)
    nn.save_model(mp, config.path('model'))
    nn.save_curve(curve, config.path('curve'))
    summary = OrderedDict([('epochs', len(curve)), ('param_count', mp.param_count),
                           ('windows', len(WindowSet(ds.subset(rules.TRAIN_SPLIT), mp.window))),
                           ('val_loss', curve[-1][2] if curve else None)])

    if fnn:
        fnn_section = config['fnn_train']
        fnn_cfg = nn.TrainConfig.from_section(fnn_section, config.seed)
        controller, fnn_curve = policy.train_fnn(ds, fnn_cfg, params.i_max, fc_sizes=fnn_section['fc_sizes'])
        nn.save_model(controller.model, config.path('fnn_model'))
        nn.save_curve(fnn_curve, config.path('fnn_curve'))
        summary['fnn_val_loss'] = fnn_curve[-1][2] if fnn_curve else None
    return summary


@app.task(queue='evaluate')
def task_evaluate(payload, dump_traj=False):
    """
    Runs the scenario suite and writes report.json, runs.csv, timing.json and,
    with dump_traj, the per-run trajectories
    """
    config = RunConfig.fromJSON(payload)
    cfg = evaluation.EvalConfig.from_sections(config['eval'], config['augment'],
                                              noise_std=config['plant']['noise_std'])
    model_paths = {'dftc': config.path('model'), 'fnn': config.path('fnn_model')}
    checker.check_inputs([model_paths[name] for name in cfg.controllers if name in model_paths], 'eval')
    params, gain = _plant_and_gain(config)

    controllers = OrderedDict()
    for name in cfg.controllers:
        if name == 'baseline':
            controllers[name] = policy.make_controller(name, gain, params.i_max)
        elif name == 'dftc':
            controllers[name] = policy.make_controller(name, nn.load_model(model_paths[name]), params.i_max,
                                                       record_features=dump_traj)
        else:
            controllers[name] = policy.make_controller(name, nn.load_model(model_paths[name]), params.i_max)

    report = evaluation.run_suite(params, controllers, cfg, config.seed, _weights(config))
    evaluation.time_controllers(report, controllers, cfg.timing_calls)
    evaluation.export_report(report, config.path('report'), dump_traj=dump_traj)

    for name in report.controllers:
        fraction = report.diverged_fraction(name)
        if fraction > cfg.max_diverged_fraction:
            raise DivergenceError('{0} diverged in {1:.1%} of runs (limit {2:.1%})'.format(
                name, fraction, cfg.max_diverged_fraction))
    summary = evaluation.summarize(report)
    return OrderedDict([('runs', len(report.rows)), ('mean_rho', summary['mean_rho'])])
