#!/usr/bin/env python
import argparse
import sys
import time

from adsputils import setup_logging

from dftc import checker, tasks
from dftc.exceptions import DFTCError, MissingInputError
from dftc.utils import RunConfig

logger = setup_logging('run.py')

STAGES = ('gramian', 'gen', 'augment', 'split', 'train', 'eval', 'pipeline')


class ArgumentParser(argparse.ArgumentParser):
    """Reports usage errors with exit code 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write('{0}: error: {1}\n'.format(self.prog, message))
        sys.exit(1)


def build_parser():
    parser = ArgumentParser(description='Deep fault tolerant control pipeline.')

    parser.add_argument('command',
                        choices=STAGES,
                        help='Pipeline stage to run')

    parser.add_argument('-c',
                        '--config',
                        dest='config',
                        action='store',
                        type=str,
                        default=None,
                        help='JSON run configuration overlaid on the defaults')

    parser.add_argument('--seed',
                        dest='seed',
                        action='store',
                        type=int,
                        default=None,
                        help='Global seed (unsigned 64-bit)')

    parser.add_argument('--set',
                        dest='overrides',
                        action='append',
                        default=[],
                        metavar='SECTION.KEY=VALUE',
                        help='Override one configuration value; may be repeated')

    parser.add_argument('--fnn',
                        dest='fnn',
                        action='store_true',
                        default=False,
                        help='Also train the comparison FNN')

    parser.add_argument('--dump-traj',
                        dest='dump_traj',
                        action='store_true',
                        default=False,
                        help='Write one CSV per evaluation run, with LSTM block outputs')

    parser.add_argument('-o',
                        '--out',
                        dest='out',
                        action='store',
                        type=str,
                        default=None,
                        help='Output directory (paths.out)')

    parser.add_argument('--skip-train',
                        dest='skip_train',
                        action='store_true',
                        default=False,
                        help='pipeline: reuse the stored model files instead of training')

    return parser


def build_config(args):
    """
    Merges config.py defaults, the --config file and the command-line
    overrides, in that order

    :param args: parsed arguments
    :return: RunConfig
    """
    config = RunConfig.from_app(tasks.app)
    if args.config:
        config.load(args.config)
    config.apply(args.overrides)
    if args.seed is not None:
        config.apply(['seed={0}'.format(args.seed)])
    if args.out is not None:
        config.set('paths', 'out', args.out)
    return config


def run_stage(name, task, payload, **kwargs):
    """
    Runs one stage in-process and prints its summary line

    :return: the stage summary
    """
    logger.info('Starting stage %s', name)
    start = time.time()
    summary = task(payload, **kwargs)
    elapsed = time.time() - start
    counts = ' '.join('{0}={1}'.format(k, v) for k, v in summary.items())
    print('{0}: {1} ({2:.1f} s)'.format(name, counts, elapsed))
    logger.info('Finished stage %s in %.1f s', name, elapsed)
    return summary


def train_or_reuse(config, payload, fnn, skip_train):
    """
    Trains unless --skip-train is given; a missing model is then an error and
    a stale one is reused with a warning
    """
    if not skip_train:
        return run_stage('train', tasks.task_train, payload, fnn=fnn)

    models = [config.path('model')] + ([config.path('fnn_model')] if fnn else [])
    for model in models:
        update = checker.model_needs_training(model, config.path('dataset'))
        if update == checker.MISSING_MODEL:
            raise MissingInputError('--skip-train given but {0} does not exist'.format(model))
        if update == checker.STALE_MODEL:
            logger.warning('Reusing %s although the dataset is newer', model)
    print('train: skipped, reusing {0}'.format(', '.join(models)))
    return None


def run(args):
    """
    :param args: parsed arguments
    :return: no return; stage errors propagate
    """
    config = build_config(args)
    payload = config.toJSON()
    fnn = args.fnn or (args.command == 'pipeline' and 'fnn' in config['eval']['controllers'])

    if args.command == 'gramian':
        run_stage('gramian', tasks.task_gramian, payload)
    elif args.command == 'gen':
        run_stage('gen', tasks.task_generate, payload)
    elif args.command == 'augment':
        run_stage('augment', tasks.task_augment, payload)
    elif args.command == 'split':
        run_stage('split', tasks.task_split, payload)
    elif args.command == 'train':
        run_stage('train', tasks.task_train, payload, fnn=fnn)
    elif args.command == 'eval':
        run_stage('eval', tasks.task_evaluate, payload, dump_traj=args.dump_traj)
    else:
        run_stage('gen', tasks.task_generate, payload)
        run_stage('augment', tasks.task_augment, payload)
        run_stage('split', tasks.task_split, payload)
        train_or_reuse(config, payload, fnn, args.skip_train)
        run_stage('eval', tasks.task_evaluate, payload, dump_traj=args.dump_traj)


def main(argv=None):
    """
    :return: exit code; 0 success, 1 usage or input error, 2 domain violation
    """
    args = build_parser().parse_args(argv)
    try:
        run(args)
    except DFTCError as err:
        logger.error('%s failed: %s', args.command, err)
        sys.stderr.write('error: {0}\n'.format(err))
        return err.exit_code
    except Exception as err:
        logger.exception('Unexpected error in %s: %s', args.command, err)
        sys.stderr.write('error: {0}\n'.format(err))
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
