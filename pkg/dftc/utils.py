"""
Helpers used across the pipeline stages: the run configuration that travels
with every task, named random streams derived from the global seed, and
number formatting for the text outputs.
"""
import copy
import os
import json
import numbers
import zlib

import numpy as np
from adsputils import setup_logging

from dftc import rules
from dftc.exceptions import ConfigError

logger = setup_logging(__name__)

# run-config section -> config.py constant
SECTIONS = {
    'plant': 'PLANT',
    'gramian': 'GRAMIAN',
    'baseline': 'BASELINE',
    'dataset': 'DATASET',
    'augment': 'AUGMENT',
    'train': 'TRAIN',
    'fnn_train': 'FNN_TRAIN',
    'eval': 'EVAL',
    'paths': 'PATHS',
}


class RunConfig(object):
    """
    All choices of one experiment: the config.py defaults, overlaid with the
    JSON file given on the command line and with ``--set`` overrides. Keys
    that do not exist in the defaults are rejected.
    """

    def __init__(self, sections, seed=0):
        """
        :param sections: dict of lower-case section name -> dict of values
        :param seed: global seed every random stream derives from
        """
        self.sections = copy.deepcopy(sections)
        self.seed = check_seed(seed)

    @classmethod
    def from_app(cls, app):
        """
        Builds the default configuration from the application's conf

        :param app: DFTCCelery instance
        :return: RunConfig
        """
        sections = dict((name, copy.deepcopy(dict(app.conf[const])))
                        for name, const in SECTIONS.items())
        return cls(sections, seed=app.conf.get('SEED', 0))

    def __getitem__(self, section):
        return self.sections[section]

    def load(self, config_file):
        """
        Overlays a JSON configuration file

        :param config_file: path to the JSON file
        :return: self
        """
        try:
            with open(config_file, 'r') as f:
                content = json.load(f)
        except (IOError, OSError) as err:
            raise ConfigError('Cannot read config file {0}: {1}'.format(config_file, err))
        except ValueError as err:
            raise ConfigError('Config file {0} is not valid JSON: {1}'.format(config_file, err))

        if not isinstance(content, dict):
            raise ConfigError('Config file {0} must hold a JSON object'.format(config_file))

        logger.debug('Loading run configuration from: %s', config_file)
        for section, values in content.items():
            if section == 'seed':
                self.seed = check_seed(values)
                continue
            if section not in self.sections:
                raise ConfigError('Unknown config section: {0}'.format(section))
            if not isinstance(values, dict):
                raise ConfigError('Config section {0} must be an object'.format(section))
            for key, value in values.items():
                self.set(section, key, value)
        return self

    def set(self, section, key, value):
        if section not in self.sections:
            raise ConfigError('Unknown config section: {0}'.format(section))
        if key not in self.sections[section]:
            raise ConfigError('Unknown config key: {0}.{1}'.format(section, key))
        self.sections[section][key] = check_type(section, key, self.sections[section][key], value)

    def apply(self, overrides):
        """
        Applies ``section.key=value`` overrides. Values are parsed as JSON
        when possible, otherwise taken as plain strings.

        :param overrides: list of override strings
        :return: self
        """
        for override in overrides or []:
            if '=' not in override:
                raise ConfigError('Override must look like section.key=value: {0}'.format(override))
            name, raw = override.split('=', 1)
            if name == 'seed':
                self.seed = check_seed(parse_value(raw))
                continue
            if '.' not in name:
                raise ConfigError('Override must look like section.key=value: {0}'.format(override))
            section, key = name.split('.', 1)
            self.set(section, key, parse_value(raw))
            logger.debug('Override %s.%s=%s', section, key, raw)
        return self

    def path(self, key):
        """
        :param key: name of an entry in the paths section
        :return: the output-directory-relative path of that file
        """
        return os.path.join(self.sections['paths']['out'], self.sections['paths'][key])

    def toJSON(self):
        payload = copy.deepcopy(self.sections)
        payload['seed'] = self.seed
        return payload

    @classmethod
    def fromJSON(cls, payload):
        payload = dict(payload)
        seed = payload.pop('seed', 0)
        return cls(payload, seed=seed)


def parse_value(raw):
    try:
        return json.loads(raw)
    except ValueError:
        return raw


def check_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, numbers.Integral) or seed < 0 or seed >= 2 ** 64:
        raise ConfigError('Seed must be an unsigned 64-bit integer, got {0!r}'.format(seed))
    return int(seed)


def check_type(section, key, default, value):
    """
    Validates that an override has the same kind as its default

    :return: the (possibly converted) value
    """
    where = '{0}.{1}'.format(section, key)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError('{0} expects true/false, got {1!r}'.format(where, value))
        return value
    if isinstance(default, numbers.Integral):
        if isinstance(value, bool) or not isinstance(value, numbers.Integral):
            raise ConfigError('{0} expects an integer, got {1!r}'.format(where, value))
        return int(value)
    if isinstance(default, numbers.Real):
        if isinstance(value, bool) or not isinstance(value, numbers.Real):
            raise ConfigError('{0} expects a number, got {1!r}'.format(where, value))
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError('{0} expects a list, got {1!r}'.format(where, value))
        return value
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError('{0} expects a string, got {1!r}'.format(where, value))
        return value
    return value


def stream_rng(seed, stream, *keys):
    """
    Random generator for a named sub-stream of the global seed. Extra keys
    (e.g. a trajectory number) give every item its own independent stream,
    so results do not depend on processing order.

    :param seed: global seed
    :param stream: one of rules.STREAMS
    :param keys: further non-negative integers
    :return: numpy Generator
    """
    if stream not in rules.STREAMS:
        raise ValueError('Unknown random stream: {0}'.format(stream))
    entropy = [int(seed), zlib.crc32(stream.encode('utf-8'))] + [int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def fmt(value):
    """Formats a float with 17 significant digits (exact round-trip)"""
    return format(float(value), rules.FLOAT_FORMAT)


def fmt_optional(value):
    return '' if value is None else fmt(value)
