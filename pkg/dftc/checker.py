"""
Checks run before a stage: are its inputs on disk, and is a stored output
still current with respect to the inputs it was made from.
"""
import os
from datetime import datetime
from stat import ST_MTIME

from adsputils import setup_logging

from dftc.exceptions import MissingInputError

logger = setup_logging(__name__)

MISSING_MODEL = 'MISSING_MODEL'
STALE_MODEL = 'STALE_MODEL'


def file_last_modified_time(file_input):
    """
    Stats the given file to find the last modified time

    :param file_input: path to file
    :return: date time object of the last modified time
    """

    mtime = os.stat(file_input)[ST_MTIME]
    return datetime.fromtimestamp(mtime)


def check_inputs(paths, stage):
    """
    :param paths: files the stage reads
    :param stage: stage name, for the message
    :return: no return; raises MissingInputError naming the first absent file
    """
    for path in paths:
        if not os.path.isfile(path):
            raise MissingInputError('{0}: required input {1} does not exist'.format(stage, path))
        logger.debug('%s: found input %s', stage, path)


def model_needs_training(model_path, dataset_path):
    """
    Decides whether a stored model can be reused. The reasons are:
      1. MISSING_MODEL: there is no model file
      2. STALE_MODEL: the dataset was modified after the model was written

    The return value is None if neither is true.

    :param model_path: model JSON
    :param dataset_path: dataset the model was trained on
    :return: the keyword that describes why training is needed
    """
    if not os.path.isfile(model_path):
        return MISSING_MODEL

    if os.path.isfile(dataset_path):
        model_modified = file_last_modified_time(model_path)
        dataset_modified = file_last_modified_time(dataset_path)
        logger.debug('Model last modified: %s, dataset last modified: %s', model_modified, dataset_modified)
        if dataset_modified > model_modified:
            return STALE_MODEL

    return None
