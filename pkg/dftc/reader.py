"""
File input for the pipeline stages: JSON documents and CSV tables written by
writer.py. Malformed content is reported as a ParseError naming the file and
the line or field at fault.
"""
import csv
import json

from adsputils import setup_logging

from dftc.exceptions import MissingInputError, ParseError

logger = setup_logging(__name__)


def read_file(input_filename, json_format=True):
    """
    Read file

    :param input_filename: File name to be read
    :param json_format: whether the given content is in json format
    :return: File content
    """

    try:
        with open(input_filename, 'r', encoding='utf-8') as input_file:
            if json_format:
                content = json.load(input_file)
            else:
                content = input_file.read()
    except (IOError, OSError) as err:
        raise MissingInputError('Cannot read {0}: {1}'.format(input_filename, err))
    except ValueError as err:
        raise ParseError('{0} is not valid JSON: {1}'.format(input_filename, err))

    logger.debug('Read file name: %s', input_filename)

    return content


def read_csv(input_filename, header):
    """
    Reads a CSV table and checks its header and column count

    :param input_filename: file to read
    :param header: expected list of column names
    :return: list of (line number, row) pairs for the data rows
    """
    text = read_file(input_filename, json_format=False)
    rows = []
    for line_number, row in enumerate(csv.reader(text.splitlines()), start=1):
        if line_number == 1:
            if row != list(header):
                raise ParseError('{0}, line 1: unexpected header {1}'.format(input_filename, row))
            continue
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError('{0}, line {1}: expected {2} columns, got {3}'.format(
                input_filename, line_number, len(header), len(row)))
        rows.append((line_number, row))
    if not text:
        raise ParseError('{0}, line 1: missing header'.format(input_filename))
    return rows


def parse_float(value, input_filename, line_number, column):
    try:
        return float(value)
    except ValueError:
        raise ParseError('{0}, line {1}: column {2} is not a number: {3!r}'.format(
            input_filename, line_number, column, value))


def parse_int(value, input_filename, line_number, column):
    try:
        return int(value)
    except ValueError:
        raise ParseError('{0}, line {1}: column {2} is not an integer: {3!r}'.format(
            input_filename, line_number, column, value))
