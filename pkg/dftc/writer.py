"""
File output for the pipeline stages. Every file is first written to a
temporary file in the destination directory and then moved into place, so
that two workers with the same output path never leave a corrupted file.
"""
import csv
import io
import json
import os
import shutil
import tempfile

from adsputils import setup_logging

logger = setup_logging(__name__)


def write_to_temp_file(payload, temp_path='/tmp/', json_format=True):
    """
    Writes the received payload to a temporary file using the temporary file lib

    :param payload: text, or a JSON-serialisable object when json_format is set
    :param temp_path: path to write the temporary file
    :param json_format: whether the given content is in json format
    :return: the temporary file name written to disk
    """

    with tempfile.NamedTemporaryFile(mode='w', dir=temp_path, encoding='utf-8',
                                     newline='', delete=False) as temp_file:
        temp_file_name = temp_file.name
        try:
            if json_format:
                json.dump(payload, temp_file, indent=1, sort_keys=True, allow_nan=False)
                temp_file.write('\n')
            else:
                temp_file.write(payload)
        except (TypeError, ValueError):
            temp_file.close()
            os.remove(temp_file_name)
            raise

    logger.debug('Temp file name: %s', temp_file_name)

    return temp_file_name


def move_temp_file_to_file(temp_file_name, new_file_name):
    """
    Moves the temporary file to the wanted name. The temporary file is removed
    when the move fails.

    :param temp_file_name: name of the temporary file
    :param new_file_name: name wanted for the final file
    :return: no return
    """

    try:
        shutil.move(temp_file_name, new_file_name)
    except (IOError, OSError) as err:
        logger.error('Unexpected error moving temporary file %s to %s: %s',
                     temp_file_name, new_file_name, err)
        try:
            os.remove(temp_file_name)
        except OSError:
            pass
        raise

    logger.debug('Succeeded to move: %s to %s', temp_file_name, new_file_name)


def write_file(file_name, payload, json_format=True):
    """
    A wrapper function for two separate functions, with the aim of:
      1. creating a temporary file with the payload as content
      2. moving the temporary file to the wanted file name

    :param file_name: desired file name for output
    :param payload: the content to be written to disk
    :param json_format: whether or not the payload is in json format
    :return: no return
    """

    temp_path = os.path.dirname(os.path.abspath(file_name))
    if not os.path.exists(temp_path):
        os.makedirs(temp_path)
    temp_file_name = write_to_temp_file(payload, temp_path=temp_path,
                                        json_format=json_format)
    move_temp_file_to_file(temp_file_name, file_name)


def csv_text(header, rows):
    """
    Renders rows as CSV text with '\\n' line endings

    :param header: list of column names
    :param rows: iterable of lists of already formatted cells
    :return: the CSV document as a string
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator='\n')
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def write_csv(file_name, header, rows):
    write_file(file_name, csv_text(header, rows), json_format=False)
    logger.debug('Wrote CSV: %s', file_name)
