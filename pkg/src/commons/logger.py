#!/usr/bin/python
# -*- coding: utf-8 -*-
#
# Copyright (c) 2022 Seagate Technology LLC and/or its Affiliates
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU Affero General Public License as published
# by the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
# GNU Affero General Public License for more details.
# You should have received a copy of the GNU Affero General Public License
# along with this program. If not, see <https://www.gnu.org/licenses/>.
#
# For any questions about this software or licensing,
# please email opensource@seagate.com or cortx-questions@seagate.com.
#
#
"""Logger for i2preg tool: console and compressed rotating file handlers, tagged by scene."""

import contextlib
import datetime
import gzip
import logging
import os
import shutil
from logging import handlers

from config import I2PREG_CFG
from src.commons import constants as const

# Scene name stamped on every record, NO_SCENE outside register/evaluate.
NO_SCENE = "-"
_CURRENT_SCENE = {"name": NO_SCENE}


class SceneFilter(logging.Filter):
    """Add the scene currently processed by this process as record.scene."""

    def filter(self, record):
        record.scene = _CURRENT_SCENE["name"]
        return True


@contextlib.contextmanager
def scene_context(name: str):
    """
    Tag log records emitted inside the block with a scene name.

    Contexts nest; the previous name is restored on exit. Worker processes keep their own tag.
    :param name: Scene name.
    """
    previous = _CURRENT_SCENE["name"]
    _CURRENT_SCENE["name"] = name
    try:
        yield name
    finally:
        _CURRENT_SCENE["name"] = previous


class CompressedRotatingFileHandler(handlers.RotatingFileHandler):
    """Rotating file handler gzip-compressing rolled over logs."""

    def __init__(self, filename, maxbyte, backupcount):
        """
        Initialize rotating file handler.

        :param filename: Filename of the log.
        :param maxbyte: Rollover occurs whenever the current log file is nearly maxBytes in
        length.
        :param backupcount: count of the max rotation/rollover of logs.
        """
        super().__init__(filename=filename, maxBytes=maxbyte, backupCount=backupcount)

    def rotation_filename(self, default_name):
        """
        Rotated log file name, e.g. i2preg_console_<time>.INFO.1-YYYY-MM-DD.gz.

        :param default_name: name of the base file
        """
        return f"{default_name}-{datetime.date.today()}.gz"

    def rotate(self, source, dest):
        """
        Compress the current log into dest and drop it.

        :param source: current log file path.
        :param dest: destination path for rotated file.
        """
        with open(source, "rb") as sf_obj, gzip.open(dest, "wb", 9) as df_obj:
            shutil.copyfileobj(sf_obj, df_obj)
        os.remove(source)


def _attach(logger: logging.Logger, handler: logging.Handler, level: int) -> logging.Handler:
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(const.FORMATTER))
    handler.addFilter(SceneFilter())
    logger.addHandler(handler)
    return handler


def file_handler(log_path: str, rotate: bool = True) -> logging.Handler:
    """
    File handler of a driver log, rotating and compressing at I2PREG_CFG.log_size bytes.

    :param log_path: Log file path, its directory is created if missing.
    :param rotate: Plain FileHandler if False.
    """
    os.makedirs(os.path.dirname(log_path) or ".", exist_ok=True)
    if rotate:
        return CompressedRotatingFileHandler(
            log_path, maxbyte=int(I2PREG_CFG.log_size), backupcount=int(I2PREG_CFG.log_backup_count)
        )
    return logging.FileHandler(filename=log_path)


def initialize_loghandler(logger, name, verbose=False, log_dir=None):
    """
    Initialize driver logging with stream and file handlers.

    Handlers attached by a previous call are dropped first, so repeated runs in one
    interpreter do not duplicate records.

    :param logger: Logger to configure.
    :param name: Base name of the log file.
    :param verbose: DEBUG level if True else INFO.
    :param log_dir: Log root directory, default is <cwd>/log.
    :return: Log file path.
    """
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()
    level = logging.DEBUG if verbose else logging.INFO
    suffix = logging.getLevelName(level)
    log_path = os.path.join(log_dir or const.LOG_DIR, "latest", f"{name}_console_{const.DT_STRING}.{suffix}")
    logger.setLevel(level)
    _attach(logger, logging.StreamHandler(), level)
    _attach(logger, file_handler(log_path), level)
    return log_path
