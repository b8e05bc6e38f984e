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

"""common operations/methods from i2preg tool."""

import glob
import logging
import os
from datetime import datetime
from multiprocessing import Pool
from typing import Callable, Iterable, List

import psutil as ps

from config import I2PREG_CFG
from src.commons import constants as const
from src.commons.exception import IoError

LOGGER = logging.getLogger(const.ROOT)


def log_cleanup(log_dir: str = None) -> None:
    """
    Create backup of log/latest.

    Renames the latest folder to a name with current timestamp and creates a folder named latest.
    :param log_dir: Log root directory, default is <cwd>/log.
    """
    log_dir = log_dir or const.LOG_DIR
    now = str(datetime.now()).replace(" ", "-").replace(":", "_").replace(".", "_")
    latest = os.path.join(log_dir, "latest")
    if os.path.isdir(latest) and glob.glob(latest + "/*"):
        os.rename(latest, os.path.join(log_dir, now))
        LOGGER.info("Backup directory: %s", os.path.join(log_dir, now))
    os.makedirs(latest, exist_ok=True)


def log_resource_usage() -> None:
    """Cpu and memory usage."""
    cpu_usages = ps.cpu_percent()
    memory_usages = ps.virtual_memory().percent
    LOGGER.debug("Client: CPU %s%%, memory %s%%", cpu_usages, memory_usages)
    if cpu_usages > 85.0:
        LOGGER.warning("Client: CPU Usages are: %s", cpu_usages)
    if memory_usages > 85.0:
        available_memory = (ps.virtual_memory().available * 100) / ps.virtual_memory().total
        LOGGER.warning(
            "Client: Memory usages are: %s, available memory is: %s", memory_usages, available_memory
        )


def default_jobs() -> int:
    """Worker count: configured value, else the physical core count."""
    if I2PREG_CFG.jobs and int(I2PREG_CFG.jobs) > 0:
        return int(I2PREG_CFG.jobs)
    return ps.cpu_count(logical=False) or 1


def run_parallel(func: Callable, items: Iterable, jobs: int = 1) -> List:
    """
    Map func over items, in worker processes when jobs > 1.

    Results keep the input order so serial and parallel runs are interchangeable.
    :param func: Picklable callable taking one item.
    :param items: Work items.
    :param jobs: Worker processes.
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        results = []
        for count, item in enumerate(items, start=1):
            results.append(func(item))
            if count % max(int(I2PREG_CFG.resource_log_interval), 1) == 0:
                log_resource_usage()
        return results
    workers = min(jobs, len(items))
    LOGGER.info("Running %s items on %s workers", len(items), workers)
    with Pool(processes=workers) as pool:
        results = pool.map(func, items)
    log_resource_usage()
    return results


def ensure_dir(dpath: str) -> str:
    """Create directory dpath if missing, raising IoError when that is impossible."""
    try:
        os.makedirs(dpath, exist_ok=True)
    except OSError as error:
        raise IoError(f"Cannot create directory {dpath}: {error}") from error
    if not os.access(dpath, os.W_OK):
        raise IoError(f"Directory {dpath} is not writable.")
    return dpath
