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
"""Run image to point cloud registration commands on synthetic scene bundles."""

import logging
import os
import sys

from arguments import parse_args
from scripts import commands
from src.commons import constants as const
from src.commons.exception import I2PRegError, NoConsensus
from src.commons.logger import initialize_loghandler
from src.commons.utils import utility

LOGGER = logging.getLogger(const.ROOT)


def run_command(options) -> None:
    """
    Dispatch a parsed command line.

    :param options: Parsed Arguments.
    """
    overrides = dict(options.params)
    if options.seed is not None:
        overrides["seed"] = options.seed
    jobs = options.jobs if options.jobs else utility.default_jobs()
    if options.command == "ablate":
        commands.cmd_ablate(
            options.sweep,
            options.out,
            values=options.values,
            batch=options.batch,
            config_path=options.config,
            overrides=overrides,
            jobs=jobs,
        )
        return
    settings = commands.load_settings(options.config, overrides)
    if options.command == "synth":
        commands.cmd_synth(settings, options.out, options.count)
    elif options.command == "register":
        commands.cmd_register(settings, options.scene, options.out)
    elif options.command == "eval":
        commands.cmd_eval(options.scenes, options.results, settings.thresholds, options.out)
    elif options.command == "normals":
        commands.cmd_normals(settings, options.scene, options.out)
    elif options.command == "losses":
        commands.cmd_losses(settings, options.out, options.scene, options.epoch, options.trials)


# pylint: disable=broad-except
def main(argv=None) -> int:
    """
    I2PREG main function.

    :param argv: Command line without the program name, sys.argv[1:] if None.
    :return: Exit code: 0 success, 1 bad input or config, 2 registration failure.
    """
    try:
        options = parse_args(argv)
    except I2PRegError as err:
        print(err, file=sys.stderr)
        return const.EXIT_BAD_INPUT
    # backup old execution logs.
    utility.log_cleanup(options.log_dir)
    initialize_loghandler(
        LOGGER, os.path.splitext(os.path.basename(__file__))[0], options.verbose, options.log_dir
    )
    LOGGER.info("Arguments: %s", options)
    try:
        run_command(options)
    except NoConsensus as err:
        LOGGER.exception(err)
        return const.EXIT_NO_CONSENSUS
    except I2PRegError as err:
        LOGGER.exception(err)
        return const.EXIT_BAD_INPUT
    except Exception as err:
        LOGGER.exception(err)
        return const.EXIT_BAD_INPUT
    return const.EXIT_SUCCESS


if __name__ == "__main__":
    sys.exit(main())
