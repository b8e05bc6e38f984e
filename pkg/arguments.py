# !/usr/bin/python
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
"""Module to parse commandline arguments for I2PREG Driver."""

import sys
from argparse import Action, ArgumentParser

import yaml

from src.commons import constants as const
from src.commons.exception import ConfigError


class UsageArgumentParser(ArgumentParser):
    """Argument parser reporting usage errors as ConfigError instead of exiting."""

    def error(self, message):
        """Print usage and raise."""
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: {message}")


class SplitArguments(Action):
    """Split space, comma separated arguments and set it to list."""

    def __call__(self, parser, namespace, values, option_string=None) -> None:
        """strip comma from arguments."""
        values = values if isinstance(values, list) else [values]
        setattr(
            namespace,
            self.dest,
            [part.strip() for value in values for part in str(value).split(",") if part.strip()],
        )


class ParamOverride(Action):
    """Collect repeated KEY=VALUE pipeline overrides into a dict; values are parsed as YAML."""

    def __call__(self, parser, namespace, values, option_string=None) -> None:
        """Add one dotted key and its typed value."""
        key, sep, text = str(values).partition("=")
        if not sep or not key.strip() or not text.strip():
            parser.error(f"{option_string} expects KEY=VALUE, got '{values}'")
        try:
            value = yaml.safe_load(text)
        except yaml.YAMLError as error:
            parser.error(f"{option_string} value of {key.strip()} is not valid YAML: {error}")
        params = dict(getattr(namespace, self.dest) or {})
        params[key.strip()] = value
        setattr(namespace, self.dest, params)


def _global_options(parser: ArgumentParser) -> None:
    parser.add_argument(
        "-v",
        "--verbose",
        action="store_true",
        help="log level used verbose(debug), default is info.",
    )
    parser.add_argument("--log_dir", type=str, default=None, help="Log root directory, default ./log.")
    parser.add_argument("-c", "--config", type=str, default=None, help="Pipeline config yaml path.")
    parser.add_argument("-sd", "--seed", type=int, default=None, help="seed, overrides the config.")
    parser.add_argument(
        "-p",
        "--param",
        dest="params",
        action=ParamOverride,
        default={},
        metavar="KEY=VALUE",
        help="Pipeline config override by dotted key, e.g. graph.k_neighbors=4. Repeatable.",
    )
    parser.add_argument(
        "-j",
        "--jobs",
        type=int,
        default=None,
        help="Scene-level worker processes, default is the physical core count.",
    )


def parse_args(argv=None):
    """Commandline arguments for I2PREG Driver."""
    parser = UsageArgumentParser(prog="i2preg", description="Image to point cloud registration.")
    _global_options(parser)
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True

    synth = subparsers.add_parser("synth", help="Generate synthetic scene bundles.")
    synth.add_argument("-o", "--out", type=str, required=True, help="Output directory.")
    synth.add_argument("-n", "--count", type=int, default=1, help="Number of scenes.")

    register = subparsers.add_parser("register", help="Register a scene bundle.")
    register.add_argument("-s", "--scene", type=str, required=True, help="Scene bundle directory.")
    register.add_argument("-o", "--out", type=str, required=True, help="Result directory.")

    evaluate = subparsers.add_parser("eval", help="Evaluate registration results.")
    evaluate.add_argument(
        "-s",
        "--scenes",
        type=str,
        nargs="+",
        action=SplitArguments,
        required=True,
        help="One or more(space/comma separated) scene bundle directories.",
    )
    evaluate.add_argument(
        "-r",
        "--results",
        type=str,
        nargs="+",
        action=SplitArguments,
        required=True,
        help="Result directories in the order of --scenes.",
    )
    evaluate.add_argument("-o", "--out", type=str, required=True, help="Metrics JSON path.")

    ablate = subparsers.add_parser("ablate", help="Run an ablation sweep.")
    ablate.add_argument("--sweep", type=str, required=True, choices=const.SWEEPS, help="Sweep name.")
    ablate.add_argument(
        "--values",
        type=str,
        nargs="+",
        action=SplitArguments,
        default=None,
        help="Sweep values, default from workload/ablation/<sweep>.yaml.",
    )
    ablate.add_argument("-b", "--batch", type=int, default=4, help="Scenes in the fixed batch.")
    ablate.add_argument("-o", "--out", type=str, required=True, help="CSV path.")

    normals = subparsers.add_parser("normals", help="Estimate cloud and depth normals.")
    normals.add_argument("-s", "--scene", type=str, required=True, help="Scene bundle directory.")
    normals.add_argument("-o", "--out", type=str, required=True, help="Output directory.")

    losses = subparsers.add_parser("losses", help="Loss records and gradient checks.")
    losses.add_argument("-s", "--scene", type=str, default=None, help="Scene bundle directory.")
    losses.add_argument("-e", "--epoch", type=int, default=None, help="Epoch of the warm-up weight.")
    losses.add_argument("-t", "--trials", type=int, default=20, help="Gradient check instances.")
    losses.add_argument("-o", "--out", type=str, required=True, help="JSON path.")
    return parser.parse_args(argv)
