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

"""Yaml Parser for pipeline configuration."""
import copy
import logging
import os

import munch
import yaml

from src.commons import constants as const
from src.commons.exception import ConfigError

LOGGER = logging.getLogger(const.ROOT)


def read_yaml(fpath: str, encoding="utf-8") -> dict:
    """
    YAML file to python dictionary.

    :param fpath: Yaml file path to parse.
    :param encoding: Type of encoding is used to read file.
    :return: python dict containing file contents.
    """
    LOGGER.debug("YAML file selected for parse: %s", fpath)
    yaml_dict = {}
    with open(fpath, "r", encoding=encoding) as obj:
        data = yaml.safe_load(obj)
        if data:
            yaml_dict.update(data)
    LOGGER.debug("YAML file data: %s", yaml_dict)
    return yaml_dict


def apply_default_config(user_cfg: dict, default_cfg: dict, section: str = "config") -> dict:
    """
    Add missing parameters from the defaults and reject unknown ones.

    Nested sections are checked recursively; lists and scalars are taken as given.

    :param user_cfg: Parsed user config, may be partial.
    :param default_cfg: Parsed default config, complete.
    :param section: Name of the checked section used in messages.
    :return: dict: Complete config.
    """
    if user_cfg is None:
        user_cfg = {}
    if not isinstance(user_cfg, dict):
        raise ConfigError(f"Section {section} must be a mapping, got {user_cfg!r}.")
    for param in user_cfg:
        if param not in default_cfg:
            raise ConfigError(f"Wrong parameter {param} in {section}.")
    final = {}
    for param, default in default_cfg.items():
        if param not in user_cfg:
            final[param] = copy.deepcopy(default)
            continue
        if isinstance(default, dict):
            final[param] = apply_default_config(user_cfg[param], default, f"{section}.{param}")
        else:
            final[param] = copy.deepcopy(user_cfg[param])
    to_be_added = set(default_cfg) - set(user_cfg)
    if to_be_added and user_cfg:
        LOGGER.debug("Added %s parameters to %s", sorted(to_be_added), section)
    return final


def apply_overrides(cfg: dict, overrides: dict) -> dict:
    """
    Apply dotted-key overrides (e.g. normals.k_neighbors) on a complete config.

    :param cfg: Complete config dict, updated in place.
    :param overrides: Mapping of dotted key to value, None values are skipped.
    :return: dict: Updated config.
    """
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        node = cfg
        keys = dotted.split(".")
        for key in keys[:-1]:
            if key not in node or not isinstance(node[key], dict):
                raise ConfigError(f"Wrong parameter {dotted} in override.")
            node = node[key]
        if keys[-1] not in node:
            raise ConfigError(f"Wrong parameter {dotted} in override.")
        LOGGER.debug("Override %s: %s -> %s", dotted, node[keys[-1]], value)
        node[keys[-1]] = value
    return cfg


def load_pipeline_config(fpath: str = None, overrides: dict = None) -> munch.Munch:
    """
    Load the pipeline config: defaults <- config file <- command line overrides.

    :param fpath: Optional user config yaml path.
    :param overrides: Optional dotted-key overrides.
    :return: Munch of the complete config.
    """
    defaults = read_yaml(const.PIPELINE_CFG_PATH)
    user_cfg = {}
    if fpath:
        if not os.path.isfile(fpath):
            raise ConfigError(f"Config file {fpath} does not exist.")
        try:
            user_cfg = read_yaml(fpath)
        except yaml.YAMLError as error:
            raise ConfigError(f"Unable to parse {fpath}: {error}") from error
    cfg = apply_overrides(apply_default_config(user_cfg, defaults), overrides)
    return munch.munchify(cfg)


def read_sweep(sweep: str) -> list:
    """
    Read default sweep values of an ablation from workload/ablation/<sweep>.yaml.

    :param sweep: Sweep name.
    :return: List of sweep values.
    """
    fpath = os.path.join(const.ABLATION_DIR, f"{sweep}.yaml")
    if not os.path.isfile(fpath):
        raise ConfigError(f"No sweep definition for {sweep}: {fpath}")
    data = read_yaml(fpath)
    if "values" not in data or not data["values"]:
        raise ConfigError(f"Sweep values are missing in {fpath}")
    return list(data["values"])
