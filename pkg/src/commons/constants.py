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

"""All common constants and params for i2preg."""

import os
from datetime import datetime

I2PREG_ROOT = os.getcwd()  # Fetches you CWD of the runner.
PROJECT_DIR = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
CONFIG_DIR = os.path.join(PROJECT_DIR, "config")

I2PREG_CFG_PATH = os.path.join(CONFIG_DIR, "i2preg_config.yaml")
PIPELINE_CFG_PATH = os.path.join(CONFIG_DIR, "pipeline_config.yaml")
ABLATION_DIR = os.path.join(PROJECT_DIR, "workload", "ablation")
LOG_DIR = os.path.join(I2PREG_ROOT, "log")

FORMATTER = (
    "[%(asctime)s] [%(process)d] [%(threadName)-6s] [%(name)s] [%(levelname)-6s] "
    "[%(scene)s] [%(filename)s: %(lineno)d]: %(message)s"
)
ROOT = "i2preg"  # root logger name.
DT_STRING = datetime.now().strftime("%d_%m_%Y_%H_%M_%S")

# Exit codes of the driver.
EXIT_SUCCESS = 0
EXIT_BAD_INPUT = 1
EXIT_NO_CONSENSUS = 2

# Numeric tolerances.
ROTATION_TOL = 1e-9
UNIT_NORM_TOL = 1e-6
EIGEN_GAP_TOL = 1e-12
SINGULAR_GAP_TOL = 1e-9

# Scene bundle layout.
CLOUD_FILE = "cloud.ply"
DEPTH_FILE = "depth.bin"
INTRINSICS_FILE = "intrinsics.json"
GT_POSE_FILE = "gt_pose.json"
GT_CORRS_FILE = "gt_corrs.csv"
SCENE_META_FILE = "scene.json"

# Registration result layout.
POSE_FILE = "pose.json"
CORRS_FILE = "correspondences.csv"
PATCHES_FILE = "patches.csv"
LOSSES_FILE = "losses.json"
CLOUD_NORMALS_FILE = "cloud_normals.bin"
DEPTH_NORMALS_FILE = "depth_normals.bin"
GDC_PARAMS_FILE = "gdc_params.bin"
GDC_PARAMS_SIDECAR = "gdc_params.json"

# Supported ablation sweeps.
SWEEPS = ("gaussian_sigma", "mask_ratio", "k", "warmup")

# Fine-pair / patch labels.
POSITIVE = "positive"
NEGATIVE = "negative"
IGNORED = "ignored"
