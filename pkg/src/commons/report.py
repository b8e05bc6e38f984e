# -*- coding: utf-8 -*-
# !/usr/bin/python
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

"""Report module to tabulate evaluation and ablation results."""

import json
import logging
from typing import List, Sequence

import numpy as np
import pandas as pd

from src.commons.constants import ROOT
from src.commons.exception import EmptyInput
from src.libs.metrics import SceneEvaluation, feature_matching_recall, registration_recall

LOGGER = logging.getLogger(ROOT)

RATIO_COLUMNS = ["inlier_ratio", "pir", "rre_deg", "rte_m", "rmse_m"]


def evaluation_frame(evaluations: Sequence[SceneEvaluation]) -> pd.DataFrame:
    """One row per scene."""
    frame = pd.DataFrame([evaluation.to_dict() for evaluation in evaluations])
    for column in RATIO_COLUMNS:
        frame[column] = pd.to_numeric(frame[column], errors="coerce")
    return frame


def aggregate(evaluations: Sequence[SceneEvaluation], tau2: float, tau3: float) -> dict:
    """
    Batch aggregates: FMR and RR over all scenes, mean and median of every per-scene metric.

    RRE, RTE and RMSE statistics only cover scenes that registered; PIR only scenes with
    patch pairs.
    :param evaluations: Per-scene records.
    :param tau2: Inlier-ratio threshold of FMR.
    :param tau3: RMSE threshold of RR.
    """
    if not evaluations:
        raise EmptyInput("Cannot aggregate an empty evaluation batch.")
    frame = evaluation_frame(evaluations)
    rmses = [e.rmse_m for e in evaluations]
    summary = {
        "scenes": len(evaluations),
        "fmr": feature_matching_recall(frame["inlier_ratio"].to_numpy(), tau2),
        "rr": registration_recall(rmses, tau3),
        "mean": {},
        "median": {},
    }
    for column in RATIO_COLUMNS:
        values = frame[column].dropna()
        values = values[np.isfinite(values)]
        summary["mean"][column] = float(values.mean()) if len(values) else None
        summary["median"][column] = float(values.median()) if len(values) else None
    return summary


def evaluation_report(evaluations: Sequence[SceneEvaluation], tau2: float, tau3: float) -> dict:
    """Full report: per-scene records plus aggregates."""
    report = {
        "scenes": [evaluation.to_dict() for evaluation in evaluations],
        "aggregate": aggregate(evaluations, tau2, tau3),
    }
    pd.set_option("display.colheader_justify", "center")
    LOGGER.info("Evaluation per scene:\n%s", evaluation_frame(evaluations).to_string(index=False))
    LOGGER.info("Aggregate: %s", json.dumps(report["aggregate"]))
    return report


def write_evaluation_report(fpath: str, report: dict) -> None:
    """Write the evaluation report as JSON."""
    with open(fpath, "w", encoding="utf-8") as obj:
        json.dump(report, obj, indent=2, sort_keys=True)
    LOGGER.info("Evaluation report written to %s", fpath)


def ablation_frame(rows: List[dict]) -> pd.DataFrame:
    """Sweep table with columns setting, ir, fmr, rr."""
    frame = pd.DataFrame(rows, columns=["setting", "ir", "fmr", "rr"])
    LOGGER.info("Ablation results:\n%s", frame.to_string(index=False))
    return frame


def write_ablation_csv(fpath: str, rows: List[dict]) -> None:
    """Write the sweep table as CSV."""
    ablation_frame(rows).to_csv(fpath, index=False, float_format="%.6f")
    LOGGER.info("Ablation table written to %s", fpath)
