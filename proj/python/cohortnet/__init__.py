# Copyright 2026 The CohortNet Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Cohort discovery and calibrated outcome prediction for multivariate time series."""

import json as _json

from ._core import (
    ConfigError,
    Error,
    LookupError,
    MetricError,
    Model,
    ParseError,
    auc_pr,
    auc_roc,
    evaluate,
    f1_score,
    generate,
    kmeans,
)

__all__ = [
    "ConfigError",
    "Error",
    "LookupError",
    "MetricError",
    "Model",
    "ParseError",
    "auc_pr",
    "auc_roc",
    "evaluate",
    "explain",
    "f1_score",
    "generate",
    "kmeans",
    "train",
]


def train(config: dict) -> Model:
    """Run all four stages for a config given as a dict."""
    return Model.train(_json.dumps(config))


def explain(model: Model, patient_id: str) -> dict:
    """Calibration breakdown for one patient as a dict."""
    return _json.loads(model.explain(patient_id))
