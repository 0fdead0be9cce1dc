# Copyright (c) 2026 The HybridGait Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Python bindings for the HybridGait C++ core."""

from ._hybridgait import (
    CheckpointError,
    ConfigError,
    DataError,
    Error,
    ValidationError,
    canonical_layout,
    compute_alignment,
    embed,
    evaluate,
    forward_kinematics,
    lr_at,
    published_train_config,
    project,
    render_silhouette,
    synthesize,
    train,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "DataError",
    "Error",
    "ValidationError",
    "canonical_layout",
    "compute_alignment",
    "embed",
    "evaluate",
    "forward_kinematics",
    "lr_at",
    "published_train_config",
    "project",
    "render_silhouette",
    "synthesize",
    "train",
]
