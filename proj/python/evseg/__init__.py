# Copyright The evseg Authors
# SPDX-License-Identifier: Apache-2.0
"""Event-camera motion segmentation."""

from ._core import (
    ConfigError,
    Error,
    FormatError,
    InvalidArgument,
    IoError,
    dct_sharpness,
    default_config,
    generate_scene,
    grid_search_motion,
    iou,
    read_events,
    score,
    segment,
    write_scene,
)

__all__ = [
    "ConfigError",
    "Error",
    "FormatError",
    "InvalidArgument",
    "IoError",
    "dct_sharpness",
    "default_config",
    "generate_scene",
    "grid_search_motion",
    "iou",
    "read_events",
    "score",
    "segment",
    "write_scene",
]
