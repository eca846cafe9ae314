# Copyright The evseg Authors
# SPDX-License-Identifier: Apache-2.0

import json

import numpy as np
import pytest

import evseg

SCENE = {
    "width": 320,
    "height": 240,
    "duration": 1.0,
    "frame_interval": 0.25,
    "seed": 3,
    "objects": [
        {"shape": "rectangle", "size": [40, 40], "position": [120, 120],
         "motion": {"vx": 20, "vy": -10}, "texture_cell": 5}
    ],
}


def test_generate_and_search():
    scene = evseg.generate_scene(json.dumps(SCENE))
    assert scene["t"].shape == scene["x"].shape == scene["labels"].shape
    assert len(scene["t"]) > 1000
    assert np.all(np.diff(scene["t"]) >= 0)
    best = evseg.grid_search_motion(
        scene["t"], scene["x"], scene["y"], scene["p"], 320, 240)
    assert abs(best["vx"] - 20) <= 2
    assert abs(best["vy"] + 10) <= 2


def test_scene_is_deterministic():
    a = evseg.generate_scene(json.dumps(SCENE))
    b = evseg.generate_scene(json.dumps(SCENE))
    assert np.array_equal(a["t"], b["t"])
    assert np.array_equal(a["labels"], b["labels"])


def test_sharpness_and_iou():
    rng = np.random.default_rng(0)
    sharp, raw = evseg.dct_sharpness(rng.random((64, 64)))
    assert sharp.shape == raw.shape == (64, 64)
    assert 0.0 <= sharp.min() and sharp.max() <= 1.0
    _, flat = evseg.dct_sharpness(np.full((64, 64), 0.5))
    assert np.all(flat == 0.0)
    a = np.zeros((10, 10), bool)
    a[:, :5] = True
    b = np.zeros((10, 10), bool)
    b[:, 2:7] = True
    assert evseg.iou(a, b) == pytest.approx(3 / 7)


def test_segment_and_score(tmp_path):
    evseg.write_scene(json.dumps(SCENE), str(tmp_path / "scene"))
    ini = evseg.default_config().replace(
        "delta_t_us = 10000\norigin_us = first\n",
        "delta_t_us = 250000\norigin_us = 0\n")
    assert "delta_t_us = 250000" in ini
    summary = evseg.segment(str(tmp_path / "scene" / "events.evs"), ini,
                            str(tmp_path / "out"),
                            flow_dir=str(tmp_path / "scene" / "flow"))
    assert len(summary["windows"]) == 4
    assert not any(w["failed"] for w in summary["windows"])
    assert set(summary["stage_ms"]) >= {"time_surface", "bcmax"}
    result = evseg.score(str(tmp_path / "out" / "objects"),
                         str(tmp_path / "scene" / "gt"))
    assert result["total"] == 4
    assert 0.0 <= result["detection_rate"] <= 100.0


def test_errors():
    with pytest.raises(evseg.ConfigError):
        evseg.segment("/nonexistent.evs", "[window]\ndelta_t_us = 0\n", "/tmp/x")
    with pytest.raises(evseg.Error):
        evseg.read_events("/nonexistent/file.evs")
