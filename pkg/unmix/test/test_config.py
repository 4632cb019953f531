# -*- coding: utf-8 -*-
# UnmixStereo - python program that recovers a stereo pair and its disparity maps
# from a single mixture image.
#
# Copyright (C) 2026 The UnmixStereo Development Team.
#
# This file is part of UnmixStereo.
#
# UnmixStereo is free software; you can redistribute it and/or
# modify it under the terms of the GNU General Public License
# as published by the Free Software Foundation; either version 3
# of the License, or (at your option) any later version.
#
# UnmixStereo is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program; if not, see <http://www.gnu.org/licenses/>
#
# ---


import json

from numpy.testing import assert_equal, assert_raises

from unmix.config import CONFIG_KEYS, config_from_dict, config_snapshot, load_config, save_config
from unmix.losses import LossWeights
from unmix.solver import SolverConfig


def test_config_keys():
    r"""Test the configuration keys cover the weights and the solver fields."""
    assert "alpha_c" in CONFIG_KEYS and "lambda2" in CONFIG_KEYS
    assert "d_max" in CONFIG_KEYS and "iters_per_level" in CONFIG_KEYS
    assert "weights" not in CONFIG_KEYS
    assert_equal(len(CONFIG_KEYS), len(set(CONFIG_KEYS)))


def test_config_from_dict():
    r"""Test building a configuration from a flat dictionary."""
    cfg = config_from_dict({"omega_s": 0.1, "levels": 2, "step_size": 0.01})
    assert_equal(cfg.weights.omega_s, 0.1)
    assert_equal(cfg.weights.alpha_c, 1.)
    assert_equal((cfg.levels, cfg.step_size, cfg.d_max), (2, 0.01, 96))
    base = SolverConfig(d_max=32, weights=LossWeights(alpha_p=0.5))
    cfg = config_from_dict({"seed": 3}, base)
    assert_equal((cfg.d_max, cfg.seed, cfg.weights.alpha_p), (32, 3, 0.5))
    assert config_from_dict({}) == SolverConfig()


def test_config_from_dict_raises():
    r"""Test unknown keys and bad values are rejected."""
    assert_raises(ValueError, config_from_dict, {"learning_rate": 0.1})
    assert_raises(ValueError, config_from_dict, {"levels": 0})
    assert_raises(ValueError, config_from_dict, {"lambda1": 0.5})
    assert_raises(TypeError, config_from_dict, {"d_max": 9.5})
    assert_raises(TypeError, config_from_dict, [("levels", 2)])


def test_config_snapshot_round_trip(tmp_path):
    r"""Test a saved snapshot reloads to an equal configuration."""
    cfg = SolverConfig(d_max=40, levels=2, iters_per_level=7, seed=11,
                       weights=LossWeights(omega_w=2., lambda1=0.7, lambda2=0.3))
    snapshot = config_snapshot(cfg)
    assert_equal(sorted(snapshot), sorted(CONFIG_KEYS))
    assert config_from_dict(snapshot) == cfg
    path = str(tmp_path / "config.json")
    save_config(cfg, path)
    with open(path) as handle:
        assert_equal(json.load(handle)["iters_per_level"], 7)
    assert load_config(path) == cfg
    assert_raises(TypeError, config_snapshot, {"levels": 2})


def test_load_config_raises(tmp_path):
    r"""Test errors raised while reading configuration files."""
    assert_raises(FileNotFoundError, load_config, str(tmp_path / "missing.json"))
    path = str(tmp_path / "broken.json")
    with open(path, "w") as handle:
        handle.write("{levels: 2")
    assert_raises(ValueError, load_config, path)
    with open(path, "w") as handle:
        handle.write("[1, 2]")
    assert_raises(ValueError, load_config, path)
    with open(path, "w") as handle:
        handle.write('{"levels": 2, "colour": "red"}')
    assert_raises(ValueError, load_config, path)
