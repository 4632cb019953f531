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
r"""
Config Module - flat JSON configuration of a solve.

A configuration file is one JSON object whose keys are the fields of `LossWeights` and
`SolverConfig` (except `weights` itself). Missing keys keep their defaults; unknown keys are
rejected. `config_snapshot` writes the same flat dictionary, so a snapshot reloads to an equal
configuration.

"""

import json
from dataclasses import asdict, fields

from unmix.losses import LossWeights
from unmix.solver import SolverConfig


__all__ = ["CONFIG_KEYS", "config_from_dict", "config_snapshot", "load_config", "save_config"]


_WEIGHT_KEYS = tuple(f.name for f in fields(LossWeights))
_SOLVER_KEYS = tuple(f.name for f in fields(SolverConfig) if f.name != "weights")
CONFIG_KEYS = _WEIGHT_KEYS + _SOLVER_KEYS


def config_from_dict(values, base=None):
    r"""
    Build a SolverConfig from a flat dictionary.

    Parameters
    ----------
    values : dict
        Keys from `CONFIG_KEYS`.
    base : SolverConfig, optional
        Configuration providing the values of absent keys. Defaults are used if omitted.

    Raises
    ------
    ValueError :
        If a key is unknown or a value is out of range.

    """
    if not isinstance(values, dict):
        raise TypeError(f"Configuration should be a dictionary, not {type(values)}.")
    unknown = sorted(set(values) - set(CONFIG_KEYS))
    if unknown:
        raise ValueError(f"Unknown configuration keys {unknown}; valid keys are {CONFIG_KEYS}.")
    base = SolverConfig() if base is None else base
    weights = asdict(base.weights)
    weights.update({key: values[key] for key in _WEIGHT_KEYS if key in values})
    solver = {key: values[key] for key in _SOLVER_KEYS if key in values}
    return base.replace(weights=LossWeights(**weights), **solver)


def config_snapshot(cfg):
    r"""Return the flat dictionary of every weight and solver field of `cfg`."""
    if not isinstance(cfg, SolverConfig):
        raise TypeError(f"Argument cfg should be a SolverConfig, not {type(cfg)}.")
    snapshot = asdict(cfg.weights)
    snapshot.update({key: getattr(cfg, key) for key in _SOLVER_KEYS})
    return snapshot


def load_config(path, base=None):
    r"""
    Read a configuration file.

    Raises
    ------
    FileNotFoundError :
        If `path` does not exist.
    ValueError :
        If the file is not a JSON object of known keys.

    """
    with open(path, "r", encoding="utf-8") as handle:
        try:
            values = json.load(handle)
        except json.JSONDecodeError as error:
            raise ValueError(f"Configuration file {path} is not valid JSON: {error}") from error
    if not isinstance(values, dict):
        raise ValueError(f"Configuration file {path} should hold a JSON object.")
    return config_from_dict(values, base)


def save_config(cfg, path):
    r"""Write `config_snapshot(cfg)` to `path` as JSON."""
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(config_snapshot(cfg), handle, indent=2, sort_keys=True)
