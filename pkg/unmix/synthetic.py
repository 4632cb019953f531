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
Synthetic Module - textured stereo scenes with known disparities.

Scenes are built from smoothed random textures whose colour channels are strongly correlated,
the way natural images are, so that cross-channel matching of anaglyphs is meaningful.

"""

import os
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from unmix._io import save_image, save_pfm
from unmix.image import DisparityMap, PlanarImage


__all__ = [
    "StereoScene", "random_texture", "make_shifted_scene", "make_two_plane_scene",
    "scene_suite", "write_scene_suite",
]


@dataclass(frozen=True)
class StereoScene:
    r"""
    A rectified stereo pair with ground-truth disparities of both views.

    Attributes
    ----------
    name : str
        Scene name used in file names.
    left, right : PlanarImage
        The views.
    d_left, d_right : DisparityMap
        True disparities; the left view matches right(x - d_left), the right view left(x + d_right).
    occluded_left : ndarray(H, W) of bool
        Left pixels without a match in the right view (occlusions and the out-of-frame border).

    """

    name: str
    left: PlanarImage
    right: PlanarImage
    d_left: DisparityMap
    d_right: DisparityMap
    occluded_left: np.ndarray

    def compose(self, op):
        r"""Mixture of the pair under operator `op`."""
        return op.compose(self.left, self.right)


def random_texture(height, width, rng, channels=3, sigma=1.0):
    r"""
    Smoothed random colour texture with values in [0.05, 0.95].

    Each channel is a positive gain of a shared luminance field plus a weaker independent field,
    both Gaussian-smoothed with `sigma` pixels.
    """
    def _field():
        noise = gaussian_filter(rng.standard_normal((height, width)), sigma, mode="reflect")
        return (noise - noise.mean()) / max(noise.std(), 1e-12)

    luminance = _field()
    planes = []
    for _ in range(channels):
        gain = rng.uniform(0.6, 1.0)
        planes.append(gain * luminance + 0.3 * _field())
    texture = 0.5 + 0.15 * np.stack(planes, axis=2)
    return np.clip(texture, 0.05, 0.95)


def make_shifted_scene(height=96, width=128, disparity=4, seed=0, flat_margin=True, name=None):
    r"""
    Scene of one fronto-parallel plane at integer `disparity`.

    The pair is cut from one texture of width `width + disparity`: left = T[:, :W] and
    right = T[:, d:d + W]. With `flat_margin` the first and last `disparity + 1` texture columns
    are constant, so warping either view with the true disparity reproduces the other exactly,
    border columns included.
    """
    if not isinstance(disparity, (int, np.integer)) or disparity < 0 or disparity >= width - 1:
        raise ValueError(f"Disparity {disparity} should be an integer in [0, {width - 2}].")
    rng = np.random.default_rng(seed)
    texture = random_texture(height, width + disparity, rng)
    if flat_margin:
        margin = disparity + 1
        texture[:, :margin] = texture[:, [margin - 1]]
        texture[:, -margin:] = texture[:, [-margin]]
    left = texture[:, :width]
    right = texture[:, disparity:disparity + width]
    truth = np.full((height, width), float(disparity))
    occluded = np.zeros((height, width), dtype=bool)
    if not flat_margin:
        occluded[:, :disparity] = True
    return StereoScene(
        name=name or f"shifted{disparity}_{seed}", left=PlanarImage(left), right=PlanarImage(right),
        d_left=DisparityMap(truth), d_right=DisparityMap(truth.copy()), occluded_left=occluded,
    )


def make_two_plane_scene(height=96, width=128, d_bg=2, d_fg=6, seed=0, name=None):
    r"""
    Scene of a foreground rectangle at `d_fg` in front of a background plane at `d_bg`.

    The rectangle covers the middle third of the columns and the middle half of the rows of the
    left view. Left pixels in the band of width `d_fg - d_bg` just left of the rectangle are hidden
    in the right view; together with the first `d_bg` columns they form `occluded_left`.
    """
    if not 0 <= d_bg < d_fg < width // 3:
        raise ValueError(f"Disparities should satisfy 0 <= d_bg={d_bg} < d_fg={d_fg} < "
                         f"{width // 3}.")
    rng = np.random.default_rng(seed)
    background = random_texture(height, width + d_fg, rng)
    foreground = random_texture(height, width + d_fg, rng)
    top, bottom = height // 4, 3 * height // 4
    first, last = width // 3, 2 * width // 3
    rows = np.zeros(height, dtype=bool)
    rows[top:bottom] = True
    columns = np.arange(width)

    in_left = rows[:, None] & ((columns >= first) & (columns < last))[None, :]
    left = np.where(in_left[:, :, None], foreground[:, :width], background[:, :width])
    d_left = np.where(in_left, float(d_fg), float(d_bg))

    # right pixel x shows the foreground iff x + d_fg falls inside the rectangle
    in_right = rows[:, None] & ((columns + d_fg >= first) & (columns + d_fg < last))[None, :]
    right = np.where(in_right[:, :, None], foreground[:, d_fg:d_fg + width],
                     background[:, d_bg:d_bg + width])
    d_right = np.where(in_right, float(d_fg), float(d_bg))

    band = rows[:, None] & ((columns >= first - (d_fg - d_bg)) & (columns < first))[None, :]
    occluded = band | (columns < d_bg)[None, :]
    return StereoScene(
        name=name or f"planes{d_bg}_{d_fg}_{seed}", left=PlanarImage(left),
        right=PlanarImage(right), d_left=DisparityMap(d_left), d_right=DisparityMap(d_right),
        occluded_left=occluded,
    )


def scene_suite(count, seed=0, height=96, width=128):
    r"""
    A reproducible list of `count` scenes.

    Even indices are single planes at a disparity in {2, ..., 8}, odd indices two-plane scenes
    with disparities drawn from the same range.
    """
    rng = np.random.default_rng(seed)
    scenes = []
    for index in range(count):
        scene_seed = int(rng.integers(0, 2 ** 31 - 1))
        name = f"scene{index:03d}"
        if index % 2 == 0:
            disparity = int(rng.integers(2, 9))
            scenes.append(make_shifted_scene(height, width, disparity, scene_seed, name=name))
        else:
            d_bg, d_fg = sorted(rng.choice(np.arange(2, 9), size=2, replace=False))
            scenes.append(make_two_plane_scene(height, width, int(d_bg), int(d_fg), scene_seed,
                                               name=name))
    return scenes


def write_scene_suite(out_dir, count, seed=0, height=96, width=128, bit_depth=8):
    r"""
    Write `scene_suite` in the dataset layout read by the benchmark.

    Each scene produces `<scene>_left.png`, `<scene>_right.png` and `<scene>_disp_left.pfm`.

    Returns
    -------
    list of str :
        The written file paths.

    """
    if not os.path.isdir(out_dir):
        raise OSError(f"Output directory {out_dir} does not exist.")
    paths = []
    for scene in scene_suite(count, seed, height, width):
        stem = os.path.join(out_dir, scene.name)
        save_image(scene.left, f"{stem}_left.png", bit_depth)
        save_image(scene.right, f"{stem}_right.png", bit_depth)
        save_pfm(scene.d_left, f"{stem}_disp_left.pfm")
        paths.extend([f"{stem}_left.png", f"{stem}_right.png", f"{stem}_disp_left.pfm"])
    return paths
