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
Sampling Module - differentiable horizontal bilinear warping between the two views.

Conventions
-----------
Disparities are non-negative. The left view is reconstructed by sampling the right image at
:math:`x - d_L(x, y)` and the right view by sampling the left image at :math:`x + d_R(x, y)`,
so each reconstruction is paired with the disparity map of the view being reconstructed.

Source coordinates are clamped to :math:`[0, W - 1]`. At clamped pixels the derivative with
respect to disparity is zero, so image borders never drive disparity updates. At integer sample
positions the derivative uses the right-hand difference.

"""

import numpy as np

from unmix.image import DisparityMap


__all__ = ["WarpResult", "warp_from_right", "warp_from_left", "warp_adjoint"]


class WarpResult:
    r"""
    Output of a warp together with what the reverse pass needs.

    Attributes
    ----------
    warped : ndarray(H, W, C)
        The reconstructed view.
    d_value_d_disparity : ndarray(H, W, C)
        Derivative of each warped sample with respect to the disparity at that pixel.
    floor_index : ndarray(H, W) of int
        Left source column :math:`x_0`; the right one is :math:`x_0 + 1`.
    weight : ndarray(H, W)
        Interpolation weight :math:`t` of column :math:`x_0 + 1`, the weight of :math:`x_0`
        being :math:`1 - t`.
    clamped : ndarray(H, W) of bool
        Pixels whose source coordinate fell outside the image.

    """

    def __init__(self, warped, d_value_d_disparity, floor_index, weight, clamped):
        self.warped = warped
        self.d_value_d_disparity = d_value_d_disparity
        self.floor_index = floor_index
        self.weight = weight
        self.clamped = clamped

    @property
    def source_weights(self):
        r"""Per-pixel pair (floor index, fractional weight)."""
        return self.floor_index, self.weight

    @property
    def shape(self):
        r"""Shape :math:`(H, W, C)` of the warped view."""
        return self.warped.shape


def _prepare(source, disparity):
    src = np.asarray(source, dtype=np.float64)
    if src.ndim == 2:
        src = src[:, :, None]
    if src.ndim != 3:
        raise ValueError(f"Source image should have shape (H, W, C), got {src.shape}.")
    disp = np.asarray(disparity, dtype=np.float64)
    if disp.shape != src.shape[:2]:
        raise ValueError(f"Disparity shape {disp.shape} should equal image shape {src.shape[:2]}.")
    if isinstance(disparity, DisparityMap):
        disp = np.where(disparity.valid, disp, 0.)
    if not np.all(np.isfinite(disp)):
        raise ValueError("Disparities should be finite.")
    if np.any(disp < 0.):
        raise ValueError("Disparities should be non-negative.")
    return src, disp


def _sample(src, position, direction):
    r"""Linearly interpolate `src` along rows at `position`; `direction` is ds/dd."""
    height, width = position.shape
    clamped = (position < 0.) | (position > width - 1)
    position = np.clip(position, 0., width - 1)
    floor_index = np.minimum(np.floor(position).astype(np.intp), width - 2)
    weight = position - floor_index
    rows = np.arange(height)[:, None]
    left = src[rows, floor_index]
    right = src[rows, floor_index + 1]
    warped = left + weight[:, :, None] * (right - left)
    slope = direction * (right - left)
    slope[clamped] = 0.
    return WarpResult(warped, slope, floor_index, weight, clamped)


def warp_from_right(right, d_left):
    r"""
    Reconstruct the left view :math:`I_L''(x, y) = I_R(x - d_L(x, y), y)`.

    Parameters
    ----------
    right : PlanarImage or ndarray(H, W, C)
        The right image.
    d_left : DisparityMap or ndarray(H, W)
        Non-negative left disparities. Invalid pixels of a DisparityMap are treated as zero.

    Returns
    -------
    WarpResult :
        The reconstruction and its derivatives.

    Raises
    ------
    ValueError :
        If the dimensions disagree or a disparity is negative or non-finite.

    """
    src, disp = _prepare(right, d_left)
    position = np.arange(src.shape[1], dtype=np.float64)[None, :] - disp
    return _sample(src, position, -1.)


def warp_from_left(left, d_right):
    r"""Reconstruct the right view :math:`I_R''(x, y) = I_L(x + d_R(x, y), y)`."""
    src, disp = _prepare(left, d_right)
    position = np.arange(src.shape[1], dtype=np.float64)[None, :] + disp
    return _sample(src, position, 1.)


def warp_adjoint(result, upstream):
    r"""
    Reverse-mode pass of a warp.

    Parameters
    ----------
    result : WarpResult
        The forward warp.
    upstream : ndarray(H, W, C)
        Gradient of a scalar with respect to the warped samples.

    Returns
    -------
    grad_source : ndarray(H, W, C)
        Gradient with respect to the source image: the upstream values scattered into the two
        contributing columns with the interpolation weights.
    grad_disparity : ndarray(H, W)
        Gradient with respect to the disparities, summed over channels.

    """
    if not isinstance(result, WarpResult):
        raise TypeError(f"Argument result should be a WarpResult, not {type(result)}.")
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.ndim == 2:
        upstream = upstream[:, :, None]
    if upstream.shape != result.shape:
        raise ValueError(f"Upstream shape {upstream.shape} should equal {result.shape}.")
    height, width, channels = upstream.shape
    index = (np.arange(height)[:, None] * width + result.floor_index).ravel()
    weight = result.weight.ravel()
    grad_source = np.empty((height * width, channels))
    for c in range(channels):
        values = upstream[:, :, c].ravel()
        grad_source[:, c] = (
            np.bincount(index, weights=(1. - weight) * values, minlength=height * width)
            + np.bincount(index + 1, weights=weight * values, minlength=height * width)
        )
    grad_disparity = np.sum(upstream * result.d_value_d_disparity, axis=2)
    return grad_source.reshape(height, width, channels), grad_disparity
