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
Image Module - dense image and disparity containers with their finite-difference operators.

Classes
-------
PlanarImage -
    Dense :math:`H \times W \times C` floating-point image inside a declared value range.
DisparityMap -
    Dense non-negative disparity field in pixels with a per-pixel validity mask.
DepthMap -
    A DisparityMap whose values are depths in metres.

Functions
---------
grad_u, grad_v -
    Forward differences along columns (u) and rows (v); the last column/row is zero.
grad_u_adjoint, grad_v_adjoint -
    Exact transposes of the forward-difference operators.
downsample2, build_pyramid -
    2x2 box-filter reduction and the image pyramid built from it.
resize_bilinear, upsample_disparity -
    Bilinear resizing between pyramid levels.

Notes
-----
Every function here accepts either a container or a plain `numpy.ndarray`. Plain arrays are
returned as plain arrays, which is what the loss kernels use internally since intermediate
quantities (e.g. gradients, perturbed iterates) are not bounded by the image range.

"""

import cv2
import numpy as np


__all__ = [
    "PlanarImage", "DisparityMap", "DepthMap", "grad_u", "grad_v", "grad_u_adjoint",
    "grad_v_adjoint", "downsample2", "build_pyramid", "resize_bilinear", "upsample_disparity",
]


class PlanarImage:
    r"""
    Dense floating-point image with a declared value range.

    Samples are stored row-major as an array of shape :math:`(H, W, C)` with :math:`C \in \{1, 3\}`.

    Attributes
    ----------
    data : ndarray(H, W, C)
        The samples, float64.
    value_range : (float, float)
        Declared minimum and maximum sample value. Default is :math:`[0, 1]`.

    """

    def __init__(self, data, value_range=(0., 1.)):
        r"""
        Construct the PlanarImage object.

        Parameters
        ----------
        data : ndarray(H, W) or ndarray(H, W, C)
            The samples. Two-dimensional arrays are treated as single channel images.
        value_range : (float, float), optional
            Declared minimum and maximum value of the samples.

        Raises
        ------
        TypeError :
            If `data` is not a numpy array.
        ValueError :
            If the shape, channel count or sample values are not valid.

        """
        if not isinstance(data, np.ndarray):
            raise TypeError(f"Argument data should be a numpy array, not {type(data)}.")
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3:
            raise ValueError(f"Argument data should have 2 or 3 dimensions, got {data.ndim}.")
        if data.shape[2] not in (1, 3):
            raise ValueError(f"Image should have 1 or 3 channels, got {data.shape[2]}.")
        if data.shape[0] < 2 or data.shape[1] < 2:
            raise ValueError(f"Image should be at least 2x2 pixels, got {data.shape[:2]}.")
        low, high = float(value_range[0]), float(value_range[1])
        if not low < high:
            raise ValueError(f"Value range {value_range} should be increasing.")
        data = np.array(data, dtype=np.float64)
        if not np.all(np.isfinite(data)):
            raise ValueError("Image samples should be finite.")
        if np.any(data < low) or np.any(data > high):
            raise ValueError(f"Image samples should lie inside the range [{low}, {high}].")
        data.flags.writeable = False
        self._data = data
        self._range = (low, high)

    @classmethod
    def clipped(cls, data, value_range=(0., 1.)):
        r"""Construct a PlanarImage after clamping `data` into `value_range`."""
        return cls(np.clip(np.asarray(data, dtype=np.float64), *value_range), value_range)

    @property
    def data(self):
        r"""Read-only samples of shape :math:`(H, W, C)`."""
        return self._data

    @property
    def value_range(self):
        r"""Declared (minimum, maximum) sample value."""
        return self._range

    @property
    def height(self):
        r"""Number of rows."""
        return self._data.shape[0]

    @property
    def width(self):
        r"""Number of columns."""
        return self._data.shape[1]

    @property
    def channels(self):
        r"""Number of channels, 1 or 3."""
        return self._data.shape[2]

    @property
    def shape(self):
        r"""Shape :math:`(H, W, C)` of the samples."""
        return self._data.shape

    def __array__(self, dtype=None, copy=None):
        return self._data if dtype is None else self._data.astype(dtype)

    def __repr__(self):
        return f"PlanarImage(height={self.height}, width={self.width}, channels={self.channels})"


class DisparityMap:
    r"""
    Dense horizontal disparity field in pixels with a validity mask.

    Invalid pixels (holes in ground truth, occlusions) are excluded from every metric and loss.
    Their stored value is zero.

    Attributes
    ----------
    values : ndarray(H, W)
        Non-negative, finite disparities wherever `valid` is true.
    valid : ndarray(H, W) of bool
        Per-pixel validity.

    """

    def __init__(self, values, valid=None):
        r"""
        Construct the DisparityMap object.

        Parameters
        ----------
        values : ndarray(H, W)
            Disparities in pixels. Non-finite entries are marked invalid.
        valid : ndarray(H, W) of bool, optional
            Validity mask. If `None`, every finite entry is valid.

        Raises
        ------
        TypeError :
            If `values` is not a numpy array.
        ValueError :
            If shapes disagree or a valid value is negative.

        """
        if not isinstance(values, np.ndarray):
            raise TypeError(f"Argument values should be a numpy array, not {type(values)}.")
        if values.ndim != 2:
            raise ValueError(f"Argument values should be a 2D array, got {values.ndim} dimensions.")
        values = np.array(values, dtype=np.float64)
        finite = np.isfinite(values)
        if valid is None:
            valid = finite
        else:
            valid = np.asarray(valid, dtype=bool)
            if valid.shape != values.shape:
                raise ValueError(f"Validity mask shape {valid.shape} should equal {values.shape}.")
            valid = valid & finite
        if np.any(values[valid] < 0.):
            raise ValueError(f"Valid {self._quantity} should be non-negative.")
        values[~valid] = 0.
        values.flags.writeable = False
        valid.flags.writeable = False
        self._values = values
        self._valid = valid

    _quantity = "disparities"

    @property
    def values(self):
        r"""Read-only values, zero at invalid pixels."""
        return self._values

    @property
    def valid(self):
        r"""Read-only validity mask."""
        return self._valid

    @property
    def height(self):
        r"""Number of rows."""
        return self._values.shape[0]

    @property
    def width(self):
        r"""Number of columns."""
        return self._values.shape[1]

    @property
    def shape(self):
        r"""Shape :math:`(H, W)` of the map."""
        return self._values.shape

    def __array__(self, dtype=None, copy=None):
        return self._values if dtype is None else self._values.astype(dtype)

    def __repr__(self):
        return (f"{type(self).__name__}(height={self.height}, width={self.width}, "
                f"valid={int(self._valid.sum())})")


class DepthMap(DisparityMap):
    r"""Depth field in metres, with the same validity semantics as a DisparityMap."""

    _quantity = "depths"


def _unwrap(arr):
    r"""Return the sample array of a container (or the array itself) as float64."""
    if isinstance(arr, (PlanarImage, DisparityMap)):
        return np.asarray(arr)
    if not isinstance(arr, np.ndarray):
        raise TypeError(f"Expected a numpy array or image container, got {type(arr)}.")
    return arr.astype(np.float64, copy=False)


def _forward_difference(arr, axis):
    out = np.zeros_like(arr)
    if axis == 1:
        out[:, :-1] = arr[:, 1:] - arr[:, :-1]
    else:
        out[:-1] = arr[1:] - arr[:-1]
    return out


def _forward_difference_adjoint(arr, axis):
    out = np.zeros_like(arr)
    if axis == 1:
        out[:, 1:] += arr[:, :-1]
        out[:, :-1] -= arr[:, :-1]
    else:
        out[1:] += arr[:-1]
        out[:-1] -= arr[:-1]
    return out


def _wrap_gradient(img, out):
    if isinstance(img, PlanarImage):
        low, high = img.value_range
        return PlanarImage(out, value_range=(low - high, high - low))
    return out


def grad_u(img):
    r"""
    Horizontal forward difference :math:`\nabla_u I(x, y) = I(x + 1, y) - I(x, y)`.

    Parameters
    ----------
    img : PlanarImage or ndarray(H, W[, C])
        The image.

    Returns
    -------
    PlanarImage or ndarray :
        Same kind and shape as `img`; the last column is zero. A PlanarImage result has the
        symmetric range :math:`[-(max - min), max - min]`.

    """
    return _wrap_gradient(img, _forward_difference(_unwrap(img), axis=1))


def grad_v(img):
    r"""Vertical forward difference :math:`I(x, y + 1) - I(x, y)`; the last row is zero."""
    return _wrap_gradient(img, _forward_difference(_unwrap(img), axis=0))


def grad_u_adjoint(arr):
    r"""
    Transpose of `grad_u` applied to `arr`.

    Entries of `arr` in the last column are ignored, since `grad_u` never writes them.
    """
    return _forward_difference_adjoint(_unwrap(arr), axis=1)


def grad_v_adjoint(arr):
    r"""Transpose of `grad_v` applied to `arr`; the last row of `arr` is ignored."""
    return _forward_difference_adjoint(_unwrap(arr), axis=0)


def _box_reduce(arr):
    height, width = arr.shape[0] // 2, arr.shape[1] // 2
    if height == 0 or width == 0:
        raise ValueError(f"Image of shape {arr.shape[:2]} is too small to downsample.")
    arr = arr[:2 * height, :2 * width]
    return arr[0::2, 0::2] + arr[1::2, 0::2] + arr[0::2, 1::2] + arr[1::2, 1::2]


def downsample2(img):
    r"""
    Halve the resolution with a 2x2 box filter.

    Odd dimensions are floored, i.e. the last row/column is dropped.

    Parameters
    ----------
    img : PlanarImage, DisparityMap or ndarray
        The input. A DisparityMap averages only its valid parents and halves the values, so that
        the result is a disparity at the coarser scale; a pixel is valid if any parent is valid.

    Returns
    -------
    PlanarImage, DisparityMap or ndarray :
        Same kind as `img`.

    """
    if isinstance(img, DisparityMap):
        valid = img.valid.astype(np.float64)
        total = _box_reduce(np.where(img.valid, img.values, 0.))
        count = _box_reduce(valid)
        values = np.where(count > 0, 0.5 * total / np.maximum(count, 1.), np.nan)
        return type(img)(values, valid=count > 0)
    out = 0.25 * _box_reduce(_unwrap(img))
    if isinstance(img, PlanarImage):
        return PlanarImage.clipped(out, img.value_range)
    return out


def build_pyramid(img, levels):
    r"""
    Build a box-filter pyramid, finest level first.

    Parameters
    ----------
    img : PlanarImage, DisparityMap or ndarray
        The finest level.
    levels : int
        Number of levels, at least one. ``build_pyramid(img, 1)`` is ``[img]``.

    Returns
    -------
    list :
        `levels` entries, entry :math:`k` being `img` downsampled :math:`k` times.

    Raises
    ------
    ValueError :
        If the coarsest level would be smaller than 2x2 pixels.

    """
    if not isinstance(levels, (int, np.integer)) or isinstance(levels, bool) or levels < 1:
        raise ValueError(f"Number of levels {levels} should be a positive integer.")
    height, width = np.shape(img)[:2]
    factor = 2 ** (levels - 1)
    if height // factor < 2 or width // factor < 2:
        raise ValueError(f"Image of size {height}x{width} is too small for {levels} levels.")
    pyramid = [img]
    for _ in range(levels - 1):
        pyramid.append(downsample2(pyramid[-1]))
    return pyramid


def resize_bilinear(arr, height, width):
    r"""
    Resize a field to `height` x `width` with bilinear interpolation.

    Parameters
    ----------
    arr : ndarray(H, W[, C])
        The field.
    height, width : int
        Target size.

    Returns
    -------
    ndarray :
        The resized field, with the same number of dimensions as `arr`.

    """
    arr = np.ascontiguousarray(_unwrap(arr))
    out = cv2.resize(arr, (int(width), int(height)), interpolation=cv2.INTER_LINEAR)
    if arr.ndim == 3 and out.ndim == 2:
        out = out[:, :, None]
    return out


def upsample_disparity(disp, height, width):
    r"""
    Resize a disparity field to a finer level, scaling the values by the width ratio.

    Parameters
    ----------
    disp : DisparityMap or ndarray(H, W)
        The coarse disparities.
    height, width : int
        Target size.

    Returns
    -------
    ndarray(height, width) :
        The upsampled disparities.

    """
    arr = _unwrap(disp)
    return resize_bilinear(arr, height, width) * (float(width) / arr.shape[1])
