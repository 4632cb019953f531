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
File formats used by the stereo datasets.

- PNG (8/16-bit), PPM and PGM images, read and written with OpenCV.
- PFM ("Pf", single channel) disparities, the Middlebury ground-truth format. The sign of the
  scale line encodes endianness (negative is little-endian) and rows are stored bottom-up.
- KITTI disparity PNGs: 16-bit single channel, disparity = stored / 256, stored 0 = invalid.

"""

import os

import cv2
import numpy as np

from unmix.image import DisparityMap, PlanarImage


__all__ = [
    "load_image", "save_image", "load_pfm", "save_pfm", "load_kitti_disparity",
    "save_kitti_disparity",
]


_MAX_VALUE = {8: 255, 16: 65535}


def _read_raw(path):
    if not os.path.isfile(path):
        raise FileNotFoundError(f"Image file {path} does not exist.")
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise OSError(f"Image file {path} could not be read.")
    if raw.size == 0:
        raise ValueError(f"Image file {path} has zero size.")
    return raw


def _write_raw(path, raw):
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise OSError(f"Directory {directory} does not exist.")
    try:
        ok = cv2.imwrite(str(path), raw)
    except cv2.error as err:
        raise OSError(f"Image file {path} could not be written: {err}") from err
    if not ok:
        raise OSError(f"Image file {path} could not be written.")


def load_image(path):
    r"""
    Load an 8- or 16-bit PNG/PPM/PGM image with samples scaled linearly into :math:`[0, 1]`.

    Parameters
    ----------
    path : str
        Path to the image file.

    Returns
    -------
    PlanarImage :
        Single channel images keep one channel; colour images are returned in RGB order.
        An alpha channel, if any, is dropped.

    Raises
    ------
    FileNotFoundError :
        If the file does not exist.
    OSError :
        If the file cannot be decoded.
    ValueError :
        If the bit depth is not 8 or 16, or the image has zero size.

    """
    raw = _read_raw(path)
    if raw.dtype == np.uint8:
        scale = _MAX_VALUE[8]
    elif raw.dtype == np.uint16:
        scale = _MAX_VALUE[16]
    else:
        raise ValueError(f"Image file {path} has unsupported sample type {raw.dtype}.")
    if raw.ndim == 3:
        if raw.shape[2] == 4:
            raw = raw[:, :, :3]
        raw = raw[:, :, ::-1]
    return PlanarImage(raw.astype(np.float64) / scale)


def save_image(img, path, bit_depth=8):
    r"""
    Save an image as PNG/PPM/PGM (chosen by the file extension).

    Samples are clamped to the image range, mapped linearly onto the integer scale and rounded
    half-up, so a save/load round trip is accurate to :math:`1 / (2 (2^{bits} - 1))`.

    Parameters
    ----------
    img : PlanarImage
        The image.
    path : str
        Output path; its directory must exist.
    bit_depth : int, optional
        8 or 16.

    """
    if not isinstance(img, PlanarImage):
        raise TypeError(f"Argument img should be a PlanarImage, not {type(img)}.")
    if bit_depth not in _MAX_VALUE:
        raise ValueError(f"Bit depth {bit_depth} should be 8 or 16.")
    low, high = img.value_range
    unit = (np.clip(img.data, low, high) - low) / (high - low)
    maxval = _MAX_VALUE[bit_depth]
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    raw = np.floor(unit * maxval + 0.5).astype(dtype)
    if img.channels == 1:
        raw = raw[:, :, 0]
    else:
        raw = np.ascontiguousarray(raw[:, :, ::-1])
    _write_raw(path, raw)


def load_pfm(path, scale=1.0):
    r"""
    Load a single channel ("Pf") PFM disparity file.

    Parameters
    ----------
    path : str
        Path to the PFM file.
    scale : float, optional
        Factor applied to every value after loading (e.g. the Middlebury resolution scale).

    Returns
    -------
    DisparityMap :
        Rows ordered top-down; non-positive and non-finite values are invalid.

    Raises
    ------
    ValueError :
        If the header is malformed or the payload is truncated.

    """
    if not os.path.isfile(path):
        raise FileNotFoundError(f"PFM file {path} does not exist.")
    with open(path, "rb") as handle:
        header = handle.readline().decode("ascii", errors="replace").strip()
        if header != "Pf":
            raise ValueError(f"PFM file {path} should start with 'Pf', found '{header}'.")

        def _next_line():
            line = handle.readline()
            while line:
                text = line.decode("ascii", errors="replace").strip()
                if text and not text.startswith("#"):
                    return text
                line = handle.readline()
            raise ValueError(f"PFM file {path} has an incomplete header.")

        try:
            width, height = (int(item) for item in _next_line().split())
            file_scale = float(_next_line())
        except ValueError as err:
            raise ValueError(f"PFM file {path} has a malformed header: {err}") from err
        if width <= 0 or height <= 0 or file_scale == 0.:
            raise ValueError(f"PFM file {path} has invalid size or scale.")
        endian = "<" if file_scale < 0 else ">"
        payload = handle.read()
    count = width * height
    if len(payload) < 4 * count:
        raise ValueError(f"PFM file {path} is truncated: expected {count} values.")
    data = np.frombuffer(payload, dtype=f"{endian}f4", count=count).reshape(height, width)
    data = np.flipud(data).astype(np.float64) * scale
    valid = np.isfinite(data) & (data > 0.)
    return DisparityMap(np.where(valid, data, 0.), valid=valid)


def save_pfm(disp, path):
    r"""
    Save a DisparityMap as a little-endian "Pf" file.

    Invalid pixels are written as :math:`+\infty`, the Middlebury hole convention. Valid zero
    disparities are written as 0, which `load_pfm` reads back as holes (non-positive values are
    invalid there). Unlike the KITTI PNG, which stores a valid 0 as the smallest code, the PFM
    round trip therefore loses valid zeros.
    """
    if not isinstance(disp, DisparityMap):
        raise TypeError(f"Argument disp should be a DisparityMap, not {type(disp)}.")
    data = np.where(disp.valid, disp.values, np.inf).astype("<f4")
    try:
        with open(path, "wb") as handle:
            handle.write(f"Pf\n{disp.width} {disp.height}\n-1.0\n".encode("ascii"))
            handle.write(np.ascontiguousarray(np.flipud(data)).tobytes())
    except OSError as err:
        raise OSError(f"PFM file {path} could not be written: {err}") from err


def load_kitti_disparity(path):
    r"""
    Load a KITTI 16-bit disparity PNG.

    Returns
    -------
    DisparityMap :
        Values ``stored / 256``; stored zeros are invalid.

    Raises
    ------
    ValueError :
        If the file is not a 16-bit single channel image.

    """
    raw = _read_raw(path)
    if raw.dtype != np.uint16 or raw.ndim != 2:
        raise ValueError(f"KITTI disparity {path} should be a 16-bit single channel PNG.")
    valid = raw > 0
    return DisparityMap(raw.astype(np.float64) / 256., valid=valid)


def save_kitti_disparity(disp, path):
    r"""
    Save a DisparityMap in the KITTI 16-bit encoding.

    Valid values are stored as ``round(256 d)`` clipped to :math:`[1, 65535]`, so a valid zero
    disparity is stored as the smallest positive code; invalid pixels are stored as zero.
    """
    if not isinstance(disp, DisparityMap):
        raise TypeError(f"Argument disp should be a DisparityMap, not {type(disp)}.")
    stored = np.clip(np.floor(disp.values * 256. + 0.5), 1, 65535)
    stored = np.where(disp.valid, stored, 0).astype(np.uint16)
    _write_raw(path, stored)
