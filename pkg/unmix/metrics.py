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
Metrics Module - image restoration, disparity and depth error measures.

Every metric ignores invalid ground-truth pixels. A prediction that is invalid where the ground
truth is valid counts as an error.

"""

from dataclasses import asdict, dataclass

import numpy as np

from unmix.image import DepthMap, DisparityMap


__all__ = [
    "PSNR_CAP", "DepthMetrics", "psnr", "bad_pixel_ratio", "d1_all", "disparity_to_depth",
    "eigen_depth_metrics", "evaluate_separation", "evaluate_disparity", "evaluate_depth",
]


PSNR_CAP = 99.0


def _as_map(disp, name):
    if isinstance(disp, DisparityMap):
        return disp
    if not isinstance(disp, np.ndarray):
        raise TypeError(f"Argument {name} should be a DisparityMap or ndarray, not {type(disp)}.")
    return DisparityMap(disp)


def psnr(a, b, crop=0):
    r"""
    Peak signal-to-noise ratio with peak 1, :math:`10 \log_{10}(1 / \mathrm{MSE})`.

    Parameters
    ----------
    a, b : PlanarImage or ndarray(H, W[, C])
        Images in [0, 1].
    crop : int, optional
        Number of border pixels excluded on every side.

    Returns
    -------
    float :
        The PSNR in decibels, capped at 99 dB (the value for identical images).

    """
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"Shapes {a.shape} and {b.shape} of the images should agree.")
    if crop < 0 or 2 * crop >= min(a.shape[:2]):
        raise ValueError(f"Crop {crop} should be non-negative and leave pixels of {a.shape[:2]}.")
    if crop:
        a, b = a[crop:-crop, crop:-crop], b[crop:-crop, crop:-crop]
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10. * np.log10(1. / mse)))


def _disparity_errors(disp, gt, mask=None):
    disp, gt = _as_map(disp, "disp"), _as_map(gt, "gt")
    if disp.shape != gt.shape:
        raise ValueError(f"Shapes {disp.shape} and {gt.shape} of the maps should agree.")
    valid = gt.valid if mask is None else gt.valid & np.asarray(mask, dtype=bool)
    if not np.any(valid):
        raise ValueError("Ground truth has no valid pixels.")
    error = np.where(disp.valid, np.abs(disp.values - gt.values), np.inf)
    return error[valid], gt.values[valid]


def bad_pixel_ratio(disp, gt, tau=1.0, mask=None):
    r"""
    Fraction of valid ground-truth pixels whose disparity error exceeds `tau` pixels.

    Parameters
    ----------
    disp, gt : DisparityMap or ndarray(H, W)
        Predicted and ground-truth disparities.
    tau : float, optional
        Threshold in pixels; 1 px is the Middlebury convention, 3 px the KITTI one.
    mask : ndarray(H, W) of bool, optional
        Extra restriction of the evaluated pixels, e.g. an interior window.

    Raises
    ------
    ValueError :
        If no pixel is evaluated.

    """
    if tau < 0.:
        raise ValueError(f"Threshold tau={tau} should be non-negative.")
    error, _ = _disparity_errors(disp, gt, mask)
    return float(np.mean(error > tau))


def d1_all(disp, gt, official=False, mask=None):
    r"""
    KITTI D1-all outlier ratio.

    By default a pixel is an outlier when its error exceeds 3 px. The official KITTI rule
    (`official=True`) additionally requires the error to exceed 5% of the true disparity.
    """
    error, truth = _disparity_errors(disp, gt, mask)
    outlier = error > 3.
    if official:
        outlier &= error > 0.05 * truth
    return float(np.mean(outlier))


def disparity_to_depth(disp, focal, baseline, epsilon=1e-3):
    r"""
    Convert disparities to depths, :math:`z = f B / d`.

    Parameters
    ----------
    disp : DisparityMap or ndarray(H, W)
        Disparities in pixels.
    focal : float
        Focal length in pixels.
    baseline : float
        Baseline in metres.
    epsilon : float, optional
        Disparities at or below this value become invalid depths.

    Returns
    -------
    DepthMap :
        Depths in metres.

    """
    if not focal > 0. or not baseline > 0.:
        raise ValueError(f"Focal {focal} and baseline {baseline} should be positive.")
    disp = _as_map(disp, "disp")
    valid = disp.valid & (disp.values > epsilon)
    depth = np.full(disp.shape, np.nan)
    depth[valid] = focal * baseline / disp.values[valid]
    return DepthMap(depth, valid=valid)


@dataclass(frozen=True)
class DepthMetrics:
    r"""Error and accuracy measures of a depth prediction."""

    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    delta1: float
    delta2: float
    delta3: float

    def as_dict(self):
        return asdict(self)


def eigen_depth_metrics(pred, gt, min_depth=1e-3, max_depth=80.):
    r"""
    Monocular depth metrics over mutually valid pixels.

    Both depths are clamped to `[min_depth, max_depth]` before computing

    - abs_rel :math:`= \mathrm{mean}(|p - g| / g)`
    - sq_rel :math:`= \mathrm{mean}((p - g)^2 / g)`
    - rmse :math:`= \sqrt{\mathrm{mean}((p - g)^2)}`
    - rmse_log :math:`= \sqrt{\mathrm{mean}((\log p - \log g)^2)}`
    - delta_k, the fraction with :math:`\max(p / g, g / p) < 1.25^k`.

    Returns
    -------
    DepthMetrics :
        The seven measures.

    Raises
    ------
    ValueError :
        If the caps are inconsistent or no pixel is valid in both maps.

    """
    if not 0. < min_depth < max_depth:
        raise ValueError(f"Depth caps should satisfy 0 < {min_depth} < {max_depth}.")
    pred, gt = _as_map(pred, "pred"), _as_map(gt, "gt")
    if pred.shape != gt.shape:
        raise ValueError(f"Shapes {pred.shape} and {gt.shape} of the maps should agree.")
    valid = pred.valid & gt.valid
    if not np.any(valid):
        raise ValueError("Prediction and ground truth share no valid pixels.")
    p = np.clip(pred.values[valid], min_depth, max_depth)
    g = np.clip(gt.values[valid], min_depth, max_depth)
    thresh = np.maximum(g / p, p / g)
    return DepthMetrics(
        abs_rel=float(np.mean(np.abs(g - p) / g)),
        sq_rel=float(np.mean((g - p) ** 2 / g)),
        rmse=float(np.sqrt(np.mean((g - p) ** 2))),
        rmse_log=float(np.sqrt(np.mean((np.log(g) - np.log(p)) ** 2))),
        delta1=float(np.mean(thresh < 1.25)),
        delta2=float(np.mean(thresh < 1.25 ** 2)),
        delta3=float(np.mean(thresh < 1.25 ** 3)),
    )


def evaluate_separation(left, right, gt_left, gt_right, crop=0):
    r"""PSNR of both recovered views, keyed "psnr_left" and "psnr_right"."""
    return {"psnr_left": psnr(left, gt_left, crop), "psnr_right": psnr(right, gt_right, crop)}


def evaluate_disparity(disp, gt, official_d1=False, mask=None):
    r"""Bad-pixel ratios at 1 and 3 px and D1-all, keyed "bad1", "bad3" and "d1_all"."""
    return {"bad1": bad_pixel_ratio(disp, gt, 1., mask),
            "bad3": bad_pixel_ratio(disp, gt, 3., mask),
            "d1_all": d1_all(disp, gt, official_d1, mask)}


def evaluate_depth(pred, gt, min_depth=1e-3, max_depth=80.):
    r"""Eigen depth metrics as a dictionary with the keys of `DepthMetrics`."""
    return eigen_depth_metrics(pred, gt, min_depth, max_depth).as_dict()
