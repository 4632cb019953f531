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
Oracle Module - exhaustive cost-volume stereo matching and the closed-form view recoveries.

The matching cost reuses the photometric measure of the appearance loss (3x3 SSIM blended with
a 3x3 mean absolute difference), so the oracle and the solver score candidate disparities the
same way. The oracle initializes the solver and serves as an independent cross-check of it.

Classes
-------
    CostVolume - Per-pixel matching costs for every integer disparity.

Functions
---------
    build_cost_volume - Build a left- or right-referenced cost volume.
    build_echo_volume - Cost volume of a double-vision mixture against itself.
    wta_disparity - Winner-take-all disparities with parabolic sub-pixel refinement.
    lr_consistency - Left-right consistency check.
    fill_occlusions - Background-preferring scanline fill of flagged pixels.
    estimate_disparity_pair - WTA disparities of both views.
    colorize_anaglyph - Recover the unobserved anaglyph channels by channel warping.
    separate_double_vision - Least-squares pair of a double-vision mixture given disparities.

"""

import logging

import numpy as np
from scipy import sparse
from scipy.ndimage import uniform_filter
from scipy.sparse.linalg import lsqr

from unmix.image import DisparityMap, PlanarImage, grad_u, grad_v
from unmix.losses import LossWeights, ssim_map
from unmix.mixture import DoubleVision
from unmix.sampling import warp_from_left, warp_from_right


__all__ = [
    "CostVolume", "build_cost_volume", "build_echo_volume", "wta_disparity", "lr_consistency",
    "fill_occlusions", "estimate_disparity_pair", "colorize_anaglyph", "separate_double_vision",
]


logger = logging.getLogger(__name__)

_REFERENCES = ("left", "right")


class CostVolume:
    r"""
    Matching costs of every pixel against every integer disparity :math:`0, \dots, d_{max}`.

    Attributes
    ----------
    costs : ndarray(H, W, D + 1)
        Costs in :math:`[0, c_{max}]`.
    max_cost : float
        Penalty of candidates whose match falls outside the other image.
    reference : str
        The view the volume is indexed by, "left" or "right".

    """

    def __init__(self, costs, max_cost, reference="left"):
        costs = np.asarray(costs, dtype=np.float64)
        if costs.ndim != 3 or costs.shape[2] < 1:
            raise ValueError(f"Costs should have shape (H, W, D + 1), got {costs.shape}.")
        if not np.all(np.isfinite(costs)) or np.any(costs < 0.):
            raise ValueError("Costs should be finite and non-negative.")
        if reference not in _REFERENCES:
            raise ValueError(f"Reference {reference} should be one of {_REFERENCES}.")
        self._costs = costs
        self._max_cost = float(max_cost)
        self._reference = reference

    @property
    def costs(self):
        r"""Cost array of shape (H, W, D + 1)."""
        return self._costs

    @property
    def max_cost(self):
        r"""Cost assigned to out-of-frame candidates."""
        return self._max_cost

    @property
    def reference(self):
        r"""The reference view."""
        return self._reference

    @property
    def height(self):
        return self._costs.shape[0]

    @property
    def width(self):
        return self._costs.shape[1]

    @property
    def d_max(self):
        r"""Largest candidate disparity."""
        return self._costs.shape[2] - 1


def _left_referenced(left, right, d_max, weights, min_disparity):
    height, width = left.shape[:2]
    max_cost = weights.lambda1 + weights.lambda2
    costs = np.full((height, width, d_max + 1), max_cost)
    for disp in range(min_disparity, min(d_max, width - 1) + 1):
        shifted = np.empty_like(right)
        shifted[:, disp:] = right[:, :width - disp]
        shifted[:, :disp] = right[:, :1]
        ssim = ssim_map(left, shifted)
        diff = uniform_filter(np.abs(left - shifted), size=(3, 3, 1), mode="mirror")
        cost = np.mean(weights.lambda1 * 0.5 * (1. - ssim) + weights.lambda2 * diff, axis=2)
        costs[:, disp:, disp] = np.clip(cost[:, disp:], 0., max_cost)
    return costs, max_cost


def build_cost_volume(left, right, d_max, weights=None, reference="left", aggregation=1,
                      min_disparity=0):
    r"""
    Build the matching cost volume of a rectified pair.

    A left-referenced volume compares left(x) with right(x - d); a right-referenced one compares
    right(x) with left(x + d). Candidates whose match falls outside the image get the maximum cost
    :math:`\lambda_1 + \lambda_2`.

    Parameters
    ----------
    left, right : PlanarImage or ndarray(H, W[, C])
        The pair.
    d_max : int
        Largest candidate disparity, at least one.
    weights : LossWeights, optional
        Supplies :math:`\lambda_1, \lambda_2` of the cost. Default weights are used if omitted.
    reference : str, optional
        "left" (default) or "right".
    aggregation : int, optional
        Odd side of a box window averaging the costs spatially. Default 1 (none).
    min_disparity : int, optional
        Candidates below this disparity get the maximum cost.

    Returns
    -------
    CostVolume :
        The volume.

    Raises
    ------
    ValueError :
        If the images disagree in shape or an argument is out of range.

    """
    weights = LossWeights() if weights is None else weights
    if not isinstance(weights, LossWeights):
        raise TypeError(f"Weights should be a LossWeights instance, not {type(weights)}.")
    left, right = np.asarray(left, dtype=np.float64), np.asarray(right, dtype=np.float64)
    if left.ndim == 2:
        left, right = left[:, :, None], right[:, :, None]
    if left.shape != right.shape or left.ndim != 3:
        raise ValueError(f"Left shape {left.shape} and right shape {right.shape} should agree.")
    if not isinstance(d_max, (int, np.integer)) or d_max < 1:
        raise ValueError(f"Argument d_max={d_max} should be a positive integer.")
    if not isinstance(aggregation, (int, np.integer)) or aggregation < 1 or aggregation % 2 == 0:
        raise ValueError(f"Argument aggregation={aggregation} should be a positive odd integer.")
    if not 0 <= min_disparity <= d_max:
        raise ValueError(f"Argument min_disparity={min_disparity} should be in [0, {d_max}].")
    if reference not in _REFERENCES:
        raise ValueError(f"Reference {reference} should be one of {_REFERENCES}.")

    if reference == "left":
        costs, max_cost = _left_referenced(left, right, int(d_max), weights, int(min_disparity))
    else:
        costs, max_cost = _left_referenced(right[:, ::-1], left[:, ::-1], int(d_max), weights,
                                           int(min_disparity))
        costs = costs[:, ::-1]
    if aggregation > 1:
        costs = uniform_filter(costs, size=(aggregation, aggregation, 1), mode="nearest")
    logger.debug("Built %s-referenced cost volume %s.", reference, costs.shape)
    return CostVolume(np.ascontiguousarray(costs), max_cost, reference)


def _echo_source(arr, lag):
    r"""View hidden at `lag` in a doubled image, read off left to right with clamped borders."""
    width = arr.shape[1]
    source = np.empty_like(arr)
    source[:, :lag] = 2. * arr[:, :lag] - arr[:, :1]
    for start in range(lag, width, lag):
        stop = min(start + lag, width)
        source[:, start:stop] = 2. * arr[:, start:stop] - source[:, start - lag:stop - lag]
    return source


def _roughness(arr):
    return np.mean(np.abs(grad_u(arr)) + np.abs(grad_v(arr)), axis=2)


def _echo_costs(arr, d_max, min_lag):
    height, width = arr.shape[:2]
    costs = np.full((height, width, d_max + 1), np.nan)
    for lag in range(min_lag, min(d_max, width - 1) + 1):
        source = _echo_source(arr, lag)
        cost = _roughness(source) + _roughness(2. * arr - source)
        # the partners of the first `lag` columns are outside the image
        costs[:, lag:, lag] = cost[:, lag:]
    tested = np.isfinite(costs)
    max_cost = float(costs[tested].max()) if np.any(tested) else 1.
    costs[~tested] = max_cost
    return costs, max_cost


def build_echo_volume(mixture, d_max, reference="left", aggregation=1, min_lag=1):
    r"""
    Build the cost volume of a double-vision mixture :math:`I = (I_L + I_R) / 2` against itself.

    For every candidate lag :math:`k` the mixture is undoubled under the hypothesis of a constant
    disparity :math:`k`: for a left reference
    :math:`I_R(x) = 2 I(x) - I_R(\max(x - k, 0))` is solved along each row and
    :math:`I_L = 2 I - I_R`. The cost of :math:`k` is the total variation of both recovered views.
    At the true disparity these are the original views; at a wrong lag the recursion accumulates
    ghosts and the views get rough. Pixels whose partner at :math:`x - k` falls outside the image
    get the maximum cost. A right reference runs the recursion from the right border.

    Parameters
    ----------
    mixture : PlanarImage or ndarray(H, W[, C])
        The doubled image.
    d_max : int
        Largest candidate lag, at least one.
    reference : str, optional
        "left" (default) or "right".
    aggregation : int, optional
        Odd side of a box window averaging the costs spatially. Default 1 (none).
    min_lag : int, optional
        Smallest tested lag, at least one; lag zero explains any image and is never tested.

    Returns
    -------
    CostVolume :
        The volume. Untested lags get the largest tested cost.

    Raises
    ------
    ValueError :
        If an argument is out of range.

    """
    arr = np.asarray(mixture, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"Mixture should have shape (H, W[, C]), got {arr.shape}.")
    if not isinstance(d_max, (int, np.integer)) or d_max < 1:
        raise ValueError(f"Argument d_max={d_max} should be a positive integer.")
    if not isinstance(aggregation, (int, np.integer)) or aggregation < 1 or aggregation % 2 == 0:
        raise ValueError(f"Argument aggregation={aggregation} should be a positive odd integer.")
    if not isinstance(min_lag, (int, np.integer)) or not 1 <= min_lag <= d_max:
        raise ValueError(f"Argument min_lag={min_lag} should be an integer in [1, {d_max}].")
    if reference not in _REFERENCES:
        raise ValueError(f"Reference {reference} should be one of {_REFERENCES}.")

    if reference == "left":
        costs, max_cost = _echo_costs(arr, int(d_max), int(min_lag))
    else:
        costs, max_cost = _echo_costs(arr[:, ::-1], int(d_max), int(min_lag))
        costs = costs[:, ::-1]
    if aggregation > 1:
        costs = uniform_filter(costs, size=(aggregation, aggregation, 1), mode="nearest")
    logger.debug("Built %s-referenced echo volume %s.", reference, costs.shape)
    return CostVolume(np.ascontiguousarray(costs), max_cost, reference)


def wta_disparity(volume, subpixel=True):
    r"""
    Winner-take-all disparity of a cost volume.

    The integer argmin (ties go to the smaller disparity) is refined by the vertex of the parabola
    through it and its two neighbours, :math:`\delta = (c_- - c_+) / (2 (c_- + c_+ - 2 c_0))`,
    when the argmin is interior and the parabola is convex. The offset is clamped to
    :math:`[-0.5, 0.5]`.

    Parameters
    ----------
    volume : CostVolume
        The costs.
    subpixel : bool, optional
        Whether to refine the integer argmin. Default True.

    Returns
    -------
    DisparityMap :
        Disparities of the reference view.

    """
    if not isinstance(volume, CostVolume):
        raise TypeError(f"Argument volume should be a CostVolume, not {type(volume)}.")
    costs = volume.costs
    best = np.argmin(costs, axis=2)
    disparity = best.astype(np.float64)
    interior = (best > 0) & (best < volume.d_max)
    index = np.clip(best, 1, max(volume.d_max - 1, 1))[:, :, None]
    if subpixel and volume.d_max >= 2:
        c_minus = np.take_along_axis(costs, index - 1, axis=2)[:, :, 0]
        c_zero = np.take_along_axis(costs, index, axis=2)[:, :, 0]
        c_plus = np.take_along_axis(costs, index + 1, axis=2)[:, :, 0]
        denom = c_minus + c_plus - 2. * c_zero
        refine = interior & (denom > 0.)
        offset = np.zeros_like(disparity)
        offset[refine] = (c_minus[refine] - c_plus[refine]) / (2. * denom[refine])
        disparity += np.clip(offset, -0.5, 0.5)
    return DisparityMap(disparity)


def _values_and_valid(disp, name):
    if isinstance(disp, DisparityMap):
        return disp.values, disp.valid
    values = np.asarray(disp, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"Argument {name} should have shape (H, W), got {values.shape}.")
    return values, np.isfinite(values)


def lr_consistency(d_ref, d_other, tau=1.0, reference="left"):
    r"""
    Flag pixels whose disparity disagrees with the other view's.

    For a left reference, pixel :math:`(x, y)` is occluded iff
    :math:`|d_L(x, y) - d_R(x - [d_L(x, y)], y)| > \tau` or the lookup falls outside the image,
    where :math:`[\cdot]` rounds half up. A right reference looks up :math:`x + [d_R(x, y)]`.
    Invalid pixels of either map are flagged as well.

    Returns
    -------
    ndarray(H, W) of bool :
        The occlusion mask.

    """
    ref, ref_valid = _values_and_valid(d_ref, "d_ref")
    other, other_valid = _values_and_valid(d_other, "d_other")
    if ref.shape != other.shape:
        raise ValueError(f"Shapes {ref.shape} and {other.shape} of the maps should agree.")
    if tau < 0.:
        raise ValueError(f"Threshold tau={tau} should be non-negative.")
    if reference not in _REFERENCES:
        raise ValueError(f"Reference {reference} should be one of {_REFERENCES}.")
    height, width = ref.shape
    shift = np.floor(np.where(ref_valid, ref, 0.) + 0.5).astype(np.intp)
    columns = np.arange(width)[None, :]
    target = columns - shift if reference == "left" else columns + shift
    outside = (target < 0) | (target >= width)
    target = np.clip(target, 0, width - 1)
    rows = np.arange(height)[:, None]
    looked_up = other[rows, target]
    disagree = ~other_valid[rows, target] | (np.abs(ref - looked_up) > tau)
    return ~ref_valid | outside | disagree


def fill_occlusions(disp, mask):
    r"""
    Fill flagged pixels along their scanline, preferring the background.

    Each hole (flagged or invalid pixel) takes the smaller of the nearest valid disparities to its
    left and to its right on the same row. Rows without any valid pixel take the median of all
    valid pixels (zero if there are none).

    Parameters
    ----------
    disp : DisparityMap or ndarray(H, W)
        The disparities.
    mask : ndarray(H, W) of bool
        The pixels to fill.

    Returns
    -------
    DisparityMap :
        A fully valid map, equal to `disp` outside the holes.

    """
    values, valid = _values_and_valid(disp, "disp")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != values.shape:
        raise ValueError(f"Mask shape {mask.shape} should equal disparity shape {values.shape}.")
    keep = valid & ~mask
    if np.all(keep):
        return DisparityMap(values.copy())
    height, width = values.shape
    columns = np.broadcast_to(np.arange(width), (height, width))
    rows = np.arange(height)[:, None]
    left_index = np.maximum.accumulate(np.where(keep, columns, -1), axis=1)
    right_index = np.minimum.accumulate(np.where(keep, columns, width)[:, ::-1], axis=1)[:, ::-1]
    left_value = np.where(left_index >= 0, values[rows, np.clip(left_index, 0, width - 1)],
                          np.inf)
    right_value = np.where(right_index < width, values[rows, np.clip(right_index, 0, width - 1)],
                           np.inf)
    fill = np.minimum(left_value, right_value)
    fallback = float(np.median(values[keep])) if np.any(keep) else 0.
    fill[~np.isfinite(fill)] = fallback
    return DisparityMap(np.where(keep, values, fill))


def estimate_disparity_pair(left, right, d_max, weights=None, aggregation=1):
    r"""
    Winner-take-all disparities of both views of a rectified pair.

    Returns
    -------
    (DisparityMap, DisparityMap) :
        Left- and right-referenced disparities.

    """
    d_left = wta_disparity(build_cost_volume(left, right, d_max, weights, "left", aggregation))
    d_right = wta_disparity(build_cost_volume(left, right, d_max, weights, "right", aggregation))
    return d_left, d_right


def colorize_anaglyph(mixture, d_left, d_right, tau=1.0):
    r"""
    Recover the full-colour pair from an anaglyph and the disparities of both views.

    The left green/blue channels are the mixture's green/blue (the right view's) warped with the
    left disparities; the right red channel is the mixture's red (the left view's) warped with
    the right disparities. Pixels failing the left-right check are warped with background-filled
    disparities. Observed channels are copied bit-exactly.

    Parameters
    ----------
    mixture : PlanarImage or ndarray(H, W, 3)
        The anaglyph.
    d_left, d_right : DisparityMap or ndarray(H, W)
        Disparities of the left and right views.
    tau : float, optional
        Threshold of the left-right check, in pixels.

    Returns
    -------
    (PlanarImage, PlanarImage) :
        The left and right views.

    """
    arr = np.asarray(mixture, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"Anaglyph should have shape (H, W, 3), got {arr.shape}.")
    values_l, _ = _values_and_valid(d_left, "d_left")
    values_r, _ = _values_and_valid(d_right, "d_right")
    if values_l.shape != arr.shape[:2] or values_r.shape != arr.shape[:2]:
        raise ValueError(f"Disparity shapes {values_l.shape}, {values_r.shape} should equal "
                         f"image shape {arr.shape[:2]}.")
    filled_l = fill_occlusions(d_left, lr_consistency(d_left, d_right, tau, "left"))
    filled_r = fill_occlusions(d_right, lr_consistency(d_right, d_left, tau, "right"))
    left, right = arr.copy(), arr.copy()
    left[:, :, 1:] = warp_from_right(arr[:, :, 1:], filled_l.values).warped
    right[:, :, :1] = warp_from_left(arr[:, :, :1], filled_r.values).warped
    # pinned channels stay bit-exact
    left[:, :, 0] = arr[:, :, 0]
    right[:, :, 1:] = arr[:, :, 1:]
    return PlanarImage.clipped(left), PlanarImage.clipped(right)


def _warp_matrix(result):
    r"""Sparse matrix of a warp: row :math:`(y, x)` mixes its two source columns."""
    floor_index, weight = result.source_weights
    height, width = floor_index.shape
    size = height * width
    rows = np.arange(size)
    columns = (np.arange(height)[:, None] * width + floor_index).ravel()
    t = weight.ravel()
    return sparse.csr_matrix(
        (np.concatenate([1. - t, t]), (np.concatenate([rows, rows]),
                                       np.concatenate([columns, columns + 1]))),
        shape=(size, size),
    )


def separate_double_vision(mixture, d_left, d_right, prior=None, damping=0.1):
    r"""
    Recover the pair of a double-vision mixture given the disparities of both views.

    With :math:`I_L = 2 I - I_R` substituted, both warp relations
    :math:`I_L = W_L I_R` and :math:`I_R = W_R I_L` are linear in the right view:

    .. math ::
        (1 + W_L) I_R = 2 I, \qquad (1 + W_R) I_R = 2 W_R I.

    They are solved together in least squares with a Tikhonov term
    :math:`\mu^2 \|I_R - I_R^{(0)}\|^2` pulling towards a prior right view, one LSQR solve per
    channel. The pair is then projected onto the mixture constraint with the views kept in
    :math:`[0, 1]`.

    Parameters
    ----------
    mixture : PlanarImage or ndarray(H, W, C)
        The doubled image.
    d_left, d_right : DisparityMap or ndarray(H, W)
        Disparities of the left and right views.
    prior : PlanarImage or ndarray(H, W, C), optional
        Right view the damping pulls towards; the mixture itself if omitted.
    damping : float, optional
        Damping :math:`\mu`, positive. Frequencies the doubling nearly cancels are recovered
        only above this level.

    Returns
    -------
    (PlanarImage, PlanarImage) :
        The left and right views.

    """
    arr = np.asarray(mixture, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[1] < 2:
        raise ValueError(f"Mixture should have shape (H, W, C) with W >= 2, got {arr.shape}.")
    prior = arr if prior is None else np.asarray(prior, dtype=np.float64).reshape(arr.shape)
    if not damping > 0.:
        raise ValueError(f"Damping {damping} should be positive.")
    height, width, channels = arr.shape
    blank = np.zeros((height, width, 1))
    warp_l = _warp_matrix(warp_from_right(blank, d_left))
    warp_r = _warp_matrix(warp_from_left(blank, d_right))
    eye = sparse.identity(height * width, format="csr")
    system = sparse.vstack([eye + warp_l, eye + warp_r], format="csr")

    right = np.empty_like(arr)
    for c in range(channels):
        mix, start = arr[:, :, c].ravel(), prior[:, :, c].ravel()
        target = np.concatenate([2. * mix, 2. * (warp_r @ mix)])
        # solve for the correction to the prior so the damping pulls towards it
        result = lsqr(system, target - system @ start, damp=damping, atol=1e-10, btol=1e-10)
        right[:, :, c] = (start + result[0]).reshape(height, width)
        logger.debug("Channel %d separated in %d LSQR iterations.", c, result[2])
    left = 2. * arr - right
    left, right = DoubleVision().project(arr, left, right, clip=True)
    return PlanarImage.clipped(left), PlanarImage.clipped(right)
