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
Losses Module - value and gradient kernels of the joint recovery objective.

All terms are means over their samples so that the default weights keep their meaning across
pyramid levels. Absolute values use the subgradient :math:`\mathrm{sign}(0) = 0`.

Classes
-------
    Loss - Abstract base class of the loss terms.
    ContentLoss - :math:`\ell_1` data term between an image and its target.
    TVPrior - Anisotropic total-variation prior on an image.
    AppearanceLoss - SSIM and :math:`\ell_1` blend between a view and its reconstruction.
    SmoothnessLoss - Edge-aware total variation of a disparity field.
    LossWeights - Weights of the terms.
    LossBreakdown - Per-term values of one evaluation.

Functions
---------
    content_loss, tv_prior, ssim_map, appearance_loss, smoothness_loss - Functional forms.
    total_loss - The weighted objective and its gradients w.r.t. every latent field.

"""

from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.ndimage import uniform_filter, uniform_filter1d

from unmix.image import grad_u, grad_u_adjoint, grad_v, grad_v_adjoint
from unmix.mixture import Anaglyph, DoubleVision, MonocularLeft, MonocularRight, get_operator
from unmix.sampling import warp_adjoint, warp_from_left, warp_from_right


__all__ = [
    "Loss", "ContentLoss", "TVPrior", "AppearanceLoss", "SmoothnessLoss", "LossWeights",
    "LossBreakdown", "content_loss", "tv_prior", "ssim_map", "appearance_loss",
    "smoothness_loss", "total_loss",
]


SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


def _image_field(arr, name):
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"Argument {name} should have shape (H, W, C), got {arr.shape}.")
    return arr


def _disparity_field(arr, name):
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"Argument {name} should have shape (H, W), got {arr.shape}.")
    return arr


def _check_same(a, b, name_a, name_b):
    if a.shape != b.shape:
        raise ValueError(f"Shape of {name_a} {a.shape} should equal shape of {name_b} {b.shape}.")


def _box3(arr):
    return uniform_filter(arr, size=(3, 3, 1), mode="mirror")


def _box3_adjoint(arr):
    r"""Transpose of the 3x3 mirror-padded box filter."""
    out = arr
    for axis in (0, 1):
        grad = uniform_filter1d(out, size=3, axis=axis, mode="constant")
        first = np.take(out, [0], axis=axis) / 3.
        last = np.take(out, [out.shape[axis] - 1], axis=axis) / 3.
        # mirrored samples x[-1] = x[1] and x[n] = x[n - 2]
        index_first = [slice(None)] * out.ndim
        index_first[axis] = slice(1, 2)
        index_last = [slice(None)] * out.ndim
        index_last[axis] = slice(out.shape[axis] - 2, out.shape[axis] - 1)
        grad[tuple(index_first)] += first
        grad[tuple(index_last)] += last
        out = grad
    return out


class Loss(ABC):
    r"""Abstract base class for the loss terms."""

    @abstractmethod
    def evaluate(self, *arrays, deriv=False):
        r"""
        Abstract method for evaluating the loss term.

        Parameters
        ----------
        arrays : ndarray
            The fields the term depends on.
        deriv : bool, optional
            Whether to return the gradients of the term w.r.t. its fields as well.

        Returns
        -------
        value : float
            The loss value.
        grads : ndarray or tuple of ndarray
            Gradient(s) w.r.t. the fields, only returned if `deriv=True`.

        """
        raise NotImplementedError("Evaluate function should be implemented.")

    @staticmethod
    def _check_deriv(deriv):
        if not isinstance(deriv, bool):
            raise TypeError(f"Deriv {type(deriv)} should be Boolean type.")


class ContentLoss(Loss):
    r"""Mean absolute difference :math:`\frac{1}{N} \sum |p - t|`."""

    def evaluate(self, pred, target, deriv=False):
        r"""
        Evaluate the content loss of `pred` against `target`.

        Parameters
        ----------
        pred, target : ndarray(H, W, C)
            Predicted and target images.
        deriv : bool, optional
            Whether to return the subgradient w.r.t. `pred`, :math:`\mathrm{sign}(p - t) / N`.

        """
        self._check_deriv(deriv)
        pred, target = _image_field(pred, "pred"), _image_field(target, "target")
        _check_same(pred, target, "pred", "target")
        residual = pred - target
        value = float(np.mean(np.abs(residual)))
        if deriv:
            return value, np.sign(residual) / residual.size
        return value


class TVPrior(Loss):
    r"""
    Anisotropic total variation :math:`\frac{1}{N} \sum |\nabla_u I| + |\nabla_v I|`.

    Natural images have sparse gradients; the prior pushes the free channels of each view towards
    piecewise-smooth content.
    """

    def evaluate(self, pred, deriv=False):
        self._check_deriv(deriv)
        pred = _image_field(pred, "pred")
        diff_u, diff_v = grad_u(pred), grad_v(pred)
        value = float((np.sum(np.abs(diff_u)) + np.sum(np.abs(diff_v))) / pred.size)
        if deriv:
            grad = grad_u_adjoint(np.sign(diff_u)) + grad_v_adjoint(np.sign(diff_v))
            return value, grad / pred.size
        return value


def _ssim_terms(a, b):
    mu_a, mu_b = _box3(a), _box3(b)
    sigma_aa = _box3(a * a) - mu_a ** 2
    sigma_bb = _box3(b * b) - mu_b ** 2
    sigma_ab = _box3(a * b) - mu_a * mu_b
    num1 = 2. * mu_a * mu_b + SSIM_C1
    num2 = 2. * sigma_ab + SSIM_C2
    den1 = mu_a ** 2 + mu_b ** 2 + SSIM_C1
    den2 = sigma_aa + sigma_bb + SSIM_C2
    return mu_a, mu_b, num1, num2, den1, den2


def ssim_map(a, b, deriv=False, upstream=None):
    r"""
    Per-sample structural similarity of two images.

    Means, variances and the covariance are taken over a 3x3 uniform window with mirrored
    borders, channel by channel, with stabilizers :math:`C_1 = 0.01^2` and :math:`C_2 = 0.03^2`.

    .. math ::
        S = \frac{(2 \mu_a \mu_b + C_1)(2 \sigma_{ab} + C_2)}
                 {(\mu_a^2 + \mu_b^2 + C_1)(\sigma_a^2 + \sigma_b^2 + C_2)}

    Parameters
    ----------
    a, b : ndarray(H, W[, C])
        The images.
    deriv : bool, optional
        Whether to also return the gradient of :math:`\sum u \cdot S` w.r.t. `a`.
    upstream : ndarray, optional
        The weights :math:`u` of that gradient. Default is all ones.

    Returns
    -------
    ssim : ndarray(H, W, C)
        The SSIM field, values in :math:`(-1, 1]`.
    grad : ndarray(H, W, C)
        Gradient w.r.t. `a`, only returned if `deriv=True`. The gradient w.r.t. `b` is obtained
        by swapping the arguments.

    """
    a, b = _image_field(a, "a"), _image_field(b, "b")
    _check_same(a, b, "a", "b")
    mu_a, mu_b, num1, num2, den1, den2 = _ssim_terms(a, b)
    ssim = num1 * num2 / (den1 * den2)
    if not deriv:
        return ssim
    upstream = np.ones_like(a) if upstream is None else _image_field(upstream, "upstream")
    _check_same(a, upstream, "a", "upstream")
    d_mu = (2. * mu_b * (num2 - num1) / (den1 * den2)
            - 2. * mu_a * ssim * (1. / den1 - 1. / den2))
    d_sq = -ssim / den2
    d_cross = 2. * num1 / (den1 * den2)
    grad = (_box3_adjoint(upstream * d_mu) + 2. * a * _box3_adjoint(upstream * d_sq)
            + b * _box3_adjoint(upstream * d_cross))
    return ssim, grad


class AppearanceLoss(Loss):
    r"""
    Photometric reconstruction loss between a view and its warped reconstruction.

    .. math ::
        \frac{1}{N} \sum \lambda_1 \frac{1 - S(I, I'')}{2} + \lambda_2 |I - I''|

    """

    def __init__(self, lambda1=0.85, lambda2=0.15):
        r"""
        Construct the AppearanceLoss class.

        Parameters
        ----------
        lambda1, lambda2 : float, optional
            Weights of the SSIM and :math:`\ell_1` parts.

        """
        if lambda1 < 0. or lambda2 < 0.:
            raise ValueError(f"Weights lambda1={lambda1}, lambda2={lambda2} should be >= 0.")
        self._lambda1 = float(lambda1)
        self._lambda2 = float(lambda2)

    @property
    def lambda1(self):
        r"""Weight of the SSIM part."""
        return self._lambda1

    @property
    def lambda2(self):
        r"""Weight of the absolute-difference part."""
        return self._lambda2

    def evaluate(self, observed, reconstructed, deriv=False):
        r"""
        Evaluate the appearance loss.

        Parameters
        ----------
        observed, reconstructed : ndarray(H, W, C)
            The view and its reconstruction.
        deriv : bool, optional
            Whether to return the gradients w.r.t. `observed` and `reconstructed`.

        Returns
        -------
        value : float
            The loss.
        (grad_observed, grad_reconstructed) : tuple of ndarray
            Only returned if `deriv=True`.

        """
        self._check_deriv(deriv)
        observed = _image_field(observed, "observed")
        reconstructed = _image_field(reconstructed, "reconstructed")
        _check_same(observed, reconstructed, "observed", "reconstructed")
        size = observed.size
        residual = reconstructed - observed
        ssim = ssim_map(reconstructed, observed)
        value = float(np.sum(self._lambda1 * 0.5 * (1. - ssim)
                             + self._lambda2 * np.abs(residual)) / size)
        if not deriv:
            return value
        upstream = np.full_like(observed, -0.5 * self._lambda1 / size)
        _, grad_rec = ssim_map(reconstructed, observed, deriv=True, upstream=upstream)
        _, grad_obs = ssim_map(observed, reconstructed, deriv=True, upstream=upstream)
        sign = self._lambda2 * np.sign(residual) / size
        return value, (grad_obs - sign, grad_rec + sign)


class SmoothnessLoss(Loss):
    r"""
    Edge-aware disparity smoothness.

    .. math ::
        \frac{1}{N} \sum |\nabla_u d| e^{-|\nabla_u I|} + |\nabla_v d| e^{-|\nabla_v I|}

    where the image gradient magnitudes are averaged over channels and :math:`N = H W`.
    """

    def evaluate(self, disparity, image, deriv=False):
        r"""
        Evaluate the smoothness of `disparity` guided by `image`.

        Returns
        -------
        value : float
            The loss.
        (grad_disparity, grad_image) : tuple of ndarray
            Gradients w.r.t. both fields, only returned if `deriv=True`.

        """
        self._check_deriv(deriv)
        disparity = _disparity_field(disparity, "disparity")
        image = _image_field(image, "image")
        if image.shape[:2] != disparity.shape:
            raise ValueError(f"Image shape {image.shape[:2]} should equal disparity shape "
                             f"{disparity.shape}.")
        size = disparity.size
        value, grad_d, grad_img = 0., np.zeros_like(disparity), np.zeros_like(image)
        for diff, adjoint in ((grad_u, grad_u_adjoint), (grad_v, grad_v_adjoint)):
            diff_d, diff_img = diff(disparity), diff(image)
            weight = np.exp(-np.mean(np.abs(diff_img), axis=2))
            value += np.sum(np.abs(diff_d) * weight)
            if deriv:
                grad_d += adjoint(weight * np.sign(diff_d))
                scale = -(np.abs(diff_d) * weight / image.shape[2])[:, :, None]
                grad_img += adjoint(scale * np.sign(diff_img))
        value = float(value / size)
        if deriv:
            return value, (grad_d / size, grad_img / size)
        return value


def content_loss(pred, target):
    r"""Content loss value and subgradient w.r.t. `pred`; see `ContentLoss`."""
    return ContentLoss().evaluate(pred, target, deriv=True)


def tv_prior(pred):
    r"""Total-variation prior value and subgradient; see `TVPrior`."""
    return TVPrior().evaluate(pred, deriv=True)


def appearance_loss(observed, reconstructed, weights=None):
    r"""
    Appearance loss value and gradient w.r.t. `reconstructed`; see `AppearanceLoss`.

    Parameters
    ----------
    observed, reconstructed : ndarray(H, W, C)
        The view and its reconstruction.
    weights : LossWeights, optional
        Supplies :math:`\lambda_1, \lambda_2`; defaults are used when omitted.

    """
    weights = LossWeights() if weights is None else weights
    value, (_, grad_rec) = AppearanceLoss(weights.lambda1, weights.lambda2).evaluate(
        observed, reconstructed, deriv=True)
    return value, grad_rec


def smoothness_loss(disparity, image):
    r"""Smoothness value and gradient w.r.t. `disparity`; see `SmoothnessLoss`."""
    value, (grad_d, _) = SmoothnessLoss().evaluate(disparity, image, deriv=True)
    return value, grad_d


@dataclass(frozen=True)
class LossWeights:
    r"""
    Weights of the loss terms.

    Attributes
    ----------
    alpha_c : float
        Content weight.
    alpha_p : float
        Image prior weight.
    omega_w : float
        Warp (appearance) weight.
    omega_s : float
        Disparity smoothness weight.
    lambda1, lambda2 : float
        SSIM and absolute-difference mix inside the appearance loss; they sum to one.

    """

    alpha_c: float = 1.0
    alpha_p: float = 0.2
    omega_w: float = 1.0
    omega_s: float = 0.05
    lambda1: float = 0.85
    lambda2: float = 0.15

    def __post_init__(self):
        for field in fields(self):
            value = getattr(self, field.name)
            if isinstance(value, bool) or not isinstance(value, (int, float, np.floating)):
                raise TypeError(f"Weight {field.name} should be a number, not {type(value)}.")
            if not np.isfinite(value) or value < 0.:
                raise ValueError(f"Weight {field.name}={value} should be finite and >= 0.")
            object.__setattr__(self, field.name, float(value))
        if abs(self.lambda1 + self.lambda2 - 1.) > 1e-9:
            raise ValueError(f"Weights lambda1={self.lambda1} and lambda2={self.lambda2} should "
                             f"sum to one.")

    def separation_only(self):
        r"""Copy of the weights with the stereo terms switched off."""
        values = asdict(self)
        values.update(omega_w=0., omega_s=0.)
        return LossWeights(**values)


@dataclass(frozen=True)
class LossBreakdown:
    r"""Values of every loss term of one evaluation and their weighted total."""

    content_left: float = 0.
    content_right: float = 0.
    prior_left: float = 0.
    prior_right: float = 0.
    warp_left: float = 0.
    warp_right: float = 0.
    smooth_left: float = 0.
    smooth_right: float = 0.
    total: float = 0.

    def as_dict(self):
        r"""Return the breakdown as an ordered dictionary of floats."""
        return asdict(self)

    @classmethod
    def from_terms(cls, weights, **terms):
        r"""Build a breakdown from its components, computing the weighted total."""
        total = (weights.alpha_c * (terms.get("content_left", 0.) + terms.get("content_right", 0.))
                 + weights.alpha_p * (terms.get("prior_left", 0.) + terms.get("prior_right", 0.))
                 + weights.omega_w * (terms.get("warp_left", 0.) + terms.get("warp_right", 0.))
                 + weights.omega_s * (terms.get("smooth_left", 0.)
                                      + terms.get("smooth_right", 0.)))
        return cls(total=float(total), **{key: float(val) for key, val in terms.items()})


def _content_terms(op, mixture, left, right):
    r"""Content values and their gradients w.r.t. (left, right) for operator `op`."""
    grad_l, grad_r = np.zeros_like(left), np.zeros_like(right)
    terms = {"content_left": 0., "content_right": 0.}
    if isinstance(op, Anaglyph):
        terms["content_left"], g = content_loss(left[:, :, :1], mixture[:, :, :1])
        grad_l[:, :, :1] += g
        terms["content_right"], g = content_loss(right[:, :, 1:], mixture[:, :, 1:])
        grad_r[:, :, 1:] += g
    elif isinstance(op, DoubleVision):
        # L against 2I - R and R against 2I - L; both targets move with the other view
        terms["content_left"], g = content_loss(left, 2. * mixture - right)
        grad_l += g
        grad_r += g
        terms["content_right"], g = content_loss(right, 2. * mixture - left)
        grad_r += g
        grad_l += g
    elif isinstance(op, MonocularLeft):
        terms["content_left"], g = content_loss(left, mixture)
        grad_l += g
    elif isinstance(op, MonocularRight):
        terms["content_right"], g = content_loss(right, mixture)
        grad_r += g
    else:
        raise TypeError(f"Operator {type(op)} has no content term.")
    return terms, grad_l, grad_r


def total_loss(state, mixture, op, weights):
    r"""
    Evaluate the joint objective and its gradients.

    .. math ::
        L = \alpha_c (L_c^l + L_c^r) + \alpha_p (L_p^l + L_p^r)
            + \omega_w (L_w^l + L_w^r) + \omega_s (L_s^l + L_s^r)

    The left view is reconstructed from the right image and the left disparities, the right view
    from the left image and the right disparities. Terms whose weight is zero are skipped and
    reported as zero.

    Parameters
    ----------
    state : LatentState
        Anything with `left`, `right` (H, W, C) and `d_left`, `d_right` (H, W) arrays.
    mixture : PlanarImage or ndarray(H, W, C)
        The observed mixture at the state's resolution.
    op : MixtureOperator or str
        The composition operator.
    weights : LossWeights
        The term weights.

    Returns
    -------
    breakdown : LossBreakdown
        The per-term values and total.
    grads : dict
        Gradients w.r.t. "left", "right", "d_left" and "d_right".

    """
    if not isinstance(weights, LossWeights):
        raise TypeError(f"Weights should be a LossWeights instance, not {type(weights)}.")
    op = get_operator(op)
    left, right = _image_field(state.left, "left"), _image_field(state.right, "right")
    d_left = _disparity_field(state.d_left, "d_left")
    d_right = _disparity_field(state.d_right, "d_right")
    mixture = _image_field(mixture, "mixture")
    _check_same(left, right, "left", "right")
    _check_same(left, mixture, "left", "mixture")
    if d_left.shape != left.shape[:2] or d_right.shape != left.shape[:2]:
        raise ValueError(f"Disparity shapes {d_left.shape}, {d_right.shape} should equal image "
                         f"shape {left.shape[:2]}.")

    grads = {"left": np.zeros_like(left), "right": np.zeros_like(right),
             "d_left": np.zeros_like(d_left), "d_right": np.zeros_like(d_right)}
    terms = {}
    if weights.alpha_c > 0.:
        content, g_l, g_r = _content_terms(op, mixture, left, right)
        terms.update(content)
        grads["left"] += weights.alpha_c * g_l
        grads["right"] += weights.alpha_c * g_r
    if weights.alpha_p > 0.:
        terms["prior_left"], g_l = tv_prior(left)
        terms["prior_right"], g_r = tv_prior(right)
        grads["left"] += weights.alpha_p * g_l
        grads["right"] += weights.alpha_p * g_r
    if weights.omega_w > 0.:
        measure = AppearanceLoss(weights.lambda1, weights.lambda2)
        for view, source, disp, observed, result in (
                ("left", "right", "d_left", left, warp_from_right(right, d_left)),
                ("right", "left", "d_right", right, warp_from_left(left, d_right))):
            value, (g_obs, g_rec) = measure.evaluate(observed, result.warped, deriv=True)
            g_src, g_disp = warp_adjoint(result, g_rec)
            terms[f"warp_{view}"] = value
            grads[view] += weights.omega_w * g_obs
            grads[source] += weights.omega_w * g_src
            grads[disp] += weights.omega_w * g_disp
    if weights.omega_s > 0.:
        measure = SmoothnessLoss()
        for view, disp, values, image in (("left", "d_left", d_left, left),
                                         ("right", "d_right", d_right, right)):
            value, (g_disp, g_img) = measure.evaluate(values, image, deriv=True)
            terms[f"smooth_{view}"] = value
            grads[disp] += weights.omega_s * g_disp
            grads[view] += weights.omega_s * g_img
    return LossBreakdown.from_terms(weights, **terms), grads
