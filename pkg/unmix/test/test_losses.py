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


import numpy as np
from numpy.testing import assert_almost_equal, assert_equal, assert_raises

from unmix.losses import (
    SSIM_C1, SSIM_C2, AppearanceLoss, ContentLoss, LossBreakdown, LossWeights, SmoothnessLoss,
    TVPrior, appearance_loss, content_loss, smoothness_loss, ssim_map, total_loss, tv_prior,
)
from unmix.mixture import Anaglyph, DoubleVision, MonocularLeft
from unmix.solver import LatentState
from unmix.synthetic import make_shifted_scene
from unmix.test.gradcheck import check_gradient, random_indices


def _ssim_constant(mu_a, mu_b):
    return (2. * mu_a * mu_b + SSIM_C1) * SSIM_C2 / ((mu_a ** 2 + mu_b ** 2 + SSIM_C1) * SSIM_C2)


def test_raises_loss_weights():
    r"""Test raise error when constructing LossWeights."""
    assert_raises(ValueError, LossWeights, alpha_c=-1.)
    assert_raises(ValueError, LossWeights, omega_w=np.inf)
    assert_raises(ValueError, LossWeights, lambda1=0.5, lambda2=0.4)
    assert_raises(TypeError, LossWeights, alpha_p="0.2")
    assert_raises(TypeError, LossWeights, omega_s=True)
    weights = LossWeights()
    assert_equal((weights.alpha_c, weights.alpha_p, weights.omega_w, weights.omega_s),
                 (1., 0.2, 1., 0.05))
    assert_equal((weights.lambda1, weights.lambda2), (0.85, 0.15))
    only = LossWeights(alpha_p=0.3).separation_only()
    assert_equal((only.alpha_p, only.omega_w, only.omega_s), (0.3, 0., 0.))


def test_raises_losses():
    r"""Test raise errors of the loss terms."""
    a = np.zeros((4, 4, 3))
    assert_raises(ValueError, content_loss, a, np.zeros((4, 5, 3)))
    assert_raises(ValueError, ssim_map, a, np.zeros((3, 4, 3)))
    assert_raises(ValueError, appearance_loss, a, np.zeros((4, 4, 1)))
    assert_raises(ValueError, smoothness_loss, np.zeros((4, 5)), a)
    assert_raises(ValueError, smoothness_loss, np.zeros((4, 4, 1)), a)
    assert_raises(TypeError, ContentLoss().evaluate, a, a, deriv="yes")
    assert_raises(ValueError, AppearanceLoss, -0.1, 1.1)


def test_content_loss():
    r"""Test the content loss values and subgradient."""
    rng = np.random.default_rng(0)
    pred = rng.uniform(0., 1., (5, 6, 3))
    value, grad = content_loss(pred, pred)
    assert_equal(value, 0.)
    assert_equal(grad, np.zeros_like(pred))
    value, grad = content_loss(np.full((2, 3, 3), 0.5), np.full((2, 3, 3), 0.25))
    assert_almost_equal(value, 0.25)
    assert_almost_equal(grad, np.full((2, 3, 3), 1. / 18.))
    target = rng.uniform(0., 1., (5, 6, 3))
    value, grad = content_loss(pred, target)
    assert abs(value - np.abs(pred - target).sum() / pred.size) < 1e-9
    assert_almost_equal(value, content_loss(target, pred)[0], decimal=14)
    assert_almost_equal(ContentLoss().evaluate(pred, target), value, decimal=14)
    assert check_gradient(lambda x: content_loss(x, target)[0], pred, grad) > 0


def test_tv_prior():
    r"""Test the total-variation prior values and subgradient."""
    value, grad = tv_prior(np.full((4, 5, 3), 0.4))
    assert_equal(value, 0.)
    assert_equal(grad, np.zeros((4, 5, 3)))
    # ramp on 8 columns: 7 differences of 1/8 on each row
    ramp = np.tile(np.arange(8) / 8., (3, 1))
    value, _ = tv_prior(ramp)
    assert_almost_equal(value, 3 * 7 * (1. / 8.) / ramp.size)
    img = np.random.default_rng(1).uniform(0., 1., (6, 7, 3))
    value, grad = tv_prior(img)
    assert_almost_equal(TVPrior().evaluate(img), value, decimal=14)
    assert check_gradient(lambda x: tv_prior(x)[0], img, grad) > 0.9 * img.size


def test_ssim_map():
    r"""Test the SSIM field properties."""
    rng = np.random.default_rng(2)
    a, b = rng.uniform(0., 1., (6, 7, 3)), rng.uniform(0., 1., (6, 7, 3))
    assert_almost_equal(ssim_map(a, a), np.ones((6, 7, 3)), decimal=12)
    assert_almost_equal(ssim_map(a, b), ssim_map(b, a), decimal=12)
    values = ssim_map(a, b)
    assert np.all(values > -1.) and np.all(values <= 1. + 1e-12)
    constant = ssim_map(np.full((4, 4, 1), 0.3), np.full((4, 4, 1), 0.4))
    assert_almost_equal(constant, np.full((4, 4, 1), _ssim_constant(0.3, 0.4)), decimal=10)


def test_ssim_map_gradient():
    r"""Test the SSIM gradient against finite differences, borders included."""
    rng = np.random.default_rng(3)
    a, b = rng.uniform(0., 1., (5, 6, 2)), rng.uniform(0., 1., (5, 6, 2))
    upstream = rng.normal(size=(5, 6, 2))
    _, grad = ssim_map(a, b, deriv=True, upstream=upstream)
    assert check_gradient(lambda x: np.sum(upstream * ssim_map(x, b)), a, grad) == a.size
    _, grad = ssim_map(a, b, deriv=True)
    assert check_gradient(lambda x: np.sum(ssim_map(x, b)), a, grad) == a.size


def test_appearance_loss():
    r"""Test the appearance loss values."""
    rng = np.random.default_rng(4)
    img = rng.uniform(0., 1., (5, 6, 3))
    value, grad = appearance_loss(img, img)
    assert_almost_equal(value, 0., decimal=12)
    assert_almost_equal(grad, np.zeros_like(img), decimal=12)
    weights = LossWeights(lambda1=0.85, lambda2=0.15)
    value, _ = appearance_loss(np.full((4, 4, 3), 0.3), np.full((4, 4, 3), 0.4), weights)
    expected = 0.15 * 0.1 + 0.85 * (1. - _ssim_constant(0.3, 0.4)) / 2.
    assert_almost_equal(value, expected, decimal=10)
    other = rng.uniform(0., 1., (5, 6, 3))
    assert_almost_equal(appearance_loss(img, other)[0], appearance_loss(other, img)[0],
                        decimal=12)
    assert_almost_equal(AppearanceLoss().evaluate(img, other), appearance_loss(img, other)[0],
                        decimal=14)


def test_appearance_loss_gradient():
    r"""Test both appearance loss gradients against finite differences."""
    rng = np.random.default_rng(5)
    observed, reconstructed = rng.uniform(0., 1., (5, 6, 3)), rng.uniform(0., 1., (5, 6, 3))
    measure = AppearanceLoss(0.6, 0.4)
    _, (grad_obs, grad_rec) = measure.evaluate(observed, reconstructed, deriv=True)
    checked = check_gradient(lambda x: measure.evaluate(observed, x), reconstructed, grad_rec)
    assert checked > 0.9 * reconstructed.size
    checked = check_gradient(lambda x: measure.evaluate(x, reconstructed), observed, grad_obs)
    assert checked > 0.9 * observed.size


def test_smoothness_loss():
    r"""Test the edge-aware smoothness values."""
    rng = np.random.default_rng(6)
    img = rng.uniform(0., 1., (4, 5, 3))
    value, grad = smoothness_loss(np.full((4, 5), 3.), img)
    assert_equal(value, 0.)
    assert_equal(grad, np.zeros((4, 5)))
    # a flat image reduces to plain total variation
    disp = rng.uniform(0., 5., (4, 5))
    value, _ = smoothness_loss(disp, np.full((4, 5, 3), 0.5))
    plain = (np.abs(np.diff(disp, axis=1)).sum() + np.abs(np.diff(disp, axis=0)).sum()) / 20.
    assert_almost_equal(value, plain, decimal=12)
    # a disparity step aligned with an image edge is cheaper than on a flat image
    step = np.tile([0., 0., 1., 1.], (4, 1))
    edge = np.tile([0., 0., 1., 1.], (4, 1))[:, :, None]
    on_edge, _ = smoothness_loss(step, edge)
    on_flat, _ = smoothness_loss(step, np.zeros((4, 4, 1)))
    assert_almost_equal(on_edge, 4. * np.exp(-1.) / 16.)
    assert_almost_equal(on_flat, 4. / 16.)
    assert on_edge < on_flat


def test_smoothness_loss_gradient():
    r"""Test the smoothness gradients w.r.t. disparity and image."""
    rng = np.random.default_rng(7)
    disp, img = rng.uniform(0., 5., (5, 6)), rng.uniform(0., 1., (5, 6, 3))
    measure = SmoothnessLoss()
    _, (grad_d, grad_img) = measure.evaluate(disp, img, deriv=True)
    assert check_gradient(lambda x: measure.evaluate(x, img), disp, grad_d) > 0.9 * disp.size
    assert check_gradient(lambda x: measure.evaluate(disp, x), img, grad_img) > 0.9 * img.size


def test_loss_breakdown():
    r"""Test the breakdown total is the weighted sum of the terms."""
    weights = LossWeights(alpha_c=2., alpha_p=0.5, omega_w=3., omega_s=0.25)
    terms = dict(content_left=0.1, content_right=0.2, prior_left=0.3, prior_right=0.4,
                 warp_left=0.5, warp_right=0.6, smooth_left=0.7, smooth_right=0.8)
    breakdown = LossBreakdown.from_terms(weights, **terms)
    expected = 2. * 0.3 + 0.5 * 0.7 + 3. * 1.1 + 0.25 * 1.5
    assert abs(breakdown.total - expected) <= 1e-9 * expected
    values = breakdown.as_dict()
    assert_equal(list(values), list(terms) + ["total"])
    assert_equal(LossBreakdown.from_terms(weights).total, 0.)


def _random_state(rng, height=16, width=24):
    return LatentState(
        left=rng.uniform(0.1, 0.9, (height, width, 3)),
        right=rng.uniform(0.1, 0.9, (height, width, 3)),
        d_left=rng.integers(0, 3, (height, width)) + rng.uniform(0.2, 0.8, (height, width)),
        d_right=rng.integers(0, 3, (height, width)) + rng.uniform(0.2, 0.8, (height, width)),
    )


def test_total_loss_terms():
    r"""Test the total loss reports every term and skips zero weights."""
    rng = np.random.default_rng(8)
    state = _random_state(rng, 8, 10)
    mixture = rng.uniform(0., 1., (8, 10, 3))
    weights = LossWeights()
    breakdown, grads = total_loss(state, mixture, Anaglyph(), weights)
    values = breakdown.as_dict()
    assert all(values[key] > 0. for key in values)
    expected = LossBreakdown.from_terms(weights, **{k: v for k, v in values.items()
                                                    if k != "total"}).total
    assert abs(breakdown.total - expected) <= 1e-9 * expected
    assert_equal(sorted(grads), ["d_left", "d_right", "left", "right"])
    breakdown, grads = total_loss(state, mixture, "anaglyph", weights.separation_only())
    assert_equal((breakdown.warp_left, breakdown.smooth_right), (0., 0.))
    assert_equal(grads["d_left"], np.zeros((8, 10)))
    assert_equal(grads["d_right"], np.zeros((8, 10)))
    breakdown, _ = total_loss(state, mixture, MonocularLeft(), weights)
    assert_equal(breakdown.content_right, 0.)
    assert_raises(TypeError, total_loss, state, mixture, Anaglyph(), {"alpha_c": 1.})
    assert_raises(ValueError, total_loss, state, mixture[:4], Anaglyph(), weights)


def test_total_loss_shifted_scene():
    r"""Test the true fields of a shifted scene beat zero disparities."""
    scene = make_shifted_scene(height=24, width=32, disparity=3, seed=1)
    mixture = scene.compose(Anaglyph())
    truth = LatentState(left=np.asarray(scene.left), right=np.asarray(scene.right),
                        d_left=np.asarray(scene.d_left), d_right=np.asarray(scene.d_right))
    breakdown, _ = total_loss(truth, mixture, Anaglyph(), LossWeights())
    assert breakdown.warp_left < 1e-3 and breakdown.warp_right < 1e-3
    assert_equal((breakdown.content_left, breakdown.content_right), (0., 0.))
    zeros = LatentState(left=truth.left, right=truth.right, d_left=np.zeros((24, 32)),
                        d_right=np.zeros((24, 32)))
    worse, _ = total_loss(zeros, mixture, Anaglyph(), LossWeights())
    assert worse.total > breakdown.total


def test_total_loss_gradient():
    r"""Test every total loss gradient against central finite differences."""
    rng = np.random.default_rng(9)
    state = _random_state(rng)
    mixture = rng.uniform(0.1, 0.9, (16, 24, 3))
    weights = LossWeights(alpha_c=1., alpha_p=0.2, omega_w=1., omega_s=0.1)
    for op in [Anaglyph(), DoubleVision()]:
        _, grads = total_loss(state, mixture, op, weights)
        for name in ["left", "right", "d_left", "d_right"]:
            point = getattr(state, name)

            def func(x, name=name):
                fields = {key: getattr(state, key) for key in grads}
                fields[name] = x
                return total_loss(LatentState(**fields), mixture, op, weights)[0].total

            indices = random_indices(point.shape, 60, rng)
            assert check_gradient(func, point, grads[name], indices) > 50
