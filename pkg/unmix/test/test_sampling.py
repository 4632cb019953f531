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

from unmix.image import DisparityMap, PlanarImage
from unmix.sampling import WarpResult, warp_adjoint, warp_from_left, warp_from_right
from unmix.test.gradcheck import check_gradient


def test_warp_identity():
    r"""Test zero disparities reproduce the source."""
    img = np.random.default_rng(0).uniform(0., 1., (5, 7, 3))
    for warp in [warp_from_right, warp_from_left]:
        result = warp(PlanarImage(img), np.zeros((5, 7)))
        assert isinstance(result, WarpResult)
        assert_equal(result.shape, (5, 7, 3))
        assert_almost_equal(result.warped, img, decimal=14)
        assert not result.clamped.any()


def test_warp_ramp():
    r"""Test shifting a ramp by two pixels in both directions."""
    width = 10
    ramp = np.tile(np.arange(width, dtype=float) / width, (3, 1))
    result = warp_from_right(ramp, np.full((3, width), 2.))
    expected = np.maximum(np.arange(width) - 2., 0.) / width
    assert_almost_equal(result.warped[:, :, 0], np.tile(expected, (3, 1)), decimal=14)
    assert_equal(result.clamped[0], np.arange(width) < 2)
    result = warp_from_left(ramp, np.full((3, width), 2.))
    expected = np.minimum(np.arange(width) + 2., width - 1.) / width
    assert_almost_equal(result.warped[:, :, 0], np.tile(expected, (3, 1)), decimal=14)
    assert_equal(result.clamped[0], np.arange(width) > width - 3)


def test_warp_integer_shift():
    r"""Test an integer disparity equals an index shift on interior columns."""
    img = np.random.default_rng(1).uniform(0., 1., (6, 12, 3))
    for k in [1, 3]:
        result = warp_from_right(img, np.full((6, 12), float(k)))
        assert_equal(result.warped[:, k:], img[:, :-k])
        result = warp_from_left(img, np.full((6, 12), float(k)))
        assert_almost_equal(result.warped[:, :-k], img[:, k:], decimal=14)


def test_warp_fractional():
    r"""Test linear interpolation between two columns."""
    src = np.array([[0., 1., 3., 6.], [0., 1., 3., 6.]])
    result = warp_from_right(src, np.full((2, 4), 0.25))
    assert_almost_equal(result.warped[0, :, 0], [0., 0.75, 2.5, 5.25])
    # slope is -(right - left) of the interpolated cell, zero where clamped
    assert_almost_equal(result.d_value_d_disparity[0, :, 0], [0., -1., -2., -3.])
    floor_index, weight = result.source_weights
    assert_equal(floor_index[0], [0, 0, 1, 2])
    assert_almost_equal(weight[0], [0., 0.75, 0.75, 0.75])


def test_warp_flip_symmetry():
    r"""Test warping from the left mirrors warping from the right under a horizontal flip."""
    rng = np.random.default_rng(2)
    img = rng.uniform(0., 1., (4, 9, 3))
    disp = rng.uniform(0., 3., (4, 9))
    direct = warp_from_left(img, disp)
    mirrored = warp_from_right(img[:, ::-1], disp[:, ::-1])
    assert_almost_equal(direct.warped, mirrored.warped[:, ::-1], decimal=12)
    assert_almost_equal(direct.d_value_d_disparity, mirrored.d_value_d_disparity[:, ::-1],
                        decimal=12)


def test_warp_disparity_map_invalid_as_zero():
    r"""Test invalid pixels of a DisparityMap are sampled at zero disparity."""
    img = np.random.default_rng(3).uniform(0., 1., (3, 6, 1))
    values = np.full((3, 6), 2.)
    valid = np.ones((3, 6), dtype=bool)
    valid[:, 4] = False
    result = warp_from_right(img, DisparityMap(values, valid=valid))
    assert_equal(result.warped[:, 4], img[:, 4])
    assert_equal(result.warped[:, 3], img[:, 1])


def test_warp_raises():
    r"""Test errors raised by the warps."""
    img = np.zeros((3, 4, 3))
    assert_raises(ValueError, warp_from_right, img, np.zeros((3, 5)))
    assert_raises(ValueError, warp_from_right, img, np.full((3, 4), -1.))
    assert_raises(ValueError, warp_from_left, img, np.full((3, 4), np.nan))
    assert_raises(ValueError, warp_from_left, np.zeros((3,)), np.zeros((3, 4)))
    result = warp_from_right(img, np.zeros((3, 4)))
    assert_raises(TypeError, warp_adjoint, img, np.zeros((3, 4, 3)))
    assert_raises(ValueError, warp_adjoint, result, np.zeros((3, 4, 1)))


def test_warp_adjoint_zero_and_identity():
    r"""Test the adjoint for zero upstream and for the identity warp."""
    img = np.random.default_rng(4).uniform(0., 1., (4, 6, 3))
    result = warp_from_right(img, np.full((4, 6), 1.3))
    grad_src, grad_disp = warp_adjoint(result, np.zeros((4, 6, 3)))
    assert_equal(grad_src, np.zeros((4, 6, 3)))
    assert_equal(grad_disp, np.zeros((4, 6)))
    result = warp_from_right(img, np.zeros((4, 6)))
    grad_src, _ = warp_adjoint(result, np.ones((4, 6, 3)))
    assert_almost_equal(grad_src, np.ones((4, 6, 3)))


def test_warp_adjoint_dot_product():
    r"""Test the source adjoint with the dot-product identity."""
    rng = np.random.default_rng(5)
    src = rng.normal(size=(5, 8, 3))
    upstream = rng.normal(size=(5, 8, 3))
    disp = rng.uniform(0., 4., (5, 8))
    for warp in [warp_from_right, warp_from_left]:
        result = warp(src, disp)
        grad_src, _ = warp_adjoint(result, upstream)
        assert_almost_equal(np.sum(result.warped * upstream), np.sum(src * grad_src), decimal=10)


def test_warp_adjoint_finite_differences():
    r"""Test both adjoint outputs against central differences of the forward warp."""
    rng = np.random.default_rng(6)
    src = rng.uniform(0., 1., (4, 10, 3))
    upstream = rng.normal(size=(4, 10, 3))
    # fractional parts away from integers keep the warp smooth in d
    disp = rng.integers(0, 3, (4, 10)) + rng.uniform(0.2, 0.8, (4, 10))
    for warp in [warp_from_right, warp_from_left]:
        result = warp(src, disp)
        grad_src, grad_disp = warp_adjoint(result, upstream)

        def of_disp(d):
            return np.sum(warp(src, d).warped * upstream)

        def of_src(s):
            return np.sum(warp(s, disp).warped * upstream)

        assert check_gradient(of_disp, disp, grad_disp) == disp.size
        assert check_gradient(of_src, src, grad_src) == src.size
