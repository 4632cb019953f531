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
Mixture Module - the composition operators that map a stereo pair onto one observed image.

Every operator :math:`f` defines one problem instance :math:`I = f(I_L, I_R)`:

- Anaglyph: red channel of the left view, green and blue channels of the right view.
- DoubleVision: the average :math:`(I_L + I_R) / 2`.
- MonocularLeft / MonocularRight: the observed image is one of the two views.

Besides composing, each operator measures how much a candidate pair violates the constraint and
projects a candidate pair onto the nearest (least-squares) pair that satisfies it exactly.

"""

from abc import ABC, abstractmethod

import numpy as np

from unmix.image import PlanarImage


__all__ = [
    "MixtureOperator", "Anaglyph", "DoubleVision", "MonocularLeft", "MonocularRight",
    "get_operator",
]


def _as_arrays(*images):
    arrays = [np.asarray(img, dtype=np.float64) for img in images]
    for arr in arrays:
        if arr.ndim != 3:
            raise ValueError(f"Images should have shape (H, W, C), got {arr.shape}.")
    shape = arrays[0].shape
    for arr in arrays[1:]:
        if arr.shape != shape:
            raise ValueError(f"Image shapes {shape} and {arr.shape} should be the same.")
    return arrays


def _standardize(arr):
    r"""Map `arr` affinely to zero mean, unit spread and then into [0, 1] around 0.5."""
    std = arr.std()
    if std < 1e-12:
        return np.full_like(arr, 0.5)
    return np.clip(0.5 + 0.15 * (arr - arr.mean()) / std, 0., 1.)


class MixtureOperator(ABC):
    r"""
    Abstract base class of the composition operators.

    Attributes
    ----------
    kind : str
        The command-line name of the operator.

    """

    kind = None

    def _wrap(self, arr, like):
        if isinstance(like, PlanarImage):
            return PlanarImage.clipped(arr, like.value_range)
        return arr

    @abstractmethod
    def _compose(self, left, right):
        raise NotImplementedError("Compose should be implemented.")

    @abstractmethod
    def _project(self, mixture, left, right):
        raise NotImplementedError("Project should be implemented.")

    def _clip(self, mixture, left, right):
        return np.clip(left, 0., 1.), np.clip(right, 0., 1.)

    def _check_channels(self, arr):
        pass

    def compose(self, left, right):
        r"""
        Compose the mixture image :math:`f(I_L, I_R)`.

        Parameters
        ----------
        left, right : PlanarImage or ndarray(H, W, C)
            The stereo pair; shapes should agree.

        Returns
        -------
        PlanarImage or ndarray(H, W, C) :
            The mixture, a PlanarImage when `left` is one.

        Raises
        ------
        ValueError :
            If the shapes or channel counts disagree with the operator.

        """
        arr_l, arr_r = _as_arrays(left, right)
        self._check_channels(arr_l)
        return self._wrap(self._compose(arr_l, arr_r), left)

    def constraint_residual(self, mixture, left, right):
        r"""
        Maximum absolute sample difference between :math:`f(I_L, I_R)` and the mixture.

        Returns
        -------
        float :
            Zero for a consistent triple.

        """
        arr_m, arr_l, arr_r = _as_arrays(mixture, left, right)
        self._check_channels(arr_m)
        return float(np.max(np.abs(self._compose(arr_l, arr_r) - arr_m)))

    def project(self, mixture, left, right, clip=False):
        r"""
        Project a pair onto the closest pair (in least squares) consistent with the mixture.

        Parameters
        ----------
        mixture : PlanarImage or ndarray(H, W, C)
            The observed mixture.
        left, right : PlanarImage or ndarray(H, W, C)
            The pair to project.
        clip : bool, optional
            Whether to bring both views into :math:`[0, 1]` after projecting, without leaving the
            constraint.

        Returns
        -------
        (left, right) :
            The projected pair, of the same kind as the inputs.

        """
        arr_m, arr_l, arr_r = _as_arrays(mixture, left, right)
        self._check_channels(arr_m)
        new_l, new_r = self._project(arr_m, arr_l, arr_r)
        if clip:
            new_l, new_r = self._clip(arr_m, new_l, new_r)
        return self._wrap(new_l, left), self._wrap(new_r, right)

    def initial_views(self, mixture):
        r"""Replicate the mixture into both views and project the pair onto the constraint."""
        arr = np.asarray(mixture, dtype=np.float64)
        return self.project(arr, arr.copy(), arr.copy(), clip=True)

    def matching_features(self, mixture):
        r"""
        Images the stereo oracle matches to initialize the disparities.

        Returns
        -------
        (ndarray, ndarray) or None :
            Left and right feature images, or `None` when the mixture carries no stereo signal.
            Double vision is matched by `unmix.oracle.build_echo_volume` instead.

        """
        return None

    def free_channels(self, channels):
        r"""
        Boolean masks (left, right) over the channels the mixture does not pin down exactly.

        For double vision no channel is pinned individually (the constraint couples the views),
        so every channel is free.
        """
        return np.ones(channels, dtype=bool), np.ones(channels, dtype=bool)

    def __repr__(self):
        return f"{type(self).__name__}()"

    def __eq__(self, other):
        return type(self) is type(other)

    def __hash__(self):
        return hash(type(self).__name__)


class Anaglyph(MixtureOperator):
    r"""
    Red-cyan anaglyph operator :math:`f(I_L, I_R) = (R_L, G_R, B_R)`.

    The mixture happens at channel level: the left red and the right green/blue channels are
    observed exactly, the other three channels are unknown.
    """

    kind = "anaglyph"

    def _check_channels(self, arr):
        if arr.shape[2] != 3:
            raise ValueError(f"Anaglyph operator needs 3 channel images, got {arr.shape[2]}.")

    def _compose(self, left, right):
        return np.concatenate([left[:, :, :1], right[:, :, 1:]], axis=2)

    def _project(self, mixture, left, right):
        new_l, new_r = left.copy(), right.copy()
        new_l[:, :, 0] = mixture[:, :, 0]
        new_r[:, :, 1:] = mixture[:, :, 1:]
        return new_l, new_r

    def matching_features(self, mixture):
        r"""Standardized left red channel against the standardized right green/blue mean."""
        arr = np.asarray(mixture, dtype=np.float64)
        self._check_channels(arr)
        return (_standardize(arr[:, :, :1]),
                _standardize(arr[:, :, 1:].mean(axis=2, keepdims=True)))

    def free_channels(self, channels):
        return np.array([False, True, True]), np.array([True, False, False])


class DoubleVision(MixtureOperator):
    r"""
    Double-vision (diplopia) operator :math:`f(I_L, I_R) = (I_L + I_R) / 2`.

    Projection adds :math:`c = I - (I_L + I_R) / 2` to both views, which preserves the difference
    image :math:`I_L - I_R` exactly. Clamping shrinks the half difference to
    :math:`\min(I, 1 - I)` instead of clipping each view, so clamped pairs still average to
    the mixture.
    """

    kind = "double"

    def _compose(self, left, right):
        return 0.5 * (left + right)

    def _project(self, mixture, left, right):
        correction = mixture - 0.5 * (left + right)
        return left + correction, right + correction

    def _clip(self, mixture, left, right):
        # shrink the half difference so both views stay in [0, 1] around the mixture
        bound = np.clip(np.minimum(mixture, 1. - mixture), 0., None)
        half = np.clip(0.5 * (left - right), -bound, bound)
        return np.clip(mixture + half, 0., 1.), np.clip(mixture - half, 0., 1.)


class MonocularLeft(MixtureOperator):
    r"""Monocular operator: the observed image is the left view, the right view is free."""

    kind = "mono-left"

    def _compose(self, left, right):
        return left.copy()

    def _project(self, mixture, left, right):
        return mixture.copy(), right.copy()

    def free_channels(self, channels):
        return np.zeros(channels, dtype=bool), np.ones(channels, dtype=bool)


class MonocularRight(MixtureOperator):
    r"""Monocular operator: the observed image is the right view, the left view is free."""

    kind = "mono-right"

    def _compose(self, left, right):
        return right.copy()

    def _project(self, mixture, left, right):
        return left.copy(), mixture.copy()

    def free_channels(self, channels):
        return np.ones(channels, dtype=bool), np.zeros(channels, dtype=bool)


_OPERATORS = {
    "anaglyph": Anaglyph,
    "double": DoubleVision,
    "double-vision": DoubleVision,
    "mono-left": MonocularLeft,
    "mono-right": MonocularRight,
}


def get_operator(kind):
    r"""
    Return the operator for a command-line name or class name.

    Parameters
    ----------
    kind : str or MixtureOperator
        One of "anaglyph", "double", "mono-left", "mono-right" (or the class name).

    Raises
    ------
    ValueError :
        If the name is not recognized.

    """
    if isinstance(kind, MixtureOperator):
        return kind
    if not isinstance(kind, str):
        raise TypeError(f"Operator kind {kind} should be a string.")
    key = kind.lower()
    for cls in set(_OPERATORS.values()):
        if cls.__name__.lower() == key:
            return cls()
    if key not in _OPERATORS:
        raise ValueError(f"Operator kind {kind} was not recognized; choose from "
                         f"{sorted(set(_OPERATORS) - {'double-vision'})}.")
    return _OPERATORS[key]()
