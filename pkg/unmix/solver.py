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
Solver Module - joint recovery of the stereo pair and both disparity maps from one mixture.

The latent views and disparity fields are optimized directly, coarse to fine, with RMSProp
updates on the total loss. After every update the fields are clamped to their physical ranges
and the pair is projected back onto the mixture constraint.

Classes
-------
SolverConfig -
    Weights and schedule of a solve.
LatentState -
    The optimization variables at one pyramid level.
Solution -
    Recovered pair, disparities, loss trace and diagnostics.
SolverDivergenceError -
    Raised when the loss stays non-finite after the step size was halved.

Functions
---------
init_state, step, solve, ablate_separation_only

"""

import logging
import warnings
from dataclasses import dataclass, field, replace
from timeit import default_timer as timer

import numpy as np
from scipy.ndimage import median_filter

from unmix.image import (
    DisparityMap, PlanarImage, build_pyramid, downsample2, resize_bilinear, upsample_disparity,
)
from unmix.losses import LossWeights, total_loss
from unmix.mixture import Anaglyph, DoubleVision, get_operator
from unmix.oracle import (
    build_cost_volume, build_echo_volume, colorize_anaglyph, separate_double_vision, wta_disparity,
)


__all__ = [
    "SolverConfig", "LatentState", "Solution", "SolverDivergenceError", "rmsprop_update",
    "init_state", "step", "solve", "ablate_separation_only",
]


logger = logging.getLogger(__name__)

_FIELDS = ("left", "right", "d_left", "d_right")


class SolverDivergenceError(RuntimeError):
    r"""
    The total loss or its gradient became non-finite and halving the step did not help.

    Attributes
    ----------
    trace : list of dict
        Loss trace rows recorded before the divergence; `solve` fills it in, `step` leaves it
        empty.

    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = [] if trace is None else trace


@dataclass(frozen=True)
class SolverConfig:
    r"""
    Configuration of a joint solve.

    Attributes
    ----------
    weights : LossWeights
        Loss term weights.
    d_max : int
        Largest disparity at full resolution, in pixels.
    levels : int
        Number of pyramid levels.
    iters_per_level : int
        RMSProp iterations per level.
    step_size : float
        Initial RMSProp step size of every level.
    step_decay : float
        Multiplicative step decay per iteration, in (0, 1].
    rms_decay, rms_epsilon : float
        RMSProp accumulator decay :math:`\rho` and stabilizer :math:`\epsilon`.
    seed : int
        Seed of the initialization jitter.
    median_size : int
        Side of the median filter applied to the initial disparities.
    aggregation : int
        Odd side of the box window aggregating the initialization cost volume.
    warp_seed : bool
        Whether the unobserved anaglyph channels are seeded by channel warping, and double-vision
        views are separated in closed form at the start of every level.
    init_noise : float
        Amplitude of the uniform jitter added to the free image components at initialization.

    """

    weights: LossWeights = field(default_factory=LossWeights)
    d_max: int = 96
    levels: int = 3
    iters_per_level: int = 300
    step_size: float = 0.05
    step_decay: float = 0.99
    rms_decay: float = 0.9
    rms_epsilon: float = 1e-8
    seed: int = 0
    median_size: int = 3
    aggregation: int = 5
    warp_seed: bool = True
    init_noise: float = 0.0

    def __post_init__(self):
        if not isinstance(self.weights, LossWeights):
            raise TypeError(f"Weights should be a LossWeights instance, not {type(self.weights)}.")
        for name in ("d_max", "levels", "iters_per_level", "seed", "median_size", "aggregation"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise TypeError(f"Argument {name} should be an integer, not {type(value)}.")
            object.__setattr__(self, name, int(value))
        if self.d_max < 1 or self.levels < 1 or self.iters_per_level < 1:
            raise ValueError(f"Arguments d_max={self.d_max}, levels={self.levels} and "
                             f"iters_per_level={self.iters_per_level} should be positive.")
        if self.median_size < 1:
            raise ValueError(f"Argument median_size={self.median_size} should be positive.")
        if self.aggregation < 1 or self.aggregation % 2 == 0:
            raise ValueError(f"Argument aggregation={self.aggregation} should be odd and positive.")
        if not self.step_size > 0.:
            raise ValueError(f"Step size {self.step_size} should be positive.")
        if not 0. < self.step_decay <= 1.:
            raise ValueError(f"Step decay {self.step_decay} should be in (0, 1].")
        if not 0. <= self.rms_decay < 1.:
            raise ValueError(f"RMS decay {self.rms_decay} should be in [0, 1).")
        if not self.rms_epsilon > 0.:
            raise ValueError(f"RMS epsilon {self.rms_epsilon} should be positive.")
        if not isinstance(self.warp_seed, bool):
            raise TypeError(f"Argument warp_seed should be Boolean, not {type(self.warp_seed)}.")
        if not self.init_noise >= 0.:
            raise ValueError(f"Initial noise {self.init_noise} should be non-negative.")
        for name in ("step_size", "step_decay", "rms_decay", "rms_epsilon", "init_noise"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def level_d_max(self, level):
        r"""Largest disparity at pyramid `level`, :math:`d_{max} 2^{-level}`."""
        return self.d_max / 2. ** level

    def replace(self, **changes):
        r"""Return a copy with some fields changed."""
        return replace(self, **changes)


@dataclass(eq=False)
class LatentState:
    r"""
    The optimization variables of one pyramid level.

    Attributes
    ----------
    left, right : ndarray(H, W, C)
        Latent views.
    d_left, d_right : ndarray(H, W)
        Latent disparities of each view.
    level : int
        Pyramid level, 0 being full resolution.
    moments : dict
        RMSProp accumulators, keyed like the fields.
    step_size : float
        Step size of the next update.
    residual : float
        Constraint residual left by clamping after the last projection.
    clamped : int
        Number of samples clamped by the last update.

    """

    left: np.ndarray
    right: np.ndarray
    d_left: np.ndarray
    d_right: np.ndarray
    level: int = 0
    moments: dict = None
    step_size: float = 0.05
    residual: float = 0.
    clamped: int = 0
    cache: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.moments is None:
            self.moments = {name: np.zeros_like(getattr(self, name)) for name in _FIELDS}


class Solution:
    r"""
    Result of a joint solve.

    Attributes
    ----------
    left, right : PlanarImage
        The recovered views.
    d_left, d_right : DisparityMap
        The recovered disparities.
    loss_trace : list of dict
        Rows of phase ("initial", "iterate" or "final"), level, iteration, step size and the loss
        breakdown. The first and last rows hold `initial_loss` and `final_loss`.
    initial_loss, final_loss : LossBreakdown
        Losses of the initial and returned states at full resolution.
    diagnostics : dict
        Clamp counts, projection residuals, retries and warnings raised by the solve.
    time : float
        Wall-clock seconds of the solve.

    """

    def __init__(self, left, right, d_left, d_right, loss_trace, initial_loss, final_loss,
                 diagnostics, time):
        self.left = left
        self.right = right
        self.d_left = d_left
        self.d_right = d_right
        self.loss_trace = loss_trace
        self.initial_loss = initial_loss
        self.final_loss = final_loss
        self.diagnostics = diagnostics
        self.time = time

    @property
    def totals(self):
        r"""Total loss of every traced iterate."""
        return np.array([row["total"] for row in self.loss_trace])

    def trace_rows(self):
        r"""Rows of the loss trace, ready for `csv.DictWriter`."""
        return [dict(row) for row in self.loss_trace]

    def __repr__(self):
        return (f"Solution(shape={self.left.shape}, initial={self.initial_loss.total:.6g}, "
                f"final={self.final_loss.total:.6g})")


def rmsprop_update(x, grad, moment, step_size, decay, epsilon):
    r"""
    One RMSProp update.

    .. math ::
        v \leftarrow \rho v + (1 - \rho) g^2, \qquad x \leftarrow x - \eta g / \sqrt{v + \epsilon}

    Returns
    -------
    (ndarray, ndarray) :
        Updated variable and accumulator.

    """
    moment = decay * moment + (1. - decay) * grad ** 2
    return x - step_size * grad / np.sqrt(moment + epsilon), moment


def _is_ill_posed(mixture):
    return float(np.ptp(mixture)) < 1e-6


def _initial_disparities(mixture, pyramid, op, cfg):
    r"""Oracle disparities of both views at the coarsest level, median filtered."""
    level = len(pyramid) - 1
    coarse = np.asarray(pyramid[-1])
    if isinstance(op, DoubleVision):
        # integer lags are exact only at full resolution; clean them before reducing
        arr = np.asarray(mixture)
        d_max = max(1, min(cfg.d_max, arr.shape[1] - 1))
        maps = []
        for reference in ("left", "right"):
            volume = build_echo_volume(arr, d_max, reference, cfg.aggregation)
            disp = wta_disparity(volume, subpixel=False).values
            disp = DisparityMap(median_filter(disp, size=cfg.median_size, mode="nearest"))
            for _ in range(level):
                disp = downsample2(disp)
            maps.append(disp.values)
    else:
        features = op.matching_features(coarse)
        if features is None:
            zeros = np.zeros(coarse.shape[:2])
            return zeros, zeros.copy()
        d_max = max(1, min(int(np.ceil(cfg.level_d_max(level))), coarse.shape[1] - 1))
        maps = [wta_disparity(build_cost_volume(features[0], features[1], d_max, cfg.weights,
                                                reference, cfg.aggregation)).values
                for reference in ("left", "right")]
    limit = cfg.level_d_max(level)
    return tuple(np.clip(median_filter(disp, size=cfg.median_size, mode="nearest"), 0., limit)
                 for disp in maps)


def init_state(mixture, op, cfg, use_oracle=True):
    r"""
    Initialize the latent fields at the coarsest pyramid level.

    Both views start as the mixture projected onto the constraint. Disparities come from the
    winner-take-all oracle on the operator's matching features, median filtered; double-vision
    disparities come from the echo volume of the full-resolution mixture, median filtered there
    and reduced to the coarsest level. Monocular mixtures and textureless inputs start at zero
    disparity. For anaglyphs the unobserved channels are then seeded by warping the observed ones
    (when `cfg.warp_seed`).

    Parameters
    ----------
    mixture : PlanarImage or ndarray(H, W, C)
        The full-resolution mixture.
    op : MixtureOperator or str
        The composition operator.
    cfg : SolverConfig
        The configuration.
    use_oracle : bool, optional
        Whether to initialize disparities with the oracle; zero otherwise.

    Returns
    -------
    LatentState :
        The state at level `cfg.levels - 1`.

    Raises
    ------
    ValueError :
        If the mixture is too small for the pyramid.

    """
    op = get_operator(op)
    if not isinstance(cfg, SolverConfig):
        raise TypeError(f"Argument cfg should be a SolverConfig, not {type(cfg)}.")
    arr = np.asarray(mixture, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    pyramid = build_pyramid(arr, cfg.levels)
    level = cfg.levels - 1
    coarse = pyramid[-1]
    left, right = (np.asarray(view) for view in op.initial_views(coarse))

    if use_oracle and not _is_ill_posed(arr):
        d_left, d_right = _initial_disparities(arr, pyramid, op, cfg)
    else:
        d_left, d_right = np.zeros(coarse.shape[:2]), np.zeros(coarse.shape[:2])

    if use_oracle and cfg.warp_seed and isinstance(op, Anaglyph):
        left, right = (np.asarray(view) for view in colorize_anaglyph(coarse, d_left, d_right))

    if cfg.init_noise > 0.:
        rng = np.random.default_rng(cfg.seed)
        free_l, free_r = op.free_channels(left.shape[2])
        left = left + free_l * rng.uniform(-cfg.init_noise, cfg.init_noise, left.shape)
        right = right + free_r * rng.uniform(-cfg.init_noise, cfg.init_noise, right.shape)
        left, right = op.project(coarse, left, right, clip=True)

    logger.info("Initialized %s state at level %d with shape %s.", op.kind, level, coarse.shape)
    return LatentState(left=np.asarray(left), right=np.asarray(right), d_left=d_left,
                       d_right=d_right, level=level, step_size=cfg.step_size,
                       residual=op.constraint_residual(coarse, left, right))


def _evaluate(state, mixture, op, cfg):
    if state.cache is None:
        state.cache = total_loss(state, mixture, op, cfg.weights)
    return state.cache


def _is_finite(breakdown, grads):
    return np.isfinite(breakdown.total) and all(np.all(np.isfinite(g)) for g in grads.values())


def _update(state, grads, mixture, op, cfg, step_size):
    limit = cfg.level_d_max(state.level)
    new, moments, clamped = {}, {}, 0
    for name in _FIELDS:
        value, moments[name] = rmsprop_update(getattr(state, name), grads[name],
                                              state.moments[name], step_size, cfg.rms_decay,
                                              cfg.rms_epsilon)
        high = 1. if name in ("left", "right") else limit
        clamped += int(np.count_nonzero((value < 0.) | (value > high)))
        new[name] = np.clip(value, 0., high)
    left, right = op.project(mixture, new["left"], new["right"], clip=True)
    return LatentState(left=np.asarray(left), right=np.asarray(right), d_left=new["d_left"],
                       d_right=new["d_right"], level=state.level, moments=moments,
                       step_size=step_size, residual=op.constraint_residual(mixture, left, right),
                       clamped=clamped)


def step(state, mixture, op, cfg):
    r"""
    Take one RMSProp step on every latent field.

    The fields are updated with the gradients of the total loss, clamped (views to [0, 1],
    disparities to :math:`[0, d_{max} 2^{-level}]`) and projected onto the mixture constraint.
    A non-finite loss after the update is retried once with half the step size.

    Parameters
    ----------
    state : LatentState
        The current state.
    mixture : PlanarImage or ndarray(H, W, C)
        The mixture at the state's level.
    op : MixtureOperator or str
        The composition operator.
    cfg : SolverConfig
        The configuration.

    Returns
    -------
    (LatentState, LossBreakdown) :
        The new state, whose step size is already decayed, and its loss.

    Raises
    ------
    SolverDivergenceError :
        If the loss or gradient is non-finite even with the halved step.

    """
    op = get_operator(op)
    mixture = np.asarray(mixture, dtype=np.float64)
    breakdown, grads = _evaluate(state, mixture, op, cfg)
    if not _is_finite(breakdown, grads):
        raise SolverDivergenceError(f"Loss {breakdown.total} or its gradient is not finite.")
    step_size = state.step_size
    for attempt in range(2):
        new_state = _update(state, grads, mixture, op, cfg, step_size)
        new_breakdown, new_grads = _evaluate(new_state, mixture, op, cfg)
        if _is_finite(new_breakdown, new_grads):
            new_state.step_size = step_size * cfg.step_decay
            return new_state, new_breakdown
        if attempt == 0:
            logger.warning("Non-finite loss at step size %g; retrying with half.", step_size)
            step_size *= 0.5
    raise SolverDivergenceError(f"Loss diverged at level {state.level} with step size "
                                f"{step_size}.")


def _transfer(state, mixture, op, cfg, level):
    r"""Resize a state to the resolution of `mixture` at pyramid `level`."""
    height, width = mixture.shape[:2]
    left = resize_bilinear(state.left, height, width)
    right = resize_bilinear(state.right, height, width)
    left, right = op.project(mixture, np.clip(left, 0., 1.), np.clip(right, 0., 1.), clip=True)
    limit = cfg.level_d_max(level)
    d_left = np.clip(upsample_disparity(state.d_left, height, width), 0., limit)
    d_right = np.clip(upsample_disparity(state.d_right, height, width), 0., limit)
    return LatentState(left=np.asarray(left), right=np.asarray(right), d_left=d_left,
                       d_right=d_right, level=level, step_size=cfg.step_size,
                       residual=op.constraint_residual(mixture, left, right))


def _separate(state, mixture, op):
    r"""Replace the double-vision views by their least-squares pair under the disparities."""
    left, right = separate_double_vision(mixture, state.d_left, state.d_right, prior=state.right)
    left, right = np.asarray(left), np.asarray(right)
    return LatentState(left=left, right=right, d_left=state.d_left, d_right=state.d_right,
                       level=state.level, step_size=state.step_size,
                       residual=op.constraint_residual(mixture, left, right))


def _trace_row(phase, level, iteration, state, breakdown):
    row = {"phase": phase, "level": level, "iteration": iteration, "step_size": state.step_size}
    row.update(breakdown.as_dict())
    return row


def solve(mixture, op, cfg=None, use_oracle=True):
    r"""
    Recover the stereo pair and both disparity maps from a mixture.

    Parameters
    ----------
    mixture : PlanarImage or ndarray(H, W, C)
        The observed mixture in [0, 1].
    op : MixtureOperator or str
        The composition operator.
    cfg : SolverConfig, optional
        The configuration; defaults are used when omitted.
    use_oracle : bool, optional
        Whether disparities are initialized by the oracle.

    Returns
    -------
    Solution :
        The recovered fields at full resolution and the solve's trace.

    Raises
    ------
    SolverDivergenceError :
        Propagated from `step`, with the rows traced so far attached as `trace`.

    Notes
    -----
    Each level keeps its lowest-loss iterate. If the returned state is worse than the
    initialization transferred straight to full resolution, the latter is returned instead and
    a warning is raised, so the final loss never exceeds the initial one.

    For double vision (with the oracle and `cfg.warp_seed`) every level starts by replacing the
    views with `separate_double_vision` of the level's mixture under the current disparities.

    The trace opens with an "initial" row (the initialization at full resolution, the reference
    of `initial_loss`), holds one "iterate" row per evaluated iterate of every level and closes
    with a "final" row for the returned state, so its first and last totals are `initial_loss`
    and `final_loss`.

    """
    cfg = SolverConfig() if cfg is None else cfg
    op = get_operator(op)
    image = mixture if isinstance(mixture, PlanarImage) else PlanarImage.clipped(mixture)
    arr = np.asarray(image)
    diagnostics = {"ill_posed": _is_ill_posed(arr), "fallback": False, "warnings": [],
                   "clamped": 0, "max_residual": 0.}
    if diagnostics["ill_posed"]:
        message = "ill-posed input: the mixture is textureless, disparities are unconstrained."
        warnings.warn(message)
        logger.warning(message)
        diagnostics["warnings"].append(message)
    separate = (use_oracle and cfg.warp_seed and isinstance(op, DoubleVision)
                and not diagnostics["ill_posed"])

    start = timer()
    pyramid = [np.asarray(level) for level in build_pyramid(arr, cfg.levels)]
    init = init_state(arr, op, cfg, use_oracle=use_oracle)
    initial = _transfer(init, pyramid[0], op, cfg, 0) if cfg.levels > 1 else init
    initial_loss, _ = _evaluate(initial, pyramid[0], op, cfg)

    trace, state = [_trace_row("initial", 0, 0, initial, initial_loss)], init
    best_iteration = 0
    try:
        for level in range(cfg.levels - 1, -1, -1):
            if level != state.level:
                state = _transfer(state, pyramid[level], op, cfg, level)
            if separate:
                state = _separate(state, pyramid[level], op)
            breakdown, _ = _evaluate(state, pyramid[level], op, cfg)
            trace.append(_trace_row("iterate", level, 0, state, breakdown))
            best_state, best, best_iteration = state, breakdown, 0
            for iteration in range(1, cfg.iters_per_level + 1):
                state, breakdown = step(state, pyramid[level], op, cfg)
                diagnostics["clamped"] += state.clamped
                diagnostics["max_residual"] = max(diagnostics["max_residual"], state.residual)
                trace.append(_trace_row("iterate", level, iteration, state, breakdown))
                logger.debug("level %d iteration %d total %.8g", level, iteration,
                             breakdown.total)
                if breakdown.total < best.total:
                    best_state, best, best_iteration = state, breakdown, iteration
            state = best_state
            logger.info("Level %d finished with total loss %.8g.", level, best.total)
    except SolverDivergenceError as error:
        error.trace = trace
        raise

    final_loss, _ = _evaluate(state, pyramid[0], op, cfg)
    if final_loss.total > initial_loss.total:
        message = (f"Solve increased the loss from {initial_loss.total:.6g} to "
                   f"{final_loss.total:.6g}; returning the initialization.")
        warnings.warn(message)
        logger.warning(message)
        diagnostics["warnings"].append(message)
        diagnostics["fallback"] = True
        state, final_loss, best_iteration = initial, initial_loss, 0
    trace.append(_trace_row("final", 0, best_iteration, state, final_loss))
    if state.residual > 1e-6:
        message = f"Clamping left a constraint residual of {state.residual:.3g}."
        warnings.warn(message)
        diagnostics["warnings"].append(message)
    diagnostics["final_residual"] = float(state.residual)
    end = timer()

    return Solution(
        left=PlanarImage.clipped(state.left), right=PlanarImage.clipped(state.right),
        d_left=DisparityMap(state.d_left), d_right=DisparityMap(state.d_right),
        loss_trace=trace, initial_loss=initial_loss, final_loss=final_loss,
        diagnostics=diagnostics, time=end - start,
    )


def ablate_separation_only(mixture, op, cfg=None):
    r"""
    Solve with the stereo module switched off.

    The warp and smoothness weights are zero, the disparities start (and stay) at zero and the
    unobserved channels are not seeded by warping, so only the separation terms act on the views.

    Returns
    -------
    Solution :
        As `solve`; the warp and smoothness components of every breakdown are zero.

    """
    cfg = SolverConfig() if cfg is None else cfg
    cfg = cfg.replace(weights=cfg.weights.separation_only(), warp_seed=False)
    return solve(mixture, op, cfg, use_oracle=False)
