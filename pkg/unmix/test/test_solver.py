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
import pytest
from numpy.testing import assert_almost_equal, assert_equal, assert_raises

from unmix.image import DisparityMap, PlanarImage
from unmix.losses import LossWeights, total_loss
from unmix.metrics import bad_pixel_ratio, psnr
from unmix.mixture import Anaglyph, DoubleVision, MonocularLeft
from unmix.oracle import colorize_anaglyph
import unmix.solver
from unmix.solver import (
    LatentState, Solution, SolverConfig, SolverDivergenceError, ablate_separation_only,
    init_state, rmsprop_update, solve, step,
)
from unmix.synthetic import make_shifted_scene


def _small_config(**changes):
    values = dict(d_max=8, levels=2, iters_per_level=4, step_size=0.02, aggregation=3)
    values.update(changes)
    return SolverConfig(**values)


def test_raises_solver_config():
    r"""Test raise errors of SolverConfig."""
    assert_raises(TypeError, SolverConfig, weights={"alpha_c": 1.})
    assert_raises(TypeError, SolverConfig, d_max=9.5)
    assert_raises(TypeError, SolverConfig, levels=True)
    assert_raises(ValueError, SolverConfig, d_max=0)
    assert_raises(ValueError, SolverConfig, iters_per_level=0)
    assert_raises(ValueError, SolverConfig, step_size=0.)
    assert_raises(ValueError, SolverConfig, step_decay=1.5)
    assert_raises(ValueError, SolverConfig, rms_decay=1.)
    assert_raises(ValueError, SolverConfig, rms_epsilon=0.)
    assert_raises(ValueError, SolverConfig, aggregation=4)
    assert_raises(ValueError, SolverConfig, init_noise=-0.1)
    assert_raises(TypeError, SolverConfig, warp_seed=1)


def test_solver_config_defaults():
    r"""Test the default configuration and its helpers."""
    cfg = SolverConfig()
    assert_equal((cfg.d_max, cfg.levels, cfg.iters_per_level), (96, 3, 300))
    assert_equal((cfg.step_size, cfg.rms_decay, cfg.rms_epsilon), (0.05, 0.9, 1e-8))
    assert cfg.weights == LossWeights()
    assert_equal(cfg.level_d_max(2), 24.)
    other = cfg.replace(levels=1)
    assert_equal((other.levels, cfg.levels), (1, 3))


def test_rmsprop_update():
    r"""Test two RMSProp iterates on the quadratic x ** 2 by hand."""
    x, moment = np.array([1.]), np.array([0.])
    x, moment = rmsprop_update(x, 2. * x, moment, 0.1, 0.9, 1e-8)
    assert_almost_equal(moment, [0.4])
    first = 1. - 0.1 * 2. / np.sqrt(0.4 + 1e-8)
    assert_almost_equal(x, [first], decimal=14)
    x, moment = rmsprop_update(x, 2. * x, moment, 0.1, 0.9, 1e-8)
    second_moment = 0.9 * 0.4 + 0.1 * (2. * first) ** 2
    assert_almost_equal(moment, [second_moment], decimal=14)
    assert_almost_equal(x, [first - 0.1 * 2. * first / np.sqrt(second_moment + 1e-8)],
                        decimal=14)


def test_init_state_monocular():
    r"""Test the monocular initialization keeps the observed view."""
    scene = make_shifted_scene(height=16, width=24, disparity=2, seed=0)
    mixture = scene.compose(MonocularLeft())
    state = init_state(mixture, MonocularLeft(), _small_config(levels=1))
    assert isinstance(state, LatentState)
    assert_equal(state.left, mixture.data)
    assert_equal(state.d_left, np.zeros((16, 24)))
    assert_equal(state.level, 0)
    state = init_state(mixture, "mono-left", _small_config(levels=2))
    assert_equal(state.level, 1)
    assert_equal(state.left.shape, (8, 12, 3))
    assert_raises(ValueError, init_state, mixture, MonocularLeft(), _small_config(levels=5))
    assert_raises(TypeError, init_state, mixture, MonocularLeft(), {"levels": 1})


def test_init_state_anaglyph_oracle():
    r"""Test the anaglyph initialization recovers a constant disparity."""
    scene = make_shifted_scene(height=48, width=64, disparity=4, seed=1)
    mixture = scene.compose(Anaglyph())
    cfg = _small_config(levels=1, aggregation=5)
    state = init_state(mixture, Anaglyph(), cfg)
    assert Anaglyph().constraint_residual(mixture, state.left, state.right) == 0.
    interior = np.zeros((48, 64), dtype=bool)
    interior[4:-4, 8:-8] = True
    assert bad_pixel_ratio(state.d_left, scene.d_left, 1., mask=interior) <= 0.2
    assert bad_pixel_ratio(state.d_right, scene.d_right, 1., mask=interior) <= 0.2
    assert state.d_left.min() >= 0. and state.d_left.max() <= cfg.d_max
    noisy = init_state(mixture, Anaglyph(), cfg.replace(init_noise=0.05, seed=2))
    assert Anaglyph().constraint_residual(mixture, noisy.left, noisy.right) == 0.
    assert not np.array_equal(noisy.left, state.left)


def test_step():
    r"""Test one step keeps the pair feasible and decays the step size."""
    scene = make_shifted_scene(height=16, width=24, disparity=2, seed=3)
    mixture = np.asarray(scene.compose(Anaglyph()))
    cfg = _small_config(levels=1)
    state = init_state(mixture, Anaglyph(), cfg, use_oracle=False)
    new_state, breakdown = step(state, mixture, Anaglyph(), cfg)
    assert Anaglyph().constraint_residual(mixture, new_state.left, new_state.right) == 0.
    assert_almost_equal(new_state.step_size, cfg.step_size * cfg.step_decay)
    assert_almost_equal(breakdown.total,
                        total_loss(new_state, mixture, Anaglyph(), cfg.weights)[0].total)
    assert np.all(new_state.d_left >= 0.) and np.all(new_state.d_left <= cfg.d_max)
    assert np.all(new_state.left >= 0.) and np.all(new_state.left <= 1.)


def test_step_zero_gradient():
    r"""Test a step with all weights zero leaves the state unchanged."""
    scene = make_shifted_scene(height=16, width=24, disparity=2, seed=4)
    mixture = np.asarray(scene.compose(Anaglyph()))
    weights = LossWeights(alpha_c=0., alpha_p=0., omega_w=0., omega_s=0.)
    cfg = _small_config(levels=1, weights=weights)
    state = init_state(mixture, Anaglyph(), cfg)
    new_state, breakdown = step(state, mixture, Anaglyph(), cfg)
    assert_equal(breakdown.total, 0.)
    assert_equal(new_state.left, state.left)
    assert_equal(new_state.right, state.right)
    assert_equal(new_state.d_left, state.d_left)


def test_step_divergence():
    r"""Test a non-finite loss raises SolverDivergenceError."""
    mixture = np.full((8, 8, 3), 0.5)
    left = np.full((8, 8, 3), 0.5)
    left[2, 2, 1] = np.nan
    state = LatentState(left=left, right=mixture.copy(), d_left=np.zeros((8, 8)),
                        d_right=np.zeros((8, 8)))
    assert_raises(SolverDivergenceError, step, state, mixture, Anaglyph(), _small_config())


def test_solve_anaglyph():
    r"""Test a small anaglyph solve."""
    scene = make_shifted_scene(height=32, width=48, disparity=4, seed=5)
    mixture = scene.compose(Anaglyph())
    cfg = _small_config()
    solution = solve(mixture, Anaglyph(), cfg)
    assert isinstance(solution, Solution)
    assert isinstance(solution.left, PlanarImage) and isinstance(solution.d_left, DisparityMap)
    assert_equal(solution.left.shape, (32, 48, 3))
    assert_equal(solution.d_right.shape, (32, 48))
    assert Anaglyph().constraint_residual(mixture, solution.left, solution.right) < 1e-12
    assert_equal(solution.left.data[:, :, 0], mixture.data[:, :, 0])
    assert solution.final_loss.total <= solution.initial_loss.total
    # opening and closing rows bracket levels * (iters + 1) iterate rows
    rows = solution.loss_trace
    assert_equal(len(rows), cfg.levels * (cfg.iters_per_level + 1) + 2)
    assert_equal([row["phase"] for row in rows[::len(rows) - 1]], ["initial", "final"])
    assert_equal({row["phase"] for row in rows[1:-1]}, {"iterate"})
    assert_equal([row["level"] for row in rows[1:-1:5]], [1, 0])
    assert_equal(solution.totals.shape, (12,))
    assert_equal(sorted(solution.diagnostics),
                 sorted(["ill_posed", "fallback", "warnings", "clamped", "max_residual",
                         "final_residual"]))
    assert not solution.diagnostics["ill_posed"]
    assert solution.time > 0.
    assert "Solution" in repr(solution)
    assert_equal(solution.trace_rows()[0]["iteration"], 0)


def test_solve_deterministic():
    r"""Test identical inputs give bit-identical solutions."""
    scene = make_shifted_scene(height=16, width=24, disparity=2, seed=6)
    mixture = scene.compose(DoubleVision())
    cfg = _small_config(init_noise=0.02, seed=7)
    first = solve(mixture, DoubleVision(), cfg)
    second = solve(mixture, DoubleVision(), cfg)
    for name in ["left", "right", "d_left", "d_right"]:
        assert_equal(np.asarray(getattr(first, name)), np.asarray(getattr(second, name)))
    assert_equal(first.totals, second.totals)


def test_solve_progress_over_seeds():
    r"""Test the final loss never exceeds the initial loss."""
    scene = make_shifted_scene(height=16, width=24, disparity=3, seed=8)
    mixture = scene.compose(Anaglyph())
    for seed in range(3):
        cfg = _small_config(init_noise=0.1, seed=seed, step_size=0.2)
        solution = solve(mixture, Anaglyph(), cfg)
        assert solution.final_loss.total <= solution.initial_loss.total
        first, last = solution.loss_trace[0], solution.loss_trace[-1]
        assert_equal(first["total"], solution.initial_loss.total)
        assert_equal(last["total"], solution.final_loss.total)
        assert last["total"] <= first["total"]
        returned = LatentState(left=solution.left.data, right=solution.right.data,
                               d_left=solution.d_left.values, d_right=solution.d_right.values)
        returned_loss = total_loss(returned, np.asarray(mixture), Anaglyph(), cfg.weights)[0]
        assert_almost_equal(returned_loss.total, last["total"], decimal=12)
        assert_equal(last["level"], 0)
        if solution.diagnostics["fallback"]:
            assert_equal(last["iteration"], 0)


def test_solve_ill_posed():
    r"""Test a textureless mixture warns and keeps zero disparities."""
    mixture = PlanarImage(np.full((16, 16, 3), 0.4))
    with pytest.warns(UserWarning, match="ill-posed"):
        solution = solve(mixture, DoubleVision(), _small_config())
    assert solution.diagnostics["ill_posed"]
    assert_equal(solution.d_left.values, np.zeros((16, 16)))
    assert_equal(solution.d_right.values, np.zeros((16, 16)))
    assert np.all(np.abs(solution.totals) < 1e-9)


def test_ablate_separation_only():
    r"""Test the separation-only ablation never touches the disparities."""
    scene = make_shifted_scene(height=16, width=24, disparity=3, seed=9)
    mixture = scene.compose(Anaglyph())
    solution = ablate_separation_only(mixture, Anaglyph(), _small_config())
    assert_equal(solution.d_left.values, np.zeros((16, 24)))
    assert_equal(solution.d_right.values, np.zeros((16, 24)))
    for row in solution.loss_trace:
        assert_equal((row["warp_left"], row["warp_right"]), (0., 0.))
        assert_equal((row["smooth_left"], row["smooth_right"]), (0., 0.))
    assert Anaglyph().constraint_residual(mixture, solution.left, solution.right) < 1e-12


def test_solve_divergence_keeps_trace(monkeypatch):
    r"""Test a divergence inside solve carries the rows traced before it."""
    scene = make_shifted_scene(height=16, width=24, disparity=2, seed=10)
    mixture = scene.compose(Anaglyph())
    calls, original = [], unmix.solver.step

    def diverging_step(state, *args):
        calls.append(state.level)
        if len(calls) == 3:
            raise SolverDivergenceError("Loss nan is not finite.")
        return original(state, *args)

    monkeypatch.setattr(unmix.solver, "step", diverging_step)
    with pytest.raises(SolverDivergenceError) as info:
        solve(mixture, Anaglyph(), _small_config())
    rows = info.value.trace
    assert_equal([row["phase"] for row in rows], ["initial", "iterate", "iterate", "iterate"])
    assert_equal([row["iteration"] for row in rows[1:]], [0, 1, 2])
    assert all(np.isfinite(row["total"]) for row in rows)
    assert_equal(SolverDivergenceError("plain").trace, [])


def test_init_state_double_vision():
    r"""Test the double-vision initialization finds the lag of a doubled texture."""
    scene = make_shifted_scene(height=48, width=64, disparity=4, seed=11)
    mixture = scene.compose(DoubleVision())
    cfg = _small_config(d_max=16, levels=1, aggregation=5)
    state = init_state(mixture, DoubleVision(), cfg)
    assert_equal(state.left, mixture.data)
    assert_equal(state.right, mixture.data)
    interior = np.zeros((48, 64), dtype=bool)
    interior[4:-4, 8:-8] = True
    assert bad_pixel_ratio(state.d_left, scene.d_left, 0.5, mask=interior) <= 0.1
    assert bad_pixel_ratio(state.d_right, scene.d_right, 0.5, mask=interior) <= 0.1
    # the lag is found at full resolution and scaled down without blurring
    coarse = init_state(mixture, DoubleVision(), cfg.replace(levels=3))
    assert_equal(coarse.d_left.shape, (12, 16))
    assert_almost_equal(np.median(coarse.d_left[2:-2, 3:-3]), 1.)
    assert_almost_equal(np.median(coarse.d_right[2:-2, 3:-3]), 1.)


def test_solve_double_vision():
    r"""Test a small double-vision solve separates a doubled texture on the constraint."""
    cfg = _small_config(d_max=16, iters_per_level=20, aggregation=5)
    for seed in range(2):
        scene = make_shifted_scene(height=48, width=64, disparity=4, seed=seed)
        mixture = scene.compose(DoubleVision())
        solution = solve(mixture, DoubleVision(), cfg)
        assert DoubleVision().constraint_residual(mixture, solution.left, solution.right) <= 1e-6
        assert solution.diagnostics["final_residual"] <= 1e-6
        assert solution.final_loss.total <= 0.5 * solution.initial_loss.total
        assert psnr(solution.left, scene.left) >= psnr(mixture, scene.left) + 2.
        assert psnr(solution.right, scene.right) >= psnr(mixture, scene.right) + 2.


def test_joint_beats_separation_only():
    r"""Test the stereo terms improve the recovered pair over separation alone."""
    cfg = _small_config(d_max=16, iters_per_level=20, aggregation=5)
    scene = make_shifted_scene(height=48, width=64, disparity=4, seed=12)
    for op in (Anaglyph(), DoubleVision()):
        mixture = scene.compose(op)
        joint = solve(mixture, op, cfg)
        alone = ablate_separation_only(mixture, op, cfg)
        joint_psnr = psnr(joint.left, scene.left) + psnr(joint.right, scene.right)
        alone_psnr = psnr(alone.left, scene.left) + psnr(alone.right, scene.right)
        assert joint_psnr >= alone_psnr


def test_solve_anaglyph_shifted_scenes():
    r"""Test default solves of constant-disparity anaglyphs: disparities and colorized channels."""
    interior = np.zeros((96, 128), dtype=bool)
    interior[8:-8, 8:-8] = True
    passed = 0
    for seed in range(3):
        scene = make_shifted_scene(height=96, width=128, disparity=4, seed=seed)
        mixture = scene.compose(Anaglyph())
        solution = solve(mixture, Anaglyph())
        left, right = colorize_anaglyph(mixture, solution.d_left, solution.d_right)
        bad1 = bad_pixel_ratio(solution.d_left, scene.d_left, 1., mask=interior)
        channels = min(psnr(left.data[:, :, 1:], scene.left.data[:, :, 1:]),
                       psnr(right.data[:, :, :1], scene.right.data[:, :, :1]))
        passed += bad1 <= 0.05 and channels >= 30.
    assert passed >= 2


def test_solve_double_vision_shifted_scenes():
    r"""Test default solves of constant-disparity double images."""
    passed = 0
    for seed in range(3):
        scene = make_shifted_scene(height=96, width=128, disparity=4, seed=seed)
        mixture = scene.compose(DoubleVision())
        solution = solve(mixture, DoubleVision())
        assert DoubleVision().constraint_residual(mixture, solution.left, solution.right) <= 1e-6
        reduced = solution.final_loss.total <= 0.5 * solution.initial_loss.total
        gain = psnr(solution.left, scene.left) - psnr(mixture, scene.left)
        passed += reduced and gain >= 2.
    assert passed >= 2
