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
r"""Plot Module - figure of a solve's loss trace."""

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure


__all__ = ["plot_loss_trace"]


_COMPONENTS = ("content", "prior", "warp", "smooth")


def plot_loss_trace(rows, path, log_scale=True):
    r"""
    Save a figure of the total loss and its components against the iteration count.

    Parameters
    ----------
    rows : list of dict
        Rows of `Solution.trace_rows()`.
    path : str
        Output image path; the format follows the extension.
    log_scale : bool, optional
        Whether the loss axis is logarithmic. Zero values are not drawn on a log axis.

    Returns
    -------
    matplotlib.figure.Figure :
        The figure, already written to `path`.

    """
    if not rows:
        raise ValueError("Loss trace has no rows to plot.")
    figure = Figure(figsize=(7., 4.))
    FigureCanvasAgg(figure)
    axes = figure.add_subplot(1, 1, 1)
    steps = np.arange(len(rows))
    curves = [("total", np.array([row["total"] for row in rows]))]
    for name in _COMPONENTS:
        curves.append((name, np.array([row[f"{name}_left"] + row[f"{name}_right"]
                                       for row in rows])))
    for name, values in curves:
        if np.any(values > 0.):
            axes.plot(steps, np.where(values > 0., values, np.nan) if log_scale else values,
                      label=name, linewidth=2. if name == "total" else 1.)
    # level switches between iterates; the initial and final rows sit at the ends
    phases = [row.get("phase", "iterate") for row in rows]
    for index in range(1, len(rows)):
        if phases[index] != phases[index - 1]:
            continue
        if rows[index]["level"] != rows[index - 1]["level"]:
            axes.axvline(index, color="grey", linestyle=":", linewidth=0.8)
    if log_scale:
        axes.set_yscale("log")
    axes.set_xlabel("iteration (all levels)")
    axes.set_ylabel("loss")
    axes.legend(loc="upper right")
    figure.tight_layout()
    figure.savefig(path)
    return figure
