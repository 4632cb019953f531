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
"""Sphinx configuration."""

import os
import sys

sys.path.insert(0, os.path.abspath(".."))

from unmix._version import __version__  # noqa: E402


project = "UnmixStereo"
copyright = "2026, The UnmixStereo Development Team"  # pylint: disable=redefined-builtin
author = "The UnmixStereo Development Team"
version = __version__
release = __version__

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.napoleon",
    "sphinx.ext.mathjax",
    "sphinx.ext.viewcode",
]
napoleon_google_docstring = False
napoleon_numpy_docstring = True
autodoc_member_order = "bysource"

templates_path = []
exclude_patterns = ["_build"]
html_static_path = []
html_extra_path = ["run_report.schema.json"]
html_theme = "alabaster"
