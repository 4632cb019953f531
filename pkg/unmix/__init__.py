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


from unmix._version import __version__
from unmix.image import *
from unmix._io import *
from unmix.mixture import *
from unmix.sampling import *
from unmix.losses import *
from unmix.oracle import *
from unmix.solver import *
from unmix.metrics import *
from unmix.config import *
from unmix.synthetic import *
from unmix.plot import *
